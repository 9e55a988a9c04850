import os

import pytest

os.environ.setdefault("HF_HUB_OFFLINE", "1")
os.environ.setdefault("TRANSFORMERS_OFFLINE", "1")

VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "the", "a", "of", "in", "we", "and", "with",
    "neuro", "##physiology", "##imaging", "##nal",
    "cortex", "signal", "activity", "brain", "cells", "firing",
    "rates", "response", "visual", "motor", "patients", "studied",
    "measured", "recording", "maps", "human", "binding", "receptor",
    "timing", "spike", "slices", "network", "coupling", "reflex",
    "num", "<", ">", ".", ",", "%",
]

FIXTURE_TEXTS = [
    (1001, "the neurophysiology of cortex ."),
    (1002, "we studied firing rates in visual cortex ."),
    (1003, "neuroimaging maps of human brain activity ."),
    (1004, "spike timing in slices of motor cortex ."),
    (1005, "receptor binding measured in <NUM> patients ."),
    (1006, "network coupling and the reflex response ."),
    (1007, "recording signal from cells in the brain ."),
    (1008, "the response of motor cells to stimulation ."),
    (1009, "we measured activity with <NUM> % precision ."),
    (1010, "human visual cortex maps and their timing ."),
    (1011, "firing cells in the neurophysiology of reflex ."),
    (1012, "a signal of coupling in brain slices ."),
    (1013, "the timing of spike rates in patients ."),
    (1014, "neuroimaging of the human motor network ."),
    (1015, "we studied receptor activity in visual cells ."),
    (1016, "brain recording with the reflex network ."),
    (1017, "the cortex response measured in slices ."),
    (1018, "binding rates of the receptor in cortex ."),
    (1019, "a human brain signal with spike timing ."),
    (1020, "maps of network activity in motor cortex ."),
]


@pytest.fixture(scope="session")
def tiny_checkpoint(tmp_path_factory) -> str:
    """A local randomly initialized masked-LM checkpoint; resolvable offline."""
    import torch
    from transformers import BertConfig, BertForMaskedLM, BertTokenizer

    directory = tmp_path_factory.mktemp("tiny-ckpt")
    (directory / "vocab.txt").write_text("\n".join(VOCAB) + "\n", encoding="utf-8")
    tokenizer = BertTokenizer(str(directory / "vocab.txt"))
    config = BertConfig(
        vocab_size=len(VOCAB),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=128,
    )
    torch.manual_seed(1234)
    model = BertForMaskedLM(config)
    tokenizer.save_pretrained(str(directory))
    model.save_pretrained(str(directory))
    return str(directory)


@pytest.fixture(scope="session")
def fixture_texts() -> list[tuple[int, str]]:
    return list(FIXTURE_TEXTS)


@pytest.fixture()
def texts_tsv(tmp_path):
    path = tmp_path / "texts.tsv"
    path.write_text(
        "".join(f"{pmid}\t{text}\n" for pmid, text in FIXTURE_TEXTS), encoding="utf-8"
    )
    return path
