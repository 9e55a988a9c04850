import gzip
import json
from pathlib import Path

import numpy as np
import pytest

from semspace.activation_io import ActivationMatrix

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def ten_archive_manifest() -> dict:
    return json.loads((FIXTURES / "archive_ten_manifest.json").read_text(encoding="utf-8"))


@pytest.fixture()
def ten_archive_gz(tmp_path) -> Path:
    """The hand-written 10-citation archive, gzipped like an NLM bulk file."""
    raw = (FIXTURES / "archive_ten.xml").read_bytes()
    path = tmp_path / "pubmed_fixture.xml.gz"
    path.write_bytes(gzip.compress(raw, mtime=0))
    return path


def gz_bytes(xml: str) -> bytes:
    return gzip.compress(xml.encode("utf-8"), mtime=0)


def make_doc(
    rng: np.random.Generator,
    pmid: int,
    n_tokens: int = 6,
    dim: int = 8,
    with_losses: bool = False,
    specials_at_ends: bool = True,
) -> ActivationMatrix:
    """Random activation matrix with the usual [CLS] ... [SEP] framing."""
    tokens = ["[CLS]"] + [f"tok{i}" for i in range(n_tokens - 2)] + ["[SEP]"]
    special = np.zeros(n_tokens, dtype=bool)
    if specials_at_ends:
        special[0] = special[-1] = True
    rows = rng.standard_normal((n_tokens, dim)).astype(np.float32)
    losses = None
    if with_losses:
        losses = np.abs(rng.standard_normal(n_tokens)).astype(np.float32)
    return ActivationMatrix(pmid=pmid, tokens=tokens, special_mask=special, rows=rows, losses=losses)
