"""Run pretrained transformer checkpoints over normalized text and capture
top-layer activations (and optionally per-token masked-LM losses) into
containers.

Losses follow the masked pseudo-perplexity recipe: a token's loss is the
cross-entropy of predicting it with that single position masked. Exact
mode runs one forward pass per regular token. A stride s > 0 approximates
this with s passes, masking every s-th position simultaneously; masked
positions then see other masked positions, which is cheaper but no longer
exact. Special tokens are never scored and carry loss 0.

The bridge emits raw activations only: no demeaning, no normalization,
activations always 32-bit regardless of model compute precision.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field

import numpy as np

from encoder_bridge.tacs import TokenActivations, write_tacs


class EncodeError(RuntimeError):
    """The job cannot run at all (for example an unresolvable checkpoint)."""


@dataclass
class EncodeJob:
    """One batch encode request over the TSV/container boundary."""

    checkpoint: str
    inputs: list[tuple[int, str]]
    max_length: int = 512
    output: str = "activations.tacs"
    emit_losses: bool = False
    loss_stride: int = 0  # 0 = exact (one pass per token)
    batch_size: int = 8
    device: str = "cpu"

    def __post_init__(self):
        if not self.checkpoint:
            raise ValueError("checkpoint name must be nonempty")
        if self.max_length < 2:
            raise ValueError("max_length must leave room for the two special tokens")


@dataclass
class EncodeSummary:
    encoded: int = 0
    skipped: list[int] = field(default_factory=list)
    truncated: list[int] = field(default_factory=list)


def _load(job: EncodeJob):
    from transformers import AutoModel, AutoModelForMaskedLM, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(job.checkpoint)
        if job.emit_losses:
            model = AutoModelForMaskedLM.from_pretrained(job.checkpoint)
        else:
            model = AutoModel.from_pretrained(job.checkpoint)
    except (OSError, ValueError) as exc:
        raise EncodeError(f"cannot resolve checkpoint {job.checkpoint!r}: {exc}") from exc
    model.eval()
    model.to(job.device)
    return tokenizer, model


def _token_losses(model, token_ids, special, mask_id, stride: int, device: str) -> np.ndarray:
    """Cross-entropy per token with that token masked out."""
    import torch
    import torch.nn.functional as F

    t = len(token_ids)
    losses = np.zeros(t, dtype=np.float32)
    regular = [i for i in range(t) if not special[i]]
    if not regular:
        return losses
    if stride and stride > 0:
        groups = [regular[offset::stride] for offset in range(min(stride, len(regular)))]
    else:
        groups = [[i] for i in regular]
    base = torch.tensor(token_ids, dtype=torch.long, device=device)
    for group in groups:
        if not group:
            continue
        masked = base.clone()
        masked[group] = mask_id
        logits = model(input_ids=masked[None, :]).logits[0]
        for position in group:
            loss = F.cross_entropy(logits[position][None, :], base[position][None])
            losses[position] = max(float(loss), 0.0)
    return losses


def encode_documents(job: EncodeJob) -> EncodeSummary:
    """Tokenize, truncate, and encode every input into one container."""
    import torch

    tokenizer, model = _load(job)
    summary = EncodeSummary()
    docs: list[TokenActivations] = []
    pending: list[tuple[int, list[int]]] = []
    for pmid, text in job.inputs:
        if not text.strip():
            print(f"bridge encode: pmid {pmid} has empty text, skipped", file=sys.stderr)
            summary.skipped.append(pmid)
            continue
        ids = tokenizer(text, truncation=True, max_length=job.max_length)["input_ids"]
        full = tokenizer(text, truncation=False)["input_ids"]
        if len(full) > len(ids):
            print(
                f"bridge encode: pmid {pmid} truncated from {len(full)} to {len(ids)} tokens",
                file=sys.stderr,
            )
            summary.truncated.append(pmid)
        pending.append((pmid, ids))

    with torch.no_grad():
        for start in range(0, len(pending), job.batch_size):
            chunk = pending[start : start + job.batch_size]
            width = max(len(ids) for _, ids in chunk)
            pad_id = tokenizer.pad_token_id or 0
            input_ids = torch.full((len(chunk), width), pad_id, dtype=torch.long, device=job.device)
            attention = torch.zeros((len(chunk), width), dtype=torch.long, device=job.device)
            for row, (_, ids) in enumerate(chunk):
                input_ids[row, : len(ids)] = torch.tensor(ids, dtype=torch.long)
                attention[row, : len(ids)] = 1
            output = model(input_ids=input_ids, attention_mask=attention, output_hidden_states=True)
            hidden = output.hidden_states[-1]
            # exactly the classification/separator/padding ids: [UNK] is a
            # content position and must stay poolable
            special_ids = {
                tokenizer.cls_token_id,
                tokenizer.sep_token_id,
                tokenizer.pad_token_id,
            } - {None}
            for row, (pmid, ids) in enumerate(chunk):
                t = len(ids)
                tokens = tokenizer.convert_ids_to_tokens(ids)
                special = np.array([token_id in special_ids for token_id in ids], dtype=bool)
                rows = hidden[row, :t].cpu().numpy().astype(np.float32)
                losses = None
                if job.emit_losses:
                    losses = _token_losses(
                        model, ids, special, tokenizer.mask_token_id, job.loss_stride, job.device
                    )
                docs.append(TokenActivations(pmid, tokens, special, rows, losses))
                summary.encoded += 1
    write_tacs(docs, job.output)
    return summary
