"""Reduce token activations (or static word vectors) to document vectors.

Strategy tags, used in space ids and CLI flags:

    mean_tokens       mean over regular tokens (specials excluded)
    cls               the leading classification token's activation
    mean_long_tokens  mean over regular tokens of >= 5 characters
    cls_concat_mean   cls followed by mean_tokens (length 2D)
    mean_words        mean of per-word means (subwords grouped first)
    static_mean       mean of unit-normalized static word vectors

Means are accumulated in double precision and emitted as float32.
Contextual pooled vectors are not unit-normalized; only static word
vectors are normalized before averaging.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from semspace.activation_io import ActivationMatrix, WordAlignment, WordVectorTable

STRATEGIES = (
    "mean_tokens",
    "cls",
    "mean_long_tokens",
    "cls_concat_mean",
    "mean_words",
    "static_mean",
)


class EmptyPoolError(ValueError):
    """No token/word qualified for the requested pool."""


class MissingClsError(ValueError):
    """The first token is not a special classification token."""


@dataclass(frozen=True)
class PooledVector:
    """One document embedding plus the strategy that produced it."""

    pmid: int
    strategy: str
    vector: np.ndarray  # float32, shape (D',)
    fallback: bool = False


def _mean_rows(rows: np.ndarray, indices: np.ndarray) -> np.ndarray:
    return rows[indices].astype(np.float64).mean(axis=0).astype(np.float32)


def _regular_indices(m: ActivationMatrix) -> np.ndarray:
    return np.flatnonzero(~m.special_mask)


def pool_mean_tokens(m: ActivationMatrix) -> PooledVector:
    """Arithmetic mean of the activation rows whose special_mask is 0."""
    regular = _regular_indices(m)
    if regular.size == 0:
        raise EmptyPoolError(f"pmid {m.pmid}: no regular tokens to pool")
    return PooledVector(m.pmid, "mean_tokens", _mean_rows(m.rows, regular))


def pool_cls(m: ActivationMatrix) -> PooledVector:
    """The first row, which must be a special (classification) token."""
    if m.n_tokens == 0 or not m.special_mask[0]:
        raise MissingClsError(f"pmid {m.pmid}: first token is not a special token")
    return PooledVector(m.pmid, "cls", m.rows[0].astype(np.float32).copy())


def pool_long_tokens(
    m: ActivationMatrix,
    min_chars: int = 5,
    continuation_marker: str = "##",
) -> PooledVector:
    """Mean over regular tokens spanning at least min_chars characters.

    Length is counted after stripping the continuation marker, which is a
    tokenizer artifact rather than content. When no token qualifies the
    result falls back to pool_mean_tokens with the fallback flag set.
    """
    regular = _regular_indices(m)
    if regular.size == 0:
        raise EmptyPoolError(f"pmid {m.pmid}: no regular tokens to pool")

    def span(token: str) -> int:
        if continuation_marker and token.startswith(continuation_marker):
            return len(token) - len(continuation_marker)
        return len(token)

    long_idx = np.array([i for i in regular if span(m.tokens[i]) >= min_chars], dtype=np.intp)
    if long_idx.size == 0:
        base = pool_mean_tokens(m)
        return PooledVector(m.pmid, "mean_long_tokens", base.vector, fallback=True)
    return PooledVector(m.pmid, "mean_long_tokens", _mean_rows(m.rows, long_idx))


def pool_cls_concat_mean(m: ActivationMatrix) -> PooledVector:
    """pool_cls followed by pool_mean_tokens; output length is 2D."""
    head = pool_cls(m)
    tail = pool_mean_tokens(m)
    return PooledVector(m.pmid, "cls_concat_mean", np.concatenate([head.vector, tail.vector]))


def pool_mean_words(m: ActivationMatrix, alignment: WordAlignment) -> PooledVector:
    """Two-stage mean: average each word's subword rows, then average words."""
    if len(alignment) == 0:
        raise EmptyPoolError(f"pmid {m.pmid}: alignment has no word groups")
    for group in alignment:
        for index in group:
            if index >= m.n_tokens or m.special_mask[index]:
                raise ValueError(f"pmid {m.pmid}: alignment group index {index} is not a regular token")
    word_means = np.stack(
        [m.rows[np.asarray(group, dtype=np.intp)].astype(np.float64).mean(axis=0) for group in alignment]
    )
    return PooledVector(m.pmid, "mean_words", word_means.mean(axis=0).astype(np.float32))


def pool_static_mean(words: Sequence[str], table: WordVectorTable, pmid: int = 0) -> PooledVector:
    """Mean of unit-normalized static vectors; OOV words are omitted from
    both the sum and the divisor. Zero-norm table vectors cannot be
    normalized and are omitted the same way."""
    units = []
    for word in words:
        vector = table.lookup(word)
        if vector is None:
            continue
        norm = np.linalg.norm(vector.astype(np.float64))
        if norm == 0.0:
            continue
        units.append(vector.astype(np.float64) / norm)
    if not units:
        raise EmptyPoolError("every word is out of vocabulary")
    return PooledVector(pmid, "static_mean", np.stack(units).mean(axis=0).astype(np.float32))
