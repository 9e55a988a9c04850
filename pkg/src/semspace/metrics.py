"""Semantic metrics over sets of embedded elements.

Breadth measures dispersion of a collection (mean pairwise distance, or
mean distance from the centroid). Distance compares collections through
their centroids. Novelty counts element pairs whose distance clears a
percentile threshold drawn from a reference pairwise-distance sample.
Axis projection scores documents along a direction built from antonym
anchor sets, and archetype mixtures express a document as nonnegative
weights over extremal anchor embeddings. Perplexity aggregates per-token
cross-entropy losses into an exponentiated mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from semspace.geometry import pair_cosine


class LinearDependenceError(ValueError):
    """Archetype vectors do not span a full-rank subspace."""


class DegeneratePairError(ValueError):
    """An anchor pair's centroid difference has zero norm."""


@dataclass
class ElementSet:
    """A named M x D' collection of element vectors (documents, words, keywords)."""

    name: str
    vectors: np.ndarray
    ids: Optional[list[int]] = None

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim == 1:
            self.vectors = self.vectors[None, :]
        if self.vectors.ndim != 2 or self.vectors.shape[0] < 1:
            raise ValueError(f"element set {self.name!r} must hold at least one vector")
        if self.ids is not None and len(self.ids) != self.vectors.shape[0]:
            raise ValueError(f"element set {self.name!r}: ids misaligned with vectors")

    @property
    def size(self) -> int:
        return self.vectors.shape[0]


@dataclass(frozen=True)
class SemanticAxis:
    """A direction in embedding space plus the anchor pairs that built it."""

    vector: np.ndarray
    provenance: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        vec = np.asarray(self.vector, dtype=np.float64).reshape(-1)
        if np.linalg.norm(vec) == 0.0:
            raise ValueError("axis vector must have nonzero norm")
        object.__setattr__(self, "vector", vec)


@dataclass(frozen=True)
class MixtureResult:
    """Nonnegative archetype weights (summing to 1) plus the span residual."""

    weights: np.ndarray
    residual: float
    degenerate: bool = False


def centroid(s: ElementSet) -> np.ndarray:
    """Arithmetic mean of the set's rows."""
    return s.vectors.mean(axis=0)


def pairwise_distances(s: ElementSet) -> np.ndarray:
    """Condensed upper-triangle L2 distances, M(M-1)/2 values."""
    if s.size < 2:
        raise ValueError(f"element set {s.name!r} needs >= 2 elements for pairwise distances")
    chunks = []
    for i in range(s.size - 1):
        deltas = s.vectors[i + 1 :] - s.vectors[i]
        chunks.append(np.sqrt(np.einsum("ij,ij->i", deltas, deltas)))
    return np.concatenate(chunks)


def breadth_pairwise(s: ElementSet) -> float:
    """Mean L2 distance over all unordered element pairs."""
    return float(pairwise_distances(s).mean())


def breadth_sigma(s: ElementSet) -> float:
    """Mean L2 distance of elements from their centroid (dispersion sigma)."""
    deltas = s.vectors - centroid(s)
    return float(np.sqrt(np.einsum("ij,ij->i", deltas, deltas)).mean())


def set_distance(a: ElementSet, b: ElementSet, metric: str = "l2") -> float:
    """Distance between two sets' centroids; cosine distance is 1 - similarity."""
    if a.vectors.shape[1] != b.vectors.shape[1]:
        raise ValueError("element sets differ in dimension")
    ca, cb = centroid(a), centroid(b)
    if metric == "l2":
        return float(np.linalg.norm(ca - cb))
    if metric == "cosine":
        try:
            return 1.0 - pair_cosine(ca, cb)
        except ValueError as exc:
            raise ValueError(f"cosine distance undefined: {exc}") from exc
    raise ValueError(f"unsupported metric {metric!r}")


def distance_threshold(pairs_sample: Sequence[float], percentile: float = 90.0) -> float:
    """Nearest-rank percentile of a pairwise-distance sample."""
    values = np.asarray(pairs_sample, dtype=np.float64)
    if values.size == 0:
        raise ValueError("pairs_sample must be nonempty")
    if not 0.0 < percentile < 100.0:
        raise ValueError("percentile must lie in (0, 100)")
    rank = math.ceil(percentile * values.size / 100.0)
    return float(np.sort(values)[rank - 1])


def novelty_fraction(s: ElementSet, threshold: float) -> float:
    """Fraction of unordered pairs whose distance exceeds the threshold."""
    distances = pairwise_distances(s)
    return float((distances > threshold).sum() / distances.size)


def build_axis(
    positive: Sequence[ElementSet],
    negative: Sequence[ElementSet],
) -> SemanticAxis:
    """Average the unit centroid-differences of aligned anchor pairs.

    Pair i is positive[i] minus negative[i]; each difference is normalized
    before averaging so no single high-norm pair dominates the direction.
    """
    if len(positive) != len(negative) or len(positive) == 0:
        raise ValueError("positive and negative anchor lists must be equal-length and nonempty")
    units = []
    provenance = []
    for index, (pos, neg) in enumerate(zip(positive, negative)):
        if pos.vectors.shape[1] != neg.vectors.shape[1]:
            raise ValueError(f"anchor pair {index} differs in dimension")
        diff = centroid(pos) - centroid(neg)
        norm = np.linalg.norm(diff)
        if norm == 0.0:
            raise DegeneratePairError(
                f"anchor pair {index} ({pos.name!r} vs {neg.name!r}) has identical centroids"
            )
        units.append(diff / norm)
        provenance.append((pos.name, neg.name))
    return SemanticAxis(vector=np.stack(units).mean(axis=0), provenance=tuple(provenance))


def project_on_axis(doc: np.ndarray, axis: SemanticAxis) -> float:
    """Normalized projection of a document onto the axis, in [-1, 1]."""
    doc = np.asarray(doc, dtype=np.float64).reshape(-1)
    if np.linalg.norm(doc) == 0.0:
        raise ValueError("cannot project a zero-norm document")
    return pair_cosine(doc, axis.vector)


def archetype_mixture(doc: np.ndarray, archetypes: Sequence[np.ndarray]) -> MixtureResult:
    """Express a document as a mixture of extremal anchor embeddings.

    Least-squares coordinates in the archetype span are clipped to zero
    and renormalized to sum 1; the residual is the L2 norm of the part of
    the document outside the span. When the span projection is negligible
    (or clipping removes every coordinate) the weights fall back to the
    uniform mixture with the degenerate flag set, keeping downstream
    plotting total.
    """
    anchors = np.asarray(archetypes, dtype=np.float64)
    if anchors.ndim != 2 or anchors.shape[0] < 2:
        raise ValueError("need at least 2 archetype vectors")
    k = anchors.shape[0]
    if np.linalg.matrix_rank(anchors) < k:
        raise LinearDependenceError("archetype vectors are linearly dependent")
    doc = np.asarray(doc, dtype=np.float64).reshape(-1)
    if doc.shape[0] != anchors.shape[1]:
        raise ValueError("document dimension differs from archetype dimension")
    coords, *_ = np.linalg.lstsq(anchors.T, doc, rcond=None)
    span_projection = anchors.T @ coords
    residual = float(np.linalg.norm(doc - span_projection))
    clipped = np.maximum(coords, 0.0)
    total = float(clipped.sum())
    doc_norm = float(np.linalg.norm(doc))
    if total == 0.0 or float(np.linalg.norm(span_projection)) <= 1e-9 * doc_norm:
        return MixtureResult(weights=np.full(k, 1.0 / k), residual=residual, degenerate=True)
    return MixtureResult(weights=clipped / total, residual=residual)


def perplexity(losses: Sequence[float]) -> float:
    """Exponentiated mean of nonnegative per-token cross-entropy losses."""
    values = np.asarray(losses, dtype=np.float64)
    if values.size == 0:
        raise ValueError("losses must be nonempty")
    if not np.isfinite(values).all() or (values < 0).any():
        raise ValueError("losses must be finite and >= 0")
    return float(np.exp(values.mean()))
