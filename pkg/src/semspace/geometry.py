"""Semantic-space construction: corpus mean, demeaning, PCA, exact kNN.

PCA is computed from the eigendecomposition of the sample covariance
(1/(N-1) normalization) with a deterministic sign convention: within each
basis row the coordinate of largest magnitude is nonnegative, ties going
to the lowest index. Raw encoder embeddings are strongly anisotropic, so
spaces are built on demeaned vectors; anisotropy() quantifies the effect
as the mean cosine similarity of random vector pairs.

All internal arithmetic is double precision. The serialized form is a
length-framed JSON header (space_id, dimensions, seed, explained
variances) followed by the mean vector and basis rows as little-endian
32-bit floats.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np


class RankError(ValueError):
    """Requested more principal directions than the sample supports."""


class AnisotropyError(ValueError):
    """The sample cannot support pair sampling (fewer than 2 nonzero rows)."""


@dataclass
class SemanticSpace:
    """A fitted transform: mean vector plus an orthonormal PCA basis."""

    space_id: str
    dim_in: int
    dim_out: int
    mean: np.ndarray  # float64, shape (D,)
    basis: np.ndarray  # float64, shape (D', D), rows orthonormal
    explained_variance: np.ndarray  # float64, shape (D',), nonincreasing
    seed: Optional[int] = None

    def validate(self, tol: float = 1e-6) -> None:
        if self.mean.shape != (self.dim_in,):
            raise ValueError("mean length != dim_in")
        if self.basis.shape != (self.dim_out, self.dim_in):
            raise ValueError("basis shape != (dim_out, dim_in)")
        gram = self.basis @ self.basis.T
        if not np.allclose(gram, np.eye(self.dim_out), atol=tol):
            raise ValueError("basis rows are not orthonormal")
        ev = self.explained_variance
        if ev.shape != (self.dim_out,) or (ev < 0).any() or (np.diff(ev) > 0).any():
            raise ValueError("explained variances must be nonnegative and nonincreasing")


def estimate_mean(sample: np.ndarray) -> np.ndarray:
    """Column-wise arithmetic mean of an N x D sample."""
    sample = np.asarray(sample, dtype=np.float64)
    if sample.ndim != 2 or sample.shape[0] < 1:
        raise ValueError("sample must be a nonempty 2-D matrix")
    return sample.mean(axis=0)


def demean(vectors: np.ndarray, mean: np.ndarray) -> np.ndarray:
    """Subtract the shared mean component from every row."""
    vectors = np.asarray(vectors, dtype=np.float64)
    mean = np.asarray(mean, dtype=np.float64)
    if vectors.shape[-1] != mean.shape[0]:
        raise ValueError(f"dimension mismatch: vectors {vectors.shape[-1]}, mean {mean.shape[0]}")
    return vectors - mean


def fit_pca(
    sample: np.ndarray,
    d_out: int,
    space_id: str = "pca",
    base_mean: Optional[np.ndarray] = None,
    seed: Optional[int] = None,
) -> SemanticSpace:
    """Fit the top-d_out principal directions of the sample covariance.

    The fit re-centers defensively: the sample's own mean is folded into
    the space's mean vector, composed with base_mean when the caller
    already demeaned the sample against a corpus mean. seed is carried
    into the space metadata for provenance only.
    """
    sample = np.asarray(sample, dtype=np.float64)
    if sample.ndim != 2:
        raise ValueError("sample must be a 2-D matrix")
    n, dim = sample.shape
    if d_out < 1:
        raise ValueError(f"d_out must be >= 1, got {d_out}")
    if d_out > min(n - 1, dim):
        raise RankError(f"d_out={d_out} exceeds sample rank bound {min(n - 1, dim)}")
    residual_mean = sample.mean(axis=0)
    centered = sample - residual_mean
    cov = (centered.T @ centered) / (n - 1)
    eigenvalues, eigenvectors = np.linalg.eigh(cov)
    order = np.argsort(eigenvalues)[::-1][:d_out]
    variances = np.maximum(eigenvalues[order], 0.0)
    basis = eigenvectors[:, order].T.copy()
    for row in basis:
        anchor = np.argmax(np.abs(row))
        if row[anchor] < 0:
            row *= -1.0
    mean = residual_mean if base_mean is None else np.asarray(base_mean, dtype=np.float64) + residual_mean
    space = SemanticSpace(
        space_id=space_id,
        dim_in=dim,
        dim_out=d_out,
        mean=mean,
        basis=basis,
        explained_variance=variances,
        seed=seed,
    )
    space.validate()
    return space


def apply_pca(space: SemanticSpace, vectors: np.ndarray) -> np.ndarray:
    """Project rows into the space: row_out = basis @ (row_in - mean)."""
    vectors = np.asarray(vectors, dtype=np.float64)
    single = vectors.ndim == 1
    if single:
        vectors = vectors[None, :]
    if vectors.shape[1] != space.dim_in:
        raise ValueError(f"dimension mismatch: vectors {vectors.shape[1]}, space {space.dim_in}")
    out = (vectors - space.mean) @ space.basis.T
    return out[0] if single else out


def knn(
    query_index: int,
    candidates: np.ndarray,
    k: int,
    metric: str = "l2",
) -> list[int]:
    """Exact k nearest neighbors of one row among all the others.

    Returns candidate indices by ascending L2 distance, ties broken by
    ascending index; the query row is excluded from its own result.
    """
    if metric != "l2":
        raise ValueError(f"unsupported metric {metric!r}")
    points = np.asarray(candidates, dtype=np.float64)
    n = points.shape[0]
    if not 0 <= query_index < n:
        raise ValueError(f"query_index {query_index} out of range")
    if not 1 <= k <= n - 1:
        raise ValueError(f"k must satisfy 1 <= k <= N-1, got k={k}, N={n}")
    deltas = points - points[query_index]
    distances = np.einsum("ij,ij->i", deltas, deltas)
    order = np.lexsort((np.arange(n), distances))
    order = order[order != query_index]
    return order[:k].tolist()


@dataclass
class AnisotropyReport:
    """Mean cosine similarity over sampled vector pairs."""

    mean_cosine: float
    n_pairs: int
    resampled: int = 0


def pair_cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity clipped to [-1, 1].

    Identical inputs short-circuit to exactly 1.0: self-similarity is 1 by
    definition and must not pick up rounding noise from the norm product.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if np.array_equal(a, b):
        return 1.0
    denominator = np.sqrt(a @ a) * np.sqrt(b @ b)
    if denominator == 0.0:
        raise ValueError("cosine undefined for zero-norm input")
    return float(np.clip((a @ b) / denominator, -1.0, 1.0))


def anisotropy(sample: np.ndarray, n_pairs: int, seed: int) -> AnisotropyReport:
    """Mean cosine over n_pairs random distinct row pairs, deterministic per seed.

    Pairs touching a zero-norm row are resampled and counted in the
    report's diagnostics.
    """
    sample = np.asarray(sample, dtype=np.float64)
    if sample.ndim != 2:
        raise ValueError("sample must be a 2-D matrix")
    norms = np.linalg.norm(sample, axis=1)
    if int((norms > 0).sum()) < 2:
        raise AnisotropyError("need at least 2 rows with nonzero norm")
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    rng = np.random.default_rng(seed)
    n = sample.shape[0]
    total = 0.0
    resampled = 0
    collected = 0
    while collected < n_pairs:
        i, j = rng.integers(0, n, size=2)
        if i == j:
            continue
        if norms[i] == 0.0 or norms[j] == 0.0:
            resampled += 1
            continue
        total += pair_cosine(sample[i], sample[j])
        collected += 1
    return AnisotropyReport(mean_cosine=total / n_pairs, n_pairs=n_pairs, resampled=resampled)


# -- serialization ---------------------------------------------------------

_SPACE_HEADER_LEN = struct.Struct("<I")


def save_space(space: SemanticSpace, path: Union[str, Path]) -> None:
    """Persist a space: framed JSON header, then mean and basis as float32."""
    header = json.dumps(
        {
            "space_id": space.space_id,
            "dim_in": space.dim_in,
            "dim_out": space.dim_out,
            "seed": space.seed,
            "explained_variance": [float(v) for v in space.explained_variance],
        },
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    body = space.mean.astype("<f4").tobytes() + space.basis.astype("<f4").tobytes()
    Path(path).write_bytes(_SPACE_HEADER_LEN.pack(len(header)) + header + body)


def load_space(path: Union[str, Path]) -> SemanticSpace:
    blob = Path(path).read_bytes()
    if len(blob) < _SPACE_HEADER_LEN.size:
        raise ValueError(f"{path}: truncated space file")
    (header_len,) = _SPACE_HEADER_LEN.unpack_from(blob)
    header_end = _SPACE_HEADER_LEN.size + header_len
    meta = json.loads(blob[_SPACE_HEADER_LEN.size : header_end].decode("utf-8"))
    dim_in, dim_out = meta["dim_in"], meta["dim_out"]
    expected = header_end + 4 * dim_in * (dim_out + 1)
    if len(blob) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(blob)}")
    mean = np.frombuffer(blob, dtype="<f4", count=dim_in, offset=header_end).astype(np.float64)
    basis = (
        np.frombuffer(blob, dtype="<f4", count=dim_in * dim_out, offset=header_end + 4 * dim_in)
        .reshape(dim_out, dim_in)
        .astype(np.float64)
    )
    space = SemanticSpace(
        space_id=meta["space_id"],
        dim_in=dim_in,
        dim_out=dim_out,
        mean=mean,
        basis=basis,
        explained_variance=np.array(meta["explained_variance"], dtype=np.float64),
        seed=meta["seed"],
    )
    space.validate(tol=1e-5)  # float32 round-trip loosens orthonormality slightly
    return space
