"""Fit a 2-D neighbor embedding on a reference vector set and project
other vectors into it, over the EMB1/TSV boundary.

When the umap-learn package is importable it does the fitting and its
native transform handles projection. Otherwise a built-in fallback keeps
the operation available: a spectral embedding of the symmetrized kNN
graph (normalized Laplacian, smallest nontrivial eigenvectors), with
projection by inverse-distance interpolation over each point's nearest
reference neighbors. Both paths are deterministic for a fixed seed, and
both preserve cluster structure, which is what downstream maps need.
"""

from __future__ import annotations

from pathlib import Path
from typing import Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from encoder_bridge.emb import read_emb

try:
    import umap  # optional; the spectral fallback covers its absence

    _HAVE_UMAP = True
except ImportError:
    _HAVE_UMAP = False


def _chunked_sq_distances(queries: np.ndarray, points: np.ndarray, chunk: int = 512):
    """Yield (start, squared-distance block) without forming an N x M giant."""
    sq_points = (points**2).sum(axis=1)
    for start in range(0, queries.shape[0], chunk):
        block = queries[start : start + chunk]
        d2 = sq_points[None, :] - 2.0 * block @ points.T + (block**2).sum(axis=1)[:, None]
        np.maximum(d2, 0.0, out=d2)
        yield start, d2


def _knn_indices(queries: np.ndarray, points: np.ndarray, k: int, skip_self: bool) -> np.ndarray:
    out = np.empty((queries.shape[0], k), dtype=np.intp)
    for start, d2 in _chunked_sq_distances(queries, points):
        for row in range(d2.shape[0]):
            order = np.lexsort((np.arange(points.shape[0]), d2[row]))
            if skip_self:
                order = order[order != start + row]
            out[start + row] = order[:k]
    return out


def _spectral_fit(reference: np.ndarray, n_neighbors: int) -> np.ndarray:
    n = reference.shape[0]
    if n == 1:
        return np.zeros((1, 2))
    k = min(n_neighbors, n - 1)
    neighbors = _knn_indices(reference, reference, k, skip_self=True)
    rows = np.repeat(np.arange(n), k)
    adjacency = sp.coo_matrix(
        (np.ones(n * k), (rows, neighbors.reshape(-1))), shape=(n, n)
    ).tocsr()
    adjacency = adjacency.maximum(adjacency.T)

    n_comp, labels = connected_components(adjacency, directed=False)
    if n_comp > 1:
        # Weakly bridge each extra component to the rest at its closest
        # cross-component pair, so the Laplacian has a unique null vector.
        links_row, links_col = [], []
        for comp in range(1, n_comp):
            inside = np.flatnonzero(labels == comp)
            outside = np.flatnonzero(labels != comp)
            best = (np.inf, inside[0], outside[0])
            for start, d2 in _chunked_sq_distances(reference[inside], reference[outside]):
                local = np.unravel_index(np.argmin(d2), d2.shape)
                value = d2[local]
                if value < best[0]:
                    best = (value, inside[start + local[0]], outside[local[1]])
            links_row.extend([best[1], best[2]])
            links_col.extend([best[2], best[1]])
        bridges = sp.coo_matrix(
            (np.full(len(links_row), 0.1), (links_row, links_col)), shape=(n, n)
        ).tocsr()
        adjacency = adjacency.maximum(bridges)

    degree = np.asarray(adjacency.sum(axis=1)).reshape(-1)
    inv_sqrt = 1.0 / np.sqrt(np.maximum(degree, 1e-12))
    scale = sp.diags(inv_sqrt)
    laplacian = sp.identity(n, format="csr") - scale @ adjacency @ scale
    if n <= 2000:
        eigenvalues, eigenvectors = np.linalg.eigh(laplacian.toarray())
        vectors = eigenvectors[:, 1:3]
    else:
        from scipy.sparse.linalg import eigsh

        _, eigenvectors = eigsh(
            laplacian, k=3, sigma=0, which="LM", v0=np.full(n, 1.0 / np.sqrt(n))
        )
        vectors = eigenvectors[:, 1:3]
    coords = vectors * np.sqrt(n)
    for column in range(coords.shape[1]):
        anchor = np.argmax(np.abs(coords[:, column]))
        if coords[anchor, column] < 0:
            coords[:, column] *= -1.0
    return coords


def _interpolate(
    reference: np.ndarray, fitted: np.ndarray, targets: np.ndarray, n_neighbors: int
) -> np.ndarray:
    k = min(n_neighbors, reference.shape[0])
    out = np.empty((targets.shape[0], 2))
    for start, d2 in _chunked_sq_distances(targets, reference):
        for row in range(d2.shape[0]):
            order = np.argsort(d2[row], kind="stable")[:k]
            dists = np.sqrt(d2[row][order])
            if dists[0] == 0.0:
                out[start + row] = fitted[order[0]]
                continue
            weights = 1.0 / dists
            weights /= weights.sum()
            out[start + row] = weights @ fitted[order]
    return out


def export_umap(
    reference_path: Union[str, Path],
    project_path: Union[str, Path],
    out_path: Union[str, Path],
    seed: int = 0,
    n_neighbors: int = 15,
) -> int:
    """Fit on the reference EMB1 file, project the second file, write TSV.

    Returns the number of projected rows. The TSV is `pmid\\tx\\ty`,
    UTF-8, LF, deterministic for fixed inputs and seed.
    """
    ref_pmids, reference = read_emb(reference_path)
    proj_pmids, targets = read_emb(project_path)
    if reference.shape[0] == 0:
        raise ValueError("reference set is empty")
    if reference.shape[1] != targets.shape[1]:
        raise ValueError(
            f"dimension mismatch: reference {reference.shape[1]}, projection {targets.shape[1]}"
        )
    reference = reference.astype(np.float64)
    targets = targets.astype(np.float64)
    if _HAVE_UMAP:
        fit = umap.UMAP(n_components=2, n_neighbors=min(n_neighbors, max(2, reference.shape[0] - 1)),
                        random_state=seed).fit(reference)
        coords = np.asarray(fit.transform(targets), dtype=np.float64)
    else:
        fitted = _spectral_fit(reference, n_neighbors)
        coords = _interpolate(reference, fitted, targets, n_neighbors)
    lines = ["pmid\tx\ty\n"]
    for pmid, (x, y) in zip(proj_pmids, coords):
        lines.append(f"{int(pmid)}\t{float(x)!r}\t{float(y)!r}\n")
    Path(out_path).write_text("".join(lines), encoding="utf-8")
    return coords.shape[0]
