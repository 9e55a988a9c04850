"""Journal-discriminability retrieval benchmark over embedded documents.

For a query drawn from journal J, rank every other pool member by L2
distance (ties broken by ascending index) and score:

    precision@k   fraction of the k nearest neighbors labeled J
    precision@R   precision@k at k = R, where R is the number of other
                  pool members labeled J (the query never counts as its
                  own neighbor)
    MAP@R         average precision within the top R ranks, normalized by
                  the number of hits found there (0 when there are none)

run_benchmark aggregates means over queries sampled without replacement.
Its headline precision column caps the neighborhood size at R per query,
so a perfect embedding scores 1.0 even when a desk-scale pool holds fewer
than k same-label members; at corpus scale the cap never binds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from semspace.store import CorpusStore


class SingletonLabelError(ValueError):
    """The query's label has no other members, so R is undefined."""


@dataclass
class LabeledPool:
    """Aligned embedding rows, labels, and pmids for one benchmark pool."""

    vectors: np.ndarray  # (N, D')
    labels: list[str]
    pmids: list[int]

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2:
            raise ValueError("vectors must be 2-D")
        n = self.vectors.shape[0]
        if len(self.labels) != n or len(self.pmids) != n:
            raise ValueError("vectors, labels, and pmids must be aligned")

    @property
    def size(self) -> int:
        return self.vectors.shape[0]

    def label_count(self, label: str) -> int:
        return sum(1 for l in self.labels if l == label)


def ranking(pool: LabeledPool, query_index: int) -> np.ndarray:
    """All other indices ordered by (L2 distance, index), nearest first."""
    n = pool.size
    if not 0 <= query_index < n:
        raise ValueError(f"query_index {query_index} out of range")
    deltas = pool.vectors - pool.vectors[query_index]
    distances = np.einsum("ij,ij->i", deltas, deltas)
    order = np.lexsort((np.arange(n), distances))
    return order[order != query_index]


def precision_at_k(pool: LabeledPool, query_index: int, k: int) -> float:
    """Share of the query's k nearest neighbors that carry its label."""
    if not 1 <= k <= pool.size - 1:
        raise ValueError(f"k must satisfy 1 <= k <= N-1, got k={k}, N={pool.size}")
    label = pool.labels[query_index]
    neighbors = ranking(pool, query_index)[:k]
    hits = sum(1 for idx in neighbors if pool.labels[idx] == label)
    return hits / k


def _r_of(pool: LabeledPool, query_index: int) -> int:
    r = pool.label_count(pool.labels[query_index]) - 1
    if r < 1:
        raise SingletonLabelError(
            f"label {pool.labels[query_index]!r} has a single member; R is undefined"
        )
    return r


def precision_at_R(pool: LabeledPool, query_index: int) -> float:
    """precision@k with k set to the count of available same-label items."""
    return precision_at_k(pool, query_index, _r_of(pool, query_index))


def map_at_R(pool: LabeledPool, query_index: int) -> float:
    """Hits-normalized average precision within the top R ranks."""
    r = _r_of(pool, query_index)
    label = pool.labels[query_index]
    neighbors = ranking(pool, query_index)[:r]
    hits = 0
    total = 0.0
    for rank, idx in enumerate(neighbors, start=1):
        if pool.labels[idx] == label:
            hits += 1
            total += hits / rank
    return total / hits if hits else 0.0


@dataclass
class RetrievalReport:
    """Aggregated benchmark means plus the sampling provenance."""

    identifier: str
    n_queries: int
    seed: int
    k: int
    precision_at_k: float
    precision_at_r: float
    map_at_r: float
    per_label: dict[str, dict[str, float]] = field(default_factory=dict)
    n_requested: int = 0
    skipped_singletons: int = 0

    def to_dict(self) -> dict:
        return {
            "identifier": self.identifier,
            "n_queries": self.n_queries,
            "n_requested": self.n_requested,
            "skipped_singletons": self.skipped_singletons,
            "seed": self.seed,
            "k": self.k,
            "precision_at_k": self.precision_at_k,
            "precision_at_r": self.precision_at_r,
            "map_at_r": self.map_at_r,
            "per_label": self.per_label,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def run_benchmark(
    pool: LabeledPool,
    n_queries: int = 5000,
    seed: int = 0,
    k: int = 500,
    identifier: str = "",
) -> RetrievalReport:
    """Sample queries without replacement and aggregate the three metrics.

    The precision@k column uses k' = min(k, R) per query (see module
    docstring). Queries whose label is a singleton are skipped and
    counted. Deterministic for a fixed (pool, n_queries, seed, k).
    """
    n = pool.size
    if n_queries < 1 or n_queries > n:
        raise ValueError(f"n_queries must satisfy 1 <= n_queries <= N, got {n_queries}, N={n}")
    rng = np.random.default_rng(seed)
    queries = rng.choice(n, size=n_queries, replace=False)
    p_k: list[float] = []
    p_r: list[float] = []
    m_r: list[float] = []
    by_label: dict[str, list[list[float]]] = {}
    skipped = 0
    for query_index in queries:
        label = pool.labels[query_index]
        r = pool.label_count(label) - 1
        if r < 1:
            skipped += 1
            continue
        neighbors = ranking(pool, query_index)
        k_eff = min(k, r)
        top_k = neighbors[:k_eff]
        pk = sum(1 for idx in top_k if pool.labels[idx] == label) / k_eff
        hits = 0
        ap = 0.0
        for rank, idx in enumerate(neighbors[:r], start=1):
            if pool.labels[idx] == label:
                hits += 1
                ap += hits / rank
        pr = hits / r
        mr = ap / hits if hits else 0.0
        p_k.append(pk)
        p_r.append(pr)
        m_r.append(mr)
        by_label.setdefault(label, [[], [], []])
        by_label[label][0].append(pk)
        by_label[label][1].append(pr)
        by_label[label][2].append(mr)
    if not p_k:
        raise ValueError("no scorable queries: every sampled label was a singleton")
    per_label = {
        label: {
            "n_queries": len(vals[0]),
            "precision_at_k": float(np.mean(vals[0])),
            "precision_at_r": float(np.mean(vals[1])),
            "map_at_r": float(np.mean(vals[2])),
        }
        for label, vals in sorted(by_label.items())
    }
    report = RetrievalReport(
        identifier=identifier,
        n_queries=len(p_k),
        seed=seed,
        k=k,
        precision_at_k=float(np.mean(p_k)),
        precision_at_r=float(np.mean(p_r)),
        map_at_r=float(np.mean(m_r)),
        per_label=per_label,
        n_requested=n_queries,
        skipped_singletons=skipped,
    )
    for value in (report.precision_at_k, report.precision_at_r, report.map_at_r):
        if not 0.0 <= value <= 1.0:
            raise AssertionError(f"benchmark mean {value} escaped [0, 1]")
    return report


def pool_from_store(
    store: CorpusStore,
    space_id: str,
    journals: Sequence[str],
    year: Optional[int] = None,
) -> LabeledPool:
    """Assemble a benchmark pool from stored embeddings of whole journals.

    Rows follow journal argument order, then store insertion order;
    records without an embedding in the space are left out.
    """
    pmids: list[int] = []
    labels: list[str] = []
    for journal in journals:
        for record in store.query(journal=journal, year=year):
            pmids.append(record.pmid)
            labels.append(journal)
    matrix, found = store.get_embeddings(space_id, pmids)
    keep = np.flatnonzero(found)
    return LabeledPool(
        vectors=matrix[keep],
        labels=[labels[i] for i in keep],
        pmids=[pmids[i] for i in keep],
    )
