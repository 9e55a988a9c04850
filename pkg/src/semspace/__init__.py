"""Corpus-to-metrics toolkit for scientific title/abstract collections.

Pipeline: ingest PubMed/MEDLINE bulk XML into a portable store, normalize
text, pool token-level encoder activations into document vectors, fit
demeaned PCA semantic spaces, score embedding quality with a
journal-discriminability retrieval benchmark, and compute semantic metrics
(breadth, distance, novelty, axis projection, perplexity) over any set of
embedded documents.
"""

__version__ = "0.1.0"

from semspace.ingest import PubRecord, Verdict, parse_archive, validate_record
from semspace.store import CorpusStore, StoredEmbedding
from semspace.prep import NormalizedText, mask_numbers, normalize

__all__ = [
    "__version__",
    "PubRecord",
    "Verdict",
    "parse_archive",
    "validate_record",
    "CorpusStore",
    "StoredEmbedding",
    "NormalizedText",
    "mask_numbers",
    "normalize",
]
