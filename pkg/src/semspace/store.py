"""Portable on-disk store for records and reduced-precision embeddings.

Layout under one directory:

    records.jsonl        one JSON object per PubRecord, UTF-8, LF-terminated
    spaces/<id>.emb      embedding shard for one space (format below)
    manifest.json        {record_count, spaces:{id:dim},
                          journals:{name:count}, years:{year:count}}

``.emb`` shard format, bit-exact and mmap-friendly (fixed stride):

    magic ASCII "EMB1"
    little-endian u32 format version = 1
    little-endian u32 dimension D'
    little-endian u64 entry count
    per entry: little-endian u64 pmid, then D' little-endian IEEE-754
    half-precision (16-bit) values

Embeddings are stored at half precision and widened to single precision on
read. Writes go to a temp file and are renamed into place, so concurrent
readers only ever see fully committed state (single writer assumed).
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from semspace.ingest import PubRecord, Verdict, validate_record

EMB_MAGIC = b"EMB1"
EMB_VERSION = 1
_EMB_HEADER = struct.Struct("<4sIIQ")  # magic, version, dimension, entry count


def _emb_entry_dtype(dim: int) -> np.dtype:
    return np.dtype([("pmid", "<u8"), ("vec", "<f2", (dim,))])


class StoreError(RuntimeError):
    """Base class for store failures."""


class UnknownSpaceError(StoreError):
    """An operation referenced a space_id that was never registered."""


class DimensionMismatchError(StoreError):
    """A vector's length disagrees with its space's declared dimension."""

    def __init__(self, space_id: str, declared: int, actual: int):
        super().__init__(
            f"space {space_id!r} declares dimension {declared}, got vector of length {actual}"
        )
        self.declared = declared
        self.actual = actual


class EmbFormatError(StoreError):
    """An .emb file does not follow the documented layout."""


@dataclass(frozen=True)
class StoredEmbedding:
    """One half-precision document embedding within a named space."""

    pmid: int
    space_id: str
    vector: np.ndarray  # float16, shape (D',)

    def __post_init__(self):
        with np.errstate(over="ignore"):  # overflow becomes inf, rejected below
            vec = np.asarray(self.vector, dtype=np.float16).reshape(-1)
        if not np.isfinite(vec.astype(np.float32)).all():
            raise ValueError(
                f"embedding for pmid {self.pmid} is not finite after half-precision quantization"
            )
        object.__setattr__(self, "vector", vec)


def write_emb_file(path: Union[str, Path], pmids: Sequence[int], matrix: np.ndarray) -> None:
    """Write vectors to the EMB1 layout, quantizing to half precision."""
    mat = np.asarray(matrix, dtype=np.float16)
    if mat.ndim != 2 or mat.shape[0] != len(pmids):
        raise EmbFormatError("matrix must be 2-D with one row per pmid")
    entries = np.empty(mat.shape[0], dtype=_emb_entry_dtype(mat.shape[1]))
    entries["pmid"] = np.asarray(pmids, dtype="<u8")
    entries["vec"] = mat
    header = _EMB_HEADER.pack(EMB_MAGIC, EMB_VERSION, mat.shape[1], mat.shape[0])
    _atomic_write(Path(path), header + entries.tobytes())


def read_emb_file(path: Union[str, Path]) -> tuple[np.ndarray, np.ndarray]:
    """Read an EMB1 file, returning (pmids u64, matrix widened to float32)."""
    blob = Path(path).read_bytes()
    if len(blob) < _EMB_HEADER.size:
        raise EmbFormatError(f"{path}: truncated header")
    magic, version, dim, count = _EMB_HEADER.unpack_from(blob)
    if magic != EMB_MAGIC:
        raise EmbFormatError(f"{path}: bad magic {magic!r}")
    if version != EMB_VERSION:
        raise EmbFormatError(f"{path}: unsupported version {version}")
    entry_dtype = _emb_entry_dtype(dim)
    expected = _EMB_HEADER.size + entry_dtype.itemsize * count
    if len(blob) != expected:
        raise EmbFormatError(f"{path}: expected {expected} bytes, found {len(blob)}")
    entries = np.frombuffer(blob, dtype=entry_dtype, count=count, offset=_EMB_HEADER.size)
    return entries["pmid"].copy(), entries["vec"].astype(np.float32)


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as handle:
        handle.write(data)
        handle.flush()
        os.fsync(handle.fileno())
    os.replace(tmp, path)


def _record_to_json(record: PubRecord) -> str:
    return json.dumps(
        {
            "pmid": record.pmid,
            "title": record.title,
            "abstract": record.abstract,
            "journal": record.journal,
            "year": record.year,
        },
        ensure_ascii=False,
        sort_keys=True,
        separators=(",", ":"),
    )


def _record_from_json(line: str) -> PubRecord:
    obj = json.loads(line)
    return PubRecord(
        pmid=obj["pmid"],
        title=obj["title"],
        abstract=obj["abstract"],
        journal=obj["journal"],
        year=obj["year"],
    )


class CorpusStore:
    """Single-writer, multi-reader store keyed by pmid.

    Duplicate pmids overwrite on write (update files supersede baseline
    files); record order is first-insertion order.
    """

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "spaces").mkdir(exist_ok=True)
        self._records: dict[int, PubRecord] = {}
        self._spaces: dict[str, int] = {}
        self._embeddings: dict[str, dict[int, np.ndarray]] = {}
        self._load()

    # -- loading ---------------------------------------------------------

    def _load(self) -> None:
        records_path = self.root / "records.jsonl"
        if records_path.exists():
            with open(records_path, encoding="utf-8") as handle:
                for line in handle:
                    line = line.strip()
                    if line:
                        record = _record_from_json(line)
                        self._records[record.pmid] = record
        manifest_path = self.root / "manifest.json"
        if manifest_path.exists():
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
            self._spaces = {k: int(v) for k, v in manifest.get("spaces", {}).items()}
        for space_id in self._spaces:
            shard = self._shard_path(space_id)
            table: dict[int, np.ndarray] = {}
            if shard.exists():
                pmids, matrix = read_emb_file(shard)
                for pmid, row in zip(pmids, matrix):
                    table[int(pmid)] = row.astype(np.float16)
            self._embeddings[space_id] = table

    def _shard_path(self, space_id: str) -> Path:
        return self.root / "spaces" / f"{space_id}.emb"

    # -- records ---------------------------------------------------------

    def put_records(self, records: Iterable[PubRecord]) -> int:
        """Persist records, overwriting duplicates by pmid. Returns the count written."""
        written = 0
        for record in records:
            if record.pmid <= 0:
                raise ValueError(f"pmid must be positive, got {record.pmid}")
            abstract = record.abstract
            if abstract is not None and not abstract.strip():
                record = PubRecord(record.pmid, record.title, None, record.journal, record.year)
            self._records[record.pmid] = record
            written += 1
        if written:
            self._commit_records()
            self._commit_manifest()
        return written

    def query(
        self,
        journal: Optional[str] = None,
        year: Optional[int] = None,
        require_abstract: bool = False,
    ) -> list[PubRecord]:
        """Records matching all provided filters, in insertion order."""
        out = []
        for record in self._records.values():
            if journal is not None and record.journal != journal:
                continue
            if year is not None and record.year != year:
                continue
            if require_abstract and validate_record(record) is not Verdict.ELIGIBLE:
                continue
            out.append(record)
        return out

    def get_record(self, pmid: int) -> Optional[PubRecord]:
        return self._records.get(pmid)

    @property
    def record_count(self) -> int:
        return len(self._records)

    # -- spaces and embeddings -------------------------------------------

    def register_space(self, space_id: str, dimension: int) -> None:
        """Declare a space's dimension; re-registration must agree."""
        if dimension <= 0:
            raise ValueError("dimension must be positive")
        existing = self._spaces.get(space_id)
        if existing is not None:
            if existing != dimension:
                raise DimensionMismatchError(space_id, existing, dimension)
            return
        self._spaces[space_id] = dimension
        self._embeddings[space_id] = {}
        self._commit_manifest()

    @property
    def spaces(self) -> dict[str, int]:
        return dict(self._spaces)

    def put_embedding(self, embedding: StoredEmbedding) -> None:
        self.put_embeddings(embedding.space_id, [embedding.pmid], embedding.vector[None, :])

    def put_embeddings(self, space_id: str, pmids: Sequence[int], matrix: np.ndarray) -> None:
        """Bulk insert; quantizes to half precision and commits the shard once."""
        declared = self._spaces.get(space_id)
        if declared is None:
            raise UnknownSpaceError(f"space {space_id!r} is not registered")
        mat = np.asarray(matrix)
        if mat.ndim != 2 or mat.shape[0] != len(pmids):
            raise ValueError("matrix must be 2-D with one row per pmid")
        if mat.shape[1] != declared:
            raise DimensionMismatchError(space_id, declared, mat.shape[1])
        with np.errstate(over="ignore"):  # overflow becomes inf, rejected below
            quantized = mat.astype(np.float16)
        if not np.isfinite(quantized.astype(np.float32)).all():
            raise ValueError("embedding values must stay finite after half-precision quantization")
        table = self._embeddings[space_id]
        for pmid, row in zip(pmids, quantized):
            table[int(pmid)] = row
        self._commit_shard(space_id)

    def get_embeddings(
        self, space_id: str, pmids: Sequence[int]
    ) -> tuple[np.ndarray, np.ndarray]:
        """Read embeddings widened to float32.

        Returns (matrix, found): ``matrix`` has one row per requested pmid
        (zeros where missing) and ``found`` marks which pmids were present.
        """
        declared = self._spaces.get(space_id)
        if declared is None:
            raise UnknownSpaceError(f"space {space_id!r} is not registered")
        table = self._embeddings[space_id]
        matrix = np.zeros((len(pmids), declared), dtype=np.float32)
        found = np.zeros(len(pmids), dtype=bool)
        for i, pmid in enumerate(pmids):
            row = table.get(int(pmid))
            if row is not None:
                matrix[i] = row.astype(np.float32)
                found[i] = True
        return matrix, found

    def embedded_pmids(self, space_id: str) -> list[int]:
        """All pmids holding a vector in this space, ascending."""
        if space_id not in self._spaces:
            raise UnknownSpaceError(f"space {space_id!r} is not registered")
        return sorted(self._embeddings[space_id])

    # -- commits ----------------------------------------------------------

    def _commit_records(self) -> None:
        lines = "".join(_record_to_json(r) + "\n" for r in self._records.values())
        _atomic_write(self.root / "records.jsonl", lines.encode("utf-8"))

    def _commit_shard(self, space_id: str) -> None:
        table = self._embeddings[space_id]
        pmids = sorted(table)
        if pmids:
            matrix = np.stack([table[p] for p in pmids])
        else:
            matrix = np.zeros((0, self._spaces[space_id]), dtype=np.float16)
        write_emb_file(self._shard_path(space_id), pmids, matrix)
        self._commit_manifest()

    def manifest(self) -> dict:
        journals: dict[str, int] = {}
        years: dict[str, int] = {}
        for record in self._records.values():
            journals[record.journal] = journals.get(record.journal, 0) + 1
            if record.year is not None:
                key = str(record.year)
                years[key] = years.get(key, 0) + 1
        return {
            "record_count": len(self._records),
            "spaces": dict(self._spaces),
            "journals": journals,
            "years": years,
        }

    def _commit_manifest(self) -> None:
        payload = json.dumps(self.manifest(), ensure_ascii=False, sort_keys=True, indent=2)
        _atomic_write(self.root / "manifest.json", (payload + "\n").encode("utf-8"))
