"""Token-activation container format, subword alignment, and word-vector IO.

This module owns the interchange boundary that lets any encoder feed the
pipeline. The container ("TACS") layout is bit-exact:

    outer: magic ASCII "TACS"
           little-endian u32 version = 1
           little-endian u64 document count
    per document:
           little-endian u64 pmid
           little-endian u32 block length (bytes that follow)
    block: little-endian u32 D, u32 T, u32 flags (bit0: losses present)
           token table, T entries: LE u16 byte length + UTF-8 bytes
           T bytes special mask (0 regular / 1 special)
           T x D activations, LE 32-bit IEEE-754, row-major
           if flags bit0: T losses, LE 32-bit IEEE-754

D is per-document, so one container may mix encoders of different widths.

The word-vector text format is the de facto interchange convention for
static embeddings: a header line "<count> <dim>", then one word plus its
values per line, space-separated, UTF-8.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Optional, Sequence, Union

import numpy as np

TACS_MAGIC = b"TACS"
TACS_VERSION = 1
LOSSES_FLAG = 0x1

_OUTER_HEADER = struct.Struct("<4sIQ")
_DOC_HEADER = struct.Struct("<QI")
_BLOCK_HEADER = struct.Struct("<III")

WordAlignment = list[list[int]]


class ContainerFormatError(RuntimeError):
    """The byte stream does not follow the container layout."""

    def __init__(self, message: str, pmid: Optional[int] = None, offset: Optional[int] = None):
        detail = message
        if pmid is not None:
            detail += f" (pmid {pmid})"
        if offset is not None:
            detail += f" (byte offset {offset})"
        super().__init__(detail)
        self.pmid = pmid
        self.offset = offset


class WordVectorFormatError(RuntimeError):
    """A word-vector text file violates its declared header."""


@dataclass(eq=False)
class ActivationMatrix:
    """Per-document token strings, special mask, and top-layer activations.

    rows[i] is token i's activation; losses, when present, hold one
    nonnegative cross-entropy value per token.
    """

    pmid: int
    tokens: list[str]
    special_mask: np.ndarray  # bool, shape (T,)
    rows: np.ndarray  # float32, shape (T, D)
    losses: Optional[np.ndarray] = None  # float32, shape (T,)

    def __post_init__(self):
        self.special_mask = np.asarray(self.special_mask, dtype=bool).reshape(-1)
        self.rows = np.asarray(self.rows, dtype=np.float32)
        if self.losses is not None:
            self.losses = np.asarray(self.losses, dtype=np.float32).reshape(-1)

    @property
    def n_tokens(self) -> int:
        return len(self.tokens)

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def validate(self) -> None:
        """Raise ValueError on any invariant violation."""
        t = len(self.tokens)
        if self.special_mask.shape != (t,):
            raise ValueError(f"pmid {self.pmid}: special_mask length != token count")
        if self.rows.ndim != 2 or self.rows.shape[0] != t:
            raise ValueError(f"pmid {self.pmid}: activation row count != token count")
        if not np.isfinite(self.rows).all():
            raise ValueError(f"pmid {self.pmid}: non-finite activation value")
        if self.losses is not None:
            if self.losses.shape != (t,):
                raise ValueError(f"pmid {self.pmid}: losses length != token count")
            if not np.isfinite(self.losses).all() or (self.losses < 0).any():
                raise ValueError(f"pmid {self.pmid}: losses must be finite and >= 0")


def _encode_document(doc: ActivationMatrix) -> bytes:
    doc.validate()
    t, d = doc.rows.shape
    flags = LOSSES_FLAG if doc.losses is not None else 0
    block = io.BytesIO()
    block.write(_BLOCK_HEADER.pack(d, t, flags))
    for token in doc.tokens:
        raw = token.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise ContainerFormatError("token longer than 65535 bytes", pmid=doc.pmid)
        block.write(struct.pack("<H", len(raw)))
        block.write(raw)
    block.write(doc.special_mask.astype(np.uint8).tobytes())
    block.write(doc.rows.astype("<f4").tobytes())
    if doc.losses is not None:
        block.write(doc.losses.astype("<f4").tobytes())
    payload = block.getvalue()
    return _DOC_HEADER.pack(doc.pmid, len(payload)) + payload


def write_container(docs: Sequence[ActivationMatrix], sink: Union[str, Path, IO[bytes]]) -> int:
    """Write documents to a container; returns total bytes written."""
    if isinstance(sink, (str, Path)):
        with open(sink, "wb") as handle:
            return write_container(docs, handle)
    written = sink.write(_OUTER_HEADER.pack(TACS_MAGIC, TACS_VERSION, len(docs)))
    for doc in docs:
        written += sink.write(_encode_document(doc))
    return written


def _decode_block(pmid: int, payload: bytes, base_offset: int) -> ActivationMatrix:
    if len(payload) < _BLOCK_HEADER.size:
        raise ContainerFormatError("block too short for header", pmid=pmid, offset=base_offset)
    d, t, flags = _BLOCK_HEADER.unpack_from(payload)
    if flags & ~LOSSES_FLAG:
        raise ContainerFormatError(f"unknown flags 0x{flags:x}", pmid=pmid, offset=base_offset)
    pos = _BLOCK_HEADER.size
    tokens: list[str] = []
    for _ in range(t):
        if pos + 2 > len(payload):
            raise ContainerFormatError("truncated token table", pmid=pmid, offset=base_offset + pos)
        (length,) = struct.unpack_from("<H", payload, pos)
        pos += 2
        if pos + length > len(payload):
            raise ContainerFormatError("truncated token bytes", pmid=pmid, offset=base_offset + pos)
        try:
            tokens.append(payload[pos : pos + length].decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise ContainerFormatError(
                f"token is not valid UTF-8: {exc}", pmid=pmid, offset=base_offset + pos
            ) from exc
        pos += length
    if pos + t > len(payload):
        raise ContainerFormatError("truncated special mask", pmid=pmid, offset=base_offset + pos)
    mask_bytes = np.frombuffer(payload, dtype=np.uint8, count=t, offset=pos)
    if ((mask_bytes != 0) & (mask_bytes != 1)).any():
        raise ContainerFormatError("special mask byte not 0/1", pmid=pmid, offset=base_offset + pos)
    pos += t
    need = 4 * t * d
    if pos + need > len(payload):
        raise ContainerFormatError("truncated activations", pmid=pmid, offset=base_offset + pos)
    rows = np.frombuffer(payload, dtype="<f4", count=t * d, offset=pos).reshape(t, d).copy()
    pos += need
    losses = None
    if flags & LOSSES_FLAG:
        if pos + 4 * t > len(payload):
            raise ContainerFormatError(
                "flags declare losses but block ends early", pmid=pmid, offset=base_offset + pos
            )
        losses = np.frombuffer(payload, dtype="<f4", count=t, offset=pos).copy()
        pos += 4 * t
    if pos != len(payload):
        raise ContainerFormatError(
            f"block length mismatch: declared {len(payload)}, parsed {pos}",
            pmid=pmid,
            offset=base_offset + pos,
        )
    doc = ActivationMatrix(pmid=pmid, tokens=tokens, special_mask=mask_bytes == 1, rows=rows, losses=losses)
    doc.validate()
    return doc


def read_container(source: Union[str, Path, IO[bytes]]) -> list[ActivationMatrix]:
    """Read back a container; the inverse of write_container, bit-exactly."""
    if isinstance(source, (str, Path)):
        with open(source, "rb") as handle:
            return read_container(handle)
    header = source.read(_OUTER_HEADER.size)
    if len(header) < _OUTER_HEADER.size:
        raise ContainerFormatError("truncated container header", offset=0)
    magic, version, count = _OUTER_HEADER.unpack(header)
    if magic != TACS_MAGIC:
        raise ContainerFormatError(f"bad magic {magic!r}", offset=0)
    if version != TACS_VERSION:
        raise ContainerFormatError(f"unsupported version {version}", offset=4)
    docs: list[ActivationMatrix] = []
    offset = _OUTER_HEADER.size
    for _ in range(count):
        doc_header = source.read(_DOC_HEADER.size)
        if len(doc_header) < _DOC_HEADER.size:
            raise ContainerFormatError("truncated document header", offset=offset)
        pmid, block_length = _DOC_HEADER.unpack(doc_header)
        offset += _DOC_HEADER.size
        payload = source.read(block_length)
        if len(payload) < block_length:
            raise ContainerFormatError(
                "truncated document block", pmid=pmid, offset=offset + len(payload)
            )
        docs.append(_decode_block(pmid, payload, offset))
        offset += block_length
    trailing = source.read(1)
    if trailing:
        raise ContainerFormatError("trailing bytes after final document", offset=offset)
    return docs


def align_subwords(
    tokens: Sequence[str],
    special_mask: Sequence[bool],
    continuation_marker: str = "##",
) -> WordAlignment:
    """Group subword token indices into whole words.

    A regular token opens a new group unless it begins with the
    continuation marker, in which case it joins the group in progress. A
    continuation token with no open group (sequence start, or right after
    a special token) starts its own group. Special tokens belong to no
    group and close the group in progress, keeping groups contiguous.
    """
    if len(tokens) == 0:
        raise ValueError("tokens must be nonempty")
    if len(tokens) != len(special_mask):
        raise ValueError("tokens and special_mask lengths differ")
    groups: WordAlignment = []
    current: Optional[list[int]] = None
    for index, (token, special) in enumerate(zip(tokens, special_mask)):
        if special:
            current = None
            continue
        if token.startswith(continuation_marker) and current is not None:
            current.append(index)
        else:
            current = [index]
            groups.append(current)
    return groups


class WordVectorTable:
    """Static word -> vector map; lookup returns None for OOV words."""

    def __init__(self, dimension: int, table: dict[str, np.ndarray]):
        self.dimension = dimension
        self._table = table

    def lookup(self, word: str) -> Optional[np.ndarray]:
        return self._table.get(word)

    def __contains__(self, word: str) -> bool:
        return word in self._table

    def __len__(self) -> int:
        return len(self._table)

    def words(self) -> list[str]:
        return list(self._table)


def load_word_vectors(source: Union[str, Path, IO[str]]) -> WordVectorTable:
    """Parse the word-vector text format; duplicate words keep first occurrence."""
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as handle:
            return load_word_vectors(handle)
    header = source.readline()
    fields = header.split()
    if len(fields) != 2 or not all(f.isdigit() for f in fields):
        raise WordVectorFormatError(f"bad header line {header!r}, expected '<count> <dim>'")
    count, dim = int(fields[0]), int(fields[1])
    table: dict[str, np.ndarray] = {}
    for lineno in range(2, count + 2):
        line = source.readline()
        if not line:
            raise WordVectorFormatError(
                f"file ends at line {lineno}: header declared {count} entries"
            )
        parts = line.rstrip("\n").split(" ")
        word, values = parts[0], parts[1:]
        if values and values[-1] == "":  # tolerate a trailing space
            values = values[:-1]
        if len(values) != dim:
            raise WordVectorFormatError(
                f"line {lineno}: expected {dim} values, found {len(values)}"
            )
        try:
            vector = np.array([float(v) for v in values], dtype=np.float32)
        except ValueError as exc:
            raise WordVectorFormatError(f"line {lineno}: {exc}") from exc
        if word not in table:
            table[word] = vector
    return WordVectorTable(dimension=dim, table=table)


def collect_probe_occurrences(
    docs: Iterable[ActivationMatrix],
    probes: Iterable[str],
) -> dict[str, list[tuple[int, int, np.ndarray]]]:
    """Record every occurrence of each probe token, in document order.

    Returns {probe: [(pmid, token index, activation row), ...]}; probes
    that never occur map to empty lists.
    """
    wanted = set(probes)
    occurrences: dict[str, list[tuple[int, int, np.ndarray]]] = {p: [] for p in wanted}
    for doc in docs:
        for index, token in enumerate(doc.tokens):
            if token in wanted:
                occurrences[token].append((doc.pmid, index, doc.rows[index]))
    return occurrences
