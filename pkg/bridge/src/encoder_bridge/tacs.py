"""Writer/reader for the token-activation container wire format.

The byte layout is the contract with the downstream toolkit: outer magic
"TACS", LE u32 version 1, LE u64 document count; per document a LE u64
pmid and LE u32 block length framing a block of LE u32 D, T, flags
(bit0 = losses), a token table of (LE u16 length + UTF-8 bytes) entries,
T mask bytes, T x D LE float32 activations, and T LE float32 losses when
flagged.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

MAGIC = b"TACS"
VERSION = 1
LOSSES_FLAG = 0x1

_OUTER = struct.Struct("<4sIQ")
_DOC = struct.Struct("<QI")
_BLOCK = struct.Struct("<III")


@dataclass
class TokenActivations:
    """One document's tokens, special mask, activations, optional losses."""

    pmid: int
    tokens: list[str]
    special_mask: np.ndarray
    rows: np.ndarray
    losses: Optional[np.ndarray] = None

    def __post_init__(self):
        self.special_mask = np.asarray(self.special_mask, dtype=bool).reshape(-1)
        self.rows = np.asarray(self.rows, dtype=np.float32)
        if self.losses is not None:
            self.losses = np.asarray(self.losses, dtype=np.float32).reshape(-1)


def write_tacs(docs: Sequence[TokenActivations], path: Union[str, Path]) -> int:
    payload = bytearray(_OUTER.pack(MAGIC, VERSION, len(docs)))
    for doc in docs:
        t, d = doc.rows.shape
        if len(doc.tokens) != t or doc.special_mask.shape != (t,):
            raise ValueError(f"pmid {doc.pmid}: tokens, mask, and rows disagree")
        flags = LOSSES_FLAG if doc.losses is not None else 0
        block = bytearray(_BLOCK.pack(d, t, flags))
        for token in doc.tokens:
            raw = token.encode("utf-8")
            block += struct.pack("<H", len(raw))
            block += raw
        block += doc.special_mask.astype(np.uint8).tobytes()
        block += doc.rows.astype("<f4").tobytes()
        if doc.losses is not None:
            if doc.losses.shape != (t,):
                raise ValueError(f"pmid {doc.pmid}: losses length mismatch")
            block += doc.losses.astype("<f4").tobytes()
        payload += _DOC.pack(doc.pmid, len(block))
        payload += block
    Path(path).write_bytes(payload)
    return len(payload)


def read_tacs(path: Union[str, Path]) -> list[TokenActivations]:
    blob = Path(path).read_bytes()
    magic, version, count = _OUTER.unpack_from(blob)
    if magic != MAGIC or version != VERSION:
        raise ValueError(f"{path}: not a TACS v{VERSION} container")
    docs = []
    pos = _OUTER.size
    for _ in range(count):
        pmid, length = _DOC.unpack_from(blob, pos)
        pos += _DOC.size
        block = blob[pos : pos + length]
        if len(block) < length:
            raise ValueError(f"{path}: truncated block for pmid {pmid}")
        pos += length
        d, t, flags = _BLOCK.unpack_from(block)
        cursor = _BLOCK.size
        tokens = []
        for _ in range(t):
            (token_len,) = struct.unpack_from("<H", block, cursor)
            cursor += 2
            tokens.append(block[cursor : cursor + token_len].decode("utf-8"))
            cursor += token_len
        mask = np.frombuffer(block, dtype=np.uint8, count=t, offset=cursor).astype(bool)
        cursor += t
        rows = np.frombuffer(block, dtype="<f4", count=t * d, offset=cursor).reshape(t, d).copy()
        cursor += 4 * t * d
        losses = None
        if flags & LOSSES_FLAG:
            losses = np.frombuffer(block, dtype="<f4", count=t, offset=cursor).copy()
            cursor += 4 * t
        docs.append(TokenActivations(pmid, tokens, mask, rows, losses))
    return docs
