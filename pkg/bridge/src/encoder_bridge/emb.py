"""EMB1 vector-file IO: LE header (magic, u32 version, u32 dim, u64 count)
then fixed-stride entries of LE u64 pmid + dim half-precision values."""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Sequence, Union

import numpy as np

MAGIC = b"EMB1"
VERSION = 1
_HEADER = struct.Struct("<4sIIQ")


def _entry_dtype(dim: int) -> np.dtype:
    return np.dtype([("pmid", "<u8"), ("vec", "<f2", (dim,))])


def read_emb(path: Union[str, Path]) -> tuple[np.ndarray, np.ndarray]:
    blob = Path(path).read_bytes()
    magic, version, dim, count = _HEADER.unpack_from(blob)
    if magic != MAGIC or version != VERSION:
        raise ValueError(f"{path}: not an EMB1 v{VERSION} file")
    entries = np.frombuffer(blob, dtype=_entry_dtype(dim), count=count, offset=_HEADER.size)
    return entries["pmid"].copy(), entries["vec"].astype(np.float32)


def write_emb(path: Union[str, Path], pmids: Sequence[int], matrix: np.ndarray) -> None:
    mat = np.asarray(matrix, dtype=np.float16)
    entries = np.empty(mat.shape[0], dtype=_entry_dtype(mat.shape[1]))
    entries["pmid"] = np.asarray(pmids, dtype="<u8")
    entries["vec"] = mat
    header = _HEADER.pack(MAGIC, VERSION, mat.shape[1], mat.shape[0])
    Path(path).write_bytes(header + entries.tobytes())
