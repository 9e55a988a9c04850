"""Export a pretrained static word-vector model to the text interchange
format: header "<count> <dim>", then one "word v1 ... vD" line per entry.

Reads either the classic word2vec binary layout (header line, then
space-terminated word plus dim float32 values per entry) or an existing
text-format file, deduplicates surface forms (first occurrence wins,
with a warning), and re-emits canonical text. Values are printed with
repr round-tripping, so reloading reproduces the float32 values exactly.
"""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Union

import numpy as np


class WordVectorExportError(RuntimeError):
    pass


def _read_binary(blob: bytes) -> tuple[int, list[tuple[str, np.ndarray]]]:
    newline = blob.index(b"\n")
    header = blob[:newline].split()
    if len(header) != 2:
        raise WordVectorExportError("binary model header must be '<count> <dim>'")
    count, dim = int(header[0]), int(header[1])
    entries: list[tuple[str, np.ndarray]] = []
    pos = newline + 1
    for _ in range(count):
        while pos < len(blob) and blob[pos : pos + 1] == b"\n":
            pos += 1
        end = blob.index(b" ", pos)
        word = blob[pos:end].decode("utf-8")
        pos = end + 1
        vector = np.frombuffer(blob, dtype="<f4", count=dim, offset=pos).copy()
        pos += 4 * dim
        entries.append((word, vector))
    return dim, entries


def _read_text(path: Path) -> tuple[int, list[tuple[str, np.ndarray]]]:
    with open(path, encoding="utf-8") as handle:
        header = handle.readline().split()
        if len(header) != 2 or not all(h.isdigit() for h in header):
            raise WordVectorExportError("text model header must be '<count> <dim>'")
        count, dim = int(header[0]), int(header[1])
        entries = []
        for lineno in range(2, count + 2):
            line = handle.readline()
            if not line:
                raise WordVectorExportError(f"model file ends early at line {lineno}")
            parts = line.rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                raise WordVectorExportError(f"line {lineno}: expected {dim} values")
            entries.append((parts[0], np.array([float(v) for v in parts[1:]], dtype=np.float32)))
    return dim, entries


def export_word_vectors(model_path: Union[str, Path], out_path: Union[str, Path]) -> int:
    """Convert a local static model to the text format; returns entry count."""
    model_path = Path(model_path)
    if not model_path.exists():
        raise WordVectorExportError(f"model file {model_path} not found")
    if model_path.suffix == ".bin":
        dim, entries = _read_binary(model_path.read_bytes())
    else:
        dim, entries = _read_text(model_path)
    if not entries:
        raise WordVectorExportError("model vocabulary is empty")
    table: dict[str, np.ndarray] = {}
    for word, vector in entries:
        if word in table:
            print(f"bridge export-vectors: duplicate word {word!r}, keeping first", file=sys.stderr)
            continue
        table[word] = vector
    lines = [f"{len(table)} {dim}\n"]
    for word, vector in table.items():
        values = " ".join(repr(float(v)) for v in vector)
        lines.append(f"{word} {values}\n")
    Path(out_path).write_text("".join(lines), encoding="utf-8")
    return len(table)
