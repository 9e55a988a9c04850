import struct

import numpy as np
import pytest

from encoder_bridge.cli import main
from encoder_bridge.vectors import WordVectorExportError, export_word_vectors


def write_binary_model(path, entries):
    dim = len(next(iter(entries.values())))
    blob = f"{len(entries)} {dim}\n".encode()
    for word, values in entries.items():
        blob += word.encode("utf-8") + b" "
        blob += np.asarray(values, dtype="<f4").tobytes()
        blob += b"\n"
    path.write_bytes(blob)


FIVE_WORDS = {
    "alpha": [1.5, -2.25, 0.125],
    "beta": [0.1, 0.2, 0.3],
    "gamma": [-1.0, 0.0, 1.0],
    "delta": [10.0, 20.0, 30.0],
    "epsilon": [0.5, 0.5, 0.5],
}


def parse_text_format(path):
    lines = path.read_text(encoding="utf-8").splitlines()
    count, dim = (int(x) for x in lines[0].split())
    assert len(lines) == count + 1
    table = {}
    for line in lines[1:]:
        parts = line.split(" ")
        assert len(parts) == dim + 1
        table[parts[0]] = np.array([float(v) for v in parts[1:]], dtype=np.float32)
    return dim, table


class TestBinaryExport:
    def test_five_word_fixture_roundtrip(self, tmp_path):
        model = tmp_path / "model.bin"
        write_binary_model(model, FIVE_WORDS)
        out = tmp_path / "vectors.txt"
        assert export_word_vectors(model, out) == 5
        dim, table = parse_text_format(out)
        assert dim == 3
        for word, values in FIVE_WORDS.items():
            assert np.array_equal(table[word], np.asarray(values, dtype=np.float32))

    def test_duplicate_words_keep_first(self, tmp_path, capsys):
        model = tmp_path / "model.bin"
        dim = 2
        blob = b"3 2\n"
        blob += b"word " + np.array([1.0, 2.0], dtype="<f4").tobytes() + b"\n"
        blob += b"word " + np.array([9.0, 9.0], dtype="<f4").tobytes() + b"\n"
        blob += b"other " + np.array([3.0, 4.0], dtype="<f4").tobytes() + b"\n"
        model.write_bytes(blob)
        out = tmp_path / "vectors.txt"
        assert export_word_vectors(model, out) == 2
        assert "duplicate word 'word'" in capsys.readouterr().err
        _, table = parse_text_format(out)
        assert table["word"].tolist() == [1.0, 2.0]

    def test_empty_vocabulary_rejected(self, tmp_path):
        model = tmp_path / "model.bin"
        model.write_bytes(b"0 4\n")
        with pytest.raises(WordVectorExportError, match="empty"):
            export_word_vectors(model, tmp_path / "out.txt")

    def test_missing_model_file(self, tmp_path):
        with pytest.raises(WordVectorExportError, match="not found"):
            export_word_vectors(tmp_path / "nope.bin", tmp_path / "out.txt")


class TestTextExport:
    def test_text_model_recanonicalized(self, tmp_path):
        model = tmp_path / "model.txt"
        model.write_text("2 2\nup 0.0 1.0\ndown 0.0 -1.0\n", encoding="utf-8")
        out = tmp_path / "vectors.txt"
        assert export_word_vectors(model, out) == 2
        _, table = parse_text_format(out)
        assert table["down"].tolist() == [0.0, -1.0]

    def test_truncated_text_model(self, tmp_path):
        model = tmp_path / "model.txt"
        model.write_text("3 2\nup 0.0 1.0\n", encoding="utf-8")
        with pytest.raises(WordVectorExportError, match="ends early"):
            export_word_vectors(model, tmp_path / "out.txt")


def test_cli_export(tmp_path, capsys):
    model = tmp_path / "model.bin"
    write_binary_model(model, FIVE_WORDS)
    out = tmp_path / "vectors.txt"
    assert main(["export-vectors", "--model", str(model), "--out", str(out)]) == 0
    assert "exported 5 word vectors" in capsys.readouterr().out
