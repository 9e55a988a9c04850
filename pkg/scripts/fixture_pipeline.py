#!/usr/bin/env python3
"""End-to-end pipeline walkthrough on the bundled 10-citation fixture.

Ingests the hand-written archive, normalizes text, stands in for an
encoder with seeded random activations, then pools, fits a demeaned PCA
space, benchmarks journal discriminability, and exports a 2-D map. Every
step goes through the same CLI surface a real run would use.
"""

import gzip
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np

from semspace.activation_io import ActivationMatrix, write_container
from semspace.store import CorpusStore

REPO = Path(__file__).resolve().parent.parent
FIXTURE_XML = REPO / "tests" / "fixtures" / "archive_ten.xml"


def cli(*argv: str) -> None:
    print(f"$ semspace {' '.join(argv)}")
    result = subprocess.run([sys.executable, "-m", "semspace.cli", *argv])
    if result.returncode != 0:
        sys.exit(result.returncode)


def fake_encoder(texts_tsv: Path, container: Path, dim: int = 48, seed: int = 0) -> None:
    """Stand-in for a transformer bridge: seeded random token activations."""
    rng = np.random.default_rng(seed)
    docs = []
    for line in texts_tsv.read_text(encoding="utf-8").splitlines():
        pmid_text, _, text = line.partition("\t")
        words = text.split()[:30]
        tokens = ["[CLS]", *words, "[SEP]"]
        special = np.zeros(len(tokens), dtype=bool)
        special[0] = special[-1] = True
        rows = rng.standard_normal((len(tokens), dim)).astype(np.float32)
        docs.append(ActivationMatrix(int(pmid_text), tokens, special, rows))
    write_container(docs, container)
    print(f"encoded {len(docs)} documents -> {container}")


def main() -> None:
    workdir = Path(tempfile.mkdtemp(prefix="semspace-demo-"))
    print(f"working in {workdir}")
    archive = workdir / "fixture.xml.gz"
    archive.write_bytes(gzip.compress(FIXTURE_XML.read_bytes(), mtime=0))
    store = workdir / "store"
    texts = workdir / "texts.tsv"
    container = workdir / "docs.tacs"
    report = workdir / "report.json"
    map_tsv = workdir / "map.tsv"

    cli("ingest", "--store", str(store), str(archive))
    cli("prep", "--store", str(store), "--out", str(texts))
    fake_encoder(texts, container)
    cli("validate-container", "--in", str(container))
    cli("pool", "--store", str(store), "--space", "demo_mean",
        "--strategy", "mean_tokens", "--container", str(container))
    cli("fit-space", "--store", str(store), "--source-space", "demo_mean",
        "--space", "demo_mean_pca3", "--dim", "3", "--sample", "100", "--seed", "11")
    cli("bench", "--store", str(store), "--space", "demo_mean_pca3",
        "--labels", "NeuroImage,Journal of Neurophysiology",
        "--queries", "6", "--seed", "11", "--out", str(report))
    cli("export-map", "--store", str(store), "--space", "demo_mean_pca3",
        "--dims", "2", "--method", "pca", "--out", str(map_tsv))

    manifest = CorpusStore(store).manifest()
    print(f"\nstore manifest: {manifest}")
    print(f"artifacts: {report}, {map_tsv}")
    print("(random activations carry no signal, so the benchmark scores sit near chance)")


if __name__ == "__main__":
    main()
