import numpy as np
import pytest

from encoder_bridge.cli import main
from encoder_bridge.emb import read_emb, write_emb
from encoder_bridge.projection import export_umap


def three_clusters(rng, per_cluster=60, dim=8, spread=0.5):
    centers = np.zeros((3, dim))
    centers[1, 0] = 30.0
    centers[2, 1] = 30.0
    vectors = np.vstack([
        rng.standard_normal((per_cluster, dim)) * spread + centers[c] for c in range(3)
    ])
    labels = np.repeat(np.arange(3), per_cluster)
    return vectors.astype(np.float32), labels


def knn_purity(coords, labels, k=10):
    n = coords.shape[0]
    hits = 0
    for i in range(n):
        d = ((coords - coords[i]) ** 2).sum(axis=1)
        d[i] = np.inf
        neighbors = np.argsort(d, kind="stable")[:k]
        hits += (labels[neighbors] == labels[i]).sum()
    return hits / (n * k)


def read_tsv(path):
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "pmid\tx\ty"
    pmids, coords = [], []
    for line in lines[1:]:
        pmid, x, y = line.split("\t")
        pmids.append(int(pmid))
        coords.append((float(x), float(y)))
    return np.array(pmids), np.array(coords)


class TestExportUmap:
    def test_projecting_reference_preserves_cardinality(self, tmp_path):
        rng = np.random.default_rng(0)
        vectors, _ = three_clusters(rng)
        ref = tmp_path / "ref.emb"
        write_emb(ref, np.arange(1, len(vectors) + 1), vectors)
        out = tmp_path / "coords.tsv"
        rows = export_umap(ref, ref, out, seed=1)
        assert rows == len(vectors)
        pmids, coords = read_tsv(out)
        assert len(pmids) == len(vectors)
        assert np.isfinite(coords).all()

    def test_deterministic_per_seed(self, tmp_path):
        rng = np.random.default_rng(1)
        vectors, _ = three_clusters(rng, per_cluster=40)
        ref = tmp_path / "ref.emb"
        write_emb(ref, np.arange(len(vectors)), vectors)
        out_a = tmp_path / "a.tsv"
        out_b = tmp_path / "b.tsv"
        export_umap(ref, ref, out_a, seed=7)
        export_umap(ref, ref, out_b, seed=7)
        assert out_a.read_bytes() == out_b.read_bytes()

    def test_cluster_purity_in_2d(self, tmp_path):
        rng = np.random.default_rng(2)
        vectors, labels = three_clusters(rng)
        ref = tmp_path / "ref.emb"
        write_emb(ref, np.arange(len(vectors)), vectors)
        out = tmp_path / "coords.tsv"
        export_umap(ref, ref, out, seed=3)
        _, coords = read_tsv(out)
        assert knn_purity(coords, labels, k=10) >= 0.9

    def test_new_points_interpolate_near_their_cluster(self, tmp_path):
        rng = np.random.default_rng(3)
        vectors, labels = three_clusters(rng)
        ref = tmp_path / "ref.emb"
        write_emb(ref, np.arange(len(vectors)), vectors)
        fitted_out = tmp_path / "fitted.tsv"
        export_umap(ref, ref, fitted_out, seed=4)
        _, fitted = read_tsv(fitted_out)

        fresh = vectors[labels == 1][:10] + rng.standard_normal((10, 8)).astype(np.float32) * 0.1
        proj = tmp_path / "proj.emb"
        write_emb(proj, np.arange(1000, 1010), fresh)
        proj_out = tmp_path / "proj.tsv"
        export_umap(ref, proj, proj_out, seed=4)
        _, projected = read_tsv(proj_out)

        cluster_center = fitted[labels == 1].mean(axis=0)
        others = fitted[labels != 1].mean(axis=0)
        for point in projected:
            assert np.linalg.norm(point - cluster_center) < np.linalg.norm(point - others)

    def test_dimension_mismatch(self, tmp_path):
        ref = tmp_path / "ref.emb"
        proj = tmp_path / "proj.emb"
        write_emb(ref, [1, 2, 3], np.eye(3, dtype=np.float32))
        write_emb(proj, [4], np.ones((1, 5), dtype=np.float32))
        with pytest.raises(ValueError, match="dimension mismatch"):
            export_umap(ref, proj, tmp_path / "out.tsv")

    def test_empty_reference_rejected(self, tmp_path):
        ref = tmp_path / "ref.emb"
        write_emb(ref, [], np.zeros((0, 4), dtype=np.float32))
        with pytest.raises(ValueError, match="empty"):
            export_umap(ref, ref, tmp_path / "out.tsv")


def test_cli_umap(tmp_path, capsys):
    rng = np.random.default_rng(5)
    vectors, _ = three_clusters(rng, per_cluster=20)
    ref = tmp_path / "ref.emb"
    write_emb(ref, np.arange(len(vectors)), vectors)
    out = tmp_path / "coords.tsv"
    code = main([
        "umap", "--reference", str(ref), "--project", str(ref),
        "--out", str(out), "--seed", "9",
    ])
    assert code == 0
    assert "projected 60 vectors" in capsys.readouterr().out
