import numpy as np

from encoder_bridge.tacs import TokenActivations, read_tacs, write_tacs


def test_roundtrip_with_and_without_losses(tmp_path):
    rng = np.random.default_rng(0)
    docs = [
        TokenActivations(
            pmid=101,
            tokens=["[CLS]", "naïve", "##µ", "[SEP]"],
            special_mask=np.array([1, 0, 0, 1], dtype=bool),
            rows=rng.standard_normal((4, 6)).astype(np.float32),
        ),
        TokenActivations(
            pmid=202,
            tokens=["[CLS]", "x", "[SEP]"],
            special_mask=np.array([1, 0, 1], dtype=bool),
            rows=rng.standard_normal((3, 6)).astype(np.float32),
            losses=np.array([0.0, 1.25, 0.0], dtype=np.float32),
        ),
    ]
    path = tmp_path / "pair.tacs"
    written = write_tacs(docs, path)
    assert written == path.stat().st_size
    loaded = read_tacs(path)
    for original, copy in zip(docs, loaded):
        assert original.pmid == copy.pmid
        assert original.tokens == copy.tokens
        assert np.array_equal(original.special_mask, copy.special_mask)
        assert np.array_equal(original.rows, copy.rows)
        if original.losses is None:
            assert copy.losses is None
        else:
            assert np.array_equal(original.losses, copy.losses)
