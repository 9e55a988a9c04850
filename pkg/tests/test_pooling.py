import numpy as np
import pytest

from semspace.activation_io import ActivationMatrix, WordVectorTable, align_subwords
from semspace.pooling import (
    EmptyPoolError,
    MissingClsError,
    pool_cls,
    pool_cls_concat_mean,
    pool_long_tokens,
    pool_mean_tokens,
    pool_mean_words,
    pool_static_mean,
)
from tests.conftest import make_doc


def doc_from(tokens, special, rows, pmid=1):
    return ActivationMatrix(
        pmid=pmid,
        tokens=tokens,
        special_mask=np.array(special, dtype=bool),
        rows=np.array(rows, dtype=np.float32),
    )


def naive_mean(rows):
    """Independent summation oracle: plain Python accumulation."""
    total = [0.0] * len(rows[0])
    for row in rows:
        for j, value in enumerate(row):
            total[j] += float(value)
    return [t / len(rows) for t in total]


FOUR_TOKEN_DOC = doc_from(
    ["[CLS]", "a", "b", "[SEP]"],
    [True, False, False, True],
    [[9, 9], [1, 0], [0, 1], [7, 7]],
)


class TestMeanTokens:
    def test_specials_excluded(self):
        assert pool_mean_tokens(FOUR_TOKEN_DOC).vector.tolist() == [0.5, 0.5]

    def test_single_regular_token_identity(self):
        doc = doc_from(["[CLS]", "only"], [True, False], [[5, 5], [2.5, -1.5]])
        assert pool_mean_tokens(doc).vector.tolist() == [2.5, -1.5]

    def test_no_regular_tokens(self):
        doc = doc_from(["[CLS]", "[SEP]"], [True, True], [[1, 1], [2, 2]])
        with pytest.raises(EmptyPoolError):
            pool_mean_tokens(doc)

    def test_matches_naive_oracle_on_random_matrices(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            doc = make_doc(rng, 1, n_tokens=int(rng.integers(3, 12)), dim=int(rng.integers(1, 9)))
            expected = naive_mean([doc.rows[i] for i in range(doc.n_tokens) if not doc.special_mask[i]])
            got = pool_mean_tokens(doc).vector
            assert np.allclose(got, expected, atol=1e-6)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(0)
        doc = make_doc(rng, 1, n_tokens=9, dim=5)
        perm = rng.permutation(9)
        shuffled = ActivationMatrix(
            1, [doc.tokens[i] for i in perm], doc.special_mask[perm], doc.rows[perm]
        )
        assert np.allclose(pool_mean_tokens(doc).vector, pool_mean_tokens(shuffled).vector, atol=1e-6)

    def test_duplication_invariance(self):
        doc = FOUR_TOKEN_DOC
        doubled = ActivationMatrix(
            1,
            doc.tokens + ["a", "b"],
            np.concatenate([doc.special_mask, [False, False]]),
            np.vstack([doc.rows, doc.rows[1:3]]),
        )
        assert np.allclose(pool_mean_tokens(doc).vector, pool_mean_tokens(doubled).vector, atol=1e-6)

    def test_norm_bounded_by_max_row_norm(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            doc = make_doc(rng, 1, n_tokens=8, dim=6)
            pooled = pool_mean_tokens(doc).vector
            max_norm = max(np.linalg.norm(doc.rows[i]) for i in range(8) if not doc.special_mask[i])
            assert np.linalg.norm(pooled) <= max_norm + 1e-6


class TestCls:
    def test_extracts_first_row(self):
        doc = doc_from(["[CLS]", "a"], [True, False], [[1, 2, 3], [9, 9, 9]])
        assert pool_cls(doc).vector.tolist() == [1, 2, 3]

    def test_missing_cls(self):
        doc = doc_from(["a", "b"], [False, False], [[1, 2], [3, 4]])
        with pytest.raises(MissingClsError):
            pool_cls(doc)

    def test_deterministic(self):
        doc = FOUR_TOKEN_DOC
        assert np.array_equal(pool_cls(doc).vector, pool_cls(doc).vector)


class TestLongTokens:
    def test_length_rule_after_marker_strip(self):
        doc = doc_from(
            ["the", "neuro", "##physiology"],
            [False, False, False],
            [[0, 0], [2, 0], [0, 2]],
        )
        pooled = pool_long_tokens(doc, min_chars=5)
        assert pooled.vector.tolist() == [1, 1]
        assert not pooled.fallback

    def test_fallback_when_all_short(self):
        doc = doc_from(["ab", "cd"], [False, False], [[2, 0], [0, 2]])
        pooled = pool_long_tokens(doc, min_chars=5)
        assert pooled.fallback
        assert np.array_equal(pooled.vector, pool_mean_tokens(doc).vector)

    def test_zero_threshold_equals_mean_tokens_exactly(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            doc = make_doc(rng, 1, n_tokens=int(rng.integers(3, 10)), dim=4)
            assert np.array_equal(
                pool_long_tokens(doc, min_chars=0).vector, pool_mean_tokens(doc).vector
            )

    def test_empty_pool(self):
        doc = doc_from(["[CLS]"], [True], [[1, 1]])
        with pytest.raises(EmptyPoolError):
            pool_long_tokens(doc)


class TestClsConcatMean:
    def test_concatenation(self):
        doc = doc_from(
            ["[CLS]", "a", "b", "[SEP]"],
            [True, False, False, True],
            [[1, 0], [1, 0], [0, 1], [0, 0]],
        )
        assert pool_cls_concat_mean(doc).vector.tolist() == [1, 0, 0.5, 0.5]

    def test_length_is_2d(self):
        rng = np.random.default_rng(1)
        for dim in (1, 3, 16):
            doc = make_doc(rng, 1, n_tokens=5, dim=dim)
            assert pool_cls_concat_mean(doc).vector.shape == (2 * dim,)

    def test_slices_decompose(self):
        rng = np.random.default_rng(2)
        doc = make_doc(rng, 1, n_tokens=6, dim=7)
        combined = pool_cls_concat_mean(doc).vector
        assert np.array_equal(combined[:7], pool_cls(doc).vector)
        assert np.array_equal(combined[7:], pool_mean_tokens(doc).vector)


class TestMeanWords:
    def test_two_stage_mean(self):
        doc = doc_from(
            ["[CLS]", "ne", "##uro", "of"],
            [True, False, False, False],
            [[0, 0], [2, 0], [0, 2], [4, 4]],
        )
        pooled = pool_mean_words(doc, [[1, 2], [3]])
        assert pooled.vector.tolist() == [2.5, 2.5]

    def test_singleton_groups_collapse_to_mean_tokens(self):
        rng = np.random.default_rng(4)
        doc = make_doc(rng, 1, n_tokens=7, dim=3)
        alignment = align_subwords(doc.tokens, doc.special_mask)
        assert all(len(g) == 1 for g in alignment)
        assert np.allclose(
            pool_mean_words(doc, alignment).vector, pool_mean_tokens(doc).vector, atol=1e-6
        )

    def test_single_group_collapses_to_mean_tokens(self):
        rng = np.random.default_rng(5)
        doc = make_doc(rng, 1, n_tokens=6, dim=3)
        regular = [i for i in range(6) if not doc.special_mask[i]]
        assert np.allclose(
            pool_mean_words(doc, [regular]).vector, pool_mean_tokens(doc).vector, atol=1e-6
        )

    def test_empty_alignment(self):
        with pytest.raises(EmptyPoolError):
            pool_mean_words(FOUR_TOKEN_DOC, [])

    def test_group_pointing_at_special_rejected(self):
        with pytest.raises(ValueError):
            pool_mean_words(FOUR_TOKEN_DOC, [[0]])


def table_of(entries):
    return WordVectorTable(
        dimension=len(next(iter(entries.values()))),
        table={w: np.array(v, dtype=np.float32) for w, v in entries.items()},
    )


class TestStaticMean:
    def test_normalize_then_average(self):
        table = table_of({"a": [3, 4], "b": [0, 2]})
        pooled = pool_static_mean(["a", "b"], table)
        assert np.allclose(pooled.vector, [0.3, 0.9], atol=1e-7)

    def test_oov_omitted_duplicates_counted(self):
        table = table_of({"w": [0, 5]})
        pooled = pool_static_mean(["w", "missing", "w"], table)
        assert np.allclose(pooled.vector, [0, 1], atol=1e-7)

    def test_all_oov(self):
        table = table_of({"w": [1, 0]})
        with pytest.raises(EmptyPoolError):
            pool_static_mean(["x", "y"], table)

    def test_matches_naive_oracle_on_random_bags(self):
        rng = np.random.default_rng(9)
        vocab = {f"w{i}": rng.standard_normal(6).astype(np.float32) for i in range(30)}
        table = table_of(vocab)
        for _ in range(50):
            words = [f"w{rng.integers(0, 40)}" for _ in range(rng.integers(1, 15))]
            in_vocab = [vocab[w] for w in words if w in vocab]
            if not in_vocab:
                with pytest.raises(EmptyPoolError):
                    pool_static_mean(words, table)
                continue
            units = []
            for vec in in_vocab:
                norm = sum(float(x) ** 2 for x in vec) ** 0.5
                units.append([float(x) / norm for x in vec])
            expected = naive_mean(units)
            assert np.allclose(pool_static_mean(words, table).vector, expected, atol=1e-6)

    def test_output_norm_at_most_one(self):
        rng = np.random.default_rng(10)
        vocab = {f"w{i}": rng.standard_normal(4).astype(np.float32) * 10 for i in range(20)}
        table = table_of(vocab)
        for _ in range(100):
            words = [f"w{rng.integers(0, 20)}" for _ in range(rng.integers(1, 10))]
            pooled = pool_static_mean(words, table)
            assert np.linalg.norm(pooled.vector) <= 1.0 + 1e-6

    def test_permutation_invariance(self):
        table = table_of({"a": [1, 2], "b": [-3, 1], "c": [0, 7]})
        forward = pool_static_mean(["a", "b", "c"], table).vector
        backward = pool_static_mean(["c", "b", "a"], table).vector
        assert np.allclose(forward, backward, atol=1e-7)


def test_strategy_tags():
    rng = np.random.default_rng(0)
    doc = make_doc(rng, 1)
    assert pool_mean_tokens(doc).strategy == "mean_tokens"
    assert pool_cls(doc).strategy == "cls"
    assert pool_long_tokens(doc).strategy == "mean_long_tokens"
    assert pool_cls_concat_mean(doc).strategy == "cls_concat_mean"
