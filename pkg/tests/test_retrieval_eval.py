import numpy as np
import pytest

from Backend.errors import ConfigError, ContractError, DimensionError
from Backend.Projector.projector import DiversifiedAttentionProjector, Modality
from Backend.Retrieval.retrieval_eval import Direction, evaluate, map_at_k, score_matrix, score_pair
from tests.reference_oracle import brute_force_ap


class TestMapAtK:
    @pytest.mark.parametrize("ap_norm", ["min-r-k", "rel-at-k"])
    def test_matches_brute_force(self, ap_norm):
        rng = np.random.default_rng(42)
        for _ in range(20):
            scores = rng.integers(0, 4, size=(8, 8)).astype(float)  # con empates
            query_labels = rng.integers(0, 3, size=8)
            candidate_labels = rng.integers(0, 3, size=8)
            result = map_at_k(scores, query_labels, candidate_labels, k=5, ap_norm=ap_norm)
            expected = brute_force_ap(scores, query_labels, candidate_labels, 5, ap_norm)
            np.testing.assert_allclose(result.per_query_ap, expected, atol=1e-12, equal_nan=True)
            valid = ~np.isnan(expected)
            assert result.map == pytest.approx(expected[valid].mean() if valid.any() else 0.0, abs=1e-12)
            assert result.n_excluded == int((~valid).sum())

    def test_perfect_ranking(self):
        scores = np.array([[0.1, 0.9, 0.2], [0.8, 0.1, 0.9]])
        result = map_at_k(scores, np.array([0, 1]), np.array([0, 1, 0]), k=3)
        np.testing.assert_allclose(result.per_query_ap, [1.0, 1.0])

    def test_ties_broken_by_candidate_index(self):
        scores = np.zeros((1, 3))
        result = map_at_k(scores, np.array([1]), np.array([0, 0, 1]), k=3)
        assert result.per_query_ap[0] == pytest.approx(1.0 / 3.0)

    def test_query_without_relevant_candidates_is_excluded(self):
        scores = np.array([[0.1, 0.2], [0.3, 0.4]])
        result = map_at_k(scores, np.array([0, 5]), np.array([0, 1]), k=2)
        assert np.isnan(result.per_query_ap[1])
        assert (result.n_queries, result.n_excluded) == (1, 1)
        assert result.map == 1.0

    def test_norms_differ_when_relevants_fall_outside_k(self):
        scores = np.array([[0.0, 0.1, 0.2, 0.3]])
        labels = np.array([1, 0, 0, 1])
        assert map_at_k(scores, np.array([1]), labels, k=2, ap_norm="min-r-k").map == pytest.approx(0.5)
        assert map_at_k(scores, np.array([1]), labels, k=2, ap_norm="rel-at-k").map == pytest.approx(1.0)

    @pytest.mark.parametrize("n_classes", [5, 10])
    @pytest.mark.parametrize("ap_norm", ["min-r-k", "rel-at-k"])
    def test_random_scores_over_full_ranking(self, n_classes, ap_norm):
        # k ≥ n: ambas normas coinciden y el AP aleatorio esperado es R/n = 1/c.
        rng = np.random.default_rng(0)
        labels = np.arange(1000) % n_classes
        scores = rng.random((1000, 1000))
        result = map_at_k(scores, labels, labels, k=1000, ap_norm=ap_norm)
        assert abs(result.map - 1.0 / n_classes) <= 0.05

    @pytest.mark.parametrize("ap_norm, low, high", [("min-r-k", 0.04, 0.07), ("rel-at-k", 0.22, 0.29)])
    def test_random_scores_at_50(self, ap_norm, low, high):
        # 5 clases: min(R, k) = 50 divide ~10 aciertos; rel-at-k divide por esos mismos aciertos.
        rng = np.random.default_rng(1)
        labels = np.arange(1000) % 5
        scores = rng.random((1000, 1000))
        assert low < map_at_k(scores, labels, labels, k=50, ap_norm=ap_norm).map < high

    @pytest.mark.parametrize("ap_norm", ["min-r-k", "rel-at-k"])
    def test_invariant_to_monotone_transform(self, ap_norm, rng):
        scores = rng.random((12, 15))
        query_labels = rng.integers(0, 3, size=12)
        candidate_labels = rng.integers(0, 3, size=15)
        base = map_at_k(scores, query_labels, candidate_labels, k=6, ap_norm=ap_norm)
        shifted = map_at_k(3.0 * scores + 0.5, query_labels, candidate_labels, k=6, ap_norm=ap_norm)
        squashed = map_at_k(np.exp(scores), query_labels, candidate_labels, k=6, ap_norm=ap_norm)
        np.testing.assert_array_equal(base.per_query_ap, shifted.per_query_ap)
        np.testing.assert_array_equal(base.per_query_ap, squashed.per_query_ap)

    def test_invariant_to_query_order(self, rng):
        scores = rng.random((10, 9))
        query_labels = rng.integers(0, 3, size=10)
        candidate_labels = rng.integers(0, 3, size=9)
        order = rng.permutation(10)
        base = map_at_k(scores, query_labels, candidate_labels, k=5)
        permuted = map_at_k(scores[order], query_labels[order], candidate_labels, k=5)
        np.testing.assert_allclose(permuted.per_query_ap, base.per_query_ap[order], equal_nan=True)
        assert permuted.map == pytest.approx(base.map, abs=1e-12)

    def test_invalid_arguments(self):
        with pytest.raises(ConfigError):
            map_at_k(np.zeros((1, 1)), np.array([0]), np.array([0]), k=0)
        with pytest.raises(ConfigError):
            map_at_k(np.zeros((1, 1)), np.array([0]), np.array([0]), ap_norm="other")
        with pytest.raises(DimensionError):
            map_at_k(np.zeros((2, 3)), np.array([0]), np.array([0]))


class TestScoring:
    def test_score_pair_matches_matrix_entry(self, tiny_projector, rng):
        u, c = rng.normal(size=(3, 5)), rng.normal(size=(4, 4))
        matrix = score_matrix(tiny_projector, u, c, Direction.IMG2TXT)
        assert matrix.shape == (3, 4)
        images = tiny_projector.embed(u, Modality.IMAGE)
        texts = tiny_projector.embed(c, Modality.TEXT)
        assert score_pair(tiny_projector, images[1], texts[2]) == pytest.approx(matrix.values[1, 2], abs=1e-12)

    def test_scoring_records_nothing(self, tiny_projector, rng):
        matrix = score_matrix(tiny_projector, rng.normal(size=(2, 5)), rng.normal(size=(2, 4)), Direction.IMG2TXT)
        assert np.all((matrix.values >= 0.0) & (matrix.values <= 2.0))
        for p in tiny_projector.parameters():
            assert not p.grad.any()

    def test_score_pair_requires_opposite_modalities(self, tiny_projector, rng):
        x = tiny_projector.embed(rng.normal(size=(1, 5)), Modality.IMAGE)[0]
        with pytest.raises(ContractError):
            score_pair(tiny_projector, x, x)


class TestEvaluate:
    def test_rows_and_transposed_direction(self, rng):
        projector = DiversifiedAttentionProjector.create(6, 5, 8, 8, 2, seed=0)
        labels = np.repeat(np.arange(3), 4)
        image, text = rng.normal(size=(12, 6)), rng.normal(size=(12, 5))
        metrics, per_query = evaluate(projector, image, text, labels, k=5)
        assert metrics["task"].tolist() == ["Img2Txt", "Txt2Img", "Avg"]
        assert metrics.loc[2, "MAP"] == pytest.approx((metrics.loc[0, "MAP"] + metrics.loc[1, "MAP"]) / 2.0)
        assert len(per_query) == 24
        assert set(per_query.columns) == {"task", "query", "AP"}

        direct = score_matrix(projector, text, image, Direction.TXT2IMG)
        expected = map_at_k(direct, labels, labels, k=5).map
        assert metrics.loc[1, "MAP"] == pytest.approx(expected, abs=1e-9)

    def test_requires_labels(self, tiny_projector, rng):
        with pytest.raises(ContractError):
            evaluate(tiny_projector, rng.normal(size=(2, 5)), rng.normal(size=(2, 4)), None)
