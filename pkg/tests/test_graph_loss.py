import numpy as np
import pytest

from Backend.errors import ConfigError, DegenerateBatchError
from Backend.GraphLoss.graph_loss import (
    CROSS,
    IMAGE_IMAGE,
    TEXT_TEXT,
    GraphLossWeights,
    build_batch_context,
    global_d_mean,
    graph_pattern_loss,
    mutual_loss,
    original_distances,
    pair_distance,
    pairwise_loss,
    reference_distance,
    reference_distances,
)
from Backend.Numgrad.tensor import Tensor
from Backend.Projector.projector import DiversifiedAttentionProjector, Modality
from tests import reference_oracle as oracle


def _params(projector):
    return [p.data for p in projector.parameters()]


def _batch(seed, n=4, dim_img=5, dim_txt=4):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(n, dim_img)), rng.normal(size=(n, dim_txt))


class TestOracleEquivalence:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_matches_straight_line_evaluation(self, seed):
        projector = DiversifiedAttentionProjector.create(5, 4, 6, 6, 3, seed=seed)
        u, c = _batch(seed)
        report = graph_pattern_loss(build_batch_context(projector, u, c), GraphLossWeights(0.7, 0.3))
        expected = oracle.graph_losses(u, c, _params(projector), 3, 0.7, 0.3)
        got = (report.l_pdl.item(), report.l_udp.item(), report.l_mdp.item(), report.l_gpl.item())
        np.testing.assert_allclose(got, expected, atol=1e-10, rtol=0)

    @pytest.mark.parametrize("signed, symmetric", [(True, False), (False, True), (True, True)])
    def test_udp_variants(self, signed, symmetric):
        projector = DiversifiedAttentionProjector.create(5, 4, 6, 4, 2, seed=4)
        u, c = _batch(4)
        report = graph_pattern_loss(
            build_batch_context(projector, u, c),
            GraphLossWeights(1.0, 0.0),
            udp_signed=signed,
            symmetric_udp=symmetric,
        )
        expected = oracle.graph_losses(u, c, _params(projector), 2, 1.0, 0.0, signed=signed, symmetric=symmetric)
        np.testing.assert_allclose(report.l_udp.item(), expected[1], atol=1e-10, rtol=0)

    def test_without_diversified_attention(self):
        projector = DiversifiedAttentionProjector.create(5, 4, 6, 4, 2, seed=8, use_da=False)
        u, c = _batch(8)
        report = graph_pattern_loss(build_batch_context(projector, u, c), GraphLossWeights(1.0, 1.0))
        expected = oracle.graph_losses(u, c, _params(projector), 2, 1.0, 1.0, use_da=False)
        np.testing.assert_allclose(report.l_gpl.item(), expected[3], atol=1e-10, rtol=0)

    def test_global_d_mean(self):
        projector = DiversifiedAttentionProjector.create(5, 4, 6, 4, 2, seed=6)
        u, c = _batch(6)
        report = graph_pattern_loss(build_batch_context(projector, u, c, d_mean=0.8), GraphLossWeights(1.0, 0.0))
        expected = oracle.graph_losses(u, c, _params(projector), 2, 1.0, 0.0, d_mean=0.8)
        np.testing.assert_allclose(report.l_udp.item(), expected[1], atol=1e-10, rtol=0)


class TestPairDistanceMatrix:
    def test_agrees_with_per_pair_distance(self, tiny_projector, rng):
        u, c = rng.normal(size=(3, 5)), rng.normal(size=(3, 4))
        ctx = build_batch_context(tiny_projector, u, c)
        images = tiny_projector.embed(u, Modality.IMAGE)
        texts = tiny_projector.embed(c, Modality.TEXT)
        cross = ctx.distances(CROSS).data
        intra = ctx.distances(IMAGE_IMAGE).data
        for i in range(3):
            for j in range(3):
                np.testing.assert_allclose(cross[i, j], pair_distance(tiny_projector, images[i], texts[j]).item(), atol=1e-12)
                np.testing.assert_allclose(intra[i, j], pair_distance(tiny_projector, images[i], images[j]).item(), atol=1e-12)

    def test_symmetric_in_the_pair(self, tiny_projector, rng):
        x = tiny_projector.embed(rng.normal(size=(1, 5)), Modality.IMAGE)[0]
        y = tiny_projector.embed(rng.normal(size=(1, 4)), Modality.TEXT)[0]
        assert pair_distance(tiny_projector, x, y).item() == pytest.approx(pair_distance(tiny_projector, y, x).item(), abs=1e-14)

    def test_intra_modality_diagonal_is_zero(self, tiny_projector, rng):
        ctx = build_batch_context(tiny_projector, rng.normal(size=(4, 5)), rng.normal(size=(4, 4)))
        np.testing.assert_allclose(np.diag(ctx.distances(IMAGE_IMAGE).data), 0.0, atol=1e-12)


class TestReferenceDistances:
    def test_matches_oracle(self, rng):
        u, c = rng.normal(size=(5, 3)), rng.normal(size=(5, 6))
        np.testing.assert_allclose(reference_distances(u, c), oracle.reference_matrix(u, c), atol=1e-12)

    def test_off_diagonal_mean_is_one(self, rng):
        d = reference_distances(rng.normal(size=(6, 3)), rng.normal(size=(6, 3)))
        assert d[~np.eye(6, dtype=bool)].mean() == pytest.approx(1.0)

    def test_single_pair_helper(self, rng):
        u, c = rng.normal(size=(3, 4)), rng.normal(size=(3, 4))
        d_ori = original_distances(u, c)
        assert reference_distance(u[0], u[2], c[0], c[2], 0.5) == pytest.approx(d_ori[0, 2] / 0.5)

    def test_global_mean_over_whole_set(self, rng):
        u, c = rng.normal(size=(6, 3)), rng.normal(size=(6, 3))
        d_ori = original_distances(u, c)
        assert global_d_mean(u, c) == pytest.approx(d_ori[~np.eye(6, dtype=bool)].mean())

    def test_degenerate_batch(self, tiny_projector):
        u = np.tile([1.0, 2.0, 0.5, -1.0, 3.0], (3, 1))
        c = np.tile([0.5, 1.0, -2.0, 1.0], (3, 1))
        ctx = build_batch_context(tiny_projector, u, c)
        with pytest.raises(DegenerateBatchError):
            graph_pattern_loss(ctx, GraphLossWeights(1.0, 1.0))


class TestIdentities:
    def test_zero_weights_reduce_to_pairwise(self, tiny_projector, rng):
        ctx = build_batch_context(tiny_projector, rng.normal(size=(4, 5)), rng.normal(size=(4, 4)))
        report = graph_pattern_loss(ctx, GraphLossWeights(0.0, 0.0))
        assert report.l_gpl.item() == report.l_pdl.item()

    def test_disabled_terms_report_zero(self, tiny_projector, rng):
        ctx = build_batch_context(tiny_projector, rng.normal(size=(4, 5)), rng.normal(size=(4, 4)))
        report = graph_pattern_loss(ctx, GraphLossWeights(2.0, 3.0), use_udp=False, use_mdp=False)
        assert report.l_udp.item() == 0.0
        assert report.l_mdp.item() == 0.0
        assert report.l_gpl.item() == report.l_pdl.item()

    def test_negative_weight_rejected(self):
        with pytest.raises(ConfigError):
            GraphLossWeights(-0.1, 1.0)
        with pytest.raises(ConfigError):
            GraphLossWeights(1.0, float("nan"))


class TestProperties:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_invariant_to_joint_reordering(self, tiny_projector, seed):
        u, c = _batch(seed, n=5)
        order = np.random.default_rng(seed).permutation(5)
        weights = GraphLossWeights(1.0, 1.0)
        base = graph_pattern_loss(build_batch_context(tiny_projector, u, c), weights)
        permuted = graph_pattern_loss(build_batch_context(tiny_projector, u[order], c[order]), weights)
        for name in ("l_pdl", "l_udp", "l_mdp"):
            assert permuted.values()[name] == pytest.approx(base.values()[name], abs=1e-12)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_family_differences_satisfy_triangle_inequality(self, tiny_projector, seed):
        u, c = _batch(seed, n=5)
        ctx = build_batch_context(tiny_projector, u, c)
        cross = ctx.distances(CROSS).data
        image = ctx.distances(IMAGE_IMAGE).data
        text = ctx.distances(TEXT_TEXT).data
        gaps = np.stack([np.abs(cross - image), np.abs(cross - text), np.abs(image - text)])
        largest = gaps.max(axis=0)
        assert np.all(largest <= gaps.sum(axis=0) - largest + 1e-12)

    def test_mutual_loss_zero_when_families_agree(self, tiny_projector, rng):
        u, c = rng.normal(size=(4, 5)), rng.normal(size=(4, 4))
        v = tiny_projector.encode(u, Modality.IMAGE)
        ctx = build_batch_context(tiny_projector, u, c, image=v, text=v)
        assert mutual_loss(ctx).item() == 0.0

    @pytest.mark.parametrize("seed", [3, 4, 5])
    def test_pairwise_loss_descends_when_text_moves_toward_image(self, seed):
        # Atención uniforme: la fusión es lineal y acercar t̂ᵢ a v̂ᵢ acerca ambas fusiones.
        projector = DiversifiedAttentionProjector.create(5, 4, 6, 4, 2, seed=seed, use_da=False)
        u, c = _batch(seed)
        v = projector.encode(u, Modality.IMAGE)
        t = projector.encode(c, Modality.TEXT)

        def loss_at(eps):
            moved = Tensor.constant((1.0 - eps) * t.data + eps * v.data)
            return pairwise_loss(build_batch_context(projector, u, c, image=v, text=moved)).item()

        start = loss_at(0.0)
        assert start > 0.0
        assert loss_at(1e-3) < start
        assert loss_at(1e-2) < loss_at(1e-3)
