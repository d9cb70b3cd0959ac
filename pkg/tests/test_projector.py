import numpy as np
import pytest

from Backend.errors import ConfigError, ContractError, DimensionError
from Backend.GraphLoss.graph_loss import GraphLossWeights, build_batch_context, graph_pattern_loss
from Backend.Numgrad import tensor as ng
from Backend.Numgrad.tensor import Tensor, backward
from Backend.Projector.projector import (
    DiversifiedAttentionProjector,
    FusionMode,
    Modality,
    denoise,
    flatten,
    init_projector_params,
    reshape_k,
)
from tests import reference_oracle as oracle


def _oracle_params(projector):
    p = projector.params
    return p.w_img.data, p.w_txt.data, p.w_shared.data, p.w1.data, p.w2.data


class TestInit:
    def test_shapes(self):
        params = init_projector_params(7, 5, hidden_dim=6, common_dim=12, k=3, seed=0)
        assert params.w_img.shape == (7, 6)
        assert params.w_txt.shape == (5, 6)
        assert params.w_shared.shape == (6, 12)
        assert params.w1.shape == (2, 4)  # D = H/2, H = L/k
        assert params.w2.shape == (1, 2)

    def test_seeded(self):
        a = init_projector_params(4, 4, 4, 4, 2, seed=9)
        b = init_projector_params(4, 4, 4, 4, 2, seed=9)
        for x, y in zip(a.as_list(), b.as_list()):
            np.testing.assert_array_equal(x.data, y.data)

    def test_k_must_divide_common_dim(self):
        with pytest.raises(ConfigError):
            init_projector_params(4, 4, 4, 10, 3, seed=0)


class TestDenoise:
    def test_zeroes_roughly_rate_fraction(self):
        x = np.ones((200, 50))
        out = denoise(x, 0.1, rng_seed=0)
        assert set(np.unique(out)) <= {0.0, 1.0}
        assert 0.08 < (out == 0.0).mean() < 0.12

    def test_identity_outside_training(self):
        x = np.arange(6.0).reshape(2, 3)
        np.testing.assert_array_equal(denoise(x, 0.5, rng_seed=0, training=False), x)

    def test_rate_out_of_range(self):
        with pytest.raises(ConfigError):
            denoise(np.ones((2, 2)), 1.0, rng_seed=0)


class TestReshape:
    def test_column_j_holds_block_j(self):
        v = Tensor(np.arange(12.0))
        x_hat = reshape_k(v, 3, Modality.IMAGE)
        np.testing.assert_array_equal(x_hat.matrix.data[:, 0], [0, 1, 2, 3])
        np.testing.assert_array_equal(x_hat.matrix.data[:, 2], [8, 9, 10, 11])
        np.testing.assert_array_equal(x_hat.matrix.data, oracle.reshape_k(np.arange(12.0), 3))

    def test_flatten_inverts_reshape(self):
        v = Tensor(np.arange(8.0))
        np.testing.assert_array_equal(flatten(reshape_k(v, 4, Modality.TEXT)).data, v.data)

    def test_k_not_dividing_length(self):
        with pytest.raises(ConfigError):
            reshape_k(Tensor(np.arange(7.0)), 2, Modality.IMAGE)


class TestAttention:
    def test_random_maps_are_distributions(self):
        projector = DiversifiedAttentionProjector.create(3, 3, hidden_dim=3, common_dim=12, k=4, seed=1)
        features = Tensor(np.random.default_rng(0).normal(scale=3.0, size=(10_000, 12)))
        maps = projector.attention_batch(features).data
        assert maps.shape == (10_000, 4)
        assert np.all(maps > 0.0)
        np.testing.assert_allclose(maps.sum(axis=1), 1.0, atol=1e-12, rtol=0)

    def test_batch_matches_per_instance_map(self, tiny_projector, rng):
        x = rng.normal(size=(3, 5))
        batch = tiny_projector.attention_batch(tiny_projector.encode(x, Modality.IMAGE)).data
        for i, x_hat in enumerate(tiny_projector.embed(x, Modality.IMAGE)):
            single = tiny_projector.attention_map(x_hat).weights.data[:, 0]
            np.testing.assert_allclose(batch[i], single, atol=1e-14)
            np.testing.assert_allclose(
                single, oracle.attention(x_hat.matrix.data, *_oracle_params(tiny_projector)[3:]), atol=1e-14
            )

    def test_uniform_without_diversified_attention(self, rng):
        projector = DiversifiedAttentionProjector.create(5, 4, 6, 4, 2, seed=3, use_da=False)
        x_hat = projector.embed(rng.normal(size=(1, 5)), Modality.IMAGE)[0]
        np.testing.assert_array_equal(projector.attention_map(x_hat).weights.data, [[0.5], [0.5]])

    def test_wrong_shape_rejected(self, tiny_projector):
        with pytest.raises(DimensionError):
            tiny_projector.attention_map(reshape_k(Tensor(np.ones(6)), 3, Modality.IMAGE))


class TestFusion:
    def test_co_attention_matches_formula(self, tiny_projector, rng):
        x_hat = tiny_projector.embed(rng.normal(size=(1, 5)), Modality.IMAGE)[0]
        y_hat = tiny_projector.embed(rng.normal(size=(1, 4)), Modality.TEXT)[0]
        fused = tiny_projector.co_attend(x_hat, y_hat)
        w1, w2 = _oracle_params(tiny_projector)[3:]
        a = oracle.attention(x_hat.matrix.data, w1, w2)
        b = oracle.attention(y_hat.matrix.data, w1, w2)
        np.testing.assert_allclose(fused.vector.data[:, 0], oracle.fuse(x_hat.matrix.data, a, b), atol=1e-14)
        assert fused.mode is FusionMode.CO

    def test_self_and_co_share_the_formula(self, tiny_projector, rng):
        xs = tiny_projector.embed(rng.normal(size=(2, 5)), Modality.IMAGE)
        fused = tiny_projector.self_attend(xs[0], xs[1])
        assert fused.mode is FusionMode.SELF
        assert (fused.instance, fused.partner) == (0, 1)

    def test_modality_contracts(self, tiny_projector, rng):
        x_hat = tiny_projector.embed(rng.normal(size=(1, 5)), Modality.IMAGE)[0]
        y_hat = tiny_projector.embed(rng.normal(size=(1, 4)), Modality.TEXT)[0]
        with pytest.raises(ContractError):
            tiny_projector.self_attend(x_hat, y_hat)
        with pytest.raises(ContractError):
            tiny_projector.co_attend(x_hat, x_hat)

    def test_encode_dimension_mismatch(self, tiny_projector):
        with pytest.raises(DimensionError):
            tiny_projector.encode(np.ones((2, 4)), Modality.IMAGE)


class TestAttentionAblation:
    def test_attention_parameters_get_no_gradient_without_da(self, rng):
        projector = DiversifiedAttentionProjector.create(5, 4, 6, 4, 2, seed=3, use_da=False)
        u, c = rng.normal(size=(4, 5)), rng.normal(size=(4, 4))
        report = graph_pattern_loss(build_batch_context(projector, u, c), GraphLossWeights(1.0, 1.0))
        backward(report.l_gpl)
        assert not projector.params.w1.grad.any()
        assert not projector.params.w2.grad.any()
        assert projector.params.w_shared.grad.any()

    def test_shared_layer_receives_gradient_from_both_modalities(self, tiny_projector, rng):
        v = tiny_projector.encode(rng.normal(size=(2, 5)), Modality.IMAGE)
        backward(ng.sum(v))
        from_image = tiny_projector.params.w_shared.grad.copy()
        tiny_projector.params.w_shared.zero_grad()
        t = tiny_projector.encode(rng.normal(size=(2, 4)), Modality.TEXT)
        backward(ng.sum(v) + ng.sum(t))
        assert not np.allclose(tiny_projector.params.w_shared.grad, from_image)
