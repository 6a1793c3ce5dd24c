import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import central_differences, flat_grads, max_rel_error
from divlab.numerics import (
    DimensionError,
    Model,
    ModelKind,
    ModelSpec,
    compose,
    forward,
    gd_step,
    grad,
    init_model,
    logits,
    minibatches,
    softmax,
    zero_model,
)


class TestModelSpec:
    def test_linear_has_one_layer(self):
        assert ModelSpec.linear(3).layer_dims == [(3, 2)]

    def test_mlp_layer_dims(self):
        assert ModelSpec.mlp(4, (8, 5), 3).layer_dims == [(4, 8), (8, 5), (5, 3)]

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(kind="linear", input_dim=2, hidden_widths=(4,)),
            dict(kind="mlp", input_dim=2),
            dict(kind="linear", input_dim=0),
            dict(kind="linear", input_dim=2, num_classes=1),
            dict(kind="mlp", input_dim=2, hidden_widths=(0,)),
        ],
    )
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ValueError):
            ModelSpec(**kwargs)

    def test_kind_coerced_from_string(self):
        assert ModelSpec("mlp", 2, 2, (3,)).kind is ModelKind.MLP


class TestInit:
    def test_same_seed_same_weights(self):
        spec = ModelSpec.mlp(3, (6,))
        a, b = init_model(spec, 7), init_model(spec, 7)
        np.testing.assert_array_equal(a.flat_params(), b.flat_params())

    def test_different_seed_different_weights(self):
        spec = ModelSpec.linear(3)
        assert not np.array_equal(init_model(spec, 0).flat_params(), init_model(spec, 1).flat_params())

    def test_scale_bounded_by_fan_in(self):
        m = init_model(ModelSpec.mlp(16, (9,)), 0)
        for (W, b), fan_in in zip(m.layers, (16, 9)):
            assert np.abs(W).max() <= 1 / np.sqrt(fan_in)
            assert np.abs(b).max() <= 1 / np.sqrt(fan_in)

    def test_n_params(self):
        assert init_model(ModelSpec.mlp(3, (4,)), 0).n_params == 3 * 4 + 4 + 4 * 2 + 2

    def test_model_shape_checked(self):
        with pytest.raises(DimensionError):
            Model(ModelSpec.linear(2), [(np.zeros((3, 2)), np.zeros(2))])


class TestForward:
    def test_zero_model_is_uniform(self):
        p = forward(zero_model(ModelSpec.linear(4, 3)), np.ones((5, 4)))
        np.testing.assert_allclose(p, 1 / 3)

    def test_rows_on_simplex(self, rng):
        m = init_model(ModelSpec.mlp(5, (7, 4), 3), 2)
        p = forward(m, rng.normal(size=(20, 5)))
        assert np.all(p >= 0)
        np.testing.assert_allclose(p.sum(axis=1), 1.0)

    def test_hand_computed_linear(self):
        W = np.array([[1.0, -1.0], [0.0, 2.0]])
        b = np.array([0.5, 0.0])
        m = Model(ModelSpec.linear(2), [(W, b)])
        z = logits(m, np.array([[1.0, 1.0]]))
        np.testing.assert_allclose(z, [[1.5, 1.0]])
        np.testing.assert_allclose(forward(m, np.array([[1.0, 1.0]])), [[1 / (1 + np.exp(-0.5)), 1 / (1 + np.exp(0.5))]])

    def test_relu_blocks_negative_preactivations(self):
        spec = ModelSpec.mlp(1, (1,))
        m = Model(spec, [(np.array([[1.0]]), np.array([0.0])), (np.array([[1.0, -1.0]]), np.zeros(2))])
        np.testing.assert_allclose(logits(m, np.array([[-3.0]])), [[0.0, 0.0]])
        np.testing.assert_allclose(logits(m, np.array([[2.0]])), [[2.0, -2.0]])

    def test_input_dim_mismatch(self):
        with pytest.raises(DimensionError):
            forward(init_model(ModelSpec.linear(3), 0), np.ones((2, 4)))

    def test_softmax_is_stable_for_huge_logits(self):
        p = softmax(np.array([[1000.0, 0.0], [-1000.0, 1000.0]]))
        assert np.all(np.isfinite(p))
        np.testing.assert_allclose(p, [[1.0, 0.0], [0.0, 1.0]])

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(-50, 50), min_size=2, max_size=6), st.floats(-100, 100))
    def test_softmax_shift_invariant(self, row, shift):
        z = np.array([row])
        np.testing.assert_allclose(softmax(z), softmax(z + shift), atol=1e-12)


def _random_upstream(rng, n, q):
    return rng.normal(size=(n, q))


class TestGradient:
    @pytest.mark.parametrize("spec", [ModelSpec.linear(3), ModelSpec.mlp(3, (5, 4), 3)])
    @pytest.mark.parametrize("wrt", ["probs", "logits"])
    def test_matches_finite_differences(self, rng, spec, wrt):
        X = rng.normal(size=(6, 3))
        U = _random_upstream(rng, 6, spec.num_classes)
        m = init_model(spec, 3)
        out = forward if wrt == "probs" else logits

        def f(model):
            return float(np.sum(U * out(model, X)))

        analytic = flat_grads(grad(m, X, U, wrt=wrt))
        assert max_rel_error(analytic, central_differences(f, m)) < 1e-6

    def test_upstream_shape_checked(self, rng):
        m = init_model(ModelSpec.linear(3), 0)
        with pytest.raises(DimensionError):
            grad(m, rng.normal(size=(4, 3)), np.ones((4, 3)))

    def test_unknown_wrt(self, rng):
        m = init_model(ModelSpec.linear(3), 0)
        with pytest.raises(ValueError):
            grad(m, rng.normal(size=(4, 3)), np.ones((4, 2)), wrt="weights")


class TestGdStep:
    def test_moves_against_gradient(self):
        m = zero_model(ModelSpec.linear(2))
        g = [(np.ones((2, 2)), np.ones(2))]
        new = gd_step(m, g, 0.1)
        np.testing.assert_allclose(new.flat_params(), -0.1)
        np.testing.assert_allclose(m.flat_params(), 0.0)

    @pytest.mark.parametrize("lr", [0.0, -1.0])
    def test_rejects_nonpositive_rate(self, lr):
        m = zero_model(ModelSpec.linear(2))
        with pytest.raises(ValueError):
            gd_step(m, [(np.ones((2, 2)), np.ones(2))], lr)

    def test_structure_mismatch(self):
        m = zero_model(ModelSpec.mlp(2, (3,)))
        with pytest.raises(DimensionError):
            gd_step(m, [(np.ones((2, 3)), np.ones(3))], 0.1)

    def test_descends_a_separable_problem(self, rng):
        X = rng.normal(size=(50, 2))
        y = (X[:, 0] > 0).astype(int)
        m = zero_model(ModelSpec.linear(2))
        for _ in range(200):
            p = forward(m, X)
            U = np.zeros_like(p)
            U[np.arange(50), y] = -1 / (50 * p[np.arange(50), y])
            m = gd_step(m, grad(m, X, U), 0.5)
        assert np.mean(np.argmax(forward(m, X), axis=1) == y) > 0.95


class TestMinibatches:
    def test_full_batch(self):
        (idx,) = list(minibatches(5, None, None))
        np.testing.assert_array_equal(idx, np.arange(5))

    def test_partition(self, rng):
        parts = list(minibatches(10, 3, rng))
        assert [len(p) for p in parts] == [3, 3, 3, 1]
        np.testing.assert_array_equal(np.sort(np.concatenate(parts)), np.arange(10))


class TestCompose:
    def test_composed_model_matches_two_stage_forward(self, rng):
        full = init_model(ModelSpec.mlp(3, (4, 5)), 0)
        trunk = full.layers[:1]
        head = Model(ModelSpec.mlp(4, (5,)), full.layers[1:])
        fused = compose(trunk, head)
        X = rng.normal(size=(7, 3))
        np.testing.assert_allclose(forward(fused, X), forward(full, X))
        assert fused.spec.hidden_widths == (4, 5)

    def test_empty_trunk_copies_head(self):
        head = init_model(ModelSpec.linear(2), 0)
        out = compose([], head)
        np.testing.assert_array_equal(out.flat_params(), head.flat_params())
        assert out is not head
