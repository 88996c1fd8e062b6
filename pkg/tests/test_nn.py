import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fsgnn.nn import (
    AdamState,
    adam_step,
    aggregate_bwd,
    aggregate_fwd,
    dropout_bwd,
    dropout_fwd,
    grad_check,
    l2_row_normalize_bwd,
    l2_row_normalize_fwd,
    linear_bwd,
    linear_fwd,
    relu_bwd,
    relu_fwd,
    softmax_vec_bwd,
    softmax_vec_fwd,
    softmax_xent_bwd,
    softmax_xent_fwd,
)
from fsgnn.rng import RngStream

GRAD_TOL = 1e-5


def weighted_sum_check(fwd, bwd_x, x, seed=0, **kwargs):
    """Finite-difference check of one layer through loss = sum(out * c)."""
    c = RngStream(seed).uniform(-1, 1, fwd(x, **kwargs).shape)

    def loss_fn(params):
        out = fwd(params["x"], **kwargs)
        return float((out * c).sum()), {"x": bwd_x(c, params["x"], **kwargs)}

    report = grad_check(loss_fn, {"x": x.copy()})
    return report["x"]


class TestLinear:
    def test_identity_input(self):
        w = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert np.array_equal(linear_fwd(np.eye(2), w, np.zeros(2)), w)

    def test_bias_broadcast(self):
        out = linear_fwd(np.zeros((3, 2)), np.zeros((2, 2)), np.array([1.0, -1.0]))
        assert np.array_equal(out, np.tile([1.0, -1.0], (3, 1)))

    def test_zero_upstream_grad(self):
        x = RngStream(0).uniform(-1, 1, (3, 4))
        w = RngStream(1).uniform(-1, 1, (4, 2))
        gx, gw, gb = linear_bwd(np.zeros((3, 2)), x, w)
        assert not gx.any() and not gw.any() and not gb.any()

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            linear_fwd(np.zeros((2, 3)), np.zeros((4, 2)), np.zeros(2))

    @pytest.mark.parametrize("shape", [(3, 4, 2), (1, 5, 3), (6, 2, 4)])
    def test_grads_match_finite_differences(self, shape):
        n, d, h = shape
        rng = RngStream(42)
        x = rng.uniform(-1, 1, (n, d))
        w = rng.uniform(-1, 1, (d, h))
        b = rng.uniform(-1, 1, h)
        c = rng.uniform(-1, 1, (n, h))

        def loss_fn(p):
            out = linear_fwd(p["x"], p["w"], p["b"])
            gx, gw, gb = linear_bwd(c, p["x"], p["w"])
            return float((out * c).sum()), {"x": gx, "w": gw, "b": gb}

        report = grad_check(loss_fn, {"x": x, "w": w, "b": b})
        assert max(report.values()) < 1e-6


class TestRelu:
    def test_values(self):
        assert np.array_equal(relu_fwd(np.array([-1.0, 0.0, 2.0])), [0.0, 0.0, 2.0])

    def test_subgradient_at_zero(self):
        grad = relu_bwd(np.ones(3), np.array([-1.0, 0.0, 2.0]))
        assert np.array_equal(grad, [0.0, 0.0, 1.0])

    def test_finite_differences_away_from_zero(self):
        x = RngStream(3).uniform(-1, 1, (4, 5))
        x[np.abs(x) < 0.05] = 0.1  # keep clear of the kink
        err = weighted_sum_check(
            lambda v: relu_fwd(v), lambda c, v: relu_bwd(c, v), x
        )
        assert err < 1e-6


class TestDropout:
    def test_rate_zero_identity(self):
        x = RngStream(0).uniform(-1, 1, (3, 3))
        out, mask = dropout_fwd(x, 0.0, RngStream(1), training=True)
        assert out is x and mask is None

    def test_eval_identity_any_rate(self):
        x = RngStream(0).uniform(-1, 1, (3, 3))
        rng = RngStream(1)
        out, mask = dropout_fwd(x, 0.9, rng, training=False)
        assert out is x and mask is None and rng.counter == 0

    def test_invalid_rate(self):
        with pytest.raises(ValueError, match="rate"):
            dropout_fwd(np.zeros((2, 2)), 1.0, RngStream(0), training=True)

    def test_survivor_mean_preserved(self):
        x = np.ones((1000, 1000))
        out, _ = dropout_fwd(x, 0.5, RngStream(7), training=True)
        assert abs(out.mean() - 1.0) < 0.01

    def test_bit_reproducible(self):
        x = RngStream(2).uniform(-1, 1, (50, 20))
        out1, m1 = dropout_fwd(x, 0.4, RngStream(9), training=True)
        out2, m2 = dropout_fwd(x, 0.4, RngStream(9), training=True)
        assert np.array_equal(out1, out2) and np.array_equal(m1, m2)

    def test_backward_reuses_mask(self):
        x = RngStream(4).uniform(-1, 1, (6, 6))
        out, mask = dropout_fwd(x, 0.5, RngStream(5), training=True)
        grad = dropout_bwd(np.ones_like(x), mask, 0.5)
        assert np.array_equal(grad != 0, out != 0)
        assert np.allclose(grad[mask], 2.0)


class TestL2RowNormalize:
    def test_three_four_five(self):
        assert np.allclose(l2_row_normalize_fwd(np.array([[3.0, 4.0]])), [[0.6, 0.8]])

    def test_zero_row_stays_zero(self):
        out = l2_row_normalize_fwd(np.zeros((1, 3)))
        assert np.array_equal(out, np.zeros((1, 3)))

    def test_unit_norms(self):
        x = RngStream(11).uniform(-2, 2, (8, 5))
        norms = np.linalg.norm(l2_row_normalize_fwd(x), axis=1)
        assert np.abs(norms - 1.0).max() <= 1e-12

    @pytest.mark.parametrize("shape", [(3, 4), (1, 2), (6, 7)])
    def test_finite_differences(self, shape):
        x = RngStream(13).uniform(-1, 1, shape) + 0.1
        err = weighted_sum_check(
            lambda v: l2_row_normalize_fwd(v), lambda c, v: l2_row_normalize_bwd(c, v), x
        )
        assert err < 1e-6


class TestSoftmaxVec:
    def test_equal_logits(self):
        assert np.allclose(softmax_vec_fwd(np.ones(3)), 1 / 3)

    def test_seven_equal_logits(self):
        out = softmax_vec_fwd(np.ones(7))
        assert np.abs(out - 1 / 7).max() <= 1e-15

    def test_closed_form(self):
        out = softmax_vec_fwd(np.array([0.0, np.log(3.0)]))
        assert np.allclose(out, [0.25, 0.75], atol=1e-15)

    @given(st.lists(st.floats(-30, 30), min_size=1, max_size=10), st.floats(-10, 10))
    @settings(max_examples=50, deadline=None)
    def test_invariants(self, logits, shift):
        v = np.array(logits)
        out = softmax_vec_fwd(v)
        assert (out > 0).all()
        assert abs(out.sum() - 1.0) <= 1e-12
        assert np.abs(softmax_vec_fwd(v + shift) - out).max() <= 1e-12

    def test_finite_differences(self):
        v = RngStream(17).uniform(-2, 2, 6)
        c = RngStream(18).uniform(-1, 1, 6)

        def loss_fn(p):
            a = softmax_vec_fwd(p["v"])
            return float((a * c).sum()), {"v": softmax_vec_bwd(c, a)}

        assert grad_check(loss_fn, {"v": v})["v"] < 1e-6


class TestAggregate:
    def test_single_branch_identity(self):
        x = RngStream(0).uniform(-1, 1, (4, 3))
        assert np.array_equal(aggregate_fwd([x], "cat"), x)
        assert np.array_equal(aggregate_fwd([x], "sum"), x)

    def test_cat_width(self):
        branches = [np.zeros((5, 64)) for _ in range(7)]
        assert aggregate_fwd(branches, "cat").shape == (5, 448)

    def test_sum_shape_mismatch(self):
        with pytest.raises(ValueError, match="equal shapes"):
            aggregate_fwd([np.zeros((2, 3)), np.zeros((2, 4))], "sum")

    @pytest.mark.parametrize("scheme", ["cat", "sum"])
    def test_finite_differences(self, scheme):
        rng = RngStream(23)
        branches = [rng.uniform(-1, 1, (3, 4)) for _ in range(3)]
        c = rng.uniform(-1, 1, aggregate_fwd(branches, scheme).shape)

        def loss_fn(p):
            outs = aggregate_fwd([p["b0"], p["b1"], p["b2"]], scheme)
            grads = aggregate_bwd(c, [4, 4, 4], scheme)
            return float((outs * c).sum()), {f"b{i}": g for i, g in enumerate(grads)}

        report = grad_check(loss_fn, {f"b{i}": b for i, b in enumerate(branches)})
        assert max(report.values()) < 1e-6


class TestSoftmaxXent:
    def test_uniform_logits_loss(self):
        logits = np.zeros((5, 4))
        labels = np.array([0, 1, 2, 3, 0])
        loss, probs = softmax_xent_fwd(logits, labels, np.arange(5))
        assert loss == pytest.approx(np.log(4.0), abs=1e-12)
        assert np.allclose(probs, 0.25)

    def test_confident_correct_loss_vanishes(self):
        logits = np.array([[100.0, 0.0], [0.0, 100.0]])
        loss, _ = softmax_xent_fwd(logits, np.array([0, 1]), np.arange(2))
        assert loss < 1e-12

    def test_index_subset_only(self):
        logits = np.array([[0.0, 10.0], [5.0, 0.0]])
        labels = np.array([1, 0])
        loss_all, _ = softmax_xent_fwd(logits, labels, np.arange(2))
        loss_first, _ = softmax_xent_fwd(logits, labels, np.array([0]))
        assert loss_first != loss_all
        grad = softmax_xent_bwd(softmax_xent_fwd(logits, labels, np.array([0]))[1], labels, np.array([0]))
        assert not grad[1].any()

    def test_empty_index_set_rejected(self):
        with pytest.raises(ValueError, match="nonempty"):
            softmax_xent_fwd(np.zeros((2, 2)), np.zeros(2, dtype=int), np.array([], dtype=int))

    def test_finite_differences(self):
        rng = RngStream(29)
        logits = rng.uniform(-2, 2, (6, 3))
        labels = np.array([0, 1, 2, 0, 1, 2])
        idx = np.array([0, 2, 3, 5])

        def loss_fn(p):
            loss, probs = softmax_xent_fwd(p["z"], labels, idx)
            return loss, {"z": softmax_xent_bwd(probs, labels, idx)}

        assert grad_check(loss_fn, {"z": logits})["z"] < 1e-6


class TestAdam:
    def test_zero_grads_no_motion(self):
        p = [np.array([1.0, -2.0])]
        state = AdamState.for_params(p)
        adam_step(p, [np.zeros(2)], state, lr=0.1, weight_decay=0.0)
        assert np.array_equal(p[0], [1.0, -2.0])

    def test_first_step_is_signed_lr(self):
        # With fresh moments, m_hat / sqrt(v_hat) = sign(g), so the first
        # update magnitude is lr / (1 + eps-ish) <= lr.
        g = np.array([0.3, -0.004, 2.0])
        p = [np.zeros(3)]
        adam_step(p, [g], AdamState.for_params(p), lr=0.05)
        assert np.all(np.abs(p[0]) <= 0.05 * (1 + 1e-6))
        assert np.allclose(p[0], -0.05 * np.sign(g), rtol=1e-4)

    def test_quadratic_convergence(self):
        w = [np.array([1.0])]
        state = AdamState.for_params(w)
        for _ in range(100):
            adam_step(w, [2.0 * w[0]], state, lr=0.1)
        assert abs(w[0][0]) < 0.1

    def test_weight_decay_pulls_to_zero(self):
        w = [np.array([5.0])]
        state = AdamState.for_params(w)
        for _ in range(50):
            adam_step(w, [np.zeros(1)], state, lr=0.1, weight_decay=0.1)
        assert abs(w[0][0]) < 5.0

    def test_bit_identical_trajectories(self):
        def run():
            rng = RngStream(31)
            w = [rng.uniform(-1, 1, (3, 2))]
            state = AdamState.for_params(w)
            for step in range(20):
                grad = np.sin(w[0] + step)
                adam_step(w, [grad], state, lr=0.01, weight_decay=0.001)
            return w[0]

        assert np.array_equal(run(), run())


class TestGradCheck:
    def test_detects_corrupted_backward(self):
        rng = RngStream(37)
        x = rng.uniform(-1, 1, (4, 3))
        w = rng.uniform(-1, 1, (3, 2))
        labels = np.array([0, 1, 0, 1])
        idx = np.arange(4)

        def loss_fn(p):
            z = linear_fwd(x, p["w"], np.zeros(2))
            loss, probs = softmax_xent_fwd(z, labels, idx)
            dz = softmax_xent_bwd(probs, labels, idx)
            _, gw, _ = linear_bwd(dz, x, p["w"])
            return loss, {"w": gw * 1.1}  # deliberately wrong by 10%

        assert grad_check(loss_fn, {"w": w})["w"] > 1e-2

    def test_restores_parameters(self):
        w = np.array([[1.0, 2.0], [3.0, 4.0]])
        snapshot = w.copy()

        def loss_fn(p):
            return float((p["w"] ** 2).sum()), {"w": 2 * p["w"]}

        grad_check(loss_fn, {"w": w})
        assert np.array_equal(w, snapshot)
