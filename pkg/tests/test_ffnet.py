import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import finite_difference_gradient, gradient_rel_error, random_case
from lagnet.ffnet import (
    NetConfig,
    StoppingRule,
    TrainConfig,
    TrainedNet,
    TrainingDivergedError,
    activate,
    activation_slope,
    backprop_gradient,
    count_parameters,
    forecast,
    forward,
    init_weights,
    momentum_step,
    predict,
    train,
    unpack,
)
from lagnet.timeseries import DesignMatrix, LagSpec, TimeSeries, build_design_matrix, fit_scaler


class TestCountParameters:
    @pytest.mark.parametrize(
        "lags, hidden, expected",
        [([1, 2], (2,), 11), (range(1, 9), (7,), 78), ([1, 2, 3], (3, 2), 26)],
    )
    def test_known_counts(self, lags, hidden, expected):
        assert count_parameters(NetConfig(lags, 1, hidden)) == expected

    def test_layout_blocks(self):
        cfg = NetConfig([1, 2, 3], 1, (3, 2))
        shapes = [b.shape for b in unpack(cfg, np.zeros(26))]
        assert shapes == [(3, 5), (2, 4), (1, 3)]

    @settings(max_examples=200, deadline=None)
    @given(
        st.sets(st.integers(1, 12), min_size=1, max_size=8),
        st.integers(0, 2),
        st.lists(st.integers(1, 9), min_size=1, max_size=3),
    )
    def test_formula(self, lags, exog, hidden):
        cfg = NetConfig(sorted(lags), exog, tuple(hidden))
        sizes = [len(lags) + exog, *hidden]
        expected = sum(b * (a + 1) for a, b in zip(sizes, sizes[1:])) + hidden[-1] + 1
        assert count_parameters(cfg) == expected
        assert sum(b.size for b in unpack(cfg, np.zeros(expected))) == expected


class TestActivations:
    @settings(max_examples=300, deadline=None)
    @given(st.floats(-30, 30, allow_nan=False))
    def test_ranges(self, z):
        x = np.array([z])
        assert 0 <= activate("sigmoid", x)[0] <= 1
        assert -1 <= activate("tanh", x)[0] <= 1
        assert activate("identity", x)[0] == z

    @settings(max_examples=200, deadline=None)
    @given(st.floats(-8, 8, allow_nan=False), st.sampled_from(["sigmoid", "tanh", "identity"]))
    def test_slope_matches_derivative(self, z, kind):
        h = 1e-6
        numeric = (activate(kind, np.array([z + h])) - activate(kind, np.array([z - h])))[0] / (2 * h)
        assert activation_slope(kind, activate(kind, np.array([z])))[0] == pytest.approx(numeric, abs=1e-8)


class TestInit:
    def test_deterministic_and_seed_sensitive(self):
        cfg = NetConfig([1, 3], 1, (2,))
        a, b = init_weights(cfg, 4), init_weights(cfg, 4)
        assert a.tobytes() == b.tobytes()
        assert np.any(init_weights(cfg, 5) != a)
        assert np.all(np.abs(a) <= 0.5)

    def test_lengths(self, rng):
        for _ in range(100):
            cfg = random_case(rng)[0]
            assert init_weights(cfg, 0).size == count_parameters(cfg)

    def test_half_width(self):
        with pytest.raises(ValueError):
            init_weights(NetConfig([1]), 0, 0.0)


class TestForward:
    def test_zero_weights_identity_output(self):
        cfg = NetConfig([1, 2], 0, (3,), "sigmoid", "identity")
        assert forward(cfg, np.zeros(count_parameters(cfg)), [0.3, -2.0]) == 0.0

    def test_zero_weights_sigmoid_output(self):
        cfg = NetConfig([1, 2], 0, (3,), "sigmoid", "sigmoid")
        assert forward(cfg, np.zeros(count_parameters(cfg)), [0.3, -2.0]) == 0.5

    def test_hand_computation(self):
        cfg = NetConfig([1], 0, (1,), "sigmoid", "identity")
        # hidden: w_11 = 1, bias 0; output: w_1 = 2, bias w_0 = 1
        assert forward(cfg, np.array([1.0, 0.0, 2.0, 1.0]), [0.0]) == pytest.approx(2.0, abs=1e-15)

    def test_rejects_bad_input(self):
        cfg = NetConfig([1, 2])
        w = np.zeros(count_parameters(cfg))
        with pytest.raises(ValueError):
            forward(cfg, w, [1.0])
        with pytest.raises(ValueError):
            forward(cfg, w, [1.0, np.inf])

    def test_activation_ranges(self, rng):
        cfg = NetConfig([1, 2], 0, (4,), "tanh", "sigmoid")
        w = rng.normal(0, 3, count_parameters(cfg))
        out = predict(cfg, w, rng.normal(0, 5, (200, 2)))
        assert np.all((out > 0) & (out < 1))

    def test_hidden_permutation_symmetry(self, rng):
        cfg = NetConfig([1, 2, 3], 1, (5, 3), "tanh", "identity")
        w = rng.normal(0, 1, count_parameters(cfg))
        blocks = [b.copy() for b in unpack(cfg, w)]
        perm = rng.permutation(5)
        blocks[0] = blocks[0][perm]
        blocks[1][:, :5] = blocks[1][:, :5][:, perm]
        w2 = np.concatenate([b.ravel() for b in blocks])
        X = rng.normal(0, 1, (30, 4))
        np.testing.assert_allclose(predict(cfg, w2, X), predict(cfg, w, X), rtol=0, atol=1e-12)

    def test_linear_reduction(self, rng):
        cfg = NetConfig([1, 2, 3], 0, (4, 2), "identity", "identity")
        w = rng.normal(0, 1, count_parameters(cfg))
        h = 1e-3

        def jac(x):
            return np.array(
                [(forward(cfg, w, x + h * e) - forward(cfg, w, x - h * e)) / (2 * h) for e in np.eye(3)]
            )

        j0 = jac(np.zeros(3))
        for _ in range(20):
            np.testing.assert_allclose(jac(rng.normal(0, 10, 3)), j0, rtol=0, atol=1e-10)


class TestBackprop:
    def test_perfect_fit_zero_gradient(self, rng):
        cfg = NetConfig([1, 2], 1, (3,), "tanh", "identity")
        w = rng.normal(0, 1, count_parameters(cfg))
        X = rng.normal(0, 1, (10, 3))
        g = backprop_gradient(cfg, w, X, predict(cfg, w, X))
        assert g.loss == 0.0
        assert np.all(g.vector == 0.0)

    def test_finite_differences(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            cfg, w, X, y = random_case(rng)
            g = backprop_gradient(cfg, w, X, y)
            assert gradient_rel_error(g.vector, finite_difference_gradient(cfg, w, X, y)) < 1e-6

    def test_loss_is_half_sse(self, rng):
        cfg, w, X, y = random_case(rng)
        r = predict(cfg, w, X) - y
        assert backprop_gradient(cfg, w, X, y).loss == pytest.approx(0.5 * r @ r, rel=1e-14)

    def test_sum_decomposition(self, rng):
        for _ in range(20):
            cfg, w, X, y = random_case(rng)
            if len(y) < 2:
                continue
            cut = len(y) // 2
            whole = backprop_gradient(cfg, w, X, y)
            a = backprop_gradient(cfg, w, X[:cut], y[:cut])
            b = backprop_gradient(cfg, w, X[cut:], y[cut:])
            np.testing.assert_allclose(whole.vector, a.vector + b.vector, rtol=0, atol=1e-12)
            assert whole.loss == pytest.approx(a.loss + b.loss, abs=1e-12)

    def test_overflow_reports_norm(self):
        cfg = NetConfig([1], 0, (1,), "identity", "identity")
        w = np.array([1e200, 0.0, 1e200, 0.0])
        with pytest.raises(TrainingDivergedError, match="weight norm"):
            backprop_gradient(cfg, w, [[1e10]], [0.0])


class TestMomentum:
    def test_plain_descent(self):
        w, v = momentum_step(np.array([1.0, -2.0]), np.array([0.5, 1.0]), np.zeros(2), 0.1, 0.0)
        np.testing.assert_allclose(w, [0.95, -2.1])

    def test_fixed_point(self):
        w, v = momentum_step(np.array([3.0]), np.zeros(1), np.zeros(1), 0.4, 0.9)
        assert w.tolist() == [3.0] and v.tolist() == [0.0]

    def test_hand_arithmetic(self):
        w, v = momentum_step(np.array([1.0]), np.array([2.0]), np.array([0.5]), 0.4, 0.9)
        assert v[0] == pytest.approx(-0.35, abs=1e-15)
        assert w[0] == pytest.approx(0.65, abs=1e-15)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            momentum_step(np.zeros(2), np.zeros(3), np.zeros(2), 0.1, 0.5)


class TestStoppingRule:
    def test_scripted_sequence(self):
        rule = StoppingRule(1)
        seq = [10.0, 8.0, 7.5, 7.5, 3.0]
        stops = [rule.update(s) for s in seq[:4]]
        assert stops == [False, False, False, True]
        assert rule.best_epoch == 2

    def test_patience_counts_consecutive(self):
        rule = StoppingRule(2)
        assert [rule.update(s) for s in [5, 6, 4, 4.5, 4.2]] == [False, False, False, False, True]

    def test_zero_patience_never_stops(self):
        rule = StoppingRule(0)
        assert not any(rule.update(s) for s in [1, 2, 3, 4])


def _noisy_ar(n=120, seed=0):
    rng = np.random.default_rng(seed)
    y = np.zeros(n)
    for t in range(1, n):
        y[t] = 0.6 * y[t - 1] + rng.normal()
    return TimeSeries("y", y)


class TestTrain:
    def test_constant_target(self):
        dm = build_design_matrix(TimeSeries("y", np.full(40, 0.5)), [1])
        for seed in range(5):
            tc = TrainConfig(max_epochs=500, seed=seed)
            net = train(NetConfig([1], 0, (1,), "sigmoid", "identity"), dm, tc)
            assert net.train_sse < 1e-6
            # the closed-form constant predictor is the target itself
            np.testing.assert_allclose(net.predict(dm.inputs), 0.5, atol=1e-3)

    def test_deterministic(self):
        dm = build_design_matrix(_noisy_ar(), [1, 2])
        cfg = NetConfig([1, 2], 0, (2,))
        tc = TrainConfig(seed=3, max_epochs=300)
        a, b = train(cfg, dm, tc), train(cfg, dm, tc)
        assert a.trace == b.trace
        assert a.weights.tobytes() == b.weights.tobytes()

    @pytest.mark.parametrize("regime", ["batch", "mini-batch", "online"])
    def test_best_epoch_contract(self, regime):
        dm = build_design_matrix(_noisy_ar(), [1, 2])
        lr = 0.4 if regime == "batch" else 0.01
        tc = TrainConfig(learning_rate=lr, regime=regime, batch_size=16, max_epochs=150, seed=1)
        net = train(NetConfig([1, 2], 0, (3,)), dm, tc)
        assert net.train_sse == min(net.trace)
        assert net.residuals.size == len(dm)
        pred = dm.targets - net.residuals
        assert float(net.residuals @ net.residuals) == pytest.approx(net.train_sse, rel=1e-9)
        np.testing.assert_allclose(net.predict(dm.inputs), pred, rtol=1e-12)

    def test_patience_one_stops_at_first_failure(self):
        dm = build_design_matrix(_noisy_ar(), [1, 2])
        net = train(NetConfig([1, 2], 0, (2,)), dm, TrainConfig(patience=1, seed=0))
        tr = net.trace
        assert net.stop_reason == "patience"
        assert tr[-1] >= tr[-2]
        assert all(tr[i] < tr[i - 1] for i in range(1, len(tr) - 1))

    def test_minibatch_single_group_equals_batch(self):
        dm = build_design_matrix(_noisy_ar(), [1, 2])
        cfg = NetConfig([1, 2], 0, (3,))
        a = train(cfg, dm, TrainConfig(regime="batch", max_epochs=200, seed=5))
        b = train(cfg, dm, TrainConfig(regime="mini-batch", batch_size=len(dm), shuffle=False, max_epochs=200, seed=5))
        assert a.weights.tobytes() == b.weights.tobytes()
        assert a.trace == b.trace

    def test_divergence(self):
        dm = build_design_matrix(_noisy_ar(), [1, 2])
        tc = TrainConfig(learning_rate=1e6, momentum=0.0, regime="online", max_epochs=50)
        with pytest.raises(TrainingDivergedError, match="learning rate"):
            train(NetConfig([1, 2], 0, (2,), "tanh", "identity"), dm, tc)

    def test_sigmoid_output_unscaled_targets(self):
        X = np.linspace(0, 1, 30)[:, None]
        dm = DesignMatrix(X, 0.2 + 0.5 * X[:, 0], LagSpec([1]))
        net = train(NetConfig([1], 0, (2,), "sigmoid", "sigmoid"), dm, TrainConfig(max_epochs=100), scale=False)
        assert net.input_scaler is None and net.target_scaler is None

    def test_lr_decay(self):
        dm = build_design_matrix(_noisy_ar(), [1, 2])
        net = train(NetConfig([1, 2], 0, (2,)), dm, TrainConfig(lr_decay=0.5, max_epochs=300))
        assert net.train_sse == min(net.trace)

    @pytest.mark.parametrize(
        "kw",
        [{"learning_rate": 0}, {"momentum": 1.0}, {"regime": "mini-batch"}, {"regime": "sgd"}, {"patience": -1}],
    )
    def test_config_validation(self, kw):
        with pytest.raises(ValueError):
            TrainConfig(**kw)


def _affine_ar1_series(n=40, phi=0.95, y0=100.0):
    return TimeSeries("y", y0 * phi ** np.arange(n))


class TestForecast:
    @pytest.fixture
    def linear_net(self):
        s = _affine_ar1_series()
        dm = build_design_matrix(s, [1])
        net = train(NetConfig([1], 0, (1,), "identity", "identity"), dm, TrainConfig(patience=0))
        return s, net

    def test_horizon_zero(self, linear_net):
        s, net = linear_net
        assert forecast(net, s, 0, "iterated").size == 0

    def test_constant_net(self):
        cfg = NetConfig([1, 2], 0, (2,), "sigmoid", "identity")
        w = np.zeros(count_parameters(cfg))
        w[-1] = 0.25
        ys = fit_scaler(np.array([10.0, 30.0]), "zscore")
        net = TrainedNet(cfg, w, None, ys, (1.0,), np.zeros(1), 0, 1, "max_epochs")
        out = forecast(net, np.arange(10.0), 5, "iterated")
        np.testing.assert_allclose(out, ys.invert(0.25))

    def test_iterated_tracks_recursion(self, linear_net):
        s, net = linear_net
        assert net.train_sse < 1e-12
        pred = forecast(net, s, 10, "iterated")
        truth = 100.0 * 0.95 ** np.arange(40, 50)
        assert np.all(np.abs(pred - truth) <= 0.02 * np.abs(truth))

    def test_modes_agree_at_horizon_one(self):
        s = _noisy_ar(200)
        tr, te = s.slice(0, 150), s.slice(150)
        net = train(NetConfig([1, 2], 0, (2,)), build_design_matrix(tr, [1, 2]), TrainConfig(max_epochs=100))
        a = forecast(net, tr, 1, "one-step", actuals=te.values)
        b = forecast(net, tr, 1, "iterated")
        assert a.tobytes() == b.tobytes()

    def test_one_step_uses_actuals(self):
        s = _noisy_ar(200)
        tr, te = s.slice(0, 150), s.slice(150)
        net = train(NetConfig([1, 2], 0, (2,)), build_design_matrix(tr, [1, 2]), TrainConfig(max_epochs=100))
        pred = forecast(net, tr, 20, "one-step", actuals=te.values)
        direct = net.predict(build_design_matrix(s.slice(0, 170), [1, 2]).inputs[-20:])
        np.testing.assert_allclose(pred, direct, rtol=1e-12)

    def test_exog_required(self):
        s = TimeSeries("y", np.sin(np.arange(60.0)), {"x": np.cos(np.arange(60.0))})
        dm = build_design_matrix(s, [1], True)
        net = train(NetConfig([1], 1, (2,)), dm, TrainConfig(max_epochs=20))
        with pytest.raises(ValueError, match="exogenous"):
            forecast(net, s, 3, "iterated")
        out = forecast(net, s, 3, "iterated", exog={"x": [0.1, 0.2, 0.3]})
        assert out.shape == (3,)

    def test_errors(self, linear_net):
        s, net = linear_net
        with pytest.raises(ValueError, match="actual"):
            forecast(net, s, 3, "one-step")
        with pytest.raises(ValueError, match="shorter"):
            forecast(net, np.array([]), 3, "iterated")


class TestSerialization:
    def test_json_roundtrip_bitwise(self):
        s = TimeSeries("y", np.sin(np.arange(80.0) / 3), {"x": np.cos(np.arange(80.0))})
        dm = build_design_matrix(s.slice(0, 60), [1, 3], True)
        net = train(NetConfig([1, 3], 1, (2,), "tanh", "sigmoid"), dm, TrainConfig(max_epochs=50, seed=2))
        back = TrainedNet.from_json(net.to_json())
        assert back.weights.tobytes() == net.weights.tobytes()
        assert back.trace == net.trace
        fut = s.slice(60)
        a = forecast(net, s.slice(0, 60), 20, "iterated", exog=fut)
        b = forecast(back, s.slice(0, 60), 20, "iterated", exog=fut)
        assert a.tobytes() == b.tobytes()
        doc = json.loads(net.to_json())
        assert doc["config"]["hidden_activation"] == "tanh"
        assert doc["seed"] == 2
