"""Autoregressive feedforward network trained by momentum gradient descent.

A network maps a row of lagged observations (plus optional exogenous
inputs) through one or more fully connected hidden layers to a single
output node::

    y[t] = out_act(b0 + sum_j w_j * hid_act(b_j + sum_i w_ij * input_i))

All weights live in one flat vector. Each hidden layer contributes a
``(size, fan_in + 1)`` block in row-major order (a node's incoming weights
followed by its bias); the output node contributes ``size_last + 1``
entries, again with the bias last.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .timeseries import DesignMatrix, LagSpec, Scaler, TimeSeries, fit_scaler

ACTIVATIONS = ("sigmoid", "tanh", "identity")
_ALIASES = {
    "logistic": "sigmoid",
    "logistic-sigmoid": "sigmoid",
    "hyperbolic-tangent": "tanh",
    "linear": "identity",
    "purelin": "identity",
}

# target interval for sigmoid outputs; keeps the data clear of the asymptotes
SIGMOID_TARGET_RANGE = (0.1, 0.9)


class TrainingDivergedError(FloatingPointError):
    pass


def canonical_activation(name: str) -> str:
    key = name.strip().lower()
    key = _ALIASES.get(key, key)
    if key not in ACTIVATIONS:
        raise ValueError(f"unknown activation {name!r}; choose from {ACTIVATIONS}")
    return key


def activate(kind: str, z: np.ndarray) -> np.ndarray:
    if kind == "sigmoid":
        return 0.5 * (1.0 + np.tanh(0.5 * z))
    if kind == "tanh":
        return np.tanh(z)
    return z


def activation_slope(kind: str, a: np.ndarray) -> np.ndarray:
    """Derivative expressed through the activation's own output ``a``."""
    if kind == "sigmoid":
        return a * (1.0 - a)
    if kind == "tanh":
        return 1.0 - a * a
    return np.ones_like(a)


@dataclass(frozen=True)
class NetConfig:
    lags: LagSpec
    exog_count: int = 0
    hidden: tuple[int, ...] = (2,)
    hidden_activation: str = "sigmoid"
    output_activation: str = "identity"

    def __post_init__(self):
        if not isinstance(self.lags, LagSpec):
            object.__setattr__(self, "lags", LagSpec(self.lags))
        hidden = tuple(int(h) for h in self.hidden)
        if not hidden or any(h < 1 for h in hidden):
            raise ValueError(f"hidden sizes must be a non-empty sequence of positive ints, got {self.hidden}")
        if self.exog_count < 0:
            raise ValueError("exog_count must be non-negative")
        object.__setattr__(self, "hidden", hidden)
        object.__setattr__(self, "hidden_activation", canonical_activation(self.hidden_activation))
        object.__setattr__(self, "output_activation", canonical_activation(self.output_activation))

    @property
    def k(self) -> int:
        return len(self.lags) + self.exog_count

    @property
    def r(self) -> tuple[int, ...]:
        return self.hidden

    @property
    def activations(self) -> str:
        return f"{self.hidden_activation}/{self.output_activation}"

    def layer_shapes(self) -> list[tuple[int, int]]:
        """``(n_out, n_in + 1)`` for every layer, the output node last."""
        sizes = [self.k, *self.hidden, 1]
        return [(sizes[i + 1], sizes[i] + 1) for i in range(len(sizes) - 1)]

    def to_dict(self) -> dict:
        return {
            "lags": list(self.lags.lags),
            "exog_count": self.exog_count,
            "hidden": list(self.hidden),
            "hidden_activation": self.hidden_activation,
            "output_activation": self.output_activation,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetConfig":
        return cls(
            lags=LagSpec(d["lags"]),
            exog_count=d["exog_count"],
            hidden=tuple(d["hidden"]),
            hidden_activation=d["hidden_activation"],
            output_activation=d["output_activation"],
        )


def count_parameters(config: NetConfig) -> int:
    return sum(a * b for a, b in config.layer_shapes())


def unpack(config: NetConfig, weights: np.ndarray) -> list[np.ndarray]:
    """Split the flat vector into per-layer ``(n_out, n_in + 1)`` views."""
    weights = np.asarray(weights)
    if weights.size != count_parameters(config):
        raise ValueError(
            f"weight vector has {weights.size} entries, config needs {count_parameters(config)}"
        )
    blocks, pos = [], 0
    for rows, cols in config.layer_shapes():
        blocks.append(weights[pos : pos + rows * cols].reshape(rows, cols))
        pos += rows * cols
    return blocks


def init_weights(config: NetConfig, seed: int, half_width: float = 0.5) -> np.ndarray:
    if not half_width > 0:
        raise ValueError("half_width must be positive")
    rng = np.random.default_rng(seed)
    return rng.uniform(-half_width, half_width, count_parameters(config))


def _layers(config: NetConfig, weights, X: np.ndarray) -> list[np.ndarray]:
    """Activations of every layer, starting with the input matrix."""
    outs = [X]
    blocks = unpack(config, weights)
    for i, W in enumerate(blocks):
        z = outs[-1] @ W[:, :-1].T + W[:, -1]
        kind = config.output_activation if i == len(blocks) - 1 else config.hidden_activation
        outs.append(activate(kind, z))
    return outs


def predict(config: NetConfig, weights, X) -> np.ndarray:
    """Network output for every row of ``X`` (scaled units)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != config.k:
        raise ValueError(f"expected {config.k} inputs per row, got {X.shape[1]}")
    return _layers(config, weights, X)[-1][:, 0]


def forward(config: NetConfig, weights, x) -> float:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != config.k:
        raise ValueError(f"expected {config.k} inputs, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite values")
    return float(predict(config, weights, x[None, :])[0])


@dataclass(frozen=True)
class Gradient:
    vector: np.ndarray
    loss: float


def backprop_gradient(config: NetConfig, weights, X, y) -> Gradient:
    """Exact gradient of ``0.5 * sum((output - target)**2)`` over the batch."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.shape[0] == 0 or X.shape[0] != y.size:
        raise ValueError("batch must be non-empty with one target per row")
    blocks = unpack(config, weights)
    with np.errstate(over="ignore", invalid="ignore"):
        outs = _layers(config, weights, X)
        resid = outs[-1][:, 0] - y
        loss = 0.5 * float(resid @ resid)
        delta = (resid * activation_slope(config.output_activation, outs[-1][:, 0]))[:, None]
        grads = []
        for i in range(len(blocks) - 1, -1, -1):
            a_in = outs[i]
            grads.append(np.hstack([delta.T @ a_in, delta.sum(axis=0)[:, None]]))
            if i > 0:
                delta = (delta @ blocks[i][:, :-1]) * activation_slope(config.hidden_activation, a_in)
        vec = np.concatenate([g.ravel() for g in reversed(grads)])
    if not (math.isfinite(loss) and np.all(np.isfinite(vec))):
        norm = float(np.linalg.norm(weights))
        raise TrainingDivergedError(
            f"non-finite loss or gradient (weight norm {norm:.6g}); lower the learning rate"
        )
    return Gradient(vec, loss)


def momentum_step(weights, gradient, velocity, learning_rate: float, momentum: float):
    """Heavy-ball update; returns ``(new_weights, new_velocity)``."""
    g = gradient.vector if isinstance(gradient, Gradient) else np.asarray(gradient, dtype=float)
    weights = np.asarray(weights, dtype=float)
    velocity = np.asarray(velocity, dtype=float)
    if not (weights.shape == g.shape == velocity.shape):
        raise ValueError("weights, gradient and velocity must share one shape")
    velocity = momentum * velocity - learning_rate * g
    return weights + velocity, velocity


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.4
    momentum: float = 0.9
    regime: str = "batch"
    batch_size: int | None = None
    max_epochs: int = 2000
    patience: int = 50
    shuffle: bool = True
    seed: int = 0
    init_range: float = 0.5
    lr_decay: float | None = None

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.regime not in ("batch", "mini-batch", "online"):
            raise ValueError(f"unknown regime {self.regime!r}")
        if self.regime == "mini-batch" and (self.batch_size is None or self.batch_size < 1):
            raise ValueError("mini-batch regime needs batch_size >= 1")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be positive")
        if self.patience < 0:
            raise ValueError("patience must be non-negative")
        if self.lr_decay is not None and not 0 < self.lr_decay <= 1:
            raise ValueError("lr_decay must lie in (0, 1]")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


class StoppingRule:
    """Tracks the best epoch and signals a stop after ``patience`` epochs without improvement.

    With ``patience=0`` only ``max_epochs`` ends training.
    """

    def __init__(self, patience: int):
        self.patience = patience
        self.best = math.inf
        self.best_epoch = -1
        self.stale = 0
        self.epoch = -1

    def update(self, sse: float) -> bool:
        self.epoch += 1
        if sse < self.best:
            self.best, self.best_epoch, self.stale = sse, self.epoch, 0
            return False
        self.stale += 1
        return self.patience > 0 and self.stale >= self.patience


@dataclass(frozen=True)
class TrainedNet:
    config: NetConfig
    weights: np.ndarray
    input_scaler: Scaler | None
    target_scaler: Scaler | None
    trace: tuple[float, ...]
    residuals: np.ndarray
    seed: int
    epochs: int
    stop_reason: str
    exog_names: tuple[str, ...] = ()
    train_config: TrainConfig | None = field(default=None, compare=False)

    @property
    def train_sse(self) -> float:
        return min(self.trace)

    def predict(self, X) -> np.ndarray:
        """Outputs in original units for unscaled input rows."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.input_scaler is not None:
            X = self.input_scaler.apply(X)
        out = predict(self.config, self.weights, X)
        if self.target_scaler is not None:
            out = self.target_scaler.invert(out)
        return out

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "weights": [float(w) for w in self.weights],
            "input_scaler": None if self.input_scaler is None else self.input_scaler.to_dict(),
            "target_scaler": None if self.target_scaler is None else self.target_scaler.to_dict(),
            "exog_names": list(self.exog_names),
            "seed": self.seed,
            "epochs": self.epochs,
            "stop_reason": self.stop_reason,
            "train_sse": self.train_sse,
            "trace": [float(v) for v in self.trace],
            "residuals": [float(v) for v in self.residuals],
            "train_config": None if self.train_config is None else self.train_config.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainedNet":
        return cls(
            config=NetConfig.from_dict(d["config"]),
            weights=np.array(d["weights"], dtype=float),
            input_scaler=None if d["input_scaler"] is None else Scaler.from_dict(d["input_scaler"]),
            target_scaler=None if d["target_scaler"] is None else Scaler.from_dict(d["target_scaler"]),
            trace=tuple(d["trace"]),
            residuals=np.array(d["residuals"], dtype=float),
            seed=d["seed"],
            epochs=d["epochs"],
            stop_reason=d["stop_reason"],
            exog_names=tuple(d.get("exog_names", ())),
            train_config=None if d.get("train_config") is None else TrainConfig(**d["train_config"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "TrainedNet":
        return cls.from_dict(json.loads(text))


def fit_scalers(config: NetConfig, data: DesignMatrix) -> tuple[Scaler, Scaler]:
    """Inputs are z-scored; targets go to (0.1, 0.9) for a sigmoid output, z-scored otherwise."""
    x_scaler = fit_scaler(data.inputs, "zscore", allow_degenerate=True)
    if config.output_activation == "sigmoid":
        y_scaler = fit_scaler(data.targets, "minmax", SIGMOID_TARGET_RANGE, allow_degenerate=True)
    else:
        y_scaler = fit_scaler(data.targets, "zscore", allow_degenerate=True)
    return x_scaler, y_scaler


def _batches(n: int, tc: TrainConfig, epoch: int) -> list[np.ndarray]:
    if tc.regime == "batch":
        size = n
    elif tc.regime == "online":
        size = 1
    else:
        size = min(tc.batch_size, n)
    order = np.arange(n)
    if tc.regime != "batch" and tc.shuffle:
        order = np.random.default_rng([tc.seed, epoch]).permutation(n)
    return [order[i : i + size] for i in range(0, n, size)]


def train(config: NetConfig, data: DesignMatrix, tc: TrainConfig = TrainConfig(), scale: bool = True) -> TrainedNet:
    """Fit weights by momentum descent on the mean squared error of each batch.

    After every epoch the full training SSE (original units) is appended to
    the trace; the weights of the best epoch are returned. With
    ``scale=False`` the design matrix is used as given, so a sigmoid output
    needs targets already inside (0, 1).
    """
    if len(data) == 0:
        raise ValueError("design matrix is empty")
    if data.k != config.k:
        raise ValueError(f"design matrix has {data.k} columns, config expects {config.k}")
    if scale:
        x_scaler, y_scaler = fit_scalers(config, data)
        X, y = x_scaler.apply(data.inputs), y_scaler.apply(data.targets)
    else:
        x_scaler = y_scaler = None
        X, y = data.inputs, data.targets

    def full_sse(w) -> float:
        pred = predict(config, w, X)
        if y_scaler is not None:
            pred = y_scaler.invert(pred)
        r = pred - data.targets
        return float(r @ r)

    weights = init_weights(config, tc.seed, tc.init_range)
    velocity = np.zeros_like(weights)
    lr = tc.learning_rate
    rule = StoppingRule(tc.patience)
    trace: list[float] = []
    best = weights
    stop_reason = "max_epochs"
    n = len(data)
    for epoch in range(tc.max_epochs):
        for idx in _batches(n, tc, epoch):
            g = backprop_gradient(config, weights, X[idx], y[idx])
            weights, velocity = momentum_step(weights, g.vector / idx.size, velocity, lr, tc.momentum)
        with np.errstate(over="ignore", invalid="ignore"):
            sse = full_sse(weights)
        if not math.isfinite(sse):
            raise TrainingDivergedError(
                f"training SSE became non-finite at epoch {epoch}; lower the learning rate "
                f"(currently {lr})"
            )
        trace.append(sse)
        stop = rule.update(sse)
        if rule.best_epoch == epoch:
            best = weights.copy()
        elif tc.lr_decay is not None:
            lr *= tc.lr_decay
        if stop:
            stop_reason = "patience"
            break

    pred = predict(config, best, X)
    if y_scaler is not None:
        pred = y_scaler.invert(pred)
    return TrainedNet(
        config=config,
        weights=best,
        input_scaler=x_scaler,
        target_scaler=y_scaler,
        trace=tuple(trace),
        residuals=data.targets - pred,
        seed=tc.seed,
        epochs=len(trace),
        stop_reason=stop_reason,
        exog_names=tuple(data.exog_names),
        train_config=tc,
    )


def _horizon_exog(exog, horizon: int, names: Sequence[str]) -> np.ndarray:
    if not names:
        return np.empty((horizon, 0))
    if exog is None:
        raise ValueError(f"exogenous values for {list(names)} are required over the horizon")
    if isinstance(exog, TimeSeries):
        exog = exog.exog_matrix(names)
    elif isinstance(exog, dict):
        exog = np.column_stack([np.asarray(exog[n], dtype=float) for n in names])
    exog = np.asarray(exog, dtype=float)
    if exog.ndim < 2:
        exog = exog.reshape(-1, len(names))
    if exog.shape[0] < horizon or exog.shape[1] != len(names):
        raise ValueError(f"need exog of shape ({horizon}, {len(names)}), got {exog.shape}")
    return exog[:horizon]


def forecast(
    net: TrainedNet,
    history,
    horizon: int,
    mode: str = "one-step",
    actuals=None,
    exog=None,
) -> np.ndarray:
    """Predict the ``horizon`` values following ``history``.

    ``one-step`` feeds the true observations (``actuals``) as lag inputs;
    ``iterated`` feeds its own predictions back. ``exog`` supplies the
    contemporaneous channel values for each horizon step.
    """
    if mode not in ("one-step", "iterated"):
        raise ValueError(f"unknown forecast mode {mode!r}")
    if horizon < 0:
        raise ValueError("horizon must be non-negative")
    if horizon == 0:
        return np.empty(0)
    hist = history.values if isinstance(history, TimeSeries) else np.asarray(history, dtype=float)
    lags = net.config.lags
    if hist.size < lags.max_lag:
        raise ValueError(f"history of length {hist.size} is shorter than max lag {lags.max_lag}")
    if mode == "one-step":
        if actuals is None:
            raise ValueError("one-step forecasting needs the actual values over the horizon")
        actuals = np.asarray(actuals, dtype=float).reshape(-1)
        if actuals.size < horizon:
            raise ValueError(f"need {horizon} actual values, got {actuals.size}")
    x_future = _horizon_exog(exog, horizon, net.exog_names)

    path = np.concatenate([hist, np.zeros(horizon)])
    T = hist.size
    preds = np.empty(horizon)
    for h in range(horizon):
        t = T + h
        row = np.concatenate([[path[t - l] for l in lags], x_future[h]])
        preds[h] = net.predict(row[None, :])[0]
        path[t] = actuals[h] if mode == "one-step" else preds[h]
    return preds
