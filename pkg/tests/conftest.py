import numpy as np
import pytest

from lagnet.ffnet import NetConfig, count_parameters, predict


def finite_difference_gradient(config, weights, X, y, step=1e-5):
    """Central differences of 0.5 * SSE, computed from forward passes only."""

    def loss(w):
        r = predict(config, w, X) - y
        return 0.5 * float(r @ r)

    g = np.empty_like(weights)
    for i in range(weights.size):
        up, down = weights.copy(), weights.copy()
        up[i] += step
        down[i] -= step
        g[i] = (loss(up) - loss(down)) / (2 * step)
    return g


def gradient_rel_error(analytic, numeric, floor=1e-3):
    """Entrywise relative error; the floor keeps near-zero entries from dominating."""
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def random_case(rng):
    lags = sorted(rng.choice(np.arange(1, 9), size=rng.integers(1, 9), replace=False).tolist())
    exog = int(rng.integers(0, 2))
    if len(lags) + exog > 9:
        exog = 0
    layers = int(rng.integers(1, 3))
    hidden = tuple(int(h) for h in rng.integers(1, 6, size=layers))
    acts = ["sigmoid", "tanh", "identity"]
    config = NetConfig(lags, exog, hidden, acts[rng.integers(3)], acts[rng.integers(3)])
    w = rng.normal(0, 0.7, count_parameters(config))
    n = int(rng.integers(1, 12))
    X = rng.normal(0, 1, (n, config.k))
    y = rng.normal(0, 1, n)
    return config, w, X, y


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one PASS/FAIL line per acceptance criterion, shown in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[0].split("-")[1])):
            terminalreporter.write_line(line)
