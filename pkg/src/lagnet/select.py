"""Architecture search over lag sets, hidden sizes and activation pairs."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import re
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .evaluation import sse
from .ffnet import (
    NetConfig,
    TrainConfig,
    TrainedNet,
    TrainingDivergedError,
    count_parameters,
    forecast,
    train,
)
from .timeseries import DesignMatrix, LagSpec, TimeSeries, build_design_matrix

LEADERBOARD_COLUMNS = (
    "order",
    "n_params",
    "activations",
    "r_squared",
    "sse_train",
    "sse_test_onestep",
    "sse_test_iterated",
    "bic",
    "seed",
)

# hidden size by input count for the benchmark grid (k includes one exogenous input)
INFERRED_HIDDEN = {3: (2,), 4: (3,), 5: (3,), 6: (4,), 7: (4,), 8: (7,), 9: (7,)}
INFERRED_HIDDEN_TWO_LAYER = {4: (3, 2)}

# the 17 architectures of the emergency-call benchmark, as (order, activations)
BENCHMARK_ORDERS = (
    ("NN(1,1+2)", "sigmoid/identity"),
    ("NN(1,1-3)", "sigmoid/identity"),
    ("NN(1,1-4)", "sigmoid/identity"),
    ("NN(1,1-5)", "sigmoid/identity"),
    ("NN(1,1-6)", "sigmoid/identity"),
    ("NN(1,1-7)", "sigmoid/identity"),
    ("NN(1,1-8)", "sigmoid/identity"),
    ("NN(1,1+2+5)", "sigmoid/identity"),
    ("NN(1,1+5)", "sigmoid/identity"),
    ("NN(1,1+3)", "sigmoid/identity"),
    ("NN(1,2+3)", "sigmoid/identity"),
    ("NN(1,3+4)", "sigmoid/identity"),
    ("NN(1,4+5)", "sigmoid/identity"),
    ("NN(1,1+2)", "sigmoid/sigmoid"),
    ("NN(2,1-3)", "sigmoid/sigmoid"),
    ("NN(2,1-3)", "sigmoid/identity"),
    ("NN(1,1-3)", "sigmoid/sigmoid"),
)


# ---------------------------------------------------------------------------
# order notation

_ORDER_RE = re.compile(r"^\s*NN\s*\(\s*(\d+)\s*,\s*([0-9+\-\s]+?)\s*\)\s*$", re.IGNORECASE)


@dataclass(frozen=True)
class OrderNotation:
    layer_count: int
    lags: LagSpec

    @property
    def lag_text(self) -> str:
        return render_lags(self.lags)

    def render(self) -> str:
        return f"NN({self.layer_count},{self.lag_text})"

    def __str__(self) -> str:
        return self.render()


def render_lags(lags: LagSpec | Iterable[int]) -> str:
    """Runs of three or more consecutive lags print as ``a-b``, everything else joins with ``+``."""
    items = list(lags)
    parts, i = [], 0
    while i < len(items):
        j = i
        while j + 1 < len(items) and items[j + 1] == items[j] + 1:
            j += 1
        if j - i >= 2:
            parts.append(f"{items[i]}-{items[j]}")
        else:
            parts.extend(str(v) for v in items[i : j + 1])
        i = j + 1
    return "+".join(parts)


def parse_order(text: str) -> OrderNotation:
    """Parse ``NN(L, spec)``; ``spec`` terms are lags or ascending ranges joined by ``+``."""
    m = _ORDER_RE.match(text)
    if not m:
        raise ValueError(f"malformed order {text!r}; expected NN(layers,lags) e.g. NN(1,1+3)")
    layers = int(m.group(1))
    if layers < 1:
        raise ValueError(f"layer count must be positive in {text!r}")
    body = m.group(2).replace(" ", "")
    if not body:
        raise ValueError(f"empty lag spec in {text!r}")
    lags: list[int] = []
    for term in body.split("+"):
        if not term:
            raise ValueError(f"empty term in lag spec of {text!r}")
        if "-" in term:
            lo, _, hi = term.partition("-")
            if not lo.isdigit() or not hi.isdigit():
                raise ValueError(f"malformed range {term!r} in {text!r}")
            a, b = int(lo), int(hi)
            if a >= b:
                raise ValueError(f"range {term!r} in {text!r} must ascend")
            lags.extend(range(a, b + 1))
        else:
            if not term.isdigit():
                raise ValueError(f"malformed lag {term!r} in {text!r}")
            lags.append(int(term))
    return OrderNotation(layers, LagSpec(lags))


def contiguous_orders(max_lags: Iterable[int], layers: int = 1) -> list[OrderNotation]:
    """The family ``NN(layers, 1..p)`` for each ``p`` in ``max_lags``."""
    return [OrderNotation(layers, LagSpec.contiguous(1, p)) for p in max_lags]


# ---------------------------------------------------------------------------
# sizing and scoring


def hidden_sizes(k: int, rule: str, layers: int = 1) -> tuple[int, ...]:
    """Hidden layer sizes for ``k`` inputs.

    ``"n"`` gives ``k`` nodes and ``"2n+1"`` gives ``2k + 1``; deeper nets
    repeat that size. ``"inferred"`` looks ``k`` up in :data:`INFERRED_HIDDEN`.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if rule == "n":
        size = k
    elif rule == "2n+1":
        size = 2 * k + 1
    elif rule == "inferred":
        table = INFERRED_HIDDEN if layers == 1 else INFERRED_HIDDEN_TWO_LAYER
        if k not in table:
            raise ValueError(f"no inferred {layers}-layer hidden size for k={k}")
        return table[k]
    else:
        raise ValueError(f"unknown hidden-size rule {rule!r}")
    return (size,) * layers


class DegenerateFitWarning(RuntimeWarning):
    pass


def bic(n_obs: int, sse_value: float, n_params: int) -> float:
    """``n * ln(SSE / n) + p * ln(n)``; a perfect fit gives ``-inf`` with a warning."""
    if n_obs < 1:
        raise ValueError("n_obs must be >= 1")
    if sse_value < 0:
        raise ValueError("sse must be non-negative")
    if sse_value == 0:
        warnings.warn("zero SSE; BIC is -inf", DegenerateFitWarning, stacklevel=2)
        return -math.inf
    return n_obs * math.log(sse_value / n_obs) + n_params * math.log(n_obs)


# ---------------------------------------------------------------------------
# candidates and reports


@dataclass(frozen=True)
class Candidate:
    order: OrderNotation
    hidden: tuple[int, ...]
    hidden_activation: str = "sigmoid"
    output_activation: str = "identity"

    @property
    def activations(self) -> str:
        return f"{self.hidden_activation}/{self.output_activation}"

    def net_config(self, exog_count: int) -> NetConfig:
        return NetConfig(
            self.order.lags, exog_count, self.hidden, self.hidden_activation, self.output_activation
        )


def make_candidates(
    orders: Iterable[str | OrderNotation],
    exog_count: int,
    rule: str = "inferred",
    activation_pairs: Sequence[str] = ("sigmoid/identity",),
    hidden: Sequence[tuple[int, ...]] | None = None,
) -> list[Candidate]:
    """Cross every order with every activation pair, sizing hidden layers by ``rule``.

    ``hidden`` overrides the rule with one explicit size tuple per order.
    """
    orders = [parse_order(o) if isinstance(o, str) else o for o in orders]
    if hidden is not None and len(hidden) != len(orders):
        raise ValueError("need one explicit hidden-size tuple per order")
    out = []
    for i, order in enumerate(orders):
        k = len(order.lags) + exog_count
        sizes = tuple(hidden[i]) if hidden is not None else hidden_sizes(k, rule, order.layer_count)
        if len(sizes) != order.layer_count:
            raise ValueError(f"{order} declares {order.layer_count} layer(s) but got sizes {sizes}")
        for pair in activation_pairs:
            h, o = pair.split("/")
            out.append(Candidate(order, sizes, h.strip(), o.strip()))
    return out


def benchmark_candidates(exog_count: int = 1) -> list[Candidate]:
    out = []
    for text, pair in BENCHMARK_ORDERS:
        out.extend(make_candidates([text], exog_count, "inferred", [pair]))
    return out


@dataclass(frozen=True)
class SearchSpec:
    candidates: tuple[Candidate, ...]
    restarts: int = 5
    base_seed: int = 0
    train_config: TrainConfig = TrainConfig()
    criterion: str = "auto"
    exog: tuple[str, ...] | None = None

    def __post_init__(self):
        if not self.candidates:
            raise ValueError("search needs at least one candidate")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.criterion not in ("auto", "test-sse", "bic"):
            raise ValueError(f"unknown criterion {self.criterion!r}")
        object.__setattr__(self, "candidates", tuple(self.candidates))


@dataclass(frozen=True)
class FitReport:
    order: str
    n_params: int
    activations: str
    sse_train: float
    sse_test_onestep: float | None
    sse_test_iterated: float | None
    r_squared: float
    bic: float
    seed: int
    epochs: int
    n_obs: int
    hidden: tuple[int, ...] = ()
    restart_sses: tuple[float, ...] = ()
    trace: tuple[float, ...] = ()
    test_window: tuple[int, int] = (0, 0)
    wall_time: float = field(default=0.0, compare=False)
    net: TrainedNet | None = field(default=None, compare=False, repr=False)

    def row(self) -> dict:
        return {
            "order": self.order,
            "n_params": self.n_params,
            "activations": self.activations,
            "r_squared": self.r_squared,
            "sse_train": self.sse_train,
            "sse_test_onestep": self.sse_test_onestep,
            "sse_test_iterated": self.sse_test_iterated,
            "bic": self.bic,
            "seed": self.seed,
        }

    def to_dict(self) -> dict:
        # wall time is left out so reports stay byte-reproducible
        d = self.row()
        d.update(
            hidden=list(self.hidden),
            epochs=self.epochs,
            n_obs=self.n_obs,
            restart_sses=list(self.restart_sses),
            trace=list(self.trace),
            test_window=list(self.test_window),
        )
        return d


@dataclass(frozen=True)
class Leaderboard:
    reports: tuple[FitReport, ...]
    criterion: str
    skipped: tuple[tuple[str, str], ...] = ()
    tie_break: tuple[str, ...] = ("criterion", "n_params", "sse_train", "order", "activations")

    @property
    def winner(self) -> FitReport | None:
        return self.reports[0] if self.reports else None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(LEADERBOARD_COLUMNS)
        for r in self.reports:
            w.writerow(_fmt(v) for v in r.row().values())
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "criterion": self.criterion,
            "tie_break": list(self.tie_break),
            "winner": None if self.winner is None else self.winner.order,
            "reports": [r.to_dict() for r in self.reports],
            "skipped": [{"candidate": c, "reason": why} for c, why in self.skipped],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rank(reports: Iterable[FitReport], criterion: str) -> list[FitReport]:
    """Ascending criterion, then fewer parameters, lower train SSE, order string, activations."""

    def key(r: FitReport):
        score = r.sse_test_onestep if criterion == "test-sse" else r.bic
        return (score, r.n_params, r.sse_train, r.order, r.activations)

    return sorted(reports, key=key)


# ---------------------------------------------------------------------------
# fitting


def _threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("LAGNET_THREADS", "0") or 0)
    return max(0, threads)


def _run_restarts(config, data, tc, seeds, threads):
    def one(seed):
        try:
            return train(config, data, replace(tc, seed=seed))
        except TrainingDivergedError:
            return None

    if threads > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, seeds))
    return [one(s) for s in seeds]


def multi_restart_fit(
    config: NetConfig,
    data: DesignMatrix,
    restarts: int,
    base_seed: int = 0,
    tc: TrainConfig = TrainConfig(),
    threads: int | None = None,
) -> tuple[TrainedNet, list[float]]:
    """Train from seeds ``base_seed .. base_seed + restarts - 1`` and keep the lowest train SSE.

    Diverged restarts report ``nan`` in the SSE list; if every restart
    diverges the error propagates.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    seeds = [base_seed + i for i in range(restarts)]
    nets = _run_restarts(config, data, tc, seeds, _threads(threads))
    sses = [math.nan if n is None else n.train_sse for n in nets]
    alive = [n for n in nets if n is not None]
    if not alive:
        raise TrainingDivergedError(
            f"all {restarts} restarts diverged; lower the learning rate (currently {tc.learning_rate})"
        )
    best = min(alive, key=lambda n: (n.train_sse, n.seed))
    return best, sses


def evaluate_candidate(
    cand: Candidate,
    train_series: TimeSeries,
    test_series: TimeSeries | None,
    spec: SearchSpec,
    threads: int = 0,
) -> FitReport:
    names = train_series.exog_names if spec.exog is None else spec.exog
    config = cand.net_config(len(names))
    data = build_design_matrix(train_series, config.lags, names)
    t0 = time.perf_counter()
    net, sses = multi_restart_fit(config, data, spec.restarts, spec.base_seed, spec.train_config, threads)
    wall = time.perf_counter() - t0

    one = it = None
    window = (len(train_series), 0)
    if test_series is not None and len(test_series):
        h = len(test_series)
        window = (test_series.origin, h)
        p1 = forecast(net, train_series, h, "one-step", actuals=test_series.values, exog=test_series)
        pi = forecast(net, train_series, h, "iterated", exog=test_series)
        one, it = sse(test_series.values, p1), sse(test_series.values, pi)
    n_params = count_parameters(config)
    return FitReport(
        order=cand.order.render(),
        n_params=n_params,
        activations=cand.activations,
        sse_train=net.train_sse,
        sse_test_onestep=one,
        sse_test_iterated=it,
        r_squared=1.0 - net.train_sse / float(np.sum((data.targets - data.targets.mean()) ** 2)),
        bic=bic(len(data), net.train_sse, n_params),
        seed=net.seed,
        epochs=net.epochs,
        n_obs=len(data),
        hidden=cand.hidden,
        restart_sses=tuple(sses),
        trace=net.trace,
        test_window=window,
        wall_time=wall,
        net=net,
    )


def run_search(
    spec: SearchSpec,
    train_series: TimeSeries,
    test_series: TimeSeries | None = None,
    threads: int | None = None,
) -> Leaderboard:
    """Fit every candidate and rank them.

    Test SSE (one-step) ranks when a test window exists, BIC otherwise.
    Candidates whose lags do not fit the training series are skipped with a
    reason rather than failing the search.
    """
    threads = _threads(threads)
    has_test = test_series is not None and len(test_series) > 0
    criterion = spec.criterion
    if criterion == "auto" or (criterion == "test-sse" and not has_test):
        criterion = "test-sse" if has_test else "bic"

    skipped: list[tuple[str, str]] = []
    feasible = []
    for cand in spec.candidates:
        label = f"{cand.order.render()} {cand.activations}"
        if cand.order.lags.max_lag >= len(train_series):
            skipped.append((label, f"max lag {cand.order.lags.max_lag} >= training length {len(train_series)}"))
        else:
            feasible.append(cand)

    def job(cand):
        try:
            return evaluate_candidate(cand, train_series, test_series if has_test else None, spec)
        except (TrainingDivergedError, ValueError) as exc:
            return f"{cand.order.render()} {cand.activations}", str(exc)

    if threads > 1 and len(feasible) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, feasible))
    else:
        results = [job(c) for c in feasible]

    reports = []
    for res in results:
        if isinstance(res, FitReport):
            reports.append(res)
        else:
            skipped.append(res)
    return Leaderboard(tuple(rank(reports, criterion)), criterion, tuple(skipped))
