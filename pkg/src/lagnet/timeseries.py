"""Series container, CSV ingestion, lagged design matrices, scaling and simulators."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

BURN_IN = 100


class DataError(ValueError):
    """Raised for malformed input data."""


def _as_vector(values, what: str) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{what} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TimeSeries:
    """Ordered observations with optional exogenous channels aligned index-for-index."""

    name: str
    values: np.ndarray
    exog: Mapping[str, np.ndarray] = field(default_factory=dict)
    origin: int = 0
    dates: tuple[str, ...] | None = None

    def __post_init__(self):
        values = _as_vector(self.values, f"series {self.name!r}")
        if values.size < 1:
            raise DataError("a series needs at least one observation")
        exog = {}
        for key, chan in dict(self.exog).items():
            chan = _as_vector(chan, f"exog channel {key!r}")
            if chan.size != values.size:
                raise DataError(
                    f"exog channel {key!r} has length {chan.size}, expected {values.size}"
                )
            exog[key] = chan
        if self.dates is not None and len(self.dates) != values.size:
            raise DataError("date column length does not match values")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "exog", exog)
        if self.dates is not None:
            object.__setattr__(self, "dates", tuple(self.dates))

    def __len__(self) -> int:
        return self.values.size

    @property
    def exog_names(self) -> tuple[str, ...]:
        return tuple(self.exog)

    def exog_matrix(self, names: Sequence[str] | None = None) -> np.ndarray:
        names = self.exog_names if names is None else tuple(names)
        if not names:
            return np.empty((len(self), 0))
        missing = [n for n in names if n not in self.exog]
        if missing:
            raise DataError(f"series has no exog channel(s) {missing}")
        return np.column_stack([self.exog[n] for n in names])

    def slice(self, start: int, stop: int | None = None) -> "TimeSeries":
        stop = len(self) if stop is None else stop
        return TimeSeries(
            name=self.name,
            values=self.values[start:stop],
            exog={k: v[start:stop] for k, v in self.exog.items()},
            origin=self.origin + start,
            dates=None if self.dates is None else self.dates[start:stop],
        )


@dataclass(frozen=True)
class LagSpec:
    """Distinct positive lags, stored ascending."""

    lags: tuple[int, ...]

    def __init__(self, lags: Iterable[int]):
        items = [int(l) for l in lags]
        if not items:
            raise ValueError("lag set must be non-empty")
        if any(l < 1 for l in items):
            raise ValueError(f"lags must be >= 1, got {sorted(items)}")
        if len(set(items)) != len(items):
            raise ValueError(f"lags must be distinct, got {items}")
        object.__setattr__(self, "lags", tuple(sorted(items)))

    @classmethod
    def contiguous(cls, first: int, last: int) -> "LagSpec":
        return cls(range(first, last + 1))

    @property
    def max_lag(self) -> int:
        return self.lags[-1]

    def __len__(self) -> int:
        return len(self.lags)

    def __iter__(self):
        return iter(self.lags)


@dataclass(frozen=True)
class DesignMatrix:
    inputs: np.ndarray
    targets: np.ndarray
    lags: LagSpec
    exog_names: tuple[str, ...] = ()

    @property
    def k(self) -> int:
        return self.inputs.shape[1]

    @property
    def max_lag(self) -> int:
        return self.lags.max_lag

    def __len__(self) -> int:
        return self.targets.size


class TrainTestSplit(NamedTuple):
    train: TimeSeries
    test: TimeSeries | None

    @property
    def test_empty(self) -> bool:
        return self.test is None


def load_csv(
    path,
    target: str,
    exog: Sequence[str] = (),
    date_column: str | None = None,
) -> TimeSeries:
    """Read a comma-separated file with one header row into a :class:`TimeSeries`.

    Rows keep file order. Every named column must exist and hold finite reals;
    the date column, when given, is carried along uninterpreted.
    """
    exog = list(exog)
    names = [target, *exog] + ([date_column] if date_column else [])
    if len(set(names)) != len(names):
        raise DataError(f"column names must be distinct: {names}")
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        for col in names:
            if col not in header:
                raise DataError(f"column {col!r} not found in {path}; header is {header}")
        idx = {col: header.index(col) for col in names}
        columns: dict[str, list[float]] = {c: [] for c in [target, *exog]}
        dates: list[str] = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise DataError(
                    f"ragged row at line {lineno}: {len(row)} fields, header has {len(header)}"
                )
            for col in columns:
                cell = row[idx[col]].strip()
                try:
                    val = float(cell)
                except ValueError:
                    val = math.nan
                if not math.isfinite(val):
                    raise DataError(
                        f"non-numeric cell {cell!r} at line {lineno}, column {col!r}"
                    )
                columns[col].append(val)
            if date_column:
                dates.append(row[idx[date_column]].strip())

    if not columns[target]:
        raise DataError(f"{path} has a header but no data rows")
    return TimeSeries(
        name=target,
        values=np.array(columns[target]),
        exog={c: np.array(columns[c]) for c in exog},
        dates=tuple(dates) if date_column else None,
    )


def write_csv(series: TimeSeries, path, date_column: str | None = None) -> None:
    """Write a series in the layout :func:`load_csv` reads back."""
    header = ([date_column] if date_column else []) + [series.name, *series.exog_names]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(len(series)):
            row = []
            if date_column:
                row.append(series.dates[i] if series.dates else str(series.origin + i))
            row.append(repr(float(series.values[i])))
            row.extend(repr(float(series.exog[c][i])) for c in series.exog_names)
            w.writerow(row)


def split_train_test(series: TimeSeries, n_train: int) -> TrainTestSplit:
    """Split into the first ``n_train`` observations and the remainder.

    When the whole series goes to training the test part is ``None`` and a
    warning is emitted; ``result.test_empty`` reports the same condition.
    """
    if not 1 <= n_train <= len(series):
        raise ValueError(f"n_train must lie in [1, {len(series)}], got {n_train}")
    train = series.slice(0, n_train)
    if n_train == len(series):
        warnings.warn("test window is empty; all observations used for training", stacklevel=2)
        return TrainTestSplit(train, None)
    return TrainTestSplit(train, series.slice(n_train))


def build_design_matrix(
    series: TimeSeries,
    lags: LagSpec | Iterable[int],
    include_exog: bool | Sequence[str] = False,
) -> DesignMatrix:
    """Lagged inputs ``(y[t-l1], ..., y[t-lm], x[t]...)`` against target ``y[t]``.

    ``include_exog`` may be a flag (all channels, declared order) or a list of
    channel names. Exogenous values enter contemporaneously.
    """
    if not isinstance(lags, LagSpec):
        lags = LagSpec(lags)
    n = len(series)
    m = lags.max_lag
    if m >= n:
        raise ValueError(f"max lag {m} must be smaller than series length {n}")
    if include_exog is True:
        names = series.exog_names
    elif include_exog is False:
        names = ()
    else:
        names = tuple(include_exog)
    y = series.values
    cols = [y[m - l : n - l] for l in lags]
    x = series.exog_matrix(names)
    cols.extend(x[m:, j] for j in range(len(names)))
    inputs = np.column_stack(cols)
    return DesignMatrix(inputs=inputs, targets=y[m:].copy(), lags=lags, exog_names=names)


@dataclass(frozen=True)
class Scaler:
    """Per-channel affine map, either z-score or min-max onto ``feature_range``."""

    kind: str
    loc: np.ndarray
    scale: np.ndarray
    feature_range: tuple[float, float] = (0.0, 1.0)

    def apply(self, data) -> np.ndarray:
        data = np.asarray(data, dtype=float)
        if self.kind == "zscore":
            return (data - self.loc) / self.scale
        a, b = self.feature_range
        return a + (data - self.loc) * ((b - a) / self.scale)

    def invert(self, data) -> np.ndarray:
        data = np.asarray(data, dtype=float)
        if self.kind == "zscore":
            return data * self.scale + self.loc
        a, b = self.feature_range
        return (data - a) * (self.scale / (b - a)) + self.loc

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "loc": [float(v) for v in np.atleast_1d(self.loc)],
            "scale": [float(v) for v in np.atleast_1d(self.scale)],
            "feature_range": list(self.feature_range),
            "shape": "scalar" if np.ndim(self.loc) == 0 else "vector",
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scaler":
        loc, scale = np.array(d["loc"]), np.array(d["scale"])
        if d.get("shape") == "scalar":
            loc, scale = loc[0], scale[0]
        return cls(d["kind"], loc, scale, tuple(d["feature_range"]))


def fit_scaler(
    data,
    kind: str = "zscore",
    feature_range: tuple[float, float] = (0.0, 1.0),
    names: Sequence[str] | None = None,
    allow_degenerate: bool = False,
) -> Scaler:
    """Fit per-column parameters (a 1-D input is one channel).

    Constant channels raise unless ``allow_degenerate``; then they are only
    shifted (z-score) or mapped to the lower end of the range (min-max).
    """
    arr = np.asarray(data, dtype=float)
    one_d = arr.ndim == 1
    cols = arr.reshape(arr.shape[0], -1) if not one_d else arr[:, None]
    if kind == "zscore":
        loc = cols.mean(axis=0)
        scale = cols.std(axis=0)
    elif kind == "minmax":
        a, b = feature_range
        if not b > a:
            raise ValueError(f"feature range must be increasing, got {feature_range}")
        loc = cols.min(axis=0)
        scale = cols.max(axis=0) - loc
    else:
        raise ValueError(f"unknown scaler kind {kind!r}")
    bad = np.flatnonzero(~(scale > 0))
    if bad.size:
        if not allow_degenerate:
            label = names[bad[0]] if names is not None else f"#{bad[0]}"
            raise DataError(f"channel {label} is constant; cannot fit a {kind} scaler")
        scale = np.where(scale > 0, scale, 1.0)
    if one_d:
        loc, scale = loc[0], scale[0]
    return Scaler(kind, loc, scale, tuple(float(v) for v in feature_range))


def difference(series: TimeSeries, d: int) -> TimeSeries:
    """Apply first differencing ``d`` times; exog channels are front-truncated, not differenced."""
    if d < 0:
        raise ValueError("d must be non-negative")
    if d >= len(series):
        raise ValueError(f"cannot difference a length-{len(series)} series {d} times")
    if d == 0:
        return series
    return TimeSeries(
        name=series.name,
        values=np.diff(series.values, n=d),
        exog={k: v[d:] for k, v in series.exog.items()},
        origin=series.origin + d,
        dates=None if series.dates is None else series.dates[d:],
    )


def undifference(diffs, levels, d: int) -> np.ndarray:
    """Integrate a d-times differenced continuation back to levels.

    ``levels`` is the observed series leading up to the continuation; its last
    ``d`` values anchor each integration stage.
    """
    out = np.asarray(diffs, dtype=float)
    if d == 0:
        return out.copy()
    levels = np.asarray(levels, dtype=float)
    if levels.size < d:
        raise ValueError(f"need at least {d} anchoring levels")
    stages = [levels[-(d + 1) :] if levels.size > d else levels]
    for _ in range(d - 1):
        stages.append(np.diff(stages[-1]))
    for i in range(d - 1, -1, -1):
        out = stages[i][-1] + np.cumsum(out)
    return out


# ---------------------------------------------------------------------------
# synthetic generators


@dataclass(frozen=True)
class ExogEffect:
    """Additive ``beta * x[t]`` with ``x`` drawn as i.i.d. Poisson counts."""

    beta: float
    rate: float = 5.0
    name: str = "x"


@dataclass(frozen=True)
class ARProcess:
    c: float
    phi: tuple[float, ...]
    sigma: float = 1.0
    exog: ExogEffect | None = None


@dataclass(frozen=True)
class ARMAProcess:
    c: float
    phi: tuple[float, ...]
    theta: tuple[float, ...]
    sigma: float = 1.0
    exog: ExogEffect | None = None


@dataclass(frozen=True)
class ThresholdAR:
    """Two-regime AR switching on ``y[t-delay] <= threshold``."""

    low: tuple[float, tuple[float, ...]]
    high: tuple[float, tuple[float, ...]]
    threshold: float = 0.0
    sigma: float = 1.0
    delay: int = 1
    exog: ExogEffect | None = None


def simulate(spec, n: int, seed: int, name: str = "y") -> TimeSeries:
    """Draw ``n`` observations after a burn-in of 100; deterministic in ``(spec, n, seed)``."""
    if n <= 0:
        raise ValueError(f"n must be positive, got {n}")
    if spec.sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {spec.sigma}")

    total = n + BURN_IN
    rng = np.random.default_rng(seed)
    eps = rng.normal(0.0, 1.0, total) * spec.sigma
    x = None
    if spec.exog is not None:
        if spec.exog.rate < 0:
            raise ValueError("exog rate must be non-negative")
        x = rng.poisson(spec.exog.rate, total).astype(float)

    y = np.zeros(total)
    if isinstance(spec, ThresholdAR):
        c1, phi1 = spec.low[0], np.asarray(spec.low[1], dtype=float)
        c2, phi2 = spec.high[0], np.asarray(spec.high[1], dtype=float)
        if spec.delay < 1:
            raise ValueError("delay must be >= 1")
        p = max(phi1.size, phi2.size, spec.delay)
        phi1 = np.pad(phi1, (0, p - phi1.size))
        phi2 = np.pad(phi2, (0, p - phi2.size))
        for t in range(total):
            past = np.array([y[t - i] if t - i >= 0 else 0.0 for i in range(1, p + 1)])
            trigger = y[t - spec.delay] if t - spec.delay >= 0 else 0.0
            c, phi = (c1, phi1) if trigger <= spec.threshold else (c2, phi2)
            y[t] = c + phi @ past + eps[t]
    elif isinstance(spec, (ARProcess, ARMAProcess)):
        phi = np.asarray(spec.phi, dtype=float)
        theta = np.asarray(getattr(spec, "theta", ()), dtype=float)
        p, q = phi.size, theta.size
        for t in range(total):
            val = spec.c + eps[t]
            for i in range(1, p + 1):
                if t - i >= 0:
                    val += phi[i - 1] * y[t - i]
            for j in range(1, q + 1):
                if t - j >= 0:
                    val += theta[j - 1] * eps[t - j]
            y[t] = val
    else:
        raise TypeError(f"unsupported generator spec {type(spec).__name__}")

    exog = {}
    if x is not None:
        y = y + spec.exog.beta * x
        exog[spec.exog.name] = x[BURN_IN:]
    return TimeSeries(name=name, values=y[BURN_IN:], exog=exog)


# Two-regime series driven by a count covariate, used as a stand-in for
# daily call volume with road accidents as the exogenous cause.
CALL_VOLUME_TAR = ThresholdAR(
    low=(2.0, (0.8, -0.3)),
    high=(-1.0, (-0.6, 0.3)),
    threshold=0.0,
    sigma=1.0,
    exog=ExogEffect(beta=2.0, rate=20.0, name="accidents"),
)
