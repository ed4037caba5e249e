"""ARIMAX(p, d, q) estimated by conditional sum of squares.

The differenced process follows::

    y'[t] = c + sum_i phi_i y'[t-i] + sum_j theta_j e[t-j] + sum_m beta_m x_m[t] + e[t]

where ``x`` is the raw (undifferenced) exogenous value at the same time
index. Residuals before the first ``p`` differenced observations are held
at zero and those observations only condition the recursion.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .timeseries import TimeSeries, undifference


@dataclass(frozen=True)
class ArimaSpec:
    p: int = 0
    d: int = 0
    q: int = 0
    intercept: bool = True
    exog_count: int = 0

    def __post_init__(self):
        if min(self.p, self.d, self.q, self.exog_count) < 0:
            raise ValueError("orders and exog_count must be non-negative")
        if self.p + self.q + self.exog_count + int(self.intercept) < 1:
            raise ValueError("model has no parameters")

    @classmethod
    def parse(cls, text: str, intercept: bool = True, exog_count: int = 0) -> "ArimaSpec":
        """``"2,1,1"`` (parentheses optional) to ``ArimaSpec(2, 1, 1)``."""
        body = text.strip()
        for prefix in ("ARIMAX", "ARIMA"):
            if body.upper().startswith(prefix):
                body = body[len(prefix) :]
        body = body.strip().strip("()")
        parts = [s.strip() for s in body.split(",")]
        if len(parts) != 3 or not all(s.isdigit() for s in parts):
            raise ValueError(f"cannot parse ARIMA order {text!r}; expected p,d,q")
        p, d, q = (int(s) for s in parts)
        return cls(p, d, q, intercept, exog_count)

    @property
    def n_params(self) -> int:
        return self.p + self.q + self.exog_count + int(self.intercept)

    @property
    def label(self) -> str:
        stem = "ARIMAX" if self.exog_count else "ARIMA"
        return f"{stem}({self.p},{self.d},{self.q})"

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class ArimaParams:
    ar: np.ndarray
    ma: np.ndarray
    intercept: float
    beta: np.ndarray

    @classmethod
    def from_vector(cls, spec: ArimaSpec, vec) -> "ArimaParams":
        vec = np.asarray(vec, dtype=float)
        p, q, m = spec.p, spec.q, spec.exog_count
        c = float(vec[p + q]) if spec.intercept else 0.0
        off = p + q + int(spec.intercept)
        return cls(vec[:p].copy(), vec[p : p + q].copy(), c, vec[off : off + m].copy())

    def to_vector(self, spec: ArimaSpec) -> np.ndarray:
        c = [self.intercept] if spec.intercept else []
        return np.concatenate([self.ar, self.ma, c, self.beta]).astype(float)

    def to_dict(self) -> dict:
        return {
            "ar": [float(v) for v in self.ar],
            "ma": [float(v) for v in self.ma],
            "intercept": float(self.intercept),
            "beta": [float(v) for v in self.beta],
        }


@dataclass(frozen=True)
class ArimaFit:
    spec: ArimaSpec
    params: ArimaParams
    sse: float
    residuals: np.ndarray
    n_used: int
    r_squared: float
    iterations: int
    converged: bool
    exog_names: tuple[str, ...] = ()
    warnings: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "params": self.params.to_dict(),
            "sse": self.sse,
            "r_squared": self.r_squared,
            "n_used": self.n_used,
            "exog_names": list(self.exog_names),
            "diagnostics": {
                "iterations": self.iterations,
                "converged": self.converged,
                "warnings": list(self.warnings),
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "ArimaFit":
        spec = ArimaSpec(**d["spec"])
        p = d["params"]
        params = ArimaParams(np.array(p["ar"]), np.array(p["ma"]), p["intercept"], np.array(p["beta"]))
        diag = d["diagnostics"]
        return cls(
            spec, params, d["sse"], np.empty(0), d["n_used"], d["r_squared"],
            diag["iterations"], diag["converged"], tuple(d.get("exog_names", ())),
            tuple(diag.get("warnings", ())),
        )


# ---------------------------------------------------------------------------


def nelder_mead(f, x0, tol: float = 1e-10, max_iter: int = 5000, xtol: float = 1e-8):
    """Minimise ``f`` with the downhill simplex method.

    Coefficients are reflection 1, expansion 2, contraction 0.5 and shrink
    0.5. The initial simplex offsets each coordinate of ``x0`` by
    ``max(0.05, 0.05 * |x0_i|)``. Iteration stops once the spread of function
    values across the simplex falls below ``tol`` and no vertex lies farther
    than ``xtol`` (per coordinate) from the best one; a simplex straddling
    the minimum symmetrically has zero value spread but has not converged.

    Returns ``(x_best, f_best, converged, iterations)``.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    f0 = float(f(x0))
    if not math.isfinite(f0):
        raise ValueError("objective is not finite at the starting point")
    n = x0.size
    simplex = [x0]
    for i in range(n):
        x = x0.copy()
        x[i] += max(0.05, 0.05 * abs(x0[i]))
        simplex.append(x)
    simplex = np.array(simplex)
    fvals = np.array([f0] + [_safe(f, x) for x in simplex[1:]])

    it = 0
    converged = False
    while True:
        order = np.argsort(fvals, kind="stable")
        simplex, fvals = simplex[order], fvals[order]
        if fvals[-1] - fvals[0] < tol and np.max(np.abs(simplex[1:] - simplex[0])) <= xtol:
            converged = True
            break
        if it >= max_iter:
            break
        it += 1

        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = centroid + (centroid - worst)
        fr = _safe(f, xr)
        if fr < fvals[0]:
            xe = centroid + 2.0 * (centroid - worst)
            fe = _safe(f, xe)
            if fe < fr:
                simplex[-1], fvals[-1] = xe, fe
            else:
                simplex[-1], fvals[-1] = xr, fr
            continue
        if fr < fvals[-2]:
            simplex[-1], fvals[-1] = xr, fr
            continue
        if fr < fvals[-1]:
            xc = centroid + 0.5 * (xr - centroid)
            fc = _safe(f, xc)
            if fc <= fr:
                simplex[-1], fvals[-1] = xc, fc
                continue
        else:
            xc = centroid + 0.5 * (worst - centroid)
            fc = _safe(f, xc)
            if fc < fvals[-1]:
                simplex[-1], fvals[-1] = xc, fc
                continue
        best = simplex[0]
        simplex[1:] = best + 0.5 * (simplex[1:] - best)
        fvals[1:] = [_safe(f, x) for x in simplex[1:]]

    return simplex[0].copy(), float(fvals[0]), converged, it


def _safe(f, x) -> float:
    v = float(f(x))
    return v if math.isfinite(v) else math.inf


# ---------------------------------------------------------------------------


def _exog_array(exog, n: int, m: int) -> np.ndarray:
    if m == 0:
        return np.empty((n, 0))
    if exog is None:
        raise ValueError(f"model expects {m} exogenous channel(s)")
    x = np.asarray(exog, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape != (n, m):
        raise ValueError(f"exog must have shape ({n}, {m}), got {x.shape}")
    return x


def _residuals(spec: ArimaSpec, params: ArimaParams, yd: np.ndarray, xd: np.ndarray) -> np.ndarray:
    """CSS residuals for t = p .. n-1 of the differenced series."""
    p = spec.p
    n = yd.size
    u = yd[p:] - params.intercept
    if spec.exog_count:
        u = u - xd[p:] @ params.beta
    for i in range(p):
        u = u - params.ar[i] * yd[p - 1 - i : n - 1 - i]
    if spec.q == 0:
        return u
    # e[t] + sum_j theta_j e[t-j] = u[t], zero presample shocks
    return lfilter([1.0], np.concatenate([[1.0], params.ma]), u)


def _prepare(spec: ArimaSpec, series, exog):
    if isinstance(series, TimeSeries):
        if exog is None and spec.exog_count:
            exog = series.exog_matrix()[:, : spec.exog_count]
        y = series.values
    else:
        y = np.asarray(series, dtype=float).reshape(-1)
    x = _exog_array(exog, y.size, spec.exog_count)
    if y.size <= spec.d + max(spec.p, spec.q):
        raise ValueError(
            f"series of length {y.size} too short for {spec.label} (needs > {spec.d + max(spec.p, spec.q)})"
        )
    yd = np.diff(y, n=spec.d) if spec.d else y
    return y, yd, x[spec.d :]


def css_objective(spec: ArimaSpec, params, series, exog=None):
    """Conditional sum of squares and its residuals."""
    if not isinstance(params, ArimaParams):
        params = ArimaParams.from_vector(spec, params)
    vec = params.to_vector(spec)
    if not np.all(np.isfinite(vec)):
        raise ValueError("parameters must be finite")
    _, yd, xd = _prepare(spec, series, exog)
    eps = _residuals(spec, params, yd, xd)
    return float(eps @ eps), eps


def _root_warnings(params: ArimaParams) -> tuple[str, ...]:
    out = []
    for name, coefs, sign in (("AR", params.ar, -1.0), ("MA", params.ma, 1.0)):
        if coefs.size and np.any(coefs):
            # roots of 1 - phi_1 z - ... (AR) or 1 + theta_1 z + ... (MA)
            poly = np.concatenate([[1.0], sign * coefs])[::-1]
            roots = np.roots(poly)
            if roots.size and np.min(np.abs(roots)) <= 1.0:
                kind = "stationary" if name == "AR" else "invertible"
                out.append(f"{name} polynomial has a root inside the unit circle; model is not {kind}")
    return tuple(out)


def fit_css(spec: ArimaSpec, series, exog=None, tol: float = 1e-10, max_iter: int = 20000) -> ArimaFit:
    """Minimise the CSS objective from zero coefficients and a mean intercept."""
    exog_names: tuple[str, ...] = ()
    if isinstance(series, TimeSeries) and spec.exog_count and exog is None:
        exog_names = series.exog_names[: spec.exog_count]
    y, yd, xd = _prepare(spec, series, exog)

    start = np.zeros(spec.n_params)
    if spec.intercept:
        start[spec.p + spec.q] = yd.mean()

    def objective(v):
        eps = _residuals(spec, ArimaParams.from_vector(spec, v), yd, xd)
        return float(eps @ eps)

    f_start = objective(start)
    if not math.isfinite(f_start):
        raise ValueError("CSS objective is not finite at the start point")
    # relative tolerance on the SSE scale, restarted once to escape a collapsed simplex
    ftol = tol * max(1.0, f_start)
    x, fx, converged, iters = nelder_mead(objective, start, ftol, max_iter)
    x2, fx2, converged, iters2 = nelder_mead(objective, x, ftol, max_iter)
    iters += iters2
    if fx2 <= fx:
        x, fx = x2, fx2
    if fx > f_start:
        x, fx = start, f_start

    params = ArimaParams.from_vector(spec, x)
    eps = _residuals(spec, params, yd, xd)
    sse = float(eps @ eps)
    # level-scale one-step errors equal the differenced-scale residuals
    levels = y[spec.d + spec.p :]
    sst = float(np.sum((levels - levels.mean()) ** 2))
    r2 = 1.0 - sse / sst if sst > 0 else math.nan
    return ArimaFit(
        spec=spec,
        params=params,
        sse=sse,
        residuals=eps,
        n_used=eps.size,
        r_squared=r2,
        iterations=iters,
        converged=converged,
        exog_names=exog_names,
        warnings=_root_warnings(params),
    )


def forecast_arima(
    fit: ArimaFit,
    history,
    horizon: int,
    mode: str = "one-step",
    actuals=None,
    exog_history=None,
    exog_future=None,
) -> np.ndarray:
    """Forecast levels after ``history``.

    Future shocks are zero. ``iterated`` feeds forecasts back into the
    differenced recursion; ``one-step`` uses the realised values and their
    residuals. Differenced forecasts are integrated from the last observed
    levels.
    """
    if mode not in ("one-step", "iterated"):
        raise ValueError(f"unknown forecast mode {mode!r}")
    if horizon < 0:
        raise ValueError("horizon must be non-negative")
    spec, params = fit.spec, fit.params
    if isinstance(history, TimeSeries):
        if exog_history is None and spec.exog_count:
            names = fit.exog_names or history.exog_names[: spec.exog_count]
            exog_history = history.exog_matrix(names)
        hist = history.values
    else:
        hist = np.asarray(history, dtype=float).reshape(-1)
    if hist.size <= spec.d + max(spec.p, spec.q):
        raise ValueError("history too short for this model")
    if horizon == 0:
        return np.empty(0)
    m = spec.exog_count
    xh = _exog_array(exog_history, hist.size, m)
    if isinstance(exog_future, TimeSeries):
        names = fit.exog_names or exog_future.exog_names[:m]
        exog_future = exog_future.exog_matrix(names)
    if m:
        if exog_future is None:
            raise ValueError("future exogenous values are required")
        xf = np.asarray(exog_future, dtype=float)
        xf = xf[:, None] if xf.ndim == 1 else xf
        if xf.shape[0] < horizon or xf.shape[1] != m:
            raise ValueError(f"future exog must have shape ({horizon}, {m})")
        xf = xf[:horizon]
    else:
        xf = np.empty((horizon, 0))

    if mode == "one-step":
        if actuals is None:
            raise ValueError("one-step forecasting needs the actual values over the horizon")
        actuals = np.asarray(actuals, dtype=float).reshape(-1)[:horizon]
        if actuals.size < horizon:
            raise ValueError(f"need {horizon} actual values")
        full = np.concatenate([hist, actuals])
        x_full = np.vstack([xh, xf])
        _, yd, xd = _prepare(spec, full, x_full if m else None)
        eps = _residuals(spec, params, yd, xd)
        return actuals - eps[-horizon:]

    _, yd, xd = _prepare(spec, hist, xh if m else None)
    eps_hist = _residuals(spec, params, yd, xd)
    eps = np.concatenate([np.zeros(spec.p), eps_hist, np.zeros(horizon)])
    path = np.concatenate([yd, np.zeros(horizon)])
    n = yd.size
    for h in range(horizon):
        t = n + h
        val = params.intercept + (xf[h] @ params.beta if m else 0.0)
        for i in range(spec.p):
            val += params.ar[i] * path[t - 1 - i]
        for j in range(spec.q):
            if t - 1 - j >= 0:
                val += params.ma[j] * eps[t - 1 - j]
        path[t] = val
    return undifference(path[n:], hist, spec.d)
