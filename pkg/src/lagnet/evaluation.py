"""Fit metrics and side-by-side model comparison."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

COMPARISON_COLUMNS = (
    "model_kind",
    "order",
    "n_params",
    "activations",
    "r_squared",
    "sse_train",
    "sse_test_onestep",
    "sse_test_iterated",
    "bic",
    "seed",
    "rank",
)


class IncomparableError(ValueError):
    pass


def _pair(actual, predicted) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(actual, dtype=float).reshape(-1)
    p = np.asarray(predicted, dtype=float).reshape(-1)
    if a.size != p.size:
        raise ValueError(f"length mismatch: {a.size} actual vs {p.size} predicted")
    if a.size == 0:
        raise ValueError("empty vectors")
    return a, p


def sse(actual, predicted) -> float:
    a, p = _pair(actual, predicted)
    r = a - p
    return float(r @ r)


def r_squared(actual, predicted) -> float:
    """``1 - SSE / SST`` with SST taken about the mean of ``actual``."""
    a, p = _pair(actual, predicted)
    if a.size < 2:
        raise ValueError("r_squared needs at least two observations")
    dev = a - a.mean()
    sst = float(dev @ dev)
    if sst == 0:
        raise ValueError("actual values are constant; R-squared is undefined")
    return 1.0 - sse(a, p) / sst


@dataclass(frozen=True)
class MetricPair:
    sse_train: float
    sse_test: float | None
    r_squared: float


@dataclass(frozen=True)
class ComparisonRow:
    label: str
    kind: str
    metrics: MetricPair
    n_params: int
    test_window: tuple[int, int]
    activations: str = ""
    sse_test_iterated: float | None = None
    bic: float | None = None
    seed: int | None = None


def row_from_report(report, kind: str = "nn") -> ComparisonRow:
    """Wrap a :class:`~lagnet.select.FitReport`."""
    return ComparisonRow(
        label=report.order,
        kind=kind,
        metrics=MetricPair(report.sse_train, report.sse_test_onestep, report.r_squared),
        n_params=report.n_params,
        test_window=tuple(report.test_window),
        activations=report.activations,
        sse_test_iterated=report.sse_test_iterated,
        bic=report.bic,
        seed=report.seed,
    )


def row_from_arima(fit, test_onestep, test_iterated, test_window, bic=None) -> ComparisonRow:
    return ComparisonRow(
        label=fit.spec.label,
        kind="arimax",
        metrics=MetricPair(fit.sse, test_onestep, fit.r_squared),
        n_params=fit.spec.n_params,
        test_window=tuple(test_window),
        sse_test_iterated=test_iterated,
        bic=bic,
    )


@dataclass(frozen=True)
class ComparisonTable:
    rows: tuple[ComparisonRow, ...]
    ranks: tuple[int, ...]
    winner: str

    def records(self) -> list[dict]:
        out = []
        for row, rk in zip(self.rows, self.ranks):
            m = row.metrics
            out.append(
                {
                    "model_kind": row.kind,
                    "order": row.label,
                    "n_params": row.n_params,
                    "activations": row.activations,
                    "r_squared": m.r_squared,
                    "sse_train": m.sse_train,
                    "sse_test_onestep": m.sse_test,
                    "sse_test_iterated": row.sse_test_iterated,
                    "bic": row.bic,
                    "seed": row.seed,
                    "rank": rk,
                }
            )
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COMPARISON_COLUMNS)
        for rec in self.records():
            w.writerow("" if v is None else repr(v) if isinstance(v, float) else str(v) for v in rec.values())
        return buf.getvalue()

    def to_text(self) -> str:
        """Aligned table; R-squared at 4 decimals, SSE at 2."""
        head = ["model", "kind", "params", "activations", "R2", "SSE train", "SSE test", "rank"]
        body = []
        for rec in self.records():
            body.append(
                [
                    rec["order"],
                    rec["model_kind"],
                    str(rec["n_params"]),
                    rec["activations"] or "-",
                    f"{rec['r_squared']:.4f}",
                    f"{rec['sse_train']:.2f}",
                    "-" if rec["sse_test_onestep"] is None else f"{rec['sse_test_onestep']:.2f}",
                    str(rec["rank"]),
                ]
            )
        widths = [max(len(r[i]) for r in [head, *body]) for i in range(len(head))]
        lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in [head, *body]]
        lines.append(f"winner: {self.winner}")
        return "\n".join(lines) + "\n"


def compare(rows: Sequence[ComparisonRow]) -> ComparisonTable:
    """Rank rows by one-step test SSE; all rows must share one test window.

    Ties fall to fewer parameters, then the label.
    """
    rows = tuple(rows)
    if not rows:
        raise ValueError("nothing to compare")
    windows = {r.test_window for r in rows}
    if len(windows) > 1:
        raise IncomparableError(f"rows were evaluated on different test windows: {sorted(windows)}")
    has_test = all(r.metrics.sse_test is not None for r in rows)

    def key(i):
        r = rows[i]
        head = r.metrics.sse_test if has_test else r.metrics.sse_train
        return (head, r.n_params, r.label, r.kind)

    order = sorted(range(len(rows)), key=key)
    ranks = [0] * len(rows)
    for pos, i in enumerate(order, start=1):
        ranks[i] = pos
    return ComparisonTable(rows, tuple(ranks), rows[order[0]].label)
