"""Command-line driver: ``lagnet {simulate,fit-nn,fit-arima,search,forecast,compare}``.

Exit codes: 0 success, 1 fit/runtime failure, 2 usage or validation error.
Options may also come from a JSON file given with ``--config``; explicit
flags win over file values.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .arima import ArimaFit, ArimaSpec, fit_css, forecast_arima
from .evaluation import compare, row_from_arima, row_from_report, sse
from .ffnet import TrainConfig, TrainedNet, TrainingDivergedError, forecast
from .plot import PlotSpec, emit_plot
from .select import (
    SearchSpec,
    benchmark_candidates,
    bic,
    evaluate_candidate,
    make_candidates,
    run_search,
)
from .timeseries import (
    CALL_VOLUME_TAR,
    ARMAProcess,
    ARProcess,
    DataError,
    ExogEffect,
    ThresholdAR,
    TimeSeries,
    load_csv,
    simulate,
    split_train_test,
    write_csv,
)

log = logging.getLogger("lagnet")

DEFAULTS = {
    "target": "calls",
    "exog": "",
    "date_column": None,
    "seed": 0,
    "out_dir": ".",
    "plot": False,
    # simulate
    "kind": "tar",
    "n": 687,
    "c": 0.0,
    "phi": "0.5",
    "theta": "",
    "sigma": 1.0,
    "threshold": 0.0,
    "c_high": 0.0,
    "phi_high": "",
    "exog_beta": None,
    "exog_rate": 5.0,
    "out": None,
    # networks
    "order": "NN(1,1+3)",
    "orders": "NN(1,1+2),NN(1,1-3),NN(1,1+3)",
    "benchmark": False,
    "hidden": None,
    "hidden_rule": "inferred",
    "activations": "sigmoid/identity",
    "restarts": 5,
    "criterion": "auto",
    "lr": 0.4,
    "momentum": 0.9,
    "regime": "batch",
    "batch_size": None,
    "max_epochs": 2000,
    "patience": 50,
    "init_range": 0.5,
    "lr_decay": None,
    # arima / forecasting
    "arimax": "2,1,1",
    "no_intercept": False,
    "model": None,
    "horizon": None,
    "mode": "one-step",
    "window": None,
}


class UsageError(Exception):
    pass


def split_top_level(text: str) -> list[str]:
    """Split on commas that are not inside parentheses."""
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    if "".join(cur).strip():
        parts.append("".join(cur).strip())
    return [p for p in parts if p]


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in split_top_level(text)) if text else ()


# ---------------------------------------------------------------------------
# parser


def _common(p: argparse.ArgumentParser, data: bool = True) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--config", default=S, help="JSON file of option values")
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--out-dir", default=S)
    if data:
        p.add_argument("--input", default=S, help="CSV file with a header row")
        p.add_argument("--target", default=S, help="target column (default: calls)")
        p.add_argument("--exog", default=S, help="comma-separated exogenous columns")
        p.add_argument("--date-column", default=S)
        p.add_argument("--train", type=int, default=S, help="number of leading training rows")
        p.add_argument("--plot", action="store_true", default=S)


def _training(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--lr", type=float, default=S, help="learning rate (default 0.4)")
    p.add_argument("--momentum", type=float, default=S, help="momentum (default 0.9)")
    p.add_argument("--regime", choices=("batch", "mini-batch", "online"), default=S)
    p.add_argument("--batch-size", type=int, default=S)
    p.add_argument("--max-epochs", type=int, default=S)
    p.add_argument("--patience", type=int, default=S)
    p.add_argument("--init-range", type=float, default=S)
    p.add_argument("--lr-decay", type=float, default=S)
    p.add_argument("--restarts", type=int, default=S)
    p.add_argument("--hidden", default=S, help="explicit hidden sizes, e.g. 3 or 3,2")
    p.add_argument("--hidden-rule", choices=("inferred", "n", "2n+1"), default=S)
    p.add_argument("--activations", default=S, help="hidden/output pair(s), e.g. sigmoid/identity")


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    parser = argparse.ArgumentParser(prog="lagnet", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"lagnet {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a synthetic series to CSV")
    _common(p, data=False)
    p.add_argument("--kind", choices=("ar1", "ar", "arma", "tar", "callvol"), default=S)
    p.add_argument("--n", type=int, default=S)
    p.add_argument("--c", type=float, default=S)
    p.add_argument("--phi", default=S, help="comma-separated AR coefficients")
    p.add_argument("--theta", default=S, help="comma-separated MA coefficients")
    p.add_argument("--sigma", type=float, default=S)
    p.add_argument("--threshold", type=float, default=S)
    p.add_argument("--c-high", type=float, default=S)
    p.add_argument("--phi-high", default=S)
    p.add_argument("--exog-beta", type=float, default=S)
    p.add_argument("--exog-rate", type=float, default=S)
    p.add_argument("--target", default=S)
    p.add_argument("--exog", default=S, help="name of the exogenous column")
    p.add_argument("--out", default=S, help="output CSV (default <out-dir>/data.csv)")

    p = sub.add_parser("fit-nn", help="train one network with restarts")
    _common(p)
    _training(p)
    p.add_argument("--order", default=S, help="e.g. NN(1,1+3)")

    p = sub.add_parser("fit-arima", help="fit ARIMAX by conditional sum of squares")
    _common(p)
    p.add_argument("--arimax", default=S, help="p,d,q (default 2,1,1)")
    p.add_argument("--no-intercept", action="store_true", default=S)

    p = sub.add_parser("search", help="rank candidate architectures")
    _common(p)
    _training(p)
    p.add_argument("--orders", default=S, help='comma-separated orders, e.g. "NN(1,1+2),NN(1,1-3)"')
    p.add_argument("--benchmark", action="store_true", default=S, help="use the 17-architecture grid")
    p.add_argument("--criterion", choices=("auto", "test-sse", "bic"), default=S)

    p = sub.add_parser("forecast", help="forecast from a saved net.json or arima.json")
    _common(p)
    p.add_argument("--model", default=S, help="saved model JSON")
    p.add_argument("--horizon", type=int, default=S)
    p.add_argument("--mode", choices=("one-step", "iterated"), default=S)

    p = sub.add_parser("compare", help="fit NN and ARIMAX, forecast the test window, compare")
    _common(p)
    _training(p)
    p.add_argument("--order", default=S)
    p.add_argument("--arimax", default=S)
    p.add_argument("--no-intercept", action="store_true", default=S)
    p.add_argument("--horizon", type=int, default=S, help="forecast length (default: whole test window)")
    p.add_argument("--window", type=int, default=S, help="number of forecast points to plot")
    return parser


def resolve(ns: argparse.Namespace) -> dict:
    given = {k: v for k, v in vars(ns).items() if k not in ("config",)}
    opts = dict(DEFAULTS)
    cfg_path = getattr(ns, "config", None)
    if cfg_path:
        path = Path(cfg_path)
        if not path.is_file():
            raise UsageError(f"config file {path} does not exist")
        try:
            file_opts = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {path} is not valid JSON: {exc}") from None
        opts.update({k.replace("-", "_"): v for k, v in file_opts.items()})
    opts.update(given)
    return opts


# ---------------------------------------------------------------------------
# helpers


def _exog_names(opts) -> list[str]:
    ex = opts["exog"]
    if isinstance(ex, (list, tuple)):
        return [str(e) for e in ex]
    return [e.strip() for e in str(ex).split(",") if e.strip()]


def _load(opts) -> TimeSeries:
    if not opts.get("input"):
        raise UsageError("--input is required")
    path = Path(opts["input"])
    if not path.is_file():
        raise UsageError(f"input file {path} does not exist")
    return load_csv(path, opts["target"], _exog_names(opts), opts.get("date_column"))


def _split(opts, series: TimeSeries):
    if opts.get("train") is None:
        raise UsageError("--train is required")
    n_train = int(opts["train"])
    if not 1 <= n_train <= len(series):
        raise UsageError(f"--train must lie in [1, {len(series)}]")
    if n_train == len(series):
        return series, None
    return split_train_test(series, n_train)


def _train_config(opts) -> TrainConfig:
    try:
        return TrainConfig(
            learning_rate=float(opts["lr"]),
            momentum=float(opts["momentum"]),
            regime=opts["regime"],
            batch_size=opts["batch_size"],
            max_epochs=int(opts["max_epochs"]),
            patience=int(opts["patience"]),
            seed=int(opts["seed"]),
            init_range=float(opts["init_range"]),
            lr_decay=opts["lr_decay"],
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _activation_pairs(opts) -> list[str]:
    acts = opts["activations"]
    return list(acts) if isinstance(acts, (list, tuple)) else [a.strip() for a in acts.split(",") if a.strip()]


def _candidates(opts, orders, exog_count):
    hidden = opts.get("hidden")
    try:
        if hidden:
            sizes = tuple(int(v) for v in str(hidden).split(","))
            hidden = [sizes] * len(orders)
        return make_candidates(orders, exog_count, opts["hidden_rule"], _activation_pairs(opts), hidden)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _search_spec(opts, candidates) -> SearchSpec:
    return SearchSpec(
        candidates=tuple(candidates),
        restarts=int(opts["restarts"]),
        base_seed=int(opts["seed"]),
        train_config=_train_config(opts),
        criterion=opts["criterion"],
    )


def _out_dir(opts) -> Path:
    out = Path(opts["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(opts, command: str, extra: dict | None = None) -> str:
    record = {"command": command, "version": __version__, "seed": opts["seed"], "options": opts}
    if extra:
        record.update(extra)
    return json.dumps(record, indent=2, sort_keys=True, default=str)


def _write_forecast_csv(path: Path, t0: int, actual, columns: dict) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "actual", *columns])
        for i in range(len(actual)):
            w.writerow([t0 + i, repr(float(actual[i]))] + [repr(float(c[i])) for c in columns.values()])


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(opts) -> int:
    kind = opts["kind"]
    n = int(opts["n"])
    if n <= 0:
        raise UsageError("--n must be positive")
    if float(opts["sigma"]) < 0:
        raise UsageError("--sigma must be non-negative")
    exog_name = _exog_names(opts)[0] if _exog_names(opts) else "accidents"
    effect = None
    if opts["exog_beta"] is not None:
        effect = ExogEffect(float(opts["exog_beta"]), float(opts["exog_rate"]), exog_name)
    phi = _floats(str(opts["phi"]))
    if kind == "ar1":
        if len(phi) != 1:
            raise UsageError("--kind ar1 takes a single --phi")
        spec = ARProcess(float(opts["c"]), phi, float(opts["sigma"]), effect)
    elif kind == "ar":
        spec = ARProcess(float(opts["c"]), phi, float(opts["sigma"]), effect)
    elif kind == "arma":
        spec = ARMAProcess(float(opts["c"]), phi, _floats(str(opts["theta"])), float(opts["sigma"]), effect)
    elif kind == "tar":
        if not opts["phi_high"]:
            spec = replace(CALL_VOLUME_TAR, exog=replace(CALL_VOLUME_TAR.exog, name=exog_name))
        else:
            spec = ThresholdAR(
                (float(opts["c"]), phi),
                (float(opts["c_high"]), _floats(str(opts["phi_high"]))),
                float(opts["threshold"]),
                float(opts["sigma"]),
                exog=effect,
            )
    else:
        spec = replace(CALL_VOLUME_TAR, exog=replace(CALL_VOLUME_TAR.exog, name=exog_name))
    series = simulate(spec, n, int(opts["seed"]), name=opts["target"])
    out = Path(opts["out"]) if opts.get("out") else _out_dir(opts) / "data.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(series, out)
    print(f"wrote {n} rows to {out} (seed {opts['seed']})")
    return 0


def cmd_fit_nn(opts) -> int:
    series = _load(opts)
    train_s, test_s = _split(opts, series)
    cands = _candidates(opts, [opts["order"]], len(series.exog_names))
    spec = _search_spec(opts, cands)
    out = _out_dir(opts)
    for cand in cands:
        report = evaluate_candidate(cand, train_s, test_s, spec)
        stem = "net" if len(cands) == 1 else f"net_{cand.output_activation}"
        (out / f"{stem}.json").write_text(report.net.to_json() + "\n", encoding="utf-8")
        print(
            f"{report.order} {report.activations}: params={report.n_params} "
            f"R2={report.r_squared:.4f} sse_train={report.sse_train:.6g} "
            f"sse_test={report.sse_test_onestep if report.sse_test_onestep is None else f'{report.sse_test_onestep:.6g}'} "
            f"seed={report.seed}"
        )
    (out / "fit_nn_run.json").write_text(_manifest(opts, "fit-nn") + "\n", encoding="utf-8")
    return 0


def _arima_spec(opts, exog_count: int) -> ArimaSpec:
    try:
        return ArimaSpec.parse(str(opts["arimax"]), not opts["no_intercept"], exog_count)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_fit_arima(opts) -> int:
    series = _load(opts)
    train_s, _ = _split(opts, series)
    spec = _arima_spec(opts, len(series.exog_names))
    fit = fit_css(spec, train_s)
    out = _out_dir(opts)
    (out / "arima.json").write_text(fit.to_json() + "\n", encoding="utf-8")
    print(f"{spec.label}: R2={fit.r_squared:.4f} sse={fit.sse:.6g} converged={fit.converged}")
    for w in fit.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return 0


def cmd_search(opts) -> int:
    series = _load(opts)
    train_s, test_s = _split(opts, series)
    exog_count = len(series.exog_names)
    if opts["benchmark"]:
        cands = benchmark_candidates(exog_count)
    else:
        try:
            orders = split_top_level(str(opts["orders"]))
            if not orders:
                raise UsageError("--orders is empty")
            cands = _candidates(opts, orders, exog_count)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    board = run_search(_search_spec(opts, cands), train_s, test_s)
    if not board.reports:
        for cand, why in board.skipped:
            print(f"skipped {cand}: {why}", file=sys.stderr)
        print("no feasible candidate", file=sys.stderr)
        return 1
    out = _out_dir(opts)
    (out / "leaderboard.csv").write_text(board.to_csv(), encoding="utf-8")
    report = board.to_dict()
    report["run"] = json.loads(_manifest(opts, "search"))
    (out / "report.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    for cand, why in board.skipped:
        print(f"skipped {cand}: {why}", file=sys.stderr)
    w = board.winner
    print(f"winner ({board.criterion}): {w.order} {w.activations}")
    return 0


def cmd_forecast(opts) -> int:
    if not opts.get("model"):
        raise UsageError("--model is required")
    model_path = Path(opts["model"])
    if not model_path.is_file():
        raise UsageError(f"model file {model_path} does not exist")
    doc = json.loads(model_path.read_text(encoding="utf-8"))
    series = _load(opts)
    hist, future = _split(opts, series)
    horizon = opts["horizon"]
    avail = 0 if future is None else len(future)
    horizon = avail if horizon is None else int(horizon)
    mode = opts["mode"]
    if horizon < 0:
        raise UsageError("--horizon must be non-negative")
    if horizon > avail and (mode == "one-step" or series.exog_names):
        raise UsageError(f"--horizon {horizon} exceeds the {avail} rows after the training window")
    actual = future.values[:horizon] if future is not None else np.empty(0)
    if "weights" in doc:
        net = TrainedNet.from_dict(doc)
        preds = forecast(net, hist, horizon, mode, actuals=actual if mode == "one-step" else None, exog=future)
    else:
        fit = ArimaFit.from_dict(doc)
        preds = forecast_arima(fit, hist, horizon, mode, actuals=actual if mode == "one-step" else None, exog_future=future)
    out = _out_dir(opts)
    actual = np.concatenate([actual, np.full(horizon - actual.size, np.nan)])
    _write_forecast_csv(out / "forecast.csv", len(hist), actual, {"pred": preds})
    print(f"wrote {horizon} {mode} forecasts to {out / 'forecast.csv'}")
    return 0


def cmd_compare(opts) -> int:
    series = _load(opts)
    train_s, test_s = _split(opts, series)
    if test_s is None:
        raise UsageError("compare needs a non-empty test window (--train < series length)")
    horizon = len(test_s) if opts["horizon"] is None else int(opts["horizon"])
    if not 0 <= horizon <= len(test_s):
        raise UsageError(f"--horizon must lie in [0, {len(test_s)}]")
    exog_count = len(series.exog_names)
    cands = _candidates(opts, [opts["order"]], exog_count)
    if len(cands) != 1:
        raise UsageError("compare takes a single activation pair")
    spec = _search_spec(opts, cands)
    aspec = _arima_spec(opts, exog_count)

    out = _out_dir(opts)
    written: list[Path] = []

    def put(name: str, text: str) -> None:
        path = out / name
        path.write_text(text, encoding="utf-8")
        written.append(path)

    try:
        window = test_s.slice(0, horizon) if horizon else None
        report = evaluate_candidate(cands[0], train_s, window, spec)
        net = report.net
        fit = fit_css(aspec, train_s)
        actual = test_s.values[:horizon]
        preds = {}
        for mode in ("one-step", "iterated"):
            kw = {"actuals": actual} if mode == "one-step" else {}
            preds[mode] = (
                forecast(net, train_s, horizon, mode, exog=test_s, **kw),
                forecast_arima(fit, train_s, horizon, mode, exog_future=test_s, **kw),
            )
        test_window = (test_s.origin, horizon)
        if horizon:
            a_one, a_it = sse(actual, preds["one-step"][1]), sse(actual, preds["iterated"][1])
        else:
            a_one = a_it = None
        rows = [
            replace(row_from_report(report), test_window=test_window),
            row_from_arima(fit, a_one, a_it, test_window, bic(fit.n_used, fit.sse, aspec.n_params)),
        ]
        table = compare(rows)
        put("comparison.csv", table.to_csv())
        put("comparison.txt", table.to_text())
        _write_forecast_csv(out / "forecast.csv", test_s.origin, actual,
                            {"pred_nn": preds["one-step"][0], "pred_arimax": preds["one-step"][1]})
        written.append(out / "forecast.csv")
        _write_forecast_csv(out / "forecast_iterated.csv", test_s.origin, actual,
                            {"pred_nn": preds["iterated"][0], "pred_arimax": preds["iterated"][1]})
        written.append(out / "forecast_iterated.csv")
        manifest = _manifest(opts, "compare", {"winner": table.winner, "arimax_warnings": list(fit.warnings)})
        if opts["plot"]:
            n_plot = horizon if opts["window"] is None else min(int(opts["window"]), horizon)
            if n_plot < 1:
                raise UsageError("nothing to plot: forecast window is empty")
            plot = PlotSpec(
                actual=actual[:n_plot],
                predicted={
                    f"{report.order} {report.activations}": preds["one-step"][0][:n_plot],
                    fit.spec.label: preds["one-step"][1][:n_plot],
                },
                title=f"one-step forecasts vs actual ({opts['target']})",
                x_start=test_s.origin,
                description=manifest,
            )
            emit_plot(plot, out / "plot.svg")
            written.append(out / "plot.svg")
        put("run.json", manifest + "\n")
    except BaseException:
        for path in written:
            path.unlink(missing_ok=True)
        raise
    print(table.to_text(), end="")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "fit-nn": cmd_fit_nn,
    "fit-arima": cmd_fit_arima,
    "search": cmd_search,
    "forecast": cmd_forecast,
    "compare": cmd_compare,
}


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(message)s")
    command = ns.command
    del ns.command, ns.verbose
    try:
        opts = resolve(ns)
        return COMMANDS[command](opts)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"lagnet {command}: error: {exc}", file=sys.stderr)
        return 2
    except (DataError, FileNotFoundError) as exc:
        print(f"lagnet {command}: error: {exc}", file=sys.stderr)
        return 2
    except (TrainingDivergedError, ValueError, FloatingPointError) as exc:
        print(f"lagnet {command}: fit failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
