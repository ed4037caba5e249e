"""
Comparing the network with ARIMAX and plotting forecasts
========================================================

Both models are fitted on the same 470 points and scored on the same
held-out window; the chart overlays the first 100 forecasts.
"""

from pathlib import Path

from lagnet import ArimaSpec, CALL_VOLUME_TAR, SearchSpec, fit_css, forecast, forecast_arima, make_candidates
from lagnet import simulate, split_train_test
from lagnet.evaluation import compare, row_from_arima, row_from_report, sse
from lagnet.plot import PlotSpec, emit_plot
from lagnet.select import evaluate_candidate

series = simulate(CALL_VOLUME_TAR, 687, seed=1, name="calls")
train, test = split_train_test(series, 470)

cand = make_candidates(["NN(1,1+3)"], 1)[0]
report = evaluate_candidate(cand, train, test, SearchSpec((cand,), restarts=3))
arimax = fit_css(ArimaSpec(2, 1, 1, exog_count=1), train)

nn_pred = forecast(report.net, train, len(test), "one-step", actuals=test.values, exog=test)
ar_pred = forecast_arima(arimax, train, len(test), "one-step", actuals=test.values, exog_future=test)
window = (test.origin, len(test))
table = compare([row_from_report(report), row_from_arima(arimax, sse(test.values, ar_pred), None, window)])
print(table.to_text())

out = Path("compare_plot.svg")
emit_plot(
    PlotSpec(test.values[:100], {"NN(1,1+3)": nn_pred[:100], "ARIMAX(2,1,1)": ar_pred[:100]},
             title="one-step forecasts", x_start=test.origin),
    out,
)
print("wrote", out)
