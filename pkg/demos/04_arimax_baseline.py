"""
ARIMAX by conditional sum of squares
====================================

The baseline differences the target once, regresses on the exogenous
column and estimates AR and MA terms with a Nelder-Mead search.
"""

from lagnet import ARMAProcess, ArimaSpec, CALL_VOLUME_TAR, fit_css, forecast_arima, simulate, split_train_test
from lagnet.evaluation import sse

# a known ARMA(1,1) first: the estimates should land near 0.5 and 0.3
fit = fit_css(ArimaSpec(1, 0, 1), simulate(ARMAProcess(1.0, (0.5,), (0.3,), 1.0), 2000, seed=3))
print("ARMA(1,1) estimates: phi", fit.params.ar.round(3), "theta", fit.params.ma.round(3))

series = simulate(CALL_VOLUME_TAR, 687, seed=1, name="calls")
train, test = split_train_test(series, 470)
spec = ArimaSpec.parse("2,1,1", exog_count=1)
arimax = fit_css(spec, train)
print(f"{spec.label}: R2={arimax.r_squared:.4f} SSE={arimax.sse:.1f} converged={arimax.converged}")
for w in arimax.warnings:
    print("warning:", w)

one = forecast_arima(arimax, train, len(test), "one-step", actuals=test.values, exog_future=test)
print(f"one-step test SSE {sse(test.values, one):.1f}")
