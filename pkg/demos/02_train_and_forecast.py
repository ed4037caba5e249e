"""
Training one autoregressive network and forecasting
===================================================

Momentum descent fits NN(1,1+3): lags 1 and 3 plus the exogenous input,
two sigmoid hidden nodes and an identity output.
"""

from lagnet import CALL_VOLUME_TAR, NetConfig, TrainConfig, TrainedNet, build_design_matrix, count_parameters
from lagnet import forecast, simulate, split_train_test
from lagnet import train as fit
from lagnet.evaluation import sse

series = simulate(CALL_VOLUME_TAR, 687, seed=1, name="calls")
train, test = split_train_test(series, 470)

config = NetConfig(lags=(1, 3), exog_count=1, hidden=(2,))
print("parameters:", count_parameters(config))

net = fit(config, build_design_matrix(train, config.lags, True), TrainConfig(seed=0))
print(f"stopped after {net.epochs} epochs ({net.stop_reason}), train SSE {net.train_sse:.1f}")

# one-step forecasts use the realised values as they arrive;
# iterated forecasts feed predictions back in
one = forecast(net, train, len(test), "one-step", actuals=test.values, exog=test)
it = forecast(net, train, len(test), "iterated", exog=test)
print(f"test SSE one-step {sse(test.values, one):.1f}, iterated {sse(test.values, it):.1f}")

# the JSON form reloads to identical forecasts
again = TrainedNet.from_json(net.to_json())
print("reloaded net reproduces forecasts:", (forecast(again, train, 5, "iterated", exog=test) == it[:5]).all())
