"""
Simulating a call-volume series and preparing lag inputs
========================================================

A threshold autoregression with a Poisson-driven exogenous column stands in
for daily emergency-call counts.
"""

import numpy as np

from lagnet import CALL_VOLUME_TAR, build_design_matrix, fit_scaler, simulate, split_train_test

series = simulate(CALL_VOLUME_TAR, 687, seed=1, name="calls")
print(series.name, len(series), "observations, exogenous:", series.exog_names)

# first 470 points train, the remaining 217 are held out
train, test = split_train_test(series, 470)
print("train", len(train), "test", len(test), "test origin", test.origin)

# lags 1 and 3 plus the same-day accident count give three inputs per row
dm = build_design_matrix(train, (1, 3), include_exog=True)
print("design matrix", dm.inputs.shape, "first row", dm.inputs[0], "->", dm.targets[0])

# inputs are z-scored before training; the scaler round-trips exactly enough
sc = fit_scaler(dm.inputs, "zscore")
z = sc.apply(dm.inputs)
print("column means after scaling", np.round(z.mean(axis=0), 12))
print("max round-trip error", np.abs(sc.invert(z) - dm.inputs).max())
