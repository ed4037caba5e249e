"""
Searching lag sets and output activations
=========================================

Each candidate gets several random restarts; the leaderboard ranks by
one-step test SSE because a test window is present.
"""

from lagnet import CALL_VOLUME_TAR, SearchSpec, make_candidates, run_search, simulate, split_train_test

series = simulate(CALL_VOLUME_TAR, 687, seed=2, name="calls")
train, test = split_train_test(series, 470)

cands = make_candidates(
    ["NN(1,1+2)", "NN(1,1-3)", "NN(1,1+3)"],
    exog_count=1,
    activation_pairs=("sigmoid/identity", "sigmoid/sigmoid"),
)
board = run_search(SearchSpec(tuple(cands), restarts=3), train, test)

print(f"ranked by {board.criterion}")
for r in board.reports:
    print(f"{r.order:<11} {r.activations:<17} params={r.n_params:<3} R2={r.r_squared:.4f} "
          f"train={r.sse_train:8.1f} test={r.sse_test_onestep:8.1f} restarts={[round(s, 1) for s in r.restart_sses]}")

# the spread across restarts shows that different starting weights land in different minima
print("winner:", board.winner.order, board.winner.activations)

# without a test window the same search falls back to BIC
print("criterion without test data:", run_search(SearchSpec(tuple(cands[:2]), restarts=1), train).criterion)
