import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lagnet.evaluation import (
    ComparisonRow,
    IncomparableError,
    MetricPair,
    compare,
    r_squared,
    sse,
)
from lagnet.plot import PlotSpec, emit_plot, render_svg

vectors = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=2, max_size=30)


class TestMetrics:
    def test_hand_values(self):
        assert sse([1, 2], [0, 0]) == 5.0
        assert r_squared([1, 2, 3], [1, 1, 3]) == pytest.approx(0.5)
        assert r_squared([1, 2, 3], [1, 2, 3]) == 1.0

    def test_errors(self):
        with pytest.raises(ValueError):
            sse([1, 2], [1])
        with pytest.raises(ValueError):
            sse([], [])
        with pytest.raises(ValueError):
            r_squared([2, 2, 2], [1, 2, 3])
        with pytest.raises(ValueError):
            r_squared([1], [1])

    @settings(max_examples=200, deadline=None)
    @given(vectors, st.floats(-1e3, 1e3), st.floats(0.1, 10))
    def test_shift_and_scale(self, a, shift, scale):
        a = np.array(a)
        p = a[::-1].copy()
        base = sse(a, p)
        assert sse(a + shift, p + shift) == pytest.approx(base, rel=1e-9, abs=1e-6)
        assert sse(scale * a, scale * p) == pytest.approx(scale**2 * base, rel=1e-9, abs=1e-9)
        assert base >= 0

    @settings(max_examples=200, deadline=None)
    @given(vectors)
    def test_r_squared_identity(self, a):
        a = np.array(a)
        if np.ptp(a) < 1e-6:
            return
        p = a + np.sin(np.arange(a.size))
        sst = float(np.sum((a - a.mean()) ** 2))
        assert r_squared(a, p) == pytest.approx(1 - sse(a, p) / sst, abs=1e-12)


def _row(label, test, n_params=5, window=(470, 217), kind="nn", train=10.0):
    return ComparisonRow(label, kind, MetricPair(train, test, 0.9), n_params, window)


class TestCompare:
    def test_winner(self):
        table = compare([_row("NN(1,1+2)", 3.0), _row("ARIMAX(2,1,1)", 4.0, kind="arimax")])
        assert table.winner == "NN(1,1+2)"
        assert table.ranks == (1, 2)

    @settings(max_examples=50, deadline=None)
    @given(st.permutations(range(4)))
    def test_permutation_invariant(self, perm):
        rows = [_row(f"M{i}", float(s)) for i, s in enumerate([5, 2, 9, 2])]
        base = compare(rows)
        shuffled = compare([rows[i] for i in perm])
        assert shuffled.winner == base.winner == "M1"
        assert dict(zip([r.label for r in shuffled.rows], shuffled.ranks)) == dict(
            zip([r.label for r in base.rows], base.ranks)
        )

    def test_tie_prefers_fewer_params(self):
        table = compare([_row("big", 3.0, 20), _row("small", 3.0, 6)])
        assert table.winner == "small"

    def test_mismatched_windows(self):
        with pytest.raises(IncomparableError):
            compare([_row("a", 1.0), _row("b", 1.0, window=(400, 287))])

    def test_no_test_window_uses_train(self):
        table = compare([_row("a", None, train=5.0), _row("b", None, train=2.0)])
        assert table.winner == "b"

    def test_outputs(self):
        table = compare([_row("NN(1,1+2)", 3.0), _row("ARIMAX(2,1,1)", 4.0, kind="arimax")])
        lines = table.to_csv().splitlines()
        assert lines[0].startswith("model_kind,order,n_params")
        assert lines[1].startswith('nn,"NN(1,1+2)",5')
        text = table.to_text()
        assert "0.9000" in text and text.rstrip().endswith("winner: NN(1,1+2)")


class TestPlot:
    def _spec(self, **kw):
        base = dict(actual=[1.0, 2.0, 1.5, 3.0], predicted={"NN": [1.1, 1.9, 1.4, 2.7], "ARIMAX": [1, 1, 2, 2]})
        base.update(kw)
        return PlotSpec(**base)

    def test_well_formed(self):
        root = ET.fromstring(render_svg(self._spec(title="t < u", description="seed=1")).encode())
        ns = "{http://www.w3.org/2000/svg}"
        assert root.tag == ns + "svg"
        assert len(root.findall(ns + "polyline")) == 3
        assert root.find(ns + "desc").text == "seed=1"

    def test_deterministic(self, tmp_path):
        a = emit_plot(self._spec(), tmp_path / "a.svg").read_bytes()
        b = emit_plot(self._spec(), tmp_path / "b.svg").read_bytes()
        assert a == b

    def test_length_mismatch_writes_nothing(self, tmp_path):
        out = tmp_path / "p.svg"
        with pytest.raises(ValueError, match="length"):
            emit_plot(self._spec(predicted={"NN": [1.0, 2.0]}), out)
        assert not out.exists()

    def test_constant_and_single_point(self):
        ET.fromstring(render_svg(self._spec(actual=[2.0] * 4, predicted={"NN": [2.0] * 4})).encode())
        ET.fromstring(render_svg(self._spec(actual=[2.0], predicted={"NN": [1.0]})).encode())

    def test_empty(self):
        with pytest.raises(ValueError):
            render_svg(self._spec(actual=[], predicted={"NN": []}))
        with pytest.raises(ValueError):
            render_svg(self._spec(predicted={}))
