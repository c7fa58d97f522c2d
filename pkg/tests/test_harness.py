import csv
import json
import math
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plaplab import harness
from plaplab.dynamics import COMPLETED, DT_COLLAPSE, Datum, RunConfig, RunRecord, run
from plaplab.exponents import PLAP, PME, ParameterError, ProblemParams
from plaplab.geometry import EUCLIDEAN, ManifoldSpec, RadialGrid


def config(p=3.0, sigma=3.0, N=4, mode=PLAP, m=None, R=20.0, nr=200, amplitude=1e-2,
           width=1.0, **kw):
    params = ProblemParams(mode, sigma=sigma, N=N, p=p if mode == PLAP else None, m=m)
    return RunConfig(ManifoldSpec(EUCLIDEAN, N), params, RadialGrid(R, nr),
                     Datum(amplitude=amplitude, width=width), **kw)


class TestFitDecaySlope:
    T = np.geomspace(1.0, 100.0, 30)

    def test_exact_power_law(self):
        slope, err, _ = harness.fit_decay_slope(zip(self.T, self.T ** -0.5), (1, 100))
        assert slope == pytest.approx(-0.5, abs=1e-12)
        assert err <= 1e-12

    def test_perturbed_power_law(self):
        v = 3 * self.T ** -1.5 * (1 + 0.01 * np.sin(np.log(self.T)))
        slope, _, intercept = harness.fit_decay_slope(zip(self.T, v), (1, 100))
        assert slope == pytest.approx(-1.5, abs=0.02)
        assert math.exp(intercept) == pytest.approx(3.0, rel=0.05)

    def test_constant_series(self):
        slope, _, _ = harness.fit_decay_slope(zip(self.T, np.full(30, 2.0)), (1, 100))
        assert slope == pytest.approx(0.0, abs=1e-14)

    def test_window_filters_points(self):
        v = np.where(self.T < 10, self.T ** -1.0, 10 * self.T ** -2.0)
        slope, _, _ = harness.fit_decay_slope(zip(self.T, v), (10, 100))
        assert slope == pytest.approx(-2.0, abs=1e-12)

    def test_too_few_points(self):
        with pytest.raises(harness.FitError):
            harness.fit_decay_slope(zip(self.T[:7], self.T[:7]), (1, 100))

    def test_nonpositive_values(self):
        v = self.T ** -1.0
        v[3] = 0.0
        with pytest.raises(harness.FitError):
            harness.fit_decay_slope(zip(self.T, v), (1, 100))

    @settings(max_examples=50, deadline=None)
    @given(c=st.floats(1e-6, 1e6), a=st.floats(-3.0, 1.0))
    def test_rescaling_invariance(self, c, a):
        v = self.T ** a * (1 + 0.1 * np.cos(self.T))
        s1, _, _ = harness.fit_decay_slope(zip(self.T, v), (1, 100))
        s2, _, _ = harness.fit_decay_slope(zip(self.T, c * v), (1, 100))
        assert s2 == pytest.approx(s1, abs=1e-12)


class TestVerdict:
    @pytest.mark.parametrize("slope,err,pred,expected", [
        (-1.45, 0.0, 1.5, harness.MATCH),
        (-1.2, 0.0, 1.5, harness.MISMATCH),
        (-1.2, 0.2, 1.5, harness.MATCH),
        (-1.65, 0.0, 1.5, harness.MATCH),
    ])
    def test_tolerance_rule(self, slope, err, pred, expected):
        assert harness._verdict(slope, err, pred) == expected


class TestSmoothingReport:
    def test_heat_decay(self):
        rec = run(config(p=2.0, N=3, R=40.0, nr=2000, amplitude=1.0, width=0.5,
                         reaction_on=False, t_end=10.0))
        (rep,) = harness.smoothing_report(rec, [("thm1i", math.inf)])
        assert rep.predicted == pytest.approx(1.5)
        assert rep.verdict == harness.MATCH
        assert rep.window == (1.0, 10.0)

    def test_plap_decay(self):
        rec = run(config(amplitude=1.0, reaction_on=False, t_end=1e4, nr=400))
        (rep,) = harness.smoothing_report(rec, [("thm1i", math.inf)])
        assert rep.predicted == pytest.approx(4 / 7)
        assert rep.verdict == harness.MATCH

    def test_pme_decay(self):
        rec = run(config(mode=PME, m=2.0, N=3, amplitude=1.0, reaction_on=False, t_end=1e4,
                         nr=400))
        (rep,) = harness.smoothing_report(rec, [("thm1i", math.inf)])
        assert rep.predicted == pytest.approx(0.6)
        assert rep.verdict == harness.MATCH

    def test_inconclusive_when_window_is_sparse(self):
        rec = run(config(amplitude=1.0, reaction_on=False, t_end=1.0, outputs_per_decade=2))
        (rep,) = harness.smoothing_report(rec, [("thm1i", math.inf)])
        assert rep.verdict == harness.INCONCLUSIVE

    def test_gate_violation(self):
        rec = run(config(p=2.0, N=3, sigma=1.5, amplitude=1.0, reaction_on=False, t_end=1.0))
        with pytest.raises(ParameterError):
            harness.smoothing_report(rec, [("thm1ii", 4.0)])

    def test_requires_completed_record(self):
        rec = run(config(amplitude=1.0, max_iter=1, tol=1e-300, t_end=1.0))
        assert rec.status == DT_COLLAPSE
        with pytest.raises(ParameterError):
            harness.smoothing_report(rec, [("thm1i", math.inf)])


class TestClassify:
    BASE = dict(R=60.0, nr=400, width=3.0, t_end=50.0, truncation_k=1e30)

    def test_small_datum_global(self):
        rec = run(config(amplitude=1e-3, **self.BASE))
        assert harness.classify_record(rec) == harness.GLOBAL
        assert max(row.s_monitor for row in rec.series) <= 1 + 1e-9

    def test_large_datum_blowup(self):
        assert harness.classify_run(config(amplitude=1e3, **self.BASE)) == harness.BLOWUP

    def test_collapse_undecided(self):
        cfg = config(amplitude=1.0, max_iter=1, tol=1e-300, t_end=1.0)
        assert harness.classify_run(cfg) == harness.UNDECIDED


class TestArtifacts:
    def test_series_and_manifest(self, tmp_path):
        rec = run(config(t_end=1.0, record_qs=(2.0, 4.0)))
        man = harness.write_run(rec, str(tmp_path))
        with open(tmp_path / "series.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["t", "dt", "linf", "l1", "l2", "l4", "s_monitor"]
        assert len(rows) == len(rec.series) + 1
        assert float(rows[-1][0]) == 1.0
        loaded = json.loads((tmp_path / "manifest.json").read_text())
        assert loaded["status"] == COMPLETED and "t_end" in loaded
        assert loaded == json.loads(json.dumps(man))
        for key in ("config", "clipped_mass", "wallclock_s"):
            assert key in loaded

    def test_seventeen_digits(self):
        assert harness.fmt(0.1) == "0.10000000000000001"
        assert float(harness.fmt(math.pi)) == math.pi


class TestSweep:
    def test_amplitude_transition(self, tmp_path):
        base = config(R=60.0, nr=400, width=3.0, t_end=10.0, truncation_k=1e30)
        values = [1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0]
        rows = harness.sweep(base, "amplitude", values, str(tmp_path), workers=2)
        labels = [r["status"] for r in rows]
        changes = sum(a != b for a, b in zip(labels, labels[1:]))
        assert labels[0] == COMPLETED and labels[-1] == "blowup"
        assert changes == 1
        with open(tmp_path / "runs" / "index.csv") as fh:
            index = list(csv.DictReader(fh))
        assert [float(r["value"]) for r in index] == values
        assert all(os.path.exists(tmp_path / "runs" / f"{i:04d}" / "series.csv")
                   for i in range(len(values)))
        assert all("exploratory" in r["label"] for r in index if r["status"] == "blowup")

    def test_sigma_gate_flag(self, tmp_path):
        base = config(p=2.0, N=3, amplitude=1e-4, t_end=0.1, sigma=3.0)
        fujita = 1 + 2 / 3
        rows = harness.sweep(base, "sigma", [fujita - 0.1, fujita + 0.1], str(tmp_path))
        assert [r["gate"] for r in rows] == [False, True]

    def test_empty_sweep(self, tmp_path):
        assert harness.sweep(config(), "amplitude", [], str(tmp_path)) == []
        with open(tmp_path / "runs" / "index.csv") as fh:
            assert len(list(csv.reader(fh))) == 1

    def test_failures_recorded(self, tmp_path):
        rows = harness.sweep(config(), "p", [10.0], str(tmp_path))
        assert rows[0]["status"] == "error" and "ParameterError" in rows[0]["error"]

    def test_unknown_axis(self, tmp_path):
        with pytest.raises(ValueError):
            harness.sweep(config(), "width", [1.0], str(tmp_path))

    def test_index_deterministic(self, tmp_path):
        base = config(t_end=1.0)
        harness.sweep(base, "amplitude", [0.1, 0.2], str(tmp_path / "a"), workers=2)
        harness.sweep(base, "amplitude", [0.1, 0.2], str(tmp_path / "b"), workers=1)
        for rel in ("runs/index.csv", "runs/0000/series.csv", "runs/0001/series.csv"):
            assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()
