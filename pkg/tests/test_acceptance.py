"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest -s tests/test_acceptance.py`` to see the lines as they
complete. The full default synthetic experiment (criteria 6 and 7) trains
all 78 networks and takes several minutes.
"""

import datetime as dt
import math
import time

import numpy as np
import pytest
from scipy.stats import spearmanr

from enspost.baselines import DayOfYearClimatology, anomaly_persistence, simple_persistence
from enspost.lstm import LstmParams, LstmState, lstm_cell_forward
from enspost.pipeline import ExperimentConfig, run_experiment
from enspost.quantile_regression import _fit_one_tau, default_quantile_levels, pinball_loss
from enspost.synthetic import CatchmentConfig, generate, mass_balance_error
from enspost.timeseries import DailySeries, PairSet
from enspost.training import gradient_check
from enspost.verification import (
    ProbForecastSet,
    brier_score,
    brier_skill_score,
    exceedance_probability,
    nse,
    pbias,
    reliability_diagram,
    rmse,
)

RUNTIME_LIMIT_FULL = 900.0  # seconds, single-threaded budget for the default run
RUNTIME_LIMIT_GRADCHECK = 10.0


def announce(criterion: int, ok: bool, detail: str) -> None:
    status = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {criterion:02d} {status}: {detail}")


@pytest.fixture(scope="module")
def default_run(tmp_path_factory):
    """The full default synthetic experiment (9 years, 30 epochs, 78 models)."""
    out = tmp_path_factory.mktemp("acceptance") / "default_run"
    config = ExperimentConfig(mode="synthetic", out_dir=str(out), figures=True)
    result = run_experiment(config)
    return result


class TestCriterion1Gradients:
    def test_gradcheck_ten_seeds(self):
        t0 = time.perf_counter()
        errs = [gradient_check(seed=s) for s in range(10)]
        elapsed = time.perf_counter() - t0
        ok = max(errs) < 1e-5 and elapsed < RUNTIME_LIMIT_GRADCHECK
        announce(1, ok, f"gradcheck max rel err {max(errs):.3e} over 10 seeds in {elapsed:.2f} s")
        assert max(errs) < 1e-5
        assert elapsed < RUNTIME_LIMIT_GRADCHECK


class TestCriterion2MetricOracles:
    N = 1000

    @staticmethod
    def _close(a, b, tol=1e-12):
        return abs(a - b) <= tol * max(1.0, abs(a), abs(b))

    def test_random_instances_and_hand_examples(self):
        rng = np.random.default_rng(2024)
        worst = 0.0
        for _ in range(self.N):
            n = int(rng.integers(3, 40))
            y = rng.uniform(0.5, 10.0, n)
            f = rng.uniform(0.0, 10.0, n)
            mean_y = sum(y) / n
            sst = sum((b - mean_y) ** 2 for b in y)
            if sst == 0:
                continue
            sse = sum((a - b) ** 2 for a, b in zip(f, y))
            assert self._close(nse(f, y), 1.0 - sse / sst)
            assert self._close(rmse(f, y), math.sqrt(sse / n))
            assert self._close(pbias(f, y), 100.0 * sum(a - b for a, b in zip(f, y)) / sum(y))

            members = rng.uniform(0, 10, 11)
            z = rng.uniform(-1, 11)
            assert self._close(
                exceedance_probability(members, z),
                sum(1 for m in members if m > z) / 11,
            )

            probs = rng.uniform(0, 1, n)
            ref_probs = rng.uniform(0.05, 0.95, n)
            outs = (rng.uniform(0, 1, n) < 0.5).astype(float)
            bs_direct = sum((p - o) ** 2 for p, o in zip(probs, outs)) / n
            assert self._close(brier_score(ProbForecastSet(probs, outs)), bs_direct)
            bs_ref = sum((p - o) ** 2 for p, o in zip(ref_probs, outs)) / n
            if bs_ref > 0:
                got = brier_skill_score(
                    ProbForecastSet(probs, outs), ProbForecastSet(ref_probs, outs)
                )
                assert self._close(got, 1.0 - bs_direct / bs_ref)

        # listed hand examples
        assert nse(np.array([1.0, 2, 4]), np.array([1.0, 2, 3])) == pytest.approx(0.5, abs=1e-12)
        assert rmse(np.array([4.0, -3.0]), np.array([1.0, 1.0])) == pytest.approx(
            math.sqrt(12.5), abs=1e-12
        )
        assert pbias(np.array([1.0, 1.0]), np.array([2.0, 2.0])) == pytest.approx(-50.0, abs=1e-12)
        assert exceedance_probability(np.arange(1.0, 12.0), 5.0) == pytest.approx(
            6.0 / 11.0, abs=1e-12
        )
        assert brier_score(
            ProbForecastSet(np.array([0.5, 0.2]), np.array([1.0, 0.0]))
        ) == pytest.approx(0.145, abs=1e-12)
        main = ProbForecastSet(np.array([0.9, 0.7]), np.array([1.0, 0.0]))
        ref = ProbForecastSet(np.array([0.6, 0.8]), np.array([1.0, 0.0]))
        assert brier_skill_score(main, ref) == pytest.approx(
            1.0 - brier_score(main) / brier_score(ref), abs=1e-12
        )
        announce(2, True, f"metric oracles match direct formulas on {self.N} random instances")


class TestCriterion3CellIdentities:
    def test_zero_parameter_identities(self):
        p = LstmParams.zeros(2, 4)
        rng = np.random.default_rng(3)
        c_prev = rng.uniform(-2, 2, 4)
        state, cache = lstm_cell_forward(
            rng.uniform(-5, 5, 2), LstmState(np.zeros(4), c_prev), p
        )
        ok = (
            np.array_equal(cache["f"], np.full(4, 0.5))
            and np.array_equal(cache["i"], np.full(4, 0.5))
            and np.array_equal(cache["o"], np.full(4, 0.5))
            and np.array_equal(state.cell, 0.5 * c_prev)
            and np.array_equal(state.hidden, 0.5 * np.tanh(0.5 * c_prev))
        )
        announce(3, ok, "zero-parameter cell: gates 0.5, c' = c/2, h = tanh(c/2)/2 (exact)")
        assert ok


class TestCriterion4QuantileRegression:
    def test_intercept_only_grid_oracle(self):
        rng = np.random.default_rng(404)
        e = rng.normal(0.5, 2.0, 800)
        x = np.zeros(800)
        grid = np.linspace(e.min(), e.max(), 2001)
        step = grid[1] - grid[0]
        deltas = []
        for tau in (0.1, 0.5, 0.9):
            a, b = _fit_one_tau(x, e, tau)
            assert b == 0.0
            losses = np.array([pinball_loss(e - c, tau) for c in grid])
            best = grid[int(np.argmin(losses))]
            deltas.append(abs(a - best))
        ok = all(d <= step for d in deltas)
        announce(4, ok, f"intercept-only fits within grid step {step:.4f} "
                        f"(worst delta {max(deltas):.5f}); coverage checked below")
        assert ok

    def test_member_coverage(self):
        rng = np.random.default_rng(405)
        n = 1500
        x = rng.uniform(1.0, 20.0, n)
        e = rng.normal(0.0, 2.0, n)
        dates = tuple(dt.date(2010, 1, 2) + dt.timedelta(days=i) for i in range(n))
        pairs = PairSet(1, dates, np.repeat(x[:, None], 11, axis=1), x + e)
        from enspost.quantile_regression import fit_quantile_regression

        model = fit_quantile_regression({1: pairs})
        members = model.members_for(1, x)
        q = default_quantile_levels()
        worst = 0.0
        for k in range(11):
            cover = float(np.mean(pairs.observations <= members[:, k]))
            worst = max(worst, abs(cover - q[k]))
        ok = worst <= 0.05
        announce(4, ok, f"fitted member coverage within {worst:.3f} of tau on {n} pairs")
        assert ok


class TestCriterion5MassBalance:
    def test_reservoir_mass_balance(self):
        errs = []
        for seed in (0, 7, 42, 1234):
            ds = generate(CatchmentConfig(seed=seed, years=2, train_years=1))
            errs.append(mass_balance_error(ds))
        ds_default = generate(CatchmentConfig())
        errs.append(mass_balance_error(ds_default))
        ok = max(errs) < 1e-9
        announce(5, ok, f"reservoir mass balance worst rel err {max(errs):.2e}")
        assert ok


class TestCriterion6Figure4Ordering:
    def test_skill_orderings(self, default_run):
        rep = default_run.report
        raw = [rep.value("raw_ensemble", lead, "nse") for lead in range(1, 8)]
        post = [rep.value("lstm_postprocessed", lead, "nse") for lead in range(1, 8)]
        rank_corr = float(spearmanr(np.arange(1, 8), raw).statistic)
        a_ok = rank_corr <= 0.0
        b_ok = all(p >= r for p, r in zip(post, raw))
        gain1 = post[0] - raw[0]
        gain7 = post[6] - raw[6]
        c_ok = gain7 > gain1
        t_ok = default_run.elapsed_seconds < RUNTIME_LIMIT_FULL
        ok = a_ok and b_ok and c_ok and t_ok
        announce(
            6, ok,
            f"raw NSE rank corr {rank_corr:.2f} <= 0: {a_ok}; post >= raw at all leads: {b_ok}; "
            f"gain day7 {gain7:.3f} > day1 {gain1:.3f}: {c_ok}; "
            f"runtime {default_run.elapsed_seconds:.0f} s < {RUNTIME_LIMIT_FULL:.0f}: {t_ok}",
        )
        assert a_ok and b_ok and c_ok and t_ok


class TestCriterion7Figure5Ordering:
    def test_bss_orderings(self, default_run):
        rep = default_run.report
        wins = {}
        for cat in ("low_moderate", "high"):
            raw = [rep.value("raw_ensemble", lead, "bss", category=cat) for lead in range(1, 8)]
            post = [
                rep.value("lstm_postprocessed", lead, "bss", category=cat)
                for lead in range(1, 8)
            ]
            wins[cat] = sum(p >= r for p, r in zip(post, raw))
        ok = all(w >= 6 for w in wins.values())
        announce(
            7, ok,
            f"post BSS >= raw at {wins['low_moderate']}/7 (low-moderate) and "
            f"{wins['high']}/7 (high) leads",
        )
        assert ok


class TestCriterion8Reliability:
    def test_calibrated_and_sharp_sets(self):
        rng = np.random.default_rng(8)
        n = 10_000
        probs = rng.uniform(0, 1, n)
        outcomes = (rng.uniform(0, 1, n) < probs).astype(float)
        curve = reliability_diagram(ProbForecastSet(probs, outcomes))
        worst = max(abs(f - o) for _, _, f, o, _ in curve.points())
        sharp = reliability_diagram(ProbForecastSet(np.ones(50), np.ones(50)))
        pts = sharp.points()
        sharp_ok = len(pts) == 1 and pts[0][2] == 1.0 and pts[0][3] == 1.0
        ok = worst < 0.05 and sharp_ok
        announce(8, ok, f"calibrated bins within {worst:.3f} of diagonal; sharp point (1,1): {sharp_ok}")
        assert worst < 0.05
        assert sharp_ok


class TestCriterion9BaselineIdentities:
    def test_identities(self):
        obs = DailySeries(dt.date(2010, 1, 1), np.arange(5.0, 45.0))
        issue = dt.date(2010, 1, 10)
        vals = [simple_persistence(obs, issue, lead) for lead in range(1, 8)]
        lead_invariant = len(set(vals)) == 1

        clim = DayOfYearClimatology(
            window_days=0, means=np.full(365, 9.0),
            samples=tuple(np.array([9.0]) for _ in range(365)),
        )
        anomaly_equals_simple = all(
            anomaly_persistence(obs, clim, issue, lead)
            == simple_persistence(obs, issue, lead)
            for lead in range(1, 8)
        )

        rng = np.random.default_rng(9)
        probs = rng.uniform(0.05, 0.95, 200)
        outs = (rng.uniform(0, 1, 200) < probs).astype(float)
        ref = ProbForecastSet(probs, outs)
        bss_self_zero = brier_skill_score(ref, ref) == 0.0

        ok = lead_invariant and anomaly_equals_simple and bss_self_zero
        announce(
            9, ok,
            f"persistence lead-invariant: {lead_invariant}; anomaly == simple under constant "
            f"climatology: {anomaly_equals_simple}; BSS(self) == 0: {bss_self_zero}",
        )
        assert ok


class TestCriterion10Determinism:
    def test_byte_identical_reruns(self, tmp_path):
        outputs = []
        for run_id in ("a", "b"):
            cfg = ExperimentConfig(
                mode="synthetic", seed=1234, out_dir=str(tmp_path / f"det_{run_id}"),
                years=3, train_years=2, epochs=2, figures=False,
            )
            result = run_experiment(cfg)
            outputs.append(
                (
                    (result.out_dir / "metrics.csv").read_bytes(),
                    (result.out_dir / "reliability.csv").read_bytes(),
                )
            )
        metrics_same = outputs[0][0] == outputs[1][0]
        reliability_same = outputs[0][1] == outputs[1][1]
        ok = metrics_same and reliability_same
        announce(
            10, ok,
            f"byte-identical reruns: metrics.csv {metrics_same}, reliability.csv {reliability_same}",
        )
        assert ok
