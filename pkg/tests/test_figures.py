"""Figure rendering smoke tests (files exist and are non-empty PNGs)."""

import datetime as dt

import numpy as np

from enspost.figures import render_all
from enspost.timeseries import PairSet
from enspost.verification import conditional_verify


def small_report():
    rng = np.random.default_rng(20)
    start = dt.date(2011, 1, 10)
    n = 90
    dates = tuple(start + dt.timedelta(days=i) for i in range(n))
    obs = rng.uniform(0, 10, n)
    systems = {}
    for name, bias in (("raw_ensemble", 1.0), ("lstm_postprocessed", 0.1)):
        by_lead = {}
        for lead in (1, 3, 7):
            ens = np.maximum(obs[:, None] + bias + rng.normal(0, 1, (n, 11)), 0.0)
            by_lead[lead] = PairSet(lead, dates, ens, obs)
        systems[name] = by_lead
    thresholds = {"low_moderate": 5.0, "high": 8.0}
    clim_probs = {
        lead: {cat: np.full(n, 0.3) for cat in thresholds} for lead in (1, 3, 7)
    }
    return conditional_verify(systems, thresholds, clim_probs)


def test_render_all_writes_pngs(tmp_path):
    report = small_report()
    loss_rows = [(f"L1_M{m}", e, 0.1 / (e + 1)) for m in range(3) for e in range(5)]
    loss_rows += [("standalone", e, 0.2 / (e + 1)) for e in range(5)]
    written = render_all(report, loss_rows, tmp_path / "figs")
    assert len(written) == 4
    for path in written:
        assert path.exists()
        data = path.read_bytes()
        assert data[:8] == b"\x89PNG\r\n\x1a\n"
        assert len(data) > 1000
