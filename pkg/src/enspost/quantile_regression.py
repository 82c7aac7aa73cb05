"""Quantile regression of ensemble-mean errors, per lead time.

For each quantile level tau, the error e = obs - ensemble mean is
regressed on the ensemble mean x by minimizing the mean pinball loss of
e - (a + b*x). Evaluating the 11 fitted quantile curves at a forecast's
ensemble mean and adding them back reconstructs an 11-member calibrated
ensemble.

The fit runs deterministic subgradient descent with step 0.5/sqrt(iter)
on min-max normalized data (at most 10,000 iterations, early stop when
the relative loss change drops below 1e-10), tracking the best iterate.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np

from .errors import FitError
from .timeseries import LEADS, N_MEMBERS, ForecastArchive, PairSet

MAX_ITER = 10_000
LOSS_TOL = 1e-10
MIN_PAIRS = 20


def default_quantile_levels(n: int = N_MEMBERS) -> np.ndarray:
    """(k - 0.5) / n for k = 1..n; reconstructs an n-member ensemble."""
    return (np.arange(1, n + 1) - 0.5) / n


def pinball_loss(u: np.ndarray, tau: float) -> float:
    """Mean of u * (tau - 1[u < 0])."""
    u = np.asarray(u, dtype=np.float64)
    return float(np.mean(u * (tau - (u < 0.0))))


def _fit_one_tau(x: np.ndarray, e: np.ndarray, tau: float) -> tuple[float, float]:
    """Fit e ~ a + b*x under pinball loss; returns (a, b) in original units."""
    e_min, e_max = float(e.min()), float(e.max())
    e_span = e_max - e_min
    if e_span == 0.0:
        return e_min, 0.0
    x_min, x_max = float(x.min()), float(x.max())
    x_span = x_max - x_min
    xn = (x - x_min) / x_span if x_span > 0 else np.zeros_like(x)
    en = (e - e_min) / e_span

    a, b = float(np.mean(en)), 0.0
    best_a, best_b = a, b
    best_loss = pinball_loss(en - a - b * xn, tau)
    prev_loss = best_loss
    for it in range(1, MAX_ITER + 1):
        u = en - a - b * xn
        w = tau - (u < 0.0)
        step = 0.5 / np.sqrt(it)
        a += step * float(np.mean(w))
        b += step * float(np.mean(w * xn))
        loss = pinball_loss(en - a - b * xn, tau)
        if loss < best_loss:
            best_loss, best_a, best_b = loss, a, b
        if abs(loss - prev_loss) < LOSS_TOL * max(abs(prev_loss), 1e-12):
            break
        prev_loss = loss
    if not np.isfinite(best_loss):
        raise FitError(
            f"quantile fit diverged at tau={tau}: final loss delta "
            f"{abs(loss - prev_loss):.3e}"
        )
    # map the normalized-space fit back to original units
    b_orig = e_span * best_b / x_span if x_span > 0 else 0.0
    a_orig = e_min + e_span * best_a - b_orig * x_min
    return a_orig, b_orig


@dataclass(frozen=True)
class QuantileRegressionModel:
    """Per-lead intercepts/slopes for each quantile level."""

    quantile_levels: np.ndarray  # (K,), strictly increasing in (0, 1)
    intercepts: dict[int, np.ndarray]  # lead -> (K,)
    slopes: dict[int, np.ndarray]  # lead -> (K,)

    def __post_init__(self):
        q = np.asarray(self.quantile_levels, dtype=np.float64)
        if np.any(q <= 0.0) or np.any(q >= 1.0) or np.any(np.diff(q) <= 0.0):
            raise ValueError("quantile levels must be strictly increasing in (0, 1)")
        object.__setattr__(self, "quantile_levels", q)

    def members_for(self, lead: int, ensemble_mean: np.ndarray) -> np.ndarray:
        """Calibrated members for each forecast; sorted to prevent crossing."""
        x = np.asarray(ensemble_mean, dtype=np.float64)
        a = self.intercepts[lead]
        b = self.slopes[lead]
        members = x[:, None] + a[None, :] + b[None, :] * x[:, None]
        members = np.maximum(0.0, members)
        return np.sort(members, axis=1)


def fit_quantile_regression(
    pairs_by_lead: dict[int, PairSet],
    quantile_levels: np.ndarray | None = None,
) -> QuantileRegressionModel:
    """Fit all quantile curves for every lead present in pairs_by_lead."""
    q = default_quantile_levels() if quantile_levels is None else np.asarray(quantile_levels)
    intercepts: dict[int, np.ndarray] = {}
    slopes: dict[int, np.ndarray] = {}
    for lead, pairs in sorted(pairs_by_lead.items()):
        if len(pairs) < MIN_PAIRS:
            raise FitError(f"lead {lead}: {len(pairs)} pairs (< {MIN_PAIRS}) for quantile fit")
        x = pairs.ensemble_mean
        e = pairs.observations - x
        a = np.zeros(q.size)
        b = np.zeros(q.size)
        for k, tau in enumerate(q):
            a[k], b[k] = _fit_one_tau(x, e, float(tau))
        intercepts[lead] = a
        slopes[lead] = b
    return QuantileRegressionModel(q, intercepts, slopes)


def apply_quantile_regression(
    model: QuantileRegressionModel,
    pairs_by_lead: dict[int, PairSet],
) -> ForecastArchive:
    """Rebuild a member archive from the fitted quantile curves.

    Requires the model to carry exactly 11 levels so the output matches
    the raw ensemble shape.
    """
    if model.quantile_levels.size != N_MEMBERS:
        raise ValueError(f"need {N_MEMBERS} quantile levels to rebuild an archive")
    issues: set[dt.date] = set()
    for lead, pairs in pairs_by_lead.items():
        if lead not in model.intercepts:
            raise FitError(f"no quantile fit for lead {lead}")
        issues.update(v - dt.timedelta(days=lead) for v in pairs.valid_dates)
    issue_list = tuple(sorted(issues))
    index = {d: i for i, d in enumerate(issue_list)}
    out = np.full((len(issue_list), len(LEADS), N_MEMBERS), np.nan)
    for lead, pairs in sorted(pairs_by_lead.items()):
        members = model.members_for(lead, pairs.ensemble_mean)
        for row, valid in enumerate(pairs.valid_dates):
            out[index[valid - dt.timedelta(days=lead)], lead - 1, :] = members[row]
    return ForecastArchive(issue_list, out)
