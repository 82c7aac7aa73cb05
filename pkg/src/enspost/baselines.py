"""Low-complexity reference forecasters and the standalone network forecaster.

Climatology pools training observations in a circular day-of-year window
(default +-15 days) and forecasts either the pooled mean or the pooled
exceedance probability. Simple persistence repeats the issue-day
observation at every lead; anomaly persistence carries the issue-day
departure from climatology forward onto the valid day's climatology.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np

from .timeseries import (
    LEADS,
    N_MEMBERS,
    DailySeries,
    ForecastArchive,
    day_of_year_365,
)
from .training import LstmModel


@dataclass(frozen=True)
class DayOfYearClimatology:
    """Pooled training sample and mean flow for each of 365 days of year."""

    window_days: int
    means: np.ndarray  # (365,)
    samples: tuple[np.ndarray, ...]  # 365 pooled samples

    def mean_on(self, d: dt.date) -> float:
        return float(self.means[day_of_year_365(d) - 1])

    def sample_on(self, d: dt.date) -> np.ndarray:
        return self.samples[day_of_year_365(d) - 1]


def build_climatology(training_obs: DailySeries, window_days: int = 15) -> DayOfYearClimatology:
    """Pool observations within a circular +-window_days of each day of year."""
    if window_days < 0:
        raise ValueError("window_days must be >= 0")
    n = len(training_obs)
    if n < 365:
        raise ValueError(f"climatology needs at least one full year, got {n} days")
    doy = np.array([day_of_year_365(d) for d in training_obs.dates()])
    values = training_obs.values
    samples: list[np.ndarray] = []
    means = np.zeros(365)
    for day in range(1, 366):
        dist = np.abs(doy - day)
        dist = np.minimum(dist, 365 - dist)
        pooled = values[dist <= window_days]
        if pooled.size == 0:
            raise ValueError(f"empty climatology pool for day of year {day}")
        samples.append(pooled.copy())
        means[day - 1] = pooled.mean()
    return DayOfYearClimatology(window_days, means, tuple(samples))


def climatology_prob_forecast(
    clim: DayOfYearClimatology, valid_date: dt.date, z: float
) -> float:
    """Fraction of the valid day's pooled sample strictly above z."""
    if not np.isfinite(z):
        raise ValueError("threshold must be finite")
    sample = clim.sample_on(valid_date)
    return float(np.count_nonzero(sample > z)) / sample.size


def simple_persistence(obs: DailySeries, issue_date: dt.date, lead: int) -> float:
    """Forecast = the observation on the issue day, whatever the lead."""
    if lead not in LEADS:
        raise ValueError(f"lead must be in 1..7, got {lead}")
    if not obs.contains(issue_date):
        raise ValueError(f"no observation on issue date {issue_date}")
    return obs.value_on(issue_date)


def anomaly_persistence(
    obs: DailySeries, clim: DayOfYearClimatology, issue_date: dt.date, lead: int
) -> float:
    """Valid-day climatology plus the issue-day anomaly, floored at zero."""
    if lead not in LEADS:
        raise ValueError(f"lead must be in 1..7, got {lead}")
    if not obs.contains(issue_date):
        raise ValueError(f"no observation on issue date {issue_date}")
    valid = issue_date + dt.timedelta(days=lead)
    anomaly = obs.value_on(issue_date) - clim.mean_on(issue_date)
    return max(0.0, clim.mean_on(valid) + anomaly)


def standalone_lstm_forecast(
    model: LstmModel,
    obs_precip: DailySeries,
    obs_temp: DailySeries,
    precip_fc: ForecastArchive,
    temp_fc: ForecastArchive,
) -> tuple[ForecastArchive, int]:
    """Drive a forcing-trained network with forecast forcing per member.

    For each (issue, lead, member), the input window of length
    model.lookback ends at the valid date: observed forcing through the
    issue day, then that member's forecast forcing for days issue+1
    through issue+lead (archive cells at leads 1..lead). Cells whose
    window cannot be completed are left missing and counted.

    Returns the 11-member streamflow archive (floored at zero, flows
    cannot be negative) and the skipped-cell count.
    """
    if model.input_size != 2:
        raise ValueError("standalone model expects 2 forcing features (precip, temp)")
    L_w = model.lookback
    issues = precip_fc.issue_dates
    if temp_fc.issue_dates != issues:
        raise ValueError("precip and temperature forecast archives must share issues")
    out = np.full((len(issues), len(LEADS), N_MEMBERS), np.nan)
    skipped = 0

    for lead in LEADS:
        n_hist = L_w - lead  # observed-forcing rows in the window
        for member in range(N_MEMBERS):
            rows: list[int] = []
            windows: list[np.ndarray] = []
            for i, issue in enumerate(issues):
                hist_start = issue - dt.timedelta(days=n_hist - 1)
                if n_hist <= 0 or not (
                    obs_precip.contains(hist_start) and obs_precip.contains(issue)
                    and obs_temp.contains(hist_start) and obs_temp.contains(issue)
                ):
                    skipped += 1
                    continue
                p_fc = precip_fc.values[i, :lead, member]
                t_fc = temp_fc.values[i, :lead, member]
                if np.any(np.isnan(p_fc)) or np.any(np.isnan(t_fc)):
                    skipped += 1
                    continue
                a, b = obs_precip.index_of(hist_start), obs_precip.index_of(issue)
                p_hist = obs_precip.values[a : b + 1]
                a, b = obs_temp.index_of(hist_start), obs_temp.index_of(issue)
                t_hist = obs_temp.values[a : b + 1]
                win = np.column_stack(
                    [np.concatenate([p_hist, p_fc]), np.concatenate([t_hist, t_fc])]
                )
                rows.append(i)
                windows.append(win)
            if windows:
                preds = model.predict_batch(np.stack(windows))
                out[rows, lead - 1, member] = np.maximum(0.0, preds)
    return ForecastArchive(issues, out), skipped
