"""Calendar-aware daily series, forecast archives, and forecast-observation pairing.

Conventions used throughout the package:

* all dates are naive calendar dates (forecasts are issued at 00:00 UTC,
  so a date identifies a day unambiguously);
* forecast lead times run from 1 to 7 days, valid date = issue date + lead;
* ensembles have 11 members numbered 0..10, member 0 being the
  unperturbed control;
* missing archive cells are stored as NaN and skipped, never imputed.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DataFormatError

LEADS = tuple(range(1, 8))
N_LEADS = 7
N_MEMBERS = 11

_ONE_DAY = dt.timedelta(days=1)


class Season(Enum):
    COOL = "cool"
    WARM = "warm"


class FlowCategory(Enum):
    """Flow regimes defined by the non-exceedance probability of a threshold."""

    LOW_MODERATE = 0.50
    HIGH = 0.90

    @property
    def non_exceedance_p(self) -> float:
        return self.value

    @property
    def label(self) -> str:
        return "low_moderate" if self is FlowCategory.LOW_MODERATE else "high"


def classify_season(valid_date: dt.date) -> Season:
    """Cool season is October through March, warm is April through September."""
    return Season.WARM if 4 <= valid_date.month <= 9 else Season.COOL


def day_of_year_365(d: dt.date) -> int:
    """Day of year on a fixed 365-day calendar; Feb 29 maps to Feb 28's index."""
    if d.month == 2 and d.day == 29:
        d = d.replace(day=28)
    return dt.date(2001, d.month, d.day).timetuple().tm_yday


@dataclass(frozen=True)
class DailySeries:
    """A gap-free daily series of non-negative values starting at a given date."""

    start_date: dt.date
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 1:
            raise ValueError(f"values must be 1-D, got {vals.ndim}-D")
        if vals.size and not np.all(np.isfinite(vals)):
            raise ValueError("values must all be finite")
        if vals.size and np.any(vals < 0):
            raise ValueError("values must be non-negative")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.values.size

    @property
    def end_date(self) -> dt.date:
        if not len(self):
            raise ValueError("empty series has no end date")
        return self.start_date + dt.timedelta(days=len(self) - 1)

    def contains(self, d: dt.date) -> bool:
        return len(self) > 0 and self.start_date <= d <= self.end_date

    def index_of(self, d: dt.date) -> int:
        if not self.contains(d):
            raise KeyError(f"date {d} outside series range")
        return (d - self.start_date).days

    def value_on(self, d: dt.date) -> float:
        return float(self.values[self.index_of(d)])

    def dates(self) -> list[dt.date]:
        return [self.start_date + dt.timedelta(days=i) for i in range(len(self))]

    def subrange(self, start: dt.date, end: dt.date) -> "DailySeries":
        """Inclusive date-range slice; must lie within the series."""
        i, j = self.index_of(start), self.index_of(end)
        if j < i:
            raise ValueError(f"end {end} before start {start}")
        return DailySeries(start, self.values[i : j + 1].copy())


@dataclass(frozen=True)
class ForecastArchive:
    """Ensemble forecasts indexed by (issue date, lead day 1..7, member 0..10).

    values has shape (n_issues, 7, 11); NaN marks a missing cell. All
    non-missing values are finite and non-negative.
    """

    issue_dates: tuple[dt.date, ...]
    values: np.ndarray

    def __post_init__(self):
        issues = tuple(self.issue_dates)
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (len(issues), N_LEADS, N_MEMBERS):
            raise ValueError(
                f"values shape {vals.shape} != ({len(issues)}, {N_LEADS}, {N_MEMBERS})"
            )
        if any(b <= a for a, b in zip(issues, issues[1:])):
            raise ValueError("issue_dates must be strictly increasing")
        present = ~np.isnan(vals)
        if not np.all(np.isfinite(vals[present])):
            raise ValueError("non-missing values must be finite")
        if np.any(vals[present] < 0):
            raise ValueError("forecast values must be non-negative")
        vals.flags.writeable = False
        object.__setattr__(self, "issue_dates", issues)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "_issue_index", {d: i for i, d in enumerate(issues)})

    def __len__(self) -> int:
        return len(self.issue_dates)

    def issue_index(self, issue: dt.date) -> int:
        try:
            return self._issue_index[issue]
        except KeyError:
            raise KeyError(f"issue date {issue} not in archive") from None

    def get(self, issue: dt.date, lead: int, member: int) -> float:
        """Cell value; NaN if missing."""
        return float(self.values[self.issue_index(issue), lead - 1, member])

    def ensemble(self, issue: dt.date, lead: int) -> np.ndarray:
        return self.values[self.issue_index(issue), lead - 1, :].copy()

    def lead_member_series(self, lead: int, member: int) -> tuple[list[dt.date], np.ndarray]:
        """Per-issue values for one (lead, member), with their valid dates."""
        valid = [d + dt.timedelta(days=lead) for d in self.issue_dates]
        return valid, self.values[:, lead - 1, member].copy()

    def n_missing(self) -> int:
        return int(np.isnan(self.values).sum())


@dataclass(frozen=True)
class PairSet:
    """Aligned (valid date, ensemble, observation) triples for one lead time."""

    lead: int
    valid_dates: tuple[dt.date, ...]
    ensembles: np.ndarray  # (n, n_members)
    observations: np.ndarray  # (n,)
    n_skipped: int = 0

    def __post_init__(self):
        ens = np.asarray(self.ensembles, dtype=np.float64)
        obs = np.asarray(self.observations, dtype=np.float64)
        if ens.ndim != 2 or ens.shape[0] != len(self.valid_dates):
            raise ValueError("ensembles must be (n_pairs, n_members)")
        if obs.shape != (ens.shape[0],):
            raise ValueError("observations must be (n_pairs,)")
        if ens.size and not np.all(np.isfinite(ens)):
            raise ValueError("ensembles must be finite (no missing members)")
        object.__setattr__(self, "valid_dates", tuple(self.valid_dates))
        object.__setattr__(self, "ensembles", ens)
        object.__setattr__(self, "observations", obs)

    def __len__(self) -> int:
        return len(self.valid_dates)

    @property
    def ensemble_mean(self) -> np.ndarray:
        return self.ensembles.mean(axis=1)

    def subset(self, mask: np.ndarray) -> "PairSet":
        mask = np.asarray(mask, dtype=bool)
        dates = tuple(d for d, m in zip(self.valid_dates, mask) if m)
        return PairSet(self.lead, dates, self.ensembles[mask], self.observations[mask], 0)


def aggregate_to_daily(
    subdaily: list[tuple[dt.datetime, float]],
) -> tuple[DailySeries, list[dt.date]]:
    """Collapse a 6-hourly series to daily means.

    Values are grouped by the calendar date of their timestamp; a day is
    kept only when it has exactly 4 values. Incomplete days can occur only
    at the ends of the record (spacing is validated as uniform), so the
    kept days always form a contiguous series.

    Returns the daily series and the list of excluded (incomplete) days.
    """
    if not subdaily:
        return DailySeries(dt.date(2000, 1, 1), np.empty(0)), []
    step = dt.timedelta(hours=6)
    times = [t for t, _ in subdaily]
    for a, b in zip(times, times[1:]):
        if b - a != step:
            raise DataFormatError(f"non-uniform spacing between {a} and {b} (expected 6 h)")
    by_day: dict[dt.date, list[float]] = {}
    for t, v in subdaily:
        if not np.isfinite(v):
            raise DataFormatError(f"non-finite value at {t}")
        by_day.setdefault(t.date(), []).append(float(v))
    excluded = sorted(d for d, vs in by_day.items() if len(vs) != 4)
    kept = sorted(d for d, vs in by_day.items() if len(vs) == 4)
    if not kept:
        return DailySeries(times[0].date(), np.empty(0)), excluded
    means = np.array([np.mean(by_day[d]) for d in kept])
    series = DailySeries(kept[0], means)
    if series.end_date != kept[-1]:
        raise DataFormatError("aggregated days are not contiguous")
    return series, excluded


def flow_threshold(climatology_obs: DailySeries, p: float) -> float:
    """Empirical flow quantile at non-exceedance probability p.

    Linear interpolation of the sorted sample with plotting position
    (k-1)/(n-1).
    """
    if len(climatology_obs) == 0:
        raise ValueError("cannot compute a threshold from an empty series")
    if len(climatology_obs) < 2:
        raise ValueError("need at least 2 values for a quantile")
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must be in (0, 1), got {p}")
    return float(np.quantile(climatology_obs.values, p, method="linear"))


def align_pairs(archive: ForecastArchive, obs: DailySeries, lead: int) -> PairSet:
    """Pair every complete forecast at the given lead with its observation.

    A pair is kept when all 11 members are present and the observation at
    issue + lead exists; everything else is skipped and counted. Pairs are
    ordered by valid date (equivalently by issue date).
    """
    if lead not in LEADS:
        raise ValueError(f"lead must be in 1..7, got {lead}")
    dates: list[dt.date] = []
    ens_rows: list[np.ndarray] = []
    obs_vals: list[float] = []
    skipped = 0
    for i, issue in enumerate(archive.issue_dates):
        valid = issue + dt.timedelta(days=lead)
        row = archive.values[i, lead - 1, :]
        if np.any(np.isnan(row)) or not obs.contains(valid):
            skipped += 1
            continue
        dates.append(valid)
        ens_rows.append(row)
        obs_vals.append(obs.value_on(valid))
    ens = np.array(ens_rows) if ens_rows else np.empty((0, N_MEMBERS))
    return PairSet(lead, tuple(dates), ens, np.array(obs_vals), skipped)
