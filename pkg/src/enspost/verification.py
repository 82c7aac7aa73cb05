"""Deterministic and probabilistic forecast verification.

Deterministic scores (NSE, RMSE, percent bias) evaluate single-valued
forecasts, here usually ensemble means. Probabilistic scores evaluate
event-probability forecasts for flow exceeding a threshold z: the Brier
score is the mean squared difference between forecast probability and
the binary outcome, the Brier skill score compares it against a
reference system, and the reliability diagram bins forecast
probabilities and compares each bin's average against the observed
event frequency.

conditional_verify assembles the full report: every score conditioned on
lead time, season of the valid date, and flow category threshold.
"""

from __future__ import annotations

import datetime as dt
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import UndefinedScoreError
from .timeseries import PairSet, Season, classify_season

log = logging.getLogger(__name__)

SEASON_ALL = "all"
CATEGORY_ALL = "all"


def nse(forecast: np.ndarray, obs: np.ndarray) -> float:
    """Nash-Sutcliffe efficiency: 1 - sum((f-y)^2) / sum((y-mean(y))^2).

    Ranges over (-inf, 1]; 1 means a pointwise perfect forecast and 0
    matches the skill of the observed mean.
    """
    f, y = _paired(forecast, obs)
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0.0:
        raise UndefinedScoreError("NSE undefined: observations are constant")
    sse = float(np.sum((f - y) ** 2))
    return 1.0 - sse / sst


def rmse(forecast: np.ndarray, obs: np.ndarray) -> float:
    """Root mean squared error."""
    f, y = _paired(forecast, obs)
    return float(np.sqrt(np.mean((f - y) ** 2)))


def pbias(forecast: np.ndarray, obs: np.ndarray) -> float:
    """Percent bias, 100 * sum(f-y) / sum(y); positive means overestimation."""
    f, y = _paired(forecast, obs)
    denom = float(np.sum(y))
    if denom == 0.0:
        raise UndefinedScoreError("percent bias undefined: observations sum to zero")
    return 100.0 * float(np.sum(f - y)) / denom


def _paired(forecast: np.ndarray, obs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    f = np.asarray(forecast, dtype=np.float64)
    y = np.asarray(obs, dtype=np.float64)
    if f.shape != y.shape or f.ndim != 1:
        raise ValueError(f"forecast {f.shape} and obs {y.shape} must be equal 1-D arrays")
    if f.size == 0:
        raise ValueError("empty forecast/observation arrays")
    return f, y


def exceedance_probability(ensemble: np.ndarray, z: float) -> float:
    """Fraction of ensemble members strictly above z."""
    e = np.asarray(ensemble, dtype=np.float64)
    if e.size == 0:
        raise ValueError("empty ensemble")
    return float(np.count_nonzero(e > z)) / e.size


@dataclass(frozen=True)
class ProbForecastSet:
    """(forecast probability, binary outcome) pairs for one event definition."""

    probabilities: np.ndarray
    outcomes: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=np.float64)
        o = np.asarray(self.outcomes, dtype=np.float64)
        if p.shape != o.shape or p.ndim != 1:
            raise ValueError("probabilities and outcomes must be equal-length 1-D arrays")
        if p.size and (p.min() < 0.0 or p.max() > 1.0):
            raise ValueError("probabilities must lie in [0, 1]")
        if not np.all((o == 0.0) | (o == 1.0)):
            raise ValueError("outcomes must be 0 or 1")
        object.__setattr__(self, "probabilities", p)
        object.__setattr__(self, "outcomes", o)

    def __len__(self) -> int:
        return self.probabilities.size


def outcome_indicator(obs: np.ndarray, z: float) -> np.ndarray:
    """Binary event indicator: 1 where the observation strictly exceeds z."""
    return (np.asarray(obs, dtype=np.float64) > z).astype(np.float64)


def brier_score(pf: ProbForecastSet) -> float:
    """Mean squared probability error over all pairs; 0 is perfect."""
    if len(pf) == 0:
        raise ValueError("empty probability forecast set")
    d = pf.probabilities - pf.outcomes
    return float(np.mean(d * d))


def brier_skill_score(main: ProbForecastSet, reference: ProbForecastSet) -> float:
    """1 - BS_main / BS_reference; 1 is perfect, 0 matches the reference."""
    if len(main) != len(reference):
        raise ValueError("main and reference sets must cover the same pairs")
    bs_ref = brier_score(reference)
    if bs_ref == 0.0:
        raise UndefinedScoreError("BSS undefined: reference Brier score is zero")
    return 1.0 - brier_score(main) / bs_ref


@dataclass(frozen=True)
class ReliabilityCurve:
    """Binned forecast probabilities vs observed frequencies.

    Arrays have one entry per bin (default 10 equal-width bins over
    [0, 1], last bin closed). Empty bins carry count 0 and NaN averages.
    """

    bin_edges: np.ndarray  # (n_bins + 1,)
    counts: np.ndarray  # (n_bins,)
    forecast_avg: np.ndarray  # (n_bins,), NaN where empty
    observed_freq: np.ndarray  # (n_bins,), NaN where empty

    def points(self) -> list[tuple[float, float, float, float, int]]:
        """(bin_lo, bin_hi, forecast_avg, observed_freq, count) for non-empty bins."""
        out = []
        for k in range(self.counts.size):
            if self.counts[k] > 0:
                out.append(
                    (
                        float(self.bin_edges[k]),
                        float(self.bin_edges[k + 1]),
                        float(self.forecast_avg[k]),
                        float(self.observed_freq[k]),
                        int(self.counts[k]),
                    )
                )
        return out


def reliability_diagram(pf: ProbForecastSet, bins: int = 10) -> ReliabilityCurve:
    """Bin forecast probabilities into equal-width bins and average per bin.

    Bins are [0, 1/bins), ..., [1-1/bins, 1]; the last bin includes 1.0.
    """
    if len(pf) == 0:
        raise ValueError("empty probability forecast set")
    if bins < 1:
        raise ValueError("need at least one bin")
    edges = np.linspace(0.0, 1.0, bins + 1)
    idx = np.minimum((pf.probabilities * bins).astype(int), bins - 1)
    counts = np.zeros(bins, dtype=np.int64)
    f_avg = np.full(bins, np.nan)
    o_freq = np.full(bins, np.nan)
    for k in range(bins):
        sel = idx == k
        n_k = int(np.count_nonzero(sel))
        counts[k] = n_k
        if n_k:
            f_avg[k] = float(np.mean(pf.probabilities[sel]))
            o_freq[k] = float(np.mean(pf.outcomes[sel]))
    return ReliabilityCurve(edges, counts, f_avg, o_freq)


@dataclass(frozen=True)
class MetricRow:
    system: str
    lead: int
    season: str  # "all" | "cool" | "warm"
    category: str  # "all" | "low_moderate" | "high"
    metric: str
    value: float
    n: int


@dataclass(frozen=True)
class ReliabilityRow:
    system: str
    lead: int
    category: str
    bin_lo: float
    bin_hi: float
    forecast_avg: float
    observed_freq: float
    count: int


@dataclass
class VerificationReport:
    metric_rows: list[MetricRow] = field(default_factory=list)
    reliability_rows: list[ReliabilityRow] = field(default_factory=list)

    def sort(self) -> None:
        self.metric_rows.sort(
            key=lambda r: (r.system, r.lead, r.season, r.category, r.metric)
        )
        self.reliability_rows.sort(
            key=lambda r: (r.system, r.lead, r.category, r.bin_lo)
        )

    def value(self, system: str, lead: int, metric: str,
              season: str = SEASON_ALL, category: str = CATEGORY_ALL) -> float:
        for r in self.metric_rows:
            if (r.system, r.lead, r.season, r.category, r.metric) == (
                system, lead, season, category, metric,
            ):
                return r.value
        raise KeyError(f"no row for {(system, lead, season, category, metric)}")


def _season_mask(dates: tuple[dt.date, ...], season: str) -> np.ndarray:
    if season == SEASON_ALL:
        return np.ones(len(dates), dtype=bool)
    want = Season.COOL if season == "cool" else Season.WARM
    return np.array([classify_season(d) == want for d in dates], dtype=bool)


def conditional_verify(
    systems: dict[str, dict[int, PairSet]],
    thresholds: dict[str, float],
    climatology_probs: dict[int, dict[str, np.ndarray]],
    bins: int = 10,
    climatology_system: str | None = "climatology",
) -> VerificationReport:
    """Verify all systems conditionally on lead, season, and flow category.

    systems maps name -> {lead -> PairSet}; all systems must share valid
    dates per lead (align upstream). thresholds maps category label -> z.
    climatology_probs[lead][category] holds the reference event
    probability at each pair's valid date, used both as the skill-score
    reference and as the forecast probabilities of the climatology
    system itself (its member column is a mean, not a sample).

    Deterministic scores are reported with category "all"; Brier scores
    and skill scores are reported per category; reliability curves are
    reported per (system, lead, category) without season conditioning.
    Rows whose score is undefined on a subset are omitted with a warning.
    """
    report = VerificationReport()
    for name in sorted(systems):
        by_lead = systems[name]
        for lead in sorted(by_lead):
            pairs = by_lead[lead]
            if len(pairs) == 0:
                log.warning("no pairs for system=%s lead=%d; skipping", name, lead)
                continue
            mean_fc = pairs.ensemble_mean
            obs = pairs.observations

            probs: dict[str, np.ndarray] = {}
            for cat, z in thresholds.items():
                if climatology_system is not None and name == climatology_system:
                    probs[cat] = climatology_probs[lead][cat]
                else:
                    probs[cat] = np.array(
                        [exceedance_probability(row, z) for row in pairs.ensembles]
                    )

            for season in (SEASON_ALL, "cool", "warm"):
                mask = _season_mask(pairs.valid_dates, season)
                n_sub = int(np.count_nonzero(mask))
                if n_sub == 0:
                    log.warning(
                        "empty subset system=%s lead=%d season=%s; rows omitted",
                        name, lead, season,
                    )
                    continue
                for metric, fn in (("nse", nse), ("rmse", rmse), ("pbias", pbias)):
                    try:
                        val = fn(mean_fc[mask], obs[mask])
                    except UndefinedScoreError as exc:
                        log.warning(
                            "%s undefined for system=%s lead=%d season=%s: %s",
                            metric, name, lead, season, exc,
                        )
                        continue
                    report.metric_rows.append(
                        MetricRow(name, lead, season, CATEGORY_ALL, metric, val, n_sub)
                    )
                for cat, z in thresholds.items():
                    outcomes = outcome_indicator(obs[mask], z)
                    main = ProbForecastSet(probs[cat][mask], outcomes)
                    ref = ProbForecastSet(climatology_probs[lead][cat][mask], outcomes)
                    report.metric_rows.append(
                        MetricRow(name, lead, season, cat, "bs", brier_score(main), n_sub)
                    )
                    try:
                        bss = brier_skill_score(main, ref)
                    except UndefinedScoreError as exc:
                        log.warning(
                            "bss undefined for system=%s lead=%d season=%s cat=%s: %s",
                            name, lead, season, cat, exc,
                        )
                        continue
                    report.metric_rows.append(
                        MetricRow(name, lead, season, cat, "bss", bss, n_sub)
                    )

            for cat, z in thresholds.items():
                pf = ProbForecastSet(probs[cat], outcome_indicator(obs, z))
                curve = reliability_diagram(pf, bins=bins)
                for lo, hi, f_avg, o_freq, count in curve.points():
                    report.reliability_rows.append(
                        ReliabilityRow(name, lead, cat, lo, hi, f_avg, o_freq, count)
                    )
    report.sort()
    return report
