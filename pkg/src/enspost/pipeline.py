"""Experiment orchestration, CSV ingestion/emission, and run reproducibility.

File formats (all CSV, comma separated, ISO dates):

* observations / daily forcing: header ``date,flow_cms`` (or
  ``date,value`` for forcing), one row per day, no gaps;
* daily forecasts: header ``issue_date,lead_days,member,flow_cms`` with
  lead_days in 1..7 and member in 0..10;
* sub-daily forecasts: header ``issue_datetime,valid_datetime,member,flow_cms``
  at 6-hour spacing, aggregated to daily means on ingest.

Data files carry 17 significant digits (lossless round trip); report
files carry 9. A run directory is written atomically: if any stage
fails, everything created by the run is removed.
"""

from __future__ import annotations

import datetime as dt
import logging
import shutil
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import baselines, postprocess, quantile_regression, synthetic, verification
from .errors import DataFormatError
from .timeseries import (
    LEADS,
    N_MEMBERS,
    DailySeries,
    ForecastArchive,
    PairSet,
    aggregate_to_daily,
    align_pairs,
    flow_threshold,
)
from .training import TrainConfig

log = logging.getLogger(__name__)

SYSTEM_CLIMATOLOGY = "climatology"
SYSTEM_SIMPLE_PERSISTENCE = "simple_persistence"
SYSTEM_ANOMALY_PERSISTENCE = "anomaly_persistence"
SYSTEM_DETERMINISTIC = "deterministic"
SYSTEM_RAW = "raw_ensemble"
SYSTEM_STANDALONE = "standalone_lstm"
SYSTEM_QR = "qr_postprocessed"
SYSTEM_LSTM = "lstm_postprocessed"

ALL_SYSTEMS = (
    SYSTEM_CLIMATOLOGY,
    SYSTEM_SIMPLE_PERSISTENCE,
    SYSTEM_ANOMALY_PERSISTENCE,
    SYSTEM_DETERMINISTIC,
    SYSTEM_RAW,
    SYSTEM_STANDALONE,
    SYSTEM_QR,
    SYSTEM_LSTM,
)


@dataclass
class ExperimentConfig:
    """Flat experiment configuration; every key maps to a CLI flag."""

    mode: str = "synthetic"  # "synthetic" | "files"
    seed: int = 42
    out_dir: str = "enspost_run"
    # synthetic catchment
    years: int = 9
    train_years: int = 6
    start_date: dt.date = dt.date(2004, 1, 1)
    k_true: float = 0.2
    k_fc: float = 0.21
    wet_prob: float = 0.4
    precip_mean: float = 6.0
    precip_seasonal_amp: float = 0.5
    precip_phase_days: float = 0.0
    sigma1: float = 0.12
    member_spread: float = 1.0
    forcing_bias: float = 0.25
    # file-based inputs
    obs_csv: str = ""
    forecast_csv: str = ""
    forecast_subdaily: bool = False
    precip_obs_csv: str = ""
    temp_obs_csv: str = ""
    precip_fc_csv: str = ""
    temp_fc_csv: str = ""
    # date ranges (empty -> derived from the synthetic split)
    train_start: str = ""
    train_end: str = ""
    verify_start: str = ""
    verify_end: str = ""
    # training
    hidden_size: int = 20
    lookback: int = 30
    batch_size: int = 32
    epochs: int = 30
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    grad_clip_norm: float = 1.0
    # verification
    window_days: int = 15
    reliability_bins: int = 10
    low_flow_p: float = 0.5
    high_flow_p: float = 0.9
    figures: bool = True

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            hidden_size=self.hidden_size,
            lookback=self.lookback,
            batch_size=self.batch_size,
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            beta1=self.beta1,
            beta2=self.beta2,
            epsilon=self.epsilon,
            grad_clip_norm=self.grad_clip_norm,
            seed=self.seed,
        )

    def catchment_config(self) -> synthetic.CatchmentConfig:
        return synthetic.CatchmentConfig(
            seed=self.seed,
            years=self.years,
            train_years=self.train_years,
            start_date=self.start_date,
            k_true=self.k_true,
            k_fc=self.k_fc,
            wet_prob=self.wet_prob,
            precip_mean=self.precip_mean,
            precip_seasonal_amp=self.precip_seasonal_amp,
            precip_phase_days=self.precip_phase_days,
            sigma1=self.sigma1,
            member_spread=self.member_spread,
            forcing_bias=self.forcing_bias,
            lookback=self.lookback,
        )

    def ranges(self) -> tuple[dt.date, dt.date, dt.date, dt.date]:
        """Resolve (train_start, train_end, verify_start, verify_end)."""
        if self.train_start and self.train_end and self.verify_start and self.verify_end:
            ts, te = dt.date.fromisoformat(self.train_start), dt.date.fromisoformat(self.train_end)
            vs, ve = dt.date.fromisoformat(self.verify_start), dt.date.fromisoformat(self.verify_end)
        elif self.mode == "synthetic":
            cc = self.catchment_config()
            (ts, te), (vs, ve) = cc.train_range, cc.verify_range
        else:
            raise ValueError("file mode requires explicit train/verify date ranges")
        if not (ts <= te < vs <= ve):
            raise ValueError("train and verify ranges must be ordered and disjoint")
        return ts, te, vs, ve

    def to_lines(self) -> list[str]:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, dt.date):
                v = v.isoformat()
            elif isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = f"{v:.17g}"
            out.append(f"{f.name} = {v}")
        return out


def _coerce(field_type: type, raw: str):
    raw = raw.strip()
    if field_type is bool:
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if field_type is dt.date:
        return dt.date.fromisoformat(raw)
    return field_type(raw)


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse a flat ``key = value`` config file."""
    cfg = ExperimentConfig()
    known = {f.name: f.type for f in fields(ExperimentConfig)}
    types = {"mode": str, "out_dir": str, "start_date": dt.date}
    for f in fields(ExperimentConfig):
        types.setdefault(f.name, type(getattr(cfg, f.name)))
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise DataFormatError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in known:
            raise DataFormatError(f"{path}:{lineno}: unknown config key {key!r}")
        try:
            setattr(cfg, key, _coerce(types[key], raw))
        except ValueError as exc:
            raise DataFormatError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return cfg


# ---------------------------------------------------------------------------
# CSV ingestion / emission
# ---------------------------------------------------------------------------

def ingest_observations(path: str | Path, value_column: str = "flow_cms") -> DailySeries:
    """Read a daily CSV into a gap-free series; errors carry line numbers."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise DataFormatError(f"{path}: empty file")
    expected = f"date,{value_column}"
    if lines[0].strip() != expected:
        raise DataFormatError(f"{path}:1: header must be {expected!r}, got {lines[0]!r}")
    dates: list[dt.date] = []
    values: list[float] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise DataFormatError(f"{path}:{lineno}: expected 2 columns, got {len(parts)}")
        try:
            d = dt.date.fromisoformat(parts[0].strip())
            v = float(parts[1])
        except ValueError as exc:
            raise DataFormatError(f"{path}:{lineno}: {exc}") from exc
        if not np.isfinite(v):
            raise DataFormatError(f"{path}:{lineno}: non-finite value")
        if v < 0:
            raise DataFormatError(f"{path}:{lineno}: negative value {v}")
        if dates and d <= dates[-1]:
            raise DataFormatError(f"{path}:{lineno}: dates must be strictly increasing")
        dates.append(d)
        values.append(v)
    if not dates:
        raise DataFormatError(f"{path}: no data rows")
    missing = []
    cursor = dates[0]
    for d in dates:
        while cursor < d:
            missing.append(cursor)
            cursor += dt.timedelta(days=1)
        cursor = d + dt.timedelta(days=1)
    if missing:
        shown = ", ".join(m.isoformat() for m in missing[:10])
        more = "" if len(missing) <= 10 else f" (+{len(missing) - 10} more)"
        raise DataFormatError(f"{path}: gaps at {shown}{more}")
    return DailySeries(dates[0], np.array(values))


def write_daily_csv(series: DailySeries, path: str | Path, value_column: str = "flow_cms") -> None:
    rows = [f"date,{value_column}"]
    for d, v in zip(series.dates(), series.values):
        rows.append(f"{d.isoformat()},{v:.17g}")
    Path(path).write_text("\n".join(rows) + "\n")


def ingest_forecasts(path: str | Path, subdaily: bool = False,
                     value_column: str = "flow_cms") -> ForecastArchive:
    """Read a forecast CSV into an archive; cells never present stay missing."""
    if subdaily:
        return _ingest_forecasts_subdaily(path, value_column)
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise DataFormatError(f"{path}: empty file")
    expected = f"issue_date,lead_days,member,{value_column}"
    if lines[0].strip() != expected:
        raise DataFormatError(f"{path}:1: header must be {expected!r}, got {lines[0]!r}")
    cells: dict[tuple[dt.date, int, int], float] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise DataFormatError(f"{path}:{lineno}: expected 4 columns, got {len(parts)}")
        try:
            issue = dt.date.fromisoformat(parts[0].strip())
            lead = int(parts[1])
            member = int(parts[2])
            v = float(parts[3])
        except ValueError as exc:
            raise DataFormatError(f"{path}:{lineno}: {exc}") from exc
        if lead not in LEADS:
            raise DataFormatError(f"{path}:{lineno}: lead {lead} outside 1..7")
        if not 0 <= member < N_MEMBERS:
            raise DataFormatError(f"{path}:{lineno}: member {member} outside 0..10")
        if not np.isfinite(v) or v < 0:
            raise DataFormatError(f"{path}:{lineno}: invalid value {parts[3]!r}")
        key = (issue, lead, member)
        if key in cells:
            raise DataFormatError(
                f"{path}:{lineno}: duplicate cell issue={issue} lead={lead} member={member}"
            )
        cells[key] = v
    return _archive_from_cells(cells, path)


def _ingest_forecasts_subdaily(path: str | Path, value_column: str) -> ForecastArchive:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise DataFormatError(f"{path}: empty file")
    expected = f"issue_datetime,valid_datetime,member,{value_column}"
    if lines[0].strip() != expected:
        raise DataFormatError(f"{path}:1: header must be {expected!r}, got {lines[0]!r}")
    groups: dict[tuple[dt.date, int], list[tuple[dt.datetime, float]]] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise DataFormatError(f"{path}:{lineno}: expected 4 columns, got {len(parts)}")
        try:
            issue = dt.datetime.fromisoformat(parts[0].strip())
            valid = dt.datetime.fromisoformat(parts[1].strip())
            member = int(parts[2])
            v = float(parts[3])
        except ValueError as exc:
            raise DataFormatError(f"{path}:{lineno}: {exc}") from exc
        if not 0 <= member < N_MEMBERS:
            raise DataFormatError(f"{path}:{lineno}: member {member} outside 0..10")
        if not np.isfinite(v) or v < 0:
            raise DataFormatError(f"{path}:{lineno}: invalid value {parts[3]!r}")
        groups.setdefault((issue.date(), member), []).append((valid, v))
    cells: dict[tuple[dt.date, int, int], float] = {}
    for (issue, member), rows in sorted(groups.items()):
        rows.sort(key=lambda r: r[0])
        series, excluded = aggregate_to_daily(rows)
        if excluded:
            log.warning(
                "%s: issue %s member %d: %d incomplete day(s) excluded",
                path, issue, member, len(excluded),
            )
        for day, value in zip(series.dates(), series.values):
            lead = (day - issue).days
            if lead not in LEADS:
                raise DataFormatError(
                    f"{path}: issue {issue} member {member}: aggregated day {day} "
                    f"implies lead {lead} outside 1..7"
                )
            cells[(issue, lead, member)] = float(value)
    return _archive_from_cells(cells, path)


def _archive_from_cells(
    cells: dict[tuple[dt.date, int, int], float], path: str | Path
) -> ForecastArchive:
    if not cells:
        raise DataFormatError(f"{path}: no forecast cells")
    issues = tuple(sorted({k[0] for k in cells}))
    index = {d: i for i, d in enumerate(issues)}
    vals = np.full((len(issues), len(LEADS), N_MEMBERS), np.nan)
    for (issue, lead, member), v in cells.items():
        vals[index[issue], lead - 1, member] = v
    return ForecastArchive(issues, vals)


def write_forecasts_csv(archive: ForecastArchive, path: str | Path,
                        value_column: str = "flow_cms") -> None:
    rows = [f"issue_date,lead_days,member,{value_column}"]
    for i, issue in enumerate(archive.issue_dates):
        for lead in LEADS:
            for member in range(N_MEMBERS):
                v = archive.values[i, lead - 1, member]
                if not np.isnan(v):
                    rows.append(f"{issue.isoformat()},{lead},{member},{v:.17g}")
    Path(path).write_text("\n".join(rows) + "\n")


# ---------------------------------------------------------------------------
# Experiment assembly
# ---------------------------------------------------------------------------

@dataclass
class ExperimentData:
    obs: DailySeries
    archive: ForecastArchive
    precip_obs: DailySeries | None = None
    temp_obs: DailySeries | None = None
    precip_fc: ForecastArchive | None = None
    temp_fc: ForecastArchive | None = None
    dataset: synthetic.SyntheticDataset | None = None

    @property
    def has_forcing(self) -> bool:
        return all(
            x is not None
            for x in (self.precip_obs, self.temp_obs, self.precip_fc, self.temp_fc)
        )


def load_experiment_data(config: ExperimentConfig) -> ExperimentData:
    if config.mode == "synthetic":
        ds = synthetic.generate(config.catchment_config())
        return ExperimentData(
            obs=ds.flow, archive=ds.archive,
            precip_obs=ds.precip, temp_obs=ds.temperature,
            precip_fc=ds.precip_forecast, temp_fc=ds.temp_forecast,
            dataset=ds,
        )
    if config.mode != "files":
        raise ValueError(f"unknown mode {config.mode!r}")
    if not config.obs_csv or not config.forecast_csv:
        raise ValueError("file mode requires obs_csv and forecast_csv")
    obs = ingest_observations(config.obs_csv)
    archive = ingest_forecasts(config.forecast_csv, subdaily=config.forecast_subdaily)
    data = ExperimentData(obs=obs, archive=archive)
    if config.precip_obs_csv and config.temp_obs_csv and config.precip_fc_csv and config.temp_fc_csv:
        data.precip_obs = ingest_observations(config.precip_obs_csv, value_column="value")
        data.temp_obs = ingest_observations(config.temp_obs_csv, value_column="value")
        data.precip_fc = ingest_forecasts(config.precip_fc_csv, value_column="value")
        data.temp_fc = ingest_forecasts(config.temp_fc_csv, value_column="value")
    return data


def _subset_to_range(pairs: PairSet, start: dt.date, end: dt.date) -> PairSet:
    mask = np.array([start <= d <= end for d in pairs.valid_dates], dtype=bool)
    return pairs.subset(mask)


def _restrict_to_dates(pairs: PairSet, dates: set[dt.date]) -> PairSet:
    mask = np.array([d in dates for d in pairs.valid_dates], dtype=bool)
    return pairs.subset(mask)


def _single_valued_pairs(template: PairSet, values: np.ndarray) -> PairSet:
    return PairSet(
        template.lead, template.valid_dates, values[:, None], template.observations, 0
    )


@dataclass
class RunResult:
    out_dir: Path
    report: verification.VerificationReport
    systems: list[str]
    thresholds: dict[str, float]
    n_residual_slices: int
    elapsed_seconds: float


def run_experiment(config: ExperimentConfig) -> RunResult:
    """Execute generate/ingest -> train -> postprocess -> verify -> report."""
    import time

    t0 = time.perf_counter()
    out_dir = Path(config.out_dir)
    created_root = not out_dir.exists()
    out_dir.mkdir(parents=True, exist_ok=True)
    created: list[Path] = []

    def track(p: Path) -> Path:
        created.append(p)
        return p

    stage = "setup"
    try:
        stage = "data"
        data = load_experiment_data(config)
        train_start, train_end, verify_start, verify_end = config.ranges()
        obs = data.obs
        archive = data.archive

        stage = "climatology"
        train_obs = obs.subrange(max(train_start, obs.start_date), min(train_end, obs.end_date))
        clim = baselines.build_climatology(train_obs, window_days=config.window_days)
        thresholds = {
            "low_moderate": flow_threshold(train_obs, config.low_flow_p),
            "high": flow_threshold(train_obs, config.high_flow_p),
        }

        stage = "train_residual_bank"
        tc = config.train_config()
        bank = postprocess.fit_residual_bank(archive, obs, train_start, train_end, tc)

        stage = "train_standalone"
        standalone_model = None
        if data.has_forcing:
            standalone_model = _fit_standalone(data, train_start, train_end, tc)
        else:
            log.warning("no forcing inputs; standalone system omitted")

        stage = "fit_quantile_regression"
        train_pairs = {
            lead: _subset_to_range(align_pairs(archive, obs, lead), train_start, train_end)
            for lead in LEADS
        }
        qr_model = quantile_regression.fit_quantile_regression(train_pairs)

        stage = "postprocess"
        post_archive, post_stats = postprocess.apply_residual_bank(bank, archive)
        standalone_archive = None
        if standalone_model is not None:
            standalone_archive, _ = baselines.standalone_lstm_forecast(
                standalone_model, data.precip_obs, data.temp_obs,
                data.precip_fc, data.temp_fc,
            )

        stage = "assemble_systems"
        systems, clim_probs = _assemble_systems(
            obs, clim, thresholds, archive, post_archive, standalone_archive,
            qr_model, verify_start, verify_end,
        )

        stage = "verify"
        report = verification.conditional_verify(
            systems, thresholds, clim_probs,
            bins=config.reliability_bins,
            climatology_system=SYSTEM_CLIMATOLOGY,
        )

        stage = "write_outputs"
        _write_metrics_csv(report, track(out_dir / "metrics.csv"))
        _write_reliability_csv(report, track(out_dir / "reliability.csv"))
        _write_loss_history(bank, standalone_model, track(out_dir / "loss_history.csv"))
        models_dir = track(out_dir / "models")
        postprocess.save_bank(bank, models_dir)
        if standalone_model is not None:
            from .model_io import save_model

            save_model(standalone_model, models_dir / "lstm_standalone.txt")
        n_slices = len(bank.models)
        _write_manifest(
            config, thresholds, post_stats, len(systems), n_slices,
            track(out_dir / "manifest.txt"),
        )
        if config.figures:
            from . import figures

            fig_dir = track(out_dir / "figures")
            figures.render_all(report, _loss_rows(bank, standalone_model), fig_dir)

        elapsed = time.perf_counter() - t0
        return RunResult(
            out_dir=out_dir, report=report, systems=sorted(systems),
            thresholds=thresholds, n_residual_slices=n_slices,
            elapsed_seconds=elapsed,
        )
    except Exception as exc:
        for p in created:
            if p.is_dir():
                shutil.rmtree(p, ignore_errors=True)
            elif p.exists():
                p.unlink()
        if created_root:
            shutil.rmtree(out_dir, ignore_errors=True)
        raise RuntimeError(f"stage '{stage}' failed: {exc}") from exc


def _fit_standalone(data: ExperimentData, train_start: dt.date, train_end: dt.date,
                    tc: TrainConfig):
    from .seeds import derive_seed
    from .training import train as train_fn

    precip, temp, flow = data.precip_obs, data.temp_obs, data.obs
    L_w = tc.lookback
    windows: list[np.ndarray] = []
    targets: list[float] = []
    d = train_start
    while d <= train_end:
        first = d - dt.timedelta(days=L_w - 1)
        if (flow.contains(d) and precip.contains(first) and precip.contains(d)
                and temp.contains(first) and temp.contains(d)):
            a, b = precip.index_of(first), precip.index_of(d)
            win = np.column_stack([precip.values[a : b + 1], temp.values[a : b + 1]])
            windows.append(win)
            targets.append(flow.value_on(d))
        d += dt.timedelta(days=1)
    if len(windows) < tc.batch_size:
        raise ValueError(f"standalone training has only {len(windows)} windows")
    cfg = TrainConfig(
        hidden_size=tc.hidden_size, lookback=tc.lookback, batch_size=tc.batch_size,
        epochs=tc.epochs, learning_rate=tc.learning_rate, beta1=tc.beta1,
        beta2=tc.beta2, epsilon=tc.epsilon, grad_clip_norm=tc.grad_clip_norm,
        seed=derive_seed(tc.seed, 0x7374616E),
    )
    model, losses = train_fn(np.stack(windows), np.array(targets), cfg)
    model._standalone_losses = losses  # carried for loss_history.csv
    return model


def _assemble_systems(
    obs: DailySeries,
    clim: baselines.DayOfYearClimatology,
    thresholds: dict[str, float],
    archive: ForecastArchive,
    post_archive: ForecastArchive,
    standalone_archive: ForecastArchive | None,
    qr_model: quantile_regression.QuantileRegressionModel,
    verify_start: dt.date,
    verify_end: dt.date,
) -> tuple[dict[str, dict[int, PairSet]], dict[int, dict[str, np.ndarray]]]:
    """Build per-system pair sets on the common valid dates of each lead."""
    systems: dict[str, dict[int, PairSet]] = {name: {} for name in ALL_SYSTEMS}
    if standalone_archive is None:
        del systems[SYSTEM_STANDALONE]
    clim_probs: dict[int, dict[str, np.ndarray]] = {}

    for lead in LEADS:
        raw = _subset_to_range(align_pairs(archive, obs, lead), verify_start, verify_end)
        post = _subset_to_range(align_pairs(post_archive, obs, lead), verify_start, verify_end)
        common = set(raw.valid_dates) & set(post.valid_dates)
        stand = None
        if standalone_archive is not None:
            stand = _subset_to_range(
                align_pairs(standalone_archive, obs, lead), verify_start, verify_end
            )
            common &= set(stand.valid_dates)
        common = {
            v for v in common
            if obs.contains(v - dt.timedelta(days=lead))  # persistence needs the issue day
        }
        if not common:
            log.warning("lead %d: no common valid dates; lead skipped", lead)
            continue

        raw = _restrict_to_dates(raw, common)
        post = _restrict_to_dates(post, common)
        qr_members = qr_model.members_for(lead, raw.ensemble_mean)
        issue_obs = np.array(
            [obs.value_on(v - dt.timedelta(days=lead)) for v in raw.valid_dates]
        )
        clim_mean = np.array([clim.mean_on(v) for v in raw.valid_dates])
        clim_issue = np.array(
            [clim.mean_on(v - dt.timedelta(days=lead)) for v in raw.valid_dates]
        )

        systems[SYSTEM_RAW][lead] = raw
        systems[SYSTEM_LSTM][lead] = post
        systems[SYSTEM_DETERMINISTIC][lead] = _single_valued_pairs(raw, raw.ensembles[:, 0])
        systems[SYSTEM_QR][lead] = PairSet(
            lead, raw.valid_dates, qr_members, raw.observations, 0
        )
        systems[SYSTEM_CLIMATOLOGY][lead] = _single_valued_pairs(raw, clim_mean)
        systems[SYSTEM_SIMPLE_PERSISTENCE][lead] = _single_valued_pairs(raw, issue_obs)
        systems[SYSTEM_ANOMALY_PERSISTENCE][lead] = _single_valued_pairs(
            raw, np.maximum(0.0, clim_mean + issue_obs - clim_issue)
        )
        if stand is not None:
            systems[SYSTEM_STANDALONE][lead] = _restrict_to_dates(stand, common)

        clim_probs[lead] = {
            cat: np.array(
                [baselines.climatology_prob_forecast(clim, v, z) for v in raw.valid_dates]
            )
            for cat, z in thresholds.items()
        }
    return systems, clim_probs


def _fmt9(v: float) -> str:
    return f"{v:.9g}"


def _write_metrics_csv(report: verification.VerificationReport, path: Path) -> None:
    rows = ["system,lead,season,category,metric,value,n"]
    for r in report.metric_rows:
        rows.append(
            f"{r.system},{r.lead},{r.season},{r.category},{r.metric},{_fmt9(r.value)},{r.n}"
        )
    path.write_text("\n".join(rows) + "\n")


def _write_reliability_csv(report: verification.VerificationReport, path: Path) -> None:
    rows = ["system,lead,category,bin_lo,bin_hi,fcst_prob_avg,obs_freq,count"]
    for r in report.reliability_rows:
        rows.append(
            f"{r.system},{r.lead},{r.category},{_fmt9(r.bin_lo)},{_fmt9(r.bin_hi)},"
            f"{_fmt9(r.forecast_avg)},{_fmt9(r.observed_freq)},{r.count}"
        )
    path.write_text("\n".join(rows) + "\n")


def _loss_rows(bank, standalone_model) -> list[tuple[str, int, float]]:
    rows = []
    for (lead, member) in sorted(bank.loss_history):
        for epoch, loss in enumerate(bank.loss_history[(lead, member)]):
            rows.append((f"L{lead}_M{member}", epoch, float(loss)))
    if standalone_model is not None and hasattr(standalone_model, "_standalone_losses"):
        for epoch, loss in enumerate(standalone_model._standalone_losses):
            rows.append(("standalone", epoch, float(loss)))
    return rows


def _write_loss_history(bank, standalone_model, path: Path) -> None:
    rows = ["model,epoch,loss"]
    for name, epoch, loss in _loss_rows(bank, standalone_model):
        rows.append(f"{name},{epoch},{_fmt9(loss)}")
    path.write_text("\n".join(rows) + "\n")


def _write_manifest(config: ExperimentConfig, thresholds: dict[str, float],
                    post_stats, n_systems: int, n_slices: int, path: Path) -> None:
    lines = ["[config]"]
    lines += config.to_lines()
    lines += [
        "[run]",
        f"threshold_low_moderate = {thresholds['low_moderate']:.17g}",
        f"threshold_high = {thresholds['high']:.17g}",
        f"postprocess_missing_cells = {post_stats.n_missing}",
        f"postprocess_floored_cells = {post_stats.n_floored}",
        f"n_systems = {n_systems}",
        f"n_residual_slices = {n_slices}",
    ]
    path.write_text("\n".join(lines) + "\n")
