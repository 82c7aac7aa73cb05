"""LSTM residual postprocessing: one model per (lead time, ensemble member).

Each model learns the residual r = observation - raw forecast from the
member's own raw-forecast history at that lead. A training sample for
valid date v is the window of the member's raw values at valid dates
v-L+1 .. v (all issued early enough to be known when the forecast for v
is made) with target r(v). At application time the predicted residual is
added to the raw forecast and the result floored at zero.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import TrainingError
from .model_io import load_model, save_model
from .seeds import derive_seed
from .timeseries import LEADS, N_MEMBERS, DailySeries, ForecastArchive
from .training import LstmModel, TrainConfig, train

N_SLICES = len(LEADS) * N_MEMBERS  # 77


def _lead_member_valid_series(
    archive: ForecastArchive, lead: int, member: int
) -> tuple[list[dt.date], np.ndarray]:
    """The member's raw values at this lead, indexed by valid date."""
    valid = [d + dt.timedelta(days=lead) for d in archive.issue_dates]
    return valid, archive.values[:, lead - 1, member]


def _training_windows(
    valid_dates: list[dt.date],
    raw: np.ndarray,
    obs: DailySeries,
    lookback: int,
    train_start: dt.date,
    train_end: dt.date,
) -> tuple[np.ndarray, np.ndarray]:
    """Sliding raw-value windows with residual targets inside the train range."""
    windows: list[np.ndarray] = []
    targets: list[float] = []
    contiguous = all(
        (b - a).days == 1 for a, b in zip(valid_dates, valid_dates[1:])
    )
    for t in range(lookback - 1, len(valid_dates)):
        v = valid_dates[t]
        if not (train_start <= v <= train_end) or not obs.contains(v):
            continue
        if not contiguous and (v - valid_dates[t - lookback + 1]).days != lookback - 1:
            continue
        win = raw[t - lookback + 1 : t + 1]
        if np.any(np.isnan(win)):
            continue
        windows.append(win)
        targets.append(obs.value_on(v) - raw[t])
    if not windows:
        return np.empty((0, lookback, 1)), np.empty(0)
    return np.stack(windows)[:, :, None], np.array(targets)


@dataclass
class ResidualModelBank:
    """77 trained residual models keyed by (lead, member)."""

    models: dict[tuple[int, int], LstmModel]
    config: TrainConfig
    base_seed: int
    train_start: dt.date
    train_end: dt.date
    loss_history: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)
    slice_seeds: dict[tuple[int, int], int] = field(default_factory=dict)

    def model(self, lead: int, member: int) -> LstmModel:
        return self.models[(lead, member)]

    def is_complete(self) -> bool:
        return len(self.models) == N_SLICES


def slice_seed(base_seed: int, lead: int, member: int) -> int:
    return derive_seed(base_seed, lead, member)


def fit_residual_bank(
    archive: ForecastArchive,
    obs: DailySeries,
    train_start: dt.date,
    train_end: dt.date,
    config: TrainConfig,
) -> ResidualModelBank:
    """Train one residual model per (lead, member) slice.

    Each slice trains on its own windows with a seed derived from
    (config.seed, lead, member), so slices are independent and the whole
    bank is reproducible.
    """
    bank = ResidualModelBank(
        models={}, config=config, base_seed=config.seed,
        train_start=train_start, train_end=train_end,
    )
    for lead in LEADS:
        valid_dates, _ = _lead_member_valid_series(archive, lead, 0)
        for member in range(N_MEMBERS):
            raw = archive.values[:, lead - 1, member]
            windows, targets = _training_windows(
                valid_dates, raw, obs, config.lookback, train_start, train_end
            )
            if windows.shape[0] < config.batch_size:
                raise TrainingError(
                    f"slice lead={lead} member={member}: only {windows.shape[0]} usable "
                    f"windows (< batch size {config.batch_size})"
                )
            seed = slice_seed(config.seed, lead, member)
            slice_config = TrainConfig(
                hidden_size=config.hidden_size,
                lookback=config.lookback,
                batch_size=config.batch_size,
                epochs=config.epochs,
                learning_rate=config.learning_rate,
                beta1=config.beta1,
                beta2=config.beta2,
                epsilon=config.epsilon,
                grad_clip_norm=config.grad_clip_norm,
                seed=seed,
            )
            model, losses = train(windows, targets, slice_config)
            bank.models[(lead, member)] = model
            bank.loss_history[(lead, member)] = losses
            bank.slice_seeds[(lead, member)] = seed
    return bank


@dataclass(frozen=True)
class PostprocessStats:
    n_missing: int
    n_floored: int


def apply_residual_bank(
    bank: ResidualModelBank, archive: ForecastArchive
) -> tuple[ForecastArchive, PostprocessStats]:
    """Add predicted residuals to every archive cell with enough window history.

    Cells whose lookback window is incomplete stay missing; corrected
    values below zero are floored and counted.
    """
    if not bank.is_complete():
        raise ValueError(f"bank has {len(bank.models)} models, expected {N_SLICES}")
    L_w = bank.config.lookback
    n_issues = len(archive.issue_dates)
    out = np.full_like(archive.values, np.nan)
    n_missing = 0
    n_floored = 0
    for lead in LEADS:
        for member in range(N_MEMBERS):
            raw = archive.values[:, lead - 1, member]
            model = bank.model(lead, member)
            rows: list[int] = []
            wins: list[np.ndarray] = []
            for t in range(n_issues):
                if t < L_w - 1:
                    n_missing += 1
                    continue
                win = raw[t - L_w + 1 : t + 1]
                if np.any(np.isnan(win)):
                    n_missing += 1
                    continue
                rows.append(t)
                wins.append(win)
            if not rows:
                continue
            preds = model.predict_batch(np.stack(wins)[:, :, None])
            corrected = raw[rows] + preds
            n_floored += int(np.count_nonzero(corrected < 0))
            out[rows, lead - 1, member] = np.maximum(0.0, corrected)
    return ForecastArchive(archive.issue_dates, out), PostprocessStats(n_missing, n_floored)


def save_bank(bank: ResidualModelBank, directory: str | Path) -> None:
    """One model file per slice plus a manifest of slices and seeds."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = [
        f"base_seed = {bank.base_seed}",
        f"train_start = {bank.train_start.isoformat()}",
        f"train_end = {bank.train_end.isoformat()}",
        f"lookback = {bank.config.lookback}",
        f"hidden_size = {bank.config.hidden_size}",
    ]
    for lead in LEADS:
        for member in range(N_MEMBERS):
            name = f"lstm_L{lead}_M{member}.txt"
            save_model(bank.model(lead, member), directory / name)
            seed = bank.slice_seeds.get((lead, member), slice_seed(bank.base_seed, lead, member))
            lines.append(f"slice lead={lead} member={member} seed={seed} file={name}")
    (directory / "bank_manifest.txt").write_text("\n".join(lines) + "\n")


def load_bank(
    directory: str | Path,
    config: TrainConfig,
    train_start: dt.date,
    train_end: dt.date,
) -> ResidualModelBank:
    directory = Path(directory)
    models = {}
    for lead in LEADS:
        for member in range(N_MEMBERS):
            models[(lead, member)] = load_model(directory / f"lstm_L{lead}_M{member}.txt")
    return ResidualModelBank(
        models=models, config=config, base_seed=config.seed,
        train_start=train_start, train_end=train_end,
    )
