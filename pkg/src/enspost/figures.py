"""Render verification figures next to the delimited report files.

Four figures accompany every report: deterministic skill by lead
(NSE and RMSE panels), Brier skill score by lead per season and flow
category, reliability diagrams at leads 1/3/7, and training loss curves.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .timeseries import LEADS
from .verification import VerificationReport

_SKILL_SYSTEMS_HINT = (
    "lstm_postprocessed",
    "qr_postprocessed",
    "raw_ensemble",
    "standalone_lstm",
    "deterministic",
    "simple_persistence",
    "anomaly_persistence",
    "climatology",
)


def _metric_by_lead(report: VerificationReport, system: str, metric: str,
                    season: str = "all", category: str = "all") -> tuple[list[int], list[float]]:
    leads, vals = [], []
    for r in report.metric_rows:
        if (r.system, r.season, r.category, r.metric) == (system, season, category, metric):
            leads.append(r.lead)
            vals.append(r.value)
    order = np.argsort(leads)
    return [leads[i] for i in order], [vals[i] for i in order]


def _systems_in(report: VerificationReport) -> list[str]:
    present = {r.system for r in report.metric_rows}
    ordered = [s for s in _SKILL_SYSTEMS_HINT if s in present]
    ordered += sorted(present - set(ordered))
    return ordered


def plot_skill_by_lead(report: VerificationReport, path: Path) -> None:
    fig, axes = plt.subplots(1, 2, figsize=(11, 4.2))
    for system in _systems_in(report):
        for ax, metric in zip(axes, ("nse", "rmse")):
            leads, vals = _metric_by_lead(report, system, metric)
            if leads:
                ax.plot(leads, vals, marker="o", label=system)
    axes[0].set_ylabel("NSE")
    axes[1].set_ylabel("RMSE (m$^3$/s)")
    for ax in axes:
        ax.set_xlabel("lead time (days)")
        ax.set_xticks(list(LEADS))
        ax.grid(alpha=0.3)
    axes[0].legend(fontsize=7, loc="lower left")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_bss_by_lead(report: VerificationReport, path: Path,
                     systems: tuple[str, ...] = ("raw_ensemble", "lstm_postprocessed")) -> None:
    fig, axes = plt.subplots(1, 2, figsize=(11, 4.2), sharey=True)
    styles = {"raw_ensemble": "--", "lstm_postprocessed": "-", "qr_postprocessed": ":"}
    colors = {"low_moderate": "tab:blue", "high": "tab:red"}
    for ax, season in zip(axes, ("cool", "warm")):
        for system in systems:
            for cat in ("low_moderate", "high"):
                leads, vals = _metric_by_lead(report, system, "bss", season, cat)
                if leads:
                    ax.plot(
                        leads, vals, linestyle=styles.get(system, "-."),
                        color=colors[cat], marker="o",
                        label=f"{system} {cat}",
                    )
        ax.axhline(0.0, color="k", lw=0.8)
        ax.set_title(f"{season} season")
        ax.set_xlabel("lead time (days)")
        ax.set_xticks(list(LEADS))
        ax.grid(alpha=0.3)
    axes[0].set_ylabel("Brier skill score")
    axes[0].legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_reliability(report: VerificationReport, path: Path,
                     leads: tuple[int, ...] = (1, 3, 7),
                     systems: tuple[str, ...] = ("raw_ensemble", "lstm_postprocessed")) -> None:
    fig, axes = plt.subplots(1, len(leads), figsize=(4.2 * len(leads), 4.2), sharey=True)
    if len(leads) == 1:
        axes = [axes]
    styles = {"raw_ensemble": "--", "lstm_postprocessed": "-"}
    colors = {"low_moderate": "tab:blue", "high": "tab:red"}
    for ax, lead in zip(axes, leads):
        ax.plot([0, 1], [0, 1], color="k", lw=0.8)
        for system in systems:
            for cat in ("low_moderate", "high"):
                pts = [
                    (r.forecast_avg, r.observed_freq)
                    for r in report.reliability_rows
                    if (r.system, r.lead, r.category) == (system, lead, cat)
                ]
                if pts:
                    xs, ys = zip(*sorted(pts))
                    ax.plot(xs, ys, marker="o", linestyle=styles.get(system, ":"),
                            color=colors[cat], label=f"{system} {cat}")
        ax.set_title(f"day {lead}")
        ax.set_xlabel("forecast probability")
        ax.set_xlim(-0.02, 1.02)
        ax.set_ylim(-0.02, 1.02)
        ax.grid(alpha=0.3)
    axes[0].set_ylabel("observed frequency")
    axes[0].legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_training_loss(loss_rows: list[tuple[str, int, float]], path: Path) -> None:
    by_model: dict[str, list[float]] = {}
    for name, epoch, loss in loss_rows:
        by_model.setdefault(name, []).append(loss)
    if not by_model:
        return
    fig, ax = plt.subplots(figsize=(6.5, 4.2))
    slice_losses = [np.asarray(v) for k, v in by_model.items() if k != "standalone"]
    if slice_losses and all(len(v) == len(slice_losses[0]) for v in slice_losses):
        stack = np.vstack(slice_losses)
        epochs = np.arange(stack.shape[1])
        ax.plot(epochs, stack.mean(axis=0), color="tab:blue", label="residual models (mean)")
        ax.fill_between(epochs, stack.min(axis=0), stack.max(axis=0),
                        color="tab:blue", alpha=0.2, label="residual models (range)")
    if "standalone" in by_model:
        ax.plot(by_model["standalone"], color="tab:orange", label="standalone")
    ax.set_xlabel("epoch")
    ax.set_ylabel("training MSE (scaled)")
    ax.set_yscale("log")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_all(report: VerificationReport, loss_rows: list[tuple[str, int, float]],
               out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    plot_skill_by_lead(report, out / "skill_by_lead.png")
    written.append(out / "skill_by_lead.png")
    plot_bss_by_lead(report, out / "bss_by_lead.png")
    written.append(out / "bss_by_lead.png")
    plot_reliability(report, out / "reliability.png")
    written.append(out / "reliability.png")
    if loss_rows:
        plot_training_loss(loss_rows, out / "training_loss.png")
        written.append(out / "training_loss.png")
    return written
