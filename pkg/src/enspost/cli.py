"""Command-line interface.

Subcommands:

* ``synth``        generate the synthetic catchment and emit its CSVs
* ``train``        fit the residual model bank (and standalone network)
* ``postprocess``  apply a saved model bank to a forecast archive
* ``verify``       verify forecast CSVs against observations
* ``run``          full experiment: data -> train -> postprocess -> verify
* ``gradcheck``    finite-difference check of the network gradients

Global options: ``--config`` (flat key = value file), ``--seed``,
``--out``. Every config key is also exposed as a flag of the same name,
which overrides the file.
"""

from __future__ import annotations

import argparse
import datetime as dt
import logging
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import baselines, pipeline, postprocess
from .pipeline import ExperimentConfig
from .training import gradient_check

log = logging.getLogger("enspost")


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    cfg = ExperimentConfig()
    skip = {"seed", "out_dir"}  # covered by the global flags
    for f in fields(ExperimentConfig):
        if f.name in skip:
            continue
        default = getattr(cfg, f.name)
        flag = "--" + f.name.replace("_", "-")
        if isinstance(default, bool):
            parser.add_argument(flag, type=str, choices=("true", "false"),
                                default=None, help=f"config key {f.name}")
        elif isinstance(default, dt.date):
            parser.add_argument(flag, type=str, default=None, help=f"config key {f.name}")
        else:
            parser.add_argument(flag, type=type(default), default=None,
                                help=f"config key {f.name}")


def _build_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = pipeline.load_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    for f in fields(ExperimentConfig):
        if f.name in ("seed", "out_dir"):
            continue
        val = getattr(args, f.name, None)
        if val is None:
            continue
        if isinstance(getattr(cfg, f.name), bool):
            setattr(cfg, f.name, val == "true")
        elif isinstance(getattr(cfg, f.name), dt.date):
            setattr(cfg, f.name, dt.date.fromisoformat(val))
        else:
            setattr(cfg, f.name, val)
    return cfg


def _cmd_synth(args: argparse.Namespace) -> int:
    from .synthetic import generate

    cfg = _build_config(args)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ds = generate(cfg.catchment_config())
    pipeline.write_daily_csv(ds.flow, out / "observations.csv")
    pipeline.write_forecasts_csv(ds.archive, out / "forecasts.csv")
    pipeline.write_daily_csv(ds.precip, out / "forcing_precip_obs.csv", value_column="value")
    pipeline.write_daily_csv(ds.temperature, out / "forcing_temp_obs.csv", value_column="value")
    pipeline.write_forecasts_csv(ds.precip_forecast, out / "forcing_precip_fc.csv",
                                 value_column="value")
    pipeline.write_forecasts_csv(ds.temp_forecast, out / "forcing_temp_fc.csv",
                                 value_column="value")
    (out / "synth_manifest.txt").write_text("\n".join(ds.manifest_lines()) + "\n")
    print(f"wrote synthetic dataset ({len(ds.flow)} days, "
          f"{len(ds.archive.issue_dates)} issues) to {out}")
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    data = pipeline.load_experiment_data(cfg)
    train_start, train_end, _, _ = cfg.ranges()
    tc = cfg.train_config()
    bank = postprocess.fit_residual_bank(data.archive, data.obs, train_start, train_end, tc)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    postprocess.save_bank(bank, out / "models")
    pipeline._write_loss_history(bank, None, out / "loss_history.csv")
    print(f"trained {len(bank.models)} residual models into {out / 'models'}")
    return 0


def _cmd_postprocess(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    data = pipeline.load_experiment_data(cfg)
    train_start, train_end, _, _ = cfg.ranges()
    bank = postprocess.load_bank(Path(args.models), cfg.train_config(), train_start, train_end)
    corrected, stats = postprocess.apply_residual_bank(bank, data.archive)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pipeline.write_forecasts_csv(corrected, out / "postprocessed_forecasts.csv")
    print(f"postprocessed archive written ({stats.n_missing} cells missing, "
          f"{stats.n_floored} floored) to {out / 'postprocessed_forecasts.csv'}")
    return 0


def _cmd_verify(args: argparse.Namespace) -> int:
    from .timeseries import LEADS, align_pairs, flow_threshold
    from .verification import conditional_verify

    cfg = _build_config(args)
    data = pipeline.load_experiment_data(cfg)
    train_start, train_end, verify_start, verify_end = cfg.ranges()
    obs = data.obs
    train_obs = obs.subrange(max(train_start, obs.start_date), min(train_end, obs.end_date))
    clim = baselines.build_climatology(train_obs, window_days=cfg.window_days)
    thresholds = {
        "low_moderate": flow_threshold(train_obs, cfg.low_flow_p),
        "high": flow_threshold(train_obs, cfg.high_flow_p),
    }
    archives = {pipeline.SYSTEM_RAW: data.archive}
    for spec_arg in args.system or []:
        name, _, path = spec_arg.partition("=")
        if not path:
            raise SystemExit(f"--system must look like name=path, got {spec_arg!r}")
        archives[name] = pipeline.ingest_forecasts(path)

    systems: dict[str, dict[int, object]] = {name: {} for name in archives}
    systems[pipeline.SYSTEM_CLIMATOLOGY] = {}
    systems[pipeline.SYSTEM_SIMPLE_PERSISTENCE] = {}
    systems[pipeline.SYSTEM_ANOMALY_PERSISTENCE] = {}
    systems[pipeline.SYSTEM_DETERMINISTIC] = {}
    clim_probs: dict[int, dict[str, np.ndarray]] = {}
    for lead in LEADS:
        base = pipeline._subset_to_range(
            align_pairs(data.archive, obs, lead), verify_start, verify_end
        )
        common = {
            v for v in base.valid_dates if obs.contains(v - dt.timedelta(days=lead))
        }
        for name, arch in archives.items():
            pairs = pipeline._subset_to_range(align_pairs(arch, obs, lead),
                                              verify_start, verify_end)
            common &= set(pairs.valid_dates)
        if not common:
            continue
        for name, arch in archives.items():
            pairs = pipeline._subset_to_range(align_pairs(arch, obs, lead),
                                              verify_start, verify_end)
            systems[name][lead] = pipeline._restrict_to_dates(pairs, common)
        base = pipeline._restrict_to_dates(base, common)
        issue_obs = np.array(
            [obs.value_on(v - dt.timedelta(days=lead)) for v in base.valid_dates]
        )
        clim_mean = np.array([clim.mean_on(v) for v in base.valid_dates])
        clim_issue = np.array(
            [clim.mean_on(v - dt.timedelta(days=lead)) for v in base.valid_dates]
        )
        systems[pipeline.SYSTEM_DETERMINISTIC][lead] = pipeline._single_valued_pairs(
            base, base.ensembles[:, 0]
        )
        systems[pipeline.SYSTEM_CLIMATOLOGY][lead] = pipeline._single_valued_pairs(base, clim_mean)
        systems[pipeline.SYSTEM_SIMPLE_PERSISTENCE][lead] = pipeline._single_valued_pairs(
            base, issue_obs
        )
        systems[pipeline.SYSTEM_ANOMALY_PERSISTENCE][lead] = pipeline._single_valued_pairs(
            base, np.maximum(0.0, clim_mean + issue_obs - clim_issue)
        )
        clim_probs[lead] = {
            cat: np.array(
                [baselines.climatology_prob_forecast(clim, v, z) for v in base.valid_dates]
            )
            for cat, z in thresholds.items()
        }

    report = conditional_verify(systems, thresholds, clim_probs,
                                bins=cfg.reliability_bins,
                                climatology_system=pipeline.SYSTEM_CLIMATOLOGY)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pipeline._write_metrics_csv(report, out / "metrics.csv")
    pipeline._write_reliability_csv(report, out / "reliability.csv")
    if cfg.figures:
        from . import figures

        figures.render_all(report, [], out / "figures")
    print(f"verification report written to {out}")
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    result = pipeline.run_experiment(cfg)
    print(f"run complete in {result.elapsed_seconds:.1f} s")
    print(f"systems: {', '.join(result.systems)}")
    print(f"outputs in {result.out_dir}")
    return 0


def _cmd_gradcheck(args: argparse.Namespace) -> int:
    worst = 0.0
    base = args.seed if args.seed is not None else 0
    for k in range(args.seeds):
        err = gradient_check(seed=base + k)
        worst = max(worst, err)
        print(f"seed {base + k}: max relative gradient error {err:.3e}")
    print(f"worst over {args.seeds} seeds: {worst:.3e} "
          f"({'PASS' if worst < 1e-5 else 'FAIL'} at 1e-5)")
    return 0 if worst < 1e-5 else 1


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="enspost",
        description="Ensemble streamflow forecast postprocessing and verification",
    )
    parser.add_argument("--config", type=str, default=None, help="flat key = value config file")
    parser.add_argument("--seed", type=int, default=None, help="base random seed")
    parser.add_argument("--out", type=str, default=None, help="output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn, desc in (
        ("synth", _cmd_synth, "generate synthetic CSVs"),
        ("train", _cmd_train, "fit the residual model bank"),
        ("run", _cmd_run, "full experiment"),
    ):
        p = sub.add_parser(name, help=desc)
        _add_config_flags(p)
        p.set_defaults(func=fn)

    p = sub.add_parser("postprocess", help="apply a saved model bank")
    p.add_argument("--models", type=str, required=True, help="model bank directory")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_postprocess)

    p = sub.add_parser("verify", help="verify forecast CSVs against observations")
    p.add_argument("--system", action="append", metavar="NAME=CSV",
                   help="additional forecast archive to verify (repeatable)")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("gradcheck", help="finite-difference gradient check")
    p.add_argument("--seeds", type=int, default=10, help="number of seeds to test")
    p.set_defaults(func=_cmd_gradcheck)

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
