"""End-to-end CLI flow at desk-miniature scale: synth -> train -> postprocess
-> verify, plus the assembled-run invariants on a tiny full experiment."""

import csv
import datetime as dt

import numpy as np
import pytest

from enspost.cli import main
from enspost.pipeline import ALL_SYSTEMS, ExperimentConfig, run_experiment

TINY = [
    "--years", "2", "--train-years", "1",
    "--lookback", "10", "--epochs", "1", "--batch-size", "16",
    "--figures", "false",
]


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("tiny") / "run"
    cfg = ExperimentConfig(
        mode="synthetic", seed=77, out_dir=str(out),
        years=2, train_years=1, lookback=10, epochs=1, batch_size=16,
        figures=True,
    )
    return run_experiment(cfg)


class TestRunOutputs:
    def test_all_systems_present(self, tiny_run):
        assert sorted(tiny_run.systems) == sorted(ALL_SYSTEMS)
        systems_in_csv = set()
        with open(tiny_run.out_dir / "metrics.csv") as fh:
            for row in csv.DictReader(fh):
                systems_in_csv.add(row["system"])
        assert systems_in_csv == set(ALL_SYSTEMS)

    def test_sample_counts_equal_across_systems(self, tiny_run):
        counts: dict[tuple, set] = {}
        with open(tiny_run.out_dir / "metrics.csv") as fh:
            for row in csv.DictReader(fh):
                if row["season"] == "all" and row["metric"] == "nse":
                    counts.setdefault(int(row["lead"]), set()).add(int(row["n"]))
        assert counts
        for lead, ns in counts.items():
            assert len(ns) == 1, f"lead {lead} has differing sample counts {ns}"

    def test_expected_files(self, tiny_run):
        out = tiny_run.out_dir
        for name in ("metrics.csv", "reliability.csv", "loss_history.csv", "manifest.txt"):
            assert (out / name).exists(), name
        assert (out / "models" / "lstm_L7_M10.txt").exists()
        assert (out / "models" / "lstm_standalone.txt").exists()
        assert (out / "models" / "bank_manifest.txt").exists()
        assert (out / "figures" / "skill_by_lead.png").exists()

    def test_float_format_nine_significant_digits(self, tiny_run):
        with open(tiny_run.out_dir / "metrics.csv") as fh:
            next(fh)
            for line in fh:
                value = line.rsplit(",", 2)[1]
                mantissa = value.lstrip("-").replace(".", "").replace("e", "E").split("E")[0]
                assert len(mantissa.lstrip("0")) <= 9

    def test_loss_history_rows(self, tiny_run):
        with open(tiny_run.out_dir / "loss_history.csv") as fh:
            rows = list(csv.DictReader(fh))
        models = {r["model"] for r in rows}
        assert len(models) == 78  # 77 slices + standalone
        assert "standalone" in models
        assert all(r["epoch"] == "0" for r in rows)  # epochs=1


class TestCliChain:
    def test_synth_train_postprocess_verify(self, tmp_path):
        data_dir = tmp_path / "data"
        rc = main(["--seed", "55", "--out", str(data_dir), "synth"] + TINY)
        assert rc == 0

        file_args = [
            "--mode", "files",
            "--obs-csv", str(data_dir / "observations.csv"),
            "--forecast-csv", str(data_dir / "forecasts.csv"),
            "--train-start", "2004-01-01", "--train-end", "2004-12-31",
            "--verify-start", "2005-01-01", "--verify-end", "2005-12-24",
        ]

        train_dir = tmp_path / "trained"
        rc = main(["--seed", "55", "--out", str(train_dir), "train"] + TINY + file_args)
        assert rc == 0
        assert (train_dir / "models" / "lstm_L1_M0.txt").exists()
        assert (train_dir / "loss_history.csv").exists()

        post_dir = tmp_path / "post"
        rc = main(
            ["--seed", "55", "--out", str(post_dir), "postprocess",
             "--models", str(train_dir / "models")] + TINY + file_args
        )
        assert rc == 0
        post_csv = post_dir / "postprocessed_forecasts.csv"
        assert post_csv.exists()

        verify_dir = tmp_path / "verified"
        rc = main(
            ["--seed", "55", "--out", str(verify_dir), "verify",
             "--system", f"lstm_postprocessed={post_csv}"] + TINY + file_args
        )
        assert rc == 0
        with open(verify_dir / "metrics.csv") as fh:
            systems = {row["system"] for row in csv.DictReader(fh)}
        assert "raw_ensemble" in systems
        assert "lstm_postprocessed" in systems
        assert "climatology" in systems
        assert "simple_persistence" in systems
        assert (verify_dir / "figures" / "skill_by_lead.png").exists()
