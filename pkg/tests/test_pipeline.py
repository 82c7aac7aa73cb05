"""CSV ingestion, config parsing, and experiment-level plumbing tests."""

import datetime as dt

import numpy as np
import pytest

from enspost.errors import DataFormatError
from enspost.pipeline import (
    ExperimentConfig,
    ingest_forecasts,
    ingest_observations,
    load_config,
    write_daily_csv,
    write_forecasts_csv,
)
from enspost.synthetic import CatchmentConfig, generate
from enspost.timeseries import DailySeries, ForecastArchive


class TestObservationsCSV:
    def write(self, tmp_path, text):
        p = tmp_path / "obs.csv"
        p.write_text(text)
        return p

    def test_basic(self, tmp_path):
        p = self.write(tmp_path, "date,flow_cms\n2010-01-01,1.5\n2010-01-02,2\n2010-01-03,0\n")
        s = ingest_observations(p)
        assert len(s) == 3
        assert s.value_on(dt.date(2010, 1, 2)) == 2.0

    def test_gap_reported_with_dates(self, tmp_path):
        p = self.write(tmp_path, "date,flow_cms\n2010-01-01,1\n2010-01-04,1\n")
        with pytest.raises(DataFormatError, match="2010-01-02"):
            ingest_observations(p)

    def test_negative_rejected_with_line(self, tmp_path):
        p = self.write(tmp_path, "date,flow_cms\n2010-01-01,-3.0\n")
        with pytest.raises(DataFormatError, match=":2"):
            ingest_observations(p)

    def test_malformed_row_line_number(self, tmp_path):
        p = self.write(tmp_path, "date,flow_cms\n2010-01-01,1\nnot-a-date,2\n")
        with pytest.raises(DataFormatError, match=":3"):
            ingest_observations(p)

    def test_bad_header(self, tmp_path):
        p = self.write(tmp_path, "day,flow\n2010-01-01,1\n")
        with pytest.raises(DataFormatError, match="header"):
            ingest_observations(p)

    def test_roundtrip_exact(self, tmp_path):
        rng = np.random.default_rng(3)
        s = DailySeries(dt.date(2010, 1, 1), rng.uniform(0, 100, 50))
        p = tmp_path / "obs.csv"
        write_daily_csv(s, p)
        back = ingest_observations(p)
        assert back.start_date == s.start_date
        np.testing.assert_array_equal(back.values, s.values)


class TestForecastCSV:
    def test_single_issue_full_block(self, tmp_path):
        rows = ["issue_date,lead_days,member,flow_cms"]
        for lead in range(1, 8):
            for member in range(11):
                rows.append(f"2010-01-01,{lead},{member},{lead + member / 10.0}")
        p = tmp_path / "fc.csv"
        p.write_text("\n".join(rows) + "\n")
        arch = ingest_forecasts(p)
        assert len(arch.issue_dates) == 1
        assert arch.n_missing() == 0
        assert arch.get(dt.date(2010, 1, 1), 3, 5) == 3.5

    def test_lead_out_of_range(self, tmp_path):
        p = tmp_path / "fc.csv"
        p.write_text("issue_date,lead_days,member,flow_cms\n2010-01-01,8,0,1.0\n")
        with pytest.raises(DataFormatError, match="lead 8"):
            ingest_forecasts(p)

    def test_member_out_of_range(self, tmp_path):
        p = tmp_path / "fc.csv"
        p.write_text("issue_date,lead_days,member,flow_cms\n2010-01-01,1,11,1.0\n")
        with pytest.raises(DataFormatError, match="member 11"):
            ingest_forecasts(p)

    def test_duplicate_cell(self, tmp_path):
        p = tmp_path / "fc.csv"
        p.write_text(
            "issue_date,lead_days,member,flow_cms\n"
            "2010-01-01,1,0,1.0\n2010-01-01,1,0,2.0\n"
        )
        with pytest.raises(DataFormatError, match="duplicate"):
            ingest_forecasts(p)

    def test_roundtrip_exact(self, tmp_path):
        ds = generate(CatchmentConfig(seed=2, years=2, train_years=1, lookback=10))
        p = tmp_path / "fc.csv"
        write_forecasts_csv(ds.archive, p)
        back = ingest_forecasts(p)
        assert back.issue_dates == ds.archive.issue_dates
        np.testing.assert_array_equal(back.values, ds.archive.values)

    def test_subdaily_aggregation(self, tmp_path):
        rows = ["issue_datetime,valid_datetime,member,flow_cms"]
        issue = dt.datetime(2010, 1, 1, 0)
        for lead in range(1, 8):
            for member in range(11):
                day = issue + dt.timedelta(days=lead)
                for step in range(4):
                    t = day + dt.timedelta(hours=6 * step)
                    rows.append(
                        f"{issue.isoformat()},{t.isoformat()},{member},{float(2 * step)}"
                    )
        p = tmp_path / "fc6.csv"
        p.write_text("\n".join(rows) + "\n")
        arch = ingest_forecasts(p, subdaily=True)
        assert arch.n_missing() == 0
        # mean of [0, 2, 4, 6] is 3
        for lead in range(1, 8):
            for member in range(11):
                assert arch.get(dt.date(2010, 1, 1), lead, member) == 3.0


class TestConfig:
    def test_load_and_override(self, tmp_path):
        p = tmp_path / "cfg.txt"
        p.write_text(
            "# experiment\nmode = synthetic\nseed = 99\nyears = 4\n"
            "train_years = 2\nsigma1 = 0.25\nfigures = false\n"
        )
        cfg = load_config(p)
        assert cfg.seed == 99
        assert cfg.years == 4
        assert cfg.sigma1 == 0.25
        assert cfg.figures is False

    def test_unknown_key_rejected(self, tmp_path):
        p = tmp_path / "cfg.txt"
        p.write_text("nonsense = 1\n")
        with pytest.raises(DataFormatError, match="unknown config key"):
            load_config(p)

    def test_ranges_synthetic_defaults(self):
        cfg = ExperimentConfig(years=9, train_years=6)
        ts, te, vs, ve = cfg.ranges()
        assert (ts, te) == (dt.date(2004, 1, 1), dt.date(2009, 12, 31))
        assert (vs, ve) == (dt.date(2010, 1, 1), dt.date(2012, 12, 31))

    def test_ranges_must_be_disjoint(self):
        cfg = ExperimentConfig(
            train_start="2010-01-01", train_end="2010-12-31",
            verify_start="2010-06-01", verify_end="2011-06-01",
        )
        with pytest.raises(ValueError, match="disjoint"):
            cfg.ranges()

    def test_file_mode_requires_ranges(self):
        cfg = ExperimentConfig(mode="files", obs_csv="x.csv", forecast_csv="y.csv")
        with pytest.raises(ValueError, match="ranges"):
            cfg.ranges()


class TestCli:
    def test_synth_writes_csvs(self, tmp_path):
        from enspost.cli import main

        rc = main([
            "--seed", "21", "--out", str(tmp_path / "synthout"),
            "synth", "--years", "2", "--train-years", "1", "--lookback", "10",
        ])
        assert rc == 0
        for name in (
            "observations.csv", "forecasts.csv", "forcing_precip_obs.csv",
            "forcing_temp_obs.csv", "forcing_precip_fc.csv", "forcing_temp_fc.csv",
            "synth_manifest.txt",
        ):
            assert (tmp_path / "synthout" / name).exists(), name

    def test_gradcheck_passes(self, capsys):
        from enspost.cli import main

        rc = main(["gradcheck", "--seeds", "3"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "PASS" in out

    def test_synth_then_file_mode_roundtrip(self, tmp_path):
        from enspost.cli import main
        from enspost.pipeline import load_experiment_data

        out = tmp_path / "data"
        main(["--seed", "31", "--out", str(out),
              "synth", "--years", "2", "--train-years", "1", "--lookback", "10"])
        cfg = ExperimentConfig(
            mode="files",
            obs_csv=str(out / "observations.csv"),
            forecast_csv=str(out / "forecasts.csv"),
            precip_obs_csv=str(out / "forcing_precip_obs.csv"),
            temp_obs_csv=str(out / "forcing_temp_obs.csv"),
            precip_fc_csv=str(out / "forcing_precip_fc.csv"),
            temp_fc_csv=str(out / "forcing_temp_fc.csv"),
        )
        data = load_experiment_data(cfg)
        ds = generate(CatchmentConfig(seed=31, years=2, train_years=1, lookback=10))
        np.testing.assert_array_equal(data.obs.values, ds.flow.values)
        np.testing.assert_array_equal(data.archive.values, ds.archive.values)
        assert data.has_forcing


class TestRunFailureCleanup:
    def test_failed_run_removes_outputs(self, tmp_path):
        from enspost.pipeline import run_experiment

        out = tmp_path / "doomed"
        cfg = ExperimentConfig(
            mode="synthetic", seed=1, out_dir=str(out),
            years=2, train_years=1, epochs=1,
            # lookback larger than the training range leaves no usable windows
            lookback=400,
        )
        with pytest.raises(RuntimeError, match="stage"):
            run_experiment(cfg)
        assert not out.exists()
