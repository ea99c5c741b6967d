import math

import numpy as np
import pytest

from knnradar.exceptions import ConfigError, InsufficientTrials
from knnradar.harness import cli
from knnradar.harness import config as hc
from knnradar.harness import experiments as ex
from knnradar.rng import TEST_H0
from knnradar.scenario import H0

SMALL = {
    "knn.n_t": "200",
    "knn.k": "15",
    "trials.pfa": "4000",
    "trials.pd": "200",
    "pd.snr_grid_db": "0,10,30",
}


def small_cfg(**extra):
    return hc.build({**SMALL, **extra})


class TestConfig:
    def test_defaults_match_reference_setup(self):
        cfg = hc.build({})
        s = cfg.scenario
        assert (s.n, s.k_s, s.nu_d, s.rho, s.snr_db) == (8, 16, 0.08, 0.95, 12.0)
        assert (cfg.n_t, cfg.rule.k, cfg.rule.threshold, cfg.rule.m) == (1000, 50, 0.5, 25)
        assert (cfg.pfa_trials, cfg.pd_trials) == (100_000, 1000)

    def test_parse_text(self):
        text = """
        # comment
        scenario.n = 16     # trailing
        scenario.k_s = 32
        feature.kind = stacked
        feature.stats = kelly:1.0,ace:0.8
        detectors = kelly, knn_stats
        pd.snr_grid_db = 0:4:2
        """
        cfg = hc.build(hc.parse_text(text))
        assert cfg.scenario.n == 16
        assert cfg.feature.stats == (("kelly", 1.0), ("ace", 0.8))
        assert cfg.detectors == ("kelly", "knn_stats")
        assert cfg.snr_grid_db == (0.0, 2.0, 4.0)

    def test_raw_feature_kind(self):
        cfg = hc.build({"feature.kind": "raw"})
        assert cfg.feature.kind == "raw"
        with pytest.raises(ConfigError):
            cfg.feature_for("knn_stats")

    @pytest.mark.parametrize("text", ["scenario.n 8", "bogus.key = 1"])
    def test_parse_errors(self, text):
        with pytest.raises(ConfigError):
            hc.parse_text(text)

    def test_env_override(self):
        env = {"KNNRADAR_KNN__K": "25", "KNNRADAR_SCENARIO__K_S": "20", "PATH": "/bin"}
        cfg = hc.load(None, environ=env)
        assert cfg.rule.k == 25 and cfg.scenario.k_s == 20

    def test_env_unknown_key(self):
        with pytest.raises(ConfigError):
            hc.load(None, environ={"KNNRADAR_NOPE": "1"})

    def test_file_then_overrides(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text("knn.k = 31\nseed = 4\n")
        cfg = hc.load(path, {"seed": "9"}, environ={})
        assert cfg.rule.k == 31 and cfg.seed == 9

    @pytest.mark.parametrize(
        "values",
        [
            {"trials.pfa": "999"},
            {"trials.pd": "99"},
            {"knn.threshold": "1"},
            {"detectors": "kelly,glrt"},
            {"knn.k": "3000"},
            {"scenario.n": "x"},
            {"pfa.target": "0.6"},
            {"feature.kind": "energy"},
            {"pd.snr_grid_db": "0:10:0"},
        ],
    )
    def test_validation(self, values):
        with pytest.raises(ConfigError):
            hc.build(values)

    def test_mismatch_target(self):
        cfg = hc.build({"scenario.n": "16", "scenario.k_s": "32", "mismatch.cos2_theta": "0.46"})
        assert cfg.test_scenario.cos2_theta == pytest.approx(0.46, abs=1e-6)

    def test_test_rho(self):
        cfg = hc.build({"test.rho": "0.5"})
        assert cfg.test_scenario.rho == 0.5 and cfg.scenario.rho == 0.95


class TestStatistics:
    def test_wilson_contains_estimate(self):
        lo, hi = ex.wilson_interval(48, 10_000)
        assert lo < 0.0048 < hi
        assert ex.wilson_interval(0, 100)[0] == 0.0

    def test_wilson_coverage(self):
        # Kelly at its closed-form threshold: exact Pfa is the target
        cfg = small_cfg(detectors="kelly")
        scn = cfg.test_scenario
        p = 0.01
        t0 = ex.kelly_threshold(p, scn.n, scn.k_s)
        ev = ex.Evaluator(("kelly",), scn.nominal_steering)
        covered = 0
        for rep in range(100):
            vals = ex.simulate(scn, H0, 4000, rep, (TEST_H0, 99), ev)["kelly"]
            lo, hi = ex.wilson_interval(int(np.sum(vals > t0)), 4000)
            covered += lo <= p <= hi
        assert covered >= 93

    def test_kelly_closed_form(self):
        assert ex.kelly_threshold(0.0048, 8, 16) == pytest.approx(1 - 0.0048 ** (1 / 9))
        assert ex.kelly_threshold(0.0048, 8, 16) == pytest.approx(0.44746, abs=1e-5)

    def test_order_statistic(self):
        vals = np.arange(1, 101, dtype=float)
        assert ex.order_statistic_threshold(vals, 0.5) == 50.0
        assert ex.order_statistic_threshold(vals, 0.1) == 90.0


class TestCalibration:
    def test_median(self):
        cfg = small_cfg(detectors="amf")
        scn = cfg.test_scenario
        thr = ex.calibrate_threshold("amf", 0.49, cfg, trials=4000)
        ev = ex.Evaluator(("amf",), scn.nominal_steering)
        from knnradar.rng import CALIBRATION

        vals = ex.simulate(scn, H0, 4000, cfg.seed, (CALIBRATION,), ev)["amf"]
        assert thr == np.sort(vals)[math.ceil(4000 * 0.51) - 1]

    def test_insufficient_trials(self):
        with pytest.raises(InsufficientTrials):
            ex.calibrate_threshold("kelly", 0.001, small_cfg(), trials=10_000)

    def test_bad_target(self):
        with pytest.raises(ConfigError):
            ex.calibrate_threshold("kelly", 0.5, small_cfg(), trials=10_000)

    def test_retest_within_wilson_99(self):
        cfg = small_cfg(detectors="kelly", **{"trials.pfa": "50000", "pfa.target": "0.01"})
        rows = ex.run_calibration(cfg)
        (row,) = rows
        n = row.trials
        hits = round(row.estimate * n)
        lo, hi = ex.wilson_interval(hits, n, 0.99)
        assert lo <= 0.01 <= hi
        assert row.threshold == pytest.approx(ex.kelly_threshold(0.01, 8, 16), rel=0.03)

    def test_calibrate_needs_target(self):
        with pytest.raises(ConfigError):
            ex.run_calibration(small_cfg())


class TestRuns:
    def test_pfa_rows(self):
        rows = ex.run_pfa(small_cfg())
        assert [r.detector for r in rows] == ["ace", "amf", "kelly", "knn_raw"]
        for r in rows:
            assert r.metric == "pfa" and 0 <= r.estimate <= 1 and r.std_error >= 0
            assert r.ci[0] <= r.estimate <= r.ci[1]

    def test_pd_curve(self):
        rows = ex.run_pd_curve(small_cfg())
        keys = [(r.detector, r.snr_db) for r in rows]
        assert keys == sorted(keys) and len(rows) == 4 * 3
        for r in rows:
            if r.snr_db == 30:
                assert r.estimate >= 0.98
        for d in ("kelly", "knn_raw"):
            pd = [r for r in rows if r.detector == d]
            for a, b in zip(pd, pd[1:]):
                assert b.estimate >= a.estimate - 3 * math.hypot(a.std_error, b.std_error)

    def test_pd_needs_grid(self):
        with pytest.raises(ConfigError):
            ex.run_pd_curve(small_cfg(**{"pd.snr_grid_db": ""}))

    def test_cfar_single_rho(self):
        rows = ex.run_cfar_sweep(small_cfg(), rho_list=[0.5])
        assert len(rows) == 1 and rows[0].detector == "knn_stats@rho=0.5"

    def test_cfar_raw_marker(self):
        rows = ex.run_cfar_sweep(small_cfg(**{"feature.kind": "raw"}), rho_list=[0.5, 0.95])
        assert [r.detector for r in rows] == ["knn_raw@rho=0.5[non-cfar]", "knn_raw@rho=0.95[non-cfar]"]

    def test_rho_tag(self):
        rows = ex.run_pfa(small_cfg(**{"test.rho": "0.5", "detectors": "kelly", "pfa.target": "0.01"}))
        assert rows[0].detector == "kelly@rho=0.5"

    def test_csv_format(self):
        rows = ex.run_pfa(small_cfg(detectors="kelly,knn_stats"))
        text = ex.to_csv(rows)
        lines = text.splitlines()
        assert lines[0] == ",".join(ex.CSV_COLUMNS)
        fields = lines[1].split(",")
        assert fields[1] == "" and fields[3] == "pfa"
        assert float(fields[8]) == rows[0].threshold
        assert fields[8] == format(rows[0].threshold, ".17g")

    def test_thread_independence(self):
        cfg = small_cfg(**{"trials.pfa": "5000"})
        a = ex.to_csv(ex.run_pd_curve(cfg, threads=1))
        b = ex.to_csv(ex.run_pd_curve(cfg, threads=4))
        assert a == b


class TestOracle:
    def test_empty_grid(self):
        cfg = hc.build({"oracle.grid": ""})
        report = ex.run_oracle_check(cfg)
        assert report.rows == () and report.passed
        assert len(report.text().splitlines()) == 1

    def test_small_report(self):
        cfg = hc.build({
            "oracle.grid": "4/3/1",
            "oracle.laws": "h0",
            "oracle.n_outer": "1000",
            "oracle.n_trials": "5000",
            "oracle.gaussian": "5/3/1",
            "oracle.train_snr_db": "-inf",
        })
        report = ex.run_oracle_check(cfg)
        assert len(report.rows) == 3
        assert report.rows[0].baseline == pytest.approx(ex.exchangeable_probability(4, 3, 1))
        assert report.passed, report.text()

    def test_rejects_large_instances(self):
        with pytest.raises(ConfigError):
            ex.run_oracle_check(hc.build({"oracle.grid": "20/3/1"}))


class TestCli:
    def run(self, capsys, *argv):
        code = cli.main(list(argv))
        return code, capsys.readouterr()

    def test_cos2theta(self, capsys):
        code, out = self.run(capsys, "cos2theta", "--set", "mismatch.delta_nu=0.05")
        assert code == 0 and "cos2_theta=0.500" in out.out

    def test_config_error_exit(self, capsys):
        code, out = self.run(capsys, "pfa", "--set", "knn.threshold=1")
        assert code == 2 and "config error" in out.err

    def test_missing_config_file(self, capsys, tmp_path):
        code, _ = self.run(capsys, "pfa", "--config", str(tmp_path / "missing.cfg"))
        assert code == 2

    def test_insufficient_trials_exit(self, capsys):
        code, _ = self.run(capsys, "calibrate", "--trials", "1000", "--set", "pfa.target=0.001")
        assert code == 2

    def test_numerical_failure_exit(self, capsys):
        # a huge oracle SNR blows the Poisson series budget
        code, out = self.run(
            capsys, "oracle-check", "--set", "oracle.train_snr_db=140", "--set", "oracle.n_outer=50",
            "--set", "oracle.laws=h0", "--trials", "1000",
        )
        assert code == 3 and "numerical failure" in out.err

    def test_oracle_failure_exit(self, capsys, monkeypatch):
        bad = ex.OracleReport((ex.OracleRow("forced", 0.0, 0.001, 1.0, 0.001),))
        monkeypatch.setattr(ex, "run_oracle_check", lambda cfg: bad)
        code, out = self.run(capsys, "oracle-check")
        assert code == 4 and "FAIL" in out.out

    def test_pfa_csv_file(self, capsys, tmp_path):
        out = tmp_path / "pfa.csv"
        args = ["pfa", "--trials", "2000", "--seed", "3", "--out", str(out),
                "--set", "knn.n_t=100", "--set", "knn.k=9", "--set", "detectors=kelly,knn_stats"]
        code, _ = self.run(capsys, *args)
        assert code == 0
        text = out.read_text()
        assert text.startswith("detector,snr_db,cos2_theta")
        assert ",2000,3," in text
        code, _ = self.run(capsys, *args[:-6], "--threads", "3", *args[-6:])
        assert out.read_text() == text
