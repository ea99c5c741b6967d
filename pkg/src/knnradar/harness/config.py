"""Flat ``dotted.key = value`` experiment configuration.

Example::

    scenario.n = 8
    scenario.k_s = 16
    scenario.snr_db = 12          # design SNR of the H1 training data
    knn.n_t = 1000
    knn.k = 50
    knn.threshold = 0.5
    feature.kind = stacked        # or raw (whitened CUT)
    feature.stats = kelly:1.0,amf:0.7
    detectors = kelly,amf,ace,knn_raw
    pd.snr_grid_db = 0:20:1       # start:stop:step (inclusive) or a comma list
    mismatch.cos2_theta = 0.46    # or mismatch.delta_nu = 0.05

Any key can be overridden from the environment as ``KNNRADAR_<KEY>`` with
dots written as double underscores, e.g. ``KNNRADAR_KNN__K=25``.
"""
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..detectors import RAW, STACKED, FeatureSpec
from ..exceptions import ConfigError
from ..knn import KnnRule
from ..scenario import ScenarioConfig, delta_nu_for_cos2

ENV_PREFIX = "KNNRADAR_"
DETECTORS = ("kelly", "amf", "ace", "knn_raw", "knn_stats")
REFERENCE_DETECTORS = ("kelly", "amf", "ace")

DEFAULTS = {
    "scenario.n": "8",
    "scenario.k_s": "16",
    "scenario.nu_d": "0.08",
    "scenario.rho": "0.95",
    "scenario.cnr_db": "10",
    "scenario.snr_db": "12",
    "test.rho": "",
    "feature.kind": "stacked",
    "feature.stats": "kelly:1.0,amf:0.7",
    "knn.n_t": "1000",
    "knn.k": "50",
    "knn.threshold": "0.5",
    "detectors": "kelly,amf,ace,knn_raw",
    "trials.pfa": "100000",
    "trials.pd": "1000",
    "trials.calibration": "",
    "pfa.target": "",
    "pd.snr_grid_db": "0:20:1",
    "mismatch.delta_nu": "0",
    "mismatch.cos2_theta": "",
    "cfar.rho_list": "0.5,0.95",
    "oracle.n": "8",
    "oracle.k_s": "16",
    "oracle.grid": "5/3/1",
    "oracle.specs": "kelly:1.0,amf:0.7",
    "oracle.laws": "h0,matched,mismatched",
    "oracle.train_snr_db": "10",
    "oracle.test_snr_db": "10",
    "oracle.cos2_theta": "0.5",
    "oracle.n_outer": "20000",
    "oracle.n_trials": "100000",
    "oracle.gaussian": "",
    "seed": "0",
    "output": "",
}


def parse_text(text):
    """Parse config text into a ``{dotted_key: raw_string}`` dict."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = value
    return out


def env_overrides(environ=None):
    environ = os.environ if environ is None else environ
    out = {}
    for name, value in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        key = name[len(ENV_PREFIX) :].lower().replace("__", ".")
        if key not in DEFAULTS:
            raise ConfigError(f"environment variable {name} names unknown key {key!r}")
        out[key] = value
    return out


def _float_list(s):
    s = s.strip()
    if not s:
        return ()
    if ":" in s:
        parts = [float(p) for p in s.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise ConfigError(f"range must be start:stop:step with step > 0, got {s!r}")
        start, stop, step = parts
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return tuple(round(start + i * step, 12) for i in range(max(count, 0)))
    return tuple(float(p) for p in s.split(","))


def parse_stats(s):
    """``"kelly:1.0,amf:0.7"`` -> stacked FeatureSpec."""
    stats = []
    for item in s.split(","):
        name, _, weight = item.strip().partition(":")
        stats.append((name.strip(), float(weight) if weight else 1.0))
    return FeatureSpec.stacked(*stats)


def _feature(kind, stats):
    kind = kind.strip().lower()
    if kind == RAW:
        return FeatureSpec.raw()
    if kind != STACKED:
        raise ConfigError(f"feature.kind must be raw or stacked, got {kind!r}")
    return parse_stats(stats)


def _opt_float(s):
    s = s.strip().lower()
    return None if s in ("", "none") else float(s)


@dataclass(frozen=True)
class OracleConfig:
    n: int = 8
    k_s: int = 16
    grid: tuple = ((5, 3, 1),)
    specs: tuple = ()
    laws: tuple = ("h0", "matched", "mismatched")
    train_snr_db: float = 10.0
    test_snr_db: float = 10.0
    cos2_theta: float = 0.5
    n_outer: int = 20000
    n_trials: int = 100000
    gaussian: tuple = ()  # (n_t, k, m) triples for the Gaussian toy


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    test_rho: float | None = None
    feature: FeatureSpec = field(default_factory=lambda: parse_stats("kelly:1.0,amf:0.7"))
    n_t: int = 1000
    rule: KnnRule = field(default_factory=lambda: KnnRule(50, 0.5))
    detectors: tuple = ("kelly", "amf", "ace", "knn_raw")
    pfa_trials: int = 100000
    pd_trials: int = 1000
    calibration_trials: int | None = None
    target_pfa: float | None = None
    snr_grid_db: tuple = tuple(float(s) for s in range(21))
    delta_nu: float = 0.0
    target_cos2: float | None = None
    rho_list: tuple = (0.5, 0.95)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    seed: int = 0
    output: str | None = None

    def __post_init__(self):
        for d in self.detectors:
            if d not in DETECTORS:
                raise ConfigError(f"unknown detector {d!r}; choose from {DETECTORS}")
        if self.pfa_trials < 1000:
            raise ConfigError("trials.pfa must be >= 1000")
        if self.pd_trials < 100:
            raise ConfigError("trials.pd must be >= 100")
        if not 1 <= self.rule.k <= 2 * self.n_t:
            raise ConfigError(f"knn.k must lie in [1, 2*n_t={2 * self.n_t}]")
        if self.target_pfa is not None and not 0.0 < self.target_pfa < 0.5:
            raise ConfigError("pfa.target must lie in (0, 0.5)")

    @property
    def test_scenario(self):
        """Scenario for CUT/secondary data under test: actual covariance and mismatch."""
        rho = self.scenario.rho if self.test_rho is None else self.test_rho
        return self.scenario.replace(rho=rho, delta_nu=self.resolved_delta_nu)

    @property
    def resolved_delta_nu(self):
        if self.target_cos2 is None:
            return self.delta_nu
        s = self.scenario
        rho = s.rho if self.test_rho is None else self.test_rho
        return delta_nu_for_cos2(self.target_cos2, s.n, s.nu_d, rho, s.cnr_db)

    @property
    def knn_detectors(self):
        return tuple(d for d in self.detectors if d.startswith("knn"))

    @property
    def reference_detectors(self):
        return tuple(d for d in self.detectors if d in REFERENCE_DETECTORS)

    def feature_for(self, detector):
        if detector == "knn_raw":
            return FeatureSpec.raw()
        if self.feature.kind == RAW:
            raise ConfigError("knn_stats needs feature.kind = stacked")
        return self.feature


def build(values):
    """ExperimentConfig from a dict of raw strings (missing keys take defaults)."""
    v = dict(DEFAULTS)
    v.update(values)
    try:
        scenario = ScenarioConfig(
            n=int(v["scenario.n"]),
            k_s=int(v["scenario.k_s"]),
            nu_d=float(v["scenario.nu_d"]),
            rho=float(v["scenario.rho"]),
            snr_db=float(v["scenario.snr_db"]),
            cnr_db=_opt_float(v["scenario.cnr_db"]),
            seed=int(v["seed"]),
        )
        grid = tuple(
            tuple(int(p) for p in item.split("/"))
            for item in v["oracle.grid"].split(",")
            if item.strip()
        )
        if any(len(g) != 3 for g in grid):
            raise ConfigError("oracle.grid entries must read n_t/k/m")
        gaussian = tuple(
            tuple(int(p) for p in item.split("/"))
            for item in v["oracle.gaussian"].split(",")
            if item.strip()
        )
        oracle = OracleConfig(
            n=int(v["oracle.n"]),
            k_s=int(v["oracle.k_s"]),
            grid=grid,
            specs=tuple(parse_stats(s) for s in v["oracle.specs"].split(";") if s.strip()),
            laws=tuple(s.strip() for s in v["oracle.laws"].split(",") if s.strip()),
            train_snr_db=float(v["oracle.train_snr_db"]),
            test_snr_db=float(v["oracle.test_snr_db"]),
            cos2_theta=float(v["oracle.cos2_theta"]),
            n_outer=int(v["oracle.n_outer"]),
            n_trials=int(v["oracle.n_trials"]),
            gaussian=gaussian,
        )
        cal = v["trials.calibration"].strip()
        return ExperimentConfig(
            scenario=scenario,
            test_rho=_opt_float(v["test.rho"]),
            feature=_feature(v["feature.kind"], v["feature.stats"]),
            n_t=int(v["knn.n_t"]),
            rule=KnnRule(int(v["knn.k"]), float(v["knn.threshold"])),
            detectors=tuple(d.strip() for d in v["detectors"].split(",") if d.strip()),
            pfa_trials=int(v["trials.pfa"]),
            pd_trials=int(v["trials.pd"]),
            calibration_trials=int(cal) if cal else None,
            target_pfa=_opt_float(v["pfa.target"]),
            snr_grid_db=_float_list(v["pd.snr_grid_db"]),
            delta_nu=float(v["mismatch.delta_nu"]),
            target_cos2=_opt_float(v["mismatch.cos2_theta"]),
            rho_list=_float_list(v["cfar.rho_list"]),
            oracle=oracle,
            seed=int(v["seed"]),
            output=v["output"].strip() or None,
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load(path=None, overrides=None, environ=None):
    """Read a config file (optional), then environment overrides, then explicit overrides."""
    values = {}
    if path is not None:
        try:
            values.update(parse_text(Path(path).read_text()))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    values.update(env_overrides(environ))
    values.update(overrides or {})
    return build(values)
