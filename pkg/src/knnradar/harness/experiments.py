"""Monte Carlo experiments: calibration, Pfa, Pd curves, CFAR sweeps, oracle checks.

All simulations run in fixed-size chunks, each with its own counter-based
random stream, and results are concatenated in chunk order. Thread count
therefore never changes a single output bit.
"""
import csv
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ..analysis import (
    brute_force_probability,
    exchangeable_probability,
    gaussian_toy_brute_force,
    gaussian_toy_probability,
    semi_analytic_probability,
)
from ..detectors import RAW, embed_complex, scaled_sample_covariance, stat_pair
from ..distributions import StatLaw
from ..exceptions import ConfigError, InsufficientTrials
from ..knn import build_training_set, neighbor_label_counts
from ..linalg import primitive_forms, whiten
from ..rng import CALIBRATION, ORACLE, TEST_H0, TEST_H1, chunk_sizes, stream
from ..scenario import H0, H1, db_to_linear, draw_observations

log = logging.getLogger(__name__)

CHUNK = 2000
CSV_COLUMNS = (
    "detector", "snr_db", "cos2_theta", "metric", "estimate",
    "std_error", "trials", "seed", "threshold",
)


# ------------------------------------------------------------ statistics


def wilson_interval(hits, n, confidence=0.95):
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("n must be positive")
    z = stats.norm.isf((1.0 - confidence) / 2.0)
    p = hits / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1.0 - p) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if hits == 0 else max(center - half, 0.0)
    hi = 1.0 if hits == n else min(center + half, 1.0)
    return lo, hi


def kelly_threshold(target_pfa, n, k_s):
    """Closed-form Kelly threshold: ``(1 - t0)^(K-N+1) = Pfa``."""
    return 1.0 - target_pfa ** (1.0 / (k_s - n + 1))


@dataclass(frozen=True)
class ResultRow:
    detector: str
    snr_db: float | None
    cos2_theta: float
    metric: str
    estimate: float
    std_error: float
    trials: int
    seed: int
    threshold: float
    ci: tuple = field(default=(0.0, 1.0), compare=False)

    @classmethod
    def from_hits(cls, detector, metric, hits, trials, seed, threshold, snr_db=None, cos2=1.0):
        p = hits / trials
        return cls(
            detector=detector,
            snr_db=snr_db,
            cos2_theta=cos2,
            metric=metric,
            estimate=p,
            std_error=math.sqrt(p * (1.0 - p) / trials),
            trials=int(trials),
            seed=int(seed),
            threshold=float(threshold),
            ci=wilson_interval(hits, trials),
        )


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def to_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        w.writerow([_fmt(getattr(row, c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def write_csv(rows, path):
    with open(path, "w", newline="") as fh:
        fh.write(to_csv(rows))


# ------------------------------------------------------------ simulation


class Evaluator:
    """Scores a batch of observations for several detectors at once.

    Reference detectors return their statistic; KNN detectors return the
    label-1 fraction among the k nearest training features.
    """

    def __init__(self, detectors, v, training=None, k=None):
        self.detectors = tuple(detectors)
        self.v = v
        self.training = training or {}
        self.k = k

    def __call__(self, z, r):
        s = scaled_sample_covariance(r)
        out = {}
        refs = [d for d in self.detectors if not d.startswith("knn")]
        if refs:
            zz, zv, vv = primitive_forms(z, s, self.v)
            a = np.abs(zv) ** 2 / vv
            with np.errstate(invalid="ignore", divide="ignore"):
                values = {
                    "kelly": a / (1.0 + zz),
                    "amf": a,
                    "ace": np.where(zz > 0, a / np.where(zz > 0, zz, 1.0), 0.0),
                }
            out.update({d: values[d] for d in refs})
        pair = None
        for d in self.detectors:
            if not d.startswith("knn"):
                continue
            ts = self.training[d]
            spec = ts.meta["spec"]
            if spec.kind == RAW:
                x = embed_complex(whiten(s, z))
            else:
                pair = pair or stat_pair(z, s, self.v)
                x = spec.from_pairs(pair.t_tilde, pair.beta)
            out[d] = neighbor_label_counts(x, ts, self.k) / self.k
        return out


def simulate(scn, hyp, trials, seed, key, evaluate, threads=1, chunk=CHUNK):
    """Run ``evaluate(z, r)`` on ``trials`` observations; returns concatenated dict of arrays."""
    sizes = chunk_sizes(trials, chunk)

    def work(i):
        z, r = draw_observations(hyp, scn, stream(seed, *key, i), sizes[i])
        return evaluate(z, r)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(work, range(len(sizes))))
    else:
        parts = [work(i) for i in range(len(sizes))]
    return {name: np.concatenate([p[name] for p in parts]) for name in parts[0]}


def order_statistic_threshold(values, target_pfa):
    """Value at 1-based index ``ceil(n (1 - p))`` of the sorted sample."""
    values = np.sort(np.asarray(values))
    idx = math.ceil(len(values) * (1.0 - target_pfa) - 1e-9)
    return float(values[max(idx, 1) - 1])


def _check_target(target_pfa, trials):
    if not 0.0 < target_pfa < 0.5:
        raise ConfigError(f"target Pfa must lie in (0, 0.5), got {target_pfa}")
    if trials < 20.0 / target_pfa:
        raise InsufficientTrials(
            f"{trials} trials cannot calibrate Pfa={target_pfa}; need >= {math.ceil(20 / target_pfa)}"
        )


def training_sets(cfg):
    out = {}
    for d in cfg.knn_detectors:
        out[d] = build_training_set(cfg.scenario, cfg.feature_for(d), cfg.n_t, seed=cfg.seed)
    return out


def _tag(cfg, detector, rho=None):
    """Detector id; carries the test covariance when it differs from the design one."""
    test_rho = cfg.test_scenario.rho if rho is None else rho
    if rho is None and test_rho == cfg.scenario.rho:
        return detector
    tag = f"{detector}@rho={test_rho:g}"
    if detector == "knn_raw":
        tag += "[non-cfar]"
    return tag


def calibrate_thresholds(detectors, target_pfa, cfg, trials=None, threads=1, training=None, scn=None):
    """Empirical H0 thresholds for several detectors from common calibration trials."""
    trials = trials or cfg.calibration_trials or cfg.pfa_trials
    _check_target(target_pfa, trials)
    scn = scn or cfg.test_scenario
    if training is None:
        training = training_sets(cfg) if any(d.startswith("knn") for d in detectors) else {}
    ev = Evaluator(detectors, scn.nominal_steering, training, cfg.rule.k)
    values = simulate(scn, H0, trials, cfg.seed, (CALIBRATION,), ev, threads)
    out = {}
    for d in detectors:
        thr = order_statistic_threshold(values[d], target_pfa)
        if d == "kelly":
            t0 = kelly_threshold(target_pfa, scn.n, scn.k_s)
            hits = int(np.sum(values[d] > t0))
            lo, hi = wilson_interval(hits, trials, 0.999)
            if not lo <= target_pfa <= hi:
                log.warning(
                    "Kelly closed-form threshold %.6g gives Pfa %.3g on the calibration sample "
                    "(99.9%% interval [%.3g, %.3g] excludes %.3g)",
                    t0, hits / trials, lo, hi, target_pfa,
                )
        out[d] = thr
    return out


def calibrate_threshold(detector, target_pfa, cfg, trials=None, threads=1):
    """Empirical ``(1 - target_pfa)``-quantile of one detector's H0 statistic."""
    return calibrate_thresholds((detector,), target_pfa, cfg, trials, threads)[detector]


def _h0_hits(cfg, detectors, thresholds, training, trials, key, threads, scn=None):
    scn = scn or cfg.test_scenario
    ev = Evaluator(detectors, scn.nominal_steering, training, cfg.rule.k)
    values = simulate(scn, H0, trials, cfg.seed, key, ev, threads)
    return {d: int(np.sum(values[d] > thresholds[d])) for d in detectors}


def _knn_thresholds(cfg):
    # l_bar > M / k  <=>  count > M
    return {d: cfg.rule.m / cfg.rule.k for d in cfg.knn_detectors}


def _reference_thresholds(cfg, target, threads):
    refs = cfg.reference_detectors
    if not refs:
        return {}
    return calibrate_thresholds(refs, target, cfg, threads=threads)


def run_pfa(cfg, threads=1, training=None):
    """Empirical Pfa of every configured detector on fresh H0 trials.

    KNN detectors use their T rule on one training set per run. Reference
    detectors are calibrated at ``cfg.target_pfa`` or, when none is set, at
    the empirical Pfa of the first KNN detector.
    """
    training = training_sets(cfg) if training is None else training
    scn = cfg.test_scenario
    knn_thr = _knn_thresholds(cfg)
    hits = _h0_hits(cfg, cfg.knn_detectors, knn_thr, training, cfg.pfa_trials, (TEST_H0, 0), threads)
    target = cfg.target_pfa
    if target is None and cfg.reference_detectors:
        if not cfg.knn_detectors:
            raise ConfigError("pfa.target is required when no KNN detector sets the operating point")
        target = max(hits[cfg.knn_detectors[0]], 1) / cfg.pfa_trials
    ref_thr = _reference_thresholds(cfg, target, threads)
    hits.update(
        _h0_hits(cfg, cfg.reference_detectors, ref_thr, training, cfg.pfa_trials, (TEST_H0, 1), threads)
    )
    thr = {**ref_thr, **{d: cfg.rule.threshold for d in cfg.knn_detectors}}
    rows = [
        ResultRow.from_hits(_tag(cfg, d), "pfa", hits[d], cfg.pfa_trials, cfg.seed, thr[d], None, scn.cos2_theta)
        for d in cfg.detectors
    ]
    return sorted(rows, key=lambda r: r.detector)


def run_calibration(cfg, threads=1):
    """Calibrate every detector at ``cfg.target_pfa`` and re-test on fresh H0 trials."""
    if cfg.target_pfa is None:
        raise ConfigError("calibrate needs pfa.target")
    training = training_sets(cfg)
    thr = calibrate_thresholds(cfg.detectors, cfg.target_pfa, cfg, threads=threads, training=training)
    hits = _h0_hits(cfg, cfg.detectors, thr, training, cfg.pfa_trials, (TEST_H0, 2), threads)
    cos2 = cfg.test_scenario.cos2_theta
    rows = [
        ResultRow.from_hits(_tag(cfg, d), "pfa", hits[d], cfg.pfa_trials, cfg.seed, thr[d], None, cos2)
        for d in cfg.detectors
    ]
    return sorted(rows, key=lambda r: r.detector)


def run_pd_curve(cfg, threads=1, training=None):
    """Pd per (detector, SNR) at a common Pfa; rows sorted by (detector, snr)."""
    if not cfg.snr_grid_db:
        raise ConfigError("pd-curve needs a nonempty pd.snr_grid_db")
    training = training_sets(cfg) if training is None else training
    thr = _knn_thresholds(cfg)
    target = cfg.target_pfa
    if target is None and cfg.reference_detectors:
        if not cfg.knn_detectors:
            raise ConfigError("pfa.target is required when no KNN detector sets the operating point")
        d0 = cfg.knn_detectors[0]
        h = _h0_hits(cfg, (d0,), thr, training, cfg.pfa_trials, (TEST_H0, 0), threads)[d0]
        target = max(h, 1) / cfg.pfa_trials
    thr.update(_reference_thresholds(cfg, target, threads))
    reported = {**thr, **{d: cfg.rule.threshold for d in cfg.knn_detectors}}
    base = cfg.test_scenario
    ev = Evaluator(cfg.detectors, base.nominal_steering, training, cfg.rule.k)
    rows = []
    for i, snr in enumerate(cfg.snr_grid_db):
        scn = base.replace(snr_db=snr)
        values = simulate(scn, H1, cfg.pd_trials, cfg.seed, (TEST_H1, i), ev, threads)
        for d in cfg.detectors:
            hits = int(np.sum(values[d] > thr[d]))
            rows.append(
                ResultRow.from_hits(
                    _tag(cfg, d), "pd", hits, cfg.pd_trials, cfg.seed, reported[d], snr, scn.cos2_theta
                )
            )
    return sorted(rows, key=lambda r: (r.detector, r.snr_db))


def run_cfar_sweep(cfg, rho_list=None, threads=1):
    """Pfa of the configured-feature KNN detector at each test rho, training fixed at the design rho."""
    rho_list = cfg.rho_list if rho_list is None else tuple(rho_list)
    spec = cfg.feature
    name = "knn_raw" if spec.kind == RAW else "knn_stats"
    ts = {name: build_training_set(cfg.scenario, spec, cfg.n_t, seed=cfg.seed)}
    thr = {name: cfg.rule.m / cfg.rule.k}
    rows = []
    for i, rho in enumerate(rho_list):
        scn = cfg.test_scenario.replace(rho=rho)
        hits = _h0_hits(cfg, (name,), thr, ts, cfg.pfa_trials, (TEST_H0, 10 + i), threads, scn)[name]
        rows.append(
            ResultRow.from_hits(
                _tag(cfg, name, rho), "pfa", hits, cfg.pfa_trials, cfg.seed,
                cfg.rule.threshold, None, scn.cos2_theta,
            )
        )
    return rows


# ------------------------------------------------------------ oracle check


@dataclass(frozen=True)
class OracleRow:
    case: str
    estimate: float
    std_error: float
    reference: float
    reference_se: float
    baseline: float | None = None

    @property
    def distance(self):
        """Difference in units of the combined standard error."""
        se = math.hypot(self.std_error, self.reference_se)
        diff = abs(self.estimate - self.reference)
        return 0.0 if diff == 0 else (diff / se if se > 0 else math.inf)

    @property
    def passed(self):
        ok = self.distance <= 3.0
        if self.baseline is not None:
            for est, se in ((self.estimate, self.std_error), (self.reference, self.reference_se)):
                ok &= abs(est - self.baseline) <= 3.0 * se or abs(est - self.baseline) < 1e-12
        return ok


@dataclass(frozen=True)
class OracleReport:
    rows: tuple = ()

    @property
    def passed(self):
        return all(r.passed for r in self.rows)

    def text(self):
        head = f"{'case':<44} {'estimate':>10} {'se':>9} {'reference':>10} {'se':>9} {'sigma':>6} {'baseline':>9}  result"
        lines = [head]
        for r in self.rows:
            base = "" if r.baseline is None else f"{r.baseline:.5f}"
            lines.append(
                f"{r.case:<44} {r.estimate:>10.5f} {r.std_error:>9.5f} {r.reference:>10.5f} "
                f"{r.reference_se:>9.5f} {r.distance:>6.2f} {base:>9}  {'PASS' if r.passed else 'FAIL'}"
            )
        return "\n".join(lines) + "\n"


def _law(name, oc):
    snr = float(db_to_linear(oc.test_snr_db))
    if name == "h0":
        return StatLaw.h0()
    if name == "matched":
        return StatLaw.matched(snr)
    if name == "mismatched":
        return StatLaw.mismatched(snr, oc.cos2_theta)
    raise ConfigError(f"unknown oracle law {name!r}")


def _spec_label(spec):
    return "+".join(f"{n}:{w:g}" for n, w in spec.stats)


def gaussian_toy_means(dim=2, offset=2.0):
    """Class means ``m0 = 0`` and ``m1 = (offset, 0, ...)``."""
    m0 = np.zeros(dim, dtype=complex)
    m1 = m0.copy()
    m1[0] = offset
    return m0, m1


def run_oracle_check(cfg):
    """Semi-analytic KNN probability versus brute force on each small configuration."""
    oc = cfg.oracle
    train_snr = float(db_to_linear(oc.train_snr_db))
    rows = []
    idx = 0
    for n_t, k, m in oc.grid:
        if n_t > 8 or k > 5:
            raise ConfigError(f"oracle grid entry {n_t}/{k}/{m} exceeds N_T <= 8, k <= 5")
        for spec in oc.specs:
            for law_name in oc.laws:
                law = _law(law_name, oc)
                est, se = semi_analytic_probability(
                    n_t, k, m, spec, oc.n, oc.k_s, law, train_snr, oc.n_outer,
                    stream(cfg.seed, ORACLE, idx, 0),
                )
                ref, ref_se = brute_force_probability(
                    n_t, k, m, spec, oc.n, oc.k_s, law, train_snr, oc.n_trials,
                    stream(cfg.seed, ORACLE, idx, 1),
                )
                baseline = exchangeable_probability(n_t, k, m) if train_snr == 0 and law_name == "h0" else None
                case = f"NT={n_t} k={k} M={m} {_spec_label(spec)} {law_name}"
                rows.append(OracleRow(case, est, se, ref, ref_se, baseline))
                idx += 1
    m0, m1 = gaussian_toy_means()
    for n_t, k, m in oc.gaussian:
        for cls in (0, 1):
            est, se = gaussian_toy_probability(
                m0, m1, 1.0, n_t, k, m, oc.n_outer, stream(cfg.seed, ORACLE, idx, 0), cls
            )
            ref, ref_se = gaussian_toy_brute_force(
                m0, m1, 1.0, n_t, k, m, oc.n_trials, stream(cfg.seed, ORACLE, idx, 1), cls
            )
            rows.append(OracleRow(f"gaussian NT={n_t} k={k} M={m} class={cls}", est, se, ref, ref_se))
            idx += 1
    return OracleReport(tuple(rows))
