"""
Adaptive statistics and the features fed to the KNN rule
========================================================

Kelly's detector, the AMF and the ACE all reduce to two numbers per
observation: t~ and the loss factor beta. This walk-through draws one
observation, checks those identities, and builds both kinds of feature.
"""
import numpy as np

from knnradar import (
    H1,
    FeatureSpec,
    ScenarioConfig,
    ace_stat,
    amf_stat,
    draw_observation,
    extract_feature,
    kelly_amf_spec,
    kelly_stat,
    scaled_sample_covariance,
    stat_pair,
)
from knnradar.rng import stream

cfg = ScenarioConfig(n=8, k_s=16, snr_db=12.0)
obs = draw_observation(H1, cfg, stream(0, 1))
v = cfg.nominal_steering
s = scaled_sample_covariance(obs.r)

pair = stat_pair(obs.z, s, v)
t, beta = float(pair.t_tilde), float(pair.beta)
print(f"t~ = {t:.4f}, beta = {beta:.4f}")

# the classical statistics are functions of (t~, beta)
print("Kelly ", kelly_stat(obs.z, s, v), "=", t / (1 + t))
print("AMF   ", amf_stat(obs.z, s, v), "=", t / beta)
print("ACE   ", ace_stat(obs.z, s, v), "=", t / (t + 1 - beta))

# stacked feature: d_j * t~ * f_j(beta), here Kelly plus 0.7 * AMF
print("stacked feature:", extract_feature(obs, v, kelly_amf_spec(0.7)))

# raw feature: the whitened CUT as 2N reals
x = extract_feature(obs, v, FeatureSpec.raw())
print("raw feature length", x.shape[0], "norm", np.linalg.norm(x))
