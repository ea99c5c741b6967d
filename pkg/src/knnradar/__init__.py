"""KNN-based adaptive radar detectors with Monte Carlo and semi-analytic performance tools."""
from .analysis import (
    brute_force_probability,
    exchangeable_probability,
    gaussian_toy_brute_force,
    gaussian_toy_probability,
    p0_closed,
    p1_closed,
    semi_analytic_probability,
)
from .detectors import (
    FeatureSpec,
    StatPair,
    ace_stat,
    amf_stat,
    extract_feature,
    extract_features,
    kelly_ace_spec,
    kelly_amf_spec,
    kelly_stat,
    scaled_sample_covariance,
    stat_pair,
)
from .distributions import StatLaw, cdf_complex_F, sample_stat_pair
from .exceptions import *  # noqa: F401,F403
from .knn import KnnRule, TrainingSet, build_training_set, decide, decide_batch
from .scenario import (
    H0,
    H1,
    Observation,
    ScenarioConfig,
    cos2_theta,
    delta_nu_for_cos2,
    disturbance_covariance,
    draw_observation,
    draw_observations,
    steering_vector,
)

__version__ = "0.1.0"
