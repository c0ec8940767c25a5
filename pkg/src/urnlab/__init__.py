"""urnlab: simulation and asymptotic analysis of reinforcement urns
with general feedback.

Submodules:
    feedback    feedback families, parsing, tail sums, classification
    urn         embedded-chain and continuous-time simulators
    asymptotics monopoly probabilities, attraction domains, limit shares
    scaling     mean-path ODE, fluctuation SDE, quadratic variation
    harness     Monte Carlo estimation, KS tests, experiment registry
    cli         command-line entry point
"""

from . import asymptotics, feedback, harness, scaling, urn
from .asymptotics import (
    classify_domain,
    exact_tmon_probability,
    limit_shares,
    regime_report,
    smon_lower_bound,
    tmon_bounds,
)
from .feedback import (
    Constant,
    Custom,
    Exponential,
    Feedback,
    Log,
    LogLinear,
    Polynomial,
    StretchedExp,
    classify,
    parse_feedback,
    tail_sum,
)
from .harness import monte_carlo, run_experiment
from .scaling import (
    beta_scaling,
    ensemble_fclt,
    fixed_points,
    integrate_mean_ode,
    quadratic_variation,
    vector_field,
)
from .urn import (
    sample_explosion_times,
    simulate,
    simulate_embedding,
    simulate_many,
    smon_estimate,
)

__version__ = "0.1.0"

__all__ = [
    "feedback", "urn", "asymptotics", "scaling", "harness",
    "Feedback", "Polynomial", "Exponential", "StretchedExp",
    "LogLinear", "Log", "Constant", "Custom",
    "parse_feedback", "tail_sum", "classify",
    "simulate", "simulate_many", "simulate_embedding",
    "sample_explosion_times", "smon_estimate",
    "classify_domain", "tmon_bounds", "exact_tmon_probability",
    "smon_lower_bound", "limit_shares", "regime_report",
    "integrate_mean_ode", "vector_field", "fixed_points",
    "ensemble_fclt", "quadratic_variation", "beta_scaling",
    "monte_carlo", "run_experiment",
    "__version__",
]
