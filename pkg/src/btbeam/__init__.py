"""Numerical laboratory for a clamped extensible beam with nonlocal energy damping."""

from .analysis import (
    DecayRegressor,
    FitResult,
    containment_report,
    convergence_study,
    fit_power_exponent,
    local_decay_rate,
    non_exponential_verdict,
)
from .core import EnergyBreakdown, EnergyTrace, InitialCondition, ModelParams, State, make_initial, validate_params
from .dynamics import dissipation_rate, energy, lipschitz_ratio, nonlocal_coefficient, rhs
from .envelope import (
    EnvelopeConstants,
    NakaoInput,
    envelope_constants,
    lower_envelope,
    nakao_bound,
    upper_envelope,
    verify_nakao_hypothesis,
)
from .integrate import SchemeConfig, simulate, step
from .operators import (
    DiscreteOperators,
    assemble_operators,
    biharmonic_min_eigenvalue,
    gradient_embedding_constant,
    h_inner,
    stiffness_eigendecomposition,
)

__version__ = "0.1.0"
