"""dwlab: a numerical laboratory for damped wave equations.

Studies how oscillations of a scale-invariant damping coefficient b(t) ~ 1/t
shape the energy decay of u'' + b(t) u' + A u = 0: mode-level integration in
Cartesian and polar form, model-coefficient decay-rate reproduction,
constructive resonant coefficients that slow the decay, and numerical
verification of the explicit decay bounds and oscillating-integral estimates
behind them.
"""

__version__ = "0.1.0"

from .analysis import (
    BoundReport,
    DecayFit,
    fit_decay_exponent,
    reproduce_table1,
    verify_hyperbolic,
    verify_parabolic_split,
    verify_pde_general,
    verify_prop_main_1,
    verify_prop_main_2,
)
from .damping import (
    DampingCoefficient,
    DampingDomainError,
    PinchedRandomSpec,
    Table1Row,
    make_constant,
    make_custom_blend,
    make_fast_oscillation,
    make_pinched_random,
    make_power,
    make_table1_coefficient,
)
from .modeode import (
    IntegratorConfig,
    ModeState,
    ModeTrajectory,
    OutputGrid,
    PolarState,
    constant_oracle,
    find_t1,
    integrate_mode,
    integrate_polar,
    mode_propagator,
)
from .oscint import (
    check_gamma_inequality,
    check_lemma_int_phi_psi,
    check_lemma_osc_int,
    check_lemma_s_alpha,
    gamma_fn,
    osc_quad,
)
from .resonance import (
    ResonantDamping,
    build_resonant,
    measure_resonant_decay,
    verify_limit_B,
    verify_theta_equals_eta,
)
from .spectral import (
    InitialData,
    SpectralModel,
    build_resonant_pde_data,
    energy_operator_norm,
    synthesize_energy,
)

__all__ = [
    "__version__",
    "BoundReport", "DecayFit", "fit_decay_exponent", "reproduce_table1",
    "verify_hyperbolic", "verify_parabolic_split", "verify_pde_general",
    "verify_prop_main_1", "verify_prop_main_2",
    "DampingCoefficient", "DampingDomainError", "PinchedRandomSpec", "Table1Row",
    "make_constant", "make_custom_blend", "make_fast_oscillation",
    "make_pinched_random", "make_power", "make_table1_coefficient",
    "IntegratorConfig", "ModeState", "ModeTrajectory", "OutputGrid", "PolarState",
    "constant_oracle", "find_t1", "integrate_mode", "integrate_polar",
    "mode_propagator",
    "check_gamma_inequality", "check_lemma_int_phi_psi", "check_lemma_osc_int",
    "check_lemma_s_alpha", "gamma_fn", "osc_quad",
    "ResonantDamping", "build_resonant", "measure_resonant_decay",
    "verify_limit_B", "verify_theta_equals_eta",
    "InitialData", "SpectralModel", "build_resonant_pde_data",
    "energy_operator_norm", "synthesize_energy",
]
