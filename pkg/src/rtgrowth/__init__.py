"""Linear Rayleigh-Taylor stability of two stratified viscous layers.

Largest growth rates, unstable normal modes and stability thresholds for
fluids with elasticity, an impressed magnetic field and surface tension,
computed one horizontal Fourier mode at a time.
"""

__version__ = "0.1.0"

from .discretize import ModeOperators, build_mode_operators, rayleigh_quotient_bound
from .errors import *  # noqa: F401,F403
from .growth import (
    GrowthResult,
    NormalMode,
    build_normal_mode,
    find_neutral_bound,
    normal_mode_residual,
    solve_growth_rate,
)
from .model import ModeProfile, RTParameters, WaveVector, evaluate_functionals, validate_parameters
from .spectrum import AlphaSample, ModeCache, ModeLattice, alpha_of_s, limit_alpha_at_zero, min_constrained_eigen
from .stokes import PressureProfile, StokesModeSolution, pressure_for_eigenmode, solve_mode_stokes
from .thresholds import (
    ThresholdReport,
    critical_coefficient,
    dirichlet_approximation,
    discriminant,
    horizontal_field_destabilizer,
    poincare_constant,
    surface_tension_threshold,
    vertical_field_threshold,
)
