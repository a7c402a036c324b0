"""Approximating Kahler metrics near a divisor at infinity, at desk scale.

Exact truncated-series construction of the order-by-order metric
rescalings, a brute-force volume-quotient expansion used as the coefficient
arbiter, numeric Monge-Ampere solving on radial reductions, and a decay
verification lab for distance, volume growth and curvature rates.
"""

from .divisor import (
    ContextMismatchError,
    DivisorModelError,
    SectionCoeff,
    SpectralDivisor,
    constants_only,
    laplacian_apply,
    shifted_solve,
)
from .geometry import (
    GeometryError,
    LogConstant,
    ModelGeometry,
    NormalizationError,
    PositivityError,
    default_geometry,
    f_phi_compute,
    normalize_background,
    omega_phi_decompose,
)
from .induction import (
    InductionObstruction,
    MetricState,
    assemble_epsilon_metric,
    chato_update,
    down_band,
    elimination_shift,
    induction_step,
    initial_state,
    ma_quotient_oracle,
    run_induction,
    up_band,
)
from .rationals import GaussianRational, gq
from .series import FormalSeries, LogDepthOverflowError, SeriesError, real_pair

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
