"""Born series forward model for radial diffusion and its inversion schemes."""

from .born_inversion import (
    ConvergenceDiagnostics,
    InversionConfig,
    IterationTrace,
    Method,
    diagnostics,
    eta_projection,
    fast_iterate,
    ibs_iterate,
    ibs_terms,
    invert,
    newton_iterate,
    reduced_ibs_terms,
    reduced_iterate,
)
from .finite_model import FiniteBornModel
from .linalg import RegularizedInverse, solve, svd, truncated_pinv
from .radial_model import (
    ModelParams,
    RadialForwardModel,
    RadialGrid,
    assemble_model,
    forward_exact,
    ground_truth,
)

__version__ = "0.1.0"
