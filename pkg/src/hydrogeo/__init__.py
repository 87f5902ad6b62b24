"""Riemannian geometry of density manifolds with nonlinear mobility.

Pseudo-spectral discretisation on the periodic interval: the Onsager
response operator and its pseudo-inverse metric, Levi-Civita connection,
Riemann and sectional curvature, gradient flows, geodesics, parallel
transport, least-action distance, and a brute-force finite-dimensional
oracle for cross-checking the geometry.
"""
__version__ = "0.1.0"

from .errors import (AdmissibilityError, ConditioningError, ConfigError,  # noqa: F401
                     DegeneratePlaneError, HydrogeoError, InvalidArgument)
from .grid import Grid, make_grid  # noqa: F401
from .models import (DensityField, MobilityModel, bregman_divergence,  # noqa: F401
                     builtin_model, custom_model, default_length, equilibrium)
from .operator import (apply_response, metric_inner, metric_inner_tangent,  # noqa: F401
                       response_laplacian, solve_potential)
from .geometry import (GammaOrder, commutator, commutator_1d_closed,  # noqa: F401
                       connection_form, gamma, hessian_form, levi_civita)
from .curvature import (Method, lemma8_residual, plane_z, riemann, riemann_1d,  # noqa: F401
                        riemann_general, sectional, torus_correction)
from .dynamics import (FlowConfig, OptimizerConfig, Trajectory, distance,  # noqa: F401
                       geodesic_flow, gradient_flow, parallel_transport)
