"""Random geometric graphs on the d-dimensional torus with L_q geometry.

Samplers, exact one-dimensional pattern probabilities, high-precision signed
subgraph weights for the L-infinity model, signed-cycle statistics,
detection and dimension-estimation tools, and numerical bound evaluators.
"""

from importlib.metadata import PackageNotFoundError, version as _version

try:
    __version__ = _version("artifact")
except PackageNotFoundError:  # pragma: no cover - source checkout without install
    __version__ = "0.1.0"

from ._accel import BACKEND
from .errors import InternalConsistencyError, TorusRGGError, UnsupportedGeometryError, ValidationError
from .geometry import ModelParams, TorusPoint, circ_dist, derive_tau_lambda, lq_dist, phi, sum_uq_cdf
from .graph import Graph, LatentSample, sample_er, sample_hypercube_rag, sample_rgg, sample_rgg_1d_complement
from .hypercube import SigmaSpec, parse_sigma
from .patterns import EdgePattern, builtin, cycle, parse_pattern, pattern_facts
from .polymer import chi, err, expected_weight_1d, psi
from .expansion import (
    expected_signed_cycle_mean,
    expected_weight,
    params_for,
    signed_cycle_asymptotic,
    signed_weight,
    signed_weight_mc,
    unsigned_graph_asymptotic,
    variance_predictor,
)
from .statistics import ModelSpec, StatSpec, mc_run, signed_4cycle_count, signed_triangle_count
from .detection import (
    TestOutcome,
    PhaseRegion,
    detect,
    estimate_dimension,
    phase_diagram,
    power_curve,
    predicted_success,
)
from .bounds import (
    gamma_moment_mc,
    hypercube_influences,
    hypercube_tv_bound,
    kl_bound,
    low_degree_advantage_small,
    overlap_f,
    sigma_conv_moment_linfty,
    small_ball_check,
)
from .rng import RngSpec

__all__ = [name for name in dir() if not name.startswith("_")]
