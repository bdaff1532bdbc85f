"""Sparse recovery with a partially known support.

Douglas-Rachford solver for l1 minimization outside a known support under
an l2 fidelity tube, stability constants of the associated recovery
bounds, RIP radius estimation and the cancel-then-recover alternative.
"""

from ._kernels import BACKEND
from .analysis import (
    BoundCheck,
    BoundReport,
    RipEstimate,
    certified_radii,
    ctr_constants,
    mu_sk,
    rip_radius,
    theorem_constants,
    verify_bound,
    verify_ctr_bound,
)
from .ctr import CtrProblem, CtrRecovery, build_ctr, cancel, recover_ctr
from .numerics import (
    NumericalError,
    SvdFactorization,
    least_squares,
    nullspace_projector,
    pseudoinverse,
    range_projector,
    svd,
)
from .sensing import Measurement, SensingOperator, make_ensemble, measure
from .signals import (
    SupportSet,
    best_k_term,
    compressibility_error,
    generate_signal,
    known_support,
    restrict,
    support_from_threshold,
)
from .solver import (
    InfeasibleProblemError,
    OptimalityCertificate,
    RecoveryResult,
    SolverConfig,
    check_optimality,
    project_tube,
    prox_l1_outside,
    solve_bp_equality,
    solve_bpdn,
    solve_ibpdn,
)

__version__ = "0.1.0"
