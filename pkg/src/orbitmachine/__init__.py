"""Shift-and-feed operator machines and their orbit estimates.

The package builds a block-diagonal operator on ``l2^d (+) X^(d-1)`` whose
orbits blow up exactly above a chosen closed symmetric set of directions,
and provides exact-arithmetic tools to check every quantitative estimate
that goes into it.
"""

__version__ = "0.1.0"

from .carousel import (  # noqa: F401
    CarouselParams,
    CarouselProfile,
    EstimateReport,
    PNorm,
    estimate_constant_L,
    feed_vector,
    profile_norm,
    shift_apply,
    state_at,
    step,
    verify_estimates,
)
from .jordan import OrbitClass, classify, decompose, orbit_oracle  # noqa: F401
from .machine import (  # noqa: F401
    MachineConfig,
    build_machine,
    dense_oracle,
    divergence_trace,
    near_return,
    orbit_norm,
    tail_bound,
    weak_probe,
)
from .schedule import Variant, build_schedule, check_invariants  # noqa: F401
from .sphere import SymmetricSet, UnitVector, build_net, rho  # noqa: F401
from .symbasis import (  # noqa: F401
    case1_system,
    case3_system,
    equivalence_estimate,
    lambda_mu,
    shift_simulation_check,
    unit_system,
)
