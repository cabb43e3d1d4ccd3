"""Exponential Runge-Kutta integrators for stiff kinetic relaxation equations.

The package splits into velocity-space models (:mod:`exkin.kinetic`), scheme
definitions and certificates (:mod:`exkin.tableau`), rate estimators and the
quadratic Fourier metric (:mod:`exkin.estimate`), the integrators themselves
(:mod:`exkin.exprk`), a one-dimensional transport/splitting layer
(:mod:`exkin.transport`), and the experiment harness
(:mod:`exkin.experiments`, driven by the ``exkin`` CLI).
"""

from .estimate import MuEstimate, d2_distance, mu_a, mu_p, mu_p_particle_bound, mu_s, resolve_mu
from .exprk import (
    StepContext,
    StepReport,
    make_context,
    phi,
    phi_k,
    step,
    step_etd1,
    step_if,
    step_if_general_mu,
    step_tr,
    wild_coeffs,
)
from .kinetic import (
    BgkModel,
    BroadwellModel,
    DistState,
    MomentVector,
    SpectralMaxwellModel,
    VelocityGrid,
    entropy,
    equilibrium,
    eval_P,
    eval_Q,
    moments,
    reference_mu,
)
from .tableau import (
    ButcherTableau,
    Certificate,
    SchemeSpec,
    certify,
    check_ap,
    check_contractive,
    check_convex_if,
    if_coeff,
    make_underlying,
    parse_scheme,
    stability_function,
    tableau_from_config,
)
from .transport import PhaseState, advect, free_transport, profile, sod_setup, split_step

__version__ = "0.1.0"
