"""Exponential integrators for the stiff relaxation step.

All schemes advance ``df/dt = (P(f, f) - mu f) / eps`` one step of size
``dt`` with the local equilibrium ``M`` frozen at the step start (the
conserved moments do not move during relaxation).  The stiffness parameter
is ``lam = mu dt / eps``.

Families:

* ``step_if``: integrating-factor schemes over any explicit tableau; exact
  for BGK relaxation.
* ``step_if_general_mu``: the same schemes rewritten for an arbitrary
  ``mu <= mu_p``, evaluating the shifted gain at the positivity bound
  ``mu_p`` and correcting with ``lam_p - lam`` terms.
* ``step_etd1``: first-order exponential time differencing,
  ``f1 = exp(-lam) f + lam phi(lam) P(f, f)/mu``.
* ``step_tr``: truncated Wild-sum schemes, a convex combination of the
  recurrence densities plus an equilibrium tail; bilinear models only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .estimate import MuEstimate, resolve_mu
from .kinetic import DistState, KineticModel, entropy, equilibrium, moments
from .tableau import SchemeSpec, if_coeff

__all__ = [
    "phi",
    "phi_k",
    "StepContext",
    "StepReport",
    "make_context",
    "step",
    "step_if",
    "step_if_general_mu",
    "step_etd1",
    "wild_coeffs",
    "step_tr",
]

# Below this argument the phi functions switch to their series to avoid
# cancellation in (1 - exp(-z)) / z.
SERIES_CUTOFF = 1e-5


def phi(z: float) -> float:
    """phi(z) = (1 - exp(-z)) / z, extended by phi(0) = 1."""
    if z < 0:
        raise ValueError(f"phi needs z >= 0, got {z}")
    if z < SERIES_CUTOFF:
        return 1.0 - z / 2.0 + z * z / 6.0 - z**3 / 24.0
    return -math.expm1(-z) / z


def phi_k(z: float, k: int) -> float:
    """phi_k(z) = exp(-z) (1 - exp(-z))**k / z for k >= 1.

    Evaluated as exp(-z) z**(k-1) phi(z)**k, which is stable for small z;
    the limits are phi_1(0) = 1 and phi_k(0) = 0 for k >= 2.
    """
    if k < 1:
        raise ValueError("k must be a positive integer")
    if z < 0:
        raise ValueError(f"phi_k needs z >= 0, got {z}")
    return math.exp(-z) * z ** (k - 1) * phi(z) ** k


@dataclass(frozen=True)
class StepContext:
    """Everything needed to take one relaxation step.

    ``lam = mu dt / eps`` is computed once and held fixed for the step; the
    mu policy is re-evaluated per step by the callers (see
    :func:`make_context`).
    """

    model: KineticModel
    scheme: SchemeSpec
    dt: float
    eps: float
    mu: MuEstimate
    keep_stages: bool = False
    enforce_positivity: bool = False

    def __post_init__(self):
        if self.dt <= 0 or self.eps <= 0:
            raise ValueError("dt and eps must be positive")
        lam = self.mu.value * self.dt / self.eps
        if not np.isfinite(lam) or lam < 0:
            raise ValueError(f"lam = mu dt / eps = {lam} must be finite and nonnegative")

    @property
    def lam(self) -> float:
        return self.mu.value * self.dt / self.eps


@dataclass
class StepReport:
    """One step's result plus diagnostics.

    ``moment_drift`` is the largest relative change of a conserved quantity
    over the step; ``entropy_delta`` uses the clipped (diagnostic) entropy.
    """

    f_next: DistState
    stages: list[DistState] | None = None
    moment_drift: float = 0.0
    min_value: float = 0.0
    entropy_delta: float = 0.0
    warnings: list[str] = field(default_factory=list)


def make_context(model: KineticModel, scheme: SchemeSpec, f: DistState, dt: float, eps: float,
                 mu_policy: str = "loss_sup", mu_value: float | None = None, **kwargs) -> StepContext:
    """Resolve the mu policy on the current state and build a step context."""
    mu = resolve_mu(mu_policy, model, f, fixed_value=mu_value)
    return StepContext(model=model, scheme=scheme, dt=dt, eps=eps, mu=mu, **kwargs)


def _shifted_gain_values(model: KineticModel, f: DistState, mu: float) -> np.ndarray:
    """P_mu(f, f) = Q(f, f) + mu f, via the model's reference-shifted gain."""
    p_ref = model.eval_P(f)
    mu_ref = model.reference_mu(f)
    return p_ref.values + (mu - mu_ref) * f.values


def _report(model: KineticModel, f_old: DistState, values: np.ndarray,
            stages: list[DistState] | None, warnings: list[str]) -> StepReport:
    f_next = DistState(values=values, grid=f_old.grid)
    u_old = moments(model, f_old).as_array()
    u_new = moments(model, f_next).as_array()
    scale = max(float(np.abs(u_old).max()), 1e-300)
    drift = float(np.abs(u_new - u_old).max() / scale)
    h_old = entropy(model, f_old, strict=False)
    h_new = entropy(model, f_next, strict=False)
    return StepReport(
        f_next=f_next,
        stages=stages,
        moment_drift=drift,
        min_value=f_next.min_value,
        entropy_delta=h_new - h_old,
        warnings=warnings,
    )


def _positivity_floor(f: DistState) -> float:
    from .kinetic import NEGATIVE_TOL

    scale = max(float(np.abs(f.values).max()), 1e-300)
    return -(NEGATIVE_TOL if not f.is_dvm else 1e-12) * scale


def _check_stage(values: np.ndarray, index: int) -> None:
    if not np.all(np.isfinite(values)):
        raise FloatingPointError(f"non-finite values in stage {index + 1}")


def step_if(ctx: StepContext, f: DistState) -> StepReport:
    """One integrating-factor step.

    Stages combine the decayed state, the accumulated shifted-gain
    deviations, and the frozen equilibrium:

        F_i = exp(-c_i lam) f + lam sum_j A_ij(lam) (P(F_j,F_j)/mu - M)
              + (1 - exp(-c_i lam)) M,

    with the analogous weight combination for the update.  If the context
    requests positivity enforcement, a violating step is retried once with
    doubled mu before raising.
    """
    if ctx.scheme.family != "if":
        raise ValueError(f"step_if needs an IF scheme, got {ctx.scheme.family!r}")
    report = _step_if_once(ctx, f)
    if ctx.enforce_positivity and report.min_value < _positivity_floor(f):
        retry = replace(ctx, mu=MuEstimate(value=2.0 * ctx.mu.value, kind=ctx.mu.kind,
                                           guarantees_positivity=ctx.mu.guarantees_positivity))
        report = _step_if_once(retry, f)
        report.warnings.append("positivity violation: retried with doubled mu")
        if report.min_value < _positivity_floor(f):
            raise FloatingPointError(
                f"positivity violated after mu retry: min value {report.min_value:.3e}")
    return report


def _step_if_once(ctx: StepContext, f: DistState) -> StepReport:
    model, tab = ctx.model, ctx.scheme.tableau
    lam = ctx.lam
    mu = ctx.mu.value
    m_eq = equilibrium(model, moments(model, f)).values
    big_a, big_w = if_coeff(ctx.scheme, lam)
    decay = np.exp(-tab.c * lam)
    gains: list[np.ndarray] = []
    stages: list[DistState] = []
    for i in range(tab.stages):
        vals = decay[i] * f.values + (1.0 - decay[i]) * m_eq
        for j in range(i):
            if big_a[i, j] != 0.0:
                vals = vals + lam * big_a[i, j] * gains[j]
        _check_stage(vals, i)
        f_i = DistState(values=vals, grid=f.grid)
        if ctx.keep_stages:
            stages.append(f_i)
        if mu > 0.0:
            gains.append(_shifted_gain_values(model, f_i, mu) / mu - m_eq)
        else:
            gains.append(np.zeros_like(vals))
    out = np.exp(-lam) * f.values + (1.0 - np.exp(-lam)) * m_eq
    for i in range(tab.stages):
        if big_w[i] != 0.0:
            out = out + lam * big_w[i] * gains[i]
    _check_stage(out, tab.stages)
    return _report(model, f, out, stages if ctx.keep_stages else None, [])


def step_if_general_mu(ctx: StepContext, mu_p: MuEstimate, f: DistState) -> StepReport:
    """Integrating-factor step for an arbitrary mu below the positivity
    bound mu_p.

    The shifted gain is evaluated at mu_p while the exponential weights use
    lam = mu dt / eps; the difference enters through ``-(lam_p - lam)``
    corrections on the stage values.  A mu above mu_p is clamped to mu_p.
    Exceeding the single-stage convexity bound ``dt <= eps / (mu_p - mu)``
    raises a warning flag in the report.
    """
    if ctx.scheme.family != "if":
        raise ValueError(f"step_if_general_mu needs an IF scheme, got {ctx.scheme.family!r}")
    model, tab = ctx.model, ctx.scheme.tableau
    mu = min(ctx.mu.value, mu_p.value)
    mu_pv = mu_p.value
    lam = mu * ctx.dt / ctx.eps
    lam_p = mu_pv * ctx.dt / ctx.eps
    warnings = []
    if mu_pv > mu and ctx.dt > ctx.eps / (mu_pv - mu) * (1.0 + 1e-12):
        warnings.append(
            f"convexity bound exceeded: dt = {ctx.dt:.3g} > eps/(mu_p - mu) = {ctx.eps / (mu_pv - mu):.3g}")
    m_eq = equilibrium(model, moments(model, f)).values
    big_a, big_w = if_coeff(ctx.scheme, lam)
    decay = np.exp(-tab.c * lam)
    gains_p: list[np.ndarray] = []  # P_p(F_j, F_j) / mu_p
    values: list[np.ndarray] = []
    stages: list[DistState] = []
    for i in range(tab.stages):
        row = big_a[i, :i]
        vals = decay[i] * f.values + (1.0 - decay[i] - lam * row.sum()) * m_eq
        for j in range(i):
            if row[j] != 0.0:
                vals = vals + row[j] * (lam_p * gains_p[j] - (lam_p - lam) * values[j])
        _check_stage(vals, i)
        f_i = DistState(values=vals, grid=f.grid)
        values.append(vals)
        if ctx.keep_stages:
            stages.append(f_i)
        gains_p.append(_shifted_gain_values(model, f_i, mu_pv) / mu_pv)
    out = np.exp(-lam) * f.values + (1.0 - np.exp(-lam) - lam * big_w.sum()) * m_eq
    for i in range(tab.stages):
        if big_w[i] != 0.0:
            out = out + big_w[i] * (lam_p * gains_p[i] - (lam_p - lam) * values[i])
    _check_stage(out, tab.stages)
    return _report(model, f, out, stages if ctx.keep_stages else None, warnings)


def step_etd1(ctx: StepContext, f: DistState) -> StepReport:
    """First-order exponential-time-differencing step."""
    if ctx.scheme.family != "etd1":
        raise ValueError(f"step_etd1 needs an etd1 scheme, got {ctx.scheme.family!r}")
    lam = ctx.lam
    mu = ctx.mu.value
    if mu > 0.0:
        gain = _shifted_gain_values(ctx.model, f, mu) / mu
    else:
        gain = f.values
    out = math.exp(-lam) * f.values + lam * phi(lam) * gain
    _check_stage(out, 0)
    return _report(ctx.model, f, out, None, [])


def wild_coeffs(model: KineticModel, f0: DistState, m: int, mu: float | None = None) -> list[DistState]:
    """Densities of the Wild recurrence
    ``f_{k+1} = (1/(k+1)) sum_h P(f_h, f_{k-h}) / mu`` for k < m.

    Needs a bilinear model; every coefficient keeps the moments of ``f0``.
    Returns ``[f_0, ..., f_m]``.
    """
    if not getattr(model, "bilinear", False):
        raise ValueError("model not bilinear: Wild coefficients need a bilinear gain")
    if not 1 <= int(m) <= 16:
        raise ValueError("truncation order must lie in 1..16")
    mu_ref = model.reference_mu(f0)
    mu = mu_ref if mu is None else float(mu)
    if mu <= 0:
        raise ValueError("mu must be positive")
    coeffs = [f0]
    for k in range(int(m)):
        acc = np.zeros_like(f0.values)
        for h in range(k + 1):
            fh, fk = coeffs[h], coeffs[k - h]
            pair = model.eval_P(fh, fk).values
            if mu != mu_ref:
                # shift the bilinear form to the requested rate (equal-mass shell)
                pair = pair + (mu - mu_ref) * 0.5 * (fh.values + fk.values)
            acc = acc + pair
        coeffs.append(DistState(values=acc / ((k + 1) * mu), grid=f0.grid))
    return coeffs


def step_tr(ctx: StepContext, f: DistState) -> StepReport:
    """Truncated Wild-sum step: a convex combination of the recurrence
    densities with geometric weights and an equilibrium tail,

        f1 = exp(-lam) sum_k tau^k f_k + tau^(m+1) M,   tau = 1 - exp(-lam).
    """
    if ctx.scheme.family != "tr":
        raise ValueError(f"step_tr needs a tr scheme, got {ctx.scheme.family!r}")
    m = ctx.scheme.tr_order
    lam = ctx.lam
    tau = -math.expm1(-lam)
    decay = math.exp(-lam)
    coeffs = wild_coeffs(ctx.model, f, m, mu=ctx.mu.value)
    m_eq = equilibrium(ctx.model, moments(ctx.model, f)).values
    out = tau ** (m + 1) * m_eq
    weight = decay
    for k in range(m + 1):
        out = out + weight * coeffs[k].values
        weight *= tau
    _check_stage(out, 0)
    return _report(ctx.model, f, out, coeffs if ctx.keep_stages else None, [])


def step(ctx: StepContext, f: DistState) -> StepReport:
    """Dispatch one relaxation step according to the scheme family."""
    if ctx.scheme.family == "if":
        return step_if(ctx, f)
    if ctx.scheme.family == "etd1":
        return step_etd1(ctx, f)
    return step_tr(ctx, f)
