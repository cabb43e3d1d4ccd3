"""Estimators for the collision-spectrum constant mu and the quadratic
Fourier metric d2 used by the contractivity diagnostics.

The loss-part bound ``mu_p`` and the particle-sample bound
``mu_p_particle_bound`` guarantee a nonnegative shifted gain; the average
collision frequency ``mu_a`` and the linearized-rate estimate ``mu_s`` are
sharper but carry no positivity guarantee.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kinetic import DistState, KineticModel, eval_Q, moments

__all__ = [
    "MuEstimate",
    "MU_POLICIES",
    "mu_p",
    "mu_p_particle_bound",
    "mu_a",
    "mu_s",
    "resolve_mu",
    "d2_distance",
]

MU_POLICIES = ("loss_sup", "particle_bound", "average", "linearized", "fixed")

# Nodes with |f - M| below this fraction of the maximum deviation are
# excluded from the linearized-rate sup (the ratio is 0/0 at equilibrium).
MU_S_THRESHOLD = 1e-10


@dataclass(frozen=True)
class MuEstimate:
    """A collision-rate estimate.

    ``guarantees_positivity`` is True only for the loss_sup and
    particle_bound kinds.
    """

    value: float
    kind: str
    guarantees_positivity: bool

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("mu must be nonnegative")
        if self.guarantees_positivity and self.kind not in ("loss_sup", "particle_bound"):
            raise ValueError(f"kind {self.kind!r} cannot guarantee positivity")


def _kernel_distances(f: DistState) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Node positions, per-node masses, and pairwise distances for a state."""
    if f.is_dvm:
        from .kinetic import DVM_VELOCITIES, DVM_WEIGHTS

        pos = DVM_VELOCITIES[:, None]
        mass = DVM_WEIGHTS * f.values
    else:
        ax = f.grid.axes()
        pos = np.stack([a.ravel() for a in ax], axis=1)
        mass = f.grid.weight * f.values.ravel()
    dist = np.sqrt(((pos[:, None, :] - pos[None, :, :]) ** 2).sum(-1))
    return pos, mass, dist


def _check_nonnegative(f: DistState) -> None:
    scale = float(np.abs(f.values).max())
    if scale > 0 and f.values.min() < -1e-8 * scale:
        raise ValueError(f"negative distribution values beyond tolerance: min = {f.values.min():.3e}")


def _mu_p_value(f: DistState, gamma: float) -> float:
    """Loss-bound value on the nonnegative part of f (policy layer clips
    spectral truncation negatives)."""
    if gamma == 0.0:
        return float(moments_mass(f))
    _, mass, dist = _kernel_distances(f)
    conv = dist**gamma @ np.maximum(mass, 0.0)
    support = np.maximum(mass, 0.0) > 0.0
    return float(conv[support].max()) if support.any() else 0.0


def mu_p(f: DistState, gamma: float) -> MuEstimate:
    """Loss-part bound: sup over the support of f of the |v - v'|^gamma
    convolution against f.  Restricting the sup to nodes where f > 0 matches
    the positivity requirement (the loss rate only matters where f lives).
    """
    if not 0.0 <= gamma < 3.0:
        raise ValueError("gamma must lie in [0, 3)")
    _check_nonnegative(f)
    return MuEstimate(value=_mu_p_value(f, gamma), kind="loss_sup", guarantees_positivity=True)


def moments_mass(f: DistState) -> float:
    if f.is_dvm:
        from .kinetic import DVM_WEIGHTS

        return float((DVM_WEIGHTS * f.values).sum())
    return float(f.grid.weight * f.values.sum())


def mu_p_particle_bound(velocities, gamma: float) -> MuEstimate:
    """Sample bound 2^gamma * max_i |v_i - mean|^gamma.

    Dominates the pairwise average max_i (1/n) sum_j |v_i - v_j|^gamma at
    O(n) cost instead of O(n^2).
    """
    v = np.asarray(velocities, dtype=float)
    if v.size == 0:
        raise ValueError("empty particle list")
    if v.ndim == 1:
        v = v[:, None]
    u = v.mean(axis=0)
    radius = float(np.sqrt(((v - u) ** 2).sum(axis=1)).max())
    return MuEstimate(value=2.0**gamma * radius**gamma, kind="particle_bound", guarantees_positivity=True)


def _mu_a_value(f: DistState, gamma: float) -> float:
    if gamma == 0.0:
        rho = moments_mass(f)
        return rho * rho
    _, mass, dist = _kernel_distances(f)
    m = np.maximum(mass, 0.0)
    return float(m @ dist**gamma @ m)


def mu_a(f: DistState, gamma: float) -> MuEstimate:
    """Average collision frequency: the double quadrature of
    |v - v'|^gamma f(v) f(v')."""
    if not 0.0 <= gamma < 3.0:
        raise ValueError("gamma must lie in [0, 3)")
    _check_nonnegative(f)
    return MuEstimate(value=_mu_a_value(f, gamma), kind="average", guarantees_positivity=False)


def mu_s(model: KineticModel, f: DistState) -> MuEstimate:
    """Linearized-rate estimate: sup over admissible nodes of |Q(f,f)/(f - M)|.

    Nodes with |f - M| below 1e-10 of the peak deviation are excluded; at
    equilibrium (no admissible node) the estimate is zero.
    """
    q = eval_Q(model, f)
    m = model.equilibrium(moments(model, f))
    dev = f.values - m.values
    scale = float(np.abs(dev).max())
    if scale <= 1e-14 * float(np.abs(f.values).max()):
        # at equilibrium (up to roundoff) the quotient is 0/0 everywhere
        return MuEstimate(value=0.0, kind="linearized", guarantees_positivity=False)
    admissible = np.abs(dev) > MU_S_THRESHOLD * scale
    if not admissible.any():
        return MuEstimate(value=0.0, kind="linearized", guarantees_positivity=False)
    value = float(np.abs(q.values[admissible] / dev[admissible]).max())
    return MuEstimate(value=value, kind="linearized", guarantees_positivity=False)


def resolve_mu(policy: str, model: KineticModel, f: DistState, fixed_value: float | None = None) -> MuEstimate:
    """Evaluate a configured mu policy for a model and state.

    The positivity-guaranteeing policies fold in each model's kernel
    normalization so the shifted gain stays nonnegative: mu0 for BGK (its
    exact rate), rho for Broadwell, S*rho for the spectral Maxwell model.
    """
    from .kinetic import BgkModel, SpectralMaxwellModel

    if policy == "fixed":
        if fixed_value is None:
            raise ValueError("fixed mu policy needs a value")
        return MuEstimate(value=float(fixed_value), kind="fixed", guarantees_positivity=False)
    if policy == "linearized":
        return mu_s(model, f)
    if isinstance(model, BgkModel):
        # the relaxation rate is the exact spectrum of the loss part
        if policy in ("loss_sup", "particle_bound"):
            return MuEstimate(value=model.mu0, kind=policy, guarantees_positivity=True)
        if policy == "average":
            return MuEstimate(value=model.mu0, kind="average", guarantees_positivity=False)
        raise ValueError(f"unknown mu policy {policy!r}; expected one of {MU_POLICIES}")
    kernel_scale = model.kernel_s if isinstance(model, SpectralMaxwellModel) else 1.0
    if policy == "loss_sup":
        value = _mu_p_value(f, model.gamma)
        return MuEstimate(value=kernel_scale * value, kind="loss_sup", guarantees_positivity=True)
    if policy == "particle_bound":
        # sample bound applied to the weighted support, scaled by the mass
        pos, mass, _dist = _support_positions(f)
        u = (pos * mass[:, None]).sum(0) / mass.sum()
        radius = float(np.sqrt(((pos - u) ** 2).sum(axis=1)).max())
        value = 2.0**model.gamma * radius**model.gamma * mass.sum()
        return MuEstimate(value=kernel_scale * value, kind="particle_bound", guarantees_positivity=True)
    if policy == "average":
        value = _mu_a_value(f, model.gamma)
        return MuEstimate(value=kernel_scale * value, kind="average", guarantees_positivity=False)
    raise ValueError(f"unknown mu policy {policy!r}; expected one of {MU_POLICIES}")


def _support_positions(f: DistState) -> tuple[np.ndarray, np.ndarray, None]:
    """Node positions and masses restricted to the support of f."""
    if f.is_dvm:
        from .kinetic import DVM_VELOCITIES, DVM_WEIGHTS

        pos = DVM_VELOCITIES[:, None]
        mass = DVM_WEIGHTS * np.maximum(f.values, 0.0)
    else:
        ax = f.grid.axes()
        pos = np.stack([a.ravel() for a in ax], axis=1)
        mass = f.grid.weight * np.maximum(f.values.ravel(), 0.0)
    keep = mass > 0
    return pos[keep], mass[keep], None


def _grid_transform(f: DistState) -> tuple[np.ndarray, np.ndarray]:
    """DFT of grid values times weights (point masses at the nodes), and the
    squared physical frequencies; the zero mode is first."""
    grid = f.grid
    n = grid.points
    freqs = 2.0 * np.pi * np.fft.fftfreq(n, d=grid.h)
    if grid.dim == 1:
        hat = np.fft.fft(f.values) * grid.weight
        # fft computes sum f_j exp(-2i pi j k / n); the node offset -L is a
        # pure phase shared by both states, so it cancels in differences,
        # but keep transforms comparable by applying it anyway.
        phase = np.exp(-1j * freqs * (-grid.extent))
        return hat * phase, freqs**2
    hat = np.fft.fft2(f.values) * grid.weight
    phase = np.exp(-1j * np.add.outer(freqs, freqs) * (-grid.extent))
    xi2 = np.add.outer(freqs**2, freqs**2)
    return hat * phase, xi2


def d2_distance(f: DistState, g: DistState) -> float:
    """Quadratic Fourier distance sup_xi |fhat - ghat| / |xi|^2 over the
    nonzero discrete frequencies.

    Both states must live on the same grid and share mass, momentum, and
    energy to 1e-8, otherwise the low-frequency quotient is meaningless.
    """
    if f.is_dvm or g.is_dvm or f.grid != g.grid:
        raise ValueError("d2 needs two states on one velocity grid")
    uf = _grid_moments_array(f)
    ug = _grid_moments_array(g)
    scale = max(float(np.abs(uf).max()), 1.0)
    if np.abs(uf - ug).max() > 1e-8 * scale:
        raise ValueError(f"moments differ beyond tolerance: {uf} vs {ug}")
    fhat, xi2 = _grid_transform(f)
    ghat, _ = _grid_transform(g)
    ratio = np.abs(fhat - ghat).ravel()[1:] / xi2.ravel()[1:]  # zero mode excluded
    mask = xi2.ravel()[1:] > 0
    return float(ratio[mask].max())


def _grid_moments_array(f: DistState) -> np.ndarray:
    from .kinetic import _grid_moments

    return _grid_moments(f.grid, f.values).as_array()
