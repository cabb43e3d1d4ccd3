"""Velocity-space discretizations, Maxwellian equilibria, and collision models.

Three concrete models share one interface:

* :class:`BgkModel` relaxes toward the local Maxwellian at a fixed rate; its
  shifted gain ``P(f, f) = mu0 * M[U(f)]`` is not bilinear.
* :class:`BroadwellModel` is the three-speed discrete-velocity model with
  velocities (+1, 0, -1) and a doubly counted zero state; its collision
  operator is a genuine symmetric bilinear form.
* :class:`SpectralMaxwellModel` evaluates the two-dimensional constant-kernel
  (Maxwell molecule) collision operator by a truncated Fourier-Galerkin
  convolution on a periodized velocity box.

Every model supplies a reference rate ``mu`` such that the shifted gain
``P(f, f) = Q(f, f) + mu * f`` is (up to spectral truncation) nonnegative and
``<m P(f, f)> = mu <m f>`` on the collision invariants.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "VelocityGrid",
    "DistState",
    "MomentVector",
    "BgkModel",
    "BroadwellModel",
    "SpectralMaxwellModel",
    "KineticModel",
    "moments",
    "equilibrium",
    "eval_P",
    "eval_Q",
    "entropy",
    "reference_mu",
    "maxwellian_values",
]

# Transient negatives from Fourier truncation are tolerated (and clipped in
# entropy evaluation) up to this fraction of max|f|; larger ones set the
# state's `negative_flagged` bit.
NEGATIVE_TOL = 1e-8

# Broadwell velocities and cell multiplicities: the zero state counts twice.
DVM_VELOCITIES = np.array([1.0, 0.0, -1.0])
DVM_WEIGHTS = np.array([1.0, 2.0, 1.0])


@dataclass(frozen=True)
class VelocityGrid:
    """Uniform periodic velocity grid on [-L, L]^dim.

    Nodes sit at ``-L + j*h`` with ``h = 2L/N``; an even ``N`` puts a node at
    the origin and makes the node set symmetric up to the periodic
    identification of the two endpoints.  The quadrature weight is ``h**dim``.
    """

    dim: int
    extent: float
    points: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError("grid dimension must be 1 or 2")
        if self.extent <= 0:
            raise ValueError("extent must be positive")
        if self.points < 2 or self.points % 2:
            raise ValueError("points per axis must be even and positive")

    @property
    def h(self) -> float:
        return 2.0 * self.extent / self.points

    @property
    def weight(self) -> float:
        return self.h**self.dim

    def nodes(self) -> np.ndarray:
        return -self.extent + self.h * np.arange(self.points)

    def axes(self) -> tuple[np.ndarray, ...]:
        """Node coordinates broadcast to the grid shape, one array per axis."""
        n = self.nodes()
        if self.dim == 1:
            return (n,)
        return (n[:, None] * np.ones_like(n)[None, :], np.ones_like(n)[:, None] * n[None, :])

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points,) * self.dim

    def speed_squared(self) -> np.ndarray:
        ax = self.axes()
        return sum(a * a for a in ax)


@dataclass(frozen=True)
class DistState:
    """Distribution values, either on a :class:`VelocityGrid` or as the
    Broadwell triple (f_plus, f_zero, f_minus) when ``grid`` is None."""

    values: np.ndarray
    grid: VelocityGrid | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(values)):
            raise ValueError("distribution values must be finite")
        if self.grid is None:
            if values.shape != (3,):
                raise ValueError("dvm states hold exactly three values")
        elif values.shape != self.grid.shape:
            raise ValueError(f"values shape {values.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "values", values)

    @classmethod
    def on_grid(cls, grid: VelocityGrid, values: np.ndarray) -> "DistState":
        return cls(values=values, grid=grid)

    @classmethod
    def dvm(cls, f_plus: float, f_zero: float, f_minus: float) -> "DistState":
        return cls(values=np.array([f_plus, f_zero, f_minus], dtype=float))

    @property
    def is_dvm(self) -> bool:
        return self.grid is None

    @property
    def min_value(self) -> float:
        return float(self.values.min())

    @property
    def negative_flagged(self) -> bool:
        """True when negatives exceed the spectral tolerance."""
        scale = float(np.abs(self.values).max())
        return self.min_value < -NEGATIVE_TOL * scale if scale > 0 else False


@dataclass(frozen=True)
class MomentVector:
    """Conserved macroscopic state.

    Grid models carry (rho, momentum vector, energy) with the derived
    temperature ``T = (2E/rho - |u|^2)/dim``; the Broadwell model carries its
    invariant pair (rho, m) in ``rho`` and ``momentum[0]``.
    """

    rho: float
    momentum: np.ndarray
    energy: float | None = None
    temperature: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "momentum", np.atleast_1d(np.asarray(self.momentum, dtype=float)))

    @property
    def velocity(self) -> np.ndarray:
        return self.momentum / self.rho

    def as_array(self) -> np.ndarray:
        """Conserved quantities as a flat vector (for drift diagnostics)."""
        if self.energy is None:
            return np.concatenate(([self.rho], self.momentum))
        return np.concatenate(([self.rho], self.momentum, [self.energy]))


def maxwellian_values(grid: VelocityGrid, rho: float, u: np.ndarray, temperature: float) -> np.ndarray:
    """Pointwise Maxwellian rho / (2 pi T)^(d/2) * exp(-|v - u|^2 / (2T))."""
    if rho <= 0 or temperature <= 0:
        raise ValueError(f"need rho > 0 and T > 0, got rho={rho}, T={temperature}")
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.size != grid.dim:
        raise ValueError(f"velocity has {u.size} components, grid is {grid.dim}-dimensional")
    ax = grid.axes()
    dist2 = sum((a - ui) ** 2 for a, ui in zip(ax, u))
    return rho / (2.0 * np.pi * temperature) ** (grid.dim / 2.0) * np.exp(-dist2 / (2.0 * temperature))


def _require_grid_state(model, f: DistState) -> None:
    if f.is_dvm or f.grid != model.grid:
        raise ValueError("state representation does not match the model's velocity grid")


class BgkModel:
    """Relaxation model: Q(f, f) = mu0 * (M[U(f)] - f)."""

    bilinear = False

    def __init__(self, grid: VelocityGrid, mu0: float = 1.0, gamma: float = 0.0):
        if mu0 <= 0:
            raise ValueError("mu0 must be positive")
        self.grid = grid
        self.mu0 = float(mu0)
        self.gamma = float(gamma)

    def moments(self, f: DistState) -> MomentVector:
        _require_grid_state(self, f)
        return _grid_moments(self.grid, f.values)

    def equilibrium(self, mv: MomentVector) -> DistState:
        values = maxwellian_values(self.grid, mv.rho, mv.velocity, _grid_temperature(mv, self.grid.dim))
        return DistState.on_grid(self.grid, values)

    def reference_mu(self, f: DistState) -> float:
        return self.mu0

    def eval_P(self, f: DistState, g: DistState | None = None) -> DistState:
        if g is not None and g is not f:
            raise ValueError("model not bilinear: BGK supports eval_P(f, f) only")
        _require_grid_state(self, f)
        m = self.equilibrium(self.moments(f))
        return DistState.on_grid(self.grid, self.mu0 * m.values)


class BroadwellModel:
    """Three-speed discrete-velocity model with bilinear collisions.

    The symmetrized exchange term is ``q(f, g) = f0*g0 - (f+*g- + g+*f-)/2``;
    it enters with sign (+, -, +) on the (plus, zero, minus) components.  The
    shifted gain uses the mass as reference rate, ``P(f, f) = Q(f, f) + rho*f``,
    which keeps every component nonnegative.
    """

    bilinear = True
    grid = None

    def __init__(self, gamma: float = 0.0):
        self.gamma = float(gamma)

    def moments(self, f: DistState) -> MomentVector:
        if not f.is_dvm:
            raise ValueError("Broadwell states are dvm triples")
        fp, f0, fm = f.values
        return MomentVector(rho=float(fp + 2.0 * f0 + fm), momentum=np.array([fp - fm]))

    def equilibrium(self, mv: MomentVector) -> DistState:
        rho, m = float(mv.rho), float(mv.momentum[0])
        if rho <= 0:
            raise ValueError("rho must be positive")
        if abs(m) >= rho:
            raise ValueError(f"no nonnegative equilibrium: |m| = {abs(m)} >= rho = {rho}")
        # Unique nonnegative solution of f+ + 2 f0 + f- = rho, f+ - f- = m,
        # f0^2 = f+ f-.
        fp = (rho + m) ** 2 / (4.0 * rho)
        fm = (rho - m) ** 2 / (4.0 * rho)
        f0 = (rho**2 - m**2) / (4.0 * rho)
        return DistState.dvm(fp, f0, fm)

    def reference_mu(self, f: DistState) -> float:
        return float(self.moments(f).rho)

    def exchange(self, f: DistState, g: DistState) -> np.ndarray:
        fp, f0, fm = f.values
        gp, g0, gm = g.values
        q = f0 * g0 - 0.5 * (fp * gm + gp * fm)
        return np.array([q, -q, q])

    def eval_P(self, f: DistState, g: DistState | None = None) -> DistState:
        g = f if g is None else g
        if not (f.is_dvm and g.is_dvm):
            raise ValueError("Broadwell states are dvm triples")
        rho_f = self.moments(f).rho
        rho_g = self.moments(g).rho
        shift = 0.5 * (rho_f * g.values + rho_g * f.values)
        return DistState.dvm(*(self.exchange(f, g) + shift))


class _SpectralKernel:
    """Precomputed Galerkin data for the 2-D Maxwell collision operator."""

    def __init__(self, grid: VelocityGrid, modes: int, kernel_s: float, support_radius: float,
                 n_radial: int, n_angular: int):
        n = grid.points
        k_half = modes // 2
        freqs = np.fft.fftfreq(n, d=1.0 / n).astype(int)  # integer mode numbers
        keep = np.where(np.abs(freqs + 0.5) <= k_half - 0.5 + 1e-9)[0]  # -K/2 .. K/2-1
        # flatten the retained (k1, k2) box
        kx = np.repeat(freqs[keep], keep.size)
        ky = np.tile(freqs[keep], keep.size)
        self.bin_x = np.repeat(keep, keep.size)
        self.bin_y = np.tile(keep, keep.size)
        self.n_modes = kx.size
        self.grid_points = n

        xi = np.pi / grid.extent  # physical frequency per integer mode

        # radial Gauss-Legendre nodes on [0, 2R]
        gl_x, gl_w = np.polynomial.legendre.leggauss(n_radial)
        r_nodes = support_radius * (gl_x + 1.0)
        r_weights = support_radius * gl_w

        # J0 by angular quadrature, tabulated over the unique |p|^2 values of
        # mode sums/differences p = l +/- m
        theta = 2.0 * np.pi * np.arange(n_angular) / n_angular
        cos_theta = np.cos(theta)

        sum_x = np.add.outer(kx, kx)
        sum_y = np.add.outer(ky, ky)
        diff_x = np.subtract.outer(kx, kx)
        diff_y = np.subtract.outer(ky, ky)
        s_plus = (sum_x**2 + sum_y**2).ravel()
        s_minus = (diff_x**2 + diff_y**2).ravel()
        del sum_x, sum_y, diff_x, diff_y

        uniq, inverse = np.unique(np.concatenate([s_plus, s_minus]), return_inverse=True)
        plus_idx = inverse[: s_plus.size].astype(np.int32)
        minus_idx = inverse[s_plus.size :].astype(np.int32)

        # x = (|xi_l +/- xi_m| / 2) * r = (xi * sqrt(s) / 2) * r
        args = 0.5 * xi * np.sqrt(uniq.astype(float))[:, None] * r_nodes[None, :]
        bessel = np.zeros_like(args)
        for ct in cos_theta:
            bessel += np.cos(args * ct)
        bessel /= n_angular

        radial = r_weights * r_nodes  # combined radial measure
        gain = 2.0 * np.pi * kernel_s * np.einsum("q,pq,sq->ps", radial, bessel, bessel, optimize=True)
        # gain[p, s] = B for (s_plus-index p, s_minus-index s); evaluate pairwise
        b_pair = gain[plus_idx, minus_idx]
        # loss diagonal: B(l, l) has s_plus = |2 l|^2 and s_minus = 0
        zero_pos = int(np.searchsorted(uniq, 0))
        s_self = 4 * (kx**2 + ky**2)
        self_idx = np.searchsorted(uniq, s_self).astype(np.int32)
        b_diag = gain[self_idx, zero_pos]

        beta = b_pair - 0.5 * (np.repeat(b_diag, self.n_modes) + np.tile(b_diag, self.n_modes))

        out_x = np.add.outer(kx, kx).ravel()
        out_y = np.add.outer(ky, ky).ravel()
        valid = (out_x >= -k_half) & (out_x <= k_half - 1) & (out_y >= -k_half) & (out_y <= k_half - 1)
        # retained 1-D modes sit in FFT order, so mode k lives at position k % modes
        out_flat = (out_x[valid] % modes) * modes + (out_y[valid] % modes)
        pairs = np.where(valid)[0]
        self.left = (pairs // self.n_modes).astype(np.int32)
        self.right = (pairs % self.n_modes).astype(np.int32)
        self.out = out_flat
        self.beta = beta[valid]
        self.phase = np.where((kx + ky) % 2 == 0, 1.0, -1.0)

    def coefficients(self, values: np.ndarray) -> np.ndarray:
        """Fourier coefficients of the retained modes from grid values."""
        hat = np.fft.fft2(values)
        flat = hat[self.bin_x, self.bin_y] / self.grid_points**2
        return flat * self.phase

    def synthesis(self, coeff: np.ndarray) -> np.ndarray:
        n = self.grid_points
        hat = np.zeros((n, n), dtype=complex)
        hat[self.bin_x, self.bin_y] = coeff * self.phase * n**2
        return np.fft.ifft2(hat).real

    def convolve(self, cf: np.ndarray, cg: np.ndarray) -> np.ndarray:
        prod = cf[self.left] * cg[self.right] * self.beta
        out = np.bincount(self.out, weights=prod.real, minlength=self.n_modes).astype(complex)
        out += 1j * np.bincount(self.out, weights=prod.imag, minlength=self.n_modes)
        return out


_KERNEL_CACHE: dict[tuple, _SpectralKernel] = {}


class SpectralMaxwellModel:
    """Fourier-Galerkin evaluation of the 2-D Maxwell-molecule operator.

    The constant angular kernel is normalized so that ``kernel_s * rho`` is
    the loss rate; collisions are truncated to relative speeds below
    ``2 * support_radius`` (default the classical dealiasing choice
    ``2 L / (3 + sqrt(2))``).  Galerkin weights are precomputed at
    construction from a radial Gauss-Legendre rule and a trapezoidal angular
    rule, and cached per parameter set.
    """

    bilinear = True

    def __init__(self, grid: VelocityGrid, modes: int = 32, kernel_s: float = 1.0,
                 support_radius: float | None = None, n_radial: int = 128, n_angular: int = 64,
                 gamma: float = 0.0):
        if grid.dim != 2:
            raise ValueError("the spectral Maxwell model is two-dimensional")
        if modes > grid.points or modes < 2 or modes % 2:
            raise ValueError("modes per axis must be even and at most the grid points")
        if kernel_s <= 0:
            raise ValueError("kernel constant must be positive")
        self.grid = grid
        self.modes = int(modes)
        self.kernel_s = float(kernel_s)
        self.support_radius = float(support_radius) if support_radius else 2.0 * grid.extent / (3.0 + np.sqrt(2.0))
        self.gamma = float(gamma)
        key = (grid.extent, grid.points, self.modes, self.kernel_s, self.support_radius, n_radial, n_angular)
        if key not in _KERNEL_CACHE:
            _KERNEL_CACHE[key] = _SpectralKernel(grid, self.modes, self.kernel_s,
                                                 self.support_radius, n_radial, n_angular)
        self._kernel = _KERNEL_CACHE[key]

    def moments(self, f: DistState) -> MomentVector:
        _require_grid_state(self, f)
        return _grid_moments(self.grid, f.values)

    def equilibrium(self, mv: MomentVector) -> DistState:
        values = maxwellian_values(self.grid, mv.rho, mv.velocity, _grid_temperature(mv, self.grid.dim))
        return DistState.on_grid(self.grid, values)

    def reference_mu(self, f: DistState) -> float:
        return self.kernel_s * float(self.moments(f).rho)

    def eval_Q(self, f: DistState, g: DistState | None = None) -> DistState:
        """Symmetrized bilinear collision term (gain minus matched loss)."""
        g = f if g is None else g
        _require_grid_state(self, f)
        _require_grid_state(self, g)
        cf = self._kernel.coefficients(f.values)
        cg = cf if g is f else self._kernel.coefficients(g.values)
        return DistState.on_grid(self.grid, self._kernel.synthesis(self._kernel.convolve(cf, cg)))

    def eval_P(self, f: DistState, g: DistState | None = None) -> DistState:
        g = f if g is None else g
        q = self.eval_Q(f, g)
        rho_f = self.moments(f).rho
        rho_g = rho_f if g is f else self.moments(g).rho
        shift = 0.5 * self.kernel_s * (rho_f * g.values + rho_g * f.values)
        return DistState.on_grid(self.grid, q.values + shift)


KineticModel = BgkModel | BroadwellModel | SpectralMaxwellModel


def _grid_temperature(mv: MomentVector, dim: int) -> float:
    if mv.temperature is not None:
        return mv.temperature
    if mv.energy is None:
        raise ValueError("grid moments need an energy component")
    u = mv.velocity
    return (2.0 * mv.energy / mv.rho - float(u @ u)) / dim


def _grid_moments(grid: VelocityGrid, values: np.ndarray) -> MomentVector:
    w = grid.weight
    rho = float(w * values.sum())
    ax = grid.axes()
    momentum = np.array([float(w * (a * values).sum()) for a in ax])
    energy = float(0.5 * w * (grid.speed_squared() * values).sum())
    temperature = None
    if rho > 0:
        u = momentum / rho
        temperature = (2.0 * energy / rho - float(u @ u)) / grid.dim
    return MomentVector(rho=rho, momentum=momentum, energy=energy, temperature=temperature)


def moments(model: KineticModel, f: DistState) -> MomentVector:
    """Conserved moments of ``f`` under ``model``'s quadrature."""
    return model.moments(f)


def equilibrium(model: KineticModel, mv: MomentVector) -> DistState:
    """The model's equilibrium state with the given conserved moments."""
    return model.equilibrium(mv)


def eval_P(model: KineticModel, f: DistState, g: DistState | None = None) -> DistState:
    """Shifted gain term; ``eval_P(model, f)`` evaluates P(f, f), and the
    bilinear models also accept a second argument."""
    return model.eval_P(f, g)


def eval_Q(model: KineticModel, f: DistState) -> DistState:
    """Collision term Q(f, f) = P(f, f) - mu_ref * f."""
    p = model.eval_P(f)
    return DistState(values=p.values - model.reference_mu(f) * f.values, grid=f.grid)


def reference_mu(model: KineticModel, f: DistState) -> float:
    """The model's reference rate: mu0 (BGK), rho (Broadwell), S*rho (spectral)."""
    return model.reference_mu(f)


def entropy(model: KineticModel, f: DistState, strict: bool = True) -> float:
    """Discrete H functional, the quadrature of f log f.

    Values below 1e-300 contribute zero.  Negatives within the spectral
    tolerance are clipped; in strict mode larger negatives raise, otherwise
    everything negative is clipped (diagnostic use on truncated spectra).
    """
    values = f.values
    scale = float(np.abs(values).max())
    if strict and scale > 0 and values.min() < -NEGATIVE_TOL * scale:
        raise ValueError(f"negative values beyond tolerance: min = {values.min():.3e}")
    clipped = np.where(values > 1e-300, values, 1.0)
    terms = np.where(values > 1e-300, values, 0.0) * np.log(clipped)
    if f.is_dvm:
        return float((DVM_WEIGHTS * terms).sum())
    return float(f.grid.weight * terms.sum())
