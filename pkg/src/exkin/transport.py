"""One-dimensional physical-space layer: upwind advection, operator
splitting of transport and relaxation, and the shock-tube setup.

The spatial discretization is first-order finite-volume upwind on [0, 1]
with outflow (copy) boundary cells.  :func:`advect` takes a single
CFL-limited forward-Euler update of that semi-discretization.  The splitting
in :func:`split_step` instead applies the exact flow of the same upwind
operator (Poisson-weighted upstream averages, see :func:`free_transport`):
it is unconditionally stable, conservative in the interior, and free of
time-integration error, so splitting studies measure the splitting order
alone and the shock runs can use time steps far above the CFL bound.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .exprk import StepContext, step
from .kinetic import DistState, MomentVector, VelocityGrid, maxwellian_values

__all__ = [
    "PhaseState",
    "advect",
    "free_transport",
    "split_step",
    "sod_setup",
    "cell_moments",
    "profile",
]

# Poisson tails below this value are assigned to the boundary cell, which is
# exact once the tail lies fully upstream of the domain.
POISSON_TAIL = 1e-16


@dataclass(frozen=True)
class PhaseState:
    """Per-cell distributions on a shared d=1 velocity grid.

    ``values`` has shape (n_cells, velocity points); cells are centered at
    ``(i + 1/2) dx`` on [0, 1].  The only boundary rule is outflow (copy).
    """

    grid: VelocityGrid
    values: np.ndarray
    boundary: str = "outflow"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if self.grid.dim != 1:
            raise ValueError("phase states use a one-dimensional velocity grid")
        if values.ndim != 2 or values.shape[1] != self.grid.points:
            raise ValueError(f"values shape {values.shape} does not match the grid")
        if self.boundary != "outflow":
            raise ValueError(f"unsupported boundary rule {self.boundary!r}")
        if not np.all(np.isfinite(values)):
            raise ValueError("phase-state values must be finite")
        object.__setattr__(self, "values", values)

    @property
    def n_cells(self) -> int:
        return self.values.shape[0]

    @property
    def dx(self) -> float:
        return 1.0 / self.n_cells

    def cell(self, i: int) -> DistState:
        return DistState.on_grid(self.grid, self.values[i])

    def x_centers(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.dx


def advect(state: PhaseState, dt: float) -> PhaseState:
    """One forward-Euler upwind update of the free-transport term.

    Requires CFL = max|v| dt / dx <= 1; a violation raises an error naming
    the admissible step.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    v = state.grid.nodes()
    vmax = float(np.abs(v).max())
    dx = state.dx
    if vmax * dt / dx > 1.0 + 1e-12:
        raise ValueError(
            f"CFL violation: max|v| dt / dx = {vmax * dt / dx:.3f} > 1; admissible dt <= {dx / vmax:.6e}")
    f = state.values
    out = f.copy()
    nu = v * dt / dx
    pos = nu > 0
    neg = nu < 0
    upstream = np.vstack([f[:1], f[:-1]])  # copy ghost on the left
    downstream = np.vstack([f[1:], f[-1:]])  # copy ghost on the right
    out[:, pos] = f[:, pos] - nu[pos] * (f[:, pos] - upstream[:, pos])
    out[:, neg] = f[:, neg] + nu[neg] * (downstream[:, neg] - f[:, neg])
    return replace(state, values=out)


def _poisson_weights(nu: float, n_max: int) -> np.ndarray:
    """Poisson(nu) weights truncated once the tail drops below POISSON_TAIL."""
    w = [np.exp(-nu)]
    total = w[0]
    k = 0
    while total < 1.0 - POISSON_TAIL and k < n_max:
        k += 1
        w.append(w[-1] * nu / k)
        total += w[-1]
    return np.array(w)


def free_transport(state: PhaseState, dt: float) -> PhaseState:
    """Exact flow of the upwind semi-discretization over dt.

    Per velocity node the solution is a Poisson-weighted average of upstream
    cells with the truncated tail drawn from the (constant-in-time) boundary
    cell; composition over consecutive steps is exact.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    v = state.grid.nodes()
    dx = state.dx
    n_cells = state.n_cells
    out = state.values.copy()
    for j, vj in enumerate(v):
        nu = abs(vj) * dt / dx
        if nu == 0.0:
            continue
        w = _poisson_weights(nu, n_cells + 8)
        col = state.values[:, j]
        if vj < 0:
            col = col[::-1]
        smeared = np.convolve(col, w)[:n_cells]
        tail = 1.0 - np.cumsum(w)
        boundary_weight = np.ones(n_cells)
        upto = min(w.size, n_cells)
        boundary_weight[:upto] = tail[:upto]
        if w.size < n_cells:
            boundary_weight[w.size:] = tail[-1]
        smeared = smeared + boundary_weight * col[0]
        out[:, j] = smeared[::-1] if vj < 0 else smeared
    return replace(state, values=out)


def _relax_cells(state: PhaseState, ctx: StepContext, dt: float) -> PhaseState:
    sub = replace(ctx, dt=dt)
    out = np.empty_like(state.values)
    for i in range(state.n_cells):
        out[i] = step(sub, state.cell(i)).f_next.values
    return replace(state, values=out)


def split_step(state: PhaseState, ctx: StepContext, kind: str = "strang") -> PhaseState:
    """One splitting step of transport and cell-wise relaxation over ctx.dt.

    ``lie``: relaxation over dt, then transport over dt.
    ``strang``: half relaxation, full transport, half relaxation.
    """
    dt = ctx.dt
    if kind == "lie":
        state = _relax_cells(state, ctx, dt)
        return free_transport(state, dt)
    if kind == "strang":
        state = _relax_cells(state, ctx, dt / 2.0)
        state = free_transport(state, dt)
        return _relax_cells(state, ctx, dt / 2.0)
    raise ValueError(f"unknown splitting {kind!r}; expected 'lie' or 'strang'")


def sod_setup(grid: VelocityGrid, n_cells: int = 150,
              left=(1.0, 0.0, 5.0), right=(0.125, 0.0, 4.0)) -> PhaseState:
    """Shock-tube initial state: cell-wise Maxwellians of the left state for
    x < 0.5 and the right state for x >= 0.5.

    Each side is given as (rho, u, E); the temperature follows from the
    d = 1 closure T = 2 E / rho - u^2.  The grid must cover the implied
    thermal speeds (extent >= 8 sqrt(T)).
    """
    if grid.dim != 1:
        raise ValueError("the shock tube uses a one-dimensional velocity grid")
    sides = []
    for rho, u, energy in (left, right):
        temp = 2.0 * energy / rho - u * u
        if temp <= 0:
            raise ValueError(f"state (rho={rho}, u={u}, E={energy}) has nonpositive temperature {temp}")
        if grid.extent < 8.0 * np.sqrt(temp):
            raise ValueError(
                f"grid extent {grid.extent} below 8 sqrt(T) = {8.0 * np.sqrt(temp):.3f}")
        sides.append(maxwellian_values(grid, rho, [u], temp))
    x = (np.arange(n_cells) + 0.5) / n_cells
    values = np.where(x[:, None] < 0.5, sides[0][None, :], sides[1][None, :])
    return PhaseState(grid=grid, values=values)


def cell_moments(state: PhaseState) -> list[MomentVector]:
    from .kinetic import _grid_moments

    return [_grid_moments(state.grid, row) for row in state.values]


def profile(state: PhaseState) -> dict[str, np.ndarray]:
    """Macroscopic profiles: x, rho, u, T, and heat flux q = <(v-u)^3 f>/2."""
    v = state.grid.nodes()
    h = state.grid.h
    f = state.values
    rho = h * f.sum(axis=1)
    u = h * (f * v).sum(axis=1) / rho
    energy = 0.5 * h * (f * v**2).sum(axis=1)
    temp = 2.0 * energy / rho - u**2
    q = 0.5 * h * (f * (v[None, :] - u[:, None]) ** 3).sum(axis=1)
    return {"x": state.x_centers(), "rho": rho, "u": u, "T": temp, "q": q}
