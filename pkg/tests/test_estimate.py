import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exkin.estimate import (
    MuEstimate,
    d2_distance,
    mu_a,
    mu_p,
    mu_p_particle_bound,
    mu_s,
    resolve_mu,
)
from exkin.kinetic import (
    BroadwellModel,
    DistState,
    MomentVector,
    VelocityGrid,
    equilibrium,
    maxwellian_values,
    moments,
)


def two_point_state(mass=0.5):
    """Point masses at v = -1 and v = +1 (exact nodes of the L=8 grid)."""
    grid = VelocityGrid(dim=1, extent=8.0, points=64)
    values = np.zeros(grid.points)
    nodes = grid.nodes()
    for v in (-1.0, 1.0):
        (j,) = np.where(np.isclose(nodes, v))
        values[j[0]] = mass / grid.h
    return DistState.on_grid(grid, values)


def test_mu_estimate_invariant():
    with pytest.raises(ValueError, match="positivity"):
        MuEstimate(value=1.0, kind="average", guarantees_positivity=True)
    with pytest.raises(ValueError, match="nonnegative"):
        MuEstimate(value=-1.0, kind="loss_sup", guarantees_positivity=True)


def test_mu_p_maxwell_case_is_mass(grid1d, bimodal1d, bgk):
    est = mu_p(bimodal1d, 0.0)
    assert est.value == pytest.approx(moments(bgk, bimodal1d).rho, rel=1e-12)
    assert est.guarantees_positivity


def test_mu_p_two_point():
    # the sup over the support {-1, +1} of (|v+1| + |v-1|)/2 is 1
    est = mu_p(two_point_state(), 1.0)
    assert est.value == pytest.approx(1.0, rel=1e-12)


def test_mu_p_point_mass(grid1d):
    values = np.zeros(grid1d.points)
    values[10] = 1.0 / grid1d.h
    assert mu_p(DistState.on_grid(grid1d, values), 1.0).value == 0.0


def test_mu_p_rejects_bad_gamma_and_negatives(grid1d, bimodal1d):
    with pytest.raises(ValueError, match="gamma"):
        mu_p(bimodal1d, 3.0)
    bad = DistState.on_grid(grid1d, bimodal1d.values - 0.1)
    with pytest.raises(ValueError, match="negative"):
        mu_p(bad, 1.0)


def test_particle_bound_examples():
    assert mu_p_particle_bound([-1.0, 1.0], 1.0).value == pytest.approx(2.0)
    assert mu_p_particle_bound([0.3, -2.0, 5.0], 0.0).value == pytest.approx(1.0)
    assert mu_p_particle_bound([3.0, 3.0, 3.0], 1.0).value == 0.0
    with pytest.raises(ValueError, match="empty"):
        mu_p_particle_bound([], 1.0)


@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(2, 64),
    gamma=st.floats(0.0, 2.5),
    dim=st.integers(1, 3),
    seed=st.integers(0, 10_000),
)
def test_particle_bound_dominates_pairwise_average(n, gamma, dim, seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(n, dim)) * rng.uniform(0.5, 3.0)
    bound = mu_p_particle_bound(v, gamma).value
    dist = np.sqrt(((v[:, None, :] - v[None, :, :]) ** 2).sum(-1))
    direct = (dist**gamma).mean(axis=1).max()
    assert bound >= direct - 1e-12 * max(direct, 1.0)


def test_mu_a_maxwell_case(bimodal1d, bgk):
    rho = moments(bgk, bimodal1d).rho
    assert mu_a(bimodal1d, 0.0).value == pytest.approx(rho * rho, rel=1e-12)


def test_mu_a_two_point():
    # (1/4)(0 + 2 + 2 + 0) = 1
    assert mu_a(two_point_state(), 1.0).value == pytest.approx(1.0, rel=1e-12)


def test_mu_a_below_mu_p_times_mass(grid1d, rng):
    for _ in range(5):
        values = np.abs(rng.normal(size=grid1d.points))
        f = DistState.on_grid(grid1d, values)
        rho = grid1d.weight * values.sum()
        assert mu_a(f, 1.0).value <= mu_p(f, 1.0).value * rho * (1 + 1e-12)


def test_mu_s_bgk_recovers_rate(bgk, bimodal1d):
    assert mu_s(bgk, bimodal1d).value == pytest.approx(bgk.mu0, rel=1e-12)
    assert not mu_s(bgk, bimodal1d).guarantees_positivity


def test_mu_s_vanishes_at_equilibrium(bgk, bimodal1d):
    m = equilibrium(bgk, moments(bgk, bimodal1d))
    assert mu_s(bgk, m).value == pytest.approx(0.0, abs=1e-8)


def test_mu_s_broadwell_ratios(broadwell):
    # f = (2, 1, 1): rho = 5, m = 1, equilibrium (1.8, 1.2, 0.8);
    # q = f0^2 - f+ f- = -1, so every ratio |q / (f - M)| equals 5
    f = DistState.dvm(2.0, 1.0, 1.0)
    eq = equilibrium(broadwell, moments(broadwell, f)).values
    assert eq == pytest.approx([1.8, 1.2, 0.8], rel=1e-14)
    expected = max(abs(q / d) for q, d in zip([-1.0, 1.0, -1.0], f.values - eq))
    est = mu_s(broadwell, f)
    assert est.value == pytest.approx(expected, rel=1e-12)
    assert est.value == pytest.approx(5.0, rel=1e-12)


def test_resolve_mu_policies(bgk, broadwell, spectral, bimodal1d, dvm_state, bimodal2d):
    assert resolve_mu("loss_sup", bgk, bimodal1d).value == bgk.mu0
    assert resolve_mu("linearized", bgk, bimodal1d).value == pytest.approx(bgk.mu0, rel=1e-12)
    rho = moments(broadwell, dvm_state).rho
    assert resolve_mu("loss_sup", broadwell, dvm_state).value == pytest.approx(rho, rel=1e-14)
    rho2 = moments(spectral, bimodal2d).rho
    assert resolve_mu("loss_sup", spectral, bimodal2d).value == pytest.approx(
        spectral.kernel_s * rho2, rel=1e-12
    )
    fixed = resolve_mu("fixed", bgk, bimodal1d, fixed_value=2.5)
    assert fixed.value == 2.5 and not fixed.guarantees_positivity
    with pytest.raises(ValueError, match="value"):
        resolve_mu("fixed", bgk, bimodal1d)
    with pytest.raises(ValueError, match="policy"):
        resolve_mu("magic", bgk, bimodal1d)


# --- d2 metric -------------------------------------------------------------------


def matched_mixture_pair(grid, a, b, t1):
    t2 = t1 + (a * a - b * b) / 2.0
    f = 0.5 * (maxwellian_values(grid, 1.0, [a, 0], t1) + maxwellian_values(grid, 1.0, [-a, 0], t1))
    g = 0.5 * (maxwellian_values(grid, 1.0, [0, b], t2) + maxwellian_values(grid, 1.0, [0, -b], t2))
    return DistState.on_grid(grid, f), DistState.on_grid(grid, g)


def test_d2_identity_and_symmetry(grid2d):
    f, g = matched_mixture_pair(grid2d, 0.6, 0.3, 1.0)
    assert d2_distance(f, f) == 0.0
    assert d2_distance(f, g) == pytest.approx(d2_distance(g, f), rel=1e-14)
    assert d2_distance(f, g) > 0.0


def test_d2_triangle_inequality(grid2d, rng):
    for _ in range(5):
        a = rng.uniform(0.3, 0.8)
        b = rng.uniform(0.1, a)
        c = rng.uniform(0.1, b)
        t1 = rng.uniform(0.9, 1.2)
        f, g = matched_mixture_pair(grid2d, a, b, t1)
        _, h = matched_mixture_pair(grid2d, a, c, t1)
        assert d2_distance(f, h) <= d2_distance(f, g) + d2_distance(g, h) + 1e-12


def test_d2_rejects_moment_mismatch(grid2d):
    f = DistState.on_grid(grid2d, maxwellian_values(grid2d, 1.0, [0.0, 0.0], 1.0))
    g = DistState.on_grid(grid2d, maxwellian_values(grid2d, 1.1, [0.0, 0.0], 1.0))
    with pytest.raises(ValueError, match="moments"):
        d2_distance(f, g)


def test_d2_contracts_exactly_under_bgk_flow():
    # under exact BGK relaxation f - g decays by exp(-mu0 t / eps) with a
    # shared equilibrium, so d2 scales by exactly that factor
    from exkin.kinetic import BgkModel

    grid = VelocityGrid(dim=1, extent=12.0, points=64)
    model = BgkModel(grid, mu0=1.0)
    a, b, t1 = 0.8, 0.3, 1.0
    t2 = t1 + a * a - b * b  # matches energies in d = 1
    f0 = DistState.on_grid(grid, 0.5 * (maxwellian_values(grid, 1.0, [a], t1)
                                        + maxwellian_values(grid, 1.0, [-a], t1)))
    g0 = DistState.on_grid(grid, 0.5 * (maxwellian_values(grid, 1.0, [b], t2)
                                        + maxwellian_values(grid, 1.0, [-b], t2)))
    eps = 1.0
    t = eps * math.log(2.0) / model.mu0  # contraction factor one half
    factor = math.exp(-model.mu0 * t / eps)
    m = equilibrium(model, moments(model, f0))
    ft = DistState.on_grid(grid, factor * f0.values + (1 - factor) * m.values)
    gt = DistState.on_grid(grid, factor * g0.values + (1 - factor) * m.values)
    assert d2_distance(ft, gt) == pytest.approx(0.5 * d2_distance(f0, g0), rel=1e-12)
