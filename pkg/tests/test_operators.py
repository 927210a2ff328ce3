import numpy as np
import pytest

from hsto.grid import GridSpec, State, inner, inner_l2, make_grid, norm_l2
from hsto.operators import (PhysParams, Tendency, apply_advection,
                            apply_buoyancy, apply_coriolis, apply_diffusion,
                            bottom_vertical_velocity, density, drift,
                            hydrostatic_pressure, vertical_velocity)
from hsto.synthetic import (random_state, random_state_recipe,
                            random_velocity, velocity_mode)


# ---------------------------------------------------------------------------
# equation of state
# ---------------------------------------------------------------------------

def test_density_reference_state(grid8, params):
    rho = density(np.zeros(grid8.shape), np.zeros(grid8.shape), params)
    assert np.allclose(rho, params.rho0)


def test_density_zero_expansion(grid8, rng):
    p = PhysParams(beta_t=0.0, beta_s=0.0, rho0=1027.0)
    T = rng.standard_normal(grid8.shape)
    S = rng.standard_normal(grid8.shape)
    assert np.allclose(density(T, S, p), 1027.0)


def test_density_affine_value(grid8):
    p = PhysParams(rho0=1000.0, beta_t=2e-4, beta_s=8e-4)
    T = np.full(grid8.shape, 5.0)   # anomaly about the reference
    S = np.full(grid8.shape, -1.0)
    assert np.allclose(density(T, S, p), 1000.2)


# ---------------------------------------------------------------------------
# diagnostic vertical velocity
# ---------------------------------------------------------------------------

def test_vertical_velocity_zero(grid8):
    w = vertical_velocity(np.zeros(grid8.shape), np.zeros(grid8.shape),
                          grid8)
    assert np.all(w == 0.0)


def test_vertical_velocity_constant_divergence(grid16):
    g = grid16
    u = g.x1[:, None, None] * np.ones(g.shape)
    v = np.zeros(g.shape)
    w = vertical_velocity(u, v, g)
    # u = x1 is odd about x1 = 0 but not about x1 = L1, so the last column's
    # ghost value is wrong; every other column sees div = 1 exactly and the
    # midpoint column integral of 1 from z to the surface is -z.
    expected = -g.z[None, None, :] * np.ones(g.shape)
    assert np.allclose(w[:-1], expected[:-1], atol=1e-12)


def test_vertical_velocity_surface_and_projected_bottom(grid16, rng):
    from hsto.pressure import project_barotropic
    g = grid16
    u, v = random_velocity(g, rng)
    # synthetic columns are depth balanced; add a barotropic perturbation
    u = u + np.sin(np.pi * g.x1 / g.l1)[:, None, None] * np.ones(g.shape)
    v = v + 0.5 * np.cos(np.pi * g.x2 / g.l2)[None, :, None] * np.ones(
        g.shape)
    u2, v2, _, _ = project_barotropic(u, v, g, rho0=1.0, dt=1.0, tol=1e-13)
    wb = bottom_vertical_velocity(u2, v2, g)
    assert np.abs(wb).max() <= 1e-10
    # the integral from the surface to itself is empty, so the topmost
    # cell value is exactly half a layer's worth of its own divergence
    from hsto.operators import horizontal_divergence
    w = vertical_velocity(u2, v2, g)
    div = horizontal_divergence(u2, v2, g)
    assert np.array_equal(w[..., -1], 0.5 * g.dz * div[..., -1])


# ---------------------------------------------------------------------------
# hydrostatic pressure
# ---------------------------------------------------------------------------

def test_hydrostatic_constant_density(grid8):
    p = PhysParams(rho0=1000.0, g=10.0, beta_t=0.0, beta_s=0.0)
    ps = np.zeros(grid8.surface_shape)
    pr = hydrostatic_pressure(np.zeros(grid8.shape), np.zeros(grid8.shape),
                              ps, p, grid8)
    expected = -1000.0 * 10.0 * grid8.z[None, None, :]
    assert np.allclose(pr, expected * np.ones(grid8.shape))


def test_hydrostatic_zero_gravity(grid8, rng):
    p = PhysParams(g=0.0)
    ps = rng.standard_normal(grid8.surface_shape)
    pr = hydrostatic_pressure(rng.standard_normal(grid8.shape),
                              rng.standard_normal(grid8.shape), ps, p, grid8)
    assert np.allclose(pr, ps[:, :, None] * np.ones(grid8.shape))


def test_hydrostatic_linear_profile(grid16):
    # T anomaly = alpha z, S at reference: p = p_s - rho0 g z
    #   - rho0 g beta_t alpha z^2 / 2 (antiderivative oracle)
    g = grid16
    alpha = 3.0
    p = PhysParams(rho0=1000.0, g=9.81, beta_t=2e-4, beta_s=8e-4)
    T = alpha * g.z[None, None, :] * np.ones(g.shape)
    S = np.zeros(g.shape)
    ps = np.full(g.surface_shape, 7.0)
    got = hydrostatic_pressure(T, S, ps, p, g)
    z = g.z[None, None, :]
    exact = 7.0 - p.rho0 * p.g * z - p.rho0 * p.g * p.beta_t * alpha \
        * z ** 2 / 2.0
    assert np.allclose(got, exact * np.ones(g.shape), atol=5e-4)


# ---------------------------------------------------------------------------
# diffusion operator
# ---------------------------------------------------------------------------

def test_diffusion_zero(grid8, params):
    t = apply_diffusion(State.zeros(grid8), params)
    assert all(np.all(x == 0) for x in t.components().values())


def test_diffusion_eigenmode(params):
    # boundary-compatible product mode: exact discrete eigenfunction whose
    # eigenvalue matches the analytic one to O(N^-2)
    errs = []
    for n in (8, 16, 32):
        g = make_grid(GridSpec(1.0, 1.0, 1.0, n, n, n))
        s = State.zeros(g)
        s.u = velocity_mode(g, 1, 1, 1)
        lam_exact = params.mu_v * 2 * np.pi ** 2 + params.nu_v * np.pi ** 2
        au = apply_diffusion(s, params).du
        ratio = au / s.u
        assert ratio.max() - ratio.min() <= 1e-9 * abs(ratio.mean())
        errs.append(abs(ratio.mean() - lam_exact))
    assert np.log2(errs[0] / errs[1]) > 1.8


def test_diffusion_self_adjoint_100_pairs(grid16, params, rng):
    from hsto.grid import norm_v
    worst = 0.0
    for _ in range(100):
        a = random_state(grid16, rng)
        b = random_state(grid16, rng)
        ta = apply_diffusion(a, params)
        lhs = inner_l2(ta.as_state(grid16), b, grid16)
        rhs = inner(a, b, "v", params=params)
        # both sides are bounded by ||a|| ||b||, the natural scale
        scale = norm_v(a, params) * norm_v(b, params) + 1e-30
        worst = max(worst, abs(lhs - rhs) / scale)
    assert worst <= 1e-10


# ---------------------------------------------------------------------------
# advection
# ---------------------------------------------------------------------------

def test_advection_zero(grid8):
    t = apply_advection(State.zeros(grid8))
    assert all(np.all(x == 0) for x in t.components().values())


def test_advection_constant_target(grid8, rng):
    carrier = random_state(grid8, rng)
    target = State(grid8, np.full(grid8.shape, 2.0),
                   np.full(grid8.shape, -1.0), np.full(grid8.shape, 3.0),
                   np.full(grid8.shape, 0.5))
    t = apply_advection(carrier, target)
    # constants are transparent to the tracer stencils (mirror ghosts);
    # velocity components feel the side walls, so restrict to the interior
    assert np.allclose(t.dT[1:-1, 1:-1, :], 0.0, atol=1e-13)
    assert np.allclose(t.dS[1:-1, 1:-1, :], 0.0, atol=1e-13)


def cancellation_residual(n, recipes, r):
    g = make_grid(GridSpec(1.0, 1.0, 1.0, n, n, n))
    sharp = recipes[0].evaluate(g)
    state = recipes[1].evaluate(g)
    adv = apply_advection(sharp, state)
    powu, powv = state.u ** r, state.v ** r
    resid = inner_l2(adv.du, powu, g) + inner_l2(adv.dv, powv, g)
    scale = (inner_l2(np.abs(adv.du), np.abs(powu), g)
             + inner_l2(np.abs(adv.dv), np.abs(powv), g))
    return abs(resid), scale


@pytest.mark.parametrize("r", [1, 3])
def test_cancellation_identity_convergence(r, rng):
    recipes = [random_state_recipe(rng, max_index=2, n_modes=3)
               for _ in range(2)]
    data = [cancellation_residual(n, recipes, r) for n in (16, 32, 64)]
    resids = [d[0] for d in data]
    orders = [np.log2(resids[i] / resids[i + 1]) for i in range(2)]
    assert sum(orders) / 2 >= 1.8
    assert resids[-1] <= 1e-3 * data[-1][1]


# ---------------------------------------------------------------------------
# buoyancy-gradient pressure part
# ---------------------------------------------------------------------------

def test_buoyancy_horizontally_constant(grid8, params):
    s = State.zeros(grid8)
    s.T = 4.0 * np.cos(np.pi * (grid8.z + grid8.h) / grid8.h)[
        None, None, :] * np.ones(grid8.shape)
    t = apply_buoyancy(s, params)
    assert np.allclose(t.du, 0.0) and np.allclose(t.dv, 0.0)
    assert np.all(t.dT == 0.0) and np.all(t.dS == 0.0)


def test_buoyancy_zero_expansion(grid8, rng):
    p = PhysParams(beta_t=0.0, beta_s=0.0)
    t = apply_buoyancy(random_state(grid8, rng), p)
    assert np.allclose(t.du, 0.0) and np.allclose(t.dv, 0.0)


def test_buoyancy_linear_temperature(grid16, params):
    g = grid16
    s = State.zeros(g)
    s.T = g.x1[:, None, None] * np.ones(g.shape)
    t = apply_buoyancy(s, params)
    expected = params.g * params.beta_t * g.z[None, None, :] * np.ones(
        g.shape)
    # x1 is not mirror-symmetric at the walls: skip the two wall columns
    assert np.allclose(t.du[1:-1], expected[1:-1], atol=1e-12)
    assert np.allclose(t.dv, 0.0, atol=1e-12)


# ---------------------------------------------------------------------------
# rotation
# ---------------------------------------------------------------------------

def test_coriolis_rotation(grid8):
    p = PhysParams(f=1.0)
    s = State.zeros(grid8)
    s.u = np.ones(grid8.shape)
    t = apply_coriolis(s, p)
    assert np.allclose(t.du, 0.0)
    assert np.allclose(t.dv, 1.0)


def test_coriolis_zero_f(grid8, rng):
    t = apply_coriolis(random_state(grid8, rng), PhysParams(f=0.0))
    assert np.all(t.du == 0.0) and np.all(t.dv == 0.0)


def test_coriolis_neutrality(grid8, params, rng):
    for _ in range(100):
        s = random_state(grid8, rng)
        t = apply_coriolis(s, params)
        val = inner_l2(t.as_state(grid8), s, grid8)
        scale = norm_l2([t.du, t.dv], grid8) * norm_l2(s, grid8) + 1e-30
        assert abs(val) <= 1e-12 * scale


# ---------------------------------------------------------------------------
# combined drift
# ---------------------------------------------------------------------------

def test_drift_zero(grid8, params):
    z = State.zeros(grid8)
    t = drift(z, Tendency.zeros_like(z), None, params)
    assert all(np.all(x == 0) for x in t.components().values())


def test_drift_linear_regime(grid8, rng):
    p = PhysParams(f=0.0, beta_t=0.0, beta_s=0.0)
    s = random_state(grid8, rng)
    f = Tendency(rng.standard_normal(grid8.shape),
                 rng.standard_normal(grid8.shape),
                 rng.standard_normal(grid8.shape),
                 rng.standard_normal(grid8.shape))
    got = drift(s, f, None, p, include_advection=False)
    a = apply_diffusion(s, p)
    for name in ("du", "dv", "dT", "dS"):
        assert np.allclose(getattr(got, name),
                           getattr(f, name) - getattr(a, name), atol=1e-12)


def test_drift_sum_of_parts(grid8, params, rng):
    s = random_state(grid8, rng)
    f = Tendency.zeros_like(s)
    ps = np.cos(np.pi * grid8.x1)[:, None] * np.cos(
        np.pi * grid8.x2)[None, :]
    got = drift(s, f, ps, params)
    from hsto.operators import pressure_gradient_tendency
    manual = (f - apply_diffusion(s, params) - apply_advection(s)
              - apply_buoyancy(s, params) - apply_coriolis(s, params)
              + pressure_gradient_tendency(ps, s, params))
    for name in ("du", "dv", "dT", "dS"):
        a, b = getattr(got, name), getattr(manual, name)
        assert np.allclose(a, b, rtol=1e-12, atol=1e-14)
