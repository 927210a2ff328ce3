import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hsto.grid import (GridError, GridSpec, State, apply_bcs,
                       boundary_face_values, ghosted, inner, inner_l2,
                       make_grid, norm, norm_aniso, norm_l2, norm_lp, norm_v)
from hsto.operators import PhysParams
from hsto.synthetic import random_state, random_state_recipe


def test_make_grid_node_count_and_spacing():
    g = make_grid(GridSpec(1.0, 1.0, 1.0, 4, 4, 4))
    assert g.n_nodes == 64
    assert g.dx1 == pytest.approx(0.25)
    assert g.shape == (4, 4, 4)


def test_make_grid_vertical_levels():
    g = make_grid(GridSpec(2.0, 1.0, 0.5, 8, 4, 4))
    assert g.dz == pytest.approx(0.125)
    # cell centers sit strictly inside (-h, 0); faces span [-h, 0]
    assert g.z[0] == pytest.approx(-0.5 + 0.0625)
    assert g.z[-1] == pytest.approx(-0.0625)
    assert g.z_faces[0] == pytest.approx(-0.5)
    assert g.z_faces[-1] == pytest.approx(0.0)


def test_make_grid_invalid_spec():
    with pytest.raises(GridError):
        make_grid(GridSpec(1.0, 1.0, 1.0, 2, 4, 4))
    with pytest.raises(GridError):
        make_grid(GridSpec(-1.0, 1.0, 1.0, 4, 4, 4))


def test_apply_bcs_lateral_walls_zero(grid8, rng):
    state = apply_bcs(random_state(grid8, rng))
    for comp in (state.u, state.v):
        for axis in (0, 1):
            for end in (0, 1):
                face = boundary_face_values(comp, "velocity", axis, end)
                assert np.all(face == 0.0)


def test_apply_bcs_surface_vertical_difference_zero(grid8, rng):
    state = apply_bcs(random_state(grid8, rng))
    g = ghosted(state.T, "tracer")
    dz_stencil = (g[1:-1, 1:-1, -1] - g[1:-1, 1:-1, -2]) / grid8.dz
    assert np.all(dz_stencil == 0.0)
    # same at the bottom and for the velocity (mirror in z)
    gu = ghosted(state.u, "velocity")
    assert np.all(gu[1:-1, 1:-1, 0] == gu[1:-1, 1:-1, 1])


def test_apply_bcs_idempotent_and_interior_untouched(grid8, rng):
    state = random_state(grid8, rng)
    once = apply_bcs(state)
    twice = apply_bcs(once)
    for a, b in zip(once.components().values(), twice.components().values()):
        assert np.array_equal(a, b)
    assert np.array_equal(once.u, state.u)


def test_apply_bcs_rejects_nonfinite(grid8):
    state = State.zeros(grid8)
    state.T[2, 2, 2] = np.nan
    with pytest.raises(FloatingPointError):
        apply_bcs(state)


def test_norm_constant_field(grid_aniso):
    c = -2.5
    vol = grid_aniso.l1 * grid_aniso.l2 * grid_aniso.h
    f = np.full(grid_aniso.shape, c)
    assert norm_l2(f, grid_aniso) == pytest.approx(abs(c) * np.sqrt(vol))
    g_unit = make_grid(GridSpec(1.0, 1.0, 1.0, 6, 6, 6))
    f1 = np.full(g_unit.shape, c)
    assert norm_l2(f1, g_unit) == pytest.approx(abs(c))


def test_norm_zero_state(grid8, params):
    z = State.zeros(grid8)
    assert norm(z, "l2", grid8) == 0.0
    assert norm(z, "h1", grid8, params=params) == 0.0
    assert norm_lp(z.u, 4, grid8) == 0.0
    assert norm_aniso(z.u, 3, 2, grid8) == 0.0


def test_norm_sine_closed_form():
    exact = 1.0 / np.sqrt(2.0)
    for n in (16, 32, 64):
        g = make_grid(GridSpec(1.0, 1.0, 1.0, n, 4, 4))
        f = np.sin(2 * np.pi * g.x1)[:, None, None] * np.ones(g.shape)
        err = abs(norm_l2(f, g) - exact)
        assert err <= 10.0 / n ** 2


def test_norm_quadrature_order_two():
    # non-periodic integrand so the midpoint error is genuinely O(N^-2);
    # closed form: |e^{x1}|_{L2}^2 = (e^2 - 1)/2
    exact = np.sqrt((np.e ** 2 - 1.0) / 2.0)
    errs = []
    for n in (16, 32, 64):
        g = make_grid(GridSpec(1.0, 1.0, 1.0, n, 4, 4))
        f = np.exp(g.x1)[:, None, None] * np.ones(g.shape)
        errs.append(abs(norm_l2(f, g) - exact))
    orders = [np.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(orders) > 1.9


def test_inner_matches_norm_squared(grid_aniso, rng):
    state = random_state(grid_aniso, rng)
    n2 = norm_l2(state, grid_aniso) ** 2
    ip = inner(state, state, "l2", grid_aniso)
    assert ip == pytest.approx(n2, rel=1e-13)


def test_inner_symmetry(grid8, params, rng):
    a = random_state(grid8, rng)
    b = random_state(grid8, rng)
    assert inner(a, b, "l2") == pytest.approx(inner(b, a, "l2"), rel=1e-12)
    assert inner(a, b, "v", params=params) == pytest.approx(
        inner(b, a, "v", params=params), rel=1e-12)


def test_v_inner_fourier_mode_closed_form(params):
    # u = sin(pi x1) sin(pi x2) cos(pi (z+1)): every squared-gradient integral
    # equals (pi/L)^2 / 8 on the unit box
    exact = (params.mu_v * 2 * np.pi ** 2 + params.nu_v * np.pi ** 2) / 8.0
    errs = []
    for n in (8, 16, 32):
        g = make_grid(GridSpec(1.0, 1.0, 1.0, n, n, n))
        from hsto.synthetic import velocity_mode
        state = State.zeros(g)
        state.u = velocity_mode(g, 1, 1, 1)
        got = inner(state, state, "v", params=params)
        errs.append(abs(got - exact))
    assert errs[0] <= 0.5
    order = np.log2(errs[0] / errs[1])
    assert order > 1.8


def test_aniso_22_is_l2(grid_aniso, rng):
    state = random_state(grid_aniso, rng)
    a = norm_aniso((state.u, state.v), 2, 2, grid_aniso)
    b = norm_l2((state.u, state.v), grid_aniso)
    assert a == pytest.approx(b, rel=1e-12)


def test_poincare_constant_stable_under_refinement(params, rng):
    recipes = [random_state_recipe(rng) for _ in range(200)]

    def cp(n):
        g = make_grid(GridSpec(1.0, 1.0, 1.0, n, n, n))
        worst = 0.0
        for rec in recipes:
            s = rec.evaluate(g)
            worst = max(worst, norm_l2(s, g) / norm_v(s, params))
        return worst

    c8, c16 = cp(8), cp(16)
    assert c16 <= 1.05 * c8


def test_unsupported_kind(grid8):
    with pytest.raises(ValueError, match="unsupported-kind"):
        norm(np.zeros(grid8.shape), "h3", grid8)
    with pytest.raises(ValueError, match="unsupported-kind"):
        inner(np.zeros(grid8.shape), np.zeros(grid8.shape), "w", grid8)


def test_grid_mismatch(grid8, params):
    other = make_grid(GridSpec(1.0, 1.0, 1.0, 6, 6, 6))
    a = State.zeros(grid8)
    b = State.zeros(other)
    with pytest.raises(ValueError, match="grid-mismatch"):
        inner(a, b, "l2")


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=-5, max_value=5, allow_nan=False),
       st.floats(min_value=-5, max_value=5, allow_nan=False))
def test_inner_bilinear(a, b):
    g = make_grid(GridSpec(1.0, 1.0, 1.0, 4, 4, 4))
    rng = np.random.default_rng(7)
    x = random_state(g, rng)
    y = random_state(g, rng)
    z = random_state(g, rng)
    lhs = inner_l2(x.scaled(a) + y.scaled(b), z, g)
    rhs = a * inner_l2(x, z, g) + b * inner_l2(y, z, g)
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=1, max_value=4))
def test_batch_norms_match_loop(k):
    g = make_grid(GridSpec(1.0, 1.0, 1.0, 4, 4, 4))
    rng = np.random.default_rng(k)
    arrs = rng.standard_normal((k, 4, 4, 4))
    batched = norm_l2(arrs, g)
    single = np.array([norm_l2(arrs[i], g) for i in range(k)])
    assert np.allclose(batched, single, rtol=1e-13)
