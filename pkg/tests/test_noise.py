import numpy as np
import pytest

from hsto.grid import State, inner_l2, norm_l2
from hsto.noise import (NoiseIncrement, apply_sigma, build_noise_model,
                        growth_constant, ito_isometry_check, sample_increment,
                        sigma_l2_sq, sigma_mode_field, velocity_noise_model)
from hsto.operators import apply_diffusion
from hsto.pressure import div_surface, vertical_average
from hsto.synthetic import random_state


def hs_norm(model, a, b, grid):
    """Hilbert-Schmidt distance between sigma(a) and sigma(b)."""
    total = 0.0
    for j in range(model.K):
        fa = sigma_mode_field(model, a, j)
        fb = sigma_mode_field(model, b, j)
        d = fa - fb
        total += norm_l2([d.du, d.dv, d.dT, d.dS], grid) ** 2
    return np.sqrt(total)


# ---------------------------------------------------------------------------
# built-in modes
# ---------------------------------------------------------------------------

def test_modes_unit_norm_and_orthogonal(grid16):
    model = build_noise_model(grid16, "additive", 8, 1.0)
    assert model.K == 8
    for j, m in enumerate(model.modes):
        assert norm_l2(m.shape, grid16) == pytest.approx(1.0, rel=1e-12)
        for l in range(j):
            other = model.modes[l]
            if other.component == m.component:
                ip = inner_l2(m.shape, other.shape, grid16)
                assert abs(ip) <= 1e-12


def test_velocity_modes_exactly_depth_balanced(grid16):
    model = build_noise_model(grid16, "additive", 8, 1.0)
    for m in model.modes:
        if m.component in ("u", "v"):
            col = vertical_average(m.shape, grid16)
            assert np.abs(col).max() <= 1e-13


def test_modes_are_discrete_eigenfunctions(grid16, params):
    model = velocity_noise_model(grid16, 4, 1.0)
    for m in model.modes:
        s = State.zeros(grid16)
        s.u = m.shape
        au = apply_diffusion(s, params).du
        lam = m.eigenvalue(grid16, params)
        assert np.abs(au - lam * m.shape).max() <= 1e-8 * lam


# ---------------------------------------------------------------------------
# increments
# ---------------------------------------------------------------------------

def test_increment_empty_and_positive_dt(grid8):
    inc = sample_increment(0, 0, 0, 1.0)
    assert inc.dw.shape == (0,)
    with pytest.raises(ValueError):
        sample_increment(0, 0, 4, 0.0)


def test_increment_deterministic():
    a = sample_increment(42, 7, 6, 0.1)
    b = sample_increment(42, 7, 6, 0.1)
    assert np.array_equal(a.dw, b.dw)
    c = sample_increment(42, 8, 6, 0.1)
    assert not np.array_equal(a.dw, c.dw)


def test_increment_batch_matches_offset_seeds():
    batch = sample_increment(100, 3, 5, 0.2, batch=4)
    for b in range(4):
        single = sample_increment(100 + b, 3, 5, 0.2)
        assert np.array_equal(batch.dw[b], single.dw)


def test_increment_variance_chi_square():
    # 1e5 draws of mode 0 with dt = 0.25: sample variance within 3 SE
    n, dt = 100_000, 0.25
    draws = np.empty(n)
    for step in range(n // 100):
        draws[step * 100:(step + 1) * 100] = sample_increment(
            7, step, 1, dt, batch=100).dw[:, 0]
    var = draws.var(ddof=1)
    se = dt * np.sqrt(2.0 / (n - 1))
    assert abs(var - dt) <= 3 * se


def test_stream_independence():
    n = 100_000
    k = 3
    draws = np.empty((n, k))
    for step in range(n // 200):
        draws[step * 200:(step + 1) * 200] = sample_increment(
            11, step, k, 1.0, batch=200).dw
    se = 1.0 / np.sqrt(n)
    for a in range(k):
        for b in range(a):
            corr = np.corrcoef(draws[:, a], draws[:, b])[0, 1]
            assert abs(corr) <= 3 * se


# ---------------------------------------------------------------------------
# coefficient application
# ---------------------------------------------------------------------------

def test_apply_sigma_zero_increment(grid8, rng):
    model = build_noise_model(grid8, "linear_multiplicative", 4, 1.0)
    state = random_state(grid8, rng)
    inc = NoiseIncrement(np.zeros(4), 0.1, 0, 0)
    t = apply_sigma(model, state, inc)
    assert all(np.all(x == 0) for x in t.components().values())


def test_apply_sigma_additive_scaling(grid8):
    model = build_noise_model(grid8, "additive", 1, 2.0)
    inc = NoiseIncrement(np.array([0.5]), 0.1, 0, 0)
    t = apply_sigma(model, State.zeros(grid8), inc)
    m = model.modes[0]
    assert np.allclose(t.components()[m.component], 1.0 * m.shape)


def test_apply_sigma_multiplicative_vanishes_at_origin(grid8):
    model = build_noise_model(grid8, "linear_multiplicative", 4, 3.0)
    inc = NoiseIncrement(np.ones(4), 0.1, 0, 0)
    t = apply_sigma(model, State.zeros(grid8), inc)
    assert all(np.all(x == 0) for x in t.components().values())


def test_apply_sigma_linear_in_increment(grid8, rng):
    model = build_noise_model(grid8, "lipschitz_functional", 6, 1.5)
    state = random_state(grid8, rng)
    w1 = rng.standard_normal(6)
    w2 = rng.standard_normal(6)
    t1 = apply_sigma(model, state, NoiseIncrement(w1, 0.1, 0, 0))
    t2 = apply_sigma(model, state, NoiseIncrement(w2, 0.1, 0, 0))
    t12 = apply_sigma(model, state, NoiseIncrement(w1 + 2 * w2, 0.1, 0, 0))
    for n in ("du", "dv", "dT", "dS"):
        assert np.allclose(getattr(t12, n),
                           getattr(t1, n) + 2 * getattr(t2, n), atol=1e-12)


@pytest.mark.parametrize("kind", ["additive", "linear_multiplicative",
                                  "lipschitz_functional"])
def test_growth_bound(kind, grid8, rng):
    model = build_noise_model(grid8, kind, 8, 0.7)
    c = growth_constant(model, grid8)
    for _ in range(1000):
        state = random_state(grid8, rng,
                             amplitude=float(rng.uniform(0.0, 5.0)),
                             n_modes=2)
        hs = np.sqrt(sigma_l2_sq(model, state))
        assert hs <= c * (1.0 + norm_l2(state, grid8)) * (1 + 1e-12)


@pytest.mark.parametrize("kind", ["linear_multiplicative",
                                  "lipschitz_functional"])
def test_lipschitz_bound_sampled(kind, grid8, rng):
    model = build_noise_model(grid8, kind, 6, 0.9)
    L = model.lipschitz_bound
    for _ in range(1000):
        a = random_state(grid8, rng, amplitude=2.0, n_modes=2)
        b = random_state(grid8, rng, amplitude=2.0, n_modes=2)
        dist = hs_norm(model, a, b, grid8)
        assert dist <= L * norm_l2(a - b, grid8) * (1 + 1e-9) + 1e-12


# ---------------------------------------------------------------------------
# second-moment identity
# ---------------------------------------------------------------------------

def test_isometry_zero_amplitudes(grid8):
    model = build_noise_model(grid8, "additive", 4, 0.0)
    rep = ito_isometry_check(model, State.zeros(grid8), 0.1, 4, 50)
    assert rep["mc"] == 0.0 and rep["exact"] == 0.0


def test_isometry_single_mode_closed_form(grid8):
    a = 1.7
    model = build_noise_model(grid8, "additive", 1, a)
    rep = ito_isometry_check(model, State.zeros(grid8), 0.05, 8, 200)
    assert rep["exact"] == pytest.approx(a * a * 0.05 * 8, rel=1e-12)


@pytest.mark.parametrize("kind", ["additive", "linear_multiplicative",
                                  "lipschitz_functional"])
def test_isometry_within_three_se(kind, grid8, rng):
    model = build_noise_model(grid8, kind, 4, 0.8)
    state = random_state(grid8, rng, amplitude=1.5)
    rep = ito_isometry_check(model, state, 0.02, 4, 2000, seed=3)
    assert abs(rep["mc"] - rep["exact"]) <= 3 * rep["standard_error"]
