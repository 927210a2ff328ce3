"""Truncated cylindrical Wiener forcing and the three coefficient families:
additive, linear multiplicative, and bounded-Lipschitz functional.

Increments come from a counter-based generator keyed by (trajectory seed,
step index), so ensembles are reproducible regardless of scheduling and any
(trajectory, step) increment can be regenerated independently.

Built-in mode shapes are unit-L2 products of sines and cosines compatible
with the boundary conditions; velocity modes have exactly zero column mean
on the grid (they never disturb the barotropic constraint) and every mode
is an exact eigenfunction of the discrete diffusion operator, which the
convergence and stationary-variance oracles rely on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Grid, State, norm_l2
from .operators import Tendency
from .synthetic import tracer_mode, velocity_mode

KINDS = ("additive", "linear_multiplicative", "lipschitz_functional")


@dataclass
class NoiseMode:
    """One forcing direction: which component it acts on, its spatial shape
    (unit L2 norm), amplitude, and the wavenumber triple it was built from."""

    component: str
    amplitude: float
    shape: np.ndarray
    indices: tuple

    def eigenvalue(self, grid: Grid, params):
        """Exact eigenvalue of the discrete diffusion stencil on this mode."""
        i1, i2, k = self.indices
        mu, nu = params.coefficients(self.component)

        lam1 = (2 - 2 * np.cos(i1 * np.pi / grid.n1)) / grid.dx1 ** 2
        lam2 = (2 - 2 * np.cos(i2 * np.pi / grid.n2)) / grid.dx2 ** 2
        lamz = (2 - 2 * np.cos(k * np.pi / grid.nz)) / grid.dz ** 2
        return mu * (lam1 + lam2) + nu * lamz


def _unit_l2(shape, grid: Grid):
    return shape / norm_l2(shape, grid)


def _default_indices(kind_velocity, count):
    """Wavenumber triples ordered by |index|^2, lowest first."""
    cands = []
    rng_max = 4
    for i1 in range(0 if not kind_velocity else 1, rng_max):
        for i2 in range(0 if not kind_velocity else 1, rng_max):
            for k in range(1 if kind_velocity else 0, rng_max):
                if not kind_velocity and (i1, i2, k) == (0, 0, 0):
                    continue
                if kind_velocity and (i1 == 0 or i2 == 0):
                    continue
                cands.append((i1 * i1 + i2 * i2 + k * k, i1, i2, k))
    cands.sort()
    return [(i1, i2, k) for _, i1, i2, k in cands[:count]]


@dataclass
class NoiseModel:
    """Finite-mode noise coefficient sigma with a declared Lipschitz bound."""

    kind: str
    modes: list
    lipschitz_bound: float = 0.0
    # quadrant index per mode for the functional kind's local average
    regions: list = field(default_factory=list)

    @property
    def K(self):
        return len(self.modes)

    def amplitudes(self):
        return np.array([m.amplitude for m in self.modes])


def build_noise_model(grid: Grid, kind="additive", k_modes=8,
                      amplitude=1.0) -> NoiseModel:
    """Default model: the K lowest boundary-compatible modes, alternating
    velocity (u, v) and tracer (T, S) components."""
    if kind not in KINDS:
        raise ValueError(f"unknown noise kind {kind!r}")
    amps = np.broadcast_to(np.asarray(amplitude, dtype=float),
                           (k_modes,)).copy()
    comps = ["u", "v", "T", "S"]
    n_vel = sum(1 for j in range(k_modes) if comps[j % 4] in ("u", "v"))
    vel_idx = _default_indices(True, max(n_vel, 1))
    tr_idx = _default_indices(False, max(k_modes - n_vel, 1))
    modes = []
    iv = it = 0
    for j in range(k_modes):
        comp = comps[j % 4]
        if comp in ("u", "v"):
            idx = vel_idx[iv % len(vel_idx)]
            iv += 1
            shape = velocity_mode(grid, *idx)
        else:
            idx = tr_idx[it % len(tr_idx)]
            it += 1
            shape = tracer_mode(grid, *idx)
        modes.append(NoiseMode(comp, float(amps[j]), _unit_l2(shape, grid),
                               idx))
    model = NoiseModel(kind, modes, regions=[j % 4 for j in range(k_modes)])
    model.lipschitz_bound = _lipschitz_bound(model, grid)
    return model


def velocity_noise_model(grid: Grid, k_modes=4, amplitude=1.0,
                         kind="additive", component="u") -> NoiseModel:
    """All modes on one velocity component, lowest wavenumbers first (used by
    the stationary-variance studies)."""
    amps = np.broadcast_to(np.asarray(amplitude, dtype=float),
                           (k_modes,)).copy()
    idx = _default_indices(True, k_modes)
    modes = [NoiseMode(component, float(amps[j]),
                       _unit_l2(velocity_mode(grid, *idx[j]), grid), idx[j])
             for j in range(k_modes)]
    model = NoiseModel(kind, modes, regions=[0] * k_modes)
    model.lipschitz_bound = _lipschitz_bound(model, grid)
    return model


def _lipschitz_bound(model: NoiseModel, grid: Grid):
    """Computable Lipschitz constant of sigma in the L2 norm."""
    if model.kind == "additive":
        return 0.0
    total = 0.0
    for j, m in enumerate(model.modes):
        if model.kind == "linear_multiplicative":
            total += (m.amplitude * np.abs(m.shape).max()) ** 2
        else:
            vol = grid.l1 * grid.l2 * grid.h / 4.0  # quadrant volume
            total += (m.amplitude * 1.0) ** 2 / vol  # |mode|_L2 = 1
    return float(np.sqrt(total))


# ---------------------------------------------------------------------------
# increments
# ---------------------------------------------------------------------------

@dataclass
class NoiseIncrement:
    """K Gaussian draws with variance dt, reproducible from (seed, step)."""

    dw: np.ndarray
    dt: float
    seed: int
    step: int


def sample_increment(seed, step, k_modes, dt, batch=None) -> NoiseIncrement:
    """Draw the step's increments from a Philox stream keyed by
    (seed, step).  With `batch`, returns shape (batch, K): consecutive
    trajectories use seed offsets seed..seed+batch-1 and stay individually
    reproducible."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if batch is None:
        gen = np.random.Generator(np.random.Philox(
            key=np.array([seed, step], dtype=np.uint64)))
        dw = gen.standard_normal(k_modes) * np.sqrt(dt)
    else:
        dw = np.empty((batch, k_modes))
        root = np.sqrt(dt)
        for b in range(batch):
            gen = np.random.Generator(np.random.Philox(
                key=np.array([seed + b, step], dtype=np.uint64)))
            dw[b] = gen.standard_normal(k_modes) * root
    return NoiseIncrement(dw, dt, seed, step)


# ---------------------------------------------------------------------------
# coefficient application
# ---------------------------------------------------------------------------

def _quadrant_mean(arr, region, grid: Grid):
    """Mean of a field over one horizontal quadrant (batch-aware)."""
    n1h, n2h = grid.n1 // 2, grid.n2 // 2
    sl1 = slice(0, n1h) if region in (0, 1) else slice(n1h, None)
    sl2 = slice(0, n2h) if region in (0, 2) else slice(n2h, None)
    return arr[..., sl1, sl2, :].mean(axis=(-3, -2, -1))


def _smooth_clamp(x):
    return np.tanh(x)


def sigma_factor(model: NoiseModel, state: State, j):
    """State-dependent factor multiplying mode j (scalar or per-batch)."""
    m = model.modes[j]
    if model.kind == "additive":
        return 1.0
    comp = state.components()[m.component]
    if model.kind == "linear_multiplicative":
        return comp  # pointwise factor
    region = model.regions[j] if model.regions else 0
    return _smooth_clamp(_quadrant_mean(comp, region, state.grid))


def _project_to_solution_space(out, grid: Grid):
    """Constrain a raw coefficient value to the solution space: momentum
    gets the depth-mean divergence removed, tracers their spatial mean.
    (Additive and functional coefficients are built in the space already;
    pointwise products are not.)"""
    from .pressure import project_barotropic
    u, v, _, _ = project_barotropic(out["u"], out["v"], grid, 1.0, 1.0,
                                    tol=1e-13)
    out["u"], out["v"] = u, v
    for c in ("T", "S"):
        out[c] = out[c] - out[c].mean(axis=(-3, -2, -1), keepdims=True)
    return out


def sigma_mode_field(model: NoiseModel, state: State, j,
                     project=True) -> Tendency:
    """The coefficient value sigma_j(U) for mode j as a full tendency
    (the projection can spread a raw single-component mode across both
    momentum components)."""
    grid = state.grid
    m = model.modes[j]
    fac = sigma_factor(model, state, j)
    if model.kind == "lipschitz_functional":
        fac = np.asarray(fac)[..., None, None, None]
    raw = m.amplitude * m.shape * fac
    batch = raw.shape[:-3]
    out = {c: np.zeros(batch + grid.shape) for c in ("u", "v", "T", "S")}
    out[m.component] = out[m.component] + raw
    if project and model.kind == "linear_multiplicative":
        out = _project_to_solution_space(out, grid)
    return Tendency(out["u"], out["v"], out["T"], out["S"])


def apply_sigma(model: NoiseModel, state: State, increment: NoiseIncrement,
                project=True) -> Tendency:
    """sigma(U) dW: sum over modes of the coefficient value times its draw,
    constrained to the solution space (one projection of the assembled sum,
    equal to projecting each mode by linearity)."""
    grid = state.grid
    batch = increment.dw.shape[:-1]
    out = {c: np.zeros(batch + grid.shape) for c in ("u", "v", "T", "S")}
    for j, m in enumerate(model.modes):
        dwj = increment.dw[..., j]
        fac = sigma_factor(model, state, j)
        if model.kind == "lipschitz_functional":
            fac = np.asarray(fac)[..., None, None, None]
        f = m.amplitude * m.shape * fac
        out[m.component] = out[m.component] + f * np.asarray(
            dwj)[..., None, None, None]
    if project and model.kind == "linear_multiplicative":
        out = _project_to_solution_space(out, grid)
    return Tendency(out["u"], out["v"], out["T"], out["S"])


def sigma_l2_sq(model: NoiseModel, state: State):
    """Squared Hilbert-Schmidt size sum_j |sigma_j(U)|_{L2}^2."""
    grid = state.grid
    total = 0.0
    for j in range(model.K):
        f = sigma_mode_field(model, state, j)
        total = total + norm_l2([f.du, f.dv, f.dT, f.dS], grid) ** 2
    return total


def growth_constant(model: NoiseModel, grid: Grid):
    """Constant c with |sigma(U)|_{HS} <= c (1 + |U|) for the built-in
    families."""
    amps = model.amplitudes()
    if model.kind == "additive" or model.kind == "lipschitz_functional":
        return float(np.sqrt((amps ** 2).sum()))  # |phi| <= 1, |shape| = 1
    sup = np.array([np.abs(m.shape).max() for m in model.modes])
    return float(np.sqrt(((amps * sup) ** 2).sum()))


# ---------------------------------------------------------------------------
# Monte-Carlo second-moment identity
# ---------------------------------------------------------------------------

def ito_isometry_check(model: NoiseModel, state: State, dt, steps, m_runs,
                       seed=0):
    """Freeze sigma at `state` and compare the Monte-Carlo mean of
    |sum_n sigma(U) dW_n|_{L2}^2 with its closed form
    sum_j |sigma_j(U)|^2 * steps * dt.

    Returns a dict with both sides, the relative deviation, and the
    standard error of the Monte-Carlo mean.
    """
    grid = state.grid
    fields = [sigma_mode_field(model, state, j) for j in range(model.K)]
    # Gram matrix of the coefficient values; modes on different components
    # or distinct wavenumbers start orthogonal, but a frozen multiplicative
    # factor (and its projection) can correlate them, so keep the full sum.
    totals = np.zeros((m_runs, model.K))
    for n in range(steps):
        inc = sample_increment(seed, n, model.K, dt, batch=m_runs)
        totals += inc.dw
    gram = np.empty((model.K, model.K))
    from .grid import inner_l2
    for a in range(model.K):
        fa = fields[a]
        for b in range(a, model.K):
            fb = fields[b]
            ab = sum(inner_l2(getattr(fa, n_), getattr(fb, n_), grid)
                     for n_ in ("du", "dv", "dT", "dS"))
            gram[a, b] = gram[b, a] = ab
    sq = np.einsum("ma,ab,mb->m", totals, gram, totals)
    mc = float(sq.mean())
    se = float(sq.std(ddof=1) / np.sqrt(m_runs)) if m_runs > 1 else 0.0
    exact = float(np.trace(gram) * steps * dt)
    dev = abs(mc - exact) / exact if exact > 0 else abs(mc)
    return {"mc": mc, "exact": exact, "relative_deviation": dev,
            "standard_error": se, "m_runs": m_runs}
