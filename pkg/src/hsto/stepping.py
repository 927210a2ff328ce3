"""Time integration: the direct semi-implicit Euler-Maruyama scheme, the
linear stochastic / pathwise-residual pair, and trajectory orchestration.

Each step treats diffusion implicitly through an exact transform
diagonalization of the reflection-ghost stencils (sine transforms across the
no-slip walls, cosine transforms across zero-derivative faces), evaluates
transport, rotation, buoyancy and forcing explicitly at the left endpoint,
injects the Wiener increment at the left endpoint, then projects the
depth-averaged flow and removes tracer means.  All kernels accept leading
batch axes, so seed ensembles can be advanced as one array.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.fft import dct, dst, idct, idst

from .grid import Grid, GridSpec, State, make_grid, norm_l2, subtract_tracer_means
from .noise import (NoiseIncrement, NoiseModel, apply_sigma, build_noise_model,
                    sample_increment, velocity_noise_model)
from .operators import (PhysParams, Tendency, apply_advection, apply_buoyancy,
                        apply_coriolis)
from .pressure import SolverError, project_barotropic
from .synthetic import smooth_initial_state, tracer_mode, velocity_mode


class DiffusionSolver:
    """Exact solver for (I + dt * diffusion) X = B per component."""

    def __init__(self, grid: Grid):
        self.grid = grid
        n1, n2, nz = grid.n1, grid.n2, grid.nz

        def stencil_eigs(n, dx, dirichlet):
            m = np.arange(n) + (1 if dirichlet else 0)
            return (2 - 2 * np.cos(m * np.pi / n)) / dx ** 2

        self.lam = {
            "velocity": (stencil_eigs(n1, grid.dx1, True),
                         stencil_eigs(n2, grid.dx2, True),
                         stencil_eigs(nz, grid.dz, False)),
            "tracer": (stencil_eigs(n1, grid.dx1, False),
                       stencil_eigs(n2, grid.dx2, False),
                       stencil_eigs(nz, grid.dz, False)),
        }
        self._denom_cache = {}

    def _denominator(self, bc, mu, nu, dt):
        key = (bc, float(mu), float(nu), float(dt))
        if key not in self._denom_cache:
            l1, l2, lz = self.lam[bc]
            self._denom_cache[key] = 1.0 + dt * (
                mu * (l1[:, None, None] + l2[None, :, None])
                + nu * lz[None, None, :])
        return self._denom_cache[key]

    def solve(self, arr, component, params: PhysParams, dt):
        mu, nu = params.coefficients(component)
        dirichlet = component in ("u", "v")
        bc = "velocity" if dirichlet else "tracer"
        fwd, inv = (dst, idst) if dirichlet else (dct, idct)
        z = fwd(fwd(arr, type=2, norm="ortho", axis=-3),
                type=2, norm="ortho", axis=-2)
        z = dct(z, type=2, norm="ortho", axis=-1)
        z = z / self._denominator(bc, mu, nu, dt)
        z = idct(z, type=2, norm="ortho", axis=-1)
        return inv(inv(z, type=2, norm="ortho", axis=-2),
                   type=2, norm="ortho", axis=-3)

    def solve_state(self, state: State, params: PhysParams, dt) -> State:
        return State(state.grid,
                     self.solve(state.u, "u", params, dt),
                     self.solve(state.v, "v", params, dt),
                     self.solve(state.T, "T", params, dt),
                     self.solve(state.S, "S", params, dt),
                     state.time)


# ---------------------------------------------------------------------------
# forcing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ForcingSpec:
    """Deterministic body forcing: none, componentwise constants, or a fixed
    smooth mode profile scaled per component."""

    kind: str = "none"
    f_u: float = 0.0
    f_v: float = 0.0
    f_t: float = 0.0
    f_s: float = 0.0

    def fields(self, grid: Grid) -> Tendency:
        z = grid.zeros()
        if self.kind == "none":
            return Tendency(z, z.copy(), z.copy(), z.copy())
        if self.kind == "constant":
            return Tendency(np.full(grid.shape, self.f_u),
                            np.full(grid.shape, self.f_v),
                            np.full(grid.shape, self.f_t),
                            np.full(grid.shape, self.f_s))
        if self.kind == "mode":
            return Tendency(self.f_u * velocity_mode(grid, 1, 1, 1),
                            self.f_v * velocity_mode(grid, 1, 1, 1),
                            self.f_t * tracer_mode(grid, 1, 1, 0),
                            self.f_s * tracer_mode(grid, 1, 1, 0))
        raise ValueError(f"unknown forcing kind {self.kind!r}")


# ---------------------------------------------------------------------------
# single steps
# ---------------------------------------------------------------------------

def _explicit_tendency(eval_state: State, forcing: Tendency,
                       params: PhysParams, advection: bool) -> Tendency:
    out = forcing - apply_buoyancy(eval_state, params)
    out = out - apply_coriolis(eval_state, params)
    if advection:
        out = out - apply_advection(eval_state)
    return out


def _finish_momentum(state: State, params, dt, projection, p_tol, step_index):
    if not projection:
        return state, None
    try:
        u, v, p_s, _ = project_barotropic(state.u, state.v, state.grid,
                                          params.rho0, dt, p_tol)
    except SolverError as e:
        raise SolverError(f"{e} (time step {step_index})") from e
    state.u, state.v = u, v
    return state, p_s


def step_direct(state: State, forcing: Tendency, dt, increment: NoiseIncrement,
                model: NoiseModel, params: PhysParams, solver: DiffusionSolver,
                *, advection=True, projection=True, p_tol=1e-12,
                step_index=0):
    """One semi-implicit Euler-Maruyama step of the full system.

    Returns (new state, surface pressure of the step or None).
    """
    grid = state.grid
    expl = _explicit_tendency(state, forcing, params, advection)
    noise = apply_sigma(model, state, increment)
    star = State(grid,
                 state.u + dt * expl.du + noise.du,
                 state.v + dt * expl.dv + noise.dv,
                 state.T + dt * expl.dT + noise.dT,
                 state.S + dt * expl.dS + noise.dS,
                 state.time)
    new = solver.solve_state(star, params, dt)
    new, p_s = _finish_momentum(new, params, dt, projection, p_tol, step_index)
    new = subtract_tracer_means(new)
    new.time = state.time + dt
    return new, p_s


def step_ou(ou_state: State, dt, increment: NoiseIncrement,
            sigma_state: State, model: NoiseModel, params: PhysParams,
            solver: DiffusionSolver, *, projection=True,
            p_tol=1e-12) -> State:
    """Implicit-Euler step of the linear stochastic component: diffusion
    implicit, noise coefficient evaluated at `sigma_state`.

    The principal operator includes the constraint projection, so the
    componentwise solve is followed by the barotropic correction (a no-op
    when the state stays in an eigenmode span, e.g. additive built-in
    noise).
    """
    grid = ou_state.grid
    noise = apply_sigma(model, sigma_state, increment)
    star = State(grid, ou_state.u + noise.du, ou_state.v + noise.dv,
                 ou_state.T + noise.dT, ou_state.S + noise.dS, ou_state.time)
    new = solver.solve_state(star, params, dt)
    if projection:
        new.u, new.v, _, _ = project_barotropic(new.u, new.v, grid,
                                                params.rho0, dt, p_tol)
    new.time = ou_state.time + dt
    return new


def step_residual(hat_state: State, ou_state: State, forcing: Tendency, dt,
                  params: PhysParams, solver: DiffusionSolver, *,
                  advection=True, projection=True, p_tol=1e-12,
                  step_index=0):
    """Deterministic semi-implicit step of the pathwise residual equation.

    Transport, rotation and buoyancy are evaluated at the combined state
    (residual plus linear-stochastic part, same time level); the combined
    depth-averaged constraint is enforced with the correction applied to the
    residual velocity.  Returns (new residual state, surface pressure).
    """
    grid = hat_state.grid
    combined = hat_state + ou_state
    expl = _explicit_tendency(combined, forcing, params, advection)
    star = State(grid,
                 hat_state.u + dt * expl.du,
                 hat_state.v + dt * expl.dv,
                 hat_state.T + dt * expl.dT,
                 hat_state.S + dt * expl.dS,
                 hat_state.time)
    new = solver.solve_state(star, params, dt)
    p_s = None
    if projection:
        from .pressure import (div_surface, grad_surface,
                               solve_neumann_poisson, vertical_average)
        du = div_surface(vertical_average(new.u + ou_state.u, grid),
                         vertical_average(new.v + ou_state.v, grid), grid)
        try:
            p_s, _ = solve_neumann_poisson(-(params.rho0 / dt) * du, grid,
                                           p_tol)
        except SolverError as e:
            raise SolverError(f"{e} (time step {step_index})") from e
        gx, gy = grad_surface(p_s, grid)
        scale = dt / params.rho0
        new.u = new.u - scale * gx[..., :, :, None]
        new.v = new.v - scale * gy[..., :, :, None]
    new = subtract_tracer_means(new)
    new.time = hat_state.time + dt
    return new, p_s


# ---------------------------------------------------------------------------
# run configuration and trajectory driver
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    grid: GridSpec
    physics: PhysParams = dc_field(default_factory=PhysParams)
    noise_kind: str = "additive"
    noise_k: int = 8
    noise_amplitude: object = 0.0
    forcing: ForcingSpec = dc_field(default_factory=ForcingSpec)
    dt: float = 1e-2
    steps: int = 100
    mode: str = "direct"
    seed: int = 0
    cadence: int = 1
    snapshot_cadence: int = 0
    advection: bool = True
    projection: bool = True
    ic: str = "zero"
    ic_amplitude: float = 1.0
    blowup_ceiling: float = 1e12
    pressure_tol: float = 1e-12

    def validate(self):
        self.grid.validate()
        self.physics.validate()
        if self.dt <= 0:
            raise ValueError("[run].dt must be positive")
        if self.steps < 0:
            raise ValueError("[run].steps must be >= 0")
        if self.mode not in ("direct", "split", "both"):
            raise ValueError(f"[run].mode must be direct|split|both, "
                             f"got {self.mode!r}")
        if self.cadence < 1:
            raise ValueError("[output].cadence must be >= 1")
        if self.ic not in ("zero", "smooth"):
            raise ValueError(f"[run].ic must be zero|smooth, got {self.ic!r}")


def initial_state(config: RunConfig, grid: Grid) -> State:
    if config.ic == "zero":
        return State.zeros(grid)
    return smooth_initial_state(grid, config.ic_amplitude)


def make_noise_model(config: RunConfig, grid: Grid) -> NoiseModel:
    return build_noise_model(grid, config.noise_kind, config.noise_k,
                             config.noise_amplitude)


@dataclass
class TrajectoryResult:
    final: State
    records: list
    hat: State = None
    ou: State = None
    stopped_early: bool = False
    snapshots: list = dc_field(default_factory=list)


def run_trajectory(config: RunConfig, snapshot_sink=None) -> TrajectoryResult:
    """Advance one trajectory in the configured mode, recording diagnostics
    at the configured cadence.

    The noise indicator of the linear stochastic component is realized
    operationally: once the blow-up detector fires the run stops cleanly and
    the final record carries the flag.  `snapshot_sink(step, state)` is
    called at the snapshot cadence when provided.
    """
    from .diagnostics import DiagnosticsAccumulator
    config.validate()
    grid = make_grid(config.grid)
    params = config.physics
    solver = DiffusionSolver(grid)
    model = make_noise_model(config, grid)
    forcing = config.forcing.fields(grid)
    state = initial_state(config, grid)
    hat = ou = None
    if config.mode in ("split", "both"):
        ou = State.zeros(grid)          # linear part starts from rest
        hat = state.copy()              # residual carries the initial data
    direct_needed = config.mode in ("direct", "both")

    acc = DiagnosticsAccumulator(grid, params, config.blowup_ceiling,
                                 forcing=forcing)
    records = [acc.record(state if direct_needed else (hat + ou),
                          split_gap=_split_gap(state, hat, ou, config.mode,
                                               grid))]
    stopped = False
    if snapshot_sink is not None and config.snapshot_cadence:
        snapshot_sink(0, state if direct_needed else (hat + ou))
    for n in range(config.steps):
        inc = sample_increment(config.seed, n, model.K, config.dt)
        if stopped:
            inc = NoiseIncrement(np.zeros_like(inc.dw), config.dt,
                                 config.seed, n)
        if direct_needed:
            sigma_state = state
        else:
            sigma_state = hat + ou
        if config.mode in ("split", "both"):
            new_hat, _ = step_residual(
                hat, ou, forcing, config.dt, params, solver,
                advection=config.advection, projection=config.projection,
                p_tol=config.pressure_tol, step_index=n)
            new_ou = step_ou(ou, config.dt, inc, sigma_state, model, params,
                             solver, projection=config.projection,
                             p_tol=config.pressure_tol)
            hat, ou = new_hat, new_ou
        if direct_needed:
            state, _ = step_direct(
                state, forcing, config.dt, inc, model, params, solver,
                advection=config.advection, projection=config.projection,
                p_tol=config.pressure_tol, step_index=n)
        current = state if direct_needed else (hat + ou)
        if snapshot_sink is not None and config.snapshot_cadence and \
                (n + 1) % config.snapshot_cadence == 0:
            snapshot_sink(n + 1, current)
        if (n + 1) % config.cadence == 0 or n + 1 == config.steps:
            rec = acc.record(current, split_gap=_split_gap(
                state, hat, ou, config.mode, grid))
            records.append(rec)
            if rec.blowup_flag:
                stopped = True
                break
    final = state if direct_needed else (hat + ou)
    return TrajectoryResult(final, records, hat=hat, ou=ou,
                            stopped_early=stopped)


def _split_gap(state, hat, ou, mode, grid):
    if mode != "both":
        return None
    return float(norm_l2(state - (hat + ou), grid))


def run_ou_ensemble(grid: Grid, params: PhysParams, model: NoiseModel, dt,
                    steps, n_traj, base_seed=0, sigma_state: State = None):
    """Advance `n_traj` coupled realizations of the linear stochastic system
    as one batched state; the coefficient is frozen at `sigma_state`
    (default: the rest state, which makes every kind linear).

    Returns the final batched state.
    """
    solver = DiffusionSolver(grid)
    ou = State.zeros(grid, batch=(n_traj,))
    if sigma_state is None:
        sigma_state = State.zeros(grid)
    for n in range(steps):
        inc = sample_increment(base_seed, n, model.K, dt, batch=n_traj)
        ou = step_ou(ou, dt, inc, sigma_state, model, params, solver)
    return ou


def mode_coefficients(state: State, model: NoiseModel):
    """Project a (possibly batched) state onto the unit-norm noise modes."""
    from .grid import inner_l2
    out = np.empty(state.u.shape[:-3] + (model.K,))
    comps = state.components()
    for j, m in enumerate(model.modes):
        out[..., j] = inner_l2(comps[m.component], m.shape, state.grid)
    return out
