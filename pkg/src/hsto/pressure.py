"""Surface pressure: the barotropic constraint, its elliptic solve, vertical
averaging, and the time-integrated Stokes pressure-estimate checker.

The discrete constraint is div_s(mean_z v) = 0, where div_s is the centered
divergence with odd side-wall ghosts and mean_z the column average.  Its
exact adjoint is -grad_s with mirror ghosts, so the composed operator
K = -div_s grad_s is symmetric positive semidefinite with constants as its
only null space.  Solving K p = -(rho0/dt) div_s(mean_z v*) and correcting
v <- v - (dt/rho0) grad_s p therefore zeroes the constraint to solver
tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dst, idst

from .grid import Grid, State, SURFACE, ghosted

MEAN_AXES = (-2, -1)


class SolverError(RuntimeError):
    """Iterative solve failed to reach the tolerance (solver-divergence)."""


def vertical_average(values, grid: Grid):
    """Column mean over the uniform vertical spacing (midpoint rule)."""
    return values.mean(axis=-1)


def _ghost_surface_odd(values):
    g = np.pad(values, [(0, 0)] * (values.ndim - 2) + [(1, 1), (1, 1)],
               mode="edge")
    g[..., 0, :] *= -1.0
    g[..., -1, :] *= -1.0
    g[..., :, 0] *= -1.0
    g[..., :, -1] *= -1.0
    return g


def div_surface(vx, vy, grid: Grid):
    """Centered horizontal divergence of a surface vector field whose value
    vanishes on the side walls (odd ghosts)."""
    gx = _ghost_surface_odd(vx)
    gy = _ghost_surface_odd(vy)
    return ((gx[..., 2:, 1:-1] - gx[..., :-2, 1:-1]) / (2 * grid.dx1)
            + (gy[..., 1:-1, 2:] - gy[..., 1:-1, :-2]) / (2 * grid.dx2))


def grad_surface(p, grid: Grid):
    """Centered horizontal gradient of a surface scalar with zero normal
    derivative on the side walls (mirror ghosts); exact negative adjoint of
    div_surface."""
    g = ghosted(p, SURFACE)
    gx = (g[..., 2:, 1:-1] - g[..., :-2, 1:-1]) / (2 * grid.dx1)
    gy = (g[..., 1:-1, 2:] - g[..., 1:-1, :-2]) / (2 * grid.dx2)
    return gx, gy


def neumann_poisson_operator(p, grid: Grid):
    """K p = -div_surface(grad_surface p): SPD on zero-mean surface fields."""
    gx, gy = grad_surface(p, grid)
    return -div_surface(gx, gy, grid)


@dataclass
class SolveInfo:
    iterations: int
    residual: float
    residual_history: list = field(default_factory=list)


def solve_neumann_poisson(rhs, grid: Grid, tol=1e-10, maxiter=None):
    """Conjugate-residual iteration for K p = rhs with zero-mean deflation.

    The residual 2-norm is non-increasing by construction (the update
    minimizes it over the Krylov space), which plain CG does not guarantee.
    `tol` is relative to |rhs|; an absolute floor protects the rhs ~ 0 case.
    Supports leading batch axes (solved jointly until every member meets the
    tolerance).
    """
    if maxiter is None:
        maxiter = 10 * grid.n1 * grid.n2
    b = rhs - rhs.mean(axis=MEAN_AXES, keepdims=True)
    bnorm = np.sqrt((b * b).sum(axis=MEAN_AXES))
    target = np.maximum(tol * bnorm, 1e-300)
    floor = 1e-14 * max(float(np.max(bnorm)), 1.0)
    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    ar = neumann_poisson_operator(r, grid)
    ap = ar.copy()
    rar = (r * ar).sum(axis=MEAN_AXES)
    history = []
    res = np.sqrt((r * r).sum(axis=MEAN_AXES))
    for it in range(maxiter):
        history.append(float(np.max(res)))
        if np.all(res <= np.maximum(target, floor)):
            return x - x.mean(axis=MEAN_AXES, keepdims=True), SolveInfo(
                it, float(np.max(res)), history)
        apap = (ap * ap).sum(axis=MEAN_AXES)
        alpha = np.where(apap > 0, rar / np.where(apap > 0, apap, 1.0), 0.0)
        x = x + alpha[..., None, None] * p
        r = r - alpha[..., None, None] * ap
        ar = neumann_poisson_operator(r, grid)
        rar_new = (r * ar).sum(axis=MEAN_AXES)
        beta = np.where(rar > 0, rar_new / np.where(rar > 0, rar, 1.0), 0.0)
        p = r + beta[..., None, None] * p
        ap = ar + beta[..., None, None] * ap
        rar = rar_new
        res = np.sqrt((r * r).sum(axis=MEAN_AXES))
    raise SolverError(
        f"solver-divergence: surface Poisson solve stalled at residual "
        f"{float(np.max(res)):.3e} after {maxiter} iterations")


def project_barotropic(u, v, grid: Grid, rho0, dt, tol=1e-12):
    """Remove the divergent part of the depth-averaged flow.

    Returns the corrected (u, v), the surface pressure that effected the
    correction (zero mean), and solver info.
    """
    du = div_surface(vertical_average(u, grid), vertical_average(v, grid),
                     grid)
    p_s, info = solve_neumann_poisson(-(rho0 / dt) * du, grid, tol)
    gx, gy = grad_surface(p_s, grid)
    scale = dt / rho0
    return (u - scale * gx[..., :, :, None],
            v - scale * gy[..., :, :, None], p_s, info)


def averaged_forcing(state: State, forcing, params, grid: Grid = None):
    """Depth-averaged momentum sources driving the barotropic flow.

    The quadratic part uses the identity that averaging the vertical
    advection of a depth-balanced column equals averaging (div v) v, so
    only first derivatives of v appear.  Returns the two horizontal
    components of rho0 * mean_z(sources).
    """
    from .grid import VELOCITY, centered_gradient
    from .operators import (apply_buoyancy, apply_coriolis,
                            horizontal_divergence)
    grid = grid or state.grid
    u, v = state.u, state.v
    divv = horizontal_divergence(u, v, grid)
    hadv_u = (u * centered_gradient(u, grid, VELOCITY, 0)
              + v * centered_gradient(u, grid, VELOCITY, 1))
    hadv_v = (u * centered_gradient(v, grid, VELOCITY, 0)
              + v * centered_gradient(v, grid, VELOCITY, 1))
    g1x = -params.rho0 * vertical_average(hadv_u + divv * u, grid)
    g1y = -params.rho0 * vertical_average(hadv_v + divv * v, grid)
    buoy = apply_buoyancy(state, params)
    cor = apply_coriolis(state, params)
    g2x = params.rho0 * vertical_average(-buoy.du - cor.du + forcing.du, grid)
    g2y = params.rho0 * vertical_average(-buoy.dv - cor.dv + forcing.dv, grid)
    return g1x + g2x, g1y + g2y


def solve_surface_pressure(state: State, forcing, params, tol=1e-10):
    """Surface pressure from the divergence of the depth-averaged
    non-pressure momentum tendencies:
    div((1/rho0) grad p_s) = div(mean_z tendencies)."""
    from .operators import (apply_advection, apply_buoyancy, apply_coriolis,
                            apply_diffusion)
    grid = state.grid
    tend = forcing - apply_diffusion(state, params)
    tend = tend - apply_advection(state)
    tend = tend - apply_buoyancy(state, params)
    tend = tend - apply_coriolis(state, params)
    rhs = div_surface(vertical_average(tend.du, grid),
                      vertical_average(tend.dv, grid), grid)
    p_s, _ = solve_neumann_poisson(-params.rho0 * rhs, grid, tol)
    return p_s


# ---------------------------------------------------------------------------
# 2D Stokes pressure-estimate checker
# ---------------------------------------------------------------------------

class SurfaceDirichletDiffusion:
    """Exact solve of (I - dt nu Lap) q = b for a surface field vanishing on
    the side walls, by sine-transform diagonalization of the odd-ghost
    stencil."""

    def __init__(self, grid: Grid):
        self.grid = grid
        m1 = np.arange(grid.n1) + 1
        m2 = np.arange(grid.n2) + 1
        self.lam1 = (2 - 2 * np.cos(m1 * np.pi / grid.n1)) / grid.dx1 ** 2
        self.lam2 = (2 - 2 * np.cos(m2 * np.pi / grid.n2)) / grid.dx2 ** 2

    def solve(self, b, nu, dt):
        z = dst(dst(b, type=2, norm="ortho", axis=-2),
                type=2, norm="ortho", axis=-1)
        denom = 1.0 + dt * nu * (self.lam1[:, None] + self.lam2[None, :])
        z = z / denom
        return idst(idst(z, type=2, norm="ortho", axis=-1),
                    type=2, norm="ortho", axis=-2)


def _surface_lp_vector_norm(vx, vy, r, grid: Grid):
    mag = np.sqrt(vx * vx + vy * vy)
    return ((mag ** r).sum(axis=MEAN_AXES) * grid.cell_area) ** (1.0 / r)


def _surface_grad_norm(qx, qy, grid: Grid):
    gx1, gy1 = grad_surface(qx, grid)
    gx2, gy2 = grad_surface(qy, grid)
    s = (gx1 ** 2 + gy1 ** 2 + gx2 ** 2 + gy2 ** 2).sum(axis=MEAN_AXES)
    return np.sqrt(s * grid.cell_area)


@dataclass
class StokesCase:
    case_id: int
    lhs: float
    rhs: float
    ratio: float
    grid_n: int


def stokes_pressure_check(forcing_family, nu, r, horizon, grid: Grid,
                          q0_family=None, steps=512, tol=1e-12):
    """Integrate the 2D Stokes system for each case and compare the time
    integral of |grad p|^2 in L^r against |grad q(0)|^2 plus the time
    integral of |f|^2 in L^r.

    forcing_family: list of callables t -> (fx, fy) surface fields.
    q0_family: optional matching list of initial velocities (default zero);
    initial data are projected so the constraint holds at t = 0.
    Backward Euler in time with dt = horizon/steps.
    """
    if not 1 < r < 2:
        raise ValueError("r must lie in (1, 2)")
    solver = SurfaceDirichletDiffusion(grid)
    dt = horizon / steps
    cases = []
    for idx, f_of_t in enumerate(forcing_family):
        if q0_family is not None:
            qx, qy = q0_family[idx]
            qx, qy, _, _ = project_barotropic(
                qx[..., None], qy[..., None], grid, 1.0, dt, tol)
            qx, qy = qx[..., 0], qy[..., 0]
        else:
            qx = grid.zeros_surface()
            qy = grid.zeros_surface()
        rhs0 = _surface_grad_norm(qx, qy, grid) ** 2
        lhs = 0.0
        rhs_f = 0.0
        for n in range(steps):
            t = n * dt
            fx, fy = f_of_t(t)
            rhs_f += dt * _surface_lp_vector_norm(fx, fy, r, grid) ** 2
            qx_star = solver.solve(qx + dt * fx, nu, dt)
            qy_star = solver.solve(qy + dt * fy, nu, dt)
            qx3, qy3, p, _ = project_barotropic(
                qx_star[..., None], qy_star[..., None], grid, 1.0, dt, tol)
            qx, qy = qx3[..., 0], qy3[..., 0]
            gpx, gpy = grad_surface(p, grid)
            lhs += dt * _surface_lp_vector_norm(gpx, gpy, r, grid) ** 2
        rhs = rhs0 + rhs_f
        ratio = lhs / rhs if rhs > 0 else 0.0
        cases.append(StokesCase(idx, float(lhs), float(rhs), float(ratio),
                                grid.n1))
    return cases


def stokes_report_csv(cases):
    lines = ["case_id,lhs,rhs,ratio,grid_N"]
    for c in cases:
        lines.append(f"{c.case_id},{c.lhs:.17g},{c.rhs:.17g},"
                     f"{c.ratio:.17g},{c.grid_n}")
    return "\n".join(lines) + "\n"
