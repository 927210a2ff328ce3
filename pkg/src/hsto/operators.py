"""Spatial operators of the hydrostatic system: diffusion, advection,
Coriolis, buoyancy-gradient pressure part, diagnostic vertical velocity and
the hydrostatic pressure reconstruction.

Sign convention: each apply_* returns the operator value as it appears on
the left side of the evolution system, so the time derivative is

    dU/dt = forcing - diffusion - advection - buoyancy - coriolis
            - (1/rho0) grad p_s        (momentum only).

The diffusion stencil is the flux-difference form of the face gradients in
grid.py, which makes <diffusion(U), U#> equal to the weighted gradient form
exactly (up to rounding).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import (Grid, State, TRACER, VELOCITY, centered_gradient,
                   face_gradients, ghosted)


@dataclass(frozen=True)
class PhysParams:
    """Physical constants; tracers are carried as anomalies about the
    reference values t_r, s_r."""

    mu_v: float = 1e-2
    nu_v: float = 1e-2
    mu_t: float = 1e-2
    nu_t: float = 1e-2
    mu_s: float = 1e-2
    nu_s: float = 1e-2
    f: float = 0.0
    g: float = 9.81
    rho0: float = 1000.0
    beta_t: float = 2e-4
    beta_s: float = 8e-4
    t_r: float = 0.0
    s_r: float = 0.0

    def validate(self):
        for name in ("mu_v", "nu_v", "mu_t", "nu_t", "mu_s", "nu_s"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.rho0 <= 0:
            raise ValueError("rho0 must be positive")
        if self.g < 0:
            raise ValueError("g must be nonnegative")

    def coefficients(self, component):
        if component in ("u", "v"):
            return self.mu_v, self.nu_v
        if component == "T":
            return self.mu_t, self.nu_t
        if component == "S":
            return self.mu_s, self.nu_s
        raise KeyError(component)


@dataclass
class Tendency:
    """Per-component operator values (units: field per second)."""

    du: np.ndarray
    dv: np.ndarray
    dT: np.ndarray
    dS: np.ndarray

    @classmethod
    def zeros_like(cls, state: State):
        z = np.zeros_like
        return cls(z(state.u), z(state.v), z(state.T), z(state.S))

    def components(self):
        return {"u": self.du, "v": self.dv, "T": self.dT, "S": self.dS}

    def __add__(self, other):
        return Tendency(self.du + other.du, self.dv + other.dv,
                        self.dT + other.dT, self.dS + other.dS)

    def __sub__(self, other):
        return Tendency(self.du - other.du, self.dv - other.dv,
                        self.dT - other.dT, self.dS - other.dS)

    def scaled(self, a):
        return Tendency(a * self.du, a * self.dv, a * self.dT, a * self.dS)

    def as_state(self, grid, time=0.0):
        return State(grid, self.du, self.dv, self.dT, self.dS, time)

    def all_finite(self):
        return all(np.isfinite(x).all() for x in
                   (self.du, self.dv, self.dT, self.dS))


def density(T, S, params: PhysParams):
    """Linear equation of state on tracer anomalies:
    rho = rho0 (1 + beta_t * T + beta_s * S)."""
    return params.rho0 * (1.0 + params.beta_t * T + params.beta_s * S)


def column_integral_to_surface(values, grid: Grid):
    """Midpoint integral from each cell center up to z = 0.

    The cell's own layer contributes half a spacing, every full layer above
    contributes dz.
    """
    rev = np.flip(values, axis=-1)
    above = np.flip(np.cumsum(rev, axis=-1), axis=-1) - values
    return grid.dz * above + 0.5 * grid.dz * values


def horizontal_divergence(u, v, grid: Grid):
    """Centered divergence of the horizontal velocity (odd ghosts encode the
    no-slip side walls)."""
    return (centered_gradient(u, grid, VELOCITY, 0)
            + centered_gradient(v, grid, VELOCITY, 1))


def vertical_velocity(u, v, grid: Grid):
    """Diagnostic vertical velocity at cell centers: integral of the
    horizontal divergence from z up to the surface (zero at z = 0)."""
    return column_integral_to_surface(horizontal_divergence(u, v, grid), grid)


def bottom_vertical_velocity(u, v, grid: Grid):
    """Vertical velocity evaluated at the bottom face: the full-column
    integral of the divergence, i.e. h times the divergence of the vertical
    mean.  Vanishes to solver tolerance after the barotropic projection."""
    div = horizontal_divergence(u, v, grid)
    return grid.dz * div.sum(axis=-1)


def hydrostatic_pressure(T, S, p_s, params: PhysParams, grid: Grid):
    """Full pressure p(z) = p_s + g * integral_z^0 rho dz'."""
    rho = density(T, S, params)
    return p_s[..., :, :, None] + params.g * column_integral_to_surface(
        rho, grid)


def apply_diffusion(state: State, params: PhysParams) -> Tendency:
    """Principal linear operator: -mu Delta - nu dzz per component, as the
    divergence of the face gradients (exactly adjoint to the weighted
    gradient form)."""
    grid = state.grid
    out = {}
    for name, arr in state.components().items():
        mu, nu = params.coefficients(name)
        bc = VELOCITY if name in ("u", "v") else TRACER
        grads = face_gradients(arr, grid, bc)
        acc = np.zeros_like(arr)
        for axis, coeff in zip(range(3), (mu, mu, nu)):
            g = grads[axis]
            nd = g.ndim
            ax = nd - 3 + axis
            hi = [slice(None)] * nd
            lo = [slice(None)] * nd
            hi[ax] = slice(1, None)
            lo[ax] = slice(None, -1)
            acc -= coeff * (g[tuple(hi)] - g[tuple(lo)]) / grid.spacings[axis]
        out[name] = acc
    return Tendency(out["u"], out["v"], out["T"], out["S"])


def apply_advection(state: State, other: State = None) -> Tendency:
    """Quadratic transport term: horizontal advection by the velocity of
    `state` plus vertical advection by its diagnostic vertical velocity,
    both acting on the components of `other` (defaults to `state`)."""
    grid = state.grid
    other = other if other is not None else state
    w = vertical_velocity(state.u, state.v, grid)
    out = {}
    for name, arr in other.components().items():
        bc = VELOCITY if name in ("u", "v") else TRACER
        dx = centered_gradient(arr, grid, bc, 0)
        dy = centered_gradient(arr, grid, bc, 1)
        dzz = centered_gradient(arr, grid, bc, 2)
        out[name] = state.u * dx + state.v * dy + w * dzz
    return Tendency(out["u"], out["v"], out["T"], out["S"])


def apply_buoyancy(state: State, params: PhysParams) -> Tendency:
    """Second pressure part: momentum operator value
    -g * integral_z^0 (beta_t grad T + beta_s grad S) dz'; zero on tracers."""
    grid = state.grid
    tx = centered_gradient(state.T, grid, TRACER, 0)
    ty = centered_gradient(state.T, grid, TRACER, 1)
    sx = centered_gradient(state.S, grid, TRACER, 0)
    sy = centered_gradient(state.S, grid, TRACER, 1)
    gx = params.beta_t * tx + params.beta_s * sx
    gy = params.beta_t * ty + params.beta_s * sy
    du = -params.g * column_integral_to_surface(gx, grid)
    dv = -params.g * column_integral_to_surface(gy, grid)
    return Tendency(du, dv, np.zeros_like(state.T), np.zeros_like(state.S))


def apply_coriolis(state: State, params: PhysParams) -> Tendency:
    """Rotation term f k x v = f (-v, u); zero on tracers, and pointwise
    orthogonal to the velocity."""
    return Tendency(-params.f * state.v, params.f * state.u,
                    np.zeros_like(state.T), np.zeros_like(state.S))


def pressure_gradient_tendency(p_s, state: State, params: PhysParams):
    """Momentum tendency -(1/rho0) grad p_s, broadcast over depth."""
    from .pressure import grad_surface  # local import to avoid a cycle
    gx, gy = grad_surface(p_s, state.grid)
    du = -(gx / params.rho0)[..., :, :, None] * np.ones_like(state.u)
    dv = -(gy / params.rho0)[..., :, :, None] * np.ones_like(state.v)
    return Tendency(du, dv, np.zeros_like(state.T), np.zeros_like(state.S))


def drift(state: State, forcing: Tendency, p_s, params: PhysParams,
          include_advection=True) -> Tendency:
    """Deterministic right-hand side of the time integrator:
    F - diffusion - advection - buoyancy - coriolis - (1/rho0) grad p_s."""
    out = forcing - apply_diffusion(state, params)
    if include_advection:
        out = out - apply_advection(state)
    out = out - apply_buoyancy(state, params)
    out = out - apply_coriolis(state, params)
    if p_s is not None:
        out = out + pressure_gradient_tendency(p_s, state, params)
    return out
