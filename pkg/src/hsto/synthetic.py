"""Smooth synthetic fields compatible with the boundary conditions.

Velocity components are sums of sin(i1 pi x1/L1) sin(i2 pi x2/L2)
cos(k pi (z+h)/h) with k >= 1: they vanish on the side walls, have zero
one-sided vertical differences at top and bottom, and their vertical cell
average is exactly zero (so the depth-averaged flow is divergence free by
construction).  Tracers use products of cosines with at least one nonzero
index, which are exactly mean free on the grid.

The mode coefficients are drawn once from a seeded generator and the fields
are *evaluated* on whatever grid is supplied, so the same continuum field can
be sampled at several resolutions for refinement studies.
"""

from __future__ import annotations

import numpy as np

from .grid import Grid, State


def velocity_mode(grid: Grid, i1, i2, k):
    """sin/sin/cos product mode for a velocity component (k >= 1)."""
    if k < 1:
        raise ValueError("velocity modes need k >= 1 to be depth-balanced")
    fx = np.sin(i1 * np.pi * grid.x1 / grid.l1)
    fy = np.sin(i2 * np.pi * grid.x2 / grid.l2)
    fz = np.cos(k * np.pi * (grid.z + grid.h) / grid.h)
    return fx[:, None, None] * fy[None, :, None] * fz[None, None, :]


def tracer_mode(grid: Grid, i1, i2, k):
    """cos/cos/cos product mode for a tracer ((i1,i2,k) != 0)."""
    if (i1, i2, k) == (0, 0, 0):
        raise ValueError("tracer modes need a nonzero index to be mean free")
    fx = np.cos(i1 * np.pi * grid.x1 / grid.l1)
    fy = np.cos(i2 * np.pi * grid.x2 / grid.l2)
    fz = np.cos(k * np.pi * (grid.z + grid.h) / grid.h)
    return fx[:, None, None] * fy[None, :, None] * fz[None, None, :]


def surface_mode(grid: Grid, i1, i2):
    """cos/cos product mode over the horizontal box (zero normal derivative)."""
    fx = np.cos(i1 * np.pi * grid.x1 / grid.l1)
    fy = np.cos(i2 * np.pi * grid.x2 / grid.l2)
    return fx[:, None] * fy[None, :]


def _draw_modes(rng, max_index, n_modes, k_min):
    modes = []
    for _ in range(n_modes):
        i1 = int(rng.integers(1, max_index + 1))
        i2 = int(rng.integers(1, max_index + 1))
        k = int(rng.integers(k_min, max_index + 1))
        amp = float(rng.normal())
        modes.append((i1, i2, k, amp))
    return modes


class FieldRecipe:
    """Mode list for one component; evaluates on any grid."""

    def __init__(self, kind, modes):
        self.kind = kind
        self.modes = modes

    def evaluate(self, grid: Grid):
        out = grid.zeros()
        build = velocity_mode if self.kind == "velocity" else tracer_mode
        for i1, i2, k, amp in self.modes:
            out += amp * build(grid, i1, i2, k)
        return out


class StateRecipe:
    """Recipes for all four components of a state."""

    def __init__(self, u, v, T, S):
        self.u, self.v, self.T, self.S = u, v, T, S

    def evaluate(self, grid: Grid, amplitude=1.0, time=0.0):
        return State(grid,
                     amplitude * self.u.evaluate(grid),
                     amplitude * self.v.evaluate(grid),
                     amplitude * self.T.evaluate(grid),
                     amplitude * self.S.evaluate(grid),
                     time)


def random_state_recipe(rng, max_index=3, n_modes=4) -> StateRecipe:
    """Random boundary-compatible smooth state, reusable across grids."""
    rec = []
    for kind in ("velocity", "velocity", "tracer", "tracer"):
        k_min = 1 if kind == "velocity" else 0
        modes = _draw_modes(rng, max_index, n_modes, k_min)
        if kind == "tracer":
            modes = [(i1, i2, k, a) for (i1, i2, k, a) in modes]
        rec.append(FieldRecipe(kind, modes))
    return StateRecipe(*rec)


def random_state(grid: Grid, rng, amplitude=1.0, max_index=3, n_modes=4):
    """Convenience: draw a recipe and evaluate it on the grid."""
    return random_state_recipe(rng, max_index, n_modes).evaluate(
        grid, amplitude)


def random_velocity(grid: Grid, rng, amplitude=1.0, max_index=3, n_modes=4):
    """Boundary-compatible velocity pair with depth-balanced columns."""
    u = FieldRecipe("velocity", _draw_modes(rng, max_index, n_modes, 1))
    v = FieldRecipe("velocity", _draw_modes(rng, max_index, n_modes, 1))
    return amplitude * u.evaluate(grid), amplitude * v.evaluate(grid)


def smooth_initial_state(grid: Grid, amplitude=1.0) -> State:
    """Fixed low-mode initial condition used by the 'smooth' config choice."""
    u = velocity_mode(grid, 1, 1, 1) + 0.5 * velocity_mode(grid, 2, 1, 1)
    v = velocity_mode(grid, 1, 2, 1) - 0.5 * velocity_mode(grid, 1, 1, 2)
    T = tracer_mode(grid, 1, 0, 1) + 0.25 * tracer_mode(grid, 1, 1, 0)
    S = tracer_mode(grid, 0, 1, 1) - 0.25 * tracer_mode(grid, 1, 1, 1)
    return State(grid, amplitude * u, amplitude * v,
                 0.5 * amplitude * T, 0.5 * amplitude * S)
