"""Cell-centered grid over the box [0,L1] x [0,L2] x (-h,0), fields, boundary
handling and the norms / inner products used everywhere else.

Fields live at cell centers, shape (..., n1, n2, nz) with arbitrary leading
batch axes.  Boundary conditions are encoded by on-demand reflection ghosts:

  * ``velocity``  -- odd reflection across the four lateral faces (value zero
                     on the face), mirror across top and bottom (zero normal
                     derivative),
  * ``tracer``    -- mirror across every face,
  * ``surface``   -- 2D field over the horizontal box, mirror across the four
                     lateral faces.

All quadrature is the midpoint rule, so sums over cell centers times the cell
volume.  The weighted H1 form uses face-centered gradients with half-weight
boundary faces on Dirichlet sides; this makes it exactly adjoint to the
diffusion stencil in operators.py.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

VELOCITY = "velocity"
TRACER = "tracer"
SURFACE = "surface"

COMPONENTS = ("u", "v", "T", "S")
BC_OF_COMPONENT = {"u": VELOCITY, "v": VELOCITY, "T": TRACER, "S": TRACER}


class GridError(ValueError):
    """Invalid grid specification."""


@dataclass(frozen=True)
class GridSpec:
    """Extents (m) and cell counts of the box domain."""

    l1: float
    l2: float
    h: float
    n1: int
    n2: int
    nz: int

    def validate(self):
        if min(self.l1, self.l2, self.h) <= 0:
            raise GridError(
                f"invalid-spec: extents must be positive, got "
                f"({self.l1}, {self.l2}, {self.h})"
            )
        if min(self.n1, self.n2, self.nz) < 4:
            raise GridError(
                f"invalid-spec: cell counts must be >= 4, got "
                f"({self.n1}, {self.n2}, {self.nz})"
            )


class Grid:
    """Geometry, spacings and boundary masks for a GridSpec."""

    def __init__(self, spec: GridSpec):
        spec.validate()
        self.spec = spec
        self.n1, self.n2, self.nz = spec.n1, spec.n2, spec.nz
        self.l1, self.l2, self.h = spec.l1, spec.l2, spec.h
        self.dx1 = spec.l1 / spec.n1
        self.dx2 = spec.l2 / spec.n2
        self.dz = spec.h / spec.nz
        self.x1 = (np.arange(spec.n1) + 0.5) * self.dx1
        self.x2 = (np.arange(spec.n2) + 0.5) * self.dx2
        # cell centers run from -h + dz/2 up to -dz/2
        self.z = -spec.h + (np.arange(spec.nz) + 0.5) * self.dz
        self.z_faces = -spec.h + np.arange(spec.nz + 1) * self.dz
        self.cell_volume = self.dx1 * self.dx2 * self.dz
        self.cell_area = self.dx1 * self.dx2
        self.shape = (spec.n1, spec.n2, spec.nz)
        self.surface_shape = (spec.n1, spec.n2)
        self.n_nodes = spec.n1 * spec.n2 * spec.nz

        top = np.zeros(self.shape, dtype=bool)
        top[:, :, -1] = True
        bottom = np.zeros(self.shape, dtype=bool)
        bottom[:, :, 0] = True
        lateral = np.zeros(self.shape, dtype=bool)
        lateral[0, :, :] = lateral[-1, :, :] = True
        lateral[:, 0, :] = lateral[:, -1, :] = True
        # cells adjacent to the surface, bottom and side walls
        self.mask_top = top
        self.mask_bottom = bottom
        self.mask_lateral = lateral

    @property
    def spacings(self):
        return (self.dx1, self.dx2, self.dz)

    def zeros(self, batch=()):
        return np.zeros(tuple(batch) + self.shape)

    def zeros_surface(self, batch=()):
        return np.zeros(tuple(batch) + self.surface_shape)

    def meshgrid(self):
        return np.meshgrid(self.x1, self.x2, self.z, indexing="ij")

    def __repr__(self):
        s = self.spec
        return f"Grid({s.n1}x{s.n2}x{s.nz}, L=({s.l1},{s.l2}), h={s.h})"


def make_grid(spec: GridSpec) -> Grid:
    """Build a Grid, raising GridError on an invalid spec."""
    return Grid(spec)


# ---------------------------------------------------------------------------
# ghost reflection
# ---------------------------------------------------------------------------

def _pad_edge(values, naxes):
    nd = values.ndim
    width = [(0, 0)] * (nd - naxes) + [(1, 1)] * naxes
    return np.pad(values, width, mode="edge")


def _negate_face(g, axis_from_end):
    ax = g.ndim - axis_from_end
    lo = [slice(None)] * g.ndim
    hi = [slice(None)] * g.ndim
    lo[ax] = 0
    hi[ax] = -1
    g[tuple(lo)] *= -1.0
    g[tuple(hi)] *= -1.0


def ghosted(values, bc_kind):
    """Return a copy padded with one reflection ghost layer per face.

    Mirror ghosts equal the adjacent interior cell (zero one-sided normal
    difference); odd ghosts equal its negative (zero value on the face).
    """
    if bc_kind == SURFACE:
        return _pad_edge(values, 2)
    g = _pad_edge(values, 3)
    if bc_kind == VELOCITY:
        _negate_face(g, 3)  # x1 faces
        _negate_face(g, 2)  # x2 faces
    elif bc_kind != TRACER:
        raise ValueError(f"unknown bc kind {bc_kind!r}")
    return g


def boundary_face_values(values, bc_kind, axis, end):
    """Interpolate a field onto one boundary face: mean of the ghost layer
    and the first interior layer.  Exactly zero across odd (Dirichlet)
    reflections."""
    g = ghosted(values, bc_kind)
    nspace = 2 if bc_kind == SURFACE else 3
    ax = g.ndim - nspace + axis
    sl_g = [slice(1, -1)] * g.ndim
    for a in range(g.ndim - nspace):
        sl_g[a] = slice(None)
    sl_i = list(sl_g)
    sl_g[ax] = 0 if end == 0 else -1
    sl_i[ax] = 1 if end == 0 else -2
    return 0.5 * (g[tuple(sl_g)] + g[tuple(sl_i)])


# ---------------------------------------------------------------------------
# state
# ---------------------------------------------------------------------------

@dataclass
class State:
    """Prognostic fields on a common grid.

    u, v are the horizontal velocity components; T, S are temperature and
    salinity anomalies about the reference values.  Arrays may carry leading
    batch axes.
    """

    grid: Grid
    u: np.ndarray
    v: np.ndarray
    T: np.ndarray
    S: np.ndarray
    time: float = 0.0

    @classmethod
    def zeros(cls, grid: Grid, batch=(), time=0.0):
        return cls(grid, grid.zeros(batch), grid.zeros(batch),
                   grid.zeros(batch), grid.zeros(batch), time)

    def copy(self):
        return State(self.grid, self.u.copy(), self.v.copy(),
                     self.T.copy(), self.S.copy(), self.time)

    def components(self):
        return {"u": self.u, "v": self.v, "T": self.T, "S": self.S}

    def velocity(self):
        return (self.u, self.v)

    def __add__(self, other):
        return State(self.grid, self.u + other.u, self.v + other.v,
                     self.T + other.T, self.S + other.S, self.time)

    def __sub__(self, other):
        return State(self.grid, self.u - other.u, self.v - other.v,
                     self.T - other.T, self.S - other.S, self.time)

    def scaled(self, a):
        return State(self.grid, a * self.u, a * self.v, a * self.T,
                     a * self.S, self.time)

    def all_finite(self):
        return all(np.isfinite(x).all() for x in
                   (self.u, self.v, self.T, self.S))


def apply_bcs(state: State) -> State:
    """Return a state whose discrete boundary conditions hold.

    With reflection ghosts built on demand from interior values, every
    interior configuration already satisfies the side-wall no-slip and the
    zero normal-derivative conditions, so interior nodes are never modified
    (and the call is idempotent by construction).  The call validates shapes
    and finiteness and returns an independent copy.
    """
    for name, arr in state.components().items():
        if arr.shape[-3:] != state.grid.shape:
            raise ValueError(
                f"field {name} shape {arr.shape} does not match grid "
                f"{state.grid.shape}"
            )
        if not np.isfinite(arr).all():
            raise FloatingPointError(f"non-finite values in component {name}")
    return state.copy()


def subtract_tracer_means(state: State) -> State:
    """Project T, S onto the zero-mean subspace (membership in the solution
    space is enforced by mean removal after each step)."""
    out = state.copy()
    out.T = out.T - out.T.mean(axis=(-3, -2, -1), keepdims=True)
    out.S = out.S - out.S.mean(axis=(-3, -2, -1), keepdims=True)
    return out


# ---------------------------------------------------------------------------
# derivatives
# ---------------------------------------------------------------------------

def centered_gradient(values, grid: Grid, bc_kind, axis):
    """Cell-centered second-order gradient along axis (0,1,2), using ghosts."""
    g = ghosted(values, bc_kind)
    nd = g.ndim
    ax = nd - 3 + axis
    hi = [slice(1, -1)] * nd
    lo = [slice(1, -1)] * nd
    hi[ax] = slice(2, None)
    lo[ax] = slice(None, -2)
    return (g[tuple(hi)] - g[tuple(lo)]) / (2.0 * grid.spacings[axis])


def free_gradient(values, grid: Grid, axis):
    """Gradient with second-order one-sided boundary stencils (no boundary
    condition assumed; used for derived fields such as vertical
    derivatives)."""
    nd = values.ndim
    ax = nd - 3 + axis
    return np.gradient(values, grid.spacings[axis], axis=ax, edge_order=2)


def face_gradients(values, grid: Grid, bc_kind):
    """Face-normal gradients per axis.

    Interior faces use the two adjacent cells; Dirichlet boundary faces carry
    the half-cell gradient (via the odd ghost), Neumann boundary faces are
    exactly zero (via the mirror ghost).  These are the gradients entering
    the weighted H1 form and the diffusion stencil.
    """
    g = ghosted(values, bc_kind)
    nd = g.ndim
    out = []
    for axis in range(3):
        ax = nd - 3 + axis
        hi = [slice(1, -1)] * nd
        lo = [slice(1, -1)] * nd
        hi[ax] = slice(1, None)
        lo[ax] = slice(None, -1)
        out.append((g[tuple(hi)] - g[tuple(lo)]) / grid.spacings[axis])
    return out


def _face_weights(grid: Grid, bc_kind, axis, shape):
    """Quadrature weight per face for the H1 form (cell volume, halved on
    Dirichlet boundary faces where the gradient spans half a cell)."""
    w = np.ones(shape[-3:])
    if bc_kind == VELOCITY and axis in (0, 1):
        sl0 = [slice(None)] * 3
        sl1 = [slice(None)] * 3
        sl0[axis] = 0
        sl1[axis] = -1
        w[tuple(sl0)] *= 0.5
        w[tuple(sl1)] *= 0.5
    return w * grid.cell_volume


def h1_form(a, b, grid: Grid, bc_kind, mu, nu):
    """Weighted gradient form mu*(grad_H a, grad_H b) + nu*(dz a, dz b)."""
    ga = face_gradients(a, grid, bc_kind)
    gb = face_gradients(b, grid, bc_kind)
    coeff = (mu, mu, nu)
    total = 0.0
    for axis in range(3):
        w = _face_weights(grid, bc_kind, axis, ga[axis].shape)
        total = total + (coeff[axis] * ga[axis] * gb[axis] * w).sum(
            axis=(-3, -2, -1))
    return total


# ---------------------------------------------------------------------------
# quadrature, norms and inner products
# ---------------------------------------------------------------------------

def integral(values, grid: Grid):
    """Midpoint-rule integral over the 3D box."""
    return values.sum(axis=(-3, -2, -1)) * grid.cell_volume


def surface_integral(values, grid: Grid):
    return values.sum(axis=(-2, -1)) * grid.cell_area


def _as_field_list(obj):
    if isinstance(obj, State):
        return [obj.u, obj.v, obj.T, obj.S]
    if isinstance(obj, (tuple, list)):
        return list(obj)
    return [obj]


def norm_l2(obj, grid: Grid):
    """L2 norm of a field, a velocity pair, or a full state."""
    acc = 0.0
    for f in _as_field_list(obj):
        acc = acc + integral(f * f, grid)
    return np.sqrt(acc)


def norm_lp(obj, p, grid: Grid):
    """L^p norm; for multiple components the integrand is sum_i |f_i|^p."""
    if p < 1:
        raise ValueError("p must be >= 1")
    acc = 0.0
    for f in _as_field_list(obj):
        acc = acc + integral(np.abs(f) ** p, grid)
    return acc ** (1.0 / p)


def norm_aniso(obj, q, p_z, grid: Grid):
    """Anisotropic norm: inner vertical L^{p_z}, outer horizontal L^q.

    For several components the vertical integrand is sum_i |f_i|^{p_z}.
    """
    if q < 1 or p_z < 1:
        raise ValueError("q and p_z must be >= 1")
    acc = 0.0
    for f in _as_field_list(obj):
        acc = acc + (np.abs(f) ** p_z).sum(axis=-1) * grid.dz
    col = acc ** (1.0 / p_z)
    return ((col ** q).sum(axis=(-2, -1)) * grid.cell_area) ** (1.0 / q)


def inner_l2(a, b, grid: Grid):
    """Plain L2 inner product of two fields or states."""
    fa, fb = _as_field_list(a), _as_field_list(b)
    acc = 0.0
    for x, y in zip(fa, fb):
        acc = acc + integral(x * y, grid)
    return acc


def inner_v(a: State, b: State, params, grid: Grid = None):
    """Weighted gradient inner product over all components.

    The velocity pair uses (mu_v, nu_v), temperature (mu_t, nu_t) and
    salinity (mu_s, nu_s); see the component-wise definition of the energy
    space.
    """
    grid = grid or a.grid
    total = h1_form(a.u, b.u, grid, VELOCITY, params.mu_v, params.nu_v)
    total = total + h1_form(a.v, b.v, grid, VELOCITY, params.mu_v, params.nu_v)
    total = total + h1_form(a.T, b.T, grid, TRACER, params.mu_t, params.nu_t)
    total = total + h1_form(a.S, b.S, grid, TRACER, params.mu_s, params.nu_s)
    return total


def norm_v(state: State, params):
    return np.sqrt(inner_v(state, state, params))


def norm(obj, kind, grid: Grid, *, p=None, q=None, p_z=None, params=None):
    """Dispatch on norm kind: 'l2', 'h1' (weighted), 'lp', 'aniso'."""
    kind = kind.lower()
    if kind == "l2":
        return norm_l2(obj, grid)
    if kind == "h1":
        if params is None:
            raise ValueError("h1 norm needs physical parameters")
        if not isinstance(obj, State):
            raise ValueError("h1 norm is defined for a full state")
        return norm_v(obj, params)
    if kind == "lp":
        if p is None:
            raise ValueError("lp norm needs p")
        return norm_lp(obj, p, grid)
    if kind == "aniso":
        if q is None or p_z is None:
            raise ValueError("aniso norm needs q and p_z")
        return norm_aniso(obj, q, p_z, grid)
    raise ValueError(f"unsupported-kind: {kind!r}")


def inner(a, b, kind, grid: Grid = None, *, params=None):
    """Dispatch on inner-product kind: 'l2' or 'v'."""
    kind = kind.lower()
    if isinstance(a, State) and isinstance(b, State):
        if a.grid is not b.grid and a.grid.shape != b.grid.shape:
            raise ValueError("grid-mismatch between states")
        grid = grid or a.grid
    if kind == "l2":
        return inner_l2(a, b, grid)
    if kind == "v":
        if params is None:
            raise ValueError("v inner product needs physical parameters")
        return inner_v(a, b, params, grid)
    raise ValueError(f"unsupported-kind: {kind!r}")
