"""Standalone numerical verification of the analytic toolkit: the
constructive Gronwall variant, the anisotropic embedding, the trilinear
transport bound, the quartic dissipation inequality, and the discrete
residuals of the fourth-power and vertical-gradient evolution identities.

Empirical constants are reported, never certified: each inequality checker
returns the observed ratios so refinement studies can confirm stability.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .diagnostics import dz_fields, weighted_gradient_norm
from .grid import (Grid, State, TRACER, VELOCITY, centered_gradient,
                   free_gradient, h1_form, inner_l2, integral, norm_aniso,
                   norm_l2, norm_lp, norm_v)
from .noise import apply_sigma, sample_increment, sigma_mode_field
from .operators import (PhysParams, apply_advection, apply_buoyancy,
                        apply_coriolis, apply_diffusion, vertical_velocity)

SAFETY_MARGIN = 1e-9


# ---------------------------------------------------------------------------
# Gronwall lemma with constructive constant
# ---------------------------------------------------------------------------

@dataclass
class GronwallInput:
    """Sampled data on a uniform grid over [0, t]; f, g, h, X nonnegative."""

    t: float
    p: float
    f: np.ndarray
    g: np.ndarray
    h: np.ndarray
    X: np.ndarray

    def validate(self):
        n = len(self.f)
        if not (len(self.g) == len(self.h) == len(self.X) == n and n >= 2):
            raise ValueError("f, g, h, X must share a uniform sample grid")
        if self.p < 1:
            raise ValueError("exponent p must be >= 1")
        for name in ("f", "g", "h", "X"):
            arr = getattr(self, name)
            if not np.isfinite(arr).all() or (arr < 0).any():
                raise ValueError(f"{name} must be finite and nonnegative")

    @property
    def times(self):
        return np.linspace(0.0, self.t, len(self.f))


class HypothesisViolation(ValueError):
    """The window inequality fails on the supplied samples."""


@dataclass
class GronwallResult:
    c: float
    bound: float
    epsilon: float
    n: int
    M: float
    int_h: float


def _prefix_trapezoid(y, dt):
    out = np.zeros(len(y))
    out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * dt)
    return out


def _window_sup(x):
    """sup over [a, b] of x, as an (m, m) upper-triangular table."""
    m = len(x)
    out = np.empty((m, m))
    for a in range(m):
        out[a, a:] = np.maximum.accumulate(x[a:])
    return out


def check_window_hypothesis(inp: GronwallInput, rtol=1e-9):
    """Scan every sample window [ta, tb] for the assumed inequality
    sup X <= f(ta)^p + sup X * int g + int h; raise on a counterexample."""
    dt = inp.t / (len(inp.f) - 1)
    G = _prefix_trapezoid(inp.g, dt)
    H = _prefix_trapezoid(inp.h, dt)
    sup = _window_sup(inp.X)
    m = len(inp.f)
    fa = (inp.f ** inp.p)[:, None]
    intg = G[None, :] - G[:, None]
    inth = H[None, :] - H[:, None]
    rhs = fa + sup * intg + inth
    scale = max(1.0, float(np.nanmax(sup)))
    bad = sup > rhs + rtol * scale
    iu = np.triu_indices(m)
    mask = np.zeros((m, m), dtype=bool)
    mask[iu] = True
    bad &= mask
    if bad.any():
        a, b = np.argwhere(bad)[0]
        raise HypothesisViolation(
            f"hypothesis-violation: window [{a * dt:.6g}, {b * dt:.6g}] has "
            f"sup X = {sup[a, b]:.6g} > {rhs[a, b]:.6g}")


def gronwall_bound(inp: GronwallInput, check_hypothesis=False):
    """Execute the constructive proof on the samples and return the constant
    c = 2 M^p together with the bound c (1 + int h).

    The steps: epsilon is the largest window length over which the integral
    of g stays below 1/2; n is the smallest integer with t/n < epsilon/2;
    M is the smallest value above max(2, f(0)) whose superlevel set of |f|
    has sample measure below t/(4n) (plus a strict-inequality margin).
    """
    inp.validate()
    if check_hypothesis:
        check_window_hypothesis(inp)
    m = len(inp.f)
    dt = inp.t / (m - 1)
    G = _prefix_trapezoid(inp.g, dt)
    # largest window (in whole sample intervals) with integral < 1/2
    j_max = 0
    for j in range(1, m):
        w = G[j:] - G[:-j]
        if w.max() < 0.5:
            j_max = j
        else:
            break
    if j_max == 0:
        epsilon = 0.5 * dt  # even one interval exceeds 1/2; degenerate
    else:
        epsilon = j_max * dt
    n = int(np.floor(2.0 * inp.t / epsilon)) + 1
    m_floor = max(2.0, float(inp.f[0]))
    # sample measure of {|f| >= M} must stay below t/(4n)
    allowed = inp.t / (4.0 * n)
    sample_weight = inp.t / m
    max_bad = int(np.ceil(allowed / sample_weight)) - 1
    max_bad = max(max_bad, 0)
    desc = np.sort(inp.f)[::-1]
    candidate = m_floor + SAFETY_MARGIN
    if (inp.f >= candidate).sum() * sample_weight >= allowed:
        candidate = max(candidate, desc[max_bad] + SAFETY_MARGIN)
    M = candidate
    int_h = float(_prefix_trapezoid(inp.h, dt)[-1])
    c = 2.0 * M ** inp.p
    return GronwallResult(c=c, bound=c * (1.0 + int_h), epsilon=epsilon,
                          n=n, M=M, int_h=int_h)


def generate_gronwall_instance(rng, n_samples=200, t=None, p=None):
    """Random (f, g, h, X) built to satisfy the window hypothesis.

    X starts from a smooth positive candidate and is shrunk so that every
    constrained window obeys sup X (1 - int g) <= f(ta)^p + int h, which is
    equivalent to the hypothesis whenever int g < 1.
    """
    t = float(rng.uniform(0.5, 3.0)) if t is None else t
    p = float(rng.choice([1.0, 1.5, 2.0, 3.0])) if p is None else p
    ts = np.linspace(0.0, t, n_samples)

    def smooth_positive(lo, hi, decay=1.0):
        a = rng.uniform(lo, hi)
        out = np.full(n_samples, a)
        for k in range(1, 4):
            out = out + rng.normal(0, a / (3 * k)) * np.sin(
                2 * np.pi * k * ts / t + rng.uniform(0, 2 * np.pi))
        return np.abs(out) + 1e-3

    f = smooth_positive(0.5, 4.0)
    g = smooth_positive(0.05, 1.5)
    h = smooth_positive(0.0, 2.0)
    X = smooth_positive(0.5, 5.0)
    dt = t / (n_samples - 1)
    G = _prefix_trapezoid(g, dt)
    H = _prefix_trapezoid(h, dt)
    sup = _window_sup(X)
    intg = G[None, :] - G[:, None]
    inth = H[None, :] - H[:, None]
    fa = (f ** p)[:, None]
    iu = np.triu_indices(n_samples)
    num = (fa + inth)[iu]
    den = (sup * (1.0 - intg))[iu]
    constrained = den > 0
    if constrained.any():
        shrink = (num[constrained] / den[constrained]).min()
        X = X * min(1.0, 0.999 * shrink)
    return GronwallInput(t=t, p=p, f=f, g=g, h=h, X=X)


# ---------------------------------------------------------------------------
# inequality checkers
# ---------------------------------------------------------------------------

@dataclass
class RatioReport:
    ratios: np.ndarray
    skipped: int = 0
    cases: list = dc_field(default_factory=list)  # optional (lhs, rhs) pairs

    @property
    def max_ratio(self):
        return float(self.ratios.max()) if self.ratios.size else 0.0

    def csv(self, label="case"):
        lines = [f"{label}_id,lhs,rhs,ratio"]
        for i, r in enumerate(self.ratios):
            lhs, rhs = self.cases[i] if self.cases else (float("nan"),) * 2
            lines.append(f"{i},{lhs:.17g},{rhs:.17g},{r:.17g}")
        return "\n".join(lines) + "\n"


def h2_norm(values, grid: Grid):
    """Discrete full H2 norm: value, gradient and Hessian (mixed entries
    counted in both orders), one-sided-corrected derivatives."""
    total = integral(values * values, grid)
    firsts = [free_gradient(values, grid, a) for a in range(3)]
    for fg in firsts:
        total = total + integral(fg * fg, grid)
    for a in range(3):
        for b in range(3):
            s = free_gradient(firsts[a], grid, b)
            total = total + integral(s * s, grid)
    return np.sqrt(total)


def velocity_v_norm(state: State, params: PhysParams):
    grid = state.grid
    s = h1_form(state.u, state.u, grid, VELOCITY, params.mu_v, params.nu_v)
    s = s + h1_form(state.v, state.v, grid, VELOCITY, params.mu_v,
                    params.nu_v)
    return np.sqrt(s)


def verify_aniso_embedding(velocity_pairs, q, params: PhysParams,
                           grid: Grid) -> RatioReport:
    """Ratio of the mixed-norm |v| (outer horizontal L^q, inner vertical L2)
    to |v|^(1-s) ||v||^s with s = 1 - 2/q, per velocity pair."""
    if q < 2:
        raise ValueError("q must be >= 2")
    s = 1.0 - 2.0 / q
    ratios, cases, skipped = [], [], 0
    for (u, v) in velocity_pairs:
        st = State(grid, u, v, grid.zeros(), grid.zeros())
        l2 = float(norm_l2((u, v), grid))
        if l2 == 0.0:
            skipped += 1
            continue
        lhs = float(norm_aniso((u, v), q, 2, grid))
        rhs = l2 ** (1 - s) * float(velocity_v_norm(st, params)) ** s
        ratios.append(lhs / rhs)
        cases.append((lhs, rhs))
    return RatioReport(np.array(ratios), skipped, cases)


def verify_B_bound(triples, params: PhysParams, grid: Grid) -> RatioReport:
    """Observed constant in the trilinear transport bound: the pairing of
    the advection term against an arbitrary state, divided by the anisotropic
    right-hand side built from L4, energy, second-order and vertical-gradient
    norms."""
    ratios, cases, skipped = [], [], 0
    for (ua, ub, uc) in triples:
        adv = apply_advection(ua, ub)
        lhs = abs(float(inner_l2(adv.as_state(grid), uc, grid)))
        l4 = float(norm_lp((ua.u, ua.v), 4, grid))
        vb = float(norm_v(ub, params))
        aub = apply_diffusion(ub, params)
        l2_aub = float(norm_l2([aub.du, aub.dv, aub.dT, aub.dS], grid))
        l2_uc = float(norm_l2(uc, grid))
        va = float(velocity_v_norm(ua, params))
        h2a = float(np.sqrt(h2_norm(ua.u, grid) ** 2
                            + h2_norm(ua.v, grid) ** 2))
        dzb = dz_fields(ub)
        l2_dzb = float(norm_l2(list(dzb.values()), grid))
        v_dzb = float(weighted_gradient_norm(dzb, params, grid))
        rhs = (l4 * vb ** 0.25 * l2_aub ** 0.75 * l2_uc
               + va ** 0.5 * h2a ** 0.5 * l2_dzb ** 0.5 * v_dzb ** 0.5
               * l2_uc)
        if rhs == 0.0:
            if lhs == 0.0:
                ratios.append(0.0)
                cases.append((0.0, 0.0))
            else:
                skipped += 1
            continue
        ratios.append(lhs / rhs)
        cases.append((lhs, rhs))
    return RatioReport(np.array(ratios), skipped, cases)


def verify_dissipation(u, v, params: PhysParams, grid: Grid):
    """Both sides of the quartic dissipation bound with
    kappa = min(mu_v, nu_v)/8.

    The gradient of the squared velocity is evaluated through the chain rule
    (grad v^2 = 2 v grad v), so both sides use identical difference
    quotients and the pointwise inequality carries over exactly.
    """
    kappa = min(params.mu_v, params.nu_v) / 8.0
    lhs = 0.0
    rhs = 0.0
    for comp in (u, v):
        gx = centered_gradient(comp, grid, VELOCITY, 0)
        gy = centered_gradient(comp, grid, VELOCITY, 1)
        gz = centered_gradient(comp, grid, VELOCITY, 2)
        c2 = comp * comp
        lhs = lhs + kappa * 4.0 * integral(
            c2 * (gx * gx + gy * gy + gz * gz), grid)
        rhs = rhs + 0.5 * params.mu_v * integral(c2 * (gx * gx + gy * gy),
                                                 grid)
        rhs = rhs + 0.5 * params.nu_v * integral(c2 * gz * gz, grid)
    return float(lhs), float(rhs)


# ---------------------------------------------------------------------------
# fourth-power evolution identity (split mode)
# ---------------------------------------------------------------------------

def quarter_l4_power(u, v, grid: Grid):
    return 0.25 * float(norm_lp((u, v), 4, grid)) ** 4


def l4_identity_terms(hat: State, ou: State, p_s, forcing, params: PhysParams,
                      advection=True):
    """Quadrature of the dissipation and the six source terms driving
    d/dt (1/4)|residual velocity|_{L4}^4 at one time level.

    With `advection` off the two transport sources are zero, matching a run
    whose dynamics exclude the quadratic term.
    """
    grid = hat.grid
    comb = hat + ou
    hu3, hv3 = hat.u ** 3, hat.v ** 3
    diss = 0.0
    for comp in (hat.u, hat.v):
        gx = centered_gradient(comp, grid, VELOCITY, 0)
        gy = centered_gradient(comp, grid, VELOCITY, 1)
        gz = centered_gradient(comp, grid, VELOCITY, 2)
        c2 = comp * comp
        diss += 3.0 * params.mu_v * float(integral(c2 * (gx * gx + gy * gy),
                                                   grid))
        diss += 3.0 * params.nu_v * float(integral(c2 * gz * gz, grid))
    j1 = 0.0
    j2 = 0.0
    if advection:
        for ck, h3 in (("u", hu3), ("v", hv3)):
            arr = getattr(ou, ck)
            dx = centered_gradient(arr, grid, VELOCITY, 0)
            dy = centered_gradient(arr, grid, VELOCITY, 1)
            j1 -= float(integral((comb.u * dx + comb.v * dy) * h3, grid))
        w = vertical_velocity(comb.u, comb.v, grid)
        for ck, h3 in (("u", hu3), ("v", hv3)):
            dz = centered_gradient(getattr(ou, ck), grid, VELOCITY, 2)
            j2 -= float(integral(w * dz * h3, grid))
    from .pressure import grad_surface
    gpx, gpy = grad_surface(p_s, grid)
    j3 = -(1.0 / params.rho0) * float(
        integral(gpx[..., :, :, None] * hu3 + gpy[..., :, :, None] * hv3,
                 grid))
    buoy = apply_buoyancy(comb, params)
    j4 = -float(integral(buoy.du * hu3 + buoy.dv * hv3, grid))
    cor = apply_coriolis(comb, params)
    j5 = -float(integral(cor.du * hu3 + cor.dv * hv3, grid))
    j6 = float(integral(forcing.du * hu3 + forcing.dv * hv3, grid))
    return {"dissipation": diss, "J1": j1, "J2": j2, "J3": j3, "J4": j4,
            "J5": j5, "J6": j6}


def l4_identity_residual(times, quarter_l4, dissipation, j_sum):
    """Finite-difference residual of the fourth-power balance: the forward
    difference of (1/4)|v_hat|^4 plus the dissipation minus the sources,
    one value per step."""
    times = np.asarray(times, dtype=float)
    quarter_l4 = np.asarray(quarter_l4, dtype=float)
    dissipation = np.asarray(dissipation, dtype=float)
    j_sum = np.asarray(j_sum, dtype=float)
    n = len(times) - 1
    if not (len(quarter_l4) == n + 1 and len(dissipation) >= n
            and len(j_sum) >= n):
        raise ValueError("missing-terms: need power at every level and "
                         "terms at every step")
    dt = np.diff(times)
    return (quarter_l4[1:] - quarter_l4[:-1]) / dt \
        + dissipation[:n] - j_sum[:n]


def run_l4_identity_study(grid: Grid, params: PhysParams, model, forcing,
                          ic: State, dt, steps, seed=0, advection=True):
    """Split-mode run recording the fourth-power balance terms each step.

    Returns (times, quarter powers, residual series, term scale).
    """
    from .stepping import DiffusionSolver, step_ou, step_residual
    solver = DiffusionSolver(grid)
    hat = ic.copy()
    ou = State.zeros(grid)
    times = [0.0]
    powers = [quarter_l4_power(hat.u, hat.v, grid)]
    diss, jsum = [], []
    scale = 0.0
    for n in range(steps):
        inc = sample_increment(seed, n, model.K, dt)
        sigma_state = hat + ou
        new_hat, p_s = step_residual(hat, ou, forcing, dt, params, solver,
                                     advection=advection, step_index=n)
        if p_s is None:
            p_s = grid.zeros_surface()
        terms = l4_identity_terms(hat, ou, p_s, forcing, params,
                                  advection=advection)
        diss.append(terms["dissipation"])
        jsum.append(sum(terms[f"J{i}"] for i in range(1, 7)))
        scale = max(scale, abs(terms["dissipation"]),
                    *(abs(terms[f"J{i}"]) for i in range(1, 7)))
        new_ou = step_ou(ou, dt, inc, sigma_state, model, params, solver)
        hat, ou = new_hat, new_ou
        times.append((n + 1) * dt)
        powers.append(quarter_l4_power(hat.u, hat.v, grid))
    resid = l4_identity_residual(times, powers, diss, jsum)
    return np.array(times), np.array(powers), resid, max(scale, 1e-300)


# ---------------------------------------------------------------------------
# vertical-gradient evolution identities (direct mode)
# ---------------------------------------------------------------------------

def _dz_inner(a, b, grid):
    return float(integral(a * b, grid))


def dz_balance_terms(state: State, forcing, model, params: PhysParams,
                     advection=True):
    """Drift-side terms of the d|dz .|^2 balances for the momentum pair and
    the temperature at one time level, plus the quadratic-variation
    correction sum_j |dz sigma_j|^2 per block."""
    grid = state.grid
    dz = dz_fields(state)
    out = {}
    # momentum block
    j_nl = 0.0
    j_nl_T = 0.0
    if advection:
        adv = apply_advection(state)
        dz_adv_u = free_gradient(adv.du, grid, 2)
        dz_adv_v = free_gradient(adv.dv, grid, 2)
        j_nl = -2.0 * (_dz_inner(dz_adv_u, dz["u"], grid)
                       + _dz_inner(dz_adv_v, dz["v"], grid))
        dz_adv_T = free_gradient(adv.dT, grid, 2)
        j_nl_T = -2.0 * _dz_inner(dz_adv_T, dz["T"], grid)
    tx = centered_gradient(state.T, grid, TRACER, 0)
    ty = centered_gradient(state.T, grid, TRACER, 1)
    sx = centered_gradient(state.S, grid, TRACER, 0)
    sy = centered_gradient(state.S, grid, TRACER, 1)
    gx = params.g * (params.beta_t * tx + params.beta_s * sx)
    gy = params.g * (params.beta_t * ty + params.beta_s * sy)
    j_buoy = -2.0 * (_dz_inner(gx, dz["u"], grid)
                     + _dz_inner(gy, dz["v"], grid))
    j_f = 2.0 * (_dz_inner(free_gradient(forcing.du, grid, 2), dz["u"], grid)
                 + _dz_inner(free_gradient(forcing.dv, grid, 2), dz["v"],
                             grid))
    dissip = 2.0 * float(weighted_gradient_norm(
        {"u": dz["u"], "v": dz["v"]}, params, grid)) ** 2
    ito = 0.0
    for j in range(model.K):
        f = sigma_mode_field(model, state, j)
        for comp in (f.du, f.dv):
            dzf = free_gradient(comp, grid, 2)
            ito += float(integral(dzf * dzf, grid))
    out["momentum"] = {"drift": j_nl + j_buoy + j_f, "dissipation": dissip,
                       "ito": ito}
    # temperature block
    j_f_T = 2.0 * _dz_inner(free_gradient(forcing.dT, grid, 2), dz["T"], grid)
    dissip_T = 2.0 * float(weighted_gradient_norm({"T": dz["T"]}, params,
                                                  grid)) ** 2
    ito_T = 0.0
    for j in range(model.K):
        f = sigma_mode_field(model, state, j)
        dzf = free_gradient(f.dT, grid, 2)
        ito_T += float(integral(dzf * dzf, grid))
    out["temperature"] = {"drift": j_nl_T + j_f_T, "dissipation": dissip_T,
                          "ito": ito_T}
    return out, dz


def dz_identity_residual(times, sq_norms, terms, martingale=None):
    """Residual of d|dz .|^2 + 2||dz .||^2 = drift + ito (+ martingale/dt),
    one value per step; series supplied per block."""
    times = np.asarray(times, dtype=float)
    sq = np.asarray(sq_norms, dtype=float)
    n = len(times) - 1
    if len(sq) != n + 1 or len(terms) < n:
        raise ValueError("missing-terms: need |dz .|^2 at every level and "
                         "terms at every step")
    dt = np.diff(times)
    drift = np.array([t["drift"] for t in terms[:n]])
    diss = np.array([t["dissipation"] for t in terms[:n]])
    ito = np.array([t["ito"] for t in terms[:n]])
    resid = (sq[1:] - sq[:-1]) / dt + diss - drift - ito
    if martingale is not None:
        resid = resid - np.asarray(martingale[:n]) / dt
    return resid


def run_dz_identity_study(grid: Grid, params: PhysParams, model, forcing,
                          ic: State, dt, steps, seed=0, advection=True,
                          include_martingale=True):
    """Direct-mode run recording the vertical-gradient balances.

    Returns {'momentum': residual array, 'temperature': residual array,
    'scale': term scale} with the martingale contribution included per step
    when requested (its regenerated increments match the trajectory's).
    """
    from .stepping import DiffusionSolver, step_direct
    solver = DiffusionSolver(grid)
    state = ic.copy()
    times = [0.0]
    sq_m, sq_T = [], []
    terms_m, terms_T = [], []
    mart_m, mart_T = [], []
    dz0 = dz_fields(state)
    sq_m.append(float(norm_l2([dz0["u"], dz0["v"]], grid)) ** 2)
    sq_T.append(float(norm_l2(dz0["T"], grid)) ** 2)
    scale = 0.0
    for n in range(steps):
        inc = sample_increment(seed, n, model.K, dt)
        terms, dz = dz_balance_terms(state, forcing, model, params,
                                     advection=advection)
        terms_m.append(terms["momentum"])
        terms_T.append(terms["temperature"])
        noise = apply_sigma(model, state, inc)
        mart_m.append(2.0 * (_dz_inner(free_gradient(noise.du, grid, 2),
                                       dz["u"], grid)
                             + _dz_inner(free_gradient(noise.dv, grid, 2),
                                         dz["v"], grid)))
        mart_T.append(2.0 * _dz_inner(free_gradient(noise.dT, grid, 2),
                                      dz["T"], grid))
        for blk in ("momentum", "temperature"):
            scale = max(scale, abs(terms[blk]["drift"]),
                        terms[blk]["dissipation"], terms[blk]["ito"])
        state, _ = step_direct(state, forcing, dt, inc, model, params,
                               solver, advection=advection, step_index=n)
        times.append((n + 1) * dt)
        dzn = dz_fields(state)
        sq_m.append(float(norm_l2([dzn["u"], dzn["v"]], grid)) ** 2)
        sq_T.append(float(norm_l2(dzn["T"], grid)) ** 2)
    mm = mart_m if include_martingale else None
    mt = mart_T if include_martingale else None
    return {
        "momentum": dz_identity_residual(times, sq_m, terms_m, mm),
        "temperature": dz_identity_residual(times, sq_T, terms_T, mt),
        "scale": max(scale, 1e-300),
    }
