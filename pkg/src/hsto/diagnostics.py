"""Norm records along trajectories, first-hit detection for the monitored
threshold functionals, and ensemble moment statistics.

The CSV schema is fixed (bit-exact column order):

    t, l2_U, v_V, l4_v, l4_T, l4_S, l2_dzU, v_dzU, l2_AU,
    int_V2, int_dzV2, int_AU2, split_gap, blowup_flag

Records carry two extra in-memory quantities (vertical-gradient norms of the
velocity alone and their running integral) used by the momentum stopping
time; they are not part of the canonical CSV.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid, State, free_gradient, norm_l2, norm_lp
from .operators import PhysParams, apply_diffusion

CSV_COLUMNS = ["t", "l2_U", "v_V", "l4_v", "l4_T", "l4_S", "l2_dzU",
               "v_dzU", "l2_AU", "int_V2", "int_dzV2", "int_AU2",
               "split_gap", "blowup_flag"]


def _fmt(x):
    return "%.17g" % x


def dz_fields(state: State):
    """One-sided-corrected vertical derivatives of all components."""
    g = state.grid
    return {name: free_gradient(arr, g, 2)
            for name, arr in state.components().items()}


def weighted_gradient_norm(fields, params: PhysParams, grid: Grid):
    """Weighted H1 seminorm of derived fields (free derivatives, since
    derived fields carry no boundary conditions of their own)."""
    acc = 0.0
    for name, arr in fields.items():
        mu, nu = params.coefficients(name)
        gx = free_gradient(arr, grid, 0)
        gy = free_gradient(arr, grid, 1)
        gz = free_gradient(arr, grid, 2)
        acc = acc + (mu * (gx * gx + gy * gy) + nu * gz * gz).sum(
            axis=(-3, -2, -1)) * grid.cell_volume
    return np.sqrt(acc)


@dataclass
class DiagnosticsRecord:
    t: float
    l2_U: float
    v_V: float
    l4_v: float
    l4_T: float
    l4_S: float
    l2_dzU: float
    v_dzU: float
    l2_AU: float
    int_V2: float
    int_dzV2: float
    int_AU2: float
    split_gap: float = None
    blowup_flag: bool = False
    first_bad: str = ""
    # extras outside the canonical CSV
    l2_dzv: float = 0.0
    v_dzv: float = 0.0
    int_dzv2: float = 0.0
    int_F_l4_sq: float = 0.0

    def csv_row(self):
        vals = [self.t, self.l2_U, self.v_V, self.l4_v, self.l4_T,
                self.l4_S, self.l2_dzU, self.v_dzU, self.l2_AU,
                self.int_V2, self.int_dzV2, self.int_AU2]
        cells = [_fmt(v) for v in vals]
        cells.append("" if self.split_gap is None else _fmt(self.split_gap))
        cells.append("1" if self.blowup_flag else "0")
        return ",".join(cells)


def records_to_csv(records):
    lines = [",".join(CSV_COLUMNS)]
    lines.extend(r.csv_row() for r in records)
    return "\n".join(lines) + "\n"


def records_from_csv(text):
    lines = [ln for ln in text.strip().split("\n") if ln]
    header = lines[0].split(",")
    if header != CSV_COLUMNS:
        raise ValueError("unexpected diagnostics CSV header")
    out = []
    for ln in lines[1:]:
        cells = ln.split(",")
        vals = [float(c) for c in cells[:12]]
        gap = None if cells[12] == "" else float(cells[12])
        flag = cells[13] == "1"
        out.append(DiagnosticsRecord(*vals, split_gap=gap, blowup_flag=flag))
    return out


class DiagnosticsAccumulator:
    """Builds records with left-endpoint running time integrals and the
    blow-up detector state."""

    def __init__(self, grid: Grid, params: PhysParams, blowup_ceiling=1e12,
                 forcing=None):
        self.grid = grid
        self.params = params
        self.ceiling = blowup_ceiling
        self.f_l4_sq = 0.0
        if forcing is not None:
            self.f_l4_sq = float(norm_lp(
                [forcing.du, forcing.dv, forcing.dT, forcing.dS], 4,
                grid)) ** 2
        self._prev = None
        self._sup_v_V_sq = 0.0
        self._scale0 = None

    def record(self, state: State, split_gap=None) -> DiagnosticsRecord:
        g, p = self.grid, self.params
        comps = state.components()
        first_bad = ""
        for name, arr in comps.items():
            if not np.isfinite(arr).all():
                first_bad = name
                break

        def safe(fn, *a):
            if first_bad:
                return float("nan")
            return float(fn(*a))

        dz = None if first_bad else dz_fields(state)
        l2_U = safe(norm_l2, state, g)
        from .grid import norm_v
        v_V = safe(norm_v, state, p)
        l4_v = safe(norm_lp, (state.u, state.v), 4, g)
        l4_T = safe(norm_lp, state.T, 4, g)
        l4_S = safe(norm_lp, state.S, 4, g)
        if first_bad:
            l2_dzU = v_dzU = l2_AU = l2_dzv = v_dzv = float("nan")
        else:
            l2_dzU = float(norm_l2(list(dz.values()), g))
            v_dzU = float(weighted_gradient_norm(dz, p, g))
            au = apply_diffusion(state, p)
            l2_AU = float(norm_l2([au.du, au.dv, au.dT, au.dS], g))
            dzv = {"u": dz["u"], "v": dz["v"]}
            l2_dzv = float(norm_l2(list(dzv.values()), g))
            v_dzv = float(weighted_gradient_norm(dzv, p, g))

        prev = self._prev
        if prev is None:
            ints = dict(int_V2=0.0, int_dzV2=0.0, int_AU2=0.0,
                        int_dzv2=0.0, int_F=0.0)
        else:
            dt = state.time - prev.t
            ints = dict(
                int_V2=prev.int_V2 + prev.v_V ** 2 * dt,
                int_dzV2=prev.int_dzV2 + prev.v_dzU ** 2 * dt,
                int_AU2=prev.int_AU2 + prev.l2_AU ** 2 * dt,
                int_dzv2=prev.int_dzv2 + prev.v_dzv ** 2 * dt,
                int_F=prev.int_F_l4_sq + self.f_l4_sq * dt)
        rec = DiagnosticsRecord(
            t=float(state.time), l2_U=l2_U, v_V=v_V, l4_v=l4_v, l4_T=l4_T,
            l4_S=l4_S, l2_dzU=l2_dzU, v_dzU=v_dzU, l2_AU=l2_AU,
            int_V2=ints["int_V2"], int_dzV2=ints["int_dzV2"],
            int_AU2=ints["int_AU2"], split_gap=split_gap,
            l2_dzv=l2_dzv, v_dzv=v_dzv, int_dzv2=ints["int_dzv2"],
            int_F_l4_sq=ints["int_F"])
        rec.first_bad = first_bad
        if self._scale0 is None:
            self._scale0 = max(1.0, 0.0 if np.isnan(v_V) else v_V ** 2)
        if not first_bad:
            self._sup_v_V_sq = max(self._sup_v_V_sq, v_V ** 2)
        blob = self._sup_v_V_sq + rec.int_AU2
        rec.blowup_flag = bool(first_bad) or \
            blob > self.ceiling * self._scale0
        if rec.blowup_flag and not rec.first_bad:
            rec.first_bad = "threshold"
        self._prev = rec
        return rec


# ---------------------------------------------------------------------------
# stopping times
# ---------------------------------------------------------------------------

MONITORS = ("tau_W", "tau_1", "tau_2", "tau_z", "tau_T")


@dataclass
class StoppingReport:
    thresholds: list
    hits: dict  # monitor name -> list of first-hit times (None = not hit)

    def hit(self, monitor, K):
        return self.hits[monitor][self.thresholds.index(K)]


def _monitor_values(records):
    """Time series of the five monitored functionals (running suprema plus
    running integrals, in their exit-time form)."""
    sup_l2sq = sup_l4v4 = sup_dz2 = sup_dzv2 = sup_l4T4 = 0.0
    vals = {m: [] for m in MONITORS}
    for r in records:
        sup_l2sq = max(sup_l2sq, r.l2_U ** 2)
        sup_l4v4 = max(sup_l4v4, r.l4_v ** 4)
        sup_dz2 = max(sup_dz2, r.l2_dzU ** 2)
        sup_dzv2 = max(sup_dzv2, r.l2_dzv ** 2)
        sup_l4T4 = max(sup_l4T4, r.l4_T ** 4 + r.l4_S ** 4)
        vals["tau_W"].append(sup_l2sq + r.int_V2 + r.int_F_l4_sq)
        vals["tau_1"].append(sup_l4v4)
        vals["tau_2"].append(sup_dz2 + r.int_dzV2)
        vals["tau_z"].append(sup_dzv2 + r.int_dzv2)
        vals["tau_T"].append(sup_l4T4)
    return vals


def stopping_times(records, k_list) -> StoppingReport:
    """First time each monitored functional reaches each threshold."""
    times = [r.t for r in records]
    if any(t2 < t1 for t1, t2 in zip(times, times[1:])):
        raise ValueError("unsorted-series: record times must be nondecreasing")
    vals = _monitor_values(records)
    hits = {}
    for mon in MONITORS:
        series = vals[mon]
        hits[mon] = []
        for K in k_list:
            hit = next((times[i] for i, v in enumerate(series) if v >= K),
                       None)
            hits[mon].append(hit)
    return StoppingReport(list(k_list), hits)


# ---------------------------------------------------------------------------
# ensemble statistics
# ---------------------------------------------------------------------------

def _run_functionals(records, p):
    sup_lp = max(r.l2_U ** p for r in records)
    int_mixed = 0.0
    int_v2 = 0.0
    for prev, cur in zip(records, records[1:]):
        dt = cur.t - prev.t
        int_mixed += prev.v_V ** 2 * prev.l2_U ** (p - 2) * dt
        int_v2 += prev.v_V ** 2 * dt
    return sup_lp + int_mixed, int_v2 ** (p / 2.0)


def ensemble_stats(run_series, p):
    """Monte-Carlo means (with standard errors) of the two moment
    functionals sup|U|^p + int ||U||^2 |U|^{p-2} and (int ||U||^2)^{p/2}."""
    if not run_series:
        raise ValueError("empty-set: need at least one run")
    a_vals, b_vals = [], []
    for records in run_series:
        a, b = _run_functionals(records, p)
        a_vals.append(a)
        b_vals.append(b)
    a_vals = np.array(a_vals)
    b_vals = np.array(b_vals)
    m = len(a_vals)

    def se(x):
        return float(x.std(ddof=1) / np.sqrt(m)) if m > 1 else 0.0

    return {"p": p, "runs": m,
            "sup_lp_plus_mixed_mean": float(a_vals.mean()),
            "sup_lp_plus_mixed_se": se(a_vals),
            "int_v2_pow_mean": float(b_vals.mean()),
            "int_v2_pow_se": se(b_vals)}
