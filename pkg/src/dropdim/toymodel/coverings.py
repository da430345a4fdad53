"""Covering parameters, chart h-sets, certificates and the diffusion run.

Sizes follow one convention: ``gamma`` is a size in an entry direction and
``r`` a size in an exit direction, each multiplied by its weight ``e^{-T}``
or ``e^{-2T}`` when the h-set is built.  Center modes live in boxes of the
max-norm over ``(Re, Im)``; the flow rotates them, so every flow step across
a center block is widened by ``center_box_factor`` (sqrt(2) covers any
rotation) on top of the growth factor ``A``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from ..covering import (ChainSpec, CoveringCertificate, Drop, MapHandle, check_covering_affine,
                        check_covering_sampled, solve_chain, unit_form)
from ..geometry import BlockSpec, ENTRY, EXIT, HSet
from .dynamics import (ToyConfig, ToyModelError, distance_to_torus, flow, jump_matrix, layout)
from .estimates import center_constant, transit_time, violated_constraints

K_FLOOR = 1e-9
A_TILDE_FACTOR = 1.01
Q3_TILDE_FACTOR = 1.01
FLOW_FACTOR = 1.005
CHAIN_TOL = 1e-6
DIST_FACTOR = 10.0

FLOW_INEQUALITIES = ("tms-cp-flow", "tms-r-flow-cf", "tms-r-out-x+", "tms-gamma-in-x-",
                     "tms-r-out-y+", "gamma-in-y-")
JUMP_INEQUALITIES = ("tms-tran-cov-cp-1", "cp-i-cond", "tms-tran-cov-entry-x+",
                     "tms-tran-cov-entry-y+", "tms-rcf-tran-x+", "tms-rcf-tran-y+", "rcf-i")
INEQUALITY_NAMES = ("tms-cp-flow", "tms-tran-cov-cp-1", "cp-i-cond", "tms-tran-cov-entry-x+",
                    "tms-tran-cov-entry-y+", "tms-r-flow-cf", "tms-rcf-tran-x+", "tms-rcf-tran-y+",
                    "rcf-i", "tms-r-out-x+", "tms-gamma-in-x-", "tms-r-out-y+", "gamma-in-y-")
SIZE_FIELDS = ("gamma_in_cp", "gamma_in_ym", "gamma_in_xm", "r_in_xp", "r_in_yp", "r_in_cf",
               "gamma_out_ym", "gamma_out_xm", "gamma_out_cp", "r_out_xp", "r_out_yp", "r_out_cf")


@dataclass(frozen=True)
class Inequality:
    """``lhs < rhs`` (or ``<=`` when not strict) for one chart index."""

    name: str
    j: int
    lhs: float
    rhs: float
    strict: bool

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def relative_slack(self) -> float:
        return self.slack / abs(self.rhs) if self.rhs else -math.inf

    @property
    def holds(self) -> bool:
        return self.lhs < self.rhs if self.strict else self.lhs <= self.rhs


@dataclass(frozen=True)
class ToyCoveringParams:
    """Sizes for every chart plus the derived constants.

    Every entry of :data:`SIZE_FIELDS` is a tuple indexed by the chart.
    ``K_bound`` is the coupling bound the sizes were derived for; it is
    ``K`` floored at a tiny positive value so that no radius vanishes.
    """

    T: float
    K_bound: float
    Q1: float
    Q2: float
    Q3: float
    A: float
    A_tilde: float
    Q3_tilde: float
    beta: float
    L: float
    gamma_in_cp: tuple
    gamma_in_ym: tuple
    gamma_in_xm: tuple
    r_in_xp: tuple
    r_in_yp: tuple
    r_in_cf: tuple
    gamma_out_ym: tuple
    gamma_out_xm: tuple
    gamma_out_cp: tuple
    r_out_xp: tuple
    r_out_yp: tuple
    r_out_cf: tuple
    inequalities: tuple = field(default=())

    @property
    def N(self) -> int:
        return len(self.gamma_in_cp) - 1

    def row(self, j: int) -> dict:
        return {name: getattr(self, name)[j] for name in SIZE_FIELDS}

    def slacks(self) -> dict:
        """Smallest relative slack of every named inequality over all charts."""
        out = {}
        for name in INEQUALITY_NAMES:
            vals = [q.relative_slack for q in self.inequalities if q.name == name]
            out[name] = min(vals) if vals else math.inf
        return out

    def failed(self) -> list:
        return [q for q in self.inequalities if not q.holds]

    def size_bound(self) -> float:
        """Closing bound ``A~^N max(2 L Q2, 2 Q3, Q2, Q1, 1) T`` times the box widening."""
        return (self.A_tilde ** self.N * self.beta * FLOW_FACTOR
                * max(2 * self.L * self.Q2, 2 * self.Q3, self.Q2, self.Q1, 1.0) * self.T)

    def max_size(self) -> float:
        return max(max(getattr(self, name)) for name in SIZE_FIELDS
                   if name not in ("gamma_in_ym", "r_out_xp"))


def covering_params(cfg: ToyConfig, T: float | None = None, check: bool = True) -> ToyCoveringParams:
    """Solve the covering inequalities for every chart.

    With ``check`` the transit-time hypotheses are verified first and every
    inequality must hold; failures raise :class:`ToyModelError` naming them.
    """
    T = transit_time(cfg) if T is None else float(T)
    if check:
        bad = violated_constraints(cfg, T)
        if bad:
            raise ToyModelError(f"T = {T:.6g} violates the transit-time hypotheses: {', '.join(bad)}")
    N, sigma, sp, L, nu = cfg.N, cfg.sigma, cfg.sigma_p, cfg.L, cfg.nu
    K = max(cfg.K, K_FLOOR)
    A = math.exp(21.0 * K * cfg.G * sp ** 2)
    beta = cfg.center_box_factor
    eT = math.exp(T)

    Q1 = 2.1 * K * sp * (3.1 * sp) ** 2
    Q2 = 4.1 * K * sp ** 2 * (3.1 * sp)
    Q3 = L * (2 * sp / T + Q1)
    A_tilde = A_TILDE_FACTOR * beta * A
    Q3_tilde = Q3_TILDE_FACTOR * Q3
    flow_growth = FLOW_FACTOR * beta * A

    # dropped directions: a fraction nu of the available margin
    g_in_ym = nu * 0.01 * sigma * eT
    g_in_xm = nu * T * 0.1 * K * sp * (3.1 * sp) ** 2
    r_out_yp = nu * min(T * 0.1 * K * sp ** 2 * 3.1 * sp, g_in_xm)
    r_out_xp = nu * min(0.09 * sigma * eT, g_in_ym)

    g_in_cp = [Q3_tilde * T * A_tilde ** j for j in range(N + 1)]
    g_out_cp = [flow_growth * g for g in g_in_cp]
    r_out_cf = [max(T * L * Q2, 2.1 * L * sigma) * A_tilde ** (N - j) for j in range(N + 1)]
    r_in_cf = [flow_growth * r for r in r_out_cf]

    rep = lambda v: (float(v),) * (N + 1)  # noqa: E731
    params = ToyCoveringParams(
        T=T, K_bound=K, Q1=Q1, Q2=Q2, Q3=Q3, A=A, A_tilde=A_tilde, Q3_tilde=Q3_tilde, beta=beta, L=L,
        gamma_in_cp=tuple(g_in_cp), gamma_in_ym=rep(g_in_ym), gamma_in_xm=rep(g_in_xm),
        r_in_xp=rep(2.1 * sigma), r_in_yp=rep(T * Q2), r_in_cf=tuple(r_in_cf),
        gamma_out_ym=rep(2 * sp), gamma_out_xm=rep(T * Q1), gamma_out_cp=tuple(g_out_cp),
        r_out_xp=rep(r_out_xp), r_out_yp=rep(r_out_yp), r_out_cf=tuple(r_out_cf),
    )
    ineqs = tuple(inequalities(cfg, params))
    object.__setattr__(params, "inequalities", ineqs)
    if check:
        bad = params.failed()
        if bad:
            names = sorted({q.name for q in bad})
            raise ToyModelError(f"covering inequalities violated: {', '.join(names)}")
    return params


def inequalities(cfg: ToyConfig, p: ToyCoveringParams) -> list:
    """Evaluate the thirteen named inequalities in their original form."""
    T, sigma, sp, L, A = p.T, cfg.sigma, cfg.sigma_p, cfg.L, p.A
    K = p.K_bound
    eT = math.exp(T)
    out = []
    for j in range(p.N + 1):
        out += [
            Inequality("tms-cp-flow", j, A * p.gamma_in_cp[j], p.gamma_out_cp[j], False),
            Inequality("tms-r-flow-cf", j, p.r_out_cf[j], p.r_in_cf[j] / A, False),
            Inequality("tms-r-out-x+", j, p.r_out_xp[j] / eT, 0.09 * sigma, True),
            Inequality("tms-gamma-in-x-", j, p.gamma_in_xm[j] + T * 2 * K * sp * (3.1 * sp) ** 2,
                       p.gamma_out_xm[j], True),
            Inequality("tms-r-out-y+", j,
                       p.r_out_yp[j] + T * 4 * K * sp ** 2 * (p.r_in_xp[j] + sp),
                       p.r_in_yp[j], True),
            Inequality("gamma-in-y-", j, p.gamma_in_ym[j] / eT, sp - sigma, True),
        ]
    for j in range(p.N):
        out += [
            Inequality("tms-tran-cov-cp-1", j, L * (p.gamma_out_ym[j] + p.gamma_out_xm[j]),
                       p.gamma_in_cp[j + 1], False),
            Inequality("cp-i-cond", j, p.gamma_out_cp[j], p.gamma_in_cp[j + 1], True),
            Inequality("tms-tran-cov-entry-x+", j, p.r_out_xp[j], p.gamma_in_ym[j + 1], True),
            Inequality("tms-tran-cov-entry-y+", j, p.r_out_yp[j], p.gamma_in_xm[j + 1], True),
            Inequality("tms-rcf-tran-x+", j, L * p.r_in_xp[j + 1], p.r_out_cf[j], False),
            Inequality("tms-rcf-tran-y+", j, L * p.r_in_yp[j + 1], p.r_out_cf[j], False),
            Inequality("rcf-i", j, p.r_in_cf[j + 1], p.r_out_cf[j], True),
        ]
    return out


# h-sets

@dataclass(frozen=True)
class ChartHSets:
    j: int
    n_in: HSet
    n_out: HSet
    n_out_dropped: HSet | None


DROPPED = ("x+", "y+")


def _mode_label(k: int) -> str:
    return f"c{k}"


def build_chart_hsets(cfg: ToyConfig, params: ToyCoveringParams, j: int) -> ChartHSets:
    """``N^j_in``, ``N^j_out`` and (below the top chart) ``N^j_out`` with x+, y+ dropped."""
    lay = layout(cfg, j)
    T = params.T
    e1, e2 = math.exp(-T), math.exp(-2 * T)
    sigma = cfg.sigma
    p = params.row(j)

    def blocks(hyper, past, future):
        out = [BlockSpec(lab, 1, rad, tag) for lab, rad, tag in hyper]
        for k in lay.modes:
            if k in lay.past:
                out.append(BlockSpec(_mode_label(k), 2, past, ENTRY))
            else:
                out.append(BlockSpec(_mode_label(k), 2, future, EXIT))
        return out

    c_in = np.zeros(lay.n)
    c_in[0] = sigma
    n_in = HSet(c_in, blocks(
        [("y-", p["gamma_in_ym"] * e1, ENTRY), ("x-", p["gamma_in_xm"] * e2, ENTRY),
         ("y+", p["r_in_yp"] * e1, EXIT), ("x+", p["r_in_xp"] * e1, EXIT)],
        p["gamma_in_cp"] * e1, p["r_in_cf"] * e1))
    c_out = np.zeros(lay.n)
    c_out[3] = sigma
    n_out = HSet(c_out, blocks(
        [("y-", p["gamma_out_ym"] * e1, ENTRY), ("x-", p["gamma_out_xm"] * e1, ENTRY),
         ("y+", p["r_out_yp"] * e2, EXIT), ("x+", p["r_out_xp"] * e1, EXIT)],
        p["gamma_out_cp"] * e1, p["r_out_cf"] * e1))
    dropped = n_out.drop_exit(*DROPPED) if j < cfg.N else None
    return ChartHSets(j, n_in, n_out, dropped)


# maps

def linear_flow_matrix(cfg: ToyConfig, j: int, T: float) -> np.ndarray:
    """Time-``T`` map of the uncoupled flow in chart ``j``."""
    lay = layout(cfg, j)
    M = np.zeros((lay.n, lay.n))
    M[0, 0] = M[2, 2] = math.exp(-T)
    M[1, 1] = M[3, 3] = math.exp(T)
    c, s = math.cos(T), math.sin(T)
    for i in range(4, lay.n, 2):
        M[i:i + 2, i:i + 2] = [[c, -s], [s, c]]
    return M


def flow_map(cfg: ToyConfig, params: ToyCoveringParams, j: int) -> MapHandle:
    """``phi_T`` in chart ``j`` with the exit linearization of the uncoupled flow."""
    sets = build_chart_hsets(cfg, params, j)
    T = params.T
    lin = MapHandle.affine(linear_flow_matrix(cfg, j, T))
    P, _ = unit_form(sets.n_in, lin, sets.n_out)
    u = sets.n_in.u
    return MapHandle.from_function(lambda x: flow(cfg, x, T), layout(cfg, j).n, vectorized=True,
                                   exit_linearization=P[:u, :u], name=f"phi_T[{j}]")


def jump_map(cfg: ToyConfig, j: int) -> MapHandle:
    return MapHandle.affine(jump_matrix(cfg, j), name=f"J[{j}]")


def verify_flow_covering(cfg: ToyConfig, params: ToyCoveringParams, j: int, grid: int = 3,
                         n_random: int = 64, seed: int = 0) -> CoveringCertificate:
    """Sampled certificate for ``N^j_in => N^j_out`` under the time-``T`` flow."""
    sets = build_chart_hsets(cfg, params, j)
    return check_covering_sampled(sets.n_in, flow_map(cfg, params, j), sets.n_out, grid=grid,
                                  n_random=n_random, seed=seed)


def verify_jump_covering(cfg: ToyConfig, params: ToyCoveringParams, j: int) -> CoveringCertificate:
    """Exact certificate for ``N^j_out`` (x+, y+ dropped) ``=> N^{j+1}_in`` under the jump."""
    if not 0 <= j < cfg.N:
        raise ToyModelError(f"no jump from chart {j}")
    src = build_chart_hsets(cfg, params, j).n_out_dropped
    dst = build_chart_hsets(cfg, params, j + 1).n_in
    return check_covering_affine(src, jump_map(cfg, j), dst)


def certificates(cfg: ToyConfig, params: ToyCoveringParams, grid: int = 3, n_random: int = 64,
                 seed: int = 0) -> list:
    """All ``2N + 1`` certificates as ``(name, certificate)`` in chain order."""
    out = []
    for j in range(cfg.N + 1):
        out.append((f"flow_{j}", verify_flow_covering(cfg, params, j, grid, n_random, seed)))
        if j < cfg.N:
            out.append((f"jump_{j}", verify_jump_covering(cfg, params, j)))
    return out


# diffusion

def chain_spec(cfg: ToyConfig, params: ToyCoveringParams, tol: float = CHAIN_TOL) -> ChainSpec:
    elements = []
    for j in range(cfg.N + 1):
        sets = build_chart_hsets(cfg, params, j)
        elements += [sets.n_in, flow_map(cfg, params, j), sets.n_out]
        if j < cfg.N:
            elements += [Drop(*DROPPED), jump_map(cfg, j)]
    return ChainSpec(elements, tol=tol)


@dataclass(frozen=True)
class ItineraryRow:
    chart: int
    time: float
    distance: float
    event: str


@dataclass(frozen=True)
class DiffusionReport:
    T: float
    q0: np.ndarray
    residual: float
    iterations: int
    min_distances: tuple
    closest_times: tuple
    c_dist: float
    bound: float
    itinerary: tuple

    @property
    def passed(self) -> bool:
        return all(d <= self.bound for d in self.min_distances)


def _closest_approach(cfg: ToyConfig, x0: np.ndarray, T: float, samples: int):
    ts = np.linspace(0.0, T, samples)
    states = flow(cfg, x0, T, t_eval=ts)
    dist = distance_to_torus(states)
    k = int(np.argmin(dist))
    lo, hi = ts[max(k - 1, 0)], ts[min(k + 1, samples - 1)]

    def objective(t):
        return float(distance_to_torus(flow(cfg, x0, float(t))))

    res = minimize_scalar(objective, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-10 * max(T, 1.0)})
    if res.fun < dist[k]:
        return float(res.x), float(res.fun)
    return float(ts[k]), float(dist[k])


def diffuse(cfg: ToyConfig, params: ToyCoveringParams | None = None, samples: int = 201,
            tol: float = CHAIN_TOL) -> DiffusionReport:
    """Solve the chain ``N^0_in -> ... -> N^N_out`` and measure the passes by each torus.

    The chain is pinned at ``y- = sigma`` on entry, ``x+ = sigma`` at every
    exit, and zero in the remaining pinned directions.  Distances are in the
    chart max-norm; the reported bound is ``10 T e^{-T}``.
    """
    if params is None:
        params = covering_params(cfg)
    T = params.T
    sol = solve_chain(chain_spec(cfg, params, tol))
    rows, mins, times = [], [], []
    for j in range(cfg.N + 1):
        x_in, x_out = sol.points[2 * j], sol.points[2 * j + 1]
        t_best, d_best = _closest_approach(cfg, x_in, T, samples)
        mins.append(d_best)
        times.append(t_best)
        base = j * T
        rows += [ItineraryRow(j, base, float(distance_to_torus(x_in)), "enter y-=sigma"),
                 ItineraryRow(j, base + t_best, d_best, "closest"),
                 ItineraryRow(j, base + T, float(distance_to_torus(x_out)), "exit x+=sigma")]
    scale = T * math.exp(-T)
    return DiffusionReport(T, sol.q0, sol.residual, sol.iterations, tuple(mins), tuple(times),
                           max(mins) / scale, DIST_FACTOR * scale, tuple(rows))


