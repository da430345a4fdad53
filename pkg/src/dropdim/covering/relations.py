"""Certificates for covering relations between h-sets.

Two checkers share one certificate type.  The affine checker is exact up to
floating point: the homotopy to the model map is linear in its parameters, so
the smallest exit-face clearance is the value of a small linear program.
The sampled checker evaluates an arbitrary map on a deterministic set of
boundary and support points and is labeled non-rigorous.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from ..geometry import HSet
from .maps import MapHandle, unit_form

DEFLATE = 1e-10
TAU_SHELL = 1e-6
TENSOR_BUDGET = 4096
EVAL_CHUNK = 4096

EXACT = "exact-affine"
SAMPLED = "sampled"


class CoveringError(ValueError):
    pass


@dataclass(frozen=True)
class CoveringCertificate:
    mode: str
    passed: bool
    exit_margin: float
    entry_margin: float
    degree: int
    sample_count: int
    counterexample: np.ndarray | None = None
    entry_block_margins: dict = field(default_factory=dict)
    notes: tuple = ()

    @property
    def rigorous(self) -> bool:
        return self.mode == EXACT


def _check_dims(N: HSet, f: MapHandle, M: HSet):
    if N.n != M.n or f.n != N.n:
        raise CoveringError(f"ambient dimensions differ: N={N.n}, M={M.n}, map={f.n}")
    if N.u != M.u or N.s != M.s:
        raise CoveringError(f"exit/entry counts differ: N=({N.u},{N.s}) M=({M.u},{M.s})")


def _degree(A: np.ndarray) -> tuple[int, float]:
    if A.shape[0] == 0:
        return 1, 1.0
    det = float(np.linalg.det(A))
    return (0 if det == 0 else int(np.sign(det))), det


# exact affine checker

def _face_lp(A, B, g, i, sgn):
    """Minimum of ``max_j |A p + s (B q + g)|_j`` over one exit face.

    With ``v = s q`` the feasible set ``p`` on the face, ``s`` in [0, 1],
    ``|v| <= s`` is a polytope and the objective is convex, so the minimum is
    a linear program.  Returns ``(lower, p, t, q)`` where ``lower`` is a
    Lagrangian bound built from the solver's multipliers (valid for any
    nonnegative multipliers, so solver tolerances cannot make it optimistic)
    and ``p, t, q`` is the primal minimizer.
    """
    u, s_dim = A.shape[0], B.shape[1]
    free = [k for k in range(u) if k != i]
    nf = len(free)
    # variables: p_free (nf), s, v (s_dim), z
    nv = nf + 1 + s_dim + 1
    fixed = sgn * A[:, i]
    rows, rhs = [], []
    for sign in (1.0, -1.0):
        blk = np.zeros((u, nv))
        blk[:, :nf] = sign * A[:, free]
        blk[:, nf] = sign * g
        blk[:, nf + 1:nf + 1 + s_dim] = sign * B
        blk[:, -1] = -1.0
        rows.append(blk)
        rhs.append(-sign * fixed)
    for sign in (1.0, -1.0):
        blk = np.zeros((s_dim, nv))
        blk[:, nf + 1:nf + 1 + s_dim] = sign * np.eye(s_dim)
        blk[:, nf] = -1.0
        rows.append(blk)
        rhs.append(np.zeros(s_dim))
    A_ub = np.vstack(rows)
    b_ub = np.concatenate(rhs)
    z_max = np.abs(A).sum(axis=1).max() + np.abs(B).sum(axis=1).max(initial=0.0) + np.abs(g).max() + 1.0
    lb = np.concatenate([-np.ones(nf), [0.0], -np.ones(s_dim), [0.0]])
    ub = np.concatenate([np.ones(nf), [1.0], np.ones(s_dim), [z_max]])
    c = np.zeros(nv)
    c[-1] = 1.0
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=np.stack([lb, ub], axis=1), method="highs")
    if res.status != 0:
        raise CoveringError(f"exit-face program failed: {res.message}")
    y = np.maximum(0.0, -res.ineqlin.marginals)
    r = c + A_ub.T @ y
    lower = float(-y @ b_ub + np.minimum(r * lb, r * ub).sum())
    x = res.x
    p = np.empty(u)
    p[i] = sgn
    p[free] = np.clip(x[:nf], -1.0, 1.0)
    s = float(np.clip(x[nf], 0.0, 1.0))
    q = np.clip(x[nf + 1:nf + 1 + s_dim] / s, -1.0, 1.0) if s > 0 else np.zeros(s_dim)
    return lower, p, 1.0 - s, q


def exact_exit_margin(A, B, g):
    """Exit clearance of the affine homotopy in unit coordinates.

    ``A`` (u x u) and ``B`` (u x s) are the exit rows of the unit-coordinate
    matrix, ``g`` the exit part of the offset.  The homotopy on the exit rows
    is ``A p + (1 - t)(B q + g)``.  Returns ``(margin, witness)`` where
    ``witness`` is ``(p, t, q)`` on the exit boundary when the margin is not
    positive.
    """
    A = np.asarray(A, dtype=float)
    u = A.shape[0]
    if u == 0:
        return np.inf, None
    B = np.asarray(B, dtype=float).reshape(u, -1)
    g = np.asarray(g, dtype=float)
    worst = np.inf
    witness = None
    for i in range(u):
        for sgn in (1.0, -1.0):
            lower, p, t, q = _face_lp(A, B, g, i, sgn)
            if lower < worst:
                worst = lower
                witness = (p, t, q)
    margin = worst - 1.0 - DEFLATE
    return margin, (witness if margin <= 0 else None)


def check_covering_affine(N: HSet, f: MapHandle, M: HSet) -> CoveringCertificate:
    """Exact check that ``N`` covers ``M`` under the affine map ``f``."""
    _check_dims(N, f, M)
    if not f.is_affine:
        raise CoveringError(f"{f.name}: the exact checker needs an affine map")
    P, g = unit_form(N, f, M)
    u = N.u
    A = P[:u, :u]
    B = P[:u, u:]
    degree, det = _degree(A)
    notes = []
    exit_margin, witness = exact_exit_margin(A, B, g[:u])
    if M.s:
        reach = np.abs(g[u:]) + np.abs(P[u:]).sum(axis=1)
        entry_margin = float(1.0 - reach.max() - DEFLATE)
        block_margins = {lab: float(1.0 - reach[M.unit_indices(lab) - u].max() - DEFLATE)
                         for lab in M.entry_labels}
    else:
        entry_margin = np.inf
        block_margins = {}
    if u and degree == 0:
        notes.append("exit block of the map is singular")
    passed = exit_margin > 0 and entry_margin > 0 and degree != 0
    counter = None
    if exit_margin <= 0 and witness is not None:
        v = np.zeros(N.n)
        v[:u] = witness[0]
        v[u:] = witness[2]
        counter = N.from_unit(v)
        notes.append(f"exit boundary point meets the target at t={witness[1]:g}")
    elif entry_margin <= 0:
        k = int(np.argmax(np.abs(g[u:]) + np.abs(P[u:]).sum(axis=1)))
        direction = 1.0 if g[u + k] >= 0 else -1.0
        v = direction * np.where(P[u + k] >= 0, 1.0, -1.0)
        counter = N.from_unit(v)
        notes.append("image reaches the entry boundary of the target")
    return CoveringCertificate(EXACT, bool(passed), float(exit_margin), entry_margin, degree, 0,
                               counter, block_margins, tuple(notes))


# sampled checker

def _axis(grid: int) -> np.ndarray:
    return np.union1d(np.linspace(-1.0, 1.0, max(int(grid), 2)), [0.0])


def _tensor(axis: np.ndarray, dims: int) -> np.ndarray:
    if dims == 0:
        return np.zeros((1, 0))
    grids = np.meshgrid(*([axis] * dims), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


def exit_face_samples(N: HSet, grid: int, rng, budget: int = TENSOR_BUDGET) -> np.ndarray:
    """Unit-coordinate points on every exit face of ``N``."""
    n, u = N.n, N.u
    axis = _axis(grid)
    out = []
    full = len(axis) ** (n - 1) <= budget
    for i in range(u):
        for sgn in (1.0, -1.0):
            if full:
                rest = _tensor(axis, n - 1)
                pts = np.insert(rest, i, sgn, axis=1)
            else:
                label = next(lab for lab in N.exit_labels if i in N.unit_indices(lab))
                idx = N.unit_indices(label)
                local = _tensor(axis, len(idx))
                patterns = [np.zeros(n)]
                patterns += list(rng.choice([-1.0, 1.0], size=(2, n)))
                patterns += list(rng.uniform(-1, 1, size=(2, n)))
                pts = []
                for base in patterns:
                    block = np.repeat(base[None, :], len(local), axis=0)
                    block[:, idx] = local
                    pts.append(block)
                pts = np.concatenate(pts)
                pts[:, i] = sgn
            out.append(pts)
    return np.concatenate(out) if out else np.zeros((0, n))


def support_samples(N: HSet, grid: int, rng, n_random: int, budget: int = TENSOR_BUDGET) -> np.ndarray:
    n = N.n
    axis = _axis(grid)
    if len(axis) ** n <= budget:
        return _tensor(axis, n)
    pts = [np.zeros((1, n)), np.eye(n), -np.eye(n),
           rng.choice([-1.0, 1.0], size=(n_random, n)), rng.uniform(-1, 1, size=(n_random, n))]
    return np.concatenate(pts)


def random_exit_boundary(N: HSet, count: int, rng) -> np.ndarray:
    if N.u == 0 or count == 0:
        return np.zeros((0, N.n))
    pts = rng.uniform(-1, 1, size=(count, N.n))
    which = rng.integers(0, N.u, size=count)
    pts[np.arange(count), which] = rng.choice([-1.0, 1.0], size=count)
    return pts


def check_covering_sampled(N: HSet, f: MapHandle, M: HSet, grid: int = 3, n_random: int = 64,
                           seed: int = 0, exit_linearization=None, t_steps: int | None = None,
                           budget: int = TENSOR_BUDGET) -> CoveringCertificate:
    """Non-rigorous covering check by evaluating ``f`` on sample points.

    The homotopy ``(1 - t) f_c + t (A p, 0)`` is tested on a uniform grid in
    ``t`` that includes both endpoints; ``A`` is the exit linearization.
    """
    _check_dims(N, f, M)
    rng = np.random.default_rng(seed)
    u = N.u
    if exit_linearization is None:
        exit_linearization = f.exit_linearization
    if exit_linearization is None and f.is_affine:
        exit_linearization = unit_form(N, f, M)[0][:u, :u]
    if u and exit_linearization is None:
        raise CoveringError(f"{f.name}: sampled check needs an exit linearization")
    A = np.zeros((0, 0)) if u == 0 else np.array(exit_linearization, dtype=float, ndmin=2)
    if A.shape != (u, u):
        raise CoveringError("exit linearization has the wrong shape")
    degree, _ = _degree(A)

    exit_pts = np.concatenate([exit_face_samples(N, grid, rng, budget),
                               random_exit_boundary(N, n_random, rng)])
    supp_pts = support_samples(N, grid, rng, n_random, budget)
    all_pts = np.concatenate([exit_pts, supp_pts])
    # chunks keep batched integrators from holding every sample's trajectory at once
    images = np.concatenate([M.to_unit(f(N.from_unit(all_pts[k:k + EVAL_CHUNK])))
                             for k in range(0, len(all_pts), EVAL_CHUNK)])
    n_exit = len(exit_pts)

    if u:
        ts = np.linspace(0.0, 1.0, t_steps or max(int(grid), 2))
        img_u = images[:n_exit, :u]
        model = exit_pts[:, :u] @ A.T
        worst, worst_k = np.inf, 0
        for t in ts:
            h = (1.0 - t) * img_u + t * model
            clear = np.max(np.abs(h), axis=1) - 1.0
            k = int(np.argmin(clear))
            if clear[k] < worst:
                worst, worst_k = float(clear[k]), k
        exit_margin = worst
        exit_witness = exit_pts[worst_k]
    else:
        exit_margin, exit_witness = np.inf, None
    if M.s:
        reach = np.abs(images[:, u:])
        entry_margin = float(1.0 - reach.max())
        block_margins = {lab: float(1.0 - reach[:, M.unit_indices(lab) - u].max())
                         for lab in M.entry_labels}
        entry_witness = all_pts[int(np.argmax(reach.max(axis=1)))]
    else:
        entry_margin, block_margins, entry_witness = np.inf, {}, None
    passed = exit_margin > 0 and entry_margin > TAU_SHELL and degree != 0
    counter = None
    if exit_margin <= 0:
        counter = N.from_unit(exit_witness)
    elif entry_margin <= TAU_SHELL:
        counter = N.from_unit(entry_witness)
    notes = ("NON-RIGOROUS: sampled check",)
    return CoveringCertificate(SAMPLED, bool(passed), float(exit_margin), entry_margin, degree,
                               len(all_pts), counter, block_margins, notes)


def check_covering(N: HSet, f: MapHandle, M: HSet, mode: str | None = None, **kwargs):
    """Dispatch to the exact checker for affine maps, else the sampled one."""
    if mode is None:
        mode = EXACT if f.is_affine else SAMPLED
    if mode == EXACT:
        return check_covering_affine(N, f, M)
    if mode == SAMPLED:
        return check_covering_sampled(N, f, M, **kwargs)
    raise CoveringError(f"unknown mode {mode!r}")


def check_backcovering(N: HSet, f: MapHandle, M: HSet, mode: str | None = None, **kwargs):
    """``N`` back-covers ``M`` when ``M^T`` covers ``N^T`` under ``f^{-1}``."""
    if f.inverse_evaluator is None:
        raise CoveringError(f"{f.name}: back-covering needs an inverse")
    return check_covering(M.transpose(), f.inverse(), N.transpose(), mode=mode, **kwargs)
