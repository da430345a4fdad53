"""Chains of coverings with dropped exit directions.

A chain alternates h-sets and maps; a ``Drop`` between an h-set and the next
map retags some exit blocks of that h-set as entry blocks before the next
covering.  The orbit is located by solving one stacked system in the unit
coordinates of every h-set: the entry part of the first set, every dropped
block and the exit part of the last set are pinned to anchor values, and
consecutive unit vectors are linked by the maps.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geometry import HSet, PointClassification, TAU_CLS
from .maps import MapHandle, unit_form

TOL_SOLVE = 1e-10
MAX_ITER = 100
FD_STEP = 1e-4
DET_MIN = 1e-12


class ChainError(ValueError):
    pass


class ChainSolveError(RuntimeError):
    def __init__(self, message, residual=np.inf, point=None):
        super().__init__(message)
        self.residual = residual
        self.point = point


@dataclass(frozen=True)
class Drop:
    labels: tuple

    def __init__(self, *labels):
        flat = []
        for lab in labels:
            flat.extend([lab] if isinstance(lab, str) else list(lab))
        object.__setattr__(self, "labels", tuple(flat))


@dataclass
class ChainSpec:
    """Chain ``H_0 -f_1-> H_1 -f_2-> ... -f_L-> H_L`` with optional drops.

    ``ybar`` pins the entry coordinates of ``H_0`` and ``xbar`` the exit
    coordinates of ``H_L`` (both in unit coordinates, default zero).  ``eta``
    maps a set index to the anchor of its dropped blocks.  A periodic chain
    closes ``H_L = H_0`` and carries no anchors.
    """

    elements: list
    ybar: np.ndarray | None = None
    xbar: np.ndarray | None = None
    eta: dict = field(default_factory=dict)
    periodic: bool = False
    tol: float = TOL_SOLVE
    max_iter: int = MAX_ITER

    def __post_init__(self):
        sets, maps, drops = [], [], {}
        expect = "hset"
        for pos, el in enumerate(self.elements):
            if isinstance(el, HSet):
                if expect != "hset":
                    raise ChainError(f"element {pos}: expected a map, got an h-set")
                sets.append(el)
                expect = "map_or_drop"
            elif isinstance(el, Drop):
                if expect != "map_or_drop":
                    raise ChainError(f"element {pos}: a drop must follow an h-set")
                idx = len(sets) - 1
                for lab in el.labels:
                    sets[idx].block(lab)
                drops[idx] = drops.get(idx, ()) + el.labels
                expect = "map"
            elif isinstance(el, MapHandle):
                if expect == "hset":
                    raise ChainError(f"element {pos}: expected an h-set, got a map")
                maps.append(el)
                expect = "hset"
            else:
                raise ChainError(f"element {pos}: unsupported chain element {type(el).__name__}")
        if self.elements and expect != "map_or_drop":
            raise ChainError("a chain must end with an h-set")
        if len(sets) - 1 in drops and self.elements:
            raise ChainError("the last h-set cannot drop blocks")
        self.sets = sets
        self.maps = maps
        self.drops = drops
        self.structures = [h.drop_exit(*drops[i]) if i in drops else h for i, h in enumerate(sets)]
        for i, f in enumerate(maps):
            src, dst = self.structures[i], sets[i + 1]
            if f.n != src.n or src.n != dst.n:
                raise ChainError(f"link {i + 1}: ambient dimensions differ")
            if src.u != dst.u:
                raise ChainError(f"link {i + 1}: exit dimensions differ ({src.u} vs {dst.u})")
        if self.periodic:
            if drops:
                raise ChainError("periodic chains cannot drop blocks")
            if len(sets) < 2 or not sets[-1] == sets[0]:
                raise ChainError("periodic chain must return to its first h-set")
        if sets and not self.periodic:
            first, last = sets[0], sets[-1]
            self.ybar = self._anchor(self.ybar, first.s, "ybar")
            self.xbar = self._anchor(self.xbar, last.u, "xbar")
            eta = {}
            for i, labels in drops.items():
                dim = sum(sets[i].block(lab).dim for lab in labels)
                eta[i] = self._anchor(self.eta.get(i), dim, f"eta[{i}]")
            self.eta = eta

    @staticmethod
    def _anchor(value, dim, name):
        if value is None:
            return np.zeros(dim)
        value = np.atleast_1d(np.asarray(value, dtype=float))
        if value.shape != (dim,):
            raise ChainError(f"{name}: expected {dim} values, got {value.size}")
        return value

    @property
    def length(self) -> int:
        return len(self.maps)


@dataclass(frozen=True)
class ChainSolution:
    q0: np.ndarray
    points: list
    unit: list
    residual: float
    iterations: int
    memberships: list

    @property
    def itinerary(self) -> list:
        return self.points[1:]


@dataclass(frozen=True)
class ShadowingReport:
    passed: bool
    steps: list
    min_margin: float


class _System:
    def __init__(self, spec: ChainSpec):
        self.spec = spec
        sets = spec.sets
        self.n = sets[0].n
        self.count = len(sets) - 1 if spec.periodic else len(sets)
        self.size = self.count * self.n
        self.affine = [f.is_affine for f in spec.maps]
        self.unit_forms = [unit_form(sets[i], f, sets[i + 1]) if f.is_affine else None
                           for i, f in enumerate(spec.maps)]

    def _target(self, i):
        return 0 if self.spec.periodic and i == self.count else i

    def blocks(self, w):
        return w.reshape(self.count, self.n)

    def link(self, i, v):
        """Image of unit vectors of set ``i`` in the unit chart of set ``i + 1``."""
        spec = self.spec
        if self.affine[i]:
            P, g = self.unit_forms[i]
            return v @ P.T + g
        x = spec.sets[i].from_unit(v)
        return spec.sets[i + 1].to_unit(spec.maps[i](x))

    def residual(self, w):
        spec = self.spec
        W = self.blocks(w)
        parts = []
        if not spec.periodic:
            first = spec.sets[0]
            parts.append(W[0][first.indices_of(first.entry_labels)] - spec.ybar)
            for i, labels in sorted(spec.drops.items()):
                parts.append(W[i][spec.sets[i].indices_of(labels)] - spec.eta[i])
        for i in range(spec.length):
            parts.append(self.link(i, W[i]) - W[self._target(i + 1)])
        if not spec.periodic:
            last = spec.sets[-1]
            parts.append(W[-1][last.indices_of(last.exit_labels)] - spec.xbar)
        return np.concatenate(parts) if parts else np.zeros(0)

    def jacobian(self, w, step=FD_STEP):
        spec = self.spec
        W = self.blocks(w)
        n = self.n
        rows = []

        def selector(i, idx):
            m = np.zeros((len(idx), self.size))
            m[np.arange(len(idx)), i * n + idx] = 1.0
            return m

        if not spec.periodic:
            first = spec.sets[0]
            rows.append(selector(0, first.indices_of(first.entry_labels)))
            for i, labels in sorted(spec.drops.items()):
                rows.append(selector(i, spec.sets[i].indices_of(labels)))
        for i in range(spec.length):
            if self.affine[i]:
                D = self.unit_forms[i][0]
            else:
                probes = np.vstack([W[i], W[i] + step * np.eye(n), W[i] - step * np.eye(n)])
                img = self.link(i, probes)
                D = (img[1:n + 1] - img[n + 1:]).T / (2 * step)
            m = np.zeros((n, self.size))
            m[:, i * n:(i + 1) * n] += D
            j = self._target(i + 1)
            m[:, j * n:(j + 1) * n] -= np.eye(n)
            rows.append(m)
        if not spec.periodic:
            last = spec.sets[-1]
            rows.append(selector(self.count - 1, last.indices_of(last.exit_labels)))
        return np.vstack(rows)


def _norm(r):
    return float(np.max(np.abs(r))) if r.size else 0.0


def solve_chain(spec: ChainSpec, check: bool = True) -> ChainSolution:
    """Locate the orbit through the chain by a damped Newton iteration.

    All-affine chains are solved by one linear solve.  The solution is then
    re-checked by forward iteration (:func:`verify_shadowing`) unless
    ``check`` is false.
    """
    if not spec.sets:
        raise ChainError("empty chain")
    system = _System(spec)
    w = np.zeros(system.size)
    r = system.residual(w)
    if r.size != system.size:
        raise ChainError(f"stacked system is not square ({r.size} equations, {system.size} unknowns)")
    best = (_norm(r), w)
    it = 0
    while best[0] > spec.tol and it < spec.max_iter:
        it += 1
        J = system.jacobian(w)
        try:
            dw = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            dw = np.linalg.lstsq(J, -r, rcond=None)[0]
        lam = 1.0
        while True:
            w_new = w + lam * dw
            r_new = system.residual(w_new)
            if _norm(r_new) < _norm(r) or lam < 1e-6:
                break
            lam *= 0.5
        if not np.all(np.isfinite(r_new)):
            break
        if _norm(r_new) >= _norm(r) and lam < 1e-6:
            break
        w, r = w_new, r_new
        if _norm(r) < best[0]:
            best = (_norm(r), w)
        if all(system.affine) and it >= 2:
            break
    res, w = best
    if res > spec.tol:
        raise ChainSolveError(f"no convergence: best residual {res:.3e} after {it} iterations",
                              res, spec.sets[0].from_unit(system.blocks(w)[0]))
    W = system.blocks(w)
    sets = spec.sets
    points = [sets[i].from_unit(W[system._target(i)]) for i in range(len(sets))]
    memberships = [h.classify(p) for h, p in zip(sets, points)]
    solution = ChainSolution(points[0], points, [W[system._target(i)] for i in range(len(sets))],
                             res, it, memberships)
    if check:
        report = verify_shadowing(spec, solution)
        if not report.passed:
            bad = next(s for s in report.steps if not s[2])
            raise ChainSolveError(f"orbit leaves the support of h-set {bad[0]}", res, solution.q0)
    return solution


def verify_shadowing(spec: ChainSpec, solution: ChainSolution | None = None,
                     q0=None, tol: float = TAU_CLS) -> ShadowingReport:
    """Iterate forward from ``q0`` and classify every point in its h-set.

    Each step records ``(set index, classification, strictly_inside)``.
    """
    if not spec.sets:
        return ShadowingReport(True, [], np.inf)
    if q0 is None:
        q0 = solution.q0
    q = np.asarray(q0, dtype=float)
    steps = []
    for i, h in enumerate(spec.sets):
        if i > 0:
            q = spec.maps[i - 1](q)
        cls = h.classify(q, tol)
        strict = cls.inside and cls.min_margin > tol
        steps.append((i, cls, strict))
    margins = [s[1].min_margin for s in steps]
    return ShadowingReport(all(s[2] for s in steps), steps, float(min(margins)))


def endpoint_system(spec: ChainSpec) -> np.ndarray:
    """Matrix of the linear endpoint system of the chain.

    Every map is replaced by its exit linearization on the surviving exit
    block and the entry parts collapse to zero.  Unknowns are the unit
    coordinates of all h-sets; rows are the anchors and the links.
    """
    sets = spec.sets
    if not sets:
        raise ChainError("empty chain")
    n = sets[0].n
    count = len(sets)
    size = count * n
    rows = []

    def selector(i, idx):
        m = np.zeros((len(idx), size))
        m[np.arange(len(idx)), i * n + idx] = 1.0
        return m

    first = sets[0]
    rows.append(selector(0, first.indices_of(first.entry_labels)))
    for i, labels in sorted(spec.drops.items()):
        rows.append(selector(i, sets[i].indices_of(labels)))
    for i, f in enumerate(spec.maps):
        src, dst = spec.structures[i], sets[i + 1]
        if f.exit_linearization is not None:
            A = np.array(f.exit_linearization, dtype=float, ndmin=2)
        elif f.is_affine:
            A = unit_form(src, f, dst)[0][:src.u, :src.u]
        else:
            raise ChainError(f"link {i + 1}: no exit linearization for a non-affine map")
        src_idx = sets[i].indices_of(src.exit_labels)
        dst_idx = dst.indices_of(dst.exit_labels)
        m = np.zeros((n, size))
        if len(src_idx):
            m[np.ix_(dst_idx, i * n + src_idx)] = A
        m[:, (i + 1) * n:(i + 2) * n] -= np.eye(n)
        rows.append(m)
    last = sets[-1]
    rows.append(selector(count - 1, last.indices_of(last.exit_labels)))
    H = np.vstack(rows)
    if H.shape[0] != H.shape[1]:
        raise ChainError("endpoint system is not square")
    return H


def endpoint_nonsingularity(spec: ChainSpec) -> tuple[bool, float]:
    """Returns ``(nonsingular, |det|)`` for :func:`endpoint_system`."""
    H = endpoint_system(spec)
    sign, logdet = np.linalg.slogdet(H)
    det = 0.0 if sign == 0 else float(np.exp(logdet))
    return bool(sign != 0 and det > DET_MIN), det
