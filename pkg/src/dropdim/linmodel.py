"""Piecewise-linear chain of saddles in R^n.

Fixed points ``p_i`` (``i = 0..n``) have their first ``i`` coordinates equal
to one and the rest zero.  Near ``p_i`` the map is the diagonal linear map
``D_i`` around ``p_i``: contraction ``mu_p`` on the past coordinates
``x_1..x_{i-1}``, ``mu_i`` on the incoming coordinate ``x_i``, expansion
``lam_i`` on the outgoing coordinate ``x_{i+1}`` and ``lam_f`` on the
future coordinates ``x_{i+2}..x_n``.  A translation by ``e_{i+1}`` carries the
outgoing section of ``p_i`` to the incoming section of ``p_{i+1}``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .covering import ChainSpec, Drop, MapHandle, check_covering_affine, solve_chain
from .geometry import BlockSpec, ENTRY, EXIT, HSet


class LinearModelError(ValueError):
    pass


def _per_index(value, n, name):
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        arr = np.full(n + 1, float(arr[0]))
    if arr.size != n + 1:
        raise LinearModelError(f"{name}: expected one value or {n + 1} values")
    return tuple(float(a) for a in arr)


@dataclass(frozen=True)
class LinearModelConfig:
    n: int
    mu: tuple
    lam: tuple
    mu_p: tuple
    lam_f: tuple
    eps: float
    sigma: float
    eta: float
    past_matrices: dict = field(default_factory=dict)
    future_matrices: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.n
        if int(n) != n or n < 1:
            raise LinearModelError("n must be a positive integer")
        for name in ("mu", "lam", "mu_p", "lam_f"):
            object.__setattr__(self, name, _per_index(getattr(self, name), n, name))
        for i in range(n + 1):
            if not 0 < abs(self.mu[i]) < 1:
                raise LinearModelError(f"mu[{i}] must satisfy 0 < |mu| < 1")
            if not 0 < abs(self.mu_p[i]) < 1:
                raise LinearModelError(f"mu_p[{i}] must satisfy 0 < |mu_p| < 1")
            if not abs(self.lam[i]) > 1:
                raise LinearModelError(f"lam[{i}] must satisfy |lam| > 1")
            if not self.lam_f[i] > 1:
                raise LinearModelError(f"lam_f[{i}] must be greater than 1")
        if not 0 < self.sigma < self.eps:
            raise LinearModelError("need 0 < sigma < eps")
        if not 0 < self.eta < 1:
            raise LinearModelError("need 0 < eta < 1")
        for i, m in self.past_matrices.items():
            m = np.asarray(m, dtype=float)
            if m.shape != (max(i - 1, 0),) * 2:
                raise LinearModelError(f"past matrix {i} has the wrong shape")
            if np.abs(m).sum(axis=1).max(initial=0) > abs(self.mu_p[i]) * (1 + 1e-12):
                raise LinearModelError(f"past matrix {i} is not bounded by mu_p")
        for i, m in self.future_matrices.items():
            m = np.asarray(m, dtype=float)
            if m.shape != (max(n - i - 1, 0),) * 2:
                raise LinearModelError(f"future matrix {i} has the wrong shape")
            if m.size and np.abs(np.linalg.inv(m)).sum(axis=1).max() * self.lam_f[i] > 1 + 1e-12:
                raise LinearModelError(f"future matrix {i} does not expand by lam_f")

    @classmethod
    def uniform(cls, n, mu, lam, mu_p, lam_f, eps, sigma, eta):
        return cls(n, mu, lam, mu_p, lam_f, eps, sigma, eta)


def fixed_point(n: int, i: int) -> np.ndarray:
    p = np.zeros(n)
    p[:i] = 1.0
    return p


def block_ranges(n: int, i: int) -> dict:
    """Coordinate indices (0-based) of the past/inc/out/future blocks at ``p_i``."""
    return {
        "z_p": np.arange(0, max(i - 1, 0)),
        "z_inc": np.arange(i - 1, i) if i >= 1 else np.arange(0),
        "z_out": np.arange(i, i + 1) if i <= n - 1 else np.arange(0),
        "z_f": np.arange(i + 1, n) if i <= n - 2 else np.arange(0),
    }


def local_matrix(cfg: LinearModelConfig, i: int) -> np.ndarray:
    n = cfg.n
    r = block_ranges(n, i)
    D = np.zeros((n, n))
    if r["z_p"].size:
        D[np.ix_(r["z_p"], r["z_p"])] = cfg.past_matrices.get(i, cfg.mu_p[i] * np.eye(r["z_p"].size))
    D[r["z_inc"], r["z_inc"]] = cfg.mu[i]
    D[r["z_out"], r["z_out"]] = cfg.lam[i]
    if r["z_f"].size:
        D[np.ix_(r["z_f"], r["z_f"])] = cfg.future_matrices.get(i, cfg.lam_f[i] * np.eye(r["z_f"].size))
    return D


def local_map(cfg: LinearModelConfig, i: int) -> MapHandle:
    """One step of the map near ``p_i``: ``x -> p_i + D_i (x - p_i)``."""
    D = local_matrix(cfg, i)
    p = fixed_point(cfg.n, i)
    return MapHandle.affine(D, p - D @ p, name=f"f_{i}")


def transition_map(cfg: LinearModelConfig, i: int) -> MapHandle:
    """Translation carrying ``q_{i,out}`` to ``q_{i+1,inc}``."""
    shift = incoming_point(cfg, i + 1) - outgoing_point(cfg, i)
    return MapHandle.affine(np.eye(cfg.n), shift, name=f"f_{i},{i + 1}")


def incoming_point(cfg: LinearModelConfig, i: int) -> np.ndarray:
    q = fixed_point(cfg.n, i)
    if i >= 1:
        q[i - 1] += cfg.sigma
    return q


def outgoing_point(cfg: LinearModelConfig, i: int) -> np.ndarray:
    q = fixed_point(cfg.n, i)
    q[i] += cfg.sigma
    return q


def iterate_bounds(cfg: LinearModelConfig, i: int) -> dict:
    """Lower bounds on the number of local iterates at ``p_i``.

    Only the bounds whose blocks exist at ``p_i`` are returned.
    """
    n, eps, sig, eta = cfg.n, cfg.eps, cfg.sigma, cfg.eta
    r = block_ranges(n, i)
    out = {}
    if r["z_p"].size:
        out["past"] = np.log(1 - eta) / np.log(abs(cfg.mu_p[i]))
    if r["z_inc"].size:
        out["incoming"] = np.log((sig + eps) / ((1 - eta) * eps)) / -np.log(abs(cfg.mu[i]))
    if r["z_out"].size:
        out["outgoing"] = np.log((sig + (1 + eta) * eps) / eps) / np.log(abs(cfg.lam[i]))
    if r["z_f"].size:
        out["future"] = np.log(1 + eta) / np.log(cfg.lam_f[i])
    return {k: float(v) for k, v in out.items()}


def min_iterates(cfg: LinearModelConfig, i: int) -> int:
    """Smallest positive integer strictly above every applicable bound."""
    bounds = iterate_bounds(cfg, i)
    top = max(bounds.values(), default=0.0)
    return max(1, int(np.floor(top)) + 1)


def build_hsets(cfg: LinearModelConfig, i: int) -> dict:
    """The h-sets ``inc``, ``out`` and ``out_dropped`` around ``p_i``.

    ``inc`` is the eps-cube at ``q_{i,inc}``.  ``out`` is centered at
    ``q_{i,out}`` with entry radii ``(1 - eta) eps`` and future radius
    ``(1 + eta) eps``; its outgoing block has radius ``(1 - eta) eps`` so that
    the dropped block fits inside the next incoming cube.
    """
    n, eps, eta = cfg.n, cfg.eps, cfg.eta
    r = block_ranges(n, i)
    tags = {"z_p": ENTRY, "z_inc": ENTRY, "z_out": EXIT, "z_f": EXIT}
    inc_blocks = [BlockSpec(lab, idx.size, eps, tags[lab]) for lab, idx in r.items() if idx.size]
    sets = {"inc": HSet(incoming_point(cfg, i), inc_blocks)}
    if i < n:
        radii = {"z_p": (1 - eta) * eps, "z_inc": (1 - eta) * eps,
                 "z_out": (1 - eta) * eps, "z_f": (1 + eta) * eps}
        out_blocks = [BlockSpec(lab, idx.size, radii[lab], tags[lab]) for lab, idx in r.items() if idx.size]
        out = HSet(outgoing_point(cfg, i), out_blocks)
        sets["out"] = out
        sets["out_dropped"] = out.drop_exit("z_out")
    return sets


@dataclass(frozen=True)
class LinearModel:
    cfg: LinearModelConfig
    ks: tuple
    hsets: tuple
    local: tuple
    transitions: tuple

    def passage(self, i: int) -> MapHandle:
        return self.local[i].power(self.ks[i])


def build_model(cfg: LinearModelConfig, ks=None) -> LinearModel:
    n = cfg.n
    if ks is None:
        ks = [min_iterates(cfg, i) for i in range(n)]
    ks = tuple(int(k) for k in ks)
    if len(ks) != n or any(k < 0 for k in ks):
        raise LinearModelError(f"need {n} non-negative iterate counts")
    hsets = tuple(build_hsets(cfg, i) for i in range(n + 1))
    local = tuple(local_map(cfg, i) for i in range(n + 1))
    transitions = tuple(transition_map(cfg, i) for i in range(n))
    return LinearModel(cfg, ks, hsets, local, transitions)


def verify_model(cfg: LinearModelConfig, ks=None) -> list:
    """Exact certificates for every local passage and every transition."""
    model = build_model(cfg, ks)
    certs = []
    for i in range(cfg.n):
        sets = model.hsets[i]
        certs.append((f"local_{i}", check_covering_affine(sets["inc"], model.passage(i), sets["out"])))
        certs.append((f"transition_{i}", check_covering_affine(
            sets["out_dropped"], model.transitions[i], model.hsets[i + 1]["inc"])))
    return certs


def chain_spec(cfg: LinearModelConfig, ks=None, tol: float = 1e-10) -> ChainSpec:
    model = build_model(cfg, ks)
    elements = []
    for i in range(cfg.n):
        sets = model.hsets[i]
        elements += [sets["inc"], model.passage(i), sets["out"], Drop("z_out"), model.transitions[i]]
    elements.append(model.hsets[cfg.n]["inc"])
    return ChainSpec(elements, tol=tol)


@dataclass(frozen=True)
class Visit:
    index: int
    iterate: int
    distance: float


@dataclass(frozen=True)
class ShadowOrbit:
    q0: np.ndarray
    orbit: np.ndarray
    visits: list
    residual: float


def shadow_orbit(cfg: LinearModelConfig, ks=None) -> ShadowOrbit:
    """Solve the chain and record how close the orbit passes to each ``p_i``.

    ``orbit`` lists every single iterate of the global map.  The visit to
    ``p_i`` is the closest iterate (max-norm) among those spent near ``p_i``;
    the visit to ``p_0`` is the starting point.
    """
    model = build_model(cfg, ks)
    spec = chain_spec(cfg, model.ks)
    sol = solve_chain(spec)
    n = cfg.n
    x = sol.q0.copy()
    orbit = [x.copy()]
    visits = []
    index = 0
    for i in range(n + 1):
        p = fixed_point(n, i)
        seg = [(index, float(np.max(np.abs(x - p))))]
        if i < n:
            for _ in range(model.ks[i]):
                x = model.local[i](x)
                index += 1
                orbit.append(x.copy())
                seg.append((index, float(np.max(np.abs(x - p)))))
            x = model.transitions[i](x)
            index += 1
            orbit.append(x.copy())
        best = seg[0] if i == 0 else min(seg, key=lambda s: s[1])
        visits.append(Visit(i, best[0], best[1]))
    return ShadowOrbit(sol.q0, np.array(orbit), visits, sol.residual)
