"""Triangular logistic cascade on (0, 1)^n.

    F_1 = lam_1 x_1 (1 - x_1)
    F_i = (lam_i - mu_i) x_i - lam_i x_i^2 + mu_i x_i x_{i-1},   i >= 2

Each equation is a Bernoulli equation once ``x_{i-1}`` is known, which gives
a recursive quadrature formula independent of the Runge-Kutta integration.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson

from .ode import Trajectory, dopri5


class TriangularError(ValueError):
    pass


def _vector(value, n, name):
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        arr = np.full(n, float(arr[0]))
    if arr.size != n:
        raise TriangularError(f"{name}: expected one value or {n} values")
    return tuple(float(a) for a in arr)


@dataclass(frozen=True)
class TriangularConfig:
    lam: tuple
    mu: tuple
    x0: tuple
    t_end: float = 60.0
    rtol: float = 1e-10
    atol: float = 1e-12

    def __post_init__(self):
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        n = x0.size
        if n < 1:
            raise TriangularError("need at least one coordinate")
        object.__setattr__(self, "x0", tuple(float(v) for v in x0))
        object.__setattr__(self, "lam", _vector(self.lam, n, "lam"))
        object.__setattr__(self, "mu", _vector(self.mu, n, "mu"))
        if any(v <= 0 for v in self.lam):
            raise TriangularError("every lam_i must be positive")
        if np.any(x0 <= 0) or np.any(x0 >= 1):
            raise TriangularError("initial state must lie in (0, 1)^n")
        if not self.t_end >= 0:
            raise TriangularError("t_end must be non-negative")

    @property
    def n(self) -> int:
        return len(self.x0)


REGIMES = {
    "mu_dominant": dict(lam=1.0, mu=2.0, x0=(0.1, 0.1, 0.1, 0.1)),
    "balanced": dict(lam=1.0, mu=1.0, x0=(0.1, 0.01, 0.01, 0.01)),
    "lam_dominant": dict(lam=2.0, mu=1.0, x0=(1e-1, 1e-2, 1e-3, 1e-4)),
}


def regime(name: str, **overrides) -> TriangularConfig:
    return TriangularConfig(**{**REGIMES[name], **overrides})


def fixed_point(n: int, i: int) -> np.ndarray:
    p = np.zeros(n)
    p[:i] = 1.0
    return p


def vector_field(cfg: TriangularConfig, x) -> np.ndarray:
    """Evaluate F; ``x`` may carry leading batch dimensions."""
    x = np.asarray(x, dtype=float)
    lam = np.asarray(cfg.lam)
    mu = np.asarray(cfg.mu)
    prev = np.concatenate([np.ones(x.shape[:-1] + (1,)), x[..., :-1]], axis=-1)
    # with x_0 := 1 the first equation reduces to the logistic one; the
    # factored form vanishes exactly at the fixed points and on the segments
    return x * (lam * (1.0 - x) - mu * (1.0 - prev))


def integrate(cfg: TriangularConfig, t_eval=None) -> Trajectory:
    return dopri5(lambda t, y: vector_field(cfg, y), 0.0, cfg.x0, cfg.t_end,
                  rtol=cfg.rtol, atol=cfg.atol, t_eval=t_eval)


def closed_form(cfg: TriangularConfig, t: float, quad_steps: int = 20000) -> np.ndarray:
    """State at time ``t`` from the recursive Bernoulli quadrature.

    ``x_i(t) = x_i(0) E_i(t) / (1 + lam_i x_i(0) int_0^t E_i)`` with
    ``E_i = exp(int_0^t f_i)`` and ``f_i = lam_i - mu_i + mu_i x_{i-1}``;
    ``f_1 = lam_1``.  Integrals use the composite Simpson rule on
    ``quad_steps`` uniform intervals.
    """
    if quad_steps < 2:
        raise TriangularError("quad_steps must be at least 2")
    x0 = np.asarray(cfg.x0)
    if t == 0:
        return x0.copy()
    grid = np.linspace(0.0, float(t), int(quad_steps) + 1)
    prev = np.ones_like(grid)
    out = np.empty(cfg.n)
    for i in range(cfg.n):
        lam, mu = cfg.lam[i], cfg.mu[i]
        rate = np.full_like(grid, lam) if i == 0 else lam - mu + mu * prev
        expo = np.exp(cumulative_simpson(rate, x=grid, initial=0.0))
        denom = 1.0 + lam * x0[i] * cumulative_simpson(expo, x=grid, initial=0.0)
        xi = x0[i] * expo / denom
        out[i] = xi[-1]
        prev = xi
    return out


def transition_times(traj: Trajectory, threshold: float) -> list:
    """First time each coordinate reaches ``threshold`` (None if never).

    Crossings between recorded steps are located by linear interpolation.
    """
    times, states = traj.times, traj.states
    result = []
    for i in range(states.shape[1]):
        x = states[:, i]
        hits = np.nonzero(x >= threshold)[0]
        if hits.size == 0:
            result.append(None)
            continue
        k = int(hits[0])
        if k == 0:
            result.append(float(times[0]))
            continue
        x0, x1 = x[k - 1], x[k]
        frac = (threshold - x0) / (x1 - x0)
        result.append(float(times[k - 1] + frac * (times[k] - times[k - 1])))
    return result
