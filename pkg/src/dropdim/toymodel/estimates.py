"""A-priori bounds for the flow near one torus and the transit-time search.

The hyperbolic bounds come from iterating linear-growth estimates: every
stage feeds the previous enclosures into the nonlinear terms.  Stages are
plain functions of their inputs, so the same code runs on floats and on
symbolic expressions.
"""
from __future__ import annotations

import math

import numpy as np

from ..interval import Interval
from .dynamics import ToyConfig, ToyModelError

T_START = 1.0
T_STEP = 0.5
T_BISECT_TOL = 1e-6


def center_constant(cfg: ToyConfig) -> float:
    """Growth factor ``A = exp(21 K G sigma'^2)`` of the center modes over one transit."""
    return math.exp(21.0 * cfg.K * cfg.G * cfg.sigma_p ** 2)


# iteration stages of the hyperbolic enclosure

def enclosure_stage(prev, K, sp, d, T, exp=math.exp):
    """One refinement of the growth coefficients.

    ``prev`` maps ``y-, x-, y+, x+`` to the previous stage's coefficients
    (all zero before the first stage).  Each product ``t * coeff`` with a
    nonzero previous coefficient is bounded by ``sp`` (because
    ``t e^{-3T} < sp``).  ``x-`` and ``y+`` coefficients multiply
    ``t e^{-2T} e^t`` and ``t e^{-T} e^{-t}``; ``y-`` and ``x+`` coefficients
    are the ones of ``t e^{-t}`` and ``t e^{-T} e^t``.
    """
    grow_y = sp if prev["y-"] != 0 else 0
    grow_x = sp if prev["x+"] != 0 else 0
    return {
        "y-": exp(-3 * T),
        "x-": K * (sp + grow_y) * (d + grow_x) ** 2,
        "y+": K * (d + grow_x) * (sp + grow_y) ** 2,
        "x+": exp(-3 * T),
    }


def enclosure_stages(K, sp, d, T, count: int = 3, exp=math.exp) -> list:
    coeffs = {"y-": 0, "x-": 0, "y+": 0, "x+": 0}
    out = []
    for _ in range(count):
        coeffs = enclosure_stage(coeffs, K, sp, d, T, exp)
        out.append(coeffs)
    return out


def stage_conditions(coeffs, K, a, b, T) -> dict:
    """Conditions that close a stage with the given x-/y+ coefficients.

    Residuals are ``log(e^T) - log(rhs)`` (positive means satisfied).
    """
    amp_a = a + T * coeffs["x-"]
    amp_b = b + T * coeffs["y+"]
    out = {}
    for name, val in (("xm-yp2", K * amp_a * amp_b ** 2), ("yp-xm2", K * amp_b * amp_a ** 2)):
        out[name] = math.inf if val <= 0 else T - math.log(val)
    return out


# constraints on T

def theorem_constraints(cfg: ToyConfig, T: float) -> dict:
    """Residuals of the transit-time hypotheses (positive means satisfied).

    The interval magnitudes ``|a| = |b| = |d| = T^k`` are used throughout.
    """
    K, sp, G, N = cfg.K, cfg.sigma_p, cfg.G, cfg.N
    m = T ** cfg.k
    final = enclosure_stage({"y-": 1, "x-": 1, "y+": 1, "x+": 1}, K, sp, m, T)
    cond = stage_conditions(final, K, m, m, T)
    A = center_constant(cfg)
    lhs = (G * math.exp(-2 * T) * ((m + T * (2 * K * sp * (3.5 * sp) ** 2)) ** 2
                                   + (m + T * (4 * K * sp * (3.5 * sp))) ** 2)
           + 2 * N * A * T ** (2 * cfg.k + 1) * math.exp(-2 * T))
    return {
        "exp-growth-1": cond["xm-yp2"],
        "exp-growth-2": cond["yp-xm2"],
        "transit-decay": sp - T * math.exp(-3 * T),
        "center-bound": G * sp ** 2 - lhs,
    }


def constraints_hold(cfg: ToyConfig, T: float) -> bool:
    res = theorem_constraints(cfg, T)
    return res["exp-growth-1"] >= 0 and res["exp-growth-2"] >= 0 and \
        res["transit-decay"] > 0 and res["center-bound"] > 0


def admissible_T(cfg: ToyConfig, t_max: float = 1e3) -> float:
    """Smallest transit time (to 1e-6) meeting every hypothesis.

    A scan in steps of 0.5 from T = 1 finds the first admissible grid point,
    then bisection locates the boundary below it.  Satisfaction is checked
    again at ``T + 1``.
    """
    hi = T_START
    while not constraints_hold(cfg, hi):
        hi += T_STEP
        if hi > t_max:
            raise ToyModelError("no admissible transit time below the search limit")
    lo = hi - T_STEP
    if lo <= T_START or constraints_hold(cfg, lo):
        return hi
    while hi - lo > T_BISECT_TOL:
        mid = 0.5 * (lo + hi)
        if constraints_hold(cfg, mid):
            hi = mid
        else:
            lo = mid
    if not constraints_hold(cfg, hi + 1.0):
        raise ToyModelError("constraints are not monotone above the located transit time")
    return hi


def transit_time(cfg: ToyConfig) -> float:
    return admissible_T(cfg) if cfg.T is None else float(cfg.T)


def violated_constraints(cfg: ToyConfig, T: float) -> list:
    res = theorem_constraints(cfg, T)
    strict = {"transit-decay", "center-bound"}
    return [k for k, v in res.items() if (v <= 0 if k in strict else v < 0)]


# enclosures

def hyperbolic_enclosure(cfg: ToyConfig, T: float, eta: float, a0: float, b0: float, d0: float,
                         t: float, scaled: bool = False):
    """Intervals for ``(y-, x-, y+, x+)`` at time ``t`` in ``[0, T]``.

    Initial data: ``y- = eta``, ``x- = e^{-2T} a0``, ``y+ = e^{-T} b0``,
    ``x+ = e^{-T} d0``.  With ``scaled`` the intervals are returned for
    ``e^t y-``, ``e^{2T - t} x-``, ``e^{T + t} y+`` and ``e^{T - t} x+``.
    """
    sp = cfg.sigma_p
    bound = T ** cfg.k
    if not 0 < eta < sp:
        raise ToyModelError("eta must lie in (0, sigma')")
    if max(abs(a0), abs(b0), abs(d0)) > bound:
        raise ToyModelError("initial amplitudes exceed T^k")
    if not 0 <= t <= T:
        raise ToyModelError("t must lie in [0, T]")
    bad = violated_constraints(cfg, T)
    if bad:
        raise ToyModelError(f"T = {T} violates: {', '.join(bad)}")
    d = max(abs(d0), 2.5 * sp)
    c = enclosure_stages(cfg.K, sp, d, T)[-1]
    e3 = math.exp(-3 * T)
    scaled_iv = (Interval.around(eta, t * e3),
                 Interval.around(a0, t * c["x-"]),
                 Interval.around(b0, t * c["y+"]),
                 Interval.around(d0, t * e3))
    if scaled:
        return scaled_iv
    w = (math.exp(-t), math.exp(t - 2 * T), math.exp(-T - t), math.exp(t - T))
    return tuple(iv * f for iv, f in zip(scaled_iv, w))


def center_bounds(cfg: ToyConfig, c0_magnitudes, T: float) -> list:
    """Interval for ``|c_j(t)|^2`` on ``[0, T]`` for each initial magnitude."""
    res = theorem_constraints(cfg, T)["center-bound"]
    if res <= 0:
        raise ToyModelError(f"center bound on T violated (residual {res:.3e})")
    limit = T ** cfg.k * math.exp(-T)
    A = center_constant(cfg)
    out = []
    for c in np.atleast_1d(c0_magnitudes):
        c = abs(float(c))
        if c > limit * (1 + 1e-12):
            raise ToyModelError(f"initial center magnitude {c:.3e} exceeds T^k e^-T = {limit:.3e}")
        out.append(Interval(c * c / A, c * c * A))
    return out
