"""Adaptive Dormand-Prince 5(4) integrator with batched states.

The state may have any leading batch shape; the step size is shared across
the batch and controlled by the worst component.  Every accepted step keeps
its local error estimate so callers can audit the integration.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array(_A[6] + [0.0])
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])


class IntegrationError(RuntimeError):
    """Raised when the step size underflows or the step budget is exhausted."""


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    errors: np.ndarray
    method: str
    rtol: float
    atol: float
    n_steps: int

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def _error_norm(err, y0, y1, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.max(np.abs(err) / scale)) if err.size else 0.0


def _initial_step(rhs, t0, y0, f0, direction, rtol, atol, span):
    scale = atol + rtol * np.abs(y0)
    d0 = np.max(np.abs(y0) / scale)
    d1 = np.max(np.abs(f0) / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    y1 = y0 + direction * h0 * f0
    f1 = rhs(t0 + direction * h0, y1)
    d2 = np.max(np.abs(f1 - f0) / scale) / h0
    if not np.isfinite(d2):
        return 1e-3 * h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1)


def dopri5(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    t0: float,
    y0,
    t_end: float,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    t_eval: Sequence[float] | None = None,
    h0: float | None = None,
    max_steps: int = 1_000_000,
) -> Trajectory:
    """Integrate ``y' = rhs(t, y)`` from ``t0`` to ``t_end``.

    Without ``t_eval`` every accepted step is recorded; with it, steps are
    shortened so the listed times are hit exactly and only those are kept.
    ``errors[k]`` is the scaled local error estimate of the step ending at
    ``times[k]`` (zero for the initial row).
    """
    y = np.array(y0, dtype=float)
    t = float(t0)
    t_end = float(t_end)
    direction = 1.0 if t_end >= t else -1.0
    if t_eval is None:
        targets = None
    else:
        targets = [float(s) for s in t_eval]
        if any((s - t) * direction < 0 or (s - t_end) * direction > 0 for s in targets):
            raise ValueError("t_eval must lie inside the integration interval")
    times, states, errors = [], [], []

    def record(tt, yy, ee):
        times.append(tt)
        states.append(yy.copy())
        errors.append(ee)

    k_target = 0
    if targets is None:
        record(t, y, 0.0)
    else:
        while k_target < len(targets) and targets[k_target] == t:
            record(t, y, 0.0)
            k_target += 1
    if t == t_end:
        return Trajectory(np.array(times), np.array(states), np.array(errors), "dopri5", rtol, atol, 0)

    f = np.asarray(rhs(t, y), dtype=float)
    h = abs(h0) if h0 else _initial_step(rhs, t, y, f, direction, rtol, atol, abs(t_end - t))
    h = min(h, abs(t_end - t))
    n_steps = 0
    while (t_end - t) * direction > 0:
        if n_steps >= max_steps:
            raise IntegrationError(f"step budget exhausted at t={t!r}")
        stop = t_end
        if targets is not None and k_target < len(targets):
            stop = targets[k_target]
        hit = False
        if h >= abs(stop - t):
            h = abs(stop - t)
            hit = True
        if h <= 16 * np.finfo(float).eps * max(1.0, abs(t)):
            raise IntegrationError(f"step size underflow at t={t!r}")
        hs = direction * h
        ks = [f]
        for i in range(1, 7):
            yi = y + hs * sum(a * k for a, k in zip(_A[i], ks) if a != 0.0)
            ks.append(np.asarray(rhs(t + _C[i] * hs, yi), dtype=float))
        y_new = y + hs * sum(b * k for b, k in zip(_B, ks) if b != 0.0)
        err = hs * sum(e * k for e, k in zip(_E, ks) if e != 0.0)
        en = _error_norm(err, y, y_new, rtol, atol)
        if not np.all(np.isfinite(y_new)):
            en = np.inf
        if en <= 1.0:
            t = stop if hit else t + hs
            y = y_new
            f = ks[6]
            n_steps += 1
            if targets is None:
                record(t, y, en)
            elif hit and k_target < len(targets):
                while k_target < len(targets) and targets[k_target] == t:
                    record(t, y, en)
                    k_target += 1
            factor = 5.0 if en == 0 else min(5.0, max(0.2, 0.9 * en ** -0.2))
            h = h * factor
        else:
            factor = 0.2 if not np.isfinite(en) else max(0.2, 0.9 * en ** -0.2)
            h = h * factor
    return Trajectory(np.array(times), np.array(states), np.array(errors), "dopri5", rtol, atol, n_steps)
