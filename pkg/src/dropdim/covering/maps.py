"""Map handles: a batched evaluator plus optional affine data."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


class EvaluationError(RuntimeError):
    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


@dataclass(frozen=True)
class MapHandle:
    """A map R^n -> R^n.

    ``evaluator`` takes an ``(m, n)`` array and returns an ``(m, n)`` array.
    ``matrix``/``offset`` describe the map exactly when it is affine.
    ``exit_linearization`` is the linear part declared for the unstable
    block in unit coordinates; it fixes the degree for non-affine maps.
    """

    n: int
    evaluator: Callable[[np.ndarray], np.ndarray]
    matrix: np.ndarray | None = None
    offset: np.ndarray | None = None
    inverse_evaluator: Callable[[np.ndarray], np.ndarray] | None = None
    exit_linearization: np.ndarray | None = None
    name: str = "f"

    @classmethod
    def affine(cls, matrix, offset=None, name: str = "f") -> "MapHandle":
        matrix = np.array(matrix, dtype=float, ndmin=2)
        n = matrix.shape[0]
        if matrix.shape != (n, n):
            raise ValueError("affine map needs a square matrix")
        offset = np.zeros(n) if offset is None else np.array(offset, dtype=float).reshape(n)
        matrix.flags.writeable = False
        offset.flags.writeable = False

        def evaluator(x, m=matrix, b=offset):
            return x @ m.T + b

        inverse = None
        if np.linalg.cond(matrix) < 1e14:
            minv = np.linalg.inv(matrix)

            def inverse(y, m=minv, b=offset):
                return (y - b) @ m.T

        return cls(n, evaluator, matrix, offset, inverse, None, name)

    @classmethod
    def from_function(cls, fn, n: int, vectorized: bool = False, inverse=None,
                      exit_linearization=None, name: str = "f") -> "MapHandle":
        if vectorized:
            evaluator = fn
            inv = inverse
        else:
            def evaluator(x, fn=fn):
                return np.array([np.asarray(fn(row), dtype=float) for row in x]).reshape(x.shape)

            inv = None
            if inverse is not None:
                def inv(y, g=inverse):
                    return np.array([np.asarray(g(row), dtype=float) for row in y]).reshape(y.shape)
        lin = None if exit_linearization is None else np.array(exit_linearization, dtype=float, ndmin=2)
        return cls(n, evaluator, None, None, inv, lin, name)

    @property
    def is_affine(self) -> bool:
        return self.matrix is not None

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        xb = x.reshape(1, -1) if single else x
        if xb.shape[-1] != self.n:
            raise ValueError(f"{self.name}: expected points of dimension {self.n}")
        try:
            y = np.asarray(self.evaluator(xb), dtype=float)
        except EvaluationError:
            raise
        except Exception as exc:
            bad = xb[0]
            for row in xb:
                try:
                    self.evaluator(row.reshape(1, -1))
                except Exception:
                    bad = row
                    break
            raise EvaluationError(f"{self.name}: evaluation failed at {bad.tolist()}: {exc}", bad) from exc
        return y[0] if single else y

    def inverse(self) -> "MapHandle":
        if self.inverse_evaluator is None:
            raise ValueError(f"{self.name}: no inverse available")
        if self.is_affine:
            minv = np.linalg.inv(self.matrix)
            return MapHandle.affine(minv, -minv @ self.offset, name=f"{self.name}^-1")
        return MapHandle(self.n, self.inverse_evaluator, None, None, self.evaluator, None,
                         f"{self.name}^-1")

    def power(self, k: int) -> "MapHandle":
        """``k``-fold composition of an affine map (``k = 0`` is the identity)."""
        if not self.is_affine:
            raise ValueError("power is only provided for affine maps")
        m, b = np.eye(self.n), np.zeros(self.n)
        for _ in range(int(k)):
            m, b = self.matrix @ m, self.matrix @ b + self.offset
        return MapHandle.affine(m, b, name=f"{self.name}^{k}")

    def check_affine_consistency(self, rng=None, count: int = 16, tol: float = 1e-12) -> float:
        """Largest relative gap between evaluator and declared affine form."""
        if not self.is_affine:
            return 0.0
        rng = np.random.default_rng(0) if rng is None else rng
        x = rng.uniform(-1, 1, size=(count, self.n))
        direct = self.evaluator(x)
        affine = x @ self.matrix.T + self.offset
        scale = 1.0 + np.max(np.abs(affine))
        return float(np.max(np.abs(direct - affine)) / scale)


def unit_form(N, f: MapHandle, M):
    """Affine form ``v -> P v + g`` of ``f`` seen from ``N``'s to ``M``'s unit chart."""
    if not f.is_affine:
        raise ValueError(f"{f.name}: unit form needs an affine map")
    UN_inv = N.unit_matrix_inverse()
    UM = M.unit_matrix()
    P = UM @ f.matrix @ UN_inv
    g = UM @ (f.matrix @ N.center + f.offset - M.center)
    return P, g
