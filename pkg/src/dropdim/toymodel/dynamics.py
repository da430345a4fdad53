"""Chart dynamics of the toy model near the torus T_j and the jump between charts.

Chart ``j`` uses real coordinates ordered ``[y-, x-, y+, x+]`` followed by
``(Re, Im)`` of every center mode.  The hyperbolic pairs are the two real
components of modes ``j - 1`` (``y-``, ``x-``) and ``j + 1`` (``y+``, ``x+``).
Mode indices run over ``-1..N+1``: the two outer modes are always zero along
the orbits of interest but keep every chart the same dimension, so the jump
is an invertible linear map.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..ode import dopri5

SQRT3 = float(np.sqrt(3.0))
OMEGA = complex(-0.5, SQRT3 / 2)
HYPERBOLIC = ("y-", "x-", "y+", "x+")
MASS_LIMIT = 1.1
FLOW_RTOL = 1e-13
FLOW_ATOL = 1e-16


class ToyModelError(ValueError):
    pass


@dataclass(frozen=True)
class ToyConfig:
    N: int = 3
    sigma: float = 0.1
    K: float = 1e-3
    kappa: float | None = None
    kappa_c: complex | None = None
    k: int = 2
    G: float = 1.5
    L: float = SQRT3
    T: float | None = None
    nu: float = 1e-3
    couplings: tuple | None = None
    g1_order: str = "xm_first"
    center_box_factor: float = float(np.sqrt(2.0))

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 0:
            raise ToyModelError("N must be a non-negative integer")
        if not self.sigma > 0:
            raise ToyModelError("sigma must be positive")
        if not self.K >= 0:
            raise ToyModelError("K must be non-negative")
        kappa = self.K if self.kappa is None else float(self.kappa)
        kappa_c = complex(0.0, self.K) if self.kappa_c is None else complex(self.kappa_c)
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "kappa_c", kappa_c)
        couplings = (kappa,) * 4 if self.couplings is None else tuple(float(c) for c in self.couplings)
        if len(couplings) != 4:
            raise ToyModelError("couplings needs four values")
        object.__setattr__(self, "couplings", couplings)
        tol = self.K * (1 + 1e-12)
        if any(abs(c) > tol for c in couplings):
            raise ToyModelError("hyperbolic couplings must satisfy |kappa| <= K")
        if abs(kappa_c) > tol:
            raise ToyModelError("center coupling must satisfy |kappa_c| <= K")
        if self.L < lipschitz_g() * (1 - 1e-12):
            raise ToyModelError(f"L must be at least {lipschitz_g():.6f}")
        if int(self.k) != self.k or self.k < 1:
            raise ToyModelError("k must be a positive integer")
        if not self.G > 0:
            raise ToyModelError("G must be positive")
        if not 0 < self.nu < 1:
            raise ToyModelError("nu must lie in (0, 1)")
        if self.T is not None and not self.T > 1:
            raise ToyModelError("T must exceed 1")
        if self.g1_order not in ("xm_first", "ym_first"):
            raise ToyModelError("g1_order must be 'xm_first' or 'ym_first'")
        if self.center_box_factor < np.sqrt(2.0) * (1 - 1e-12):
            raise ToyModelError("center_box_factor must be at least sqrt(2)")

    @property
    def sigma_p(self) -> float:
        return 1.01 * self.sigma


# g1 / g2

def g1(c_minus, c_plus):
    """``omega c- + omega^2 c+`` for real arguments."""
    return OMEGA * np.asarray(c_minus) + OMEGA.conjugate() * np.asarray(c_plus)


def g2(c):
    """Inverse of :func:`g1`: returns ``(c-, c+)``."""
    c = np.asarray(c, dtype=complex)
    return -c.real + c.imag / SQRT3, -c.real - c.imag / SQRT3


def lipschitz_g() -> float:
    """Max-norm Lipschitz constant shared by g1 and g2.

    g1 maps the max-norm unit square into the (Re, Im) max-norm ball of
    radius sqrt(3); g2 maps that ball into the square of radius 1 + 1/sqrt(3).
    """
    return max(SQRT3, 1 + 1 / SQRT3)


def g1_square_norm(a, b):
    """``|g1(a, b)|^2 = a^2 + b^2 - a b``."""
    return a * a + b * b - a * b


# chart layout

@dataclass(frozen=True)
class ChartLayout:
    N: int
    j: int
    modes: tuple = field(init=False)

    def __post_init__(self):
        if not 0 <= self.j <= self.N:
            raise ToyModelError(f"chart {self.j} outside 0..{self.N}")
        modes = tuple(k for k in range(-1, self.N + 2) if k not in (self.j - 1, self.j, self.j + 1))
        object.__setattr__(self, "modes", modes)

    @property
    def n(self) -> int:
        return 4 + 2 * len(self.modes)

    def mode_index(self, k: int) -> int:
        """Position of ``Re c_k``; ``Im c_k`` follows."""
        return 4 + 2 * self.modes.index(k)

    @property
    def past(self) -> tuple:
        return tuple(k for k in self.modes if k <= self.j - 2)

    @property
    def future(self) -> tuple:
        return tuple(k for k in self.modes if k >= self.j + 2)


def layout(cfg: ToyConfig, j: int) -> ChartLayout:
    return ChartLayout(cfg.N, j)


@dataclass
class ChartState:
    """Readable view of one point in chart ``j``."""

    j: int
    y_minus: float = 0.0
    x_minus: float = 0.0
    y_plus: float = 0.0
    x_plus: float = 0.0
    modes: dict = field(default_factory=dict)

    def to_vector(self, cfg: ToyConfig) -> np.ndarray:
        lay = layout(cfg, self.j)
        v = np.zeros(lay.n)
        v[:4] = (self.y_minus, self.x_minus, self.y_plus, self.x_plus)
        for k, c in self.modes.items():
            if k not in lay.modes:
                raise ToyModelError(f"mode {k} is not a center mode of chart {self.j}")
            i = lay.mode_index(k)
            v[i], v[i + 1] = complex(c).real, complex(c).imag
        return v

    @classmethod
    def from_vector(cls, cfg: ToyConfig, j: int, v) -> "ChartState":
        lay = layout(cfg, j)
        v = np.asarray(v, dtype=float)
        modes = {k: complex(v[lay.mode_index(k)], v[lay.mode_index(k) + 1]) for k in lay.modes}
        return cls(j, float(v[0]), float(v[1]), float(v[2]), float(v[3]), modes)


# vector field

def mass(x) -> np.ndarray:
    """Sum of ``|c_k|^2`` over all modes other than the chart's own torus."""
    x = np.asarray(x, dtype=float)
    ym, xm, yp, xp = x[..., 0], x[..., 1], x[..., 2], x[..., 3]
    return g1_square_norm(ym, xm) + g1_square_norm(yp, xp) + np.sum(x[..., 4:] ** 2, axis=-1)


def rhs(cfg: ToyConfig, x) -> np.ndarray:
    """Vector field in chart coordinates (the chart index does not enter)."""
    x = np.asarray(x, dtype=float)
    k1, k2, k3, k4 = cfg.couplings
    ym, xm, yp, xp = x[..., 0], x[..., 1], x[..., 2], x[..., 3]
    out = np.empty_like(x)
    out[..., 0] = -ym + k1 * xm * yp ** 2
    out[..., 1] = xm + k2 * ym * xp ** 2
    out[..., 2] = -yp + k3 * xp * ym ** 2
    out[..., 3] = xp + k4 * yp * xm ** 2
    re, im = x[..., 4::2], x[..., 5::2]
    s = mass(x)[..., None]
    # i c (1 + kappa_c S) in real form
    fr = 1.0 + cfg.kappa_c.real * s
    fi = cfg.kappa_c.imag * s
    out[..., 4::2] = -re * fi - im * fr
    out[..., 5::2] = re * fr - im * fi
    return out


# flow in scaled variables

def _scales(s, tau):
    """Factors ``w`` with ``scaled = w * raw`` at time ``s`` for a flight of length ``tau``."""
    return np.array([np.exp(s), np.exp(2 * tau - s), np.exp(tau + s), np.exp(tau - s)])


def to_scaled(x, s, tau):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    out[..., :4] = x[..., :4] * _scales(s, tau)
    re, im = x[..., 4::2], x[..., 5::2]
    c, sn = np.cos(s), np.sin(s)
    # C = e^tau e^{-is} c
    out[..., 4::2] = np.exp(tau) * (c * re + sn * im)
    out[..., 5::2] = np.exp(tau) * (c * im - sn * re)
    return out


def from_scaled(z, s, tau):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    out[..., :4] = z[..., :4] / _scales(s, tau)
    re, im = z[..., 4::2], z[..., 5::2]
    c, sn = np.cos(s), np.sin(s)
    out[..., 4::2] = np.exp(-tau) * (c * re - sn * im)
    out[..., 5::2] = np.exp(-tau) * (c * im + sn * re)
    return out


def scaled_rhs(cfg: ToyConfig, s, z, tau):
    """Vector field of the scaled, co-rotating variables.

    Linear parts cancel; what remains is the coupling, of size ``K``.
    """
    k1, k2, k3, k4 = cfg.couplings
    Ym, Xm, Yp, Xp = z[..., 0], z[..., 1], z[..., 2], z[..., 3]
    e4 = np.exp(-4 * tau)
    out = np.empty_like(z)
    out[..., 0] = k1 * e4 * Xm * Yp ** 2
    out[..., 1] = k2 * Ym * Xp ** 2
    out[..., 2] = k3 * Xp * Ym ** 2
    out[..., 3] = k4 * e4 * Yp * Xm ** 2
    raw = z[..., :4] / _scales(s, tau)
    s_mass = (g1_square_norm(raw[..., 0], raw[..., 1]) + g1_square_norm(raw[..., 2], raw[..., 3])
              + np.exp(-2 * tau) * np.sum(z[..., 4:] ** 2, axis=-1))[..., None]
    p, q = cfg.kappa_c.real, cfg.kappa_c.imag
    re, im = z[..., 4::2], z[..., 5::2]
    out[..., 4::2] = s_mass * (-q * re - p * im)
    out[..., 5::2] = s_mass * (p * re - q * im)
    return out


def _check_mass(x, when):
    m = np.max(mass(x)) if np.size(x) else 0.0
    if m > MASS_LIMIT:
        raise ToyModelError(f"mass {m:.4g} exceeds {MASS_LIMIT} {when}; the coupling bound no longer applies")


def flow(cfg: ToyConfig, x, t: float, t_eval=None, rtol: float = FLOW_RTOL, atol: float = FLOW_ATOL,
         return_scaled: bool = False):
    """Time-``t`` map of the chart dynamics; ``x`` may be a batch ``(m, n)``.

    With ``t_eval`` the states at those times are returned, stacked along a
    new leading axis.  ``return_scaled`` gives the scaled variables instead.
    """
    if t < 0:
        raise ToyModelError("flow time must be non-negative")
    x = np.asarray(x, dtype=float)
    _check_mass(x, "at the start of the flow")
    tau = float(t)
    z0 = to_scaled(x, 0.0, tau)
    traj = dopri5(lambda s, z: scaled_rhs(cfg, s, z, tau), 0.0, z0, tau, rtol=rtol, atol=atol,
                  t_eval=t_eval)
    if t_eval is None:
        z = traj.states[-1]
        out = z if return_scaled else from_scaled(z, tau, tau)
        _check_mass(from_scaled(z, tau, tau), "at the end of the flow")
        return out
    zs = traj.states
    if return_scaled:
        return zs
    raws = np.stack([from_scaled(z, s, tau) for s, z in zip(traj.times, zs)])
    _check_mass(raws[-1], "at the end of the flow")
    return raws


# jump

def jump_matrix(cfg: ToyConfig, j: int) -> np.ndarray:
    """Linear map from chart ``j`` to chart ``j + 1``."""
    if not 0 <= j < cfg.N:
        raise ToyModelError(f"no jump from chart {j}: charts run 0..{cfg.N}")
    src, dst = layout(cfg, j), layout(cfg, j + 1)
    J = np.zeros((dst.n, src.n))
    for k in src.modes:
        if k == j + 2:
            continue
        a, b = src.mode_index(k), dst.mode_index(k)
        J[b, a] = J[b + 1, a + 1] = 1.0
    # new past mode j-1 built from the old (y-, x-) pair
    m = dst.mode_index(j - 1)
    first, second = (1, 0) if cfg.g1_order == "xm_first" else (0, 1)
    J[m, first] = J[m, second] = -0.5
    J[m + 1, first] = SQRT3 / 2
    J[m + 1, second] = -SQRT3 / 2
    # hyperbolic variables of the next chart
    J[1, 2] = 1.0  # x-~ = y+
    J[0, 3] = 1.0  # y-~ = x+
    c = src.mode_index(j + 2)
    J[3, c], J[3, c + 1] = -1.0, 1 / SQRT3  # x+~
    J[2, c], J[2, c + 1] = -1.0, -1 / SQRT3  # y+~
    return J


def jump(cfg: ToyConfig, x, j: int) -> np.ndarray:
    return np.asarray(x, dtype=float) @ jump_matrix(cfg, j).T


def jump_inverse(cfg: ToyConfig, x, j: int) -> np.ndarray:
    """Inverse of :func:`jump`: from chart ``j + 1`` back to chart ``j``."""
    return np.asarray(x, dtype=float) @ np.linalg.inv(jump_matrix(cfg, j)).T


def distance_to_torus(x) -> np.ndarray:
    """Max-norm distance to ``T_j`` (the chart origin)."""
    return np.max(np.abs(np.asarray(x)), axis=-1)
