"""h-sets: products of max-norm balls in affine coordinates.

An h-set is described by a center, an optional invertible basis and an
ordered list of blocks.  Each block covers ``dim`` consecutive basis
coordinates, has one radius and is tagged ``exit`` (unstable) or ``entry``
(stable).  Unit coordinates list the exit blocks first, then the entry blocks,
each in their declared order, and scale every block to the unit ball.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EXIT = "exit"
ENTRY = "entry"
TAU_CLS = 1e-9
_COND_MAX = 1e12


class HSetError(ValueError):
    pass


@dataclass(frozen=True)
class BlockSpec:
    label: str
    dim: int
    radius: float
    tag: str

    def __post_init__(self):
        if not self.label or any(ch.isspace() for ch in self.label):
            raise HSetError(f"bad block label {self.label!r}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise HSetError(f"block {self.label!r}: dimension must be a positive integer")
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise HSetError(f"block {self.label!r}: radius must be positive and finite")
        if self.tag not in (EXIT, ENTRY):
            raise HSetError(f"block {self.label!r}: tag must be 'exit' or 'entry'")


@dataclass(frozen=True)
class PointClassification:
    inside: bool
    on_exit_boundary: bool
    on_entry_boundary: bool
    block_margins: dict

    @property
    def min_margin(self) -> float:
        return min(self.block_margins.values()) if self.block_margins else np.inf


class HSet:
    """Immutable h-set.  Use :meth:`to_unit` / :meth:`from_unit` for the chart."""

    def __init__(self, center, blocks, basis=None):
        center = np.array(center, dtype=float).reshape(-1)
        blocks = tuple(blocks)
        n = center.size
        if sum(b.dim for b in blocks) != n:
            raise HSetError("block dimensions do not add up to the ambient dimension")
        labels = [b.label for b in blocks]
        if len(set(labels)) != len(labels):
            raise HSetError("block labels must be unique")
        if not np.all(np.isfinite(center)):
            raise HSetError("center must be finite")
        if basis is not None:
            basis = np.array(basis, dtype=float)
            if basis.shape != (n, n):
                raise HSetError("basis must be square with the ambient dimension")
            if np.allclose(basis, np.eye(n), rtol=0, atol=0):
                basis = None
            elif not np.all(np.isfinite(basis)) or np.linalg.cond(basis) > _COND_MAX:
                raise HSetError("basis is singular or numerically degenerate")
        center.flags.writeable = False
        self._center = center
        self._basis = basis
        self._blocks = blocks
        if basis is not None:
            self._basis.flags.writeable = False
            self._basis_inv = np.linalg.inv(basis)
        else:
            self._basis_inv = None

        offsets = {}
        pos = 0
        for b in blocks:
            offsets[b.label] = np.arange(pos, pos + b.dim)
            pos += b.dim
        order = [b for b in blocks if b.tag == EXIT] + [b for b in blocks if b.tag == ENTRY]
        perm, scale, slices = [], [], {}
        for b in order:
            slices[b.label] = np.arange(len(perm), len(perm) + b.dim)
            perm.extend(offsets[b.label])
            scale.extend([b.radius] * b.dim)
        self._perm = np.array(perm, dtype=int)
        self._scale = np.array(scale, dtype=float)
        self._slices = slices
        self._u = sum(b.dim for b in blocks if b.tag == EXIT)

    # basic attributes
    @property
    def center(self) -> np.ndarray:
        return self._center

    @property
    def basis(self) -> np.ndarray | None:
        return self._basis

    @property
    def blocks(self) -> tuple:
        return self._blocks

    @property
    def n(self) -> int:
        return self._center.size

    @property
    def u(self) -> int:
        return self._u

    @property
    def s(self) -> int:
        return self.n - self._u

    def block(self, label: str) -> BlockSpec:
        for b in self._blocks:
            if b.label == label:
                return b
        raise HSetError(f"unknown block label {label!r}")

    @property
    def exit_labels(self) -> list:
        return [b.label for b in self._blocks if b.tag == EXIT]

    @property
    def entry_labels(self) -> list:
        return [b.label for b in self._blocks if b.tag == ENTRY]

    def unit_indices(self, label: str) -> np.ndarray:
        """Positions of a block inside the unit-coordinate vector."""
        self.block(label)
        return self._slices[label]

    def indices_of(self, labels) -> np.ndarray:
        if not labels:
            return np.zeros(0, dtype=int)
        return np.concatenate([self.unit_indices(lab) for lab in labels])

    # chart
    def unit_matrix(self) -> np.ndarray:
        """Matrix ``U`` with ``to_unit(x) = U @ (x - center)``."""
        m = np.eye(self.n) if self._basis_inv is None else self._basis_inv
        return m[self._perm] / self._scale[:, None]

    def unit_matrix_inverse(self) -> np.ndarray:
        """Matrix ``W`` with ``from_unit(v) = center + W @ v``."""
        w = np.zeros((self.n, self.n))
        w[self._perm, np.arange(self.n)] = self._scale
        return w if self._basis is None else self._basis @ w

    def to_unit(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        d = x - self._center
        if self._basis_inv is not None:
            d = d @ self._basis_inv.T
        return d[..., self._perm] / self._scale

    def from_unit(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        d = np.empty(v.shape, dtype=float)
        d[..., self._perm] = v * self._scale
        if self._basis is not None:
            d = d @ self._basis.T
        return self._center + d

    def block_norms(self, v) -> dict:
        v = np.asarray(v, dtype=float)
        return {lab: np.max(np.abs(v[..., idx]), axis=-1) for lab, idx in self._slices.items()}

    def classify(self, x, tol: float = TAU_CLS) -> PointClassification:
        v = self.to_unit(x)
        norms = self.block_norms(v)
        margins = {b.label: float(1.0 - norms[b.label]) for b in self._blocks}
        inside = all(m >= -tol for m in margins.values())
        exit_b = inside and any(abs(margins[lab]) <= tol for lab in self.exit_labels)
        entry_b = inside and any(abs(margins[lab]) <= tol for lab in self.entry_labels)
        return PointClassification(inside, exit_b, entry_b, margins)

    def contains(self, x, tol: float = TAU_CLS) -> bool:
        return self.classify(x, tol).inside

    # derived sets
    def transpose(self) -> "HSet":
        flip = {EXIT: ENTRY, ENTRY: EXIT}
        blocks = [BlockSpec(b.label, b.dim, b.radius, flip[b.tag]) for b in self._blocks]
        return HSet(self._center, blocks, self._basis)

    def drop_exit(self, *labels: str) -> "HSet":
        """Retag exit blocks as entry blocks; support and scaling are unchanged."""
        if not labels:
            raise HSetError("no block named for dropping")
        for lab in labels:
            if self.block(lab).tag != EXIT:
                raise HSetError(f"block {lab!r} is an entry block and cannot be dropped")
        blocks = [BlockSpec(b.label, b.dim, b.radius, ENTRY if b.label in labels else b.tag)
                  for b in self._blocks]
        return HSet(self._center, blocks, self._basis)

    def with_center(self, center) -> "HSet":
        return HSet(center, self._blocks, self._basis)

    def vertices_unit(self) -> np.ndarray:
        grids = np.meshgrid(*([[-1.0, 1.0]] * self.n), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    def __eq__(self, other):
        if not isinstance(other, HSet):
            return NotImplemented
        if self._blocks != other._blocks or not np.array_equal(self._center, other._center):
            return False
        if (self._basis is None) != (other._basis is None):
            return False
        return self._basis is None or np.array_equal(self._basis, other._basis)

    def __hash__(self):
        return hash((self._blocks, self._center.tobytes()))

    def __repr__(self):
        blocks = ", ".join(f"{b.label}:{b.dim}:{b.radius:g}:{b.tag}" for b in self._blocks)
        return f"HSet(n={self.n}, u={self.u}, s={self.s}, blocks=[{blocks}])"


def to_unit(h: HSet, x) -> np.ndarray:
    return h.to_unit(x)


def from_unit(h: HSet, v) -> np.ndarray:
    return h.from_unit(v)


def classify(h: HSet, x, tol: float = TAU_CLS) -> PointClassification:
    return h.classify(x, tol)


def transpose(h: HSet) -> HSet:
    return h.transpose()


def drop_exit(h: HSet, *labels: str) -> HSet:
    return h.drop_exit(*labels)


def natural_hset(center, exit_radii, entry_radii, per_coordinate: bool = False) -> HSet:
    """Box with the first ``len(exit_radii)`` coordinates unstable.

    Uniform radii give one block ``x`` and one block ``y``; otherwise (or when
    ``per_coordinate`` is set) each coordinate becomes its own block
    ``x1, x2, ...`` / ``y1, y2, ...``.
    """
    exit_radii = np.atleast_1d(np.asarray(exit_radii, dtype=float))
    entry_radii = np.atleast_1d(np.asarray(entry_radii, dtype=float))
    blocks = []
    for name, radii, tag in (("x", exit_radii, EXIT), ("y", entry_radii, ENTRY)):
        if radii.size == 0:
            continue
        if per_coordinate or np.ptp(radii) != 0:
            blocks += [BlockSpec(f"{name}{i + 1}", 1, float(r), tag) for i, r in enumerate(radii)]
        else:
            blocks.append(BlockSpec(name, radii.size, float(radii[0]), tag))
    return HSet(center, blocks)


# text records

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def hset_to_text(h: HSet, name: str = "N") -> str:
    lines = [f"hset {name}", "  center " + " ".join(_fmt(c) for c in h.center)]
    if h.basis is not None:
        for row in h.basis:
            lines.append("  basis " + " ".join(_fmt(c) for c in row))
    for b in h.blocks:
        lines.append(f"  block {b.label} {b.dim} {_fmt(b.radius)} {b.tag}")
    lines.append("end")
    return "\n".join(lines) + "\n"


def parse_hset_body(lines) -> HSet:
    """Build an h-set from the ``center``/``basis``/``block`` lines of a record.

    ``lines`` holds ``(line_number, text)`` pairs; errors name the line.
    """
    center, rows, blocks = None, [], []
    for lineno, text in lines:
        parts = text.split()
        key = parts[0]
        try:
            if key == "center":
                center = [float(p) for p in parts[1:]]
            elif key == "basis":
                rows.append([float(p) for p in parts[1:]])
            elif key == "block":
                if len(parts) != 5:
                    raise HSetError("block needs: label dim radius tag")
                blocks.append(BlockSpec(parts[1], int(parts[2]), float(parts[3]), parts[4]))
            else:
                raise HSetError(f"unknown h-set field {key!r}")
        except ValueError as exc:
            raise HSetError(f"line {lineno}: {exc}") from None
    if center is None:
        raise HSetError(f"line {lines[0][0] if lines else 0}: h-set record without center")
    try:
        return HSet(center, blocks, rows if rows else None)
    except HSetError as exc:
        raise HSetError(f"line {lines[0][0] if lines else 0}: {exc}") from None


def hset_from_text(text: str) -> HSet:
    body = []
    started = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("hset"):
            started = True
            continue
        if line == "end":
            break
        if not started:
            raise HSetError(f"line {lineno}: expected 'hset' header")
        body.append((lineno, line))
    return parse_hset_body(body)
