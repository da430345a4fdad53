"""Chain files and certificate reports.

A chain file declares h-sets and maps, then lists the chain::

    hset N0
      center 0
      block x 1 1 exit
    end
    affine f
      row 2
      offset 0
    end
    builtin g toy_jump N=3 j=0
    chain
      N0
      f
      N0
    end
    param ybar 0.5
    param eta 2 0.1 0.2
    periodic

Inside ``chain`` each line names an h-set or a map, or is ``drop LABEL ...``.
``#`` starts a comment.  Every error names the offending line.
"""
from __future__ import annotations

import numpy as np

from ..geometry import HSet, HSetError, parse_hset_body
from .chain import ChainSolution, ChainSpec, Drop
from .maps import MapHandle
from .relations import CoveringCertificate


class ChainFileError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


def fmt(x) -> str:
    """Round-trip float formatting used by every report."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    if x is None:
        return ""
    return str(x)


# builtin maps

def _kv(lineno, items):
    out = {}
    for item in items:
        if "=" not in item:
            raise ChainFileError(lineno, f"expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k] = v
    return out


def _floats(text):
    return [float(v) for v in text.split(",")]


def _builtin(lineno, kind, params) -> MapHandle:
    try:
        if kind in ("linmodel_local", "linmodel_transition"):
            from ..linmodel import LinearModelConfig, local_map, transition_map
            cfg = LinearModelConfig(
                n=int(params.pop("n")), mu=_floats(params.pop("mu")), lam=_floats(params.pop("lam")),
                mu_p=_floats(params.pop("mu_p")), lam_f=_floats(params.pop("lam_f")),
                eps=float(params.pop("eps")), sigma=float(params.pop("sigma")),
                eta=float(params.pop("eta")))
            i = int(params.pop("i"))
            if kind == "linmodel_local":
                f = local_map(cfg, i).power(int(params.pop("k", "1")))
            else:
                f = transition_map(cfg, i)
        elif kind == "toy_jump":
            from ..toymodel.dynamics import ToyConfig, jump_matrix
            cfg = ToyConfig(N=int(params.pop("N")), g1_order=params.pop("g1_order", "xm_first"))
            f = MapHandle.affine(jump_matrix(cfg, int(params.pop("j"))))
        else:
            raise ChainFileError(lineno, f"unknown builtin map {kind!r}")
    except KeyError as exc:
        raise ChainFileError(lineno, f"builtin {kind} needs parameter {exc.args[0]}") from None
    except ChainFileError:
        raise
    except ValueError as exc:
        raise ChainFileError(lineno, str(exc)) from None
    if params:
        raise ChainFileError(lineno, f"unused parameters: {', '.join(sorted(params))}")
    return f


def _affine(lineno, name, body) -> MapHandle:
    rows, offset = [], None
    for ln, text in body:
        parts = text.split()
        try:
            if parts[0] == "row":
                rows.append([float(p) for p in parts[1:]])
            elif parts[0] == "offset":
                offset = [float(p) for p in parts[1:]]
            else:
                raise ChainFileError(ln, f"unknown affine field {parts[0]!r}")
        except ValueError as exc:
            if isinstance(exc, ChainFileError):
                raise
            raise ChainFileError(ln, str(exc)) from None
    if not rows:
        raise ChainFileError(lineno, f"affine map {name} has no rows")
    if any(len(r) != len(rows) for r in rows):
        raise ChainFileError(lineno, f"affine map {name} is not square")
    if offset is not None and len(offset) != len(rows):
        raise ChainFileError(lineno, f"affine map {name}: offset has the wrong length")
    return MapHandle.affine(rows, offset, name=name)


# parser

def parse_chain(text: str) -> ChainSpec:
    lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append((lineno, line))
    hsets, maps = {}, {}
    chain_lines = None
    params = {}
    periodic = False
    pos = 0

    def take_block(start):
        body = []
        k = start
        while k < len(lines):
            if lines[k][1] == "end":
                return body, k + 1
            body.append(lines[k])
            k += 1
        raise ChainFileError(lines[start - 1][0], "record is missing 'end'")

    while pos < len(lines):
        lineno, line = lines[pos]
        parts = line.split()
        head = parts[0]
        if head in ("hset", "affine"):
            if len(parts) != 2:
                raise ChainFileError(lineno, f"{head} needs exactly one name")
            name = parts[1]
            if name in hsets or name in maps:
                raise ChainFileError(lineno, f"name {name!r} defined twice")
            body, pos = take_block(pos + 1)
            if head == "hset":
                try:
                    hsets[name] = parse_hset_body(body)
                except HSetError as exc:
                    raise ChainFileError(lineno, f"h-set {name}: {exc}") from None
            else:
                maps[name] = _affine(lineno, name, body)
        elif head == "builtin":
            if len(parts) < 3:
                raise ChainFileError(lineno, "builtin needs a name and a kind")
            name = parts[1]
            if name in hsets or name in maps:
                raise ChainFileError(lineno, f"name {name!r} defined twice")
            maps[name] = _builtin(lineno, parts[2], _kv(lineno, parts[3:]))
            pos += 1
        elif head == "chain":
            if chain_lines is not None:
                raise ChainFileError(lineno, "only one chain block is allowed")
            chain_lines, pos = take_block(pos + 1)
        elif head == "param":
            if len(parts) < 3 or parts[1] not in ("ybar", "xbar", "eta", "tol"):
                raise ChainFileError(lineno, "param needs one of ybar, xbar, eta, tol and values")
            try:
                vals = [float(v) for v in parts[2:]]
            except ValueError as exc:
                raise ChainFileError(lineno, str(exc)) from None
            if parts[1] == "eta":
                params.setdefault("eta", {})[int(vals[0])] = vals[1:]
            elif parts[1] == "tol":
                params["tol"] = vals[0]
            else:
                params[parts[1]] = vals
            pos += 1
        elif head == "periodic":
            periodic = True
            pos += 1
        else:
            raise ChainFileError(lineno, f"unknown record {head!r}")

    if chain_lines is None:
        raise ChainFileError(lines[-1][0] if lines else 1, "no chain block")
    elements = []
    expect = "hset"
    for lineno, line in chain_lines:
        parts = line.split()
        if parts[0] == "drop":
            if expect != "map_or_drop":
                raise ChainFileError(lineno, "a drop must follow an h-set")
            if len(parts) < 2:
                raise ChainFileError(lineno, "drop needs at least one block label")
            try:
                elements[-1].block(parts[1])
                for lab in parts[1:]:
                    elements[-1].block(lab)
            except HSetError as exc:
                raise ChainFileError(lineno, str(exc)) from None
            elements.append(Drop(*parts[1:]))
            expect = "map"
            continue
        if len(parts) != 1:
            raise ChainFileError(lineno, "expected a single name")
        name = parts[0]
        if name in hsets:
            if expect != "hset":
                raise ChainFileError(lineno, f"expected a map, got h-set {name!r}")
            elements.append(hsets[name])
            expect = "map_or_drop"
        elif name in maps:
            if expect == "hset":
                raise ChainFileError(lineno, f"expected an h-set, got map {name!r}")
            elements.append(maps[name])
            expect = "hset"
        else:
            raise ChainFileError(lineno, f"undefined name {name!r}")
    if expect != "map_or_drop":
        raise ChainFileError(chain_lines[-1][0] if chain_lines else 1, "the chain must end with an h-set")
    try:
        return ChainSpec(elements, ybar=params.get("ybar"), xbar=params.get("xbar"),
                         eta=params.get("eta", {}), periodic=periodic,
                         **({"tol": params["tol"]} if "tol" in params else {}))
    except ValueError as exc:
        raise ChainFileError(chain_lines[0][0], str(exc)) from None


def parse_chain_file(path) -> ChainSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_chain(fh.read())


# reports

def certificate_block(name: str, cert: CoveringCertificate) -> str:
    lines = [f"[certificate {name}]",
             f"mode = {cert.mode}",
             f"passed = {fmt(cert.passed)}",
             f"rigorous = {fmt(cert.rigorous)}",
             f"exit_margin = {fmt(cert.exit_margin)}",
             f"entry_margin = {fmt(cert.entry_margin)}",
             f"degree = {fmt(cert.degree)}",
             f"sample_count = {fmt(cert.sample_count)}"]
    for lab in sorted(cert.entry_block_margins):
        lines.append(f"entry_block_margin.{lab} = {fmt(cert.entry_block_margins[lab])}")
    if cert.counterexample is not None:
        lines.append("counterexample = " + " ".join(fmt(v) for v in cert.counterexample))
    for k, note in enumerate(cert.notes):
        lines.append(f"note.{k} = {note}")
    return "\n".join(lines) + "\n"


def key_value_block(title: str, items) -> str:
    """``[title]`` followed by ``key = value`` lines in the given order."""
    lines = [f"[{title}]"]
    for k, v in items:
        if isinstance(v, (list, tuple, np.ndarray)):
            v = " ".join(fmt(x) for x in v)
        else:
            v = fmt(v)
        lines.append(f"{k} = {v}")
    return "\n".join(lines) + "\n"


def solution_block(sol: ChainSolution) -> str:
    items = [("residual", sol.residual), ("iterations", sol.iterations), ("q0", sol.q0)]
    for i, p in enumerate(sol.points):
        items.append((f"point.{i}", p))
    return key_value_block("solution", items)
