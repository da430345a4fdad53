"""Command-line front end.

Exit status: 0 when every certificate passes, 1 when a certificate or
shadowing check fails, 2 for configuration errors, 3 for I/O errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .config import ConfigError, load_config, section
from .covering import (ChainError, ChainFileError, ChainSolveError, certificate_block, check_covering,
                       endpoint_nonsingularity, parse_chain_file, solve_chain)
from .covering.textio import fmt, key_value_block, solution_block
from .geometry import HSetError

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


class Run:
    """Collects artifacts written to the output directory."""

    def __init__(self, command: str, args):
        self.command = command
        self.args = args
        self.out = args.out
        self.files = []
        self.tolerances = {}
        self.snapshot = {}
        self.start = time.perf_counter()

    def path(self, name):
        os.makedirs(self.out, exist_ok=True)
        self.files.append(name)
        return os.path.join(self.out, name)

    def write_text(self, name, text):
        with open(self.path(name), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)

    def write_csv(self, name, header, rows):
        with open(self.path(name), "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([fmt(v) for v in row])

    def write_manifest(self, status):
        manifest = {
            "command": self.command,
            "config": self.snapshot,
            "files": sorted(self.files + ["manifest.json"]),
            "seed": self.args.seed,
            "status": status,
            "threads": self.args.threads,
            "grid": self.args.grid,
            "tolerances": self.tolerances,
            "version": __version__,
            "wall_time": time.perf_counter() - self.start,
        }
        with open(self.path("manifest.json"), "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _config_error(sec, exc):
    return ConfigError(f"[{sec.name}] (section at line {sec.lineno}): {exc}")


# linmodel

def cmd_linmodel(args, run: Run) -> int:
    from .linmodel import (LinearModelConfig, build_model, iterate_bounds, shadow_orbit,
                           verify_model)
    sec = section(load_config(args.config), "linmodel")
    try:
        cfg = LinearModelConfig(
            n=sec.get_int("n"), mu=sec.get_floats("mu"), lam=sec.get_floats("lam"),
            mu_p=sec.get_floats("mu_p"), lam_f=sec.get_floats("lam_f"), eps=sec.get_float("eps"),
            sigma=sec.get_float("sigma"), eta=sec.get_float("eta"))
        ks = sec.get_ints("ks")
        sec.check_unused()
        model = build_model(cfg, ks)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise _config_error(sec, exc) from None
    run.snapshot = {"linmodel": sec.snapshot()}
    from .covering.chain import TOL_SOLVE
    from .covering.relations import DEFLATE
    run.tolerances = {"chain_solve": TOL_SOLVE, "deflate": DEFLATE}

    certs = verify_model(cfg, model.ks)
    parts = [key_value_block("linmodel", [("n", cfg.n), ("ks", list(model.ks))])]
    for i in range(cfg.n + 1):
        parts.append(key_value_block(f"iterate_bounds {i}", sorted(iterate_bounds(cfg, i).items())))
    parts += [certificate_block(name, c) for name, c in certs]
    ok = all(c.passed for _, c in certs)
    rows = []
    try:
        orbit = shadow_orbit(cfg, model.ks)
        parts.append(key_value_block("shadow", [("residual", orbit.residual), ("q0", orbit.q0)]))
        for v in orbit.visits:
            rows.append((v.index, model.ks[v.index] if v.index < cfg.n else None, v.distance))
        ok = ok and all(v.distance < cfg.eps for v in orbit.visits)
    except ChainSolveError as exc:
        parts.append(key_value_block("shadow", [("error", str(exc))]))
        ok = False
    parts.append(key_value_block("status", [("passed", ok)]))
    run.write_text("report.txt", "\n".join(parts))
    run.write_csv("visits.csv", ["i", "k", "distance"], rows)
    return EXIT_PASS if ok else EXIT_FAIL


# triangular

AGREEMENT_TOL = 1e-6
CHECK_TIME = 10.0


def cmd_triangular(args, run: Run) -> int:
    from .triangular import REGIMES, TriangularConfig, closed_form, integrate, transition_times
    sec = section(load_config(args.config), "triangular")
    try:
        base = {}
        name = sec.get_str("regime")
        if name is not None:
            if name not in REGIMES:
                raise ValueError(f"unknown regime {name!r}")
            base.update(REGIMES[name])
        for key in ("lam", "mu", "x0"):
            val = sec.get_floats(key)
            if val is not None:
                base[key] = val
        for key in ("t_end", "rtol", "atol"):
            val = sec.get_float(key)
            if val is not None:
                base[key] = val
        threshold = sec.get_float("threshold", 0.9)
        sec.check_unused()
        missing = [k for k in ("lam", "mu", "x0") if k not in base]
        if missing:
            raise ValueError(f"missing keys: {', '.join(missing)}")
        cfg = TriangularConfig(**base)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise _config_error(sec, exc) from None
    run.snapshot = {"triangular": sec.snapshot()}
    run.tolerances = {"rtol": cfg.rtol, "atol": cfg.atol, "agreement": AGREEMENT_TOL}

    traj = integrate(cfg)
    run.write_csv("trajectory.csv", ["t"] + [f"x{i + 1}" for i in range(cfg.n)],
                  [(t, *x) for t, x in zip(traj.times, traj.states)])
    crossings = transition_times(traj, threshold)
    run.write_csv("transitions.csv", ["i", "time"], [(i + 1, c) for i, c in enumerate(crossings)])

    t_check = min(CHECK_TIME, cfg.t_end)
    at = integrate(cfg, t_eval=[t_check]).states[-1]
    gap = float(np.max(np.abs(closed_form(cfg, t_check) - at)))
    final = traj.states[-1]
    ok = gap < AGREEMENT_TOL
    report = key_value_block("triangular", [
        ("n", cfg.n), ("t_end", cfg.t_end), ("steps", traj.n_steps), ("final", final),
        ("max_distance_to_one", float(np.max(np.abs(final - 1.0)))), ("threshold", threshold),
        ("crossings", ["none" if c is None else c for c in crossings]),
        ("check_time", t_check), ("closed_form_gap", gap), ("passed", ok)])
    run.write_text("report.txt", report)
    return EXIT_PASS if ok else EXIT_FAIL


# toymodel

def toy_config(sec):
    from .toymodel import ToyConfig
    kw = {}
    for key, getter in (("N", sec.get_int), ("k", sec.get_int), ("sigma", sec.get_float),
                        ("K", sec.get_float), ("kappa", sec.get_float), ("kappa_c", sec.get_complex),
                        ("G", sec.get_float), ("L", sec.get_float), ("T", sec.get_float),
                        ("nu", sec.get_float), ("g1_order", sec.get_str),
                        ("center_box_factor", sec.get_float)):
        val = getter(key)
        if val is not None:
            kw[key] = val
    return ToyConfig(**kw)


def cmd_toymodel(args, run: Run) -> int:
    from .toymodel import (INEQUALITY_NAMES, SIZE_FIELDS, ToyModelError, covering_params, diffuse,
                           transit_time, verify_flow_covering, verify_jump_covering)
    from .toymodel.dynamics import FLOW_ATOL, FLOW_RTOL
    from .toymodel.coverings import CHAIN_TOL
    sec = section(load_config(args.config), "toymodel")
    try:
        cfg = toy_config(sec)
        n_random = sec.get_int("n_random", 64)
        samples = sec.get_int("samples", 201)
        sec.check_unused()
        T = transit_time(cfg)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise _config_error(sec, exc) from None
    run.snapshot = {"toymodel": sec.snapshot()}
    run.tolerances = {"flow_rtol": FLOW_RTOL, "flow_atol": FLOW_ATOL, "chain_solve": CHAIN_TOL}

    try:
        params = covering_params(cfg, T)
    except ToyModelError as exc:
        run.write_text("report.txt", key_value_block("toymodel", [("T", T), ("error", str(exc))]))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    run.write_csv("params.csv", ["j"] + list(SIZE_FIELDS),
                  [(j, *(getattr(params, f)[j] for f in SIZE_FIELDS)) for j in range(cfg.N + 1)])

    jobs = []
    for j in range(cfg.N + 1):
        jobs.append((f"flow_{j}", lambda j=j: verify_flow_covering(cfg, params, j, args.grid,
                                                                    n_random, args.seed)))
        if j < cfg.N:
            jobs.append((f"jump_{j}", lambda j=j: verify_jump_covering(cfg, params, j)))
    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
        results = list(pool.map(lambda job: job[1](), jobs))
    certs = [(name, c) for (name, _), c in zip(jobs, results)]

    slacks = params.slacks()
    parts = [key_value_block("toymodel", [
        ("T", params.T), ("K_bound", params.K_bound), ("Q1", params.Q1), ("Q2", params.Q2),
        ("Q3", params.Q3), ("A", params.A), ("A_tilde", params.A_tilde),
        ("Q3_tilde", params.Q3_tilde), ("beta", params.beta), ("seed", args.seed),
        ("grid", args.grid), ("n_random", n_random)]),
        key_value_block("inequalities", [(name, slacks[name]) for name in INEQUALITY_NAMES]),
        key_value_block("sizes", [("max_size", params.max_size()), ("size_bound", params.size_bound())])]
    parts += [certificate_block(name, c) for name, c in certs]
    ok = all(c.passed for _, c in certs)
    rows = []
    if ok:
        try:
            rep = diffuse(cfg, params, samples=samples)
            rows = [(r.chart, r.time, r.distance, r.event) for r in rep.itinerary]
            parts.append(key_value_block("diffusion", [
                ("residual", rep.residual), ("iterations", rep.iterations),
                ("min_distances", list(rep.min_distances)), ("closest_times", list(rep.closest_times)),
                ("c_dist", rep.c_dist), ("bound", rep.bound), ("passed", rep.passed)]))
            ok = rep.passed
        except (ChainSolveError, ToyModelError) as exc:
            parts.append(key_value_block("diffusion", [("error", str(exc))]))
            ok = False
    else:
        parts.append(key_value_block("diffusion", [("skipped", "a certificate failed")]))
    parts.append(key_value_block("status", [("passed", ok)]))
    run.write_text("report.txt", "\n".join(parts))
    run.write_csv("itinerary.csv", ["chart", "time", "distance", "event"], rows)
    return EXIT_PASS if ok else EXIT_FAIL


# verify

def cmd_verify(args, run: Run) -> int:
    path = args.chain or args.config
    if path is None:
        raise ConfigError("verify needs a chain file")
    spec = parse_chain_file(path)
    run.snapshot = {"chain_file": os.path.basename(path)}
    run.tolerances = {"chain_solve": spec.tol}
    parts = []
    certs = []
    for i, f in enumerate(spec.maps):
        src, dst = spec.structures[i], spec.sets[i + 1]
        cert = check_covering(src, f, dst, **({} if f.is_affine else {"grid": args.grid, "seed": args.seed}))
        certs.append(cert)
        parts.append(certificate_block(f"link_{i + 1}", cert))
    ok = all(c.passed for c in certs)
    rows = []
    try:
        sol = solve_chain(spec)
        parts.append(solution_block(sol))
        rows = [(i, *p) for i, p in enumerate(sol.points)]
    except ChainSolveError as exc:
        parts.append(key_value_block("solution", [("error", str(exc))]))
        ok = False
    if not spec.periodic:
        nonsingular, det = endpoint_nonsingularity(spec)
        parts.append(key_value_block("endpoint_system", [("nonsingular", nonsingular), ("abs_det", det)]))
        ok = ok and nonsingular
    parts.append(key_value_block("status", [("passed", ok)]))
    run.write_text("report.txt", "\n".join(parts))
    n = spec.sets[0].n
    run.write_csv("solution.csv", ["set"] + [f"q{k + 1}" for k in range(n)], rows)
    return EXIT_PASS if ok else EXIT_FAIL


COMMANDS = {"linmodel": cmd_linmodel, "triangular": cmd_triangular, "toymodel": cmd_toymodel,
            "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dropdim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        if name == "verify":
            p.add_argument("chain", nargs="?", help="chain file")
        p.add_argument("--config", help="configuration file (chain file for verify)")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=0, help="sampling seed")
        p.add_argument("--threads", type=int, default=1, help="worker threads for sampling")
        p.add_argument("--grid", type=int, default=3, help="samples per unit face direction")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed < 0 or args.seed >= 2 ** 64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    if args.command != "verify" and args.config is None:
        print("error: --config is required", file=sys.stderr)
        return EXIT_CONFIG
    run = Run(args.command, args)
    try:
        status = COMMANDS[args.command](args, run)
    except (ConfigError, ChainFileError, ChainError, HSetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        run.write_manifest(status)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"{args.command}: {'pass' if status == EXIT_PASS else 'FAIL'} -> {args.out}")
    return status


if __name__ == "__main__":
    sys.exit(main())
