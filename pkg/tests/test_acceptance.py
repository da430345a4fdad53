"""One test per acceptance criterion; each prints a single PASS/FAIL line."""
import math
import time

import numpy as np

from dropdim.covering import (ChainSpec, Drop, MapHandle, check_backcovering, check_covering_affine,
                              check_covering_sampled, endpoint_nonsingularity, endpoint_system,
                              solve_chain)
from dropdim.geometry import BlockSpec, ENTRY, EXIT, HSet, hset_from_text, hset_to_text, natural_hset
from dropdim.linmodel import (LinearModelConfig, iterate_bounds, min_iterates, shadow_orbit,
                              verify_model)
from dropdim.toymodel import (INEQUALITY_NAMES, ToyConfig, admissible_T, center_bounds,
                              certificates, covering_params, diffuse, flow, hyperbolic_enclosure,
                              layout)
from dropdim.triangular import closed_form, integrate, regime, transition_times

LIN_DESK = dict(n=4, mu=0.5, lam=2.0, mu_p=0.4, lam_f=1.5, eps=0.1, sigma=0.05, eta=0.5)


def test_linear_model_end_to_end(acceptance):
    start = time.perf_counter()
    cfg = LinearModelConfig(**LIN_DESK)
    ks = [min_iterates(cfg, i) for i in range(cfg.n)]
    certs = verify_model(cfg)
    orbit = shadow_orbit(cfg)
    elapsed = time.perf_counter() - start
    margin = min(min(c.exit_margin, c.entry_margin) for _, c in certs)
    dist = max(v.distance for v in orbit.visits)
    ok = (ks == [2] * 4 and len(certs) == 2 * cfg.n and all(c.passed for _, c in certs)
          and margin > 1e-3 and orbit.residual < 1e-10 and len(orbit.visits) == cfg.n + 1
          and dist < 0.1 and elapsed < 1.0)
    acceptance(1, "linear model end to end", ok,
               f"k={ks}, min margin {margin:.4g}, residual {orbit.residual:.2g}, "
               f"max distance {dist:.4g}, {elapsed:.2f}s")
    assert ok


def test_iterate_count_is_sharp(acceptance):
    start = time.perf_counter()
    cfg = LinearModelConfig(**LIN_DESK)
    reduced = [int(math.floor(max(iterate_bounds(cfg, i).values()))) for i in range(cfg.n)]
    certs = dict(verify_model(cfg, reduced))
    failing = [name for name, c in certs.items() if name.startswith("local") and not c.passed]
    elapsed = time.perf_counter() - start
    ok = bool(failing) and elapsed < 1.0
    acceptance(2, "iterate count sharpness", ok,
               f"k={reduced}, failing {failing}, {elapsed:.2f}s")
    assert ok


def test_triangular_regimes(acceptance):
    start = time.perf_counter()
    details, ok = [], True
    for name in ("mu_dominant", "balanced", "lam_dominant"):
        traj = integrate(regime(name, t_end=60.0))
        err = float(np.max(np.abs(traj.final - 1.0)))
        times = transition_times(traj, 0.9)
        ordered = None not in times and all(a < b for a, b in zip(times, times[1:]))
        cfg10 = regime(name, t_end=10.0)
        gap = float(np.max(np.abs(integrate(cfg10).final - closed_form(cfg10, 10.0))))
        ok = ok and err < 1e-3 and ordered and gap < 1e-6
        details.append(f"{name}: err {err:.2g}, ordered {ordered}, gap {gap:.2g}")
    elapsed = time.perf_counter() - start
    ok = ok and elapsed < 5.0
    acceptance(3, "triangular reference regimes", ok, "; ".join(details) + f", {elapsed:.2f}s")
    assert ok


def test_toy_enclosures(acceptance):
    start = time.perf_counter()
    cfg = ToyConfig()
    T = admissible_T(cfg)
    rng = np.random.default_rng(2024)
    lay = layout(cfg, 1)
    sp = cfg.sigma_p
    m = T ** cfg.k
    ts = np.linspace(0.0, T, 50)
    hyper_ok = center_ok = 0
    for _ in range(100):
        eta = rng.uniform(0.0, sp)
        a0, b0 = rng.uniform(-m, m, 2)
        d0 = rng.uniform(-2.5 * sp, 2.5 * sp)
        c0 = rng.uniform(0.0, m * math.exp(-T), len(lay.modes))
        phase = rng.uniform(0.0, 2 * np.pi, len(lay.modes))
        x = np.zeros(lay.n)
        x[:4] = [eta, math.exp(-2 * T) * a0, math.exp(-T) * b0, math.exp(-T) * d0]
        x[4::2], x[5::2] = c0 * np.cos(phase), c0 * np.sin(phase)
        zs = flow(cfg, x, T, t_eval=ts, return_scaled=True)
        inside = True
        for t, z in zip(ts, zs):
            ivs = hyperbolic_enclosure(cfg, T, eta, a0, b0, d0, t, scaled=True)
            # only rounding slack: the enclosures are degenerate at t = 0
            inside &= all(iv.contains(z[k], slack=1e-12 * (1 + abs(iv.mid))) for k, iv in enumerate(ivs))
        hyper_ok += inside
        bounds = center_bounds(cfg, c0, T)
        c2 = (zs[:, 4::2] ** 2 + zs[:, 5::2] ** 2) * math.exp(-2 * T)
        center_ok += all(b.lo <= v <= b.hi for row in c2 for v, b in zip(row, bounds))
    elapsed = time.perf_counter() - start
    ok = hyper_ok == 100 and center_ok == 100 and elapsed < 120.0
    acceptance(4, "toy enclosure containment", ok,
               f"T={T:.6f}, hyperbolic {hyper_ok}/100, center {center_ok}/100, {elapsed:.1f}s")
    assert ok


def test_toy_covering_suite(acceptance):
    start = time.perf_counter()
    cfg = ToyConfig()
    params = covering_params(cfg)
    slacks = params.slacks()
    ineq_ok = all(slacks[name] > 0 for name in INEQUALITY_NAMES)
    certs = certificates(cfg, params)
    jumps = [c for name, c in certs if name.startswith("jump")]
    flows = [c for name, c in certs if name.startswith("flow")]
    jumps_ok = len(jumps) == cfg.N and all(c.passed and c.rigorous for c in jumps)
    flows_ok = len(flows) == cfg.N + 1 and all(
        c.passed and not c.rigorous and c.exit_margin > 0 and c.entry_margin > 0 for c in flows)
    report = diffuse(cfg, params)
    bound = 10 * params.T * math.exp(-params.T)
    dist_ok = len(report.min_distances) == cfg.N + 1 and max(report.min_distances) <= bound
    elapsed = time.perf_counter() - start
    ok = ineq_ok and jumps_ok and flows_ok and dist_ok and elapsed < 300.0
    acceptance(5, "toy covering suite", ok,
               f"min slack {min(slacks.values()):.3g}, jumps {sum(c.passed for c in jumps)}/{cfg.N}, "
               f"flows {sum(c.passed for c in flows)}/{cfg.N + 1}, max distance "
               f"{max(report.min_distances):.4g} <= {bound:.4g}, {elapsed:.1f}s")
    assert ok


# criterion 6: hand-built affine chains against a grid search

GRID = np.linspace(-1.0, 1.0, 20001)  # resolution 1e-4 in unit coordinates


def chain_1d():
    n0 = natural_hset([0.0], [1.0], [])
    n1 = natural_hset([0.5], [1.5], [])
    n2 = natural_hset([0.0], [2.0], [])
    f1 = MapHandle.affine([[2.0]], [0.3])
    f2 = MapHandle.affine([[3.0]], [-1.0])
    spec = ChainSpec([n0, f1, n1, f2, n2], xbar=[0.4])

    def search():
        x1 = f1(GRID[:, None])
        end = n2.to_unit(f2(x1))[:, 0]
        inside = np.abs(n1.to_unit(x1)[:, 0]) <= 1
        res = np.where(inside, np.abs(end - 0.4), np.inf)
        k = int(np.argmin(res))
        return n0.from_unit([GRID[k]])

    return spec, search


def chain_saddle():
    h = natural_hset([0.0, 0.0], [1.0], [1.0])
    f = MapHandle.affine([[3.0, 0.2], [0.1, 0.5]], [0.3, 0.1])
    spec = ChainSpec([h, f, h, f, h], ybar=[0.5], xbar=[-0.3])

    def search():
        best, arg = np.inf, None
        # rows in order of the pinned-coordinate error, which bounds the residual from below
        for y in GRID[np.argsort(np.abs(GRID - 0.5), kind="stable")]:
            if abs(y - 0.5) >= best:
                break
            q = np.stack([GRID, np.full_like(GRID, y)], axis=1)
            mid = h.to_unit(f(h.from_unit(q)))
            end = h.to_unit(f(h.from_unit(mid)))
            res = np.maximum(abs(y - 0.5), np.abs(end[:, 0] + 0.3))
            res[np.max(np.abs(mid), axis=1) > 1] = np.inf
            k = int(np.argmin(res))
            if res[k] < best:
                best, arg = res[k], q[k]
        return h.from_unit(arg)

    return spec, search


def chain_drop():
    a = HSet([0.0, 0.0], [BlockSpec("x", 1, 1.0, EXIT), BlockSpec("z", 1, 1.0, EXIT)])
    b = natural_hset([0.0, 0.0], [1.0], [1.0])
    g = MapHandle.affine([[3.0, 0.1], [0.2, 0.5]], [-0.2, 0.1])
    h = MapHandle.affine([[2.5, 0.0], [0.1, 0.4]])
    spec = ChainSpec([a, Drop("z"), g, b, h, b], eta={0: [0.25]}, xbar=[0.1])

    def search():
        best, arg = np.inf, None
        for z in GRID[np.argsort(np.abs(GRID - 0.25), kind="stable")]:
            if abs(z - 0.25) >= best:
                break
            q = np.stack([GRID, np.full_like(GRID, z)], axis=1)
            mid = b.to_unit(g(a.from_unit(q)))
            end = b.to_unit(h(b.from_unit(mid)))
            res = np.maximum(abs(z - 0.25), np.abs(end[:, 0] - 0.1))
            res[np.max(np.abs(mid), axis=1) > 1] = np.inf
            k = int(np.argmin(res))
            if res[k] < best:
                best, arg = res[k], q[k]
        return a.from_unit(arg)

    return spec, search


def homogeneous(spec):
    """Same links and sets with zero offsets, centers at the origin and zero anchors."""
    els = []
    for el in spec.elements:
        if isinstance(el, HSet):
            els.append(el.with_center(np.zeros(el.n)))
        elif isinstance(el, MapHandle):
            els.append(MapHandle.affine(el.matrix))
        else:
            els.append(el)
    return ChainSpec(els)


def test_affine_chain_oracle(acceptance):
    start = time.perf_counter()
    details, ok = [], True
    for name, build in (("1d", chain_1d), ("saddle", chain_saddle), ("drop", chain_drop)):
        spec, search = build()
        links_ok = all(check_covering_affine(spec.structures[i], f, spec.sets[i + 1]).passed
                       for i, f in enumerate(spec.maps))
        sol = solve_chain(spec)
        gap = float(np.max(np.abs(sol.q0 - search())))
        nonsingular, det = endpoint_nonsingularity(spec)
        H = endpoint_system(spec)
        zero = solve_chain(homogeneous(spec)).q0
        chain_ok = (links_ok and gap < 1e-3 and nonsingular
                    and abs(np.linalg.det(H)) > 1e-12 and np.max(np.abs(zero)) == 0.0)
        ok = ok and chain_ok
        details.append(f"{name}: gap {gap:.2g}, |det| {det:.3g}")
    elapsed = time.perf_counter() - start
    ok = ok and elapsed < 30.0
    acceptance(6, "affine chains vs grid search", ok, "; ".join(details) + f", {elapsed:.1f}s")
    assert ok


# criterion 7: randomized structural properties

def random_hset(rng, n=None, u=None):
    n = int(rng.integers(1, 6)) if n is None else n
    u = int(rng.integers(0, n + 1)) if u is None else u
    center = rng.uniform(-10, 10, n)
    radii = np.exp(rng.uniform(-3, 2, n))
    basis = None
    if rng.random() < 0.5:
        basis = np.eye(n) + 0.3 * rng.uniform(-1, 1, (n, n))
    blocks = [BlockSpec(f"e{k}", 1, radii[k], EXIT) for k in range(u)]
    blocks += [BlockSpec(f"s{k}", 1, radii[k], ENTRY) for k in range(u, n)]
    return HSet(center, blocks, basis)


def case_round_trip(rng):
    h = random_hset(rng)
    v = rng.uniform(-1, 1, h.n)
    back = h.to_unit(h.from_unit(v))
    text_ok = hset_from_text(hset_to_text(h)) == h
    return bool(np.max(np.abs(back - v)) <= 1e-12 and text_ok)


def case_transpose(rng):
    h = random_hset(rng)
    t = h.transpose()
    return t.transpose() == h and (t.u, t.s) == (h.s, h.u)


def case_drop(rng):
    h = random_hset(rng, u=int(rng.integers(1, 4)) + 0, n=int(rng.integers(4, 6)))
    label = h.exit_labels[int(rng.integers(0, h.u))]
    d = h.drop_exit(label)
    pts = h.from_unit(rng.uniform(-1.2, 1.2, (20, h.n)))
    same = all(h.contains(p) == d.contains(p) for p in pts)
    return same and d.u == h.u - 1 and d.s == h.s + 1


def case_backcovering(rng):
    n = int(rng.integers(1, 4))
    u = int(rng.integers(0, n + 1))
    N, M = random_hset(rng, n, u), random_hset(rng, n, u)
    N, M = N.with_center(np.zeros(n)), M.with_center(np.zeros(n))
    f = MapHandle.affine(np.diag(rng.uniform(0.3, 3, n)) + 0.05 * rng.uniform(-1, 1, (n, n)),
                         0.05 * rng.uniform(-1, 1, n))
    back = check_backcovering(N, f, M)
    direct = check_covering_affine(M.transpose(), f.inverse(), N.transpose())
    return (back.passed == direct.passed and back.degree == direct.degree
            and (back.exit_margin == direct.exit_margin
                 or abs(back.exit_margin - direct.exit_margin) <= 1e-12)
            and (back.entry_margin == direct.entry_margin
                 or abs(back.entry_margin - direct.entry_margin) <= 1e-12))


def case_exact_vs_sampled(rng):
    # diagonal exit block, so the exit minimum sits on the sampling grid
    n = int(rng.integers(1, 9))
    u = int(rng.integers(0, n + 1))
    h = natural_hset(np.zeros(n), np.ones(u), np.ones(n - u))
    P = 0.1 * rng.uniform(-1, 1, (n, n))
    P[:u, :u] = np.diag(rng.choice([-1, 1], u) * rng.uniform(0.8, 3.0, u))
    P[u:, u:] += np.diag(rng.uniform(0.0, 0.5, n - u))
    f = MapHandle.affine(P, 0.1 * rng.uniform(-1, 1, n))
    exact = check_covering_affine(h, f, h)
    # the budget admits the full 3^n tensor, vertices included
    sampled = check_covering_sampled(h, f, h, grid=3, n_random=0, budget=3 ** 8)
    close = lambda a, b: a == b or abs(a - b) <= 1e-8  # noqa: E731
    return (exact.passed == sampled.passed and exact.degree == sampled.degree
            and close(exact.exit_margin, sampled.exit_margin)
            and close(exact.entry_margin, sampled.entry_margin))


def test_structural_properties(acceptance):
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    kinds = {"round trip": case_round_trip, "transpose": case_transpose, "drop": case_drop,
             "backcovering": case_backcovering, "exact vs sampled": case_exact_vs_sampled}
    counts = {k: [0, 0] for k in kinds}
    for _ in range(220):
        for name, case in kinds.items():
            counts[name][0] += 1
            counts[name][1] += bool(case(rng))
    total = sum(c[0] for c in counts.values())
    good = sum(c[1] for c in counts.values())
    elapsed = time.perf_counter() - start
    ok = total >= 1000 and good == total and elapsed < 30.0
    acceptance(7, "structural property suite", ok,
               ", ".join(f"{k} {c[1]}/{c[0]}" for k, c in counts.items()) + f", {elapsed:.1f}s")
    assert ok
