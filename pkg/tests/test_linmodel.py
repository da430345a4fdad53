import math

import numpy as np
import pytest

from dropdim.covering import check_covering_affine, solve_chain
from dropdim.linmodel import (LinearModelConfig, LinearModelError, build_hsets, build_model,
                              chain_spec, fixed_point, incoming_point, iterate_bounds, local_map,
                              min_iterates, outgoing_point, shadow_orbit, transition_map,
                              verify_model)

DESK = dict(n=4, mu=0.5, lam=2.0, mu_p=0.4, lam_f=1.5, eps=0.1, sigma=0.05, eta=0.5)


def desk(**kw):
    return LinearModelConfig(**{**DESK, **kw})


def test_fixed_points_n2():
    cfg = desk(n=2)
    assert [tuple(fixed_point(2, i)) for i in range(3)] == [(0, 0), (1, 0), (1, 1)]
    model = build_model(cfg)
    for i in range(3):
        p = fixed_point(2, i)
        assert np.array_equal(model.local[i](p), p)


def test_transition_carries_sections():
    cfg = desk()
    z = np.array([0.01, -0.02, 0.03, 0.005])
    for i in range(cfg.n):
        f = transition_map(cfg, i)
        assert np.allclose(f(outgoing_point(cfg, i) + z), incoming_point(cfg, i + 1) + z, atol=1e-15)


def test_iterate_bounds_desk():
    # frozen from an independent high-precision evaluation
    b = iterate_bounds(desk(), 2)
    assert b["past"] == pytest.approx(0.7564707973660301, abs=1e-12)
    assert b["incoming"] == pytest.approx(1.584962500721156, abs=1e-12)
    assert b["outgoing"] == pytest.approx(1.0, abs=1e-12)
    assert b["future"] == pytest.approx(1.0, abs=1e-12)
    assert [min_iterates(desk(), i) for i in range(4)] == [2, 2, 2, 2]


def test_iterate_bounds_half_past_contraction():
    assert iterate_bounds(desk(mu_p=0.5), 2)["past"] == pytest.approx(1.0, abs=1e-12)


def test_iterate_bounds_vanish_in_the_limit():
    cfg = desk(eta=1e-9, sigma=1e-9)
    assert all(v < 1e-6 for v in iterate_bounds(cfg, 2).values())
    assert min_iterates(cfg, 2) == 1


def test_weak_contraction_dominates():
    cfg = desk(mu=0.9)
    b = iterate_bounds(cfg, 2)
    assert b["incoming"] == pytest.approx(math.log(3) / math.log(10 / 9))
    assert min_iterates(cfg, 2) == math.floor(math.log(3) / math.log(10 / 9)) + 1


def test_hset_dimensions():
    cfg = desk()
    for i in range(cfg.n):
        sets = build_hsets(cfg, i)
        assert sets["inc"].u == cfg.n - i and sets["inc"].s == i
        assert sets["out_dropped"].u == cfg.n - i - 1
        assert sets["out_dropped"].u == build_hsets(cfg, i + 1)["inc"].u
        expected = fixed_point(cfg.n, i)
        if i:
            expected[i - 1] += cfg.sigma
        assert np.array_equal(sets["inc"].center, expected)


def test_desk_certificates_pass():
    certs = verify_model(desk())
    assert len(certs) == 8
    for name, cert in certs:
        assert cert.passed and cert.rigorous, name
        assert min(cert.exit_margin, cert.entry_margin) > 1e-3


def test_zero_iterates_fail():
    certs = dict(verify_model(desk(), ks=[0] * 4))
    assert not any(certs[f"local_{i}"].passed for i in range(4))
    assert all(certs[f"transition_{i}"].passed for i in range(4))


def test_margins_monotone_in_iterates():
    cfg = desk()
    for i in range(cfg.n):
        prev = None
        for k in range(2, 7):
            ks = [2] * cfg.n
            ks[i] = k
            cert = dict(verify_model(cfg, ks))[f"local_{i}"]
            cur = (cert.exit_margin, cert.entry_margin)
            if prev is not None:
                assert cur[0] >= prev[0] - 1e-12 and cur[1] >= prev[1] - 1e-12
            prev = cur


def test_shadow_orbit_desk():
    cfg = desk()
    orbit = shadow_orbit(cfg)
    assert len(orbit.visits) == cfg.n + 1
    assert all(v.distance < cfg.eps for v in orbit.visits)
    assert [v.index for v in orbit.visits] == list(range(cfg.n + 1))
    iterates = [v.iterate for v in orbit.visits]
    assert iterates[0] == 0 and iterates == sorted(set(iterates))
    assert orbit.residual <= 1e-12


def test_orbit_hits_exit_sections():
    cfg = desk()
    sol = solve_chain(chain_spec(cfg))
    for i in range(cfg.n):
        # points alternate inc, out for each saddle
        out = sol.points[2 * i + 1]
        assert abs(out[i] - (fixed_point(cfg.n, i)[i] + cfg.sigma)) < 1e-10


def test_pedagogical_n2_orbit():
    orbit = shadow_orbit(desk(n=2))
    for v in orbit.visits:
        p = fixed_point(2, v.index)
        assert np.max(np.abs(orbit.orbit[v.iterate] - p)) == pytest.approx(v.distance)
        assert v.distance < 0.1


def test_rescaled_config():
    cfg = desk(eps=0.05, sigma=0.025)
    assert all(c.passed for _, c in verify_model(cfg))
    assert all(v.distance < cfg.eps for v in shadow_orbit(cfg).visits)


def test_negative_expansion_gives_negative_degree():
    cfg = desk(lam=-2.0)
    certs = dict(verify_model(cfg))
    # an even power flips back; odd powers keep the sign
    assert certs["local_0"].degree == 1
    cert = check_covering_affine(build_hsets(cfg, 0)["inc"], local_map(cfg, 0).power(3),
                                 build_hsets(cfg, 0)["out"])
    assert cert.passed and cert.degree == -1


def test_general_matrices_hook():
    rot = 0.3 * np.array([[0.0, 1.0], [-1.0, 0.0]])
    cfg = LinearModelConfig(**DESK, past_matrices={3: rot})
    assert all(c.passed for _, c in verify_model(cfg))
    with pytest.raises(LinearModelError):
        LinearModelConfig(**DESK, past_matrices={3: np.eye(2)})


@pytest.mark.parametrize("bad", [dict(sigma=0.2), dict(mu=1.5), dict(lam=0.5), dict(eta=1.0),
                                 dict(lam_f=1.0), dict(n=0), dict(mu=[0.5, 0.5])])
def test_config_validation(bad):
    with pytest.raises(LinearModelError):
        desk(**bad)


def test_chain_is_affine_and_exact():
    sol = solve_chain(chain_spec(desk()))
    assert sol.residual <= 1e-12
