import numpy as np
import pytest

from dropdim.covering import ChainFileError, certificate_block, check_covering_affine, parse_chain, solve_chain
from dropdim.covering.textio import fmt, key_value_block
from dropdim.geometry import natural_hset

DOUBLING = """
hset N
  center 0
  block x 1 1 exit
end
affine f
  row 2
end
chain
  N
  f
  N
end
"""


def test_parse_doubling():
    spec = parse_chain(DOUBLING)
    assert len(spec.sets) == 2 and spec.maps[0].matrix[0, 0] == 2.0
    assert solve_chain(spec).q0[0] == 0.0


def test_parse_params_and_drop():
    text = """
    hset A
      center 0 0
      block x 1 1 exit
      block z 1 1 exit
    end
    affine g   # diagonal
      row 3 0
      row 0 0.5
      offset 0 0
    end
    hset B
      center 0 0
      block x 1 1 exit
      block y 1 1 entry
    end
    chain
      A
      drop z
      g
      B
    end
    param eta 0 0.25
    param tol 1e-11
    """
    spec = parse_chain(text)
    assert spec.tol == 1e-11
    sol = solve_chain(spec)
    assert np.allclose(sol.q0, [0.0, 0.25])


def test_builtin_maps():
    text = """
    hset N
      center 0
      block x 1 1 exit
    end
    builtin t linmodel_transition n=1 mu=0.5 lam=2 mu_p=0.4 lam_f=1.5 eps=0.1 sigma=0.05 eta=0.5 i=0
    chain
      N
      t
      N
    end
    """
    spec = parse_chain(text)
    assert spec.maps[0].is_affine


@pytest.mark.parametrize("text, line, message", [
    ("hset N\n  center 0\n  block x 1 1 exit\nend\nchain\n  N\n  N\nend\n", 7, "expected a map"),
    ("affine f\n  row 2\nend\nchain\n  f\nend\n", 5, "expected an h-set"),
    ("chain\n  X\nend\n", 2, "undefined name"),
    ("hset N\n  center 0\n", 1, "missing 'end'"),
    ("bogus\n", 1, "unknown record"),
    ("affine f\n  row 1 2\nend\n", 1, "not square"),
    ("builtin g nothing\n", 1, "unknown builtin"),
    ("builtin g toy_jump j=0\n", 1, "needs parameter N"),
    ("param ybar x\n", 1, "could not convert"),
])
def test_errors_carry_line_numbers(text, line, message):
    with pytest.raises(ChainFileError, match=message) as info:
        parse_chain(text)
    assert info.value.lineno == line


def test_report_format():
    h = natural_hset([0.0], [1.0], [])
    from dropdim.covering import MapHandle
    block = certificate_block("link_1", check_covering_affine(h, MapHandle.affine([[2.0]]), h))
    lines = block.splitlines()
    assert lines[0] == "[certificate link_1]"
    assert [ln.split(" = ")[0] for ln in lines[1:8]] == [
        "mode", "passed", "rigorous", "exit_margin", "entry_margin", "degree", "sample_count"]
    assert "passed = true" in lines
    assert fmt(0.1) == "0.10000000000000001" and float(fmt(1 / 3)) == 1 / 3
    assert key_value_block("x", [("v", [1.0, 2])]) == "[x]\nv = 1 2\n"
