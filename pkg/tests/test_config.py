import pytest

from dropdim.config import ConfigError, parse_config, section


def test_parse_and_types():
    text = "# header\n[linmodel]\nn = 4\nmu = 0.5, 0.4 0.3  # list\n[toymodel]\nkappa_c = 0 + 1e-3j\n"
    secs = parse_config(text)
    lin = section(secs, "linmodel")
    assert lin.get_int("n") == 4
    assert lin.get_floats("mu") == [0.5, 0.4, 0.3]
    assert lin.get_float("missing", 7.0) == 7.0
    assert section(secs, "toymodel").get_complex("kappa_c") == 1e-3j
    lin.check_unused()
    assert lin.snapshot()["n"] == "4"


@pytest.mark.parametrize("text, line", [
    ("[nope]\n", 1),
    ("[linmodel\n", 1),
    ("n = 4\n", 1),
    ("[linmodel]\nn 4\n", 2),
    ("[linmodel]\nn = 4\nn = 5\n", 3),
    ("[linmodel]\n[linmodel]\n", 2),
    ("[linmodel]\nn =\n", 2),
])
def test_syntax_errors(text, line):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.lineno == line
    assert str(info.value).startswith(f"line {line}:")


def test_value_errors_point_at_line():
    sec = parse_config("[linmodel]\n\nn = four\nextra = 1\n")["linmodel"]
    with pytest.raises(ConfigError, match="expected an integer") as info:
        sec.get_int("n")
    assert info.value.lineno == 3
    with pytest.raises(ConfigError, match="unknown key 'extra'") as info:
        sec.check_unused()
    assert info.value.lineno == 4
    with pytest.raises(ConfigError, match="missing section"):
        section({}, "toymodel")
