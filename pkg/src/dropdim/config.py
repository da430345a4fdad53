"""Sectioned ``key = value`` configuration files.

::

    [linmodel]
    n = 4
    mu = 0.5            # scalars broadcast, lists are space or comma separated

Every value keeps its line number so validation errors can point at it.
The standard library's configparser drops line numbers after parsing, which
is why this small reader exists.
"""
from __future__ import annotations

from dataclasses import dataclass

SECTIONS = ("linmodel", "triangular", "toymodel")


class ConfigError(ValueError):
    def __init__(self, message: str, lineno: int | None = None):
        super().__init__(message if lineno is None else f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True)
class Entry:
    value: str
    lineno: int


class Section:
    """Typed access to one section; remembers which keys were read."""

    def __init__(self, name: str, entries: dict, lineno: int):
        self.name = name
        self.entries = entries
        self.lineno = lineno
        self._used = set()

    def __contains__(self, key):
        return key in self.entries

    def raw(self, key) -> Entry:
        self._used.add(key)
        return self.entries[key]

    def _convert(self, key, conv, what):
        e = self.raw(key)
        try:
            return conv(e.value)
        except (TypeError, ValueError):
            raise ConfigError(f"[{self.name}] {key}: expected {what}, got {e.value!r}", e.lineno) from None

    def get_float(self, key, default=None):
        if key not in self.entries:
            return default
        return self._convert(key, float, "a number")

    def get_int(self, key, default=None):
        if key not in self.entries:
            return default
        return self._convert(key, int, "an integer")

    def get_complex(self, key, default=None):
        if key not in self.entries:
            return default
        return self._convert(key, lambda s: complex(s.replace(" ", "")), "a complex number")

    def get_str(self, key, default=None):
        if key not in self.entries:
            return default
        return self.raw(key).value

    def get_floats(self, key, default=None):
        if key not in self.entries:
            return default
        return self._convert(key, lambda s: [float(v) for v in s.replace(",", " ").split()],
                             "a list of numbers")

    def get_ints(self, key, default=None):
        if key not in self.entries:
            return default
        return self._convert(key, lambda s: [int(v) for v in s.replace(",", " ").split()],
                             "a list of integers")

    def check_unused(self):
        extra = sorted(set(self.entries) - self._used, key=lambda k: self.entries[k].lineno)
        if extra:
            e = self.entries[extra[0]]
            raise ConfigError(f"[{self.name}] unknown key {extra[0]!r}", e.lineno)

    def snapshot(self) -> dict:
        return {k: e.value for k, e in self.entries.items()}


def parse_config(text: str) -> dict:
    """Map section name to :class:`Section`."""
    sections = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {line!r}", lineno)
            name = line[1:-1].strip()
            if name not in SECTIONS:
                raise ConfigError(f"unknown section [{name}]", lineno)
            if name in sections:
                raise ConfigError(f"section [{name}] appears twice", lineno)
            current = Section(name, {}, lineno)
            sections[name] = current
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        if current is None:
            raise ConfigError("key outside of any section", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or not value:
            raise ConfigError("empty key or value", lineno)
        if key in current.entries:
            raise ConfigError(f"[{current.name}] key {key!r} set twice", lineno)
        current.entries[key] = Entry(value, lineno)
    return sections


def load_config(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def section(sections: dict, name: str) -> Section:
    if name not in sections:
        raise ConfigError(f"missing section [{name}]")
    return sections[name]
