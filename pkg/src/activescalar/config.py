"""INI run configuration: parsing, validation and echo.

Sections and keys (all optional; defaults are the reference SQG run)::

    [grid]      dims, points, side_length, origin
    [equation]  gamma, kappa
    [coupling]  family, beta, sigma, chi, epsilon, matrix, name
    [time]      dt, t_end, integrator, dealias, snapshot_every, diagnostics_every
    [study]     kind, q_list, lambda, amplitudes, perturbations, with_l1, datum, seed
    [output]    directory, prefix

Lengths accept multiples of pi (``16pi``, ``16*pi``).  ``t_end = t_box``
resolves to the wrap-around-safe time of the grid.  ``echo`` writes every
key with its resolved value, so parsing the echo gives the same config.
"""
from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field

from .coupling import NAMED_CUSTOM, PERP_FAMILIES, CouplingSpec
from .errors import ActiveScalarError, ConfigurationError
from .evolve import SolverConfig
from .spectral import Grid, make_grid, safe_time


class ConfigError(ConfigurationError):
    """Configuration problem anchored at a section.key and, when known, a line."""

    def __init__(self, key: str, message: str, line: int | None = None):
        where = f"line {line}: " if line else ""
        super().__init__(f"{where}{key}: {message}")
        self.key = key
        self.line = line


STUDY_KINDS = ("simulate", "decay", "scaling", "symmetry", "picard", "dependence",
               "smoothing", "probe")
DATUM_KINDS = ("bump", "radial", "nonradial", "odd", "even", "critical", "rough", "scaling")

# key -> (type, default); types: int, float, bool, str, ints, floats, qlist, length(s)
SCHEMA: dict[str, dict[str, tuple[str, object]]] = {
    "grid": {"dims": ("int", 2), "points": ("ints", (256,)),
             "side_length": ("lengths", (16 * math.pi,)), "origin": ("lengths", None)},
    "equation": {"gamma": ("float", 1.0), "kappa": ("float", 1.0)},
    "coupling": {"family": ("str", "sqg"), "beta": ("float", None), "sigma": ("float", 1.0),
                 "chi": ("float", 0.0), "epsilon": ("float", 0.05), "matrix": ("matrix", None),
                 "name": ("str", "")},
    "time": {"dt": ("float", 0.1), "t_end": ("time", "t_box"), "integrator": ("str", "etdrk2"),
             "dealias": ("bool", True), "snapshot_every": ("int", 10),
             "diagnostics_every": ("int", 1)},
    "study": {"kind": ("str", "decay"), "q_list": ("qlist", ("inf",)), "lambda": ("float", 2.0),
              "amplitudes": ("floats", (0.1, 1.0, 4.0, 16.0, 64.0)),
              "perturbations": ("floats", (1e-2, 1e-3, 1e-4)), "with_l1": ("bool", True),
              "datum": ("str", "bump"), "seed": ("int", 0)},
    "output": {"directory": ("str", "activescalar_output"), "prefix": ("str", "")},
}

_PI = re.compile(r"^\s*([-+]?[0-9]*\.?[0-9]*(?:[eE][-+]?[0-9]+)?)\s*\*?\s*pi\s*$", re.I)


def _length(text: str) -> float:
    m = _PI.match(text)
    if m:
        factor = m.group(1)
        return (float(factor) if factor not in ("", "+", "-") else float(factor + "1")) * math.pi
    return float(text)


def _split(text: str) -> list[str]:
    return [p.strip() for p in re.split(r"[,\s]+", text.strip()) if p.strip()]


def _convert(kind: str, text: str):
    if kind == "int":
        value = float(text)
        if value != int(value):
            raise ValueError("expected an integer")
        return int(value)
    if kind == "float":
        return float(text)
    if kind == "bool":
        low = text.strip().lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ValueError("expected true or false")
    if kind == "str":
        return text.strip()
    if kind == "ints":
        return tuple(_convert("int", p) for p in _split(text))
    if kind == "floats":
        return tuple(float(p) for p in _split(text))
    if kind == "lengths":
        return tuple(_length(p) for p in _split(text))
    if kind == "time":
        if text.strip().lower() == "t_box":
            return "t_box"
        return float(text)
    if kind == "qlist":
        out = []
        for p in _split(text):
            low = p.lower()
            if low in ("inf", "critical"):
                out.append(low)
            else:
                out.append(format(float(p), ".17g"))
        return tuple(out)
    if kind == "matrix":
        rows = [r for r in text.split(";") if r.strip()]
        return tuple(tuple(float(x) for x in _split(r)) for r in rows)
    raise AssertionError(kind)


def _key_lines(text: str) -> dict[tuple[str, str], int]:
    lines: dict[tuple[str, str], int] = {}
    section = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        m = re.match(r"^\[([^\]]+)\]$", line)
        if m:
            section = m.group(1).strip().lower()
            lines[(section, "")] = no
            continue
        m = re.match(r"^([^=:]+)[=:]", line)
        if m and section is not None:
            lines.setdefault((section, m.group(1).strip().lower()), no)
    return lines


@dataclass(frozen=True)
class StudyParams:
    kind: str
    q_list: tuple[str, ...]
    lam: float
    amplitudes: tuple[float, ...]
    perturbations: tuple[float, ...]
    with_l1: bool
    datum: str
    seed: int


@dataclass(frozen=True)
class RunConfig:
    grid: Grid
    solver: SolverConfig
    coupling: CouplingSpec
    study: StudyParams
    output_directory: str
    output_prefix: str
    values: dict = field(compare=False, repr=False, default_factory=dict)

    def echo(self) -> str:
        return echo_config(self)


def parse_config(text: str) -> RunConfig:
    """Parse and validate; errors name section.key and the line when known."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"),
                                       default_section="__none__")
    parser.optionxform = str.lower
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigError("config", f"syntax error: {exc.message if hasattr(exc, 'message') else exc}",
                          line) from exc
    lines = _key_lines(text)
    values: dict[str, dict[str, object]] = {s: {} for s in SCHEMA}
    for section in parser.sections():
        sec = section.strip().lower()
        if sec not in SCHEMA:
            raise ConfigError(sec, "unknown section", lines.get((sec, "")))
        for key, raw in parser.items(section):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"{sec}.{key}", "unknown key", lines.get((sec, key)))
            kind = SCHEMA[sec][key][0]
            try:
                values[sec][key] = _convert(kind, raw)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"{sec}.{key}", f"type mismatch for {raw!r} ({kind}): {exc}",
                                  lines.get((sec, key))) from None
    for sec, keys in SCHEMA.items():
        for key, (_, default) in keys.items():
            values[sec].setdefault(key, default)
    return _build(values, lines)


def _fail(key: str, message: str, lines) -> ConfigError:
    sec, _, k = key.partition(".")
    return ConfigError(key, message, lines.get((sec, k)))


def _build(values: dict, lines: dict) -> RunConfig:
    g = values["grid"]
    dims = g["dims"]
    if dims not in (2, 3):
        raise _fail("grid.dims", f"must be 2 or 3, got {dims}", lines)
    points = g["points"]
    if len(points) == 1:
        points = points * dims
    sides = g["side_length"]
    if len(sides) == 1:
        sides = sides * dims
    if len(points) != dims:
        raise _fail("grid.points", f"needs {dims} entries, got {len(points)}", lines)
    if len(sides) != dims:
        raise _fail("grid.side_length", f"needs {dims} entries, got {len(sides)}", lines)
    origin = g["origin"]
    if origin is not None and len(origin) == 1:
        origin = origin * dims
    try:
        grid = make_grid(dims, list(points), list(sides),
                         None if origin is None else list(origin))
    except ActiveScalarError as exc:
        key = "grid.points" if "power" in str(exc) or "points" in str(exc) else "grid.side_length"
        if "origin" in str(exc):
            key = "grid.origin"
        raise _fail(key, str(exc), lines) from None
    g.update(points=grid.points, side_length=grid.side_length, origin=grid.origin)

    eq = values["equation"]
    for key in ("gamma", "kappa"):
        if not eq[key] > 0:
            raise _fail(f"equation.{key}", f"must be > 0, got {eq[key]}", lines)

    c = values["coupling"]
    family = c["family"]
    kwargs = dict(family=family, beta=c["beta"], sigma=c["sigma"], chi=c["chi"],
                  epsilon=c["epsilon"], matrix_a=c["matrix"], name=c["name"])
    if family == "custom":
        name = c["name"]
        if name not in NAMED_CUSTOM:
            raise _fail("coupling.name", f"unknown custom coupling {name!r}; known: "
                        f"{', '.join(sorted(NAMED_CUSTOM))}", lines)
        factory = NAMED_CUSTOM[name]
        spec = factory(dims) if name == "zero" else factory()
        if dims != 2 and name != "zero":
            raise _fail("coupling.name", f"{name!r} is defined for n = 2", lines)
    else:
        if family in PERP_FAMILIES and dims != 2 and c["matrix"] is None:
            raise _fail("coupling.family",
                        f"{family!r} uses the 2-d perp structure; grid.dims = {dims}", lines)
        try:
            spec = CouplingSpec(**kwargs)
        except ActiveScalarError as exc:
            raise _fail("coupling.family" if "family" in str(exc) else "coupling.beta",
                        str(exc), lines) from None
        if c["matrix"] is not None:
            try:
                spec.matrix(dims)
            except ActiveScalarError as exc:
                raise _fail("coupling.matrix", str(exc), lines) from None

    t = values["time"]
    t_end = t["t_end"]
    if t_end == "t_box":
        t_end = safe_time(grid, eq["gamma"], eq["kappa"])
        t["t_end"] = t_end
    for key in ("dt", "t_end"):
        if not t[key] > 0:
            raise _fail(f"time.{key}", f"must be > 0, got {t[key]}", lines)
    if t["dt"] > t_end:
        raise _fail("time.dt", f"dt = {t['dt']} exceeds t_end = {t_end}", lines)
    if t["integrator"] not in ("etdrk1", "etdrk2"):
        raise _fail("time.integrator", f"unknown integrator {t['integrator']!r}", lines)
    for key in ("snapshot_every", "diagnostics_every"):
        if t[key] < 1:
            raise _fail(f"time.{key}", f"must be >= 1, got {t[key]}", lines)
    solver = SolverConfig(kappa=eq["kappa"], gamma=eq["gamma"], dt=t["dt"], t_end=t_end,
                          dealias=t["dealias"], integrator=t["integrator"],
                          snapshot_every=t["snapshot_every"],
                          diagnostics_every=t["diagnostics_every"])

    s = values["study"]
    if s["kind"] not in STUDY_KINDS:
        raise _fail("study.kind", f"unknown study kind {s['kind']!r}", lines)
    if s["datum"] not in DATUM_KINDS:
        raise _fail("study.datum", f"unknown datum kind {s['datum']!r}", lines)
    if not s["q_list"]:
        raise _fail("study.q_list", "needs at least one entry", lines)
    for q in s["q_list"]:
        if q not in ("inf", "critical") and not float(q) >= 1:
            raise _fail("study.q_list", f"q must be >= 1, got {q}", lines)
    if s["lambda"] != int(s["lambda"]) or s["lambda"] < 2:
        raise _fail("study.lambda", f"must be an integer >= 2, got {s['lambda']}", lines)
    if any(a < 0 for a in s["amplitudes"]) or not s["amplitudes"]:
        raise _fail("study.amplitudes", "amplitudes must be a non-empty list of values >= 0",
                    lines)
    if any(p < 0 for p in s["perturbations"]) or not s["perturbations"]:
        raise _fail("study.perturbations", "sizes must be a non-empty list of values >= 0",
                    lines)
    study = StudyParams(kind=s["kind"], q_list=tuple(s["q_list"]), lam=float(s["lambda"]),
                        amplitudes=tuple(s["amplitudes"]),
                        perturbations=tuple(s["perturbations"]), with_l1=s["with_l1"],
                        datum=s["datum"], seed=s["seed"])
    out = values["output"]
    return RunConfig(grid, solver, spec, study, out["directory"], out["prefix"], values)


def _echo_value(kind: str, value) -> str:
    if value is None:
        return ""
    if kind in ("float",):
        return format(float(value), ".17g")
    if kind == "time":
        return format(float(value), ".17g") if value != "t_box" else "t_box"
    if kind == "bool":
        return "true" if value else "false"
    if kind in ("ints",):
        return ", ".join(str(int(v)) for v in value)
    if kind in ("floats", "lengths"):
        return ", ".join(format(float(v), ".17g") for v in value)
    if kind == "qlist":
        return ", ".join(value)
    if kind == "matrix":
        return "; ".join(", ".join(format(float(x), ".17g") for x in row) for row in value)
    return str(value)


def echo_config(cfg: RunConfig) -> str:
    """All keys with resolved values; empty optional keys are left out."""
    out = []
    for sec, keys in SCHEMA.items():
        out.append(f"[{sec}]")
        for key, (kind, _) in keys.items():
            value = cfg.values[sec].get(key)
            text = _echo_value(kind, value)
            if text == "":
                continue
            out.append(f"{key} = {text}")
        out.append("")
    return "\n".join(out)


def load_config(path: str) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())


__all__ = ["ConfigError", "RunConfig", "StudyParams", "parse_config", "echo_config",
           "load_config", "SCHEMA", "STUDY_KINDS", "DATUM_KINDS"]
