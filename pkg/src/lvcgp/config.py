"""Run configuration: a small INI-style format with strict validation.

Sections ``model``, ``grid`` or ``basis``, ``run``, ``bath``, ``output``,
``tdpt`` and ``sweep``. Lines are ``key = value``; ``#`` starts a comment.
Unknown sections or keys, bad values and missing required keys raise
`ConfigError` carrying the offending line number.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from . import __version__
from .closed import PropagationPlan
from .model import BathParameters, LvcParameters, SubsystemParameters
from .open_dynamics import OhmicSpec, discretize_ohmic
from .representation import ADIABATIC, DIABATIC, GridSpec, HoBasisSpec


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)


# ---------------------------------------------------------------- value parsers

def _float(s: str) -> float:
    v = float(s)
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


def _positive(s: str) -> float:
    v = _float(s)
    if v <= 0:
        raise ValueError("must be > 0")
    return v


def _nonneg(s: str) -> float:
    v = _float(s)
    if v < 0:
        raise ValueError("must be >= 0")
    return v


def _int(s: str) -> int:
    f = float(s)
    if f != int(f):
        raise ValueError("must be an integer")
    return int(f)


def _pos_int(s: str) -> int:
    v = _int(s)
    if v < 1:
        raise ValueError("must be >= 1")
    return v


def _floats(n: int | None = None, check: Callable[[str], float] = _float):
    def parse(s: str):
        parts = [p for p in s.replace(",", " ").split()]
        vals = tuple(check(p) for p in parts)
        if n is not None and len(vals) != n:
            raise ValueError(f"expected {n} numbers, got {len(vals)}")
        return vals
    return parse


def _choice(*options: str):
    def parse(s: str) -> str:
        if s not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return s
    return parse


def _text(s: str) -> str:
    if not s:
        raise ValueError("must not be empty")
    return s


REQUIRED = object()
OPTIONAL = None

# section -> key -> (parser, default)
SCHEMA: dict[str, dict[str, tuple[Callable[[str], Any], Any]]] = {
    "model": {
        "Omega_X": (_positive, OPTIONAL),
        "Omega_Y": (_positive, OPTIONAL),
        "X0": (_float, 0.0),
        "Y0": (_float, 0.0),
        "Delta": (_float, 0.0),
        "C_X": (_float, 0.0),
        "C_Y": (_float, 0.0),
        "Delta12": (_float, 0.0),
        "lvc_file": (_text, OPTIONAL),
    },
    "grid": {
        "nx": (_pos_int, 32),
        "ny": (_pos_int, 32),
        "bounds": (_floats(4), (-6.0, 6.0, -6.0, 6.0)),
    },
    "basis": {
        "n_max_x": (_pos_int, 40),
        "n_max_y": (_pos_int, 40),
        "max_total": (_pos_int, 60),
        "center": (_floats(2), (0.0, 0.0)),
        "frequencies": (_floats(2, _positive), OPTIONAL),
    },
    "run": {
        "representation": (_choice("with-gp", "no-gp"), "with-gp"),
        "mode": (_choice("closed", "open"), "closed"),
        "t_final": (_positive, 100.0),
        "dt_output": (_positive, 0.5),
        "propagator": (_choice("eigen", "split"), "eigen"),
        "split_dt": (_positive, 0.002),
        "snapshot_times": (_floats(None, _nonneg), ()),
        "tcl_dt": (_positive, 0.01),
        "energy_window": (_positive, 17.2),
        "n_states": (_pos_int, OPTIONAL),
        "refine": (_pos_int, 8),
    },
    "bath": {
        "kind": (_choice("ohmic", "explicit"), "ohmic"),
        "xi": (_nonneg, OPTIONAL),
        "Omega_c": (_positive, 3.5),
        "n_modes": (_pos_int, 100),
        "Omega_max": (_positive, OPTIONAL),
        "couple_to": (_choice("X", "Y"), "Y"),
        "temperature": (_nonneg, 0.0),
        "Omega": (_floats(None, _positive), OPTIONAL),
        "lambda_X": (_floats(), OPTIONAL),
        "lambda_Y": (_floats(), OPTIONAL),
    },
    "output": {
        "directory": (_text, "out"),
    },
    "tdpt": {
        "t_final": (_positive, OPTIONAL),
        "dt": (_positive, 0.05),
        "n_max": (_pos_int, 30),
    },
}


def _format(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class RawConfig:
    """Parsed but unresolved sections: section -> key -> (value text, line)."""

    sections: dict[str, dict[str, tuple[str, int]]] = field(default_factory=dict)
    base_dir: str = "."
    headers: dict[str, int] = field(default_factory=dict)

    def header_line(self, section: str) -> int:
        """Line of a section header; 0 when the section is absent."""
        return self.headers.get(section, 0)


def tokenize(text: str, base_dir: str = ".") -> RawConfig:
    raw = RawConfig(base_dir=base_dir)
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if body.startswith("["):
            if not body.endswith("]"):
                raise ConfigError(f"malformed section header {body!r}", lineno)
            section = body[1:-1].strip()
            if section not in SCHEMA and section != "sweep":
                raise ConfigError(f"unknown section [{section}]", lineno)
            if section in raw.sections:
                raise ConfigError(f"duplicate section [{section}]", lineno)
            raw.sections[section] = {}
            raw.headers[section] = lineno
            continue
        if "=" not in body:
            raise ConfigError(f"expected 'key = value', got {body!r}", lineno)
        if section is None:
            raise ConfigError("key outside of any section", lineno)
        key, value = (s.strip() for s in body.split("=", 1))
        if section != "sweep" and key not in SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} in [{section}]", lineno)
        if key in raw.sections[section]:
            raise ConfigError(f"duplicate key {key!r} in [{section}]", lineno)
        raw.sections[section][key] = (value, lineno)
    return raw


def apply_overrides(raw: RawConfig, overrides: list[str]) -> RawConfig:
    """Apply ``section.key=value`` overrides; a bare ``key=value`` works when the key is unambiguous.

    Line numbers of overridden values are reported as 0.
    """
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}", 0)
        lhs, value = (s.strip() for s in item.split("=", 1))
        if "." in lhs:
            section, key = lhs.split(".", 1)
        else:
            owners = [sec for sec, keys in SCHEMA.items() if lhs in keys]
            if len(owners) != 1:
                what = "unknown" if not owners else "ambiguous (" + ", ".join(owners) + ")"
                raise ConfigError(f"override key {lhs!r} is {what}; use section.key", 0)
            section, key = owners[0], lhs
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}] in override", 0)
        if key not in SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} in [{section}] (override)", 0)
        if section == "grid" and "basis" in raw.sections:
            del raw.sections["basis"]
        if section == "basis" and "grid" in raw.sections:
            del raw.sections["grid"]
        raw.sections.setdefault(section, {})[key] = (value, 0)
    return raw


@dataclass
class RunConfig:
    values: dict[str, dict[str, Any]]
    subsystem: SubsystemParameters
    scheme: GridSpec | HoBasisSpec
    plan: PropagationPlan
    bath: BathParameters | None
    ohmic: OhmicSpec | None
    sweep: dict[str, list[str]]
    lvc: LvcParameters | None = None

    @property
    def representation(self) -> str:
        return DIABATIC if self.values["run"]["representation"] == "with-gp" else ADIABATIC

    @property
    def mode(self) -> str:
        return self.values["run"]["mode"]

    @property
    def output_directory(self) -> str:
        return self.values["output"]["directory"]

    def resolved_text(self) -> str:
        """Every section and key, defaults included, in the input format."""
        lines = []
        order = ["model", "grid" if isinstance(self.scheme, GridSpec) else "basis", "run", "bath", "output", "tdpt"]
        for section in order:
            if section not in self.values:
                continue
            lines.append(f"[{section}]")
            for key, value in self.values[section].items():
                if value is None:
                    lines.append(f"# {key} = (unset: automatic)")
                    continue
                if key == "lvc_file":
                    lines.append(f"# subsystem derived from lvc_file = {value}")
                    continue
                lines.append(f"{key} = {_format(value)}")
            lines.append("")
        if self.sweep:
            lines.append("[sweep]")
            for key, vals in self.sweep.items():
                lines.append(f"{key} = {', '.join(vals)}")
            lines.append("")
        return "\n".join(lines)


def read_lvc_table(path: str) -> LvcParameters:
    """Mode table: one ``omega kappa kappa_tilde c`` row per mode plus optional ``delta = value``."""
    rows, delta = [], 0.0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            if "=" in body:
                key, value = (s.strip() for s in body.split("=", 1))
                if key != "delta":
                    raise ConfigError(f"{path}: unknown key {key!r}", lineno)
                try:
                    delta = _float(value)
                except ValueError as exc:
                    raise ConfigError(f"{path}: delta: {exc}", lineno) from None
                continue
            try:
                vals = [float(v) for v in body.split()]
            except ValueError:
                raise ConfigError(f"{path}: expected four numbers", lineno) from None
            if len(vals) != 4:
                raise ConfigError(f"{path}: expected four numbers, got {len(vals)}", lineno)
            rows.append(vals)
    if not rows:
        raise ConfigError(f"{path}: no modes found")
    a = np.array(rows)
    try:
        return LvcParameters(a[:, 0], a[:, 1], a[:, 2], a[:, 3], delta)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def write_lvc_table(lvc: LvcParameters, path: str) -> None:
    with open(path, "w") as fh:
        fh.write("# omega kappa kappa_tilde c\n")
        for row in zip(lvc.omega, lvc.kappa, lvc.kappa_tilde, lvc.c):
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")
        fh.write(f"delta = {float(lvc.delta)!r}\n")


def _parse_value(section, key, text, line):
    parser, _ = SCHEMA[section][key]
    try:
        return parser(text)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} = {text!r}: {exc}", line) from None


def resolve(raw: RawConfig, with_sweep: bool = True) -> RunConfig:
    s = raw.sections
    if "grid" in s and "basis" in s:
        line = min(v[1] for v in s["basis"].values()) if s["basis"] else None
        raise ConfigError("use either [grid] or [basis], not both", line)
    values: dict[str, dict[str, Any]] = {}
    scheme_section = "basis" if "basis" in s else "grid"
    for section in ("model", scheme_section, "run", "bath", "output", "tdpt"):
        if section == "bath" and "bath" not in s:
            continue
        values[section] = {}
        for key, (_, default) in SCHEMA[section].items():
            if key in s.get(section, {}):
                text, line = s[section][key]
                values[section][key] = _parse_value(section, key, text, line)
            else:
                values[section][key] = default

    m = values["model"]
    lvc = None
    bath = None
    if m["lvc_file"] is not None:
        path = m["lvc_file"]
        if not os.path.isabs(path):
            path = os.path.join(raw.base_dir, path)
        if not os.path.exists(path):
            raise ConfigError(f"lvc_file {m['lvc_file']!r} does not exist", s["model"]["lvc_file"][1])
        from .effective_modes import lvc_to_system_bath
        lvc = read_lvc_table(path)
        result = lvc_to_system_bath(lvc)
        sub = result.model.subsystem
        for key in ("Omega_X", "Omega_Y", "X0", "Y0", "Delta", "C_X", "C_Y", "Delta12"):
            if key in s.get("model", {}):
                raise ConfigError(f"[model] {key} conflicts with lvc_file", s["model"][key][1])
            m[key] = float(getattr(sub, key))
        if result.model.bath.n_modes:
            bath = result.model.bath
            if "bath" in s:
                raise ConfigError("[bath] cannot be combined with a multi-mode lvc_file",
                                  min((v[1] for v in s["bath"].values()), default=None))
            values["bath"] = {key: default for key, (_, default) in SCHEMA["bath"].items()}
            values["bath"].update(kind="explicit", Omega_c=None, n_modes=None, couple_to=None,
                                  Omega=tuple(float(v) for v in bath.Omega),
                                  lambda_X=tuple(float(v) for v in bath.lambda_X),
                                  lambda_Y=tuple(float(v) for v in bath.lambda_Y))
    else:
        for key in ("Omega_X", "Omega_Y"):
            if m[key] is None:
                raise ConfigError(f"missing required key [model] {key}", raw.header_line("model"))
        sub = SubsystemParameters(*(m[k] for k in ("Omega_X", "Omega_Y", "X0", "Y0", "Delta", "C_X", "C_Y", "Delta12")))
    if sub.X0 == 0 and sub.Y0 == 0:
        raise ConfigError("X0 and Y0 cannot both be zero", raw.header_line("model"))

    try:
        if scheme_section == "grid":
            g = values["grid"]
            scheme = GridSpec(g["nx"], g["ny"], tuple(g["bounds"]))
        else:
            b = values["basis"]
            scheme = HoBasisSpec(b["n_max_x"], b["n_max_y"], b["max_total"], tuple(b["center"]),
                                 b["frequencies"])
    except ValueError as exc:
        raise ConfigError(f"[{scheme_section}] {exc}") from None

    r = values["run"]
    try:
        plan = PropagationPlan(r["t_final"], r["dt_output"], r["propagator"], tuple(r["snapshot_times"]),
                               r["split_dt"])
    except ValueError as exc:
        raise ConfigError(f"[run] {exc}") from None
    if r["mode"] == "open" and r["propagator"] != "eigen":
        raise ConfigError("[run] open mode always uses the TCL2 integrator; set propagator = eigen")

    ohmic = None
    if "bath" in values and lvc is None:
        bv = values["bath"]
        if bv["kind"] == "ohmic":
            if bv["xi"] is None:
                raise ConfigError("missing required key [bath] xi", raw.header_line("bath"))
            for key in ("Omega", "lambda_X", "lambda_Y"):
                if bv[key] is not None:
                    raise ConfigError(f"[bath] {key} needs kind = explicit", s["bath"][key][1])
            ohmic = OhmicSpec(bv["xi"], bv["Omega_c"], bv["n_modes"], bv["Omega_max"], bv["couple_to"],
                              bv["temperature"])
            bath = discretize_ohmic(ohmic)
        else:
            om = bv["Omega"]
            if om is None:
                raise ConfigError("missing required key [bath] Omega", raw.header_line("bath"))
            lx = bv["lambda_X"] if bv["lambda_X"] is not None else (0.0,) * len(om)
            ly = bv["lambda_Y"] if bv["lambda_Y"] is not None else (0.0,) * len(om)
            if len(lx) != len(om) or len(ly) != len(om):
                raise ConfigError("[bath] lambda lists must match the length of Omega")
            bath = BathParameters(om, lx, ly, bv["temperature"])
    if r["mode"] == "open" and bath is None:
        raise ConfigError("mode = open requires a [bath] section", s.get("run", {}).get("mode", (None, 0))[1])

    sweep = {}
    if with_sweep and "sweep" in s:
        for key, (text, line) in s["sweep"].items():
            if "." not in key:
                raise ConfigError(f"sweep key {key!r} must be section.key", line)
            sec, k = key.split(".", 1)
            if sec not in SCHEMA or k not in SCHEMA[sec]:
                raise ConfigError(f"sweep key {key!r} is not a known parameter", line)
            opts = [v.strip() for v in text.split(",") if v.strip()]
            for v in opts:
                _parse_value(sec, k, v, line)
            sweep[key] = opts
    return RunConfig(values, sub, scheme, plan, bath, ohmic, sweep, lvc)


def parse_config(text: str, overrides: list[str] | None = None, base_dir: str = ".") -> RunConfig:
    raw = tokenize(text, base_dir)
    if overrides:
        raw = apply_overrides(raw, overrides)
    return resolve(raw)


def load_config(path: str, overrides: list[str] | None = None) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_config(text, overrides, base_dir=os.path.dirname(os.path.abspath(path)))


def expand_sweep(cfg: RunConfig) -> list[tuple[str, list[str]]]:
    """(label, overrides) for each point of the cartesian product in [sweep]."""
    if not cfg.sweep:
        return [("base", [])]
    keys = list(cfg.sweep)
    out = []
    for combo in itertools.product(*(cfg.sweep[k] for k in keys)):
        label = "_".join(f"{k.split('.', 1)[1]}={v}" for k, v in zip(keys, combo))
        out.append((label, [f"{k}={v}" for k, v in zip(keys, combo)]))
    return out


def subsystem_text(sub: SubsystemParameters, bath: BathParameters | None) -> str:
    """Lossless config fragment for a subsystem-bath model."""
    lines = ["[model]"]
    for key in ("Omega_X", "Omega_Y", "X0", "Y0", "Delta", "C_X", "C_Y", "Delta12"):
        lines.append(f"{key} = {float(getattr(sub, key))!r}")
    if bath is not None and bath.n_modes:
        lines += ["", "[bath]", "kind = explicit",
                  "Omega = " + ", ".join(repr(float(v)) for v in bath.Omega),
                  "lambda_X = " + ", ".join(repr(float(v)) for v in bath.lambda_X),
                  "lambda_Y = " + ", ".join(repr(float(v)) for v in bath.lambda_Y),
                  f"temperature = {float(bath.temperature)!r}"]
    return "\n".join(lines) + "\n"


def meta_header() -> str:
    return f"# lvcgp {__version__}\n"
