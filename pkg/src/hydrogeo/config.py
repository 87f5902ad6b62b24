"""Scenario files: a small line-oriented ``key = value`` format with sections.

Grammar (``#`` or ``;`` start a comment, blank lines are ignored)::

    [scenario]
    kind = curvature          # curvature | flow | geodesic | transport | distance
                              # | oracle | identity_suite
    model = kmp               # builtin name or custom:<module>:<attribute>
    seed = 0
    out_dir = out

    [grid]
    n = 128                   # even, >= 8
    length = 1.0              # default: 1, or 2 for sep (uniform density 1/2)
    dealias = 0.6666666666666666

    [field.rho0]              # densities: rho0, rho1, pi
    mean = 1.0                # optional, defaults to 1/length
    mode = 1, 0.1, 0.0        # k, a_k, b_k -> a_k cos(2 pi k x/L) + b_k sin(2 pi k x/L)

    [field.phi1]              # potentials: phi1..phi4, eta0, eta1
    mode = 1, 0.0, 1.0

    [run]
    dt = 0.001

Density means are shifted so the field has unit mass; potentials are
projected to zero mean.  Every default is materialised and echoed back by
:meth:`Scenario.echo`.
"""
from __future__ import annotations

import importlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, HydrogeoError
from .grid import MIN_POINTS, Grid
from .models import BUILTIN_NAMES, DensityField, MobilityModel, builtin_model, default_length

KINDS = ("curvature", "flow", "geodesic", "transport", "distance", "oracle", "identity_suite")
DENSITY_FIELDS = ("rho0", "rho1", "pi")
POTENTIAL_FIELDS = ("phi1", "phi2", "phi3", "phi4", "eta0", "eta1")

REQUIRED_FIELDS = {
    "curvature": ("rho0", "phi1", "phi2"),
    "flow": ("rho0", "pi"),
    "geodesic": ("rho0", "phi1"),
    "transport": ("rho0", "phi1", "eta0"),
    "distance": ("rho0", "rho1"),
    "oracle": (),
    "identity_suite": (),
}

_FLOW_RUN = {"dt": (float, 1e-3), "t_end": (float, 1.0), "integrator": (str, "rk4"),
             "store_every": (int, 1), "cfl_safety": (float, 0.25)}

RUN_KEYS = {
    "curvature": {"method": (str, "general")},
    "flow": dict(_FLOW_RUN),
    "geodesic": dict(_FLOW_RUN),
    "transport": dict(_FLOW_RUN),
    "distance": {"n_time": (int, 8), "max_iter": (int, 500), "gtol": (float, 1e-12),
                 "ftol": (float, 1e-15), "penalty": (float, 1e6), "margin": (float, 1e-6),
                 "restarts": (int, 5)},
    "oracle": {"n_values": ("ints", (12, 16)), "samples": (int, 2)},
    "identity_suite": {"samples": (int, 20), "models": ("names", BUILTIN_NAMES),
                       "max_mode": (int, 3)},
}

SCENARIO_KEYS = {"kind", "model", "seed", "out_dir"}
GRID_KEYS = {"n", "length", "dealias"}


@dataclass(frozen=True)
class FieldSpec:
    name: str
    modes: tuple = ()
    mean: float | None = None

    @property
    def is_density(self) -> bool:
        return self.name in DENSITY_FIELDS


@dataclass
class Scenario:
    kind: str
    model: str
    n: int
    length: float = 1.0
    dealias: float = 2.0 / 3.0
    fields: dict = field(default_factory=dict)
    run: dict = field(default_factory=dict)
    seed: int = 0
    out_dir: str = "out"
    notes: list = field(default_factory=list)

    @property
    def grid(self) -> Grid:
        return Grid(self.n, self.length, self.dealias)

    def mobility(self) -> MobilityModel:
        return resolve_model(self.model)

    def density(self, name) -> DensityField:
        spec = self.fields[name]
        g = self.grid
        mean = 1.0 / g.length
        return DensityField.normalized(g, g.fourier_field(spec.modes, mean))

    def potential(self, name) -> np.ndarray:
        g = self.grid
        return g.project_zero_mean(g.fourier_field(self.fields[name].modes))

    def echo(self) -> str:
        """Canonical config text with every default filled in."""
        lines = ["[scenario]", f"kind = {self.kind}", f"model = {self.model}",
                 f"seed = {self.seed}", f"out_dir = {self.out_dir}", "",
                 "[grid]", f"n = {self.n}", f"length = {self.length!r}",
                 f"dealias = {self.dealias!r}"]
        for name in sorted(self.fields):
            spec = self.fields[name]
            lines += ["", f"[field.{name}]"]
            if spec.is_density:
                lines.append(f"mean = {1.0 / self.length!r}")
            for k, a, b in spec.modes:
                lines.append(f"mode = {k}, {a!r}, {b!r}")
        lines += ["", "[run]"]
        for key in sorted(self.run):
            lines.append(f"{key} = {_format_value(self.run[key])}")
        for note in self.notes:
            lines.append(f"# {note}")
        return "\n".join(lines) + "\n"


def _format_value(v):
    if isinstance(v, (tuple, list)):
        return ", ".join(str(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def resolve_model(ref: str) -> MobilityModel:
    """Builtin name or ``custom:<module>:<attribute>`` (a model or a factory)."""
    if ref in BUILTIN_NAMES:
        return builtin_model(ref)
    if ref.startswith("custom:"):
        parts = ref.split(":")
        if len(parts) != 3:
            raise ConfigError(f"custom model reference must be custom:<module>:<attribute>, "
                              f"got {ref!r}")
        try:
            obj = getattr(importlib.import_module(parts[1]), parts[2])
        except (ImportError, AttributeError) as exc:
            raise ConfigError(f"cannot load custom model {ref!r}: {exc}") from exc
        if callable(obj) and not isinstance(obj, MobilityModel):
            obj = obj()
        if not isinstance(obj, MobilityModel):
            raise ConfigError(f"{ref!r} does not provide a MobilityModel")
        return obj
    raise ConfigError(f"unknown model {ref!r} (builtins: {', '.join(BUILTIN_NAMES)})")


def _convert(kind, raw, key, lineno):
    try:
        if kind is int:
            v = float(raw)
            if v != int(v):
                raise ValueError
            return int(v)
        if kind is float:
            return float(raw)
        if kind is str:
            return raw
        items = [x for x in raw.replace(",", " ").split()]
        if kind == "ints":
            return tuple(int(x) for x in items)
        if kind == "names":
            return tuple(items)
    except ValueError:
        pass
    raise ConfigError(f"bad value {raw!r} for {key}", line=lineno)


def _parse_mode(raw, lineno):
    parts = raw.replace(",", " ").split()
    if len(parts) != 3:
        raise ConfigError(f"mode needs three numbers k, a_k, b_k, got {raw!r}", line=lineno)
    try:
        k = int(parts[0])
        a, b = float(parts[1]), float(parts[2])
    except ValueError:
        raise ConfigError(f"bad mode {raw!r}", line=lineno) from None
    if k < 1:
        raise ConfigError(f"mode wavenumber must be >= 1 (use mean for k = 0), got {k}",
                          line=lineno)
    return (k, a, b)


def parse_config(text: str) -> Scenario:
    """Parse and validate scenario text; errors carry the offending line number."""
    sections: dict = {}
    where: dict = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {raw.strip()!r}", line=lineno)
            current = line[1:-1].strip()
            if current not in ("scenario", "grid", "run") and not current.startswith("field."):
                raise ConfigError(f"unknown section [{current}]", line=lineno)
            if current in sections:
                raise ConfigError(f"duplicate section [{current}]", line=lineno)
            sections[current] = []
            where[current] = lineno
            continue
        if current is None:
            raise ConfigError("key outside of any section", line=lineno)
        if "=" not in line:
            raise ConfigError(f"expected key = value, got {line!r}", line=lineno)
        key, value = (p.strip() for p in line.split("=", 1))
        sections[current].append((key, value, lineno))

    def single(sec, allowed):
        out = {}
        for key, value, lineno in sections.get(sec, []):
            if key not in allowed:
                raise ConfigError(f"unknown key {key!r} in [{sec}]", line=lineno)
            if key in out:
                raise ConfigError(f"duplicate key {key!r}", line=lineno)
            out[key] = (value, lineno)
        return out

    sc = single("scenario", SCENARIO_KEYS)
    if "kind" not in sc:
        raise ConfigError("missing required field scenario.kind", line=where.get("scenario"))
    kind, kline = sc["kind"]
    if kind not in KINDS:
        raise ConfigError(f"unknown kind {kind!r} (one of {', '.join(KINDS)})", line=kline)
    model = sc.get("model", ("kmp" if kind != "identity_suite" else "all", None))
    if model[0] != "all":
        try:
            resolve_model(model[0])
        except ConfigError as exc:
            raise ConfigError(str(exc), line=model[1]) from None
    seed = 0
    if "seed" in sc:
        seed = _convert(int, sc["seed"][0], "seed", sc["seed"][1])

    gr = single("grid", GRID_KEYS)
    if "n" not in gr:
        raise ConfigError("missing required field grid.n", line=where.get("grid"))
    n = _convert(int, gr["n"][0], "n", gr["n"][1])
    if n <= 0:
        raise ConfigError(f"n must be positive, got {n}", line=gr["n"][1])
    if n % 2 or n < MIN_POINTS:
        raise ConfigError(f"n must be even and >= {MIN_POINTS} (parity rule), got {n}",
                          line=gr["n"][1])
    # default domain puts the uniform unit-mass density mid-interval
    length = 1.0 if model[0] == "all" else default_length(resolve_model(model[0]))
    if "length" in gr:
        length = _convert(float, gr["length"][0], "length", gr["length"][1])
        if not length > 0:
            raise ConfigError(f"length must be positive, got {length}", line=gr["length"][1])
    dealias = 2.0 / 3.0
    if "dealias" in gr:
        dealias = _convert(float, gr["dealias"][0], "dealias", gr["dealias"][1])
        if not 0 < dealias <= 1:
            raise ConfigError(f"dealias must lie in (0, 1], got {dealias}",
                              line=gr["dealias"][1])

    notes = []
    fields = {}
    for sec in sections:
        if not sec.startswith("field."):
            continue
        name = sec[len("field."):]
        if name not in DENSITY_FIELDS + POTENTIAL_FIELDS:
            raise ConfigError(f"unknown field {name!r}", line=where[sec])
        modes, mean = [], None
        for key, value, lineno in sections[sec]:
            if key == "mode":
                modes.append(_parse_mode(value, lineno))
            elif key == "mean":
                if name not in DENSITY_FIELDS:
                    raise ConfigError(f"potential {name!r} takes no mean (forced to zero)",
                                      line=lineno)
                mean = _convert(float, value, key, lineno)
            else:
                raise ConfigError(f"unknown key {key!r} in [{sec}]", line=lineno)
        if name in DENSITY_FIELDS:
            if mean is None:
                notes.append(f"{name}: mean set to 1/length = {1.0 / length!r}")
            elif mean != 1.0 / length:
                notes.append(f"{name}: mean {mean!r} adjusted to 1/length = {1.0 / length!r}")
        fields[name] = FieldSpec(name, tuple(modes), mean)

    for req in REQUIRED_FIELDS[kind]:
        if req not in fields:
            raise ConfigError(f"kind {kind!r} needs section [field.{req}]", line=kline)

    allowed = RUN_KEYS[kind]
    run = {k: v[1] for k, v in allowed.items()}
    run_lines = {}
    for key, (value, lineno) in single("run", set(allowed)).items():
        run[key] = _convert(allowed[key][0], value, key, lineno)
        run_lines[key] = lineno

    s = Scenario(kind=kind, model=model[0], n=n, length=length, dealias=dealias,
                 fields=fields, run=run, seed=seed,
                 out_dir=sc.get("out_dir", ("out", None))[0], notes=notes)
    _validate(s, where.get("run"), run_lines)
    return s


def _validate(s: Scenario, line, run_lines=None):
    """Cross-field checks that need the assembled scenario."""
    try:
        if s.kind in ("flow", "geodesic", "transport"):
            from .dynamics import FlowConfig
            FlowConfig(**s.run)
        if s.kind == "curvature":
            from .curvature import Method
            if s.run["method"] not in {m.value for m in Method}:
                raise ConfigError(f"unknown method {s.run['method']!r} "
                                  f"(one of {', '.join(m.value for m in Method)})",
                                  line=(run_lines or {}).get("method", line))
        if s.kind == "identity_suite":
            for name in s.run["models"]:
                resolve_model(name)
            if s.run["samples"] < 0:
                raise ConfigError("samples must be >= 0")
        if s.kind == "oracle" and s.run["samples"] < 1:
            raise ConfigError("samples must be >= 1")
        model = None if s.model == "all" else s.mobility()
        for name, spec in s.fields.items():
            if spec.is_density and model is not None:
                model.check(s.density(name).values, name)
    except ConfigError as exc:
        if exc.line is not None:
            raise
        raise ConfigError(exc.args[0], line=_blame(str(exc), run_lines, line)) from None
    except (HydrogeoError, ValueError) as exc:
        raise ConfigError(str(exc), line=_blame(str(exc), run_lines, line)) from None


def _blame(message, run_lines, default):
    """Line of the first run key named in ``message``."""
    for key, lineno in (run_lines or {}).items():
        if key in message.split():
            return lineno
    return default


def load_config(path) -> Scenario:
    with open(path) as fh:
        return parse_config(fh.read())
