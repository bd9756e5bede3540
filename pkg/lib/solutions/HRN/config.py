"""Run configuration files.

A configuration is a properties file with ``[section]`` headers::

    # single-mode decay
    [grid]
    points = 64

    [time]
    T = 1.0
    dt = 0.001

Blank lines and lines starting with ``#`` are ignored; values may be quoted
and lists are comma separated. The accepted keys are listed in ``SCHEMA``.
"""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass, fields
from typing import Any, Callable, NamedTuple, Optional, Union

from ..errors import ConfigError
from ..GAL.forcing import PRESETS, Forcing
from ..GAL.galerkin_solver import FluidParams
from ..INI.initial_data import DensityField, InitialData, VacuumSpec, make_vacuum_density, make_velocity
from ..SPC.spectral_core import Grid, basis_capacity

VELOCITY_PRESETS = ("single_mode", "taylor_green", "random_seeded")
DENSITY_PRESETS = ("constant", "vacuum_disk", "vacuum_strip")
FORCING_KINDS = ("none", "preset", "file")


@dataclass(frozen=True)
class SimConfig:
    points: int
    T: float
    dt: float
    j: int
    mu: float
    dim: int = 2
    box_length: Union[float, tuple[float, ...]] = 2.0 * math.pi
    snapshot_stride: int = 10
    n: int = 8
    kappa: float = 1.0
    forcing_kind: str = "none"
    forcing_preset: str = "steady_shear"
    forcing_amplitude: float = 0.0
    forcing_path: Optional[str] = None
    forcing_t_start: float = 0.0
    forcing_t_end: float = 1.0
    velocity: str = "single_mode"
    velocity_amplitude: float = 1.0
    seed: int = 0
    modes: int = 4
    density: str = "constant"
    M: float = 1.0
    radius: float = math.pi / 2
    ramp_width: float = 0.5
    center: Optional[tuple[float, ...]] = None
    half_width: float = math.pi / 4
    output_directory: str = "out"
    cfl_limit: float = 0.9
    sweep_spread: float = 0.1
    gronwall_constant: Optional[float] = None
    margin: float = 2.0
    calibration_epsilon: float = 1e-2
    scale_tolerance: float = 0.1

    @property
    def grid(self) -> Grid:
        return Grid(self.dim, self.points, self.box_length)

    @property
    def steps(self) -> int:
        return int(round(self.T / self.dt))

    def forcing(self) -> Forcing:
        if self.forcing_kind == "none":
            return Forcing()
        return Forcing(
            kind=self.forcing_kind,
            preset=self.forcing_preset,
            amplitude=self.forcing_amplitude,
            t_start=self.forcing_t_start,
            t_end=self.forcing_t_end,
            path=self.forcing_path,
        )

    def fluid_params(self) -> FluidParams:
        return FluidParams(self.mu, self.kappa, self.forcing())

    def initial_data(self) -> InitialData:
        grid = self.grid
        u0 = make_velocity(grid, self.velocity, self.velocity_amplitude, self.seed, self.modes)
        if self.density == "constant":
            rho0 = DensityField.constant(grid, self.M)
        else:
            kind = "disk" if self.density == "vacuum_disk" else "strip"
            spec = VacuumSpec(kind, self.radius, self.half_width, self.ramp_width, self.center)
            rho0 = make_vacuum_density(grid, spec, self.M)
        return InitialData(rho0, u0, self.M, self.n)


class Key(NamedTuple):
    section: str
    name: str
    field: str
    parse: Callable[[str], Any]
    check: Optional[Callable[[Any], bool]] = None
    expected: str = ""


def _floats(text: str) -> Union[float, tuple[float, ...]]:
    parts = [part.strip() for part in text.split(",")]
    values = tuple(float(part) for part in parts)
    return values[0] if len(values) == 1 else values


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(part.strip()) for part in text.split(","))


def _positive(value: Any) -> bool:
    values = value if isinstance(value, tuple) else (value,)
    return all(v > 0 for v in values)


SCHEMA = (
    Key("grid", "dim", "dim", int, lambda v: v in (2, 3), "2 or 3"),
    Key("grid", "points", "points", int, lambda v: v >= 8 and v % 2 == 0, "an even integer >= 8"),
    Key("grid", "box_length", "box_length", _floats, _positive, "positive"),
    Key("time", "T", "T", float, lambda v: v >= 0, "non-negative"),
    Key("time", "dt", "dt", float, lambda v: v > 0, "positive"),
    Key("time", "snapshot_stride", "snapshot_stride", int, lambda v: v >= 1, ">= 1"),
    Key("galerkin", "j", "j", int, lambda v: v >= 1, ">= 1"),
    Key("galerkin", "n", "n", int, lambda v: v >= 1, ">= 1"),
    Key("fluid", "mu", "mu", float, lambda v: v > 0, "positive"),
    Key("fluid", "kappa", "kappa", float, lambda v: v >= 0, "non-negative"),
    Key("forcing", "kind", "forcing_kind", str, lambda v: v in FORCING_KINDS, f"one of {FORCING_KINDS}"),
    Key("forcing", "preset", "forcing_preset", str, lambda v: v in PRESETS, f"one of {PRESETS}"),
    Key("forcing", "amplitude", "forcing_amplitude", float),
    Key("forcing", "path", "forcing_path", str),
    Key("forcing", "t_start", "forcing_t_start", float),
    Key("forcing", "t_end", "forcing_t_end", float),
    Key("initial", "velocity", "velocity", str, lambda v: v in VELOCITY_PRESETS, f"one of {VELOCITY_PRESETS}"),
    Key("initial", "velocity_amplitude", "velocity_amplitude", float),
    Key("initial", "seed", "seed", int, lambda v: v >= 0, "non-negative"),
    Key("initial", "modes", "modes", int, lambda v: v >= 1, ">= 1"),
    Key("initial", "density", "density", str, lambda v: v in DENSITY_PRESETS, f"one of {DENSITY_PRESETS}"),
    Key("initial", "M", "M", float, lambda v: v > 0, "positive"),
    Key("initial", "radius", "radius", float, lambda v: v > 0, "positive"),
    Key("initial", "ramp_width", "ramp_width", float, lambda v: v >= 0, "non-negative"),
    Key("initial", "center", "center", _float_list),
    Key("initial", "half_width", "half_width", float, lambda v: v > 0, "positive"),
    Key("output", "directory", "output_directory", str),
    Key("tolerances", "cfl_limit", "cfl_limit", float, lambda v: v > 0, "positive"),
    Key("tolerances", "sweep_spread", "sweep_spread", float, lambda v: v > 0, "positive"),
    Key("stability", "gronwall_constant", "gronwall_constant", float, lambda v: v >= 0, "non-negative"),
    Key("stability", "margin", "margin", float, lambda v: v >= 1, ">= 1"),
    Key("stability", "calibration_epsilon", "calibration_epsilon", float, lambda v: v > 0, "positive"),
    Key("stability", "scale_tolerance", "scale_tolerance", float, lambda v: v > 0, "positive"),
)

REQUIRED = ("points", "T", "dt", "j", "mu")
_BY_LOCATION = {(key.section, key.name): key for key in SCHEMA}
_BY_FIELD = {key.field: key for key in SCHEMA}


def read_sections(filepath: str, sep: str = "=", comment_char: str = "#") -> dict[tuple[str, str], tuple[str, int]]:
    """Raw ``(section, key) -> (value, line number)`` entries of a config file."""
    entries: dict[tuple[str, str], tuple[str, int]] = {}
    section = None
    try:
        with open(filepath, "rt") as f:
            lines = f.readlines()
    except OSError as error:
        raise ConfigError(f"cannot read configuration file '{filepath}': {error.strerror}") from error
    for number, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith(comment_char):
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            section = stripped[1:-1].strip()
            continue
        if sep not in stripped:
            raise ConfigError(f"expected 'key {sep} value', found '{stripped}'", line=number)
        key, value = stripped.split(sep, 1)
        key = key.strip()
        value = value.strip().strip('"')
        if section is None:
            raise ConfigError("key outside of any [section]", key=key, line=number)
        if (section, key) not in _BY_LOCATION:
            raise ConfigError(f"unknown key in section [{section}]", key=key, line=number)
        if (section, key) in entries:
            raise ConfigError(f"duplicate key, first set on line {entries[section, key][1]}", key=key, line=number)
        entries[section, key] = (value, number)
    return entries


def _validate(values: dict[str, Any], lines: dict[str, int]) -> None:
    def fail(message: str, field: str) -> None:
        raise ConfigError(message, key=_BY_FIELD[field].name, line=lines.get(field))

    if values["T"] > 0 and values["dt"] > values["T"]:
        fail(f"dt = {values['dt']} exceeds the horizon T = {values['T']}", "dt")
    steps = values["T"] / values["dt"]
    if abs(steps - round(steps)) > 1e-9 * steps:
        fail(f"T = {values['T']} is not a whole number of steps dt = {values['dt']}", "dt")
    box = values["box_length"]
    if isinstance(box, tuple) and len(box) != values["dim"]:
        fail(f"box_length needs {values['dim']} entries", "box_length")
    center = values["center"]
    if center is not None and len(center) != values["dim"]:
        fail(f"center needs {values['dim']} entries", "center")
    grid = Grid(values["dim"], values["points"], box)
    capacity = basis_capacity(grid)
    if values["j"] > capacity:
        fail(f"j = {values['j']} exceeds the {capacity} modes this grid holds", "j")
    if 1.0 / values["n"] <= max(grid.spacing):
        fail(f"mollifier radius 1/{values['n']} is below the grid spacing {max(grid.spacing):.4g}", "n")
    if values["forcing_t_end"] <= values["forcing_t_start"]:
        fail("forcing window must end after it starts", "forcing_t_end")
    if values["forcing_kind"] == "file":
        path = values["forcing_path"]
        if path is None:
            fail("a file forcing needs a path", "forcing_kind")
        if not os.path.isfile(path):
            fail(f"forcing file '{path}' does not exist", "forcing_path")
        if not path.endswith((".npy", ".npz")):
            fail("forcing files must be .npy or .npz", "forcing_path")


def load_config(path: str) -> SimConfig:
    """Parse and validate a configuration file.

    Relative forcing paths are resolved against the file's directory.
    """
    values = {field.name: field.default for field in fields(SimConfig) if field.name not in REQUIRED}
    lines: dict[str, int] = {}
    for (section, name), (raw, number) in read_sections(path).items():
        key = _BY_LOCATION[section, name]
        try:
            value = key.parse(raw)
        except ValueError as error:
            raise ConfigError(f"cannot parse '{raw}'", key=name, line=number) from error
        if key.check is not None and not key.check(value):
            raise ConfigError(f"value {value!r} is out of range, expected {key.expected}", key=name, line=number)
        values[key.field] = value
        lines[key.field] = number
    missing = [name for name in REQUIRED if name not in lines]
    if missing:
        key = _BY_FIELD[missing[0]]
        raise ConfigError(f"missing required key in section [{key.section}]", key=key.name)
    if values["forcing_path"] is not None and not os.path.isabs(values["forcing_path"]):
        values["forcing_path"] = os.path.normpath(
            os.path.join(os.path.dirname(os.path.abspath(path)), values["forcing_path"])
        )
    _validate(values, lines)
    return SimConfig(**values)


def _format(value: Any) -> str:
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_config(config: SimConfig) -> str:
    """Canonical text of a config; loading it gives back an equal config."""
    out = []
    section = None
    for key in SCHEMA:
        value = getattr(config, key.field)
        if value is None:
            continue
        if key.section != section:
            if section is not None:
                out.append("")
            out.append(f"[{key.section}]")
            section = key.section
        out.append(f"{key.name} = {_format(value)}")
    return "\n".join(out) + "\n"


def config_hash(config: SimConfig) -> str:
    return hashlib.sha256(serialize_config(config).encode("utf-8")).hexdigest()
