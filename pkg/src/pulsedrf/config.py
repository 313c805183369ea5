"""Run configuration: file schema, unit parsing, presets and conversion to
engine inputs.

Config files are flat ``key = value`` documents; ``#`` starts a comment and
list values are comma separated. Example::

    schema_version = 1
    preset = fig3
    detuning = -0.33 meV, 0.33 meV
    phonons = off, on

Two unit modes exist. ``dimensionless`` takes bare numbers in one arbitrary
energy unit (``hbar = 1``; the presets use ``omega0 = 1`` so rates read as
fractions of the peak Rabi frequency). ``qd-units`` takes energies in meV
(``ueV`` accepted), times in ps, coupling in ps^2 and temperatures in K.
"""

from dataclasses import asdict, dataclass, fields, replace
import itertools
import math
import re

import numpy as np

from . import units
from .drive import SHAPES, PulseSpec
from .lindblad import make_config
from .polaron import PhononParams

SCHEMA_VERSION = 1
MODES = ("dimensionless", "qd-units")
PRESETS = ("fig1", "fig2", "fig3", "custom")
NORMALIZATIONS = ("none", "row-resonant", "no-phonon")


class ValidationError(ValueError):
    """Configuration problem; ``line`` points at the offending input line."""

    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = ""
        if line is not None:
            where = f"{source or '<config>'}:{line}: "
        super().__init__(where + message)


@dataclass(frozen=True)
class RunConfig:
    """Validated run description. Values are stored in the mode's units."""

    mode: str = "dimensionless"
    preset: str = "custom"
    schema_version: int = SCHEMA_VERSION
    shape: str = "gaussian"
    omega0: float = None
    thetas: tuple = (5 * math.pi,)
    detunings: tuple = (0.0,)
    gamma: float = None
    gamma_primes: tuple = (0.0,)
    temperatures: tuple = (4.0,)
    phonons: tuple = (False,)
    alpha: float = 0.0
    omega_b: float = 1.0
    t_center: float = 0.0
    rise: float = None
    cw_window: float = None
    n_detunings: int = 2001
    detuning_extent: float = 2.5
    substeps: int = 5
    points_per_unit: float = 10.0
    normalization: str = "none"
    semilog: bool = False
    output: str = "results"

    def points(self):
        """Sweep points in a fixed order (Theta, Delta, gamma', T, phonons)."""
        temps = self.temperatures if any(self.phonons) else self.temperatures[:1]
        out = []
        for theta, delta, gp, temp, ph in itertools.product(
                self.thetas, self.detunings, self.gamma_primes, temps, self.phonons):
            out.append(SweepPoint(len(out), theta, delta, gp, temp, ph))
        return out

    def to_dict(self):
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValidationError(f"unknown keys {sorted(extra)}")
        kw = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
        return validate(cls(**kw))

    @property
    def energy_unit_mev(self):
        return 1.0 if self.mode == "qd-units" else None


@dataclass(frozen=True)
class SweepPoint:
    index: int
    theta: float
    delta: float
    gamma_prime: float
    temperature: float
    phonons: bool

    @property
    def name(self):
        return f"p{self.index:03d}"


# --- value parsing -----------------------------------------------------------

_ENERGY = {"mev": 1.0, "uev": 1e-3, "µev": 1e-3, "μev": 1e-3, "ev": 1e3}
_TIME = {"ps": 1.0, "fs": 1e-3, "ns": 1e3}
_TIME2 = {"ps^2": 1.0, "ps2": 1.0}
_TEMP = {"k": 1.0}
_DIMS = {"energy": _ENERGY, "time": _TIME, "time2": _TIME2, "temperature": _TEMP}
_FLOAT = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_QUANTITY = re.compile(rf"^\s*({_FLOAT}(?:\s*/\s*{_FLOAT})?)\s*(\S*)\s*$")


def parse_number(text):
    """Float from ``"0.25"``, ``"1/40"`` or ``"-3e-2"``."""
    parts = text.replace(" ", "").split("/")
    if len(parts) > 2:
        raise ValueError(f"cannot parse number {text!r}")
    try:
        val = float(parts[0])
        if len(parts) == 2:
            val /= float(parts[1])
    except ValueError:
        raise ValueError(f"cannot parse number {text!r}") from None
    return val


def parse_angle(text):
    """Pulse area from ``"5pi"``, ``"5*pi"``, ``"pi/2"``, ``"pi"`` or radians."""
    t = text.strip().lower().replace(" ", "").replace("π", "pi")
    m = re.fullmatch(r"([-+]?[\d.eE+-]*)\*?pi(?:/([\d.]+))?", t)
    if m:
        coef = float(m.group(1)) if m.group(1) not in ("", "+", "-") else float(m.group(1) + "1")
        div = float(m.group(2)) if m.group(2) else 1.0
        return coef * math.pi / div
    return parse_number(t)


def parse_quantity(text, dim, mode):
    """Number with optional unit suffix, returned in the mode's canonical unit."""
    m = _QUANTITY.match(text)
    if m is None:
        raise ValueError(f"cannot parse {text!r}")
    value = parse_number(m.group(1))
    suffix = m.group(2)
    if not suffix:
        return value
    if mode == "dimensionless":
        raise ValueError(f"unit {suffix!r} given in dimensionless mode")
    table = _DIMS[dim]
    key = suffix.lower()
    if key not in table:
        for other, tab in _DIMS.items():
            if key in tab:
                raise ValueError(f"unit mismatch: {suffix!r} is a {other} unit, expected {dim}")
        raise ValueError(f"unknown unit {suffix!r}")
    return value * table[key]


def parse_bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected on/off, got {text!r}")


def _split(text):
    return [p.strip() for p in text.split(",") if p.strip()]


# key -> (field, kind, is_list)
_KEYS = {
    "schema_version": ("schema_version", "int", False),
    "mode": ("mode", "str", False),
    "preset": ("preset", "str", False),
    "shape": ("shape", "str", False),
    "omega0": ("omega0", "energy", False),
    "theta": ("thetas", "angle", True),
    "detuning": ("detunings", "energy", True),
    "gamma": ("gamma", "energy", False),
    "gamma_prime": ("gamma_primes", "energy", True),
    "temperature": ("temperatures", "temperature", True),
    "phonons": ("phonons", "bool", True),
    "alpha": ("alpha", "time2", False),
    "omega_b": ("omega_b", "energy", False),
    "t_center": ("t_center", "time", False),
    "rise": ("rise", "time", False),
    "cw_window": ("cw_window", "time", False),
    "n_detunings": ("n_detunings", "int", False),
    "detuning_extent": ("detuning_extent", "float", False),
    "substeps": ("substeps", "int", False),
    "points_per_unit": ("points_per_unit", "float", False),
    "normalization": ("normalization", "str", False),
    "semilog": ("semilog", "bool", False),
    "output": ("output", "str", False),
}


def _convert(kind, text, mode):
    if kind == "str":
        return text.strip()
    if kind == "int":
        v = parse_number(text)
        if v != int(v):
            raise ValueError(f"expected an integer, got {text!r}")
        return int(v)
    if kind == "float":
        return parse_number(text)
    if kind == "bool":
        return parse_bool(text)
    if kind == "angle":
        return parse_angle(text)
    return parse_quantity(text, kind, mode)


def preset_values(name):
    """Field values a preset expands to (in the preset's own mode)."""
    pi = math.pi
    if name in ("fig1", "fig2"):
        return dict(mode="dimensionless", preset=name, shape="gaussian", omega0=1.0, gamma=1.0 / 40.0,
                    gamma_primes=(0.0,) if name == "fig1" else (0.0, 0.1),
                    thetas=(2 * pi, 4 * pi, 8 * pi, 16 * pi), detunings=(0.0, 0.33),
                    phonons=(False,), normalization="row-resonant", semilog=name == "fig2")
    if name == "fig3":
        return dict(mode="qd-units", preset=name, shape="gaussian", omega0=1.0, gamma=0.010,
                    gamma_primes=(0.0,), thetas=(5 * pi,), detunings=(0.0, 0.33, -0.33),
                    temperatures=(4.0,), alpha=0.06, omega_b=1.0, phonons=(False, True),
                    normalization="no-phonon")
    if name == "custom":
        return dict(preset="custom")
    raise ValidationError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")


def parse_text(text, source=None, base=None):
    """Parse a config document. ``base`` holds field overrides applied first."""
    entries = []
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"expected 'key = value', got {line!r}", lineno, source)
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lower()
        if key not in _KEYS:
            raise ValidationError(f"unknown key {key!r}", lineno, source)
        if key in seen:
            raise ValidationError(f"duplicate key {key!r} (first on line {seen[key]})", lineno, source)
        seen[key] = lineno
        entries.append((lineno, key, value))
    values = dict(base or {})
    lines = {}
    # preset and mode first so units resolve against the right mode
    for lineno, key, value in entries:
        if key == "preset":
            try:
                values.update(preset_values(value.strip().lower()))
            except ValidationError as exc:
                raise ValidationError(str(exc), lineno, source) from None
    for lineno, key, value in entries:
        if key == "mode":
            values["mode"] = value.strip().lower()
            lines["mode"] = lineno
    mode = values.get("mode", "dimensionless")
    if mode not in MODES:
        raise ValidationError(f"unknown mode {mode!r}; choose from {', '.join(MODES)}",
                              lines.get("mode"), source)
    for lineno, key, value in entries:
        if key in ("preset", "mode"):
            continue
        name, kind, is_list = _KEYS[key]
        try:
            if is_list:
                items = _split(value)
                if not items:
                    raise ValueError("empty list")
                values[name] = tuple(_convert(kind, v, mode) for v in items)
            else:
                values[name] = _convert(kind, value, mode)
        except ValueError as exc:
            raise ValidationError(f"{key}: {exc}", lineno, source) from None
        lines[name] = lineno
    try:
        cfg = RunConfig(**values)
    except TypeError as exc:
        raise ValidationError(str(exc), None, source) from None
    return validate(cfg, lines, source)


def load_config(path, base=None):
    with open(path, encoding="utf-8") as fh:
        return parse_text(fh.read(), source=str(path), base=base)


def from_preset(name, **overrides):
    values = preset_values(name)
    values.update(overrides)
    return validate(RunConfig(**values))


def validate(cfg, lines=None, source=None):
    lines = lines or {}

    def fail(msg, name=None):
        raise ValidationError(msg, lines.get(name), source)

    if cfg.schema_version != SCHEMA_VERSION:
        fail(f"unsupported schema_version {cfg.schema_version} (expected {SCHEMA_VERSION})", "schema_version")
    if cfg.mode not in MODES:
        fail(f"unknown mode {cfg.mode!r}", "mode")
    if cfg.preset not in PRESETS:
        fail(f"unknown preset {cfg.preset!r}", "preset")
    if cfg.shape not in SHAPES:
        fail(f"unknown shape {cfg.shape!r}; choose from {', '.join(SHAPES)}", "shape")
    if cfg.omega0 is None:
        fail("omega0 is required (peak Rabi frequency)", "omega0")
    if not cfg.omega0 > 0:
        fail("omega0 must be positive", "omega0")
    if cfg.gamma is None:
        fail("gamma is required (spontaneous emission rate)", "gamma")
    if cfg.gamma < 0:
        fail("gamma must be non-negative", "gamma")
    if cfg.shape == "cw" and not cfg.gamma > 0:
        fail("cw runs need gamma > 0 to reach a steady state", "gamma")
    if any(g < 0 for g in cfg.gamma_primes):
        fail("gamma_prime must be non-negative", "gamma_primes")
    if cfg.shape != "cw" and any(not t > 0 for t in cfg.thetas):
        fail("pulse area theta must be positive", "thetas")
    if any(t < 0 for t in cfg.temperatures):
        fail("temperature must be non-negative", "temperatures")
    if any(cfg.phonons):
        if cfg.mode != "qd-units":
            fail("phonons need qd-units mode (temperatures are in kelvin)", "phonons")
        if cfg.alpha < 0:
            fail("alpha must be non-negative", "alpha")
        if not cfg.omega_b > 0:
            fail("omega_b must be positive", "omega_b")
    if cfg.n_detunings < 3:
        fail("n_detunings must be at least 3", "n_detunings")
    if not cfg.detuning_extent > 0:
        fail("detuning_extent must be positive", "detuning_extent")
    if cfg.substeps < 1:
        fail("substeps must be a positive integer", "substeps")
    if not cfg.points_per_unit >= 1:
        fail("points_per_unit must be at least 1", "points_per_unit")
    if cfg.normalization not in NORMALIZATIONS:
        fail(f"unknown normalization {cfg.normalization!r}", "normalization")
    if cfg.rise is not None and not cfg.rise > 0:
        fail("rise must be positive", "rise")
    if cfg.cw_window is not None and not cfg.cw_window > 0:
        fail("cw_window must be positive", "cw_window")
    return cfg


# --- conversion to engine inputs ---------------------------------------------

def _time_scale(cfg):
    """Multiply a time in mode units by this to get internal units."""
    return units.ps_to_internal(1.0) if cfg.mode == "qd-units" else 1.0


def pulse_for(cfg, theta):
    ts = _time_scale(cfg)
    rise = None if cfg.rise is None else cfg.rise * ts
    area = 1.0 if cfg.shape == "cw" else theta
    return PulseSpec(cfg.shape, cfg.omega0, area, cfg.t_center * ts, rise)


def phonon_params_for(cfg, point):
    if not point.phonons:
        return None
    return PhononParams.from_lab(cfg.alpha, cfg.omega_b, point.temperature)


def sim_config_for(cfg, point):
    """Engine :class:`~pulsedrf.lindblad.SimConfig` for one sweep point."""
    pulse = pulse_for(cfg, point.theta)
    grid_kw = dict(substeps=cfg.substeps, points_per_unit=cfg.points_per_unit)
    if cfg.cw_window is not None:
        grid_kw["cw_window"] = cfg.cw_window * _time_scale(cfg)
    return make_config(pulse, point.delta, cfg.gamma, point.gamma_prime,
                       phonon=phonon_params_for(cfg, point), **grid_kw)


def detuning_axis(cfg):
    return np.linspace(-cfg.detuning_extent * cfg.omega0, cfg.detuning_extent * cfg.omega0, cfg.n_detunings)


def to_dimensionless(cfg):
    """Phonon-free qd-units config rescaled so that ``omega0 = 1``."""
    if cfg.mode == "dimensionless":
        return cfg
    if any(cfg.phonons):
        raise ValidationError("phonon runs have no dimensionless form")
    e = cfg.omega0
    t = units.ps_to_internal(1.0) * e  # ps -> units of 1/omega0
    return validate(replace(
        cfg, mode="dimensionless", preset="custom", omega0=1.0, gamma=cfg.gamma / e,
        detunings=tuple(d / e for d in cfg.detunings),
        gamma_primes=tuple(g / e for g in cfg.gamma_primes),
        t_center=cfg.t_center * t,
        rise=None if cfg.rise is None else cfg.rise * t,
        cw_window=None if cfg.cw_window is None else cfg.cw_window * t))


def to_qd_units(cfg, omega0_mev):
    """Dimensionless config mapped to qd units with ``omega0 = omega0_mev``."""
    if cfg.mode == "qd-units":
        return cfg
    e = omega0_mev / cfg.omega0
    t = 1.0 / (units.ps_to_internal(1.0) * e)
    return validate(replace(
        cfg, mode="qd-units", preset="custom", omega0=omega0_mev, gamma=cfg.gamma * e,
        detunings=tuple(d * e for d in cfg.detunings),
        gamma_primes=tuple(g * e for g in cfg.gamma_primes),
        t_center=cfg.t_center * t,
        rise=None if cfg.rise is None else cfg.rise * t,
        cw_window=None if cfg.cw_window is None else cfg.cw_window * t))


def with_overrides(cfg, **kw):
    return validate(replace(cfg, **kw))


def describe_units(cfg):
    if cfg.mode == "qd-units":
        return {"energy": "meV", "time": "ps", "spectral_density": "(hbar/meV)^2",
                "alpha": "ps^2", "temperature": "K"}
    return {"energy": "omega0-unit", "time": "1/energy", "spectral_density": "1/energy^2"}

