"""Flat ``key = value`` scenario files.

Every key maps to one field of the problem or solver.  Unknown keys are
rejected so a misspelling never falls back to a default silently.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .delays import constant_delay, integral_delay, multi_point_delay, p_of_integral_delay, point_delay
from .errors import InvalidArgument
from .history import InitialFunction, load_initial_csv
from .integrator import ProblemSpec, SolverOptions
from .nonlinearity import BirthFunction, Kernel
from .spectral import build_dirichlet_laplacian_1d, to_modal

_SECTION = "scenario"

# key -> (parser, default); None default means "unset"
_FLOAT, _INT, _STR = "float", "int", "str"
_FLIST = "float_list"
SCHEMA: dict[str, tuple[str, object]] = {
    "domain.L": (_FLOAT, math.pi),
    "spectral.N": (_INT, 32),
    "spectral.grid": (_INT, None),
    "d": (_FLOAT, 0.0),
    "r": (_FLOAT, 1.0),
    "delay.variant": (_STR, "constant"),
    "delay.p": (_STR, "affine_norm"),
    "delay.a": (_FLIST, [0.0]),
    "delay.b": (_FLIST, [1.0]),
    "delay.r_k": (_FLIST, None),
    "delay.eta_ign": (_FLOAT, None),
    "delay.eta_min": (_FLOAT, None),
    "delay.tau": (_FLOAT, 0.0),
    "b.variant": (_STR, "zero"),
    "b.p": (_FLOAT, 2.0),
    "b.c": (_FLOAT, 0.0),
    "b.amplitude": (_FLOAT, 1.0),
    "b.w_max": (_FLOAT, 50.0),
    "kernel.variant": (_STR, "dirac"),
    "kernel.alpha": (_FLOAT, 0.1),
    "phi.preset": (_STR, "mode"),
    "phi.mode": (_INT, 1),
    "phi.amplitude": (_FLOAT, 1.0),
    "phi.omega": (_FLOAT, 0.0),
    "phi.wobble": (_FLOAT, 0.0),
    "phi.csv": (_STR, None),
    "solver.h": (_FLOAT, 1e-2),
    "solver.mode": (_STR, "etd1"),
    "solver.picard_tol": (_FLOAT, 1e-12),
    "solver.picard_max_iter": (_INT, 200),
    "solver.macro_step": (_FLOAT, None),
    "T": (_FLOAT, 5.0),
    "output.path": (_STR, "trajectory.csv"),
    "output.delta_list": (_FLIST, [0.0, 0.25]),
    "output.probes": (_FLIST, []),
}

ALIASES = {"p": "b.p", "c": "b.c", "alpha": "kernel.alpha", "eta_ign": "delay.eta_ign",
           "h": "solver.h", "N": "spectral.N", "tau": "delay.tau"}

PHI_PRESETS = ("mode", "parabola", "spectrum", "csv")


class ConfigError(InvalidArgument):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}" if key and not message.startswith(key) else message)
        self.key = key


def _parse_value(key: str, kind: str, raw: str):
    raw = raw.strip()
    try:
        if kind == _FLOAT:
            return float(raw)
        if kind == _INT:
            v = float(raw)
            if v != int(v):
                raise ValueError
            return int(v)
        if kind == _FLIST:
            return [float(x) for x in raw.replace(";", ",").split(",") if x.strip()]
        return raw
    except ValueError:
        raise ConfigError(key, f"cannot parse {raw!r} as {kind}") from None


def _format_value(kind: str, v) -> str:
    if kind == _FLOAT:
        return repr(float(v))
    if kind == _FLIST:
        return ", ".join(repr(float(x)) for x in v)
    return str(v)


def resolve_key(name: str) -> str:
    if name in SCHEMA:
        return name
    if name in ALIASES:
        return ALIASES[name]
    raise ConfigError(name, f"unknown config key {name!r}")


@dataclass
class ScenarioConfig:
    values: dict = field(default_factory=dict)
    base_dir: Path = field(default_factory=Path.cwd)

    @classmethod
    def from_text(cls, text: str, base_dir: Path | None = None) -> "ScenarioConfig":
        cp = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                       comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
        cp.optionxform = str
        try:
            cp.read_string(f"[{_SECTION}]\n" + text)
        except configparser.Error as exc:
            raise ConfigError("", f"malformed config: {exc}") from None
        values = {}
        for key, raw in cp[_SECTION].items():
            if key not in SCHEMA:
                raise ConfigError(key, f"unknown config key {key!r}")
            values[key] = _parse_value(key, SCHEMA[key][0], raw)
        return cls(values, base_dir or Path.cwd())

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        path = resolve_config_path(path)
        return cls.from_text(path.read_text(), path.parent)

    def get(self, key: str):
        return self.values.get(key, SCHEMA[key][1])

    def with_value(self, key: str, raw: str) -> "ScenarioConfig":
        key = resolve_key(key)
        vals = dict(self.values)
        vals[key] = _parse_value(key, SCHEMA[key][0], raw)
        return ScenarioConfig(vals, self.base_dir)

    def to_text(self) -> str:
        """Every key with its effective value; parses back to the same scenario."""
        lines = []
        for key, (kind, _) in SCHEMA.items():
            v = self.get(key)
            if v is None:
                continue
            if key == "phi.csv":
                v = str((self.base_dir / v).resolve())
            lines.append(f"{key} = {_format_value(kind, v)}")
        return "\n".join(lines) + "\n"

    # -- building ----------------------------------------------------------
    def build(self) -> tuple[ProblemSpec, SolverOptions, float]:
        try:
            return self._build()
        except ConfigError:
            raise
        except InvalidArgument as exc:
            msg = str(exc)
            key = msg.split(":")[0] if msg.split(":")[0] in SCHEMA else ""
            raise ConfigError(key, msg) from None

    def _build(self):
        g = self.get
        op = build_dirichlet_laplacian_1d(g("domain.L"), g("spectral.N"), g("spectral.grid"))
        r = g("r")
        opts = SolverOptions(h=g("solver.h"), mode=g("solver.mode"), picard_tol=g("solver.picard_tol"),
                             picard_max_iter=g("solver.picard_max_iter"), macro_step=g("solver.macro_step"))
        eta = self._delay(r)
        b = BirthFunction(g("b.variant"), p=g("b.p"), c=g("b.c"), amplitude=g("b.amplitude"), w_max=g("b.w_max"))
        kern = Kernel(g("kernel.variant"), alpha=g("kernel.alpha"))
        phi = self._phi(op, r, opts.h)
        T = g("T")
        if not T > 0:
            raise ConfigError("T", f"T must be positive, got {T}")
        return ProblemSpec(op, g("d"), r, eta, b, kern, phi), opts, T

    def _delay(self, r: float):
        g = self.get
        variant = g("delay.variant")
        a, bb = g("delay.a"), g("delay.b")
        eta_min = g("delay.eta_min")
        if variant == "constant":
            return constant_delay(g("delay.tau"), r)
        if variant in ("point", "multi_point"):
            offsets = g("delay.r_k")
            if not offsets:
                raise ConfigError("delay.r_k", "point delays need delay.r_k")
            if variant == "point" and len(offsets) != 1:
                raise ConfigError("delay.r_k", "a point delay takes exactly one offset")

            def pick(vals, i, key):
                if len(vals) == 1:
                    return vals[0]
                if len(vals) != len(offsets):
                    raise ConfigError(key, f"{key} needs 1 or {len(offsets)} entries")
                return vals[i]

            if variant == "point":
                return point_delay(g("delay.p"), {"a": a[0], "b": bb[0]}, r, offset=offsets[0],
                                   eta_ign=g("delay.eta_ign"), eta_min=eta_min)
            terms = [(g("delay.p"), {"a": pick(a, i, "delay.a"), "b": pick(bb, i, "delay.b")}, off)
                     for i, off in enumerate(offsets)]
            return multi_point_delay(terms, r, eta_ign=g("delay.eta_ign"), eta_min=eta_min)
        if variant in ("integral_of_p", "p_of_integral"):
            ign = g("delay.eta_ign")
            if ign is None:
                raise ConfigError("delay.eta_ign", f"{variant} delays need delay.eta_ign")
            ctor = integral_delay if variant == "integral_of_p" else p_of_integral_delay
            return ctor(g("delay.p"), {"a": a[0], "b": bb[0]}, ign, r, eta_min=eta_min)
        raise ConfigError("delay.variant", f"unknown delay variant {variant!r}")

    def _phi(self, op, r: float, h: float) -> InitialFunction:
        g = self.get
        preset = g("phi.preset")
        n_cells = max(1, math.ceil(r / h - 1e-9))
        amp, omega, wobble = g("phi.amplitude"), g("phi.omega"), g("phi.wobble")
        if preset == "csv":
            path = g("phi.csv")
            if not path:
                raise ConfigError("phi.csv", "phi.preset=csv needs phi.csv")
            return load_initial_csv(self.base_dir / path, op)
        if preset == "mode":
            k = g("phi.mode")
            if not 1 <= k <= op.n_modes:
                raise ConfigError("phi.mode", f"mode {k} outside 1..{op.n_modes}")
            shape = np.zeros(op.n_modes)
            shape[k - 1] = 1.0
        elif preset == "parabola":
            x = op.grid
            shape = to_modal(op, 4.0 * x * (op.length - x) / op.length ** 2)
            shape /= np.linalg.norm(shape)
        elif preset == "spectrum":
            k = np.arange(1, op.n_modes + 1)
            shape = (-1.0) ** (k + 1) / k ** 2
            shape /= np.linalg.norm(shape)
        else:
            raise ConfigError("phi.preset", f"unknown preset {preset!r}; choose from {PHI_PRESETS}")
        return InitialFunction.from_callable(lambda s: amp * (1.0 + wobble * math.sin(omega * s)) * shape,
                                             r, n_cells)


def preset_names() -> list[str]:
    return sorted(p.name for p in resources.files("sdd_sim").joinpath("presets").iterdir()
                  if p.name.endswith(".cfg"))


def preset_text(name: str) -> str:
    name = name if name.endswith(".cfg") else name + ".cfg"
    res = resources.files("sdd_sim").joinpath("presets", name)
    if not res.is_file():
        raise ConfigError("", f"no bundled preset {name!r}; available: {preset_names()}")
    return res.read_text()


def resolve_config_path(path) -> Path:
    """A config path, falling back to the bundled presets by name."""
    p = Path(path)
    if p.is_file():
        return p
    name = p.name if p.name.endswith(".cfg") else p.name + ".cfg"
    res = resources.files("sdd_sim").joinpath("presets", name)
    if len(p.parts) == 1 and res.is_file():
        with resources.as_file(res) as real:
            return Path(real)
    raise ConfigError("", f"config file {str(path)!r} not found")


def load_preset(name: str) -> ScenarioConfig:
    return ScenarioConfig.load(name)
