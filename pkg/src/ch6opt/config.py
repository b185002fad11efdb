"""INI run configuration: parsing, validation, manifests and object builders.

A config is a set of ``[section]`` blocks with ``key = value`` lines.  Every
known key has a type and, unless required, a default; unknown sections and
keys are rejected.  The manifest written next to each run is the same
dialect with every default filled in, so re-running from it reproduces the
run.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .control import BoxConstraints, ControlProblem, CostConfig, OptimizeOptions
from .fieldio import read_field
from .potential import ModelParams, PotentialError, make_potential
from .spectral import Grid, GridField, SpectralField, build_grid
from .state import StepperConfig, n_steps, simulate

__all__ = ["ConfigError", "RunConfig", "parse_config", "parse_config_text", "SCHEMA"]

REQUIRED = object()


class ConfigError(ValueError):
    """Invalid configuration; the message names the file position or key."""


def _floats(s: str) -> list[float]:
    return [float(x) for x in s.replace(",", " ").split()]


def _ints(s: str) -> list[int]:
    return [int(x) for x in s.replace(",", " ").split()]


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _fmt(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


# section -> key -> (parser, default)
SCHEMA: dict[str, dict[str, tuple[Callable[[str], Any], Any]]] = {
    "grid": {
        "dim": (int, REQUIRED),
        "lengths": (_floats, REQUIRED),
        "modes": (_ints, REQUIRED),
    },
    "model": {
        "sigma": (float, REQUIRED),
        "nu": (float, 0.0),
        "potential": (str, "quartic"),
        "coefficients": (_floats, []),
        "lambda": (str, "auto"),
        "test_mode": (_bool, False),
    },
    "time": {
        "T": (float, REQUIRED),
        "dt": (float, REQUIRED),
        "stab_A": (float, 2.0),
        "stab_B": (float, 2.0),
        "dealias": (_bool, False),
        "blowup": (float, 1e3),
    },
    "initial": {
        "kind": (str, "cosine"),
        "mean": (float, 0.0),
        "amplitude": (float, 0.5),
        "mode": (int, 1),
        "seed": (int, 0),
        "path": (str, ""),
    },
    "control": {
        "u": (str, "0.0"),
        "alpha1": (float, 1.0),
        "alpha2": (float, 0.0),
        "alpha3": (float, 1e-2),
        "u_min": (float, -1.0),
        "u_max": (float, 1.0),
        "target": (str, "constant"),
        "phi_Q": (str, "0.0"),
        "phi_Omega": (str, "0.0"),
        "target_u_mean": (float, 0.5),
        "target_u_amplitude": (float, 0.0),
    },
    "optimize": {
        "max_iters": (int, 200),
        "step0": (float, 1.0),
        "armijo_c1": (float, 1e-4),
        "shrink": (float, 0.5),
        "tol": (float, 1e-4),
        "grow": (float, 2.0),
        "max_backtracks": (int, 40),
    },
    "check": {
        "directions": (int, 5),
        "eps": (float, 1e-4),
        "max_rel_err": (float, 1e-2),
        "seed": (int, 0),
        "taylor_eps": (_floats, [0.1, 0.03, 0.01]),
        "taylor_max_spread": (float, 4.0),
        "mass_tol": (float, 1e-12),
    },
    "io": {
        "output": (str, "out"),
        "stride": (int, 10),
    },
}

REQUIRED_SECTIONS = ("grid", "model", "time")


@dataclass
class RunConfig:
    values: dict[str, dict[str, Any]]
    defaults_applied: list[str] = field(default_factory=list)
    base_dir: Path = field(default_factory=Path.cwd)
    source: str = "<string>"

    def __getitem__(self, section: str) -> dict[str, Any]:
        return self.values[section]

    # -- manifest -----------------------------------------------------------------

    def manifest(self, header: str = "") -> str:
        lines = []
        if header:
            lines += [f"# {h}" for h in header.splitlines()]
        if self.defaults_applied:
            lines.append("# defaults applied: " + ", ".join(self.defaults_applied))
        for sec in SCHEMA:
            lines.append(f"[{sec}]")
            for key in SCHEMA[sec]:
                v = self.values[sec][key]
                if key in ("path", "u", "phi_Q", "phi_Omega") and v and not _is_number(v):
                    v = str(self.resolve(v))
                if sec == "io" and key == "output":
                    v = str(self.resolve(v))
                lines.append(f"{key} = {_fmt(v)}")
            lines.append("")
        return "\n".join(lines)

    def resolve(self, p: str) -> Path:
        q = Path(p)
        return q if q.is_absolute() else (self.base_dir / q)

    # -- builders -----------------------------------------------------------------

    def grid(self) -> Grid:
        g = self["grid"]
        return build_grid(g["dim"], g["lengths"], g["modes"])

    def params(self) -> ModelParams:
        m = self["model"]
        lam = None if m["lambda"] == "auto" else float(m["lambda"])
        pot = make_potential(m["potential"], m["coefficients"] or None, lam)
        return ModelParams(m["sigma"], m["nu"], pot, m["test_mode"])

    def stepper(self) -> StepperConfig:
        t = self["time"]
        return StepperConfig(t["dt"], t["stab_A"], t["stab_B"], t["dealias"], t["blowup"])

    @property
    def T(self) -> float:
        return self["time"]["T"]

    @property
    def n_steps(self) -> int:
        return n_steps(self.T, self["time"]["dt"])

    def phi0(self, grid: Grid | None = None) -> SpectralField:
        grid = grid or self.grid()
        ini = self["initial"]
        kind = ini["kind"]
        if kind == "constant":
            return grid.constant(ini["mean"])
        if kind == "cosine":
            x = grid.mesh[0]
            vals = ini["mean"] + ini["amplitude"] * np.cos(np.pi * ini["mode"] * x / grid.lengths[0])
            return GridField(grid, vals).spectral()
        if kind == "random":
            return smooth_random_field(grid, ini["seed"], ini["amplitude"], ini["mean"])
        if kind == "file":
            f = read_field(self.resolve(ini["path"]), grid)
            return f if isinstance(f, SpectralField) else f.spectral()
        raise ConfigError(f"initial.kind must be constant, cosine, random or file, got {kind!r}")

    def _field_or_number(self, text: str, grid: Grid):
        if _is_number(text):
            return float(text)
        f = read_field(self.resolve(text), grid, "nodal")
        return f.values

    def control(self, grid: Grid | None = None):
        """Control for ``simulate``: a number, a nodal field file or a directory of per-step files."""
        grid = grid or self.grid()
        text = self["control"]["u"]
        if _is_number(text):
            return float(text)
        p = self.resolve(text)
        if p.is_dir():
            files = sorted(p.glob("*.ch6f"))
            if len(files) != self.n_steps:
                raise ConfigError(f"control directory {p} holds {len(files)} fields, expected {self.n_steps}")
            return np.array([read_field(f, grid, "nodal").values for f in files])
        return read_field(p, grid, "nodal").values

    def target_control(self, grid: Grid) -> np.ndarray:
        c = self["control"]
        x = grid.mesh[0]
        return c["target_u_mean"] + c["target_u_amplitude"] * np.cos(np.pi * x / grid.lengths[0])

    def cost(self, grid: Grid | None = None, phi0=None, params=None) -> CostConfig:
        grid = grid or self.grid()
        c = self["control"]
        a = (c["alpha1"], c["alpha2"], c["alpha3"])
        if c["target"] == "simulate":
            phi0 = phi0 if phi0 is not None else self.phi0(grid)
            params = params or self.params()
            ref = simulate(phi0, self.target_control(grid), params, self.stepper(), self.T, diagnostics=False)
            nodal = grid.inverse(ref.phi)
            return CostConfig(*a, phi_Q=nodal, phi_Omega=nodal[-1])
        return CostConfig(*a, phi_Q=self._field_or_number(c["phi_Q"], grid),
                          phi_Omega=self._field_or_number(c["phi_Omega"], grid))

    def box(self) -> BoxConstraints:
        c = self["control"]
        return BoxConstraints(c["u_min"], c["u_max"])

    def options(self) -> OptimizeOptions:
        return OptimizeOptions(**self["optimize"])

    def problem(self) -> ControlProblem:
        grid = self.grid()
        params = self.params()
        phi0 = self.phi0(grid)
        return ControlProblem(phi0, params, self.stepper(), self.T, self.cost(grid, phi0, params), self.box())


def _is_number(s: str) -> bool:
    try:
        float(s)
    except (TypeError, ValueError):
        return False
    return True


def smooth_random_field(grid: Grid, seed: int, amplitude: float, mean: float = 0.0, decay: float = 1.0) -> SpectralField:
    """Random field with exponentially decaying coefficients, scaled to ``max|phi - mean| = amplitude``."""
    rng = np.random.default_rng(seed)
    kk = np.zeros(grid.modes)
    for axis, n in enumerate(grid.modes):
        shape = [1] * grid.dim
        shape[axis] = n
        kk = kk + np.arange(n).reshape(shape)
    c = rng.standard_normal(grid.modes) * np.exp(-decay * kk)
    c[(0,) * grid.dim] = 0.0
    vals = grid.inverse(c)
    vals *= amplitude / max(float(np.max(np.abs(vals))), 1e-300)
    return GridField(grid, vals + mean).spectral()


def parse_config_text(text: str, source: str = "<string>", base_dir: Path | None = None) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"),
                                   comment_prefixes=("#", ";"), strict=True, empty_lines_in_values=False)
    cp.optionxform = str  # keys are case-sensitive (T, stab_A)
    try:
        cp.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:1: syntax error: key outside any [section]") from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigError(f"{source}:{lineno}:1: syntax error: cannot parse {line.strip()!r}") from None
    except (configparser.DuplicateSectionError, configparser.DuplicateOptionError) as exc:
        raise ConfigError(f"{source}:{exc.lineno}:1: {exc.message if hasattr(exc, 'message') else exc}") from None

    values: dict[str, dict[str, Any]] = {}
    applied: list[str] = []
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"{source}: unknown section [{sec}]")
        for key in cp[sec]:
            if key not in SCHEMA[sec]:
                raise ConfigError(f"{source}: unknown key {sec}.{key}")
    for sec in REQUIRED_SECTIONS:
        if sec not in cp:
            raise ConfigError(f"{source}: missing required section [{sec}]")
    for sec, keys in SCHEMA.items():
        values[sec] = {}
        for key, (conv, default) in keys.items():
            if sec in cp and key in cp[sec]:
                raw = cp[sec][key]
                try:
                    values[sec][key] = conv(raw)
                except ValueError as exc:
                    raise ConfigError(f"{source}: {sec}.{key}: invalid value {raw!r} ({exc})") from None
            elif default is REQUIRED:
                raise ConfigError(f"{source}: missing required key {sec}.{key}")
            else:
                values[sec][key] = list(default) if isinstance(default, list) else default
                applied.append(f"{sec}.{key}")
    cfg = RunConfig(values, applied, base_dir or Path.cwd(), source)
    _validate(cfg)
    return cfg


def parse_config(path) -> RunConfig:
    """Read and validate a run configuration.

    Raises
    ------
    ConfigError
        Missing file, syntax error (with line and column) or a violated
        constraint (naming the key).
    """
    p = Path(path)
    try:
        text = p.read_text()
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {p}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from None
    return parse_config_text(text, str(p), p.resolve().parent)


def _validate(cfg: RunConfig) -> None:
    def fail(key, msg):
        raise ConfigError(f"{cfg.source}: {key} {msg}")

    g, m, t, c, o, ch, io = (cfg[s] for s in ("grid", "model", "time", "control", "optimize", "check", "io"))
    try:
        cfg.grid()
    except ValueError as exc:
        fail("grid", f"invalid: {exc}")
    if not m["sigma"] >= 0:
        fail("model.sigma", "must be >= 0 (reaction rate of the mass source; 0 only as a test mode)")
    if m["potential"] not in ("quartic", "polynomial", "linear-test"):
        fail("model.potential", "must be quartic, polynomial or linear-test")
    if m["lambda"] != "auto":
        try:
            lam = float(m["lambda"])
        except ValueError:
            fail("model.lambda", "must be a number or 'auto'")
        if not lam >= 0:
            fail("model.lambda", "must be >= 0 (convex split parameter)")
    try:
        cfg.params()
    except PotentialError as exc:
        fail("model.potential", f"violates the potential assumptions: {exc}")
    except ValueError as exc:
        fail("model", str(exc))
    if not t["dt"] > 0:
        fail("time.dt", "must be > 0")
    if not t["T"] > 0:
        fail("time.T", "must be > 0")
    for k in ("stab_A", "stab_B"):
        if not t[k] >= 0:
            fail(f"time.{k}", "must be >= 0")
    if not t["blowup"] > 0:
        fail("time.blowup", "must be > 0")
    try:
        n_steps(t["T"], t["dt"])
    except ValueError as exc:
        fail("time.T", str(exc))
    if cfg["initial"]["kind"] not in ("constant", "cosine", "random", "file"):
        fail("initial.kind", "must be constant, cosine, random or file")
    if cfg["initial"]["kind"] == "file" and not cfg["initial"]["path"]:
        fail("initial.path", "is required for kind = file")
    for k in ("alpha1", "alpha2", "alpha3"):
        if not c[k] >= 0:
            fail(f"control.{k}", "must be >= 0")
    if not (c["alpha1"] or c["alpha2"] or c["alpha3"]):
        fail("control.alpha1..alpha3", "must not all be zero")
    if c["u_min"] > c["u_max"]:
        fail("control.u_min", "must be <= control.u_max (the admissible set requires u_min <= u_max)")
    if c["target"] not in ("constant", "file", "simulate"):
        fail("control.target", "must be constant, file or simulate")
    try:
        OptimizeOptions(**o)
    except ValueError as exc:
        fail("optimize", str(exc))
    if ch["directions"] < 1:
        fail("check.directions", "must be >= 1")
    if not ch["eps"] > 0:
        fail("check.eps", "must be > 0")
    if not ch["taylor_eps"] or any(not e > 0 for e in ch["taylor_eps"]):
        fail("check.taylor_eps", "must be a non-empty list of positive numbers")
    if io["stride"] < 1:
        fail("io.stride", "must be >= 1")
