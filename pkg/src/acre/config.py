"""Scenario configuration files, presets and initial conditions.

Configuration files are INI-style (``configparser`` syntax)::

    [scenario]
    name = channel          ; circle | square | channel | custom
    approach = coupled      ; i | ii | iii | coupled

    [mesh]
    nx = 100
    ny = 100

    [solver]
    dt = 1e-3
    stabilization = MG      ; number, MG, MG/<k> or <k>*MG

    [boundary.solute]
    left = dirichlet 0.25   ; neumann | dirichlet <value>

The preset named in ``[scenario] name`` supplies every default; keys given
in the file override it. Unknown sections and keys are errors.
"""

from __future__ import annotations

import configparser
import dataclasses
import math
import re
import warnings
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
from scipy.special import expit

from .chemistry import ArrheniusRate, ModelParams, RateBounds, constant_rate, mg_bound
from .coupling import APPROACH_ALIASES, APPROACHES, Problem, SimState, SolverConfig
from .mesh import BoundaryCondition, Dirichlet, Mesh, NEUMANN, SIDES


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field (and line when known)."""


@dataclass(frozen=True)
class ScenarioSection:
    name: str = "custom"
    approach: str = "iii"


@dataclass(frozen=True)
class MeshSection:
    nx: int = 100
    ny: int = 100
    lx: float = 1.0
    ly: float = 1.0


@dataclass(frozen=True)
class ModelSection:
    lam: float = 0.05
    gamma: float = 0.01
    k0: float = 1.0
    e_over_r: float = 1.0
    c_eq: float = 0.5
    m_m: float = 1.0
    diffusivity: float = 1.0
    cp_rho_f: float = 1.0
    cp_rho_m: float = 1.0
    k_f: float = 1.0
    k_m: float = 2.0
    # "arrhenius" or a constant rate value
    rate: str = "arrhenius"
    # admissible (T, c) box for bounding the Arrhenius rate
    t_min: float = 0.9
    t_max: float = 1.0
    c_min: float = 0.25
    c_max: float = 0.5


@dataclass(frozen=True)
class SolverSection:
    dt: float = 1e-4
    t_end: float = 1.0
    stabilization: str = "MG"
    coupling_stabilization: float = 1e-4
    tol_l: float = 1e-13
    tol_coup: float = 1e-6
    max_coupling_iters: int = 50
    max_lscheme_iters: int = 200
    linear_rtol: float = 1e-12
    mask_update: str = "step"
    phase_floor: float = 0.0


@dataclass(frozen=True)
class InitialSection:
    # circle | square | layer | uniform
    shape: str = "circle"
    center_x: float = 0.5
    center_y: float = 0.5
    radius: float = 0.3
    side: float = 0.5
    layer_thickness: float = 0.25
    phi: float = 1.0
    c: float = 0.5
    T: float = 1.0


@dataclass(frozen=True)
class BoundarySection:
    left: str = "neumann"
    right: str = "neumann"
    bottom: str = "neumann"
    top: str = "neumann"


@dataclass(frozen=True)
class OutputSection:
    directory: str = "output"
    snapshot_every: int = 100
    snapshot_times: str = "0.5, 1.0"
    diagnostics: str = "diagnostics.csv"


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: ScenarioSection = field(default_factory=ScenarioSection)
    mesh: MeshSection = field(default_factory=MeshSection)
    model: ModelSection = field(default_factory=ModelSection)
    solver: SolverSection = field(default_factory=SolverSection)
    initial: InitialSection = field(default_factory=InitialSection)
    boundary_solute: BoundarySection = field(default_factory=BoundarySection)
    boundary_temperature: BoundarySection = field(default_factory=BoundarySection)
    output: OutputSection = field(default_factory=OutputSection)

    # -- derived objects -------------------------------------------------
    def params(self) -> ModelParams:
        m = self.model
        names = [f.name for f in fields(ModelParams)]
        try:
            return ModelParams(**{n: getattr(m, n) for n in names})
        except ValueError as exc:
            raise ConfigError(f"[model] {exc}") from None

    def build_mesh(self) -> Mesh:
        m = self.mesh
        try:
            return Mesh(m.nx, m.ny, m.lx, m.ly)
        except ValueError as exc:
            raise ConfigError(f"[mesh] {exc}") from None

    def rate_bounds(self) -> RateBounds:
        m = self.model
        try:
            return RateBounds(m.t_min, m.t_max, m.c_min, m.c_max)
        except ValueError as exc:
            raise ConfigError(f"[model] rate bounds: {exc}") from None

    def rate(self):
        value = self.model.rate.strip().lower()
        if value == "arrhenius":
            return ArrheniusRate(self.params())
        try:
            return constant_rate(float(value))
        except ValueError:
            raise ConfigError(f"[model] rate: expected 'arrhenius' or a number, got {self.model.rate!r}") from None

    def mg(self) -> float:
        rate = self.rate()
        f_max = rate.max_abs(self.rate_bounds())
        return mg_bound(self.params(), f_max)

    def stabilization(self) -> float:
        return parse_stabilization(self.solver.stabilization, self.mg())

    def solver_config(self) -> SolverConfig:
        s = self.solver
        try:
            return SolverConfig(
                dt=s.dt,
                t_end=s.t_end,
                stabilization=self.stabilization(),
                coupling_stabilization=s.coupling_stabilization,
                tol_l=s.tol_l,
                tol_coup=s.tol_coup,
                max_coupling_iters=s.max_coupling_iters,
                max_lscheme_iters=s.max_lscheme_iters,
                linear_rtol=s.linear_rtol,
                approach=self.scenario.approach,
                mask_update=s.mask_update,
            )
        except ValueError as exc:
            raise ConfigError(f"[solver] {exc}") from None

    def problem(self) -> Problem:
        return Problem(
            mesh=self.build_mesh(),
            params=self.params(),
            rate=self.rate(),
            cfg=self.solver_config(),
            bc_c=parse_boundary(self.boundary_solute, "boundary.solute"),
            bc_T=parse_boundary(self.boundary_temperature, "boundary.temperature"),
            phase_floor=self.solver.phase_floor,
        )

    def snapshot_times(self) -> list[float]:
        text = self.output.snapshot_times.strip()
        if not text:
            return []
        try:
            return [float(v) for v in text.split(",")]
        except ValueError:
            raise ConfigError(f"[output] snapshot_times: expected comma-separated numbers, got {text!r}") from None

    def validate(self) -> list[str]:
        """Check every derived object; returns non-fatal warnings (also issued via :mod:`warnings`)."""
        mesh = self.build_mesh()
        p = self.params()
        self.problem()
        self.snapshot_times()
        if self.output.snapshot_every < 0:
            raise ConfigError("[output] snapshot_every must be nonnegative")
        if not 0 <= self.solver.phase_floor < 0.5:
            raise ConfigError("[solver] phase_floor must lie in [0, 0.5)")
        check_geometry(self, mesh)
        msgs = []
        lhs, rhs, ok = p.gamma_constraint()
        if not ok:
            msgs.append(
                f"solute bound condition 4*gamma <= lam*k0/m_m violated ({lhs:g} > {rhs:g}); "
                "concentration bounds are not guaranteed"
            )
        if p.lam < 2.0 * max(mesh.hx, mesh.hy):
            msgs.append(f"interface width lam={p.lam:g} is below two cells (h={max(mesh.hx, mesh.hy):g})")
        for m in msgs:
            warnings.warn(m, stacklevel=2)
        return msgs


# -- presets ---------------------------------------------------------------

_PHASE_ONLY = dict(
    model=dict(gamma=1.0, rate="0"),
    solver=dict(dt=1e-4, t_end=1.0, stabilization="MG", tol_l=1e-13, coupling_stabilization=0.0),
)

PRESETS: dict[str, dict[str, dict]] = {
    "custom": {},
    "circle": {
        "scenario": dict(approach="iii"),
        **_PHASE_ONLY,
        "initial": dict(shape="circle", radius=0.3),
    },
    "square": {
        "scenario": dict(approach="iii"),
        **_PHASE_ONLY,
        "initial": dict(shape="square", side=0.5),
    },
    # slowly dissolving circle used for the stabilization and time-step sweeps
    "dissolving-circle": {
        "scenario": dict(approach="iii"),
        "model": dict(gamma=0.1, rate="-0.1"),
        "solver": dict(dt=1e-3, t_end=1.0, stabilization="MG", tol_l=1e-13, coupling_stabilization=0.0),
        "initial": dict(shape="circle", radius=0.3),
    },
    "channel": {
        "scenario": dict(approach="coupled"),
        "model": dict(gamma=0.01, rate="arrhenius", t_min=0.9, t_max=1.0, c_min=0.25, c_max=0.5),
        "solver": dict(dt=1e-3, t_end=1.0, stabilization="MG", coupling_stabilization=1e-4, tol_l=1e-8, tol_coup=1e-6),
        "initial": dict(shape="layer", layer_thickness=0.25, c=0.5, T=1.0),
        "boundary_solute": dict(left="dirichlet 0.25"),
        "boundary_temperature": dict(left="dirichlet 0.9"),
    },
}

_SECTIONS = {
    "scenario": "scenario",
    "mesh": "mesh",
    "model": "model",
    "solver": "solver",
    "initial": "initial",
    "boundary.solute": "boundary_solute",
    "boundary.temperature": "boundary_temperature",
    "output": "output",
}


def preset(name: str) -> ScenarioConfig:
    if name not in PRESETS:
        raise ConfigError(f"[scenario] name: unknown scenario {name!r} (choose from {', '.join(PRESETS)})")
    cfg = ScenarioConfig(scenario=ScenarioSection(name=name))
    for attr, values in PRESETS[name].items():
        cfg = replace(cfg, **{attr: replace(getattr(cfg, attr), **values)})
    return cfg


# -- parsing ---------------------------------------------------------------

_L_PATTERN = re.compile(r"^\s*(?:(?P<num>[0-9.eE+-]+)\s*\*\s*)?MG\s*(?:/\s*(?P<den>[0-9.eE+-]+))?\s*$", re.I)


def parse_stabilization(text, mg: float) -> float:
    """Parse a stabilization value: a number, ``MG``, ``MG/k`` or ``k*MG``."""
    if isinstance(text, (int, float)):
        value = float(text)
    else:
        match = _L_PATTERN.match(str(text))
        try:
            if match:
                num = float(match["num"]) if match["num"] else 1.0
                den = float(match["den"]) if match["den"] else 1.0
                value = num * mg / den
            else:
                value = float(text)
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"[solver] stabilization: cannot parse {text!r}") from None
    if not (math.isfinite(value) and value >= 0):
        raise ConfigError(f"[solver] stabilization must be a nonnegative number, got {text!r}")
    return value


def parse_condition(text: str, where: str = "boundary"):
    words = str(text).split()
    if len(words) == 1 and words[0].lower() == "neumann":
        return NEUMANN
    if len(words) == 2 and words[0].lower() == "dirichlet":
        try:
            value = float(words[1])
        except ValueError:
            pass
        else:
            if math.isfinite(value):
                return Dirichlet(value)
    raise ConfigError(f"{where}: expected 'neumann' or 'dirichlet <value>', got {text!r}")


def parse_boundary(section: BoundarySection, where: str) -> BoundaryCondition:
    return BoundaryCondition(**{s: parse_condition(getattr(section, s), f"[{where}] {s}") for s in SIDES})


def _key_lines(text: str) -> dict[tuple[str, str], int]:
    """Map ``(section, key)`` to its line number in the raw file."""
    out = {}
    section = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            out[(section, "")] = no
        elif section is not None:
            key = re.split(r"[=:]", line, maxsplit=1)[0].strip().lower()
            out.setdefault((section, key), no)
    return out


def _convert(value: str, kind, where: str):
    try:
        if kind in (int, "int"):
            f = float(value)
            if f != int(f):
                raise ValueError
            return int(f)
        if kind in (float, "float"):
            return float(value)
    except ValueError:
        raise ConfigError(f"{where}: expected {'an integer' if kind in (int, 'int') else 'a number'}, got {value!r}") from None
    return value.strip()


def loads_config(text: str, source: str = "<string>") -> ScenarioConfig:
    """Parse configuration text; see the module docstring for the grammar."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    parser.optionxform = str.lower
    try:
        parser.read_string(text, source=source)
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigError(f"{source}:{lineno}: cannot parse {line.strip()!r}") from None
    except configparser.Error as exc:
        lineno = getattr(exc, "lineno", None)
        loc = f"{source}:{lineno}" if lineno else source
        raise ConfigError(f"{loc}: {exc.message if hasattr(exc, 'message') else exc}") from None
    lines = _key_lines(text)

    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"{source}:{lines.get((section, ''), '?')}: unknown section [{section}]")
    name = "custom"
    if parser.has_option("scenario", "name"):
        name = parser.get("scenario", "name").strip()
    try:
        cfg = preset(name)
    except ConfigError as exc:
        raise ConfigError(f"{source}:{lines.get(('scenario', 'name'), '?')}: {exc}") from None

    for section in parser.sections():
        attr = _SECTIONS[section]
        current = getattr(cfg, attr)
        kinds = {f.name.lower(): (f.name, f.type) for f in fields(current)}
        updates = {}
        for key, value in parser.items(section):
            where = f"{source}:{lines.get((section, key), '?')}: [{section}] {key}"
            if key not in kinds:
                raise ConfigError(f"{where}: unknown key")
            fname, kind = kinds[key]
            updates[fname] = _convert(value, kind, where)
        cfg = replace(cfg, **{attr: replace(current, **updates)})

    approach = cfg.scenario.approach
    if APPROACH_ALIASES.get(approach, approach) not in APPROACHES:
        raise ConfigError(
            f"{source}:{lines.get(('scenario', 'approach'), '?')}: [scenario] approach: unknown value {approach!r}"
        )
    cfg.validate()
    return cfg


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read configuration ({exc.strerror})") from None
    return loads_config(text, source=str(path))


def dumps_config(cfg: ScenarioConfig) -> str:
    """Serialize every field so that ``loads_config(dumps_config(cfg)) == cfg``."""
    out = []
    for section, attr in _SECTIONS.items():
        out.append(f"[{section}]")
        for f in fields(getattr(cfg, attr)):
            value = getattr(getattr(cfg, attr), f.name)
            out.append(f"{f.name} = {value!r}" if isinstance(value, float) else f"{f.name} = {value}")
        out.append("")
    return "\n".join(out)


def save_config(cfg: ScenarioConfig, path) -> None:
    Path(path).write_text(dumps_config(cfg))


def with_overrides(cfg: ScenarioConfig, **sections) -> ScenarioConfig:
    """Return a copy with ``section={key: value}`` overrides applied."""
    for attr, values in sections.items():
        cfg = replace(cfg, **{attr: dataclasses.replace(getattr(cfg, attr), **values)})
    return cfg


# -- initial conditions ----------------------------------------------------


def check_geometry(cfg: ScenarioConfig, mesh: Mesh) -> None:
    ini = cfg.initial
    lx, ly = mesh.lx, mesh.ly
    if ini.shape == "circle":
        if ini.radius <= 0 or not (
            ini.radius <= ini.center_x <= lx - ini.radius and ini.radius <= ini.center_y <= ly - ini.radius
        ):
            raise ConfigError("[initial] circle must lie inside the domain with positive radius")
    elif ini.shape == "square":
        h = ini.side / 2
        if ini.side <= 0 or not (h <= ini.center_x <= lx - h and h <= ini.center_y <= ly - h):
            raise ConfigError("[initial] square must lie inside the domain with positive side")
    elif ini.shape == "layer":
        if not 0 < ini.layer_thickness < ly:
            raise ConfigError("[initial] layer_thickness must lie strictly inside the domain height")
    elif ini.shape == "uniform":
        if not 0 <= ini.phi <= 1:
            raise ConfigError("[initial] phi must lie in [0, 1]")
    else:
        raise ConfigError(f"[initial] shape: unknown value {ini.shape!r} (circle, square, layer, uniform)")
    if ini.T <= 0:
        raise ConfigError("[initial] T must be positive")
    if ini.c < 0:
        raise ConfigError("[initial] c must be nonnegative")


def diffuse_profile(distance, lam: float):
    """Equilibrium phase-field profile ``1 / (1 + exp(4 d / lam))`` for signed distance ``d``."""
    return expit(-4.0 * np.asarray(distance, dtype=float) / lam)


def initial_condition(cfg: ScenarioConfig, mesh: Mesh | None = None) -> SimState:
    """Level-0 fields for the configured geometry.

    ``d`` is positive inside the mineral, so the profile is near 0 there and
    near 1 in the fluid. The square is sharp.
    """
    mesh = mesh or cfg.build_mesh()
    check_geometry(cfg, mesh)
    ini, lam = cfg.initial, cfg.model.lam
    x, y = mesh.centers
    if ini.shape == "circle":
        phi = diffuse_profile(ini.radius - np.hypot(x - ini.center_x, y - ini.center_y), lam)
    elif ini.shape == "square":
        inside = (np.abs(x - ini.center_x) < ini.side / 2) & (np.abs(y - ini.center_y) < ini.side / 2)
        phi = np.where(inside, 0.0, 1.0)
    elif ini.shape == "layer":
        phi = diffuse_profile(ini.layer_thickness - y, lam)
    else:
        phi = np.full(mesh.n_cells, float(ini.phi))
    n = mesh.n_cells
    return SimState(0.0, 0, phi, np.full(n, float(ini.c)), np.full(n, float(ini.T)))


__all__ = [
    "ConfigError",
    "PRESETS",
    "ScenarioConfig",
    "diffuse_profile",
    "dumps_config",
    "initial_condition",
    "load_config",
    "loads_config",
    "parse_stabilization",
    "preset",
    "save_config",
    "with_overrides",
]
