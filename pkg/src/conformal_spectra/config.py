"""Run configuration read from ``key = value`` INI files.

Sections and keys (all optional, defaults in brackets)::

    [run]        seed [0], outdir [out]
    [mesh]       path, shape [icosphere | unit_disk | flat_torus | icosahedron | octahedron],
                 size [3], refine [0], sphere_project [false]
    [functional] kind [laplace], form [negsum], indices [1], coefficients
    [solver]     eig_tol [1e-8], cluster_tol [1e-3], method [auto], count [9]
    [subgradient] samples [32], max_cluster [8], critical_tol [0.05], relative [true]
    [factor]     path (.field file), perturb [0], bumps [4], width [8]
    [flow]       any FlowConfig field
    [minmax]     end_path, end_perturb [0.5], nodes [17], max_sweeps [50], patience [5],
                 segment_samples [3], level_eps [0.05], check_endpoints [true],
                 endpoint_tol [0.05]
    [diagnose]   radii [0.3 0.45 0.6], max_centers [256], weights [fit], window [2e-2]
    [output]     svg [true], dump_matrices [false], fields [true]

Lists are whitespace or comma separated.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .exceptions import ConfigError
from .flow import FlowConfig
from .functional import FunctionalSpec

SHAPES = ("icosphere", "unit_disk", "flat_torus", "icosahedron", "octahedron")


def _floats(text):
    return tuple(float(x) for x in text.replace(",", " ").split())


def _ints(text):
    return tuple(int(x) for x in text.replace(",", " ").split())


@dataclass
class MeshConfig:
    path: Optional[str] = None
    shape: str = "icosphere"
    size: int = 3
    refine: int = 0
    sphere_project: bool = False


@dataclass
class SolverConfig:
    eig_tol: float = 1e-8
    cluster_tol: float = 1e-3
    method: str = "auto"
    count: int = 9


@dataclass
class SubgradientConfig:
    samples: int = 32
    max_cluster: int = 8
    critical_tol: float = 0.05
    relative: bool = True


@dataclass
class FactorConfig:
    path: Optional[str] = None
    perturb: float = 0.0
    bumps: int = 4
    width: float = 8.0


@dataclass
class MinmaxConfig:
    end_path: Optional[str] = None
    end_perturb: float = 0.5
    nodes: int = 17
    max_sweeps: int = 50
    patience: int = 5
    segment_samples: int = 3
    level_eps: float = 0.05
    check_endpoints: bool = True
    endpoint_tol: float = 0.05


@dataclass
class DiagnoseConfig:
    radii: tuple = (0.3, 0.45, 0.6)
    max_centers: int = 256
    weights: str = "fit"
    window: float = 2e-2


@dataclass
class OutputConfig:
    svg: bool = True
    dump_matrices: bool = False
    fields: bool = True


@dataclass
class RunConfig:
    seed: int = 0
    outdir: str = "out"
    mesh: MeshConfig = field(default_factory=MeshConfig)
    functional: dict = field(default_factory=lambda: {"kind": "laplace", "form": "negsum", "indices": (1,)})
    solver: SolverConfig = field(default_factory=SolverConfig)
    subgradient: SubgradientConfig = field(default_factory=SubgradientConfig)
    factor: FactorConfig = field(default_factory=FactorConfig)
    flow: dict = field(default_factory=dict)
    minmax: MinmaxConfig = field(default_factory=MinmaxConfig)
    diagnose: DiagnoseConfig = field(default_factory=DiagnoseConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def functional_spec(self):
        kw = dict(self.functional)
        try:
            return FunctionalSpec(**kw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[functional] {exc}") from None

    def flow_config(self):
        kw = dict(self.flow)
        kw.setdefault("seed", self.seed)
        kw.setdefault("eig_tol", self.solver.eig_tol)
        kw.setdefault("cluster_tol", self.solver.cluster_tol)
        kw.setdefault("samples", self.subgradient.samples)
        kw.setdefault("max_cluster", self.subgradient.max_cluster)
        try:
            return FlowConfig(**kw)
        except TypeError as exc:
            raise ConfigError(f"[flow] {exc}") from None

    def validate(self):
        s = self.solver
        if not (s.eig_tol > 0 and s.cluster_tol > 0 and self.subgradient.critical_tol > 0):
            raise ConfigError("tolerances must be positive")
        if s.count < 2:
            raise ConfigError("[solver] count must be at least 2")
        if self.mesh.path is None and self.mesh.shape not in SHAPES:
            raise ConfigError(f"[mesh] shape must be one of {', '.join(SHAPES)}")
        if self.mesh.refine < 0:
            raise ConfigError("[mesh] refine must be >= 0")
        if s.method not in ("auto", "dense", "lobpcg"):
            raise ConfigError("[solver] method must be auto, dense or lobpcg")
        radii = np.asarray(self.diagnose.radii)
        if radii.size == 0 or np.any(radii <= 0) or np.any(np.diff(radii) <= 0):
            raise ConfigError("[diagnose] radii must be positive and ascending")
        self.functional_spec()
        self.flow_config()
        return self

    def resolved(self):
        """Plain dict of every setting, for provenance in output files."""
        out = dataclasses.asdict(self)
        out["functional"] = {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.functional.items()}
        out["flow"] = self.flow_config().as_dict()
        return out


def _convert(cls, section, items):
    hints = {f.name: f for f in dataclasses.fields(cls)}
    kw = {}
    for key, raw in items:
        if key not in hints:
            raise ConfigError(f"[{section}] unknown key {key!r}")
        default = hints[key].default
        kw[key] = _parse_value(section, key, raw, default)
    return kw


def _parse_value(section, key, raw, default):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            return _floats(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from None
    return raw or None


_FUNCTIONAL_KEYS = {"kind", "form", "indices", "coefficients"}


def load_config(path=None, text=None):
    """Parse a config file (or string) into a validated :class:`RunConfig`.

    Raises
    ------
    ConfigError
        On unknown sections or keys and on invalid values.
    OSError
        If ``path`` cannot be read.
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if path is not None:
        with open(path) as fh:
            text = fh.read()
    try:
        cp.read_string(text or "")
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    cfg = RunConfig()
    base = Path(path).parent if path is not None else None
    for section in cp.sections():
        items = cp.items(section)
        if section == "run":
            for key, raw in items:
                if key == "seed":
                    cfg.seed = int(_parse_value("run", key, raw, 0))
                elif key == "outdir":
                    cfg.outdir = raw.strip()
                else:
                    raise ConfigError(f"[run] unknown key {key!r}")
        elif section == "functional":
            spec = dict(cfg.functional)
            for key, raw in items:
                if key not in _FUNCTIONAL_KEYS:
                    raise ConfigError(f"[functional] unknown key {key!r}")
                try:
                    if key == "indices":
                        spec[key] = _ints(raw)
                    elif key == "coefficients":
                        spec[key] = _floats(raw)
                    else:
                        spec[key] = raw.strip().lower()
                except ValueError as exc:
                    raise ConfigError(f"[functional] {key}: {exc}") from None
            cfg.functional = spec
        elif section == "flow":
            fields = {f.name: f.default for f in dataclasses.fields(FlowConfig)}
            for key, raw in items:
                if key not in fields:
                    raise ConfigError(f"[flow] unknown key {key!r}")
                cfg.flow[key] = _parse_value("flow", key, raw, fields[key])
        elif section in ("mesh", "solver", "subgradient", "factor", "minmax", "diagnose", "output"):
            sub = getattr(cfg, section)
            for key, value in _convert(type(sub), section, items).items():
                setattr(sub, key, value)
        else:
            raise ConfigError(f"unknown section [{section}]")
    if base is not None:
        for obj, key in ((cfg.mesh, "path"), (cfg.factor, "path"), (cfg.minmax, "end_path")):
            value = getattr(obj, key)
            if value and not Path(value).is_absolute() and (base / value).exists():
                setattr(obj, key, str(base / value))
    return cfg.validate()
