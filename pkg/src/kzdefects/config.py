"""JSON configuration for systems and campaigns.

Frequencies are entered as linear values X/2pi in MHz and converted to
angular units on load.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .basis import enumerate_basis
from .evolve import IntegratorConfig
from .exceptions import ConfigError
from .geometry import AtomGeometry, chain_positions, load_geometry, ring_positions
from .hamiltonian import (RydbergParams, build_hamiltonian, build_hold_protocol,
                          build_kz_protocol, t_delta_for_rate)


def _from_mapping(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a JSON object", field=where)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown field {unknown[0]!r}", field=f"{where}.{unknown[0]}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}", field=where) from exc


@dataclass(frozen=True)
class SystemConfig:
    L: int = 20
    a_um: float = 6.2
    boundary: str = "periodic"
    constrained: bool = True
    C6_over_2pi_MHz_um6: float = 862690.0
    omega_max_over_2pi_MHz: float = 2.5
    delta_min_over_2pi_MHz: float = -2.5
    delta_max_over_2pi_MHz: float = 4.0
    t_delta_us: float = 3.0
    t_hold_us: float = 0.0
    t_edge_us: float = 0.5
    cutoff_um: float | None = None
    geometry_file: str | None = None

    def __post_init__(self):
        if self.boundary not in ("periodic", "open"):
            raise ValueError(f"boundary must be 'periodic' or 'open', got {self.boundary!r}")
        if int(self.L) != self.L or self.L < 1:
            raise ValueError(f"L must be a positive integer, got {self.L!r}")

    @classmethod
    def from_dict(cls, data, where="system"):
        return _from_mapping(cls, data, where)

    def params(self) -> RydbergParams:
        return RydbergParams.from_linear(self.C6_over_2pi_MHz_um6, self.omega_max_over_2pi_MHz,
                                         self.delta_min_over_2pi_MHz,
                                         self.delta_max_over_2pi_MHz)

    def geometry(self) -> AtomGeometry:
        if self.geometry_file:
            geom = load_geometry(self.geometry_file)
            if geom.n_sites != self.L:
                raise ConfigError(f"geometry file has {geom.n_sites} atoms, L={self.L}",
                                  field="system.geometry_file")
            return geom
        if self.boundary == "periodic":
            return ring_positions(self.L, self.a_um)
        return chain_positions(self.L, self.a_um)

    def basis(self):
        return enumerate_basis(self.L, self.boundary, self.constrained)

    def protocol(self, t_delta=None, t_hold=None):
        t_delta = self.t_delta_us if t_delta is None else t_delta
        t_hold = self.t_hold_us if t_hold is None else t_hold
        if t_hold > 0:
            return build_hold_protocol(t_delta, t_hold, self.params(), self.t_edge_us)
        return build_kz_protocol(t_delta, self.params(), self.t_edge_us)

    def hamiltonian(self, protocol=None):
        return build_hamiltonian(self.basis(), self.geometry(), self.params(), protocol,
                                 self.cutoff_um)


def load_system_config(path) -> SystemConfig:
    return SystemConfig.from_dict(_read_json(path))


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"{path}: no such file") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}", line=exc.lineno) from exc


@dataclass(frozen=True)
class SweepConfig:
    """Either explicit ``t_delta_us`` values or a log grid in Gamma/2pi (MHz/us)."""

    t_delta_us: tuple | None = None
    gamma_min: float | None = None
    gamma_max: float | None = None
    n_points: int | None = None

    def t_deltas(self, params) -> list:
        if self.t_delta_us is not None:
            return [float(t) for t in self.t_delta_us]
        if None in (self.gamma_min, self.gamma_max, self.n_points):
            raise ConfigError("sweep needs t_delta_us or gamma_min/gamma_max/n_points",
                              field="sweep")
        gammas = np.geomspace(self.gamma_min, self.gamma_max, int(self.n_points))
        # slowest ramp first
        return [float(t_delta_for_rate(g, params)) for g in gammas]


@dataclass(frozen=True)
class HoldConfig:
    t_delta_us: float = 1.0
    t_hold_us: float = 3.0
    sample_interval_us: float = 0.02
    running_window_us: float = 1.0

    def __post_init__(self):
        if not self.t_hold_us > 0:
            raise ValueError("t_hold_us must be positive")
        if not 0 < self.sample_interval_us <= self.t_hold_us:
            raise ValueError("sample_interval_us must be positive and no longer than the hold")

    def sample_offsets(self):
        n = int(round(self.t_hold_us / self.sample_interval_us))
        return self.sample_interval_us * np.arange(n + 1)


@dataclass(frozen=True)
class AnalysisConfig:
    corr_window: tuple = (1, 6)
    power_window: tuple | None = None
    size_ratio: float | None = None


@dataclass(frozen=True)
class MitigationConfig:
    eps01: float = 0.009
    eps10: float = 0.061
    d_eps01: float = 0.002
    d_eps10: float = 0.004
    alphas: tuple = (1.0, 2.0, 3.0)
    betas: tuple = (1.0, 1.5, 2.0)
    repeats: int = 4
    n_shots: int = 2000


@dataclass(frozen=True)
class CampaignConfig:
    system: SystemConfig = field(default_factory=SystemConfig)
    sweep: SweepConfig | None = None
    hold: HoldConfig | None = None
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    mitigation: MitigationConfig | None = None
    output_dir: str = "results"
    seed: int | None = None
    workers: int | None = None
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {"system", "sweep", "hold", "integrator", "analysis", "mitigation",
                 "output_dir", "seed", "workers"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown field {unknown[0]!r}", field=unknown[0])
        kw = {"raw": data}
        kw["system"] = SystemConfig.from_dict(data.get("system", {}))
        for name, sub in (("sweep", SweepConfig), ("hold", HoldConfig),
                          ("integrator", IntegratorConfig), ("analysis", AnalysisConfig),
                          ("mitigation", MitigationConfig)):
            if data.get(name) is not None:
                block = dict(data[name])
                for key in ("t_delta_us", "corr_window", "power_window", "alphas", "betas"):
                    if isinstance(block.get(key), list):
                        block[key] = tuple(block[key])
                kw[name] = _from_mapping(sub, block, name)
        for key in ("output_dir", "seed", "workers"):
            if key in data:
                kw[key] = data[key]
        cfg = cls(**kw)
        if cfg.mitigation is not None and cfg.seed is None:
            raise ConfigError("a seed is required when mitigation is enabled", field="seed")
        return cfg

    @classmethod
    def load(cls, path):
        return cls.from_dict(_read_json(path))

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form of the raw config.

        ``output_dir`` and ``workers`` are left out: neither changes results.
        """
        raw = {k: v for k, v in self.raw.items() if k not in ("output_dir", "workers")}
        text = json.dumps(raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()
