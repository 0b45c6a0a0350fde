"""Atom geometries for 1D Rydberg chains."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import ConfigError, InvalidGeometryError

BOUNDARIES = ("periodic", "open")


def _check_boundary(boundary):
    if boundary not in BOUNDARIES:
        raise InvalidGeometryError(f"boundary must be one of {BOUNDARIES}, got {boundary!r}")
    return boundary


@dataclass(frozen=True)
class AtomGeometry:
    """Atom positions in micrometres and the chain boundary condition.

    Site ``j`` of the geometry is bit ``j`` of every basis bitmask.
    """

    positions: np.ndarray
    boundary: str = "periodic"

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 2:
            raise InvalidGeometryError(f"positions must have shape (L, 2), got {pos.shape}")
        _check_boundary(self.boundary)
        if pos.shape[0] >= 2:
            d = self.distances_of(pos)
            off = d[~np.eye(len(pos), dtype=bool)]
            if np.any(off <= 0.0):
                raise InvalidGeometryError("two atoms share a position")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @staticmethod
    def distances_of(pos):
        diff = pos[:, None, :] - pos[None, :, :]
        return np.sqrt((diff**2).sum(axis=-1))

    @property
    def n_sites(self) -> int:
        return self.positions.shape[0]

    def distances(self) -> np.ndarray:
        """Pairwise Euclidean distance matrix in micrometres."""
        return self.distances_of(self.positions)

    @property
    def nearest_spacing(self) -> float:
        if self.n_sites < 2:
            return float("inf")
        d = self.distances()
        return float(d[~np.eye(self.n_sites, dtype=bool)].min())

    def to_dict(self):
        return {"positions": self.positions.tolist(), "boundary": self.boundary}

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))


def ring_positions(L: int, a: float) -> AtomGeometry:
    """Regular L-gon with side length ``a``; periodic boundary."""
    if L < 3:
        raise InvalidGeometryError(f"a ring needs at least 3 atoms, got L={L}")
    if not a > 0:
        raise InvalidGeometryError(f"spacing must be positive, got a={a}")
    radius = a / (2.0 * np.sin(np.pi / L))
    theta = 2.0 * np.pi * np.arange(L) / L
    pos = radius * np.column_stack([np.cos(theta), np.sin(theta)])
    return AtomGeometry(pos, "periodic")


def chain_positions(L: int, a: float) -> AtomGeometry:
    """Collinear, equally spaced atoms; open boundary."""
    if L < 2:
        raise InvalidGeometryError(f"a chain needs at least 2 atoms, got L={L}")
    if not a > 0:
        raise InvalidGeometryError(f"spacing must be positive, got a={a}")
    pos = np.column_stack([a * np.arange(L, dtype=float), np.zeros(L)])
    return AtomGeometry(pos, "open")


def load_geometry(path) -> AtomGeometry:
    """Read a geometry file.

    Accepts either ``{"positions": [[x, y], ...], "boundary": "open"}`` or a
    bare ``[[x, y], ...]`` array (boundary then defaults to periodic).
    """
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc.msg}", line=exc.lineno) from exc
    if isinstance(data, list):
        data = {"positions": data}
    if "positions" not in data:
        raise ConfigError(f"{path}: missing field 'positions'", field="positions")
    try:
        return AtomGeometry(np.asarray(data["positions"], dtype=float),
                            data.get("boundary", "periodic"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}", field="positions") from exc
