"""File formats: shot files, trajectory CSV, state dumps and JSON records."""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
from pathlib import Path

import numpy as np

from . import __version__
from .basis import enumerate_basis
from .exceptions import ConfigError
from .observables import BitstringSample, QuantumState

TRAJECTORY_COLUMNS = ("t_us", "mean_D", "var_D", "xi", "energy", "norm_drift")


def header_line(config_hash=None):
    h = f"# kzdefects {__version__}"
    if config_hash:
        h += f" config_sha256={config_hash}"
    return h + "\n"


def meta(config_hash=None):
    return {"toolkit": "kzdefects", "version": __version__, "config_sha256": config_hash}


def digest_inputs(files=(), options=None):
    """SHA-256 over input file bytes and a canonical JSON of the options.

    Used as the provenance hash for commands driven by files rather than a
    campaign config.
    """
    h = hashlib.sha256()
    for f in files:
        h.update(Path(f).read_bytes())
    h.update(json.dumps(options or {}, sort_keys=True, default=str).encode())
    return h.hexdigest()


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, columns, rows, config_hash=None):
    """CSV with a leading ``#`` provenance line. Floats use repr for round-tripping."""
    buf = _io.StringIO()
    buf.write(header_line(config_hash))
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    Path(path).write_text(buf.getvalue())


def read_csv(path):
    """Rows of a CSV written by :func:`write_csv` as dicts of floats where possible."""
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    out = []
    for row in csv.DictReader(lines):
        rec = {}
        for k, v in row.items():
            try:
                rec[k] = float(v)
            except (TypeError, ValueError):
                rec[k] = v
        out.append(rec)
    return out


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def write_json(path, payload, config_hash=None):
    payload = {"meta": meta(config_hash), **payload}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=False, default=_json_default)
                          + "\n")


def write_trajectory_csv(path, trajectory, config_hash=None):
    rows = [[t] + [snap.get(c, float("nan")) for c in TRAJECTORY_COLUMNS[1:]]
            for t, snap in zip(trajectory.sample_times, trajectory.snapshots)]
    write_csv(path, TRAJECTORY_COLUMNS, rows, config_hash)


def write_shots(path, sample: BitstringSample, provenance=None, aggregate=True,
                config_hash=None):
    """Shot file plus a ``.json`` sidecar; one line per (aggregated) shot, atom 0 leftmost."""
    path = Path(path)
    L = sample.n_sites
    lines = []
    for s, c in zip(sample.states, sample.counts):
        bits = "".join("1" if (int(s) >> j) & 1 else "0" for j in range(L))
        if aggregate:
            lines.append(f"{bits} {int(c)}")
        else:
            lines.extend([bits] * int(c))
    path.write_text("\n".join(lines) + "\n")
    sidecar = {"L": L, "boundary": sample.boundary, "provenance": provenance or {},
               "meta": meta(config_hash)}
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2, default=_json_default)
                                         + "\n")


def read_shots(path, L=None, boundary=None) -> BitstringSample:
    """Parse a shot file; ``L`` / ``boundary`` default to the sidecar's values."""
    path = Path(path)
    side = Path(str(path) + ".json")
    if side.exists():
        info = json.loads(side.read_text())
        L = info.get("L", L) if L is None else L
        boundary = info.get("boundary", boundary) if boundary is None else boundary
    boundary = boundary or "periodic"
    states, counts = [], []
    try:
        text = path.read_text()
    except FileNotFoundError as exc:
        raise ConfigError(f"{path}: no such file") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        bits = parts[0]
        if set(bits) - {"0", "1"}:
            raise ConfigError(f"{path}:{lineno}: bitstring may contain only 0 and 1", line=lineno)
        if L is None:
            L = len(bits)
        if len(bits) != L:
            raise ConfigError(f"{path}:{lineno}: expected {L} bits, got {len(bits)}",
                              line=lineno)
        if len(parts) > 2:
            raise ConfigError(f"{path}:{lineno}: too many columns", line=lineno)
        try:
            count = int(parts[1]) if len(parts) == 2 else 1
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: count must be an integer", line=lineno) from exc
        if count < 1:
            raise ConfigError(f"{path}:{lineno}: count must be >= 1", line=lineno)
        states.append(sum(1 << j for j, b in enumerate(bits) if b == "1"))
        counts.append(count)
    if not states:
        raise ConfigError(f"{path}: no shots")
    s = np.array(states, dtype=np.int64)
    c = np.array(counts, dtype=np.int64)
    uniq, inv = np.unique(s, return_inverse=True)
    return BitstringSample(uniq, np.bincount(inv, weights=c).astype(np.int64), L, boundary)


def read_calibration(path):
    """Calibration JSON {eps10, d_eps10, eps01, d_eps01}."""
    from .mitigation import ReadoutModel

    if isinstance(path, dict):
        data = path
    else:
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"{path}: no such file") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}", line=exc.lineno) from exc
    if not isinstance(data, dict):
        raise ConfigError("calibration must be a JSON object")
    for key in ("eps10", "d_eps10", "eps01", "d_eps01"):
        if key not in data:
            raise ConfigError(f"calibration: missing field {key!r}", field=key)
    try:
        return ReadoutModel.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"calibration: {exc}") from exc


def save_state(path, state: QuantumState, extra=None, config_hash=None):
    """Raw interleaved re/im float64 amplitudes in ``path`` plus a JSON header at ``path.json``."""
    path = Path(path)
    amps = np.ascontiguousarray(state.amplitudes, dtype=np.complex128)
    path.write_bytes(amps.view(np.float64).astype("<f8").tobytes())
    b = state.basis
    header = {"dim": b.dim, "L": b.n_sites, "boundary": b.boundary,
              "constrained": b.constrained, "dtype": "complex128 interleaved <f8",
              "meta": meta(config_hash), **(extra or {})}
    Path(str(path) + ".json").write_text(json.dumps(header, indent=2, default=_json_default)
                                         + "\n")


def load_state(path) -> QuantumState:
    path = Path(path)
    header = json.loads(Path(str(path) + ".json").read_text())
    basis = enumerate_basis(header["L"], header["boundary"], header["constrained"])
    raw = np.frombuffer(path.read_bytes(), dtype="<f8")
    if raw.size != 2 * header["dim"] or header["dim"] != basis.dim:
        raise ConfigError(f"{path}: state size does not match its header")
    return QuantumState(raw.astype(np.float64).view(np.complex128).copy(), basis)
