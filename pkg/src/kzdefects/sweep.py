"""Ramp-time sweeps and hold runs, serial or over a process pool.

Each sweep point is independent; results always come back in input order,
so the output does not depend on the worker count.
"""

from __future__ import annotations

import functools
import logging
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .analysis import fit_correlation_length, spectral_gap
from .evolve import IntegratorConfig, evolve, initial_vacuum, energy
from .exceptions import DegenerateFitError, KZError
from .hamiltonian import gamma_rate
from .observables import (QuantumState, defect_correlations, defect_distribution,
                          defect_moments, density_correlations)

log = logging.getLogger(__name__)

WORKERS_ENV = "KZDEFECTS_WORKERS"


def default_workers():
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


@dataclass
class SweepPoint:
    t_delta: float
    gamma: float
    mean_D: float = float("nan")
    var_D: float = float("nan")
    pmf: np.ndarray | None = None
    density_corr: np.ndarray | None = None
    defect_corr: np.ndarray | None = None
    xi: float = float("nan")
    xi_err: float = float("nan")
    norm_drift: float = float("nan")
    diagnostics: dict = field(default_factory=dict)
    error: str | None = None
    state: QuantumState | None = None

    @property
    def ok(self):
        return self.error is None

    @property
    def ratio(self):
        return self.var_D / self.mean_D if self.mean_D > 0 else float("nan")

    @property
    def odd_mass(self):
        return float(self.pmf[1::2].sum()) if self.pmf is not None else float("nan")


def correlation_length(corr, window=(1, 6)):
    """(xi, xi_err) from a signed correlator array indexed by l; NaN when degenerate."""
    l = np.arange(corr.size)
    upper = min(window[1], corr.size - 1)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            fit = fit_correlation_length(l, corr, window=(window[0], upper))
    except DegenerateFitError:
        return float("nan"), float("nan")
    return fit["xi"], fit.stderr["xi"]


def final_observables(state, window=(1, 6)):
    mean, var = defect_moments(state)
    dens = density_correlations(state)
    xi, xi_err = correlation_length(dens, window)
    return {
        "mean_D": mean,
        "var_D": var,
        "pmf": defect_distribution(state).probabilities,
        "density_corr": dens,
        "defect_corr": defect_correlations(state),
        "xi": xi,
        "xi_err": xi_err,
        "norm_drift": state.norm - 1.0,
    }


@functools.lru_cache(maxsize=4)
def _hamiltonian(system):
    return system.hamiltonian()


def _run_point(system, t_delta, config, window, keep_state):
    params = system.params()
    point = SweepPoint(float(t_delta), gamma_rate(t_delta, params))
    try:
        protocol = system.protocol(t_delta=t_delta, t_hold=0.0)
        H = _hamiltonian(system).with_protocol(protocol)
        traj, state = evolve(H, initial_vacuum(H.basis), 0.0, protocol.duration, config)
        for key, value in final_observables(state, window).items():
            setattr(point, key, value)
        point.diagnostics = traj.diagnostics
        if keep_state:
            point.state = state
    except (KZError, ValueError, FloatingPointError) as exc:
        log.error("sweep point t_delta=%g failed: %s", t_delta, exc)
        point.error = f"{type(exc).__name__}: {exc}"
        point.diagnostics = getattr(exc, "diagnostics", {})
    return point


def _star(args):
    return _run_point(*args)


def run_kz_sweep(system, t_deltas, config: IntegratorConfig | None = None, workers=None,
                 window=(1, 6), keep_states=False):
    """Evolve the vacuum through the ramp protocol for every ``t_delta``.

    Parameters
    ----------
    system : SystemConfig
    t_deltas : sequence of float
        Detuning ramp times in us.
    workers : int, optional
        Process count; defaults to ``$KZDEFECTS_WORKERS`` or 1.

    Returns
    -------
    list of SweepPoint, in the order of ``t_deltas``. Failed points carry
    ``error`` instead of aborting the sweep.
    """
    config = config or IntegratorConfig()
    t_deltas = [float(t) for t in t_deltas]
    bad = [t for t in t_deltas if not t > 0]
    if bad:
        raise ValueError(f"ramp times must be positive, got {bad}")
    if not t_deltas:
        return []
    workers = default_workers() if workers is None else max(1, int(workers))
    jobs = [(system, t, config, tuple(window), keep_states) for t in t_deltas]
    if workers == 1 or len(jobs) == 1:
        return [_star(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(_star, jobs))


@dataclass
class HoldResult:
    t_delta: float
    hold_offsets: np.ndarray
    mean_D: np.ndarray
    var_D: np.ndarray
    xi: np.ndarray
    xi_err: np.ndarray
    energy: np.ndarray
    norm_drift: np.ndarray
    gap: object = None
    diagnostics: dict = field(default_factory=dict)

    def running_average(self, key, window_us):
        """Centred moving average of a series over ``window_us`` (valid part only)."""
        series = getattr(self, key)
        dt = self.hold_offsets[1] - self.hold_offsets[0]
        width = max(1, int(round(window_us / dt)))
        if width > series.size:
            raise ValueError("running window longer than the series")
        kernel = np.ones(width) / width
        return np.convolve(series, kernel, mode="valid")

    def drift(self, key, window_us):
        """Net change of the running average across the hold, relative to its mean."""
        avg = self.running_average(key, window_us)
        return float(abs(avg[-1] - avg[0]) / abs(avg.mean()))

    def ripple(self, key, window_us):
        """(max - min) / mean of the running average; residual oscillation included."""
        avg = self.running_average(key, window_us)
        return float((avg.max() - avg.min()) / abs(avg.mean()))


def run_hold(system, hold, config: IntegratorConfig | None = None, window=(1, 6),
             gap_sector="symmetric"):
    """Ramp at ``hold.t_delta_us`` then sample observables through the hold window.

    Snapshots are taken with the drive on, at ``hold.sample_interval_us``
    spacing from the end of the ramp to the end of the hold.
    """
    config = config or IntegratorConfig()
    protocol = system.protocol(t_delta=hold.t_delta_us, t_hold=hold.t_hold_us)
    H = _hamiltonian(system).with_protocol(protocol)
    t_start = protocol.markers["ramp_end"]
    offsets = hold.sample_offsets()
    times = t_start + offsets

    def observe(psi, t):
        state = QuantumState(psi, H.basis)
        mean, var = defect_moments(state)
        xi, xi_err = correlation_length(density_correlations(state), window)
        return {"mean_D": mean, "var_D": var, "xi": xi, "xi_err": xi_err,
                "energy": energy(H, t, psi), "norm_drift": np.linalg.norm(psi) - 1.0}

    traj, _ = evolve(H, initial_vacuum(H.basis), 0.0, float(times[-1]), config,
                     sample_times=times, observe=observe)
    params = system.params()
    gap = spectral_gap(H, params.omega_max, params.delta_max, sector=gap_sector)
    return HoldResult(hold.t_delta_us, offsets, traj.column("mean_D"), traj.column("var_D"),
                      traj.column("xi"), traj.column("xi_err"), traj.column("energy"),
                      traj.column("norm_drift"), gap, traj.diagnostics)
