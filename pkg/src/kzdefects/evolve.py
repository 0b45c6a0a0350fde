"""Time evolution under the driven Rydberg Hamiltonian.

Steps use a fourth-order commutator-free Magnus scheme: two exponentials of
linear combinations of H at the Gauss points, each applied with a short
Lanczos (Krylov) propagator. Both pieces are unitary up to Krylov
truncation, so the state norm is preserved without renormalisation. Step
sizes are controlled by step doubling; waveform breakpoints and sample
times are always step boundaries.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from ._validation import check_state_vector
from .basis import ConstrainedBasis
from .exceptions import IntegrationError
from .hamiltonian import RydbergHamiltonian
from .observables import QuantumState

log = logging.getLogger(__name__)

_SQ3 = np.sqrt(3.0)
_GAUSS = (0.5 - _SQ3 / 6.0, 0.5 + _SQ3 / 6.0)
# weights of (H at first Gauss point, H at second) in each exponential, applied right to left
_CF4 = ((0.25 + _SQ3 / 6.0, 0.25 - _SQ3 / 6.0), (0.25 - _SQ3 / 6.0, 0.25 + _SQ3 / 6.0))


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float = 0.25
    krylov_dim: int = 40
    method_order: int = 4

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")
        if self.krylov_dim < 2:
            raise ValueError("krylov_dim must be >= 2")
        if self.method_order != 4:
            raise ValueError("only the fourth-order Magnus stepper is available")

    @property
    def step_tol(self):
        return self.abs_tol + self.rel_tol

    @property
    def krylov_tol(self):
        return 1e-3 * self.step_tol


class LanczosPropagator:
    """exp(-i tau A) v for Hermitian A given only through ``matvec``.

    The Krylov basis buffer is reused between calls.
    """

    def __init__(self, dim, max_dim=40):
        self.max_dim = max_dim
        self._V = np.empty((max_dim + 1, dim), dtype=np.complex128)
        self._w = np.empty(dim, dtype=np.complex128)
        self.last_dim = 0
        self.last_error = 0.0

    def __call__(self, matvec, v, tau, tol):
        beta = np.linalg.norm(v)
        if beta == 0.0:
            return np.zeros_like(v), True
        V, w = self._V, self._w
        V[0] = v / beta
        alpha = np.zeros(self.max_dim)
        offdiag = np.zeros(self.max_dim)
        for j in range(self.max_dim):
            matvec(V[j], w)
            alpha[j] = np.vdot(V[j], w).real
            # full reorthogonalisation; a second pass only after heavy cancellation
            before = np.linalg.norm(w)
            for _ in range(2):
                coef = (V[: j + 1] @ w.conj()).conj()
                w -= coef @ V[: j + 1]
                b = np.linalg.norm(w)
                if b > 0.7 * before:
                    break
                before = b
            m = j + 1
            evals, evecs = eigh_tridiagonal(alpha[:m], offdiag[: m - 1])
            y = evecs @ (np.exp(-1j * tau * evals) * evecs[0].conj())
            err = beta * b * abs(y[-1])
            if err < tol or b < 1e-14 * max(1.0, abs(alpha[j])):
                self.last_dim, self.last_error = m, err
                return beta * (y @ V[:m]), True
            offdiag[j] = b
            V[j + 1] = w / b
        self.last_dim, self.last_error = self.max_dim, err
        return beta * (y @ V[: self.max_dim]), False


@dataclass
class Trajectory:
    sample_times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    states: list | None = None
    diagnostics: dict = field(default_factory=dict)

    def column(self, key):
        return np.array([snap[key] for snap in self.snapshots])


def initial_vacuum(basis: ConstrainedBasis) -> QuantumState:
    """All atoms in the ground state."""
    if basis.dim < 1:
        raise ValueError("empty basis")
    psi = np.zeros(basis.dim, dtype=np.complex128)
    psi[basis.index(0)] = 1.0
    return QuantumState(psi, basis)


def energy(H: RydbergHamiltonian, t, psi) -> float:
    omega, delta = H.coefficients(t)
    return float(np.vdot(psi, H.apply_static(omega, delta, psi)).real)


class _MagnusStepper:
    def __init__(self, H: RydbergHamiltonian, config: IntegratorConfig):
        self.H = H
        self.config = config
        self.prop = LanczosPropagator(H.dim, config.krylov_dim)
        self.n_matvec = 0

    def _exp(self, cx, cn, cv, psi, h):
        H = self.H

        def matvec(x, out):
            self.n_matvec += 1
            H.apply_combination(cx, cn, cv, x, out)

        return self.prop(matvec, psi, h, self.config.krylov_tol)

    def step(self, t, h, psi):
        """One CF4 step from t to t+h; the waveforms must be linear on [t, t+h]."""
        proto = self.H.protocol
        ta, tb = t + _GAUSS[0] * h, t + _GAUSS[1] * h
        om = (proto.omega(ta), proto.omega(tb))
        de = (proto.delta(ta), proto.delta(tb))
        ok_all = True
        for wa, wb in _CF4:
            cx = 0.5 * (wa * om[0] + wb * om[1])
            cn = -(wa * de[0] + wb * de[1])
            cv = wa + wb
            psi, ok = self._exp(cx, cn, cv, psi, h)
            ok_all &= ok
        return psi, ok_all


def _stop_times(H, t0, t1, sample_times):
    stops = [t for t in H.protocol.breakpoints() if t0 < t < t1]
    stops += [t for t in sample_times if t0 < t < t1]
    stops = np.unique(np.concatenate([[t0, t1], stops]))
    keep = np.concatenate([[True], np.diff(stops) > 1e-12])
    return stops[keep]


def evolve(H: RydbergHamiltonian, psi0, t0, t1, config: IntegratorConfig | None = None,
           sample_times=(), observe=None, store_states=False):
    """Integrate i d(psi)/dt = (H(t)/hbar) psi from ``t0`` to ``t1``.

    Parameters
    ----------
    H : RydbergHamiltonian
        Hamiltonian with a protocol attached.
    psi0 : QuantumState or array
        Normalised initial state.
    sample_times : sequence of float
        Times in [t0, t1] at which ``observe(psi, t)`` is recorded.
    observe : callable, optional
        Returns a dict of observables; defaults to norm drift and energy.
    store_states : bool
        Also keep a copy of the state at each sample time.

    Returns
    -------
    (Trajectory, QuantumState)
    """
    config = config or IntegratorConfig()
    if H.protocol is None:
        raise ValueError("Hamiltonian has no protocol")
    amps = psi0.amplitudes if isinstance(psi0, QuantumState) else psi0
    psi = check_state_vector(amps, H.dim).copy()
    if not t0 < t1:
        raise ValueError(f"need t0 < t1, got {t0}, {t1}")
    if t0 < -1e-12 or t1 > H.protocol.duration + 1e-9:
        raise ValueError(f"[{t0}, {t1}] outside protocol [0, {H.protocol.duration}]")
    sample_times = np.asarray(sorted(sample_times), dtype=float)
    if sample_times.size and (sample_times[0] < t0 - 1e-12 or sample_times[-1] > t1 + 1e-12):
        raise ValueError("sample times must lie within [t0, t1]")
    if observe is None:
        def observe(state, t):
            return {"norm_drift": np.linalg.norm(state) - 1.0, "energy": energy(H, t, state)}

    traj = Trajectory(states=[] if store_states else None)
    pending = list(sample_times)

    def record(t, state):
        while pending and abs(pending[0] - t) <= 1e-12:
            pending.pop(0)
            traj.sample_times.append(float(t))
            traj.snapshots.append(observe(state, t))
            if store_states:
                traj.states.append(state.copy())

    stepper = _MagnusStepper(H, config)
    tol = config.step_tol
    h = min(config.max_step, 0.02)
    n_accept = n_reject = 0
    max_norm_drift = 0.0
    err_sum = 0.0
    t = float(t0)
    record(t, psi)
    stops = _stop_times(H, t0, t1, sample_times)
    for t_stop in stops[1:]:
        while t < t_stop - 1e-13:
            h = min(h, config.max_step, t_stop - t)
            # avoid a sliver step right before the stop
            if t_stop - t - h < 1e-3 * h:
                h = t_stop - t
            big, ok1 = stepper.step(t, h, psi)
            half, ok2 = stepper.step(t, 0.5 * h, psi)
            small, ok3 = stepper.step(t + 0.5 * h, 0.5 * h, half)
            if not (ok1 and ok2 and ok3):
                n_reject += 1
                h *= 0.5
                err = np.inf
            else:
                err = np.linalg.norm(small - big) / 15.0
                if err <= tol:
                    t = t_stop if abs(t_stop - (t + h)) < 1e-13 else t + h
                    psi = small
                    n_accept += 1
                    err_sum += err
                    max_norm_drift = max(max_norm_drift, abs(np.linalg.norm(psi) - 1.0))
                else:
                    n_reject += 1
                fac = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * (tol / err) ** 0.2))
                h *= fac
            if h < 1e-12:
                raise IntegrationError(
                    f"step size underflow at t={t:.6g}",
                    {"t": t, "h": h, "err": err, "accepted": n_accept, "rejected": n_reject,
                     "krylov_dim": stepper.prop.last_dim})
        t = float(t_stop)
        record(t, psi)
    traj.diagnostics = {
        "accepted_steps": n_accept,
        "rejected_steps": n_reject,
        "matvecs": stepper.n_matvec,
        "max_norm_drift": max_norm_drift,
        "final_norm_drift": float(np.linalg.norm(psi) - 1.0),
        # sum of accepted local error estimates: a bound on the global state error
        "error_estimate": err_sum,
    }
    return traj, QuantumState(psi, H.basis)
