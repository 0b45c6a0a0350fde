"""Readout-error models and two-step zero-noise extrapolation (ZNE).

Readout flips are independent per atom: a true Rydberg atom reads as ground
with probability ``eps10`` and a true ground atom reads as Rydberg with
probability ``eps01``. ZNE amplifies these rates on the recorded shots,
recomputes an observable on the resampled shots, and extrapolates the
results back to zero noise: first linearly along eps01 at each fixed eps10
multiple, then along eps10 with a linear or quadratic model.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_probability
from .analysis import weighted_polyfit
from .exceptions import DegenerateFitError, InvalidGridError
from .observables import BitstringSample, QuantumState, domain_wall_counts, estimate_moments

log = logging.getLogger(__name__)

OBSERVABLES = ("wall_mean", "wall_var")


@dataclass(frozen=True)
class ReadoutModel:
    eps01: float = 0.009
    eps10: float = 0.061
    d_eps01: float = 0.002
    d_eps10: float = 0.004

    def __post_init__(self):
        check_probability(self.eps01, "eps01", 0.5)
        check_probability(self.eps10, "eps10", 0.5)
        if self.d_eps01 < 0 or self.d_eps10 < 0:
            raise ValueError("calibration uncertainties must be non-negative")

    def confusion_matrix(self) -> np.ndarray:
        """M[measured, true] for a single atom."""
        return _channel(self.eps01, self.eps10)

    @classmethod
    def from_dict(cls, data):
        return cls(**{k: float(data[k]) for k in ("eps01", "eps10", "d_eps01", "d_eps10")})

    def to_dict(self):
        return asdict(self)


def _channel(eps01, eps10):
    return np.array([[1.0 - eps01, eps10], [eps01, 1.0 - eps10]])


def _rng(seed):
    if isinstance(seed, (tuple, list)):
        seed = np.random.SeedSequence([int(s) for s in seed])
    return np.random.default_rng(seed)


def apply_readout_noise(sample: BitstringSample, eps01, eps10, seed) -> BitstringSample:
    """Flip every recorded bit independently: 1->0 with ``eps10``, 0->1 with ``eps01``."""
    eps01 = check_probability(eps01, "eps01")
    eps10 = check_probability(eps10, "eps10")
    if eps01 == 0.0 and eps10 == 0.0:
        return sample
    rng = _rng(seed)
    bits = sample.bits().astype(bool)
    u = rng.random(bits.shape)
    flip = np.where(bits, u < eps10, u < eps01)
    bits ^= flip
    weights = np.int64(1) << np.arange(sample.n_sites, dtype=np.int64)
    shots = bits.astype(np.int64) @ weights
    return BitstringSample.from_shots(shots, sample.n_sites, sample.boundary)


@dataclass(frozen=True)
class AmplificationChannel:
    """Extra flip probabilities that turn the calibrated channel into the target one."""

    q01: float
    q10: float
    clamped: bool = False
    exact: tuple = (0.0, 0.0)


def amplification_channel(model: ReadoutModel, alpha, beta, eps01=None, eps10=None):
    """Solve M_extra @ M_true = M_target with target rates (alpha*eps01, beta*eps10).

    ``eps01`` / ``eps10`` override the model's rates (used for the
    systematic variants). Entries outside [0, 1] are clamped with a warning.
    """
    if alpha < 1 or beta < 1:
        raise InvalidGridError(f"amplification factors must be >= 1, got ({alpha}, {beta})")
    e01 = model.eps01 if eps01 is None else eps01
    e10 = model.eps10 if eps10 is None else eps10
    true = _channel(e01, e10)
    target = _channel(alpha * e01, beta * e10)
    extra = target @ np.linalg.inv(true)
    # snap round-off (e.g. alpha = 1 gives +-1e-18) before judging the region
    q01, q10 = (0.0 if abs(q) < 1e-12 else q for q in (float(extra[1, 0]), float(extra[0, 1])))
    clamped = not (0.0 <= q01 <= 1.0 and 0.0 <= q10 <= 1.0)
    if clamped:
        warnings.warn(f"amplification ({alpha}, {beta}) leaves the stochastic region; clamping",
                      RuntimeWarning, stacklevel=2)
    c01, c10 = min(max(q01, 0.0), 1.0), min(max(q10, 0.0), 1.0)
    return AmplificationChannel(c01, c10, clamped and (abs(q01 - c01) > 1e-12
                                                      or abs(q10 - c10) > 1e-12), (q01, q10))


@dataclass(frozen=True)
class ZNEGrid:
    alphas: tuple = (1.0, 2.0, 3.0)
    betas: tuple = (1.0, 1.5, 2.0)
    repeats: int = 4
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        for name, vals in (("alphas", self.alphas), ("betas", self.betas)):
            if not vals or min(vals) < 1.0:
                raise InvalidGridError(f"{name} must be non-empty multipliers >= 1")
            if 1.0 not in vals:
                raise InvalidGridError(f"{name} must include 1")
            if len(set(vals)) != len(vals):
                raise InvalidGridError(f"{name} contains duplicates")
        if self.repeats < 1:
            raise InvalidGridError("repeats must be >= 1")


@dataclass
class ZNEResult:
    observable: str
    value: float
    stat_err: float
    sys_err: float = 0.0
    order10: str = "linear"
    grid_values: list = field(default_factory=list)
    intermediate: list = field(default_factory=list)
    raw_value: float = float("nan")
    raw_err: float = float("nan")
    diagnostics: dict = field(default_factory=dict)

    @property
    def total_err(self):
        return float(np.hypot(self.stat_err, self.sys_err))

    def to_dict(self):
        return {
            "observable": self.observable,
            "value": self.value,
            "stat_err": self.stat_err,
            "sys_err": self.sys_err,
            "order10": self.order10,
            "raw_value": self.raw_value,
            "raw_err": self.raw_err,
            "grid_values": self.grid_values,
            "intermediate": self.intermediate,
            "diagnostics": self.diagnostics,
        }


def _observable(sample, observable):
    est = estimate_moments(sample)
    if observable == "wall_mean":
        return est.mean, est.se_mean
    return est.var, est.se_var


def _check_observable(observable, order10):
    if observable not in OBSERVABLES:
        raise ValueError(f"observable must be one of {OBSERVABLES}, got {observable!r}")
    if order10 not in ("linear", "quadratic"):
        raise ValueError(f"order10 must be 'linear' or 'quadratic', got {order10!r}")


def extrapolate_grid(points, model: ReadoutModel, grid: ZNEGrid, order10="linear",
                     eps01=None, eps10=None):
    """Two-step extrapolation of grid measurements to zero readout noise.

    ``points[(i, j)]`` is ``(value, stat_err)`` measured at rates
    (alphas[i] * eps01, betas[j] * eps10). Returns (value, stat_err,
    intermediate, residuals).
    """
    e01 = model.eps01 if eps01 is None else eps01
    e10 = model.eps10 if eps10 is None else eps10
    deg10 = 1 if order10 == "linear" else 2
    intermediate = []
    residuals = {}
    for j, beta in enumerate(grid.betas):
        vals = np.array([points[(i, j)][0] for i in range(len(grid.alphas))])
        errs = np.array([points[(i, j)][1] for i in range(len(grid.alphas))])
        x = np.array(grid.alphas) * e01
        if e01 == 0.0 or len(grid.alphas) == 1:
            # nothing to extrapolate along eps01
            v = float(np.mean(vals))
            s = float(np.mean(errs))
        else:
            coef, cov, res = weighted_polyfit(x, vals, 1, _safe_sigma(errs))
            v, s = float(coef[0]), float(np.sqrt(max(cov[0, 0], 0.0)))
            residuals[f"beta={beta:g}"] = res
        intermediate.append({"beta": beta, "eps10": beta * e10, "value": v, "stat_err": s})

    y = np.array([p["value"] for p in intermediate])
    sy = np.array([p["stat_err"] for p in intermediate])
    x10 = np.array(grid.betas) * e10
    if e10 == 0.0:
        return float(np.mean(y)), float(np.mean(sy)), intermediate, residuals
    if len(grid.betas) < deg10 + 1:
        raise InvalidGridError(
            f"{order10} extrapolation in eps10 needs >= {deg10 + 1} betas, got {len(grid.betas)}")
    try:
        coef, cov, res = weighted_polyfit(x10, y, deg10, _safe_sigma(sy))
    except DegenerateFitError as exc:
        raise InvalidGridError(str(exc)) from exc
    residuals["eps10"] = res
    return float(coef[0]), float(np.sqrt(max(cov[0, 0], 0.0))), intermediate, residuals


def _safe_sigma(errs):
    """Weights need positive errors; fall back to equal weights if any vanish."""
    errs = np.asarray(errs, dtype=float)
    if np.all(errs > 0):
        return errs
    return None


def zne_mitigate(sample: BitstringSample, model: ReadoutModel, grid: ZNEGrid | None = None,
                 observable="wall_mean", order10="linear", eps01=None, eps10=None) -> ZNEResult:
    """Mitigate readout noise on ``observable`` by resampling and extrapolation.

    ``eps01`` / ``eps10`` replace the model's assumed true rates, which is
    how :func:`systematic_error` builds its variants. The random streams
    depend only on (grid.seed, repeat, beta index, alpha index), so variants
    share noise draws with the baseline.
    """
    grid = grid or ZNEGrid()
    _check_observable(observable, order10)
    e01 = model.eps01 if eps01 is None else eps01
    e10 = model.eps10 if eps10 is None else eps10
    raw_value, raw_err = _observable(sample, observable)
    points = {}
    grid_values = []
    clamped = []
    for j, beta in enumerate(grid.betas):
        for i, alpha in enumerate(grid.alphas):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                chan = amplification_channel(model, alpha, beta, e01, e10)
            if chan.clamped:
                clamped.append((alpha, beta))
            if chan.q01 == 0.0 and chan.q10 == 0.0:
                v, s = raw_value, raw_err
            else:
                reps = [_observable(apply_readout_noise(sample, chan.q01, chan.q10,
                                                        (grid.seed, r, j, i)), observable)
                        for r in range(grid.repeats)]
                v = float(np.mean([r[0] for r in reps]))
                s = float(np.mean([r[1] for r in reps]))
            points[(i, j)] = (v, s)
            grid_values.append({"alpha": alpha, "beta": beta, "eps01": alpha * e01,
                                "eps10": beta * e10, "q01": chan.q01, "q10": chan.q10,
                                "value": v, "stat_err": s})
    value, stat_err, intermediate, residuals = extrapolate_grid(
        points, model, grid, order10, e01, e10)
    if clamped:
        log.warning("amplification clamped at %s", clamped)
    return ZNEResult(observable, value, stat_err, 0.0, order10, grid_values, intermediate,
                     raw_value, raw_err, {"residuals": residuals, "clamped": clamped,
                                          "assumed_eps01": e01, "assumed_eps10": e10})


def _variants(model, corners):
    e01, e10, d01, d10 = model.eps01, model.eps10, model.d_eps01, model.d_eps10
    if corners:
        return [(e01 + s1 * d01, e10 + s2 * d10) for s1 in (1, -1) for s2 in (1, -1)]
    return [(e01, e10 + d10), (e01, e10 - d10), (e01 + d01, e10), (e01 - d01, e10)]


def systematic_error(sample, model: ReadoutModel, grid: ZNEGrid | None = None,
                     observable="wall_mean", order10="linear", corners=False, baseline=None):
    """Largest shift of the ZNE result when the assumed true rates move by their
    calibration uncertainty (one parameter at a time, or all four sign corners)."""
    grid = grid or ZNEGrid()
    if baseline is None:
        baseline = zne_mitigate(sample, model, grid, observable, order10)
    if model.d_eps01 == 0 and model.d_eps10 == 0:
        return 0.0
    devs = []
    for e01, e10 in _variants(model, corners):
        e01, e10 = max(e01, 0.0), max(e10, 0.0)
        res = zne_mitigate(sample, model, grid, observable, order10, e01, e10)
        devs.append(abs(res.value - baseline.value))
    return float(max(devs))


def mitigate(sample, model, grid=None, observable="wall_mean", order10=None, corners=False):
    """ZNE with the statistical and systematic error budget filled in.

    ``order10`` defaults to linear for the wall mean and quadratic for the
    wall variance.
    """
    if order10 is None:
        order10 = "linear" if observable == "wall_mean" else "quadratic"
    res = zne_mitigate(sample, model, grid, observable, order10)
    res.sys_err = systematic_error(sample, model, grid, observable, order10, corners, res)
    return res


def _confusion_inverse(model):
    m = model.confusion_matrix()
    if abs(np.linalg.det(m)) < 1e-12:
        raise ValueError("confusion matrix is singular (eps01 + eps10 = 1)")
    return np.linalg.inv(m)


def confusion_inverse_mean(sample: BitstringSample, model: ReadoutModel):
    """Wall mean corrected by inverting the single-atom confusion matrix on each bond.

    The corrected estimate is an average of per-shot scores, so its standard
    error comes out directly. Returns (value, stat_err).
    """
    minv = _confusion_inverse(model)
    # corrected contribution of a measured bond pattern (a, b) to D_i:
    # sum over true (x, y) in {00, 11} of Minv[x, a] Minv[y, b]
    score = np.array([[minv[0, a] * minv[0, b] + minv[1, a] * minv[1, b] for b in (0, 1)]
                      for a in (0, 1)])
    bits = sample.bits()
    if sample.boundary == "periodic":
        left, right = bits, np.roll(bits, -1, axis=1)
    else:
        left, right = bits[:, :-1], bits[:, 1:]
    per_shot = score[left, right].sum(axis=1)
    n = per_shot.size
    value = float(per_shot.mean())
    err = float(per_shot.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return value, err


def noisy_distribution(state: QuantumState, eps01, eps10) -> np.ndarray:
    """Exact distribution over all 2^L measured bitstrings (index = bitmask)."""
    basis = state.basis
    L = basis.n_sites
    full = np.zeros(1 << L)
    full[basis.states] = state.probabilities()
    m = _channel(eps01, eps10)
    # bit j of the index is axis L-1-j of the C-ordered tensor
    t = full.reshape((2,) * L)
    for axis in range(L):
        t = np.moveaxis(np.tensordot(m, t, axes=([1], [axis])), 0, axis)
    return t.reshape(-1)


def noisy_wall_moments(state: QuantumState, eps01, eps10):
    """Exact (mean, variance) of the measured domain-wall number under readout noise."""
    p = noisy_distribution(state, eps01, eps10)
    L = state.basis.n_sites
    d = domain_wall_counts(np.arange(1 << L, dtype=np.int64), L, state.basis.boundary)
    d = d.astype(float)
    mean = float(p @ d)
    return mean, float(p @ d**2 - mean**2)


class ZeroNoiseExtrapolator(BaseEstimator):
    """Estimator wrapper around :func:`mitigate`.

    ``fit`` takes a :class:`BitstringSample` (or an (n_shots, L) 0/1 array)
    and stores the mitigated value and its error budget.

    Parameters
    ----------
    eps01, eps10, d_eps01, d_eps10 : float
        Calibrated readout rates and their uncertainties.
    observable : {"wall_mean", "wall_var"}
    order10 : {"linear", "quadratic"} or None
        Order of the eps10 extrapolation; None picks per observable.
    alphas, betas : tuple of float
        Noise multipliers.
    repeats : int
    random_state : int
    boundary : {"periodic", "open"}
        Used when fitting on a raw bit array.
    """

    def __init__(self, eps01=0.009, eps10=0.061, d_eps01=0.002, d_eps10=0.004,
                 observable="wall_mean", order10=None, alphas=(1.0, 2.0, 3.0),
                 betas=(1.0, 1.5, 2.0), repeats=4, random_state=0, boundary="periodic"):
        self.eps01 = eps01
        self.eps10 = eps10
        self.d_eps01 = d_eps01
        self.d_eps10 = d_eps10
        self.observable = observable
        self.order10 = order10
        self.alphas = alphas
        self.betas = betas
        self.repeats = repeats
        self.random_state = random_state
        self.boundary = boundary

    def fit(self, X, y=None):
        sample = X
        if not isinstance(X, BitstringSample):
            bits = np.asarray(X)
            if bits.ndim != 2 or not np.isin(bits, (0, 1)).all():
                raise ValueError("X must be a BitstringSample or an (n_shots, L) 0/1 array")
            weights = np.int64(1) << np.arange(bits.shape[1], dtype=np.int64)
            sample = BitstringSample.from_shots(bits.astype(np.int64) @ weights, bits.shape[1],
                                                self.boundary)
        model = ReadoutModel(self.eps01, self.eps10, self.d_eps01, self.d_eps10)
        grid = ZNEGrid(self.alphas, self.betas, self.repeats, self.random_state)
        self.result_ = mitigate(sample, model, grid, self.observable, self.order10)
        self.value_ = self.result_.value
        self.stat_err_ = self.result_.stat_err
        self.sys_err_ = self.result_.sys_err
        return self

    def predict(self, X=None):
        """The mitigated value (independent of ``X``)."""
        check_is_fitted(self, "result_")
        return self.value_
