"""Fits and statistical comparisons on simulated or measured defect data."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter1d
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh
from scipy.special import gammaln
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_1d, check_positive
from .basis import cyclic_shift, reflect
from .exceptions import DegenerateFitError, EigensolverError
from .observables import DefectDistribution

TWO_PI = 2.0 * np.pi
#: correlator magnitudes below this are dropped from log-space fits
UNDERFLOW = 1e-12


@dataclass(frozen=True)
class FitResult:
    params: dict
    stderr: dict
    covariance: np.ndarray
    residual_norm: float
    window: tuple
    n_points: int

    def __getitem__(self, name):
        return self.params[name]

    def to_dict(self):
        return {
            "params": [{"name": k, "value": float(v), "stderr": float(self.stderr[k])}
                       for k, v in self.params.items()],
            "covariance": np.asarray(self.covariance).tolist(),
            "residual_norm": float(self.residual_norm),
            "window": [float(w) for w in self.window],
            "n_points": self.n_points,
        }


def weighted_polyfit(x, y, deg, sigma=None):
    """Least-squares polynomial fit, coefficients in increasing order.

    With ``sigma`` the points are weighted by 1/sigma^2 and the covariance is
    taken at face value; without it the covariance is scaled by the residual
    variance. Returns (coef, cov, residual_norm).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    if n < deg + 1:
        raise DegenerateFitError(f"need at least {deg + 1} points for degree {deg}, got {n}")
    A = np.vander(x, deg + 1, increasing=True)
    if sigma is None:
        w = np.ones(n)
    else:
        sigma = np.asarray(sigma, dtype=float)
        if np.any(sigma <= 0):
            raise DegenerateFitError("standard errors must be positive for weighting")
        w = 1.0 / sigma
    Aw = A * w[:, None]
    yw = y * w
    coef, *_ = np.linalg.lstsq(Aw, yw, rcond=None)
    resid = yw - Aw @ coef
    cov = np.linalg.pinv(Aw.T @ Aw)
    if sigma is None:
        dof = n - (deg + 1)
        cov = cov * (resid @ resid / dof if dof > 0 else 0.0)
    return coef, cov, float(np.linalg.norm(resid))


def fit_correlation_length(l, values, stderr=None, window=(1, 6)) -> FitResult:
    """Fit |C(l)| = A exp(-l / xi) by weighted linear regression of log|C| on l.

    Points outside ``window`` (inclusive) are ignored, as are magnitudes
    below :data:`UNDERFLOW`. A non-decaying fit gives ``xi = inf``.
    """
    l = check_1d(l, "l")
    values = np.abs(check_1d(values, "values"))
    if values.shape != l.shape:
        raise ValueError("l and values must have the same length")
    if stderr is not None:
        stderr = check_1d(stderr, "stderr")
    inside = (l >= window[0]) & (l <= window[1])
    tiny = inside & (values < UNDERFLOW)
    if np.any(tiny):
        warnings.warn(f"dropping vanishing correlator values at l={l[tiny].tolist()}",
                      RuntimeWarning, stacklevel=2)
    use = inside & ~tiny
    if use.sum() < 3:
        raise DegenerateFitError(
            f"need >= 3 non-vanishing points in window {window}, got {int(use.sum())}",
            offending=l[tiny].tolist())
    sig = None if stderr is None else stderr[use] / values[use]
    coef, cov, res = weighted_polyfit(l[use], np.log(values[use]), 1, sig)
    intercept, slope = coef
    slope_err = np.sqrt(max(cov[1, 1], 0.0))
    if slope < 0:
        xi = -1.0 / slope
        xi_err = slope_err / slope**2
    else:
        xi, xi_err = np.inf, np.inf
    return FitResult(
        params={"xi": xi, "amplitude": float(np.exp(intercept)), "slope": float(slope)},
        stderr={"xi": float(xi_err), "amplitude": float(np.exp(intercept) * np.sqrt(cov[0, 0])),
                "slope": float(slope_err)},
        covariance=cov, residual_norm=res, window=tuple(window), n_points=int(use.sum()))


def default_power_law_window(x):
    """Middle third of the log-range of ``x``."""
    lo, hi = np.log(np.min(x)), np.log(np.max(x))
    span = hi - lo
    return float(np.exp(lo + span / 3.0)), float(np.exp(lo + 2.0 * span / 3.0))


def fit_power_law(x, y, stderr=None, window=None) -> FitResult:
    """Fit y = A x^(-mu) in log-log space over ``window`` (inclusive x-range)."""
    x = check_1d(x, "x")
    y = check_1d(y, "y")
    if np.any(x <= 0) or np.any(y <= 0):
        raise DegenerateFitError("power-law fit needs positive x and y")
    if window is None:
        window = default_power_law_window(x)
    # tolerate grid points that sit on the window edge up to rounding
    eps = 1e-9 * max(abs(window[0]), abs(window[1]))
    use = (x >= window[0] - eps) & (x <= window[1] + eps)
    if use.sum() < 3:
        raise DegenerateFitError(f"need >= 3 points in window {window}, got {int(use.sum())}")
    sig = None if stderr is None else check_1d(stderr, "stderr")[use] / y[use]
    coef, cov, res = weighted_polyfit(np.log(x[use]), np.log(y[use]), 1, sig)
    intercept, slope = coef
    return FitResult(
        params={"mu": float(-slope), "amplitude": float(np.exp(intercept))},
        stderr={"mu": float(np.sqrt(max(cov[1, 1], 0.0))),
                "amplitude": float(np.exp(intercept) * np.sqrt(max(cov[0, 0], 0.0)))},
        covariance=cov, residual_norm=res, window=tuple(window), n_points=int(use.sum()))


def _check_lambda(lam):
    return check_positive(lam, "lambda")


def poisson_pmf(lam, k):
    lam = _check_lambda(lam)
    k = np.asarray(k)
    out = np.exp(k * np.log(lam) - lam - gammaln(k + 1.0))
    return float(out) if out.ndim == 0 else out


def _log_cosh(x):
    return x + np.log1p(np.exp(-2.0 * x)) - np.log(2.0)


def even_poisson_pmf(lam, k):
    """Poisson restricted to even k and renormalised by cosh(lambda)."""
    lam = _check_lambda(lam)
    k = np.asarray(k)
    out = np.exp(k * np.log(lam) - gammaln(k + 1.0) - _log_cosh(lam))
    out = np.where(k % 2 == 0, out, 0.0)
    return float(out) if out.ndim == 0 else out


def _as_pmf_array(dist):
    if isinstance(dist, DefectDistribution):
        return dist.probabilities
    if isinstance(dist, dict):
        return DefectDistribution.from_pmf(dist).probabilities
    return np.asarray(dist, dtype=float)


def compare_distribution(empirical, reference) -> float:
    """Total-variation distance between two pmfs over k = 0, 1, ..."""
    p = _as_pmf_array(empirical)
    q = _as_pmf_array(reference)
    n = max(p.size, q.size)
    p = np.pad(p, (0, n - p.size))
    q = np.pad(q, (0, n - q.size))
    return 0.5 * float(np.abs(p - q).sum())


def even_poisson_reference(dist: DefectDistribution, kmax=None):
    """Even-Poisson pmf with the same mean as ``dist``, on k = 0..kmax."""
    kmax = dist.probabilities.size - 1 if kmax is None else kmax
    return even_poisson_pmf(dist.mean, np.arange(kmax + 1))


def anomaly_ratio(mean, var) -> float:
    """var D / <D>; values above 1 flag super-Poissonian defect statistics."""
    if not mean > 0:
        raise ValueError(f"mean must be positive, got {mean}")
    return float(var) / float(mean)


@dataclass(frozen=True)
class SpectrumResult:
    """One-sided magnitude spectrum normalised so that sum(magnitudes**2) equals
    the sum of squared (detrended, windowed) samples."""

    frequencies: np.ndarray
    magnitudes: np.ndarray
    resolution: float
    peak_frequency: float
    peak_magnitude: float
    gap_frequency: float | None = None

    def subgap_ratio(self, gap_frequency=None):
        """Largest magnitude below (gap - resolution), relative to the dominant peak.

        The DC bin is excluded since it only carries detrending residue.
        """
        nu = self.gap_frequency if gap_frequency is None else gap_frequency
        if nu is None:
            raise ValueError("no gap frequency available")
        below = (self.frequencies > 0) & (self.frequencies < nu - self.resolution)
        if not np.any(below) or self.peak_magnitude == 0:
            return 0.0
        return float(self.magnitudes[below].max() / self.peak_magnitude)

    def to_dict(self):
        return {
            "frequencies_MHz": self.frequencies.tolist(),
            "magnitudes": self.magnitudes.tolist(),
            "resolution_MHz": self.resolution,
            "peak_frequency_MHz": self.peak_frequency,
            "peak_magnitude": self.peak_magnitude,
            "gap_frequency_MHz": self.gap_frequency,
            "subgap_ratio": None if self.gap_frequency is None else self.subgap_ratio(),
        }


def hold_spectrum(times, values, detrend="mean", taper="rectangular", running_window=None,
                  gap_frequency=None) -> SpectrumResult:
    """Fourier magnitude of a uniformly sampled series (time in us, frequency in MHz).

    ``detrend="running-mean"`` subtracts a centred moving average of
    ``running_window`` samples (default: a quarter of the series).
    """
    t = check_1d(times, "times")
    x = check_1d(values, "values")
    n = t.size
    if n < 16:
        raise ValueError(f"need at least 16 samples, got {n}")
    if x.size != n:
        raise ValueError("times and values differ in length")
    dt = np.diff(t)
    if np.any(dt <= 0) or np.ptp(dt) > 1e-6 * dt.mean():
        raise ValueError("samples must be uniformly spaced in time")
    step = float(dt.mean())
    if detrend == "mean":
        x = x - x.mean()
    elif detrend == "running-mean":
        width = running_window or max(n // 4, 2)
        x = x - uniform_filter1d(x, size=width, mode="nearest")
    elif detrend is not None:
        raise ValueError(f"unknown detrend {detrend!r}")
    if taper == "hann":
        x = x * np.hanning(n)
    elif taper != "rectangular":
        raise ValueError(f"unknown taper {taper!r}")
    spec = np.fft.rfft(x)
    weight = np.full(spec.size, 2.0)
    weight[0] = 1.0
    if n % 2 == 0:
        weight[-1] = 1.0
    mags = np.abs(spec) * np.sqrt(weight / n)
    freqs = np.fft.rfftfreq(n, step)
    k = 1 + int(np.argmax(mags[1:]))
    return SpectrumResult(freqs, mags, 1.0 / (n * step), float(freqs[k]), float(mags[k]),
                          gap_frequency)


@dataclass(frozen=True)
class GapResult:
    E0: float
    E1: float
    gap: float
    nu: float
    sector: str = "full"

    def to_dict(self):
        return {"E0": self.E0, "E1": self.E1, "gap_rad_per_us": self.gap, "nu_MHz": self.nu,
                "sector": self.sector}


def _symmetry_permutations(H):
    """Basis permutations for the lattice symmetries of ``H`` (rotations and
    reflections of a ring, the reflection of an open chain)."""
    basis = H.basis
    L = basis.n_sites
    states = basis.states
    group = []
    shifts = range(L) if basis.boundary == "periodic" else [0]
    for k in shifts:
        rotated = cyclic_shift(states, L, k) if k else states
        group.append(rotated)
        group.append(reflect(rotated, L))
    perms = []
    for g in group:
        idx = basis.indices(g)
        if np.any(idx < 0):
            raise ValueError("basis is not closed under the lattice symmetries")
        if not np.allclose(H.diag_interaction[idx], H.diag_interaction, rtol=1e-9, atol=1e-9):
            raise ValueError("geometry does not have the lattice symmetries of the chain")
        perms.append(idx)
    return perms


def spectral_gap(H, omega, delta, sector="full", tol=1e-12, dense_below=400) -> GapResult:
    """Two lowest eigenvalues of the static Hamiltonian at (omega, delta), rad/us.

    ``sector="symmetric"`` restricts to states invariant under every
    lattice symmetry, which is where evolution from the vacuum stays; on an
    ordered ring this skips the near-degenerate partner of the ground state.
    """
    if H.dim < 2:
        raise ValueError("need a basis of dimension >= 2")
    if sector not in ("full", "symmetric"):
        raise ValueError(f"unknown sector {sector!r}")

    def hmul(x):
        x = np.ascontiguousarray(x, dtype=np.complex128)
        return H.apply_static(omega, delta, x)

    if sector == "full":
        matvec = hmul
    else:
        perms = _symmetry_permutations(H)
        diag = H.diagonal(delta)
        degree = np.diff(H._adjacency[0]).max()
        shift = np.abs(diag).max() + abs(omega) * 0.5 * degree + 1.0

        def project(x):
            return sum(x[p] for p in perms) / len(perms)

        def matvec(x):
            x = np.ascontiguousarray(x, dtype=np.complex128)
            px = project(x)
            return hmul(px) + shift * (x - px)

    if H.dim <= dense_below:
        eye = np.eye(H.dim, dtype=np.complex128)
        dense = np.column_stack([matvec(eye[:, i]) for i in range(H.dim)])
        evals = np.linalg.eigvalsh(0.5 * (dense + dense.conj().T))[:2]
    else:
        op = LinearOperator((H.dim, H.dim), matvec=matvec, dtype=np.complex128)
        v0 = np.ones(H.dim, dtype=np.complex128) / np.sqrt(H.dim)
        try:
            evals = eigsh(op, k=2, which="SA", tol=tol, v0=v0, ncv=min(H.dim, 40),
                          maxiter=10 * H.dim, return_eigenvectors=False)
        except ArpackNoConvergence as exc:
            raise EigensolverError(
                f"ARPACK did not converge: {len(exc.eigenvalues)} of 2 eigenvalues found") from exc
        evals = np.sort(evals.real)
    e0, e1 = float(evals[0]), float(evals[1])
    gap = e1 - e0
    return GapResult(e0, e1, gap, gap / TWO_PI, sector)


class CorrelationLengthRegressor(RegressorMixin, BaseEstimator):
    """Exponential-decay fit of correlator magnitudes against displacement.

    Parameters
    ----------
    window : tuple of float
        Inclusive displacement range used in the fit.

    Attributes
    ----------
    xi_ : float
        Correlation length.
    xi_err_ : float
    amplitude_ : float
    result_ : FitResult
    """

    def __init__(self, window=(1, 6)):
        self.window = window

    def fit(self, X, y, y_err=None):
        self.result_ = fit_correlation_length(X, y, y_err, self.window)
        self.xi_ = self.result_["xi"]
        self.xi_err_ = self.result_.stderr["xi"]
        self.amplitude_ = self.result_["amplitude"]
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "result_")
        l = check_1d(X, "X")
        return self.amplitude_ * np.exp(self.result_["slope"] * l)


class PowerLawRegressor(RegressorMixin, BaseEstimator):
    """Log-log fit of y = A x^(-mu).

    ``window=None`` uses the middle third of the log-range of the training x.
    """

    def __init__(self, window=None):
        self.window = window

    def fit(self, X, y, y_err=None):
        self.result_ = fit_power_law(X, y, y_err, self.window)
        self.exponent_ = self.result_["mu"]
        self.exponent_err_ = self.result_.stderr["mu"]
        self.amplitude_ = self.result_["amplitude"]
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "result_")
        return self.amplitude_ * check_1d(X, "X") ** (-self.exponent_)
