"""Finite-order vector autoregressions: construction, simulation, OLS fitting,
and the population autocovariance and spectral density of a VAR(p).

Shapes follow one convention throughout: coefficient stacks are ``(p, n, n)``
arrays with ``coeffs[k-1]`` the lag-``k`` matrix, and time series are stored
channel-major as ``(n, T)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    InsufficientData,
    NotPositiveDefinite,
    ShapeMismatch,
    SingularRegressors,
    SingularTransfer,
    TruncationCapReached,
    Unstable,
)

SYMMETRY_TOL = 1e-12
DEFAULT_BURN_IN = 1000
RCOND_MIN = 1e-12
AUTOCOV_TOL = 1e-12
AUTOCOV_QMAX = 10_000


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def companion(coeffs):
    """Companion (VAR(1)) matrix of a ``(p, n, n)`` coefficient stack."""
    coeffs = np.asarray(coeffs, dtype=float)
    p, n, _ = coeffs.shape
    comp = np.zeros((n * p, n * p))
    comp[:n, :] = np.concatenate(list(coeffs), axis=1)
    if p > 1:
        comp[n:, :-n] = np.eye(n * (p - 1))
    return comp


def spectral_radius(a):
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(a))))


@dataclass(frozen=True, eq=False)
class VarModel:
    """VAR(p) coefficients plus innovations covariance.

    Instances built through :func:`validate_and_build_model` are guaranteed
    stable. Fitted models (``fitted=True``) may be unstable; check
    :attr:`is_stable` before passing them to the causality routines.
    """

    coeffs: np.ndarray
    sigma: np.ndarray
    rho: float
    fitted: bool = False

    @property
    def n(self) -> int:
        return self.coeffs.shape[1]

    @property
    def p(self) -> int:
        return self.coeffs.shape[0]

    @property
    def is_stable(self) -> bool:
        return self.rho < 1.0

    def companion(self):
        return companion(self.coeffs)

    def to_dict(self):
        return {
            "n": self.n,
            "p": self.p,
            "coeffs": self.coeffs.tolist(),
            "sigma": self.sigma.tolist(),
        }


def _check_sigma(sigma):
    if not np.all(np.isfinite(sigma)):
        raise NotPositiveDefinite("sigma has non-finite entries")
    if np.max(np.abs(sigma - sigma.T)) > SYMMETRY_TOL * max(1.0, np.max(np.abs(sigma))):
        raise NotPositiveDefinite("sigma is not symmetric")
    try:
        np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite("Cholesky factorisation of sigma failed") from None


def _coerce(coeffs, sigma):
    try:
        coeffs = np.array(coeffs, dtype=float)
        sigma = np.array(sigma, dtype=float)
    except ValueError as exc:
        raise ShapeMismatch(f"ragged matrix input: {exc}") from None
    if coeffs.ndim == 2:
        coeffs = coeffs[None]
    if coeffs.ndim != 3 or coeffs.shape[0] == 0:
        raise ShapeMismatch("coeffs must be a non-empty list of square matrices")
    p, n, n2 = coeffs.shape
    if n != n2 or n == 0:
        raise ShapeMismatch(f"coefficient matrices must be square, got {n}x{n2}")
    if sigma.shape != (n, n):
        raise ShapeMismatch(f"sigma must be {n}x{n}, got {sigma.shape}")
    if not np.all(np.isfinite(coeffs)):
        raise ShapeMismatch("coeffs contain non-finite entries")
    return coeffs, sigma


def validate_and_build_model(coeffs, sigma) -> VarModel:
    """Validate a coefficient stack and innovations covariance.

    Raises :class:`Unstable` if the companion spectral radius is >= 1,
    :class:`NotPositiveDefinite` if ``sigma`` is not SPD and
    :class:`ShapeMismatch` on inconsistent dimensions.
    """
    coeffs, sigma = _coerce(coeffs, sigma)
    _check_sigma(sigma)
    rho = spectral_radius(companion(coeffs))
    if rho >= 1.0:
        raise Unstable(rho)
    return VarModel(_frozen(coeffs), _frozen(sigma), rho)


def _fitted_model(coeffs, sigma):
    sigma = 0.5 * (sigma + sigma.T)
    rho = spectral_radius(companion(coeffs))
    return VarModel(_frozen(coeffs), _frozen(sigma), rho, fitted=True)


def random_var_model(n, p, rho, rng, coupling=1.0):
    """Random stable VAR(p) with companion spectral radius exactly ``rho``.

    Scaling lag-k coefficients by ``lam**k`` scales every companion eigenvalue
    by ``lam``, which is how the target radius is hit.
    """
    coeffs = rng.standard_normal((p, n, n)) * coupling
    rho0 = spectral_radius(companion(coeffs))
    lam = rho / rho0
    coeffs = coeffs * (lam ** np.arange(1, p + 1))[:, None, None]
    w = rng.standard_normal((n, n))
    sigma = w @ w.T / n + 0.5 * np.eye(n)
    return validate_and_build_model(coeffs, sigma)


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Channel-major observations, ``data.shape == (n, T)``."""

    data: np.ndarray
    demeaned: bool = False

    def __post_init__(self):
        data = np.array(self.data, dtype=float)
        if data.ndim == 1:
            data = data[None, :]
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ShapeMismatch("time series must be a non-empty n x T matrix")
        if not np.all(np.isfinite(data)):
            raise ValueError("time series contains non-finite values")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def T(self) -> int:
        return self.data.shape[1]

    def demean(self) -> "TimeSeries":
        if self.demeaned:
            return self
        return TimeSeries(self.data - self.data.mean(axis=1, keepdims=True), demeaned=True)

    def channels(self, idx) -> "TimeSeries":
        return TimeSeries(self.data[list(idx)], demeaned=self.demeaned)


def _innovations(model, length, seed):
    rng = np.random.Generator(np.random.Philox(seed))
    z = rng.standard_normal((length, model.n))
    return z @ np.linalg.cholesky(model.sigma).T


def _recurse(coeffs, eps):
    """Run the VAR recursion over ``eps`` of shape ``(L, R, n)`` from zero
    initial conditions.

    The per-row arithmetic does not depend on ``R``: every output row is
    bit-identical to running that realisation on its own.
    """
    p, n, _ = coeffs.shape
    L, R, _ = eps.shape
    a_flat = np.concatenate(list(coeffs), axis=1)[None]  # (1, n, p*n), lag-major
    x = np.zeros((L + p, R, n))
    x[p:] = eps
    for t in range(p, L + p):
        window = x[t - p:t][::-1].transpose(1, 0, 2).reshape(R, 1, p * n)
        x[t] += (a_flat * window).sum(axis=-1)
    return x[p:]


def simulate_var(model: VarModel, T: int, burn_in: int = DEFAULT_BURN_IN, seed: int = 0) -> TimeSeries:
    """Simulate ``T`` observations driven by Gaussian innovations with
    covariance ``model.sigma``; the first ``burn_in`` samples are discarded.
    """
    return simulate_var_batch(model, T, [seed], burn_in=burn_in)[0]


def simulate_var_batch(model: VarModel, T: int, seeds, burn_in: int = DEFAULT_BURN_IN):
    """Simulate one realisation per seed in a single vectorised recursion.

    Element ``k`` of the result equals ``simulate_var(model, T, burn_in,
    seeds[k])`` bit for bit.
    """
    if T < 1 or burn_in < 0:
        raise ValueError("T must be >= 1 and burn_in >= 0")
    L = T + burn_in
    eps = np.stack([_innovations(model, L, int(s)) for s in seeds], axis=1)
    x = _recurse(model.coeffs, eps)[burn_in:]
    return [TimeSeries(x[:, k, :].T) for k in range(len(seeds))]


def fit_var_ols(ts: TimeSeries, p: int, demean: bool = True) -> VarModel:
    """Least-squares VAR(p) fit of ``x_t`` on ``[x_{t-1}, ..., x_{t-p}]``.

    The residual covariance uses the degrees-of-freedom adjusted divisor
    ``(T - p) - n*p``. The result is flagged ``fitted`` and may be unstable.
    """
    n, T = ts.n, ts.T
    if p < 1:
        raise ValueError("model order must be >= 1")
    if T <= n * p + 1 or (T - p) - n * p < 1:
        raise InsufficientData(f"T={T} too short for a VAR({p}) on {n} channels")
    x = ts.demean().data if demean else ts.data
    y = x[:, p:].T  # (N, n)
    z = np.concatenate([x[:, p - k:T - k] for k in range(1, p + 1)], axis=0).T  # (N, n*p)
    gram = z.T @ z
    if not np.all(np.isfinite(gram)) or 1.0 / np.linalg.cond(gram) < RCOND_MIN:
        raise SingularRegressors("lagged-regressor Gram matrix is numerically singular")
    b = scipy.linalg.solve(gram, z.T @ y, assume_a="pos")  # (n*p, n)
    resid = y - z @ b
    sigma = resid.T @ resid / ((T - p) - n * p)
    coeffs = b.T.reshape(n, p, n).transpose(1, 0, 2)
    return _fitted_model(coeffs, sigma)


@dataclass(frozen=True, eq=False)
class AutocovSequence:
    """Autocovariances ``gammas[k] = E[x_t x_{t-k}^T]`` for ``k = 0..q``."""

    gammas: np.ndarray

    @property
    def n(self) -> int:
        return self.gammas.shape[1]

    @property
    def q(self) -> int:
        return self.gammas.shape[0] - 1

    def subset(self, idx) -> "AutocovSequence":
        idx = np.asarray(idx)
        return AutocovSequence(self.gammas[:, idx[:, None], idx[None, :]])

    def truncate(self, q) -> "AutocovSequence":
        return AutocovSequence(self.gammas[: q + 1])


def var_autocov(model: VarModel, tol: float = AUTOCOV_TOL, q_max: int = AUTOCOV_QMAX,
                n_lags: int | None = None) -> AutocovSequence:
    """Population autocovariance of a stable VAR.

    Lags ``0..p-1`` come from the companion-form Lyapunov equation; later lags
    from the Yule-Walker recursion. The sequence keeps every lag before the
    first one whose Frobenius norm drops below ``tol * ||Gamma_0||`` (so white
    noise gives ``q = 0``), or exactly ``n_lags`` lags when that is given.
    """
    if not model.is_stable:
        raise Unstable(model.rho)
    n, p = model.n, model.p
    comp = model.companion()
    q_big = np.zeros((n * p, n * p))
    q_big[:n, :n] = model.sigma
    cov = scipy.linalg.solve_discrete_lyapunov(comp, q_big)
    cov = 0.5 * (cov + cov.T)
    gammas = [cov[:n, j * n:(j + 1) * n] for j in range(p)]
    g0norm = np.linalg.norm(gammas[0])
    k = 0
    while True:
        k += 1
        if n_lags is not None and k > n_lags:
            return AutocovSequence(_frozen(gammas[:k]))
        if n_lags is None and k > q_max:
            raise TruncationCapReached(f"autocovariance has not decayed to {tol:g} by lag {q_max}")
        if k >= len(gammas):
            g = np.zeros((n, n))
            for j in range(1, p + 1):
                g += model.coeffs[j - 1] @ gammas[k - j]
            gammas.append(g)
        if n_lags is None and np.linalg.norm(gammas[k]) < tol * g0norm:
            return AutocovSequence(_frozen(gammas[:k]))


@dataclass(frozen=True, eq=False)
class SpectralMatrix:
    """Cross-spectral density ``values[k]`` at normalised angular frequency
    ``grid[k]`` in ``[0, pi]``."""

    grid: np.ndarray
    values: np.ndarray

    @property
    def n(self) -> int:
        return self.values.shape[1]


def freq_grid(n_freq):
    if n_freq < 2:
        raise ValueError("n_freq must be >= 2")
    return np.linspace(0.0, np.pi, n_freq)


def var_transfer(coeffs, grid):
    """``H(w) = (I - sum_k A_k e^{-ikw})^{-1}`` for each ``w`` in ``grid``."""
    coeffs = np.asarray(coeffs)
    p, n, _ = coeffs.shape
    phase = np.exp(-1j * np.outer(grid, np.arange(1, p + 1)))  # (F, p)
    abar = np.eye(n) - np.einsum("fk,kij->fij", phase, coeffs)
    try:
        h = np.linalg.inv(abar)
    except np.linalg.LinAlgError:
        h = None
    if h is None or not np.all(np.isfinite(h)):
        raise SingularTransfer("I - A(z) is singular on the frequency grid")
    return h


def var_spectrum(model: VarModel, n_freq: int = 256) -> SpectralMatrix:
    grid = freq_grid(n_freq)
    h = var_transfer(model.coeffs, grid)
    s = h @ model.sigma @ h.conj().transpose(0, 2, 1)
    return SpectralMatrix(grid, 0.5 * (s + s.conj().transpose(0, 2, 1)))
