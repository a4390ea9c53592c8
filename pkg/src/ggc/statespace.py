"""Innovations-form state-space models and the filtering DARE.

An innovations model is

    s_{t+1} = A s_t + K e_t
    x_t     = C s_t + e_t,        e_t ~ N(0, V)

Any subset of the observation channels of such a model is again an
innovations model with the same ``A``; finding its ``K`` and ``V`` means
solving a discrete-time algebraic Riccati equation. This is what lets the
reduced-model prediction error be read off a single full-model fit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptySubset, IndefiniteInnovations, NoConvergence, SingularResolvent, Unstable
from .var import SpectralMatrix, VarModel, freq_grid, spectral_radius

DARE_TOL = 1e-12
DARE_MAX_ITER = 100_000
DARE_MAX_DOUBLING = 100


@dataclass(frozen=True, eq=False)
class StateSpaceInnovations:
    A: np.ndarray
    C: np.ndarray
    K: np.ndarray
    V: np.ndarray

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def r(self) -> int:
        return self.C.shape[0]

    def check(self, tol=1e-10):
        """Raise if the model violates the stability or minimum-phase invariants."""
        rho = spectral_radius(self.A)
        if rho >= 1.0:
            raise Unstable(rho, what="state transition")
        rho_inv = spectral_radius(self.A - self.K @ self.C)
        if rho_inv >= 1.0 + tol:
            raise Unstable(rho_inv, what="inverse (A - KC)")
        try:
            np.linalg.cholesky(self.V)
        except np.linalg.LinAlgError:
            raise IndefiniteInnovations("innovations covariance is not positive-definite") from None
        return self


@dataclass(frozen=True, eq=False)
class DareSolution:
    P: np.ndarray
    K: np.ndarray
    V: np.ndarray
    iterations: int
    residual: float


def var_to_ss(model: VarModel) -> StateSpaceInnovations:
    """Embed a VAR(p) as an innovations model with ``m = n*p`` states.

    The state is the one-step prediction stacked with the lagged data it
    needs, so ``C`` picks out the top block, ``A`` is the companion matrix and
    ``K`` is the companion's first block column.
    """
    if not model.is_stable:
        raise Unstable(model.rho)
    n, p = model.n, model.p
    A = model.companion()
    C = np.zeros((n, n * p))
    C[:, :n] = np.eye(n)
    K = A[:, :n].copy()
    return StateSpaceInnovations(A, C, K, np.array(model.sigma))


def _riccati_map(P, A, C, Q, S, R):
    M = A @ P @ C.T + S
    V = C @ P @ C.T + R
    V = 0.5 * (V + V.T)
    try:
        L = np.linalg.cholesky(V)
    except np.linalg.LinAlgError:
        raise IndefiniteInnovations("C P C' + R lost positive-definiteness") from None
    G = np.linalg.solve(L, M.T)  # L^{-1} M'
    Pn = A @ P @ A.T + Q - G.T @ G
    return 0.5 * (Pn + Pn.T), M, V


def _relres(P, Pn):
    return np.linalg.norm(Pn - P) / max(1.0, np.linalg.norm(Pn))


def _doubling(A, C, Q, S, R, tol, max_steps):
    """Structure-preserving doubling on the cross-term-free form of the
    equation. Returns ``None`` if ``R`` is not invertible."""
    try:
        Rl = np.linalg.cholesky(0.5 * (R + R.T))
    except np.linalg.LinAlgError:
        return None
    RiC = np.linalg.solve(Rl.T, np.linalg.solve(Rl, C))  # R^{-1} C
    RiSt = np.linalg.solve(Rl.T, np.linalg.solve(Rl, S.T))  # R^{-1} S'
    Ak = (A - S @ RiC).T
    Gk = C.T @ RiC
    Hk = Q - S @ RiSt
    Hk = 0.5 * (Hk + Hk.T)
    eye = np.eye(A.shape[0])
    for step in range(1, max_steps + 1):
        W = eye + Gk @ Hk
        V1 = np.linalg.solve(W, Ak)
        V2 = np.linalg.solve(W, Gk)
        Hn = Hk + Ak.T @ Hk @ V1
        Gk = Gk + Ak @ V2 @ Ak.T
        Ak = Ak @ V1
        Hn = 0.5 * (Hn + Hn.T)
        Gk = 0.5 * (Gk + Gk.T)
        done = np.linalg.norm(Hn - Hk) <= tol * max(1.0, np.linalg.norm(Hn))
        Hk = Hn
        if done:
            return Hk, step
    return Hk, max_steps


def solve_dare(A, C, Q, S, R, tol: float = DARE_TOL, max_iter: int = DARE_MAX_ITER) -> DareSolution:
    """Stabilising solution of the Kalman-filter Riccati equation

        P = A P A' + Q - (A P C' + S)(C P C' + R)^{-1}(A P C' + S)'

    with gain ``K = (A P C' + S) V^{-1}`` and innovations covariance
    ``V = C P C' + R``. Doubling is tried first; plain fixed-point iteration
    then polishes (or, for singular ``R``, does all the work). The reported
    residual is ``||P - f(P)||_F / max(1, ||P||_F)``.
    """
    A, C, Q, S, R = (np.asarray(a, dtype=float) for a in (A, C, Q, S, R))
    iterations = 0
    dbl = _doubling(A, C, Q, S, R, tol, DARE_MAX_DOUBLING)
    if dbl is not None:
        P, iterations = dbl
    else:
        P = np.array(Q, dtype=float)

    Pn, M, V = _riccati_map(P, A, C, Q, S, R)
    res = _relres(P, Pn)
    while res >= tol and iterations < max_iter:
        P = Pn
        Pn, M, V = _riccati_map(P, A, C, Q, S, R)
        res = _relres(P, Pn)
        iterations += 1
    if res >= tol:
        raise NoConvergence(res, iterations)
    K = np.linalg.solve(V, M.T).T
    return DareSolution(P, K, V, iterations, res)


def subprocess_innovations(ss: StateSpaceInnovations, keep, tol: float = DARE_TOL) -> StateSpaceInnovations:
    """Innovations model for the observation channels listed in ``keep``
    (in that order). The state dimension is unchanged."""
    keep = np.asarray(keep, dtype=int).ravel()
    if keep.size == 0:
        raise EmptySubset("keep must name at least one channel")
    if len(set(keep.tolist())) != keep.size or keep.min() < 0 or keep.max() >= ss.r:
        raise IndexError(f"invalid channel subset {keep.tolist()}")
    Cr = ss.C[keep]
    KV = ss.K @ ss.V
    Q = KV @ ss.K.T
    S = KV[:, keep]
    R = ss.V[np.ix_(keep, keep)]
    sol = solve_dare(ss.A, Cr, 0.5 * (Q + Q.T), S, R, tol=tol)
    return StateSpaceInnovations(ss.A, Cr, sol.K, sol.V)


def _resolvent(A, B, grid):
    """``(e^{iw} I - A)^{-1} B`` on the grid, shape ``(F, m, k)``."""
    z = np.exp(1j * grid)[:, None, None]
    M = z * np.eye(A.shape[0]) - A
    try:
        X = np.linalg.solve(M, np.broadcast_to(B, (len(grid),) + B.shape).astype(complex))
    except np.linalg.LinAlgError:
        X = None
    if X is None or not np.all(np.isfinite(X)):
        raise SingularResolvent("e^{iw} I - A is singular on the frequency grid")
    return X


def ss_transfer(ss: StateSpaceInnovations, grid):
    """``G(w) = I + C (e^{iw} I - A)^{-1} K``, shape ``(F, r, r)``."""
    return np.eye(ss.r) + ss.C @ _resolvent(ss.A, ss.K, grid)


def ss_inverse_transfer(ss: StateSpaceInnovations, grid):
    """``G(w)^{-1} = I - C (e^{iw} I - (A - K C))^{-1} K``."""
    return np.eye(ss.r) - ss.C @ _resolvent(ss.A - ss.K @ ss.C, ss.K, grid)


def ss_spectrum(ss: StateSpaceInnovations, n_freq: int = 256) -> SpectralMatrix:
    grid = freq_grid(n_freq)
    G = ss_transfer(ss, grid)
    S = G @ ss.V @ G.conj().transpose(0, 2, 1)
    return SpectralMatrix(grid, 0.5 * (S + S.conj().transpose(0, 2, 1)))
