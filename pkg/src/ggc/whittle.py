"""Whittle's multichannel Levinson recursion.

Turns an autocovariance sequence into VAR coefficients and a prediction-error
covariance without touching data or state space. It gives a second,
independent route to reduced-model innovations covariances: a subprocess of
a VAR is generally VARMA, so the reduced model is approximated by a VAR whose
order grows with the autocovariance decay length.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateStep
from .var import AUTOCOV_TOL, AutocovSequence, VarModel, _fitted_model, var_autocov
from .causality import _resolve_indices


@dataclass(frozen=True, eq=False)
class WhittleResult:
    model: VarModel
    errors: list  # forward prediction-error covariance after each order 0..q

    @property
    def V(self):
        return self.errors[-1]


def _chol_check(M, k, which):
    try:
        np.linalg.cholesky(0.5 * (M + M.T))
    except np.linalg.LinAlgError:
        raise DegenerateStep(f"{which} prediction-error covariance not positive-definite at order {k}") from None


def whittle_factorize(acov: AutocovSequence, order: int | None = None) -> WhittleResult:
    """Fit a VAR(order) to ``acov`` by the forward/backward Levinson-Whittle
    recursion (``order`` defaults to ``acov.q``)."""
    g = np.asarray(acov.gammas, dtype=float)
    q = acov.q if order is None else int(order)
    if q < 0 or q > acov.q:
        raise ValueError(f"order must lie in [0, {acov.q}]")
    n = acov.n
    g0 = 0.5 * (g[0] + g[0].T)
    _chol_check(g0, 0, "lag-0")
    Af = np.zeros((q, n, n))  # Af[j-1] = A_j
    Ab = np.zeros((q, n, n))  # backward coefficients
    Vf = g0.copy()
    Vb = g0.copy()
    errors = [Vf.copy()]
    for k in range(q):
        delta = g[k + 1] - np.einsum("jab,jbc->ac", Af[:k], g[k:0:-1])
        kf = np.linalg.solve(Vb.T, delta.T).T
        kb = np.linalg.solve(Vf.T, delta).T
        if k:
            af_old = Af[:k].copy()
            Af[:k] -= kf @ Ab[:k][::-1]
            Ab[:k] -= kb @ af_old[::-1]
        Af[k] = kf
        Ab[k] = kb
        Vf = Vf - kf @ delta.T
        Vb = Vb - kb @ delta
        Vf = 0.5 * (Vf + Vf.T)
        Vb = 0.5 * (Vb + Vb.T)
        _chol_check(Vf, k + 1, "forward")
        _chol_check(Vb, k + 1, "backward")
        errors.append(Vf.copy())
    coeffs = Af if q else np.zeros((1, n, n))
    return WhittleResult(_fitted_model(coeffs, Vf), errors)


def gc_time_via_whittle(model: VarModel, source, target, conditioning=None, tol: float = AUTOCOV_TOL,
                        order: int | None = None, return_order: bool = False):
    """Time-domain conditional GGC computed from the model autocovariance.

    The reduced (source-omitted) process is factorised at the autocovariance
    decay length unless ``order`` is given; with an explicit ``order`` this
    is the population limit of a dual regression at that reduced order.
    """
    t, s, c = _resolve_indices(model.n, source, target, conditioning)
    if order is None:
        acov = var_autocov(model, tol=tol)
        q = acov.q
    else:
        q = int(order)
        acov = var_autocov(model, n_lags=q)
    full = np.concatenate([t, s, c])
    if full.size == model.n:
        vfull = model.sigma[np.ix_(t, t)]
    else:
        vfull = whittle_factorize(acov.subset(full), q).V[: t.size, : t.size]
    red = np.concatenate([t, c])
    vred = whittle_factorize(acov.subset(red), q).V[: t.size, : t.size]
    val = float(np.linalg.slogdet(vred)[1] - np.linalg.slogdet(vfull)[1])
    return (val, q) if return_order else val

