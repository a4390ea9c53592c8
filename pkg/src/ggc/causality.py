"""Granger-Geweke causality: exact (from a model), single-regression
estimates (from one fitted VAR) and the dual-regression baseline.

Matrices of pairwise results are indexed ``F[target, source]``. Sources and
targets may be single channels or index blocks; the conditioning set
defaults to every remaining channel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UnstableFit
from .statespace import (
    StateSpaceInnovations,
    ss_inverse_transfer,
    ss_transfer,
    subprocess_innovations,
    var_to_ss,
)
from .var import TimeSeries, VarModel, fit_var_ols, freq_grid, validate_and_build_model

CLAMP_TOL = 1e-10

SINGLE_EXACT = "single-regression-exact"
SINGLE_ESTIMATED = "single-regression-estimated"
DUAL = "dual-regression"


@dataclass(frozen=True, eq=False)
class GcTimeResult:
    F: np.ndarray  # F[i, j] = F_{j -> i | rest}, nats; diagonal zero
    method: str
    raw_min: float = 0.0  # smallest off-diagonal value before clamping

    @property
    def n(self) -> int:
        return self.F.shape[0]

    @property
    def mask(self):
        return ~np.eye(self.n, dtype=bool)


@dataclass(frozen=True, eq=False)
class GcSpectralResult:
    grid: np.ndarray
    f: np.ndarray  # f[i, j, k] = f_{j -> i | rest}(grid[k])
    method: str
    raw_min: float = 0.0

    @property
    def n(self) -> int:
        return self.f.shape[0]


def _as_idx(x):
    return np.atleast_1d(np.asarray(x, dtype=int)).ravel()


def _resolve_indices(n, source, target, conditioning=None):
    t, s = _as_idx(target), _as_idx(source)
    for idx in (t, s):
        if idx.size == 0 or idx.min() < 0 or idx.max() >= n:
            raise IndexError(f"channel index out of range for n={n}")
    if set(t.tolist()) & set(s.tolist()):
        raise IndexError("source and target must be disjoint")
    used = set(t.tolist()) | set(s.tolist())
    if conditioning is None:
        c = np.array([k for k in range(n) if k not in used], dtype=int)
    else:
        c = _as_idx(conditioning)
        if c.size and (c.min() < 0 or c.max() >= n):
            raise IndexError(f"conditioning index out of range for n={n}")
        if set(c.tolist()) & used:
            raise IndexError("conditioning set must exclude source and target")
    return t, s, c


def _logdet(m):
    return float(np.linalg.slogdet(m)[1])


def _restrict(ss: StateSpaceInnovations, t, s, c):
    """Full model for the channels (t, s, c), in local coordinates when a
    strict subset is involved."""
    full = np.concatenate([t, s, c])
    if full.size == ss.r:
        return ss, t, s, c
    sub = subprocess_innovations(ss, full)
    nt, ns = t.size, s.size
    return sub, np.arange(nt), nt + np.arange(ns), nt + ns + np.arange(c.size)


def _time_from_ss(ss, t, s, c):
    red = np.concatenate([t, c])
    rss = subprocess_innovations(ss, red)
    tl = np.arange(t.size)
    return _logdet(rss.V[np.ix_(tl, tl)]) - _logdet(ss.V[np.ix_(t, t)])


def _spectral_from_ss(ss, t, s, c, grid, H=None):
    """Conditional spectral GGC in state-space form.

    The reduced-model inverse transfer function whitens the (t, c) part of the
    full process; the result splits the target's reduced innovations power
    into the part carried by the full-model target innovations and the rest.
    """
    red = np.concatenate([t, c])
    rss = subprocess_innovations(ss, red)
    if H is None:
        H = ss_transfer(ss, grid)
    G = ss_inverse_transfer(rss, grid) @ H[:, red, :]  # (F, |red|, r)
    tl = np.arange(t.size)
    w = np.setdiff1d(np.arange(ss.r), t)
    V = ss.V
    Vxx = V[np.ix_(t, t)]
    Vxw = V[np.ix_(t, w)]
    Vww_x = V[np.ix_(w, w)] - Vxw.T @ np.linalg.solve(Vxx, Vxw)
    Gxw = G[:, tl][:, :, w]
    VR = rss.V[np.ix_(tl, tl)]
    intrinsic = VR - Gxw @ Vww_x @ Gxw.conj().transpose(0, 2, 1)
    if t.size == 1:
        det_int = intrinsic[:, 0, 0].real
        return np.log(VR[0, 0]) - np.log(det_int)
    _, ld = np.linalg.slogdet(intrinsic)
    return _logdet(VR) - ld.real


def _clamp(x):
    return np.where(x < 0.0, 0.0, x)


def gc_time_ss(ss: StateSpaceInnovations, source, target, conditioning=None) -> float:
    t, s, c = _resolve_indices(ss.r, source, target, conditioning)
    sub, t, s, c = _restrict(ss, t, s, c)
    return _time_from_ss(sub, t, s, c)


def gc_spectral_ss(ss: StateSpaceInnovations, source, target, conditioning=None, n_freq=256, grid=None):
    t, s, c = _resolve_indices(ss.r, source, target, conditioning)
    sub, t, s, c = _restrict(ss, t, s, c)
    grid = freq_grid(n_freq) if grid is None else grid
    return _spectral_from_ss(sub, t, s, c, grid)


def gc_time_exact(model: VarModel, source, target, conditioning=None) -> float:
    """``ln(|V'_tt| / |Sigma_tt|)`` with ``V'`` the innovations covariance of
    the source-omitted subprocess."""
    return gc_time_ss(var_to_ss(model), source, target, conditioning)


def gc_spectral_exact(model: VarModel, source, target, conditioning=None, n_freq: int = 256):
    """Conditional spectral GGC on ``n_freq`` points of ``[0, pi]``.

    Returns ``(grid, f)``; values are clamped at zero.
    """
    grid = freq_grid(n_freq)
    f = gc_spectral_ss(var_to_ss(model), source, target, conditioning, grid=grid)
    return grid, _clamp(f)


def gc_all_pairs_ss(ss: StateSpaceInnovations, n_freq=None, method=SINGLE_EXACT):
    """Pairwise-conditional GGC for every ordered pair of channels.

    One reduced model is solved per source and shared by all targets. Returns
    a :class:`GcTimeResult`, plus a :class:`GcSpectralResult` when
    ``n_freq`` is given.
    """
    n = ss.r
    F = np.zeros((n, n))
    spectral = n_freq is not None
    if spectral:
        grid = freq_grid(n_freq)
        H = ss_transfer(ss, grid)
        f = np.zeros((n, n, grid.size))
        Vinv_cache = {}
    for j in range(n):
        red = np.array([k for k in range(n) if k != j], dtype=int)
        rss = subprocess_innovations(ss, red)
        if spectral:
            Binv = ss_inverse_transfer(rss, grid)
            G = Binv @ H[:, red, :]
        for li, i in enumerate(red):
            F[i, j] = np.log(rss.V[li, li]) - np.log(ss.V[i, i])
            if spectral:
                w = np.array([k for k in range(n) if k != i], dtype=int)
                if i not in Vinv_cache:
                    Vxw = ss.V[i, w]
                    Vinv_cache[i] = ss.V[np.ix_(w, w)] - np.outer(Vxw, Vxw) / ss.V[i, i]
                gxw = G[:, li, w]  # (F, n-1)
                quad = np.einsum("fa,ab,fb->f", gxw, Vinv_cache[i], gxw.conj()).real
                f[i, j] = np.log(rss.V[li, li]) - np.log(rss.V[li, li] - quad)
    mask = ~np.eye(n, dtype=bool)
    raw_min = float(F[mask].min()) if n > 1 else 0.0
    tres = GcTimeResult(_clamp(F), method, raw_min)
    if not spectral:
        return tres
    fm = f[mask]
    sres = GcSpectralResult(grid, _clamp(f), method, float(fm.min()) if fm.size else 0.0)
    return tres, sres


def gc_all_pairs_time(model) -> GcTimeResult:
    ss = model if isinstance(model, StateSpaceInnovations) else var_to_ss(model)
    return gc_all_pairs_ss(ss)


def gc_all_pairs_spectral(model, n_freq: int = 256) -> GcSpectralResult:
    ss = model if isinstance(model, StateSpaceInnovations) else var_to_ss(model)
    return gc_all_pairs_ss(ss, n_freq=n_freq)[1]


def single_regression_gc(ts: TimeSeries, p: int, n_freq: int | None = 256):
    """All-pairs GGC from ONE full VAR(p) fit.

    Reduced-model quantities come from the fitted model's state-space form;
    no reduced regression is run on the data. Returns ``(time, spectral)``,
    or just the time result when ``n_freq`` is None.
    """
    model = fit_var_ols(ts, p)
    if not model.is_stable:
        raise UnstableFit(model.rho)
    return gc_all_pairs_ss(var_to_ss(model), n_freq=n_freq, method=SINGLE_ESTIMATED)


def single_regression_gc_pair(ts: TimeSeries, p: int, source, target, conditioning=None, grid=None):
    """Spectral GGC for one pair from one full fit (used by the null sampler)."""
    model = fit_var_ols(ts, p)
    if not model.is_stable:
        raise UnstableFit(model.rho)
    return _clamp(gc_spectral_ss(var_to_ss(model), source, target, conditioning, grid=grid))


def dual_regression_gc_time(ts: TimeSeries, p_full: int, p_reduced: int | None, source, target,
                            conditioning=None) -> float:
    """``ln(|S'_tt| / |S_tt|)`` from two independent OLS fits. Not clamped."""
    t, s, c = _resolve_indices(ts.n, source, target, conditioning)
    p_reduced = p_full if p_reduced is None else p_reduced
    full = fit_var_ols(ts.channels(np.concatenate([t, s, c])), p_full)
    red = fit_var_ols(ts.channels(np.concatenate([t, c])), p_reduced)
    k = t.size
    return _logdet(red.sigma[:k, :k]) - _logdet(full.sigma[:k, :k])


def dual_regression_all_pairs(ts: TimeSeries, p_full: int, p_reduced: int | None = None) -> GcTimeResult:
    """Pairwise-conditional dual-regression GGC for every ordered pair."""
    n = ts.n
    p_reduced = p_full if p_reduced is None else p_reduced
    ts = ts.demean()
    full = fit_var_ols(ts, p_full)
    F = np.zeros((n, n))
    for j in range(n):
        red_idx = [k for k in range(n) if k != j]
        red = fit_var_ols(ts.channels(red_idx), p_reduced)
        for li, i in enumerate(red_idx):
            F[i, j] = np.log(red.sigma[li, li]) - np.log(full.sigma[i, i])
    mask = ~np.eye(n, dtype=bool)
    return GcTimeResult(F, DUAL, float(F[mask].min()) if n > 1 else 0.0)


def rescale_model(model: VarModel, scaling) -> VarModel:
    """Model of ``D x_t`` with ``D = diag(scaling)``."""
    c = np.asarray(scaling, dtype=float)
    if c.shape != (model.n,) or np.any(c == 0) or not np.all(np.isfinite(c)):
        raise ValueError("scaling needs one finite nonzero factor per channel")
    coeffs = c[None, :, None] * model.coeffs / c[None, None, :]
    sigma = np.outer(c, c) * model.sigma
    return validate_and_build_model(coeffs, 0.5 * (sigma + sigma.T))


def affine_invariance_check(model: VarModel, scaling, n_freq: int = 256) -> float:
    """Max-abs change of the exact all-pairs time and spectral GGC under a
    per-channel rescaling."""
    scaled = rescale_model(model, scaling)
    t0, s0 = gc_all_pairs_ss(var_to_ss(model), n_freq=n_freq)
    t1, s1 = gc_all_pairs_ss(var_to_ss(scaled), n_freq=n_freq)
    return float(max(np.max(np.abs(t0.F - t1.F)), np.max(np.abs(s0.f - s1.f))))
