"""Monte Carlo experiments: spectral GGC sampling distributions with null
thresholds, and bias / mean-absolute-deviation sweeps over series length.

Every realisation draws from its own seed, derived from the master seed and
a stream id. Work is cut into fixed-size chunks that do not depend on the
worker count, and results are reassembled in chunk order, so a summary is a
pure function of the configuration.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .causality import (
    dual_regression_all_pairs,
    gc_all_pairs_ss,
    single_regression_gc,
    single_regression_gc_pair,
)
from .errors import EmptySample, NumericalError, TooManyFailures, Unstable, UnstableNullModel, UsageError
from .statespace import var_to_ss
from .var import DEFAULT_BURN_IN, VarModel, freq_grid, simulate_var_batch, validate_and_build_model

log = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1
CHUNK = 25
MAX_FAILURE_RATE = 0.01
DEFAULT_T_SWEEP = (128, 256, 512, 1024, 2048, 4096, 8192)
ESTIMATORS = ("single", "dual")

# stream tags keep the seed families of different experiments apart
TAG_SPECTRAL = 1
TAG_NULL = 2
TAG_SWEEP = 3
TAG_FRESH = 4


def _splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive_seed(master_seed: int, stream_id: int) -> int:
    """64-bit per-stream seed. For a fixed master seed the map from stream id
    to seed is a bijection on 64-bit integers."""
    return _splitmix64((_splitmix64(int(master_seed) & MASK64) + int(stream_id)) & MASK64)


def derive_seed_array(master_seeds, stream_id):
    """Vectorised :func:`derive_seed` over an array of master seeds."""
    with np.errstate(over="ignore"):
        def mix(x):
            x = x + np.uint64(0x9E3779B97F4A7C15)
            x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
            x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
            return x ^ (x >> np.uint64(31))

        s = np.asarray(master_seeds, dtype=np.uint64)
        return mix(mix(s) + np.uint64(stream_id & MASK64))


def stream_seeds(master_seed, path, count):
    """Seeds ``0..count-1`` of the stream addressed by the tuple ``path``."""
    base = int(master_seed)
    for part in path:
        base = derive_seed(base, part)
    return [derive_seed(base, k) for k in range(count)]


@dataclass(frozen=True)
class McConfig:
    model: VarModel
    n_realisations: int = 1000
    T: int | tuple = 500
    p_fit: int | None = None
    n_freq: int = 256
    alpha_threshold: float = 0.95
    ci_mass: float = 0.9
    n_null: int = 1000
    master_seed: int = 0
    estimators: tuple = ("single",)
    burn_in: int = DEFAULT_BURN_IN

    def __post_init__(self):
        if self.p_fit is None:
            object.__setattr__(self, "p_fit", self.model.p)
        for name in ("n_realisations", "p_fit", "n_freq", "n_null"):
            if int(getattr(self, name)) < 1:
                raise UsageError(f"{name} must be positive")
        if self.n_freq < 2:
            raise UsageError("n_freq must be at least 2")
        for name in ("alpha_threshold", "ci_mass"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise UsageError(f"{name} must lie strictly between 0 and 1")
        ts = self.T_list
        if not ts or min(ts) < 1:
            raise UsageError("T must be positive")
        est = tuple(self.estimators)
        if not est or any(e not in ESTIMATORS for e in est):
            raise UsageError(f"estimators must be a non-empty subset of {ESTIMATORS}")
        object.__setattr__(self, "estimators", est)

    @property
    def T_list(self):
        return [int(t) for t in (self.T if isinstance(self.T, (list, tuple)) else [self.T])]

    def echo(self):
        return {
            "n_realisations": self.n_realisations,
            "T": self.T if isinstance(self.T, int) else list(self.T),
            "p_fit": self.p_fit,
            "n_freq": self.n_freq,
            "alpha_threshold": self.alpha_threshold,
            "ci_mass": self.ci_mass,
            "n_null": self.n_null,
            "master_seed": self.master_seed,
            "estimators": list(self.estimators),
        }


def summarize(samples, ci_mass: float = 0.9, axis=None):
    """Median, central ``ci_mass`` interval and mean absolute deviation about
    the median. Quantiles interpolate linearly between order statistics."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0 or (axis is not None and x.shape[axis] == 0):
        raise EmptySample("cannot summarise an empty sample")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples must be finite")
    x = np.sort(x, axis=axis)
    lo_q, hi_q = (1.0 - ci_mass) / 2.0, (1.0 + ci_mass) / 2.0
    med, lo, hi = np.quantile(x, [0.5, lo_q, hi_q], axis=axis)
    mad = np.mean(np.abs(x - (med if axis is None else np.expand_dims(med, axis))), axis=axis)
    if axis is None:
        return float(med), float(lo), float(hi), float(mad)
    return med, lo, hi, mad


@dataclass
class McSummary:
    kind: str  # "spectral" or "sweep"
    config: dict
    pairs: list  # ordered (source, target)
    grid: np.ndarray | None = None
    exact: dict = field(default_factory=dict)  # pair -> array over grid
    median: dict = field(default_factory=dict)
    ci_lo: dict = field(default_factory=dict)
    ci_hi: dict = field(default_factory=dict)
    threshold: dict = field(default_factory=dict)  # pair -> float
    sweep: list = field(default_factory=list)  # dict rows
    failures: dict = field(default_factory=dict)


def _pairs(n):
    return [(j, i) for j in range(n) for i in range(n) if i != j]


def _map_chunks(fn, jobs, workers):
    """Run ``fn`` over ``jobs`` and return results in job order."""
    workers = max(1, int(workers or 1))
    if workers == 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as ex:
        return list(ex.map(fn, *zip(*jobs)))


def _chunked(seeds):
    return [seeds[k:k + CHUNK] for k in range(0, len(seeds), CHUNK)]


def _spectral_chunk(model, T, burn_in, p, n_freq, seeds):
    out = []
    for ts in simulate_var_batch(model, T, seeds, burn_in=burn_in):
        try:
            _, sres = single_regression_gc(ts, p, n_freq=n_freq)
        except NumericalError as exc:
            log.debug("realisation dropped: %s", exc)
            out.append(None)
            continue
        out.append(sres.f)
    return out


def _null_chunk(model, T, burn_in, p, n_freq, source, target, seeds):
    grid = freq_grid(n_freq)
    out = []
    for ts in simulate_var_batch(model, T, seeds, burn_in=burn_in):
        try:
            f = single_regression_gc_pair(ts, p, source, target, grid=grid)
        except NumericalError as exc:
            log.debug("null realisation dropped: %s", exc)
            out.append(np.nan)
            continue
        out.append(float(f.max()))
    return out


def _sweep_chunk(model, T, burn_in, p, estimators, seeds):
    out = []
    for ts in simulate_var_batch(model, T, seeds, burn_in=burn_in):
        row = {}
        for est in estimators:
            try:
                if est == "single":
                    row[est] = single_regression_gc(ts, p, n_freq=None).F
                else:
                    row[est] = dual_regression_all_pairs(ts, p, p).F
            except NumericalError as exc:
                log.debug("%s estimate dropped: %s", est, exc)
                row[est] = None
        out.append(row)
    return out


def _check_failures(n_failed, n_total, what):
    if n_failed > MAX_FAILURE_RATE * n_total:
        raise TooManyFailures(f"{what}: {n_failed} of {n_total} realisations failed")


def null_model(model: VarModel, source: int, target: int) -> VarModel:
    """``model`` with every lag coefficient from ``source`` into ``target``
    set to zero."""
    coeffs = np.array(model.coeffs)
    coeffs[:, target, source] = 0.0
    try:
        return validate_and_build_model(coeffs, model.sigma)
    except Unstable as exc:
        raise UnstableNullModel(exc.rho) from None


def null_statistics(model: VarModel, source: int, target: int, cfg: McConfig, n: int, path, workers=1):
    """Max-over-frequency estimated spectral GGC of ``source -> target`` for
    ``n`` realisations of the null model. Failed fits are NaN."""
    nm = null_model(model, source, target)
    T = cfg.T_list[0]
    seeds = stream_seeds(cfg.master_seed, path, n)
    jobs = [(nm, T, cfg.burn_in, cfg.p_fit, cfg.n_freq, source, target, ch) for ch in _chunked(seeds)]
    return np.concatenate([np.asarray(r, dtype=float) for r in _map_chunks(_null_chunk, jobs, workers)])


def _pair_id(model, source, target):
    return source * model.n + target


def null_threshold(model: VarModel, source: int, target: int, cfg: McConfig, workers=1, return_failures=False):
    """``alpha_threshold`` quantile of the null max-over-frequency statistic."""
    stats = null_statistics(model, source, target, cfg, cfg.n_null,
                            (TAG_NULL, _pair_id(model, source, target)), workers)
    ok = stats[np.isfinite(stats)]
    n_failed = stats.size - ok.size
    _check_failures(n_failed, stats.size, f"null model {source}->{target}")
    thr = float(np.quantile(np.sort(ok), cfg.alpha_threshold))
    return (thr, n_failed) if return_failures else thr


def null_exceedance(model, source, target, cfg, threshold, n_fresh, workers=1):
    """Fraction of fresh null realisations whose statistic exceeds ``threshold``."""
    stats = null_statistics(model, source, target, cfg, n_fresh,
                            (TAG_FRESH, _pair_id(model, source, target)), workers)
    ok = stats[np.isfinite(stats)]
    return float(np.mean(ok > threshold))


def run_spectral_experiment(cfg: McConfig, workers=1, thresholds=True) -> McSummary:
    model = cfg.model
    if "single" not in cfg.estimators:
        raise UsageError("the spectral experiment needs the single-regression estimator")
    T = cfg.T_list[0]
    seeds = stream_seeds(cfg.master_seed, (TAG_SPECTRAL,), cfg.n_realisations)
    jobs = [(model, T, cfg.burn_in, cfg.p_fit, cfg.n_freq, ch) for ch in _chunked(seeds)]
    results = [f for chunk in _map_chunks(_spectral_chunk, jobs, workers) for f in chunk]
    good = [f for f in results if f is not None]
    n_failed = len(results) - len(good)
    _check_failures(n_failed, len(results), "spectral experiment")
    samples = np.stack(good)  # (R, n, n, F)

    _, exact = gc_all_pairs_ss(var_to_ss(model), n_freq=cfg.n_freq)
    med, lo, hi, _ = summarize(samples, cfg.ci_mass, axis=0)
    summary = McSummary("spectral", cfg.echo(), _pairs(model.n), grid=exact.grid)
    summary.failures["spectral"] = n_failed
    for (j, i) in summary.pairs:
        summary.exact[(j, i)] = exact.f[i, j]
        summary.median[(j, i)] = med[i, j]
        summary.ci_lo[(j, i)] = lo[i, j]
        summary.ci_hi[(j, i)] = hi[i, j]
        if thresholds:
            thr, nf = null_threshold(model, j, i, cfg, workers, return_failures=True)
            summary.threshold[(j, i)] = thr
            summary.failures[f"null {j}->{i}"] = nf
        else:
            summary.threshold[(j, i)] = float("nan")
    return summary


def run_bias_variance_experiment(cfg: McConfig, workers=1) -> McSummary:
    model = cfg.model
    Ts = cfg.T_list
    exact = gc_all_pairs_ss(var_to_ss(model)).F
    summary = McSummary("sweep", cfg.echo(), _pairs(model.n))
    cells = {}
    for T in Ts:
        seeds = stream_seeds(cfg.master_seed, (TAG_SWEEP, T), cfg.n_realisations)
        jobs = [(model, T, cfg.burn_in, cfg.p_fit, cfg.estimators, ch) for ch in _chunked(seeds)]
        rows = [r for chunk in _map_chunks(_sweep_chunk, jobs, workers) for r in chunk]
        for est in cfg.estimators:
            good = [r[est] for r in rows if r[est] is not None]
            n_failed = len(rows) - len(good)
            summary.failures[f"{est} T={T}"] = n_failed
            _check_failures(n_failed, len(rows), f"{est} estimator at T={T}")
            cells[(T, est)] = np.stack(good)
    for (j, i) in summary.pairs:
        for T in Ts:
            for est in cfg.estimators:
                med, _, _, mad = summarize(cells[(T, est)][:, i, j], cfg.ci_mass)
                summary.sweep.append({
                    "source": j, "target": i, "T": T, "estimator": est,
                    "exact": float(exact[i, j]), "median": med,
                    "bias": med - float(exact[i, j]), "mad": mad,
                })
    summary.sweep.sort(key=lambda r: (r["source"], r["target"], r["T"], r["estimator"]))
    return summary


def default_workers():
    env = os.environ.get("GGC_WORKERS")
    return int(env) if env else 1
