"""Hölder norms, pointwise exponents, convergence rates and moment checks.

These are finite-sample proxies for almost-sure statements: Hölder norms are
taken over grid pairs, exponents are regression slopes over dyadic
increments, and convergence rates are least-squares slopes in log2
coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats
from scipy.special import gammaln
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array

from .drivers import DyadicGrid, GaussianPath
from .haar import HaarCoefficients
from .kernel import VolatilityFunction
from .simulator import SimConfig, draw_paths, interpolate_to, simulate_fast, simulate_oracle

FULL_SCAN_MAX_POINTS = 4097
LOCAL_SCALE = 2.0 ** -7
EXPONENT_RANGE = (0.0, 1.5)


class DegenerateDataError(ValueError):
    """Input carries no usable variation (e.g. all increments vanish)."""


@dataclass
class RateFit:
    slope: float
    intercept: float
    r2: float
    J: np.ndarray = field(default_factory=lambda: np.empty(0))
    errors: np.ndarray = field(default_factory=lambda: np.empty(0))


@dataclass
class RegularityReport:
    gamma: float
    holder_norm: float
    pointwise: list[tuple[float, float, float]] = field(default_factory=list)
    rate_fit: RateFit | None = None
    diagnostics: dict[str, float] = field(default_factory=dict)


# --------------------------------------------------------------------------
# Hölder norms


def _as_grid_values(path) -> np.ndarray:
    if isinstance(path, GaussianPath):
        return path.values
    values = getattr(path, "values", path)
    return np.asarray(values, float)


def _max_quotient_lags(u: np.ndarray, step: float, gamma: float, max_lag: int) -> np.ndarray:
    best = np.zeros(u.shape[:-1])
    for d in range(1, max_lag + 1):
        inc = np.abs(u[..., d:] - u[..., :-d]).max(axis=-1)
        np.maximum(best, inc / (d * step) ** gamma, out=best)
    return best


def holder_seminorm(path, gamma: float, full_scan_max: int = FULL_SCAN_MAX_POINTS) -> np.ndarray:
    """Largest grid difference quotient ``|u(t1) - u(t2)| / |t1 - t2|^gamma``.

    The path is taken on a uniform grid of ``[0, 1]``; leading axes are
    batch axes. Up to ``full_scan_max`` points every pair is scanned. Above,
    only pairs closer than ``2^-7`` and all pairs of the subsampled grid with
    ``full_scan_max`` points are scanned, which bounds the discrete value from
    below.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    u = _as_grid_values(path)
    n = u.shape[-1]
    if n < 2:
        raise ValueError("need at least two grid points")
    step = 1.0 / (n - 1)
    if n <= full_scan_max:
        return _max_quotient_lags(u, step, gamma, n - 1)
    local = _max_quotient_lags(u, step, gamma, max(1, int(LOCAL_SCALE / step)))
    stride = (n - 1) // (full_scan_max - 1)
    if stride * (full_scan_max - 1) != n - 1:
        raise ValueError("two-scale scan needs a dyadic grid")
    coarse = _max_quotient_lags(u[..., ::stride], step * stride, gamma, full_scan_max - 1)
    return np.maximum(local, coarse)


def holder_norm(path, gamma: float, full_scan_max: int = FULL_SCAN_MAX_POINTS):
    """Sup norm plus the Hölder seminorm of order ``gamma`` on the grid."""
    u = _as_grid_values(path)
    out = np.abs(u).max(axis=-1) + holder_seminorm(u, gamma, full_scan_max)
    return out if np.ndim(out) else float(out)


# --------------------------------------------------------------------------
# pointwise exponents


def _increments(u: np.ndarray, t0: float, h_levels) -> tuple[np.ndarray, np.ndarray]:
    n = u.size - 1
    grid = DyadicGrid(int(round(np.log2(n))))
    if grid.size != u.size:
        raise ValueError(f"path length {u.size} is not 2^n + 1")
    i0 = grid.index_of(t0)
    log_h, incs = [], []
    for j in h_levels:
        if j > grid.level:
            raise ValueError(f"h level {j} is finer than the path grid (level {grid.level})")
        d = 1 << (grid.level - j)
        for sgn in (1, -1):
            i = i0 + sgn * d
            if 0 <= i <= n:
                log_h.append(-j)
                incs.append(abs(u[i] - u[i0]))
    return np.asarray(log_h, float), np.asarray(incs, float)


def pointwise_exponent(path, t0: float, h_levels=range(3, 11)) -> tuple[float, float]:
    """Regression estimate of the pointwise Hölder exponent at ``t0``.

    Slope and standard error of ``log2 |u(t0 + h) - u(t0)|`` against
    ``log2 |h|`` over ``h = +-2^-j``, ``j`` in ``h_levels``, keeping the
    points that stay in ``[0, 1]``. Zero increments are dropped.
    """
    u = _as_grid_values(path)
    log_h, incs = _increments(u, t0, h_levels)
    keep = incs > 0
    if keep.sum() < 2 or np.unique(log_h[keep]).size < 2:
        raise DegenerateDataError(f"increments at t0={t0} vanish; exponent undefined")
    fit = stats.linregress(log_h[keep], np.log2(incs[keep]))
    stderr = float(fit.stderr) if np.isfinite(fit.stderr) else 0.0
    return float(fit.slope), stderr


class PointwiseHolderEstimator(BaseEstimator):
    """Pointwise Hölder exponent of each row of a batch of grid paths.

    After ``fit``, ``exponents_`` and ``stderr_`` hold the per-path estimates
    (clipped to ``[0, 1.5]`` for reporting) and ``exponent_`` their mean.
    """

    def __init__(self, t0=0.5, h_levels=(3, 10)):
        self.t0 = t0
        self.h_levels = h_levels

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_features=3)
        lo, hi = self.h_levels
        est = [pointwise_exponent(row, self.t0, range(lo, hi + 1)) for row in X]
        est = np.asarray(est)
        self.exponents_ = np.clip(est[:, 0], *EXPONENT_RANGE)
        self.stderr_ = est[:, 1]
        self.exponent_ = float(self.exponents_.mean())
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        # stateless: every call re-estimates on the given paths
        return self.fit(X).exponents_


def divergence_diagnostic(paths, t0: float, epsilon: float, h_levels=range(2, 15),
                          rtol: float = 1e-9) -> float:
    """Share of paths whose normalized increments grow at fine scales.

    For each path computes ``|R(h)| = |u(t0 + h) - u(t0)| / |h|^(1/2 + eps)``
    over the dyadic ``h``, then compares the median over the three finest
    levels with the median over the three coarsest. A path counts 1 if the
    fine median is larger, 1/2 on a tie (relative tolerance ``rtol``) and 0
    otherwise.
    """
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    U = np.atleast_2d(_as_grid_values(paths))
    levels = sorted(h_levels)
    if len(levels) < 6:
        raise ValueError("need at least six h levels")
    coarse_lv, fine_lv = set(levels[:3]), set(levels[-3:])
    score = 0.0
    for u in U:
        log_h, incs = _increments(u, t0, levels)
        if not np.any(incs > 0):
            raise DegenerateDataError(f"increments at t0={t0} vanish")
        R = incs / 2.0 ** (log_h * (0.5 + epsilon))
        j = -log_h
        fine = np.median(R[np.isin(j, list(fine_lv))])
        coarse = np.median(R[np.isin(j, list(coarse_lv))])
        if np.isclose(fine, coarse, rtol=rtol, atol=0.0):
            score += 0.5
        elif fine > coarse:
            score += 1.0
    return score / len(U)


# --------------------------------------------------------------------------
# convergence rate


def fit_rate(J, errors) -> RateFit:
    """Least-squares fit of ``log2(e_J / sqrt(1 + J))`` against ``J``."""
    J = np.asarray(J, float)
    errors = np.asarray(errors, float)
    if J.size < 2:
        raise ValueError("need at least two levels to fit a rate")
    if np.any(errors <= 0):
        raise DegenerateDataError("errors must be positive to fit a log-rate")
    y = np.log2(errors / np.sqrt(1.0 + J))
    fit = stats.linregress(J, y)
    r2 = float(fit.rvalue ** 2) if np.isfinite(fit.rvalue) else 1.0
    return RateFit(float(fit.slope), float(fit.intercept), min(max(r2, 0.0), 1.0), J, errors)


def convergence_errors(config: SimConfig, J_range, gammas, eval_grid: str = "fine") -> dict:
    """Mean Hölder distance between the oracle and the fast route for each ``(gamma, J)``.

    ``eval_grid="fine"`` compares on the oracle's level-2J grid against the
    linear interpolation of the fast output; ``"output"`` compares on the
    level-J grid only.
    """
    if config.replicas < 5:
        raise ValueError(f"convergence needs at least 5 replicas, got {config.replicas}")
    if eval_grid not in ("fine", "output"):
        raise ValueError(f"eval_grid must be 'fine' or 'output', got {eval_grid!r}")
    errors = {g: [] for g in gammas}
    for J in J_range:
        cj = replace(config, J=J)
        acc = {g: [] for g in gammas}
        for r in range(cj.replicas):
            draw = draw_paths(cj, r)
            fast = simulate_fast(cj, draw=draw).values
            oracle = simulate_oracle(cj, draw=draw)
            if eval_grid == "fine":
                diff = oracle.values - interpolate_to(fast, cj.fine_level)
            else:
                diff = oracle.restrict(J) - fast
            for g in gammas:
                acc[g].append(holder_norm(diff, g))
        for g in gammas:
            errors[g].append(float(np.mean(acc[g])))
    return errors


def convergence_rate(config: SimConfig, J_range, gamma: float, eval_grid: str = "fine") -> RateFit:
    """Rate fit of the mean oracle-to-fast Hölder distance over ``J_range``."""
    errors = convergence_errors(config, list(J_range), [gamma], eval_grid)[gamma]
    return fit_rate(list(J_range), errors)


def predicted_slope(gamma: float, alpha: float) -> float:
    # rounding strips float noise such as -0.29000000000000004
    return round(-min(0.5 - gamma, alpha - 0.5), 12)


# --------------------------------------------------------------------------
# Gaussian moments


def gaussian_moment_constant(tau: float) -> float:
    """``c_tau`` with ``E|G|^tau = c_tau (E G^2)^(tau/2)`` for centered Gaussian ``G``."""
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    return float(np.exp(tau / 2 * np.log(2.0) + gammaln((tau + 1) / 2) - gammaln(0.5)))


def moment_equivalence_check(samples, tau: float, min_samples: int = 10_000) -> float:
    """Relative gap between ``mean|G|^tau`` and ``c_tau mean(G^2)^(tau/2)``."""
    g = np.asarray(samples, float).ravel()
    if g.size == 0:
        raise ValueError("no samples")
    if g.size < min_samples:
        raise ValueError(f"need at least {min_samples} samples, got {g.size}")
    m2 = np.mean(g * g)
    if m2 == 0:
        raise DegenerateDataError("samples are all zero")
    target = gaussian_moment_constant(tau) * m2 ** (tau / 2)
    return float(abs(np.mean(np.abs(g) ** tau) - target) / target)


def conditional_variance_check(X: GaussianPath, phi: VolatilityFunction, t: float,
                               n_replicas: int = 100_000, stream=0,
                               chunk: int = 2_000) -> float:
    """Relative gap between the W-sample variance of ``Z(t)`` and its quadrature.

    ``X`` is held fixed; ``n_replicas`` Brownian paths on the driver's grid
    are drawn from ``stream`` and ``Z(t)`` is formed by left-point Ito sums.
    """
    if n_replicas < 10_000:
        raise ValueError(f"need at least 10000 replicas, got {n_replicas}")
    m = X.grid.index_of(t)
    h = X.grid.step
    fx = np.asarray(phi(X.values[:m]), float) * np.ones(m)
    quad = float(np.sum(fx * fx) * h)
    if quad == 0.0:
        raise DegenerateDataError(f"Phi(X) vanishes on [0, {t}]; conditional variance is zero")
    rng = np.random.default_rng(stream) if not isinstance(stream, np.random.Generator) else stream
    z = np.empty(n_replicas)
    for start in range(0, n_replicas, chunk):
        stop = min(start + chunk, n_replicas)
        dW = rng.standard_normal((stop - start, m)) * np.sqrt(h)
        z[start:stop] = dW @ fx
    return float(abs(np.var(z) - quad) / quad)


def lambda_bound_statistic(coeffs: HaarCoefficients) -> np.ndarray:
    """``M_j = max_k |lambda_{j,k}| / sqrt(1 + j)`` for each scale."""
    return np.array([np.abs(lam).max() / np.sqrt(1.0 + j) for j, lam in enumerate(coeffs.lambdas)])
