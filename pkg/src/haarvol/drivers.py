"""Gaussian drivers on dyadic grids: Brownian motion, fBm and mBm.

All generators are pure functions of ``(parameters, level, stream)``. Streams
come from :class:`RngStreams`, which splits one master seed into counter-based
Philox substreams so the volatility driver ``X`` and the Brownian motion ``W``
are independent and reproducible.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.linalg import cholesky
from scipy.special import gammaln

MAX_LEVEL = 30
CHOLESKY_MAX_LEVEL_FBM = 14
CHOLESKY_MAX_LEVEL_MBM = 12
ALPHA_MARGIN = 0.01

STREAM_X = 0
STREAM_W = 1


class ResourceLimitError(RuntimeError):
    """Requested grid is too large to allocate."""


class FactorizationError(np.linalg.LinAlgError):
    """Covariance matrix could not be factorized."""


@dataclass(frozen=True)
class DyadicGrid:
    level: int

    def __post_init__(self):
        if self.level < 0:
            raise ValueError(f"grid level must be >= 0, got {self.level}")

    @property
    def size(self) -> int:
        return (1 << self.level) + 1

    @property
    def step(self) -> float:
        return 2.0 ** -self.level

    @property
    def points(self) -> np.ndarray:
        return np.arange(self.size, dtype=float) * self.step

    def index_of(self, t: float) -> int:
        """Grid index of ``t``; raises if ``t`` is not a grid point."""
        m = t * (1 << self.level)
        mi = int(round(m))
        if not 0 <= mi < self.size or abs(m - mi) > 1e-9:
            raise ValueError(f"t={t} is not a point of the level-{self.level} dyadic grid")
        return mi


@dataclass(frozen=True)
class DriverSpec:
    """Which Gaussian process to use as a driver.

    ``kind`` is ``"bm"``, ``"fbm"`` or ``"mbm"``. For ``"fbm"`` set ``hurst``;
    for ``"mbm"`` set ``hurst_poly``, the coefficients of ``H(s)`` in
    increasing powers of ``s`` (``(0.6, 0.2)`` is ``H(s) = 0.6 + 0.2 s``).
    """

    kind: str = "fbm"
    hurst: float | None = 0.8
    hurst_poly: tuple[float, ...] | None = None
    method: str = "auto"
    alpha_margin: float = ALPHA_MARGIN

    def hurst_function(self) -> Callable[[np.ndarray], np.ndarray]:
        if self.kind == "mbm":
            coeffs = tuple(self.hurst_poly or ())
            if not coeffs:
                raise ValueError("mbm driver needs hurst_poly coefficients")
            return lambda s: np.polynomial.polynomial.polyval(np.asarray(s, float), coeffs)
        h = 0.5 if self.kind == "bm" else self.hurst
        return lambda s: np.full_like(np.asarray(s, float), h)


@dataclass
class GaussianPath:
    grid: DyadicGrid
    values: np.ndarray
    kind: str
    alpha: float
    seed: int | None = None
    hurst: np.ndarray | float | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.size,):
            raise ValueError(
                f"expected {self.grid.size} values for level {self.grid.level}, "
                f"got shape {self.values.shape}"
            )

    @property
    def t(self) -> np.ndarray:
        return self.grid.points

    def restrict(self, level: int) -> "GaussianPath":
        """Subsample onto a coarser dyadic grid."""
        if level > self.grid.level:
            raise ValueError(f"cannot restrict level {self.grid.level} path to finer level {level}")
        stride = 1 << (self.grid.level - level)
        hurst = self.hurst[::stride] if isinstance(self.hurst, np.ndarray) else self.hurst
        return GaussianPath(DyadicGrid(level), self.values[::stride].copy(), self.kind,
                            self.alpha, self.seed, hurst)


@dataclass(frozen=True)
class RngStreams:
    """Independent Philox substreams derived from one master seed.

    ``replica`` enters the seed sequence's spawn key, so replica ``r`` and
    stream ``s`` map to the key ``(r, s)``. Identical arguments always give
    bit-identical generators.
    """

    master_seed: int
    replica: int = 0

    def generator(self, stream: int) -> np.random.Generator:
        ss = np.random.SeedSequence(self.master_seed, spawn_key=(self.replica, stream))
        return np.random.Generator(np.random.Philox(ss))

    @property
    def stream_X(self) -> np.random.Generator:
        return self.generator(STREAM_X)

    @property
    def stream_W(self) -> np.random.Generator:
        return self.generator(STREAM_W)


def _check_level(level: int, limit: int = MAX_LEVEL) -> None:
    if level < 0:
        raise ValueError(f"level must be >= 0, got {level}")
    if level > limit:
        raise ResourceLimitError(
            f"level {level} exceeds the limit {limit} (grid of {2 ** level + 1} points)"
        )


def _as_generator(stream) -> np.random.Generator:
    if isinstance(stream, np.random.Generator):
        return stream
    return np.random.default_rng(stream)


# --------------------------------------------------------------------------
# covariances


def fbm_covariance(t: np.ndarray, s: np.ndarray, hurst: float) -> np.ndarray:
    t = np.asarray(t, float)[:, None]
    s = np.asarray(s, float)[None, :]
    h2 = 2.0 * hurst
    return 0.5 * (t ** h2 + s ** h2 - np.abs(t - s) ** h2)


def mbm_normalization(x, y) -> np.ndarray:
    """Normalizing factor ``D(x, y)`` of the harmonizable mBm covariance.

    ``D(H, H) = 1/2``, so a constant Hurst function gives back the fBm
    covariance.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    log_num = 0.5 * (gammaln(2 * x + 1) + gammaln(2 * y + 1))
    log_den = gammaln(x + y + 1)
    trig = np.sqrt(np.sin(np.pi * x) * np.sin(np.pi * y)) / np.sin(np.pi * (x + y) / 2)
    return np.exp(log_num - log_den) * trig / 2.0


def mbm_covariance(t: np.ndarray, s: np.ndarray, hurst_fn: Callable) -> np.ndarray:
    t = np.asarray(t, float)
    s = np.asarray(s, float)
    ht = hurst_fn(t)[:, None]
    hs = hurst_fn(s)[None, :]
    tt = t[:, None]
    ss = s[None, :]
    h = ht + hs
    return mbm_normalization(ht, hs) * (tt ** h + ss ** h - np.abs(tt - ss) ** h)


# --------------------------------------------------------------------------
# factorization helpers


def _cholesky_factor(cov: np.ndarray, context: str) -> np.ndarray:
    try:
        return cholesky(cov, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(f"covariance not positive definite ({context}): {exc}") from exc


@lru_cache(maxsize=8)
def _fbm_cholesky(hurst: float, level: int) -> np.ndarray:
    t = DyadicGrid(level).points[1:]
    return _cholesky_factor(fbm_covariance(t, t, hurst), f"fbm level={level}, H={hurst}")


@lru_cache(maxsize=4)
def _mbm_cholesky(hurst_key: tuple, level: int) -> np.ndarray:
    t = DyadicGrid(level).points[1:]
    cov = mbm_covariance(t, t, _poly_hurst(hurst_key))
    return _cholesky_factor(cov, f"mbm level={level}, H coefficients={hurst_key}")


@lru_cache(maxsize=8)
def _fbm_circulant_sqrt_eigs(hurst: float, n: int) -> np.ndarray:
    # Davies-Harte embedding of the unit-step fGn autocovariance
    k = np.arange(n + 1, dtype=float)
    h2 = 2.0 * hurst
    acov = 0.5 * ((k + 1) ** h2 - 2 * k ** h2 + np.abs(k - 1) ** h2)
    row = np.concatenate([acov, acov[-2:0:-1]])
    eigs = np.fft.fft(row).real
    if eigs.min() < -1e-8 * eigs.max():
        raise FactorizationError(
            f"circulant embedding not nonnegative definite (n={n}, H={hurst})"
        )
    return np.sqrt(np.clip(eigs, 0.0, None) / row.size)


def _fgn_circulant(hurst: float, n: int, rng: np.random.Generator, shape: tuple) -> np.ndarray:
    """Unit-step fGn samples of shape ``shape + (n,)`` via Davies-Harte."""
    sq = _fbm_circulant_sqrt_eigs(hurst, n)
    noise = rng.standard_normal(shape + sq.shape) + 1j * rng.standard_normal(shape + sq.shape)
    return np.fft.fft(sq * noise, axis=-1).real[..., :n]


def _poly_hurst(coeffs: tuple) -> Callable:
    return lambda s: np.polynomial.polynomial.polyval(np.asarray(s, float), coeffs)


def _shape(size) -> tuple:
    if size is None:
        return ()
    return (size,) if np.isscalar(size) else tuple(size)


def _from_increments(incr: np.ndarray) -> np.ndarray:
    out = np.zeros(incr.shape[:-1] + (incr.shape[-1] + 1,))
    np.cumsum(incr, axis=-1, out=out[..., 1:])
    return out


def _declared_alpha(h_min: float, margin: float) -> float:
    alpha = h_min - margin
    if not 0.5 < alpha <= 1.0:
        # rate predictions need alpha in (1/2, 1]
        return float("nan")
    return float(alpha)


# --------------------------------------------------------------------------
# batch samplers: arrays of shape size + (2^level + 1,)


def sample_brownian(level: int, stream, size=None) -> np.ndarray:
    """Brownian grid values; ``size=None`` gives one path as a 1-D array."""
    _check_level(level)
    rng = _as_generator(stream)
    n = 1 << level
    return _from_increments(rng.standard_normal(_shape(size) + (n,)) * 2.0 ** (-level / 2))


def _resolve_method(method: str, level: int) -> str:
    if method == "auto":
        return "cholesky" if level <= 10 else "circulant"
    if method not in ("cholesky", "circulant"):
        raise ValueError(f"unknown generation method {method!r}")
    return method


def sample_fbm(hurst: float, level: int, stream, size=None, method: str = "auto") -> np.ndarray:
    """Fractional Brownian motion grid values.

    ``method="cholesky"`` factors the dense covariance (exact, up to level 14);
    ``"circulant"`` uses Davies-Harte (exact, O(n log n)); ``"auto"`` picks
    Cholesky up to level 10 and circulant embedding above.
    """
    if not 0.0 < hurst < 1.0:
        raise ValueError(f"Hurst index must lie in (0, 1), got {hurst}")
    _check_level(level)
    method = _resolve_method(method, level)
    rng = _as_generator(stream)
    n = 1 << level
    shape = _shape(size)
    if method == "cholesky":
        if level > CHOLESKY_MAX_LEVEL_FBM:
            raise ResourceLimitError(
                f"dense Cholesky limited to level {CHOLESKY_MAX_LEVEL_FBM}, got {level}"
            )
        L = _fbm_cholesky(float(hurst), level)
        out = np.zeros(shape + (n + 1,))
        out[..., 1:] = rng.standard_normal(shape + (n,)) @ L.T
        return out
    return _from_increments(_fgn_circulant(float(hurst), n, rng, shape) * 2.0 ** (-level * hurst))


def midpoint_refine(values: np.ndarray, hurst_fn: Callable, level: int,
                    target_level: int, rng: np.random.Generator) -> np.ndarray:
    """Refine paths from ``level`` to ``target_level`` by random midpoint displacement.

    Each new midpoint gets the conditional law of a unit-scale fBm with the
    local Hurst index ``H(mid)`` given its two neighbours only. This keeps the
    local roughness of an mBm but is not an exact sampler.
    """
    out = np.asarray(values, float)
    for lev in range(level, target_level):
        n = out.shape[-1] - 1
        h = 2.0 ** -lev
        hm = hurst_fn((np.arange(n) + 0.5) * h)
        sd = h ** hm * np.sqrt(np.clip(2.0 ** (-2 * hm) - 0.25, 0.0, None))
        new = np.empty(out.shape[:-1] + (2 * n + 1,))
        new[..., 0::2] = out
        new[..., 1::2] = 0.5 * (out[..., :-1] + out[..., 1:]) + sd * rng.standard_normal(out.shape[:-1] + (n,))
        out = new
    return out


def sample_mbm(hurst, level: int, stream, size=None, method: str = "auto") -> np.ndarray:
    """Multifractional Brownian motion grid values.

    ``hurst`` is a callable on ``[0, 1]`` or a tuple of polynomial
    coefficients. The exact Cholesky sampler runs up to level 12; with
    ``method="auto"`` finer grids are reached by midpoint refinement of an
    exact level-12 draw.
    """
    _check_level(level)
    key = None if callable(hurst) else tuple(float(c) for c in hurst)
    hurst_fn = hurst if key is None else _poly_hurst(key)
    t = DyadicGrid(level).points
    _check_hurst_range(np.asarray(hurst_fn(t), float), t)
    if method not in ("auto", "cholesky"):
        raise ValueError(f"mbm supports method 'auto' or 'cholesky', got {method!r}")
    exact_level = level
    if level > CHOLESKY_MAX_LEVEL_MBM:
        if method == "cholesky":
            raise ResourceLimitError(
                f"dense Cholesky for mbm limited to level {CHOLESKY_MAX_LEVEL_MBM}, got {level}"
            )
        exact_level = CHOLESKY_MAX_LEVEL_MBM
    if key is not None:
        L = _mbm_cholesky(key, exact_level)
    else:
        tt = DyadicGrid(exact_level).points[1:]
        L = _cholesky_factor(mbm_covariance(tt, tt, hurst_fn), f"mbm level={exact_level}")
    rng = _as_generator(stream)
    shape = _shape(size)
    base = np.zeros(shape + (L.shape[0] + 1,))
    base[..., 1:] = rng.standard_normal(shape + (L.shape[0],)) @ L.T
    return midpoint_refine(base, hurst_fn, exact_level, level, rng)


def _check_hurst_range(hvals: np.ndarray, t: np.ndarray) -> None:
    bad = (hvals <= 0.5) | (hvals >= 1.0)
    if bad.any():
        i = int(np.argmax(bad))
        raise ValueError(f"Hurst function must take values in (1/2, 1); H({t[i]:g}) = {hvals[i]:g}")


# --------------------------------------------------------------------------
# single-path generators


def generate_brownian(level: int, stream, seed: int | None = None) -> GaussianPath:
    """Standard Brownian motion on the level-``level`` dyadic grid."""
    values = sample_brownian(level, stream)
    return GaussianPath(DyadicGrid(level), values, "bm", alpha=0.5, seed=seed, hurst=0.5)


def generate_fbm(hurst: float, level: int, stream, method: str = "auto",
                 alpha_margin: float = ALPHA_MARGIN, seed: int | None = None) -> GaussianPath:
    """Fractional Brownian motion path; the declared Hölder order is ``H - alpha_margin``."""
    values = sample_fbm(hurst, level, stream, method=method)
    return GaussianPath(DyadicGrid(level), values, "fbm", alpha=_declared_alpha(hurst, alpha_margin),
                        seed=seed, hurst=float(hurst))


def generate_mbm(hurst, level: int, stream, method: str = "auto",
                 alpha_margin: float = ALPHA_MARGIN, seed: int | None = None) -> GaussianPath:
    """Multifractional Brownian motion path; declared order is ``min H - alpha_margin``."""
    values = sample_mbm(hurst, level, stream, method=method)
    hurst_fn = hurst if callable(hurst) else _poly_hurst(tuple(hurst))
    hvals = np.asarray(hurst_fn(DyadicGrid(level).points), float)
    return GaussianPath(DyadicGrid(level), values, "mbm",
                        alpha=_declared_alpha(float(hvals.min()), alpha_margin), seed=seed, hurst=hvals)


def generate_driver(spec: DriverSpec, level: int, stream, seed: int | None = None) -> GaussianPath:
    if spec.kind == "bm":
        return generate_brownian(level, stream, seed=seed)
    if spec.kind == "fbm":
        if spec.hurst is None:
            raise ValueError("fbm driver needs a hurst value")
        return generate_fbm(spec.hurst, level, stream, method=spec.method,
                            alpha_margin=spec.alpha_margin, seed=seed)
    if spec.kind == "mbm":
        return generate_mbm(tuple(spec.hurst_poly or ()), level, stream, method=spec.method,
                            alpha_margin=spec.alpha_margin, seed=seed)
    raise ValueError(f"unknown driver kind {spec.kind!r}")


def covariance_matrix(spec: DriverSpec, level: int) -> np.ndarray:
    """Exact covariance of the driver on the nonzero grid points ``t > 0``."""
    t = DyadicGrid(level).points[1:]
    if spec.kind == "bm":
        return np.minimum.outer(t, t)
    if spec.kind == "fbm":
        return fbm_covariance(t, t, spec.hurst)
    return mbm_covariance(t, t, spec.hurst_function())
