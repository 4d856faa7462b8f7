"""Trajectories of ``Z(t) = int_0^t Phi(X(s)) dW(s)`` by three coupled routes.

* ``fast``: the multiresolution recursion. Cell averages of ``Phi(X)`` on the
  level-``2J`` grid times the level-``J`` Brownian increments, accumulated
  along the level-``J`` grid.
* ``wavelet_partial``: the truncated Haar series ``b00 delta00 + sum_{j<=Jp}
  sum_k a_{j,k} lambda_{j,k}``.
* ``oracle``: left-point Ito sums on the level-``2J`` grid.

Every route for a given ``(master_seed, replica)`` consumes the same draw of
``X`` and ``W``, so the routes can be compared path by path.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .drivers import (
    DriverSpec,
    DyadicGrid,
    GaussianPath,
    ResourceLimitError,
    RngStreams,
    generate_brownian,
    generate_driver,
)
from .haar import scaling_coeffs, wavelet_coeffs
from .kernel import VolatilityFunction, antiderivative, coeff_a, coeff_b00, preset_phi, riemann_b_hat

MAX_FINE_LEVEL = 26
ROUTES = ("fast", "wavelet_partial", "oracle")


@dataclass(frozen=True)
class SimConfig:
    J: int = 8
    driver: DriverSpec = field(default_factory=DriverSpec)
    phi: str = "sine_paper"
    phi_coeffs: tuple[float, ...] | None = None
    master_seed: int = 0
    gamma_list: tuple[float, ...] = (0.3,)
    replicas: int = 1

    def __post_init__(self):
        if self.J < 1:
            raise ValueError(f"J must be >= 1, got {self.J}")
        if 2 * self.J > MAX_FINE_LEVEL:
            raise ResourceLimitError(
                f"fine level 2J = {2 * self.J} exceeds the limit {MAX_FINE_LEVEL}"
            )
        for g in self.gamma_list:
            if not 0.0 <= g < 0.5:
                raise ValueError(f"gamma values must lie in [0, 1/2), got {g}")
        if self.replicas < 1:
            raise ValueError(f"replicas must be >= 1, got {self.replicas}")

    @property
    def fine_level(self) -> int:
        return 2 * self.J

    def volatility(self) -> VolatilityFunction:
        return preset_phi(self.phi, coeffs=self.phi_coeffs)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["driver"] = asdict(self.driver)
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=list)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class SimulatedPath:
    grid: DyadicGrid
    values: np.ndarray
    route: str
    config_ref: str
    J_partial: int | None = None

    @property
    def t(self) -> np.ndarray:
        return self.grid.points

    def restrict(self, level: int) -> np.ndarray:
        if level > self.grid.level:
            raise ValueError(f"cannot restrict level {self.grid.level} path to level {level}")
        return self.values[:: 1 << (self.grid.level - level)]


@dataclass
class Draw:
    """One coupled sample of the driver and the Brownian motion, both on level 2J."""

    X: GaussianPath
    W: GaussianPath
    replica: int


def draw_paths(config: SimConfig, replica: int = 0) -> Draw:
    streams = RngStreams(config.master_seed, replica)
    level = config.fine_level
    X = generate_driver(config.driver, level, streams.stream_X, seed=config.master_seed)
    W = generate_brownian(level, streams.stream_W, seed=config.master_seed)
    return Draw(X, W, replica)


class HaarVolatilitySimulator(TransformerMixin, BaseEstimator):
    """Fast multiresolution simulator as a fit/transform pair.

    ``fit`` takes driver paths ``X`` on the level-``2J`` grid (one per row)
    and stores the Riemann sums ``b_hat_[r, l]``. ``transform`` takes
    Brownian paths ``W`` on any grid of level ``>= J`` and returns ``Z`` on the
    level-``J`` grid via the recursion

        Z(m/2^J) = Z((m-1)/2^J) + b_hat[m-1] * delta_{J,m-1},  Z(0) = 0.

    A single fitted driver row is broadcast against several ``W`` rows.

    Parameters
    ----------
    J : int
        Output level; the driver must be sampled on level ``2J``.
    phi : str
        Name of a preset volatility function.
    phi_coeffs : sequence of float, optional
        Coefficients for ``phi="custom_poly"``.
    """

    def __init__(self, J=8, phi="sine_paper", phi_coeffs=None):
        self.J = J
        self.phi = phi
        self.phi_coeffs = phi_coeffs

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_features=3)
        expected = (1 << 2 * self.J) + 1
        if X.shape[1] != expected:
            raise ValueError(
                f"driver paths must have {expected} points (level {2 * self.J}), got {X.shape[1]}"
            )
        self.phi_ = preset_phi(self.phi, coeffs=self.phi_coeffs)
        self.b_hat_ = riemann_b_hat(self.J, X, self.phi_)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, W):
        check_is_fitted(self)
        W = check_array(W, ensure_min_features=2)
        delta = scaling_coeffs(W, self.J)
        b_hat = self.b_hat_
        if b_hat.shape[0] not in (1, delta.shape[0]):
            raise ValueError(
                f"{b_hat.shape[0]} fitted drivers cannot be paired with {delta.shape[0]} W paths"
            )
        out = np.zeros((delta.shape[0], delta.shape[1] + 1))
        np.cumsum(b_hat * delta, axis=1, out=out[:, 1:])
        return out


def simulate_fast(config: SimConfig, replica: int = 0, draw: Draw | None = None) -> SimulatedPath:
    draw = draw or draw_paths(config, replica)
    est = HaarVolatilitySimulator(config.J, config.phi, config.phi_coeffs)
    values = est.fit(draw.X.values[None, :]).transform(draw.W.values[None, :])[0]
    return SimulatedPath(DyadicGrid(config.J), values, "fast", config.digest())


def wavelet_partial_values(X, W, phi: VolatilityFunction, J_partial: int, t) -> np.ndarray:
    """Truncated Haar series of ``Z`` at times ``t``, from one driver and one W path."""
    A = antiderivative(X, phi)
    coeffs = wavelet_coeffs(W, J_partial)
    t = np.asarray(t, float)
    out = coeff_b00(t, A) * coeffs.delta00
    for j, lam in enumerate(coeffs.lambdas):
        k = np.arange(lam.size)[:, None]
        out = out + lam @ coeff_a(j, k, t[None, :], A)
    return out


def simulate_wavelet_partial(config: SimConfig, J_partial: int | None = None, replica: int = 0,
                             draw: Draw | None = None) -> SimulatedPath:
    J_partial = config.J - 1 if J_partial is None else J_partial
    if J_partial < 0 or J_partial + 1 > config.fine_level:
        raise ValueError(
            f"J_partial={J_partial} needs J_partial + 1 <= fine level {config.fine_level}"
        )
    draw = draw or draw_paths(config, replica)
    grid = DyadicGrid(config.J)
    values = wavelet_partial_values(draw.X, draw.W, config.volatility(), J_partial, grid.points)
    return SimulatedPath(grid, values, "wavelet_partial", config.digest(), J_partial=J_partial)


def ito_sum(X_values: np.ndarray, W_values: np.ndarray, phi: VolatilityFunction) -> np.ndarray:
    """Left-point Ito sums of ``Phi(X)`` against ``W`` along the last axis."""
    X_values = np.asarray(X_values, float)
    W_values = np.asarray(W_values, float)
    incr = np.asarray(phi(X_values[..., :-1]), float) * np.diff(W_values, axis=-1)
    out = np.zeros(np.broadcast_shapes(X_values.shape, W_values.shape))
    np.cumsum(incr, axis=-1, out=out[..., 1:])
    return out


def simulate_oracle(config: SimConfig, replica: int = 0, draw: Draw | None = None) -> SimulatedPath:
    draw = draw or draw_paths(config, replica)
    values = ito_sum(draw.X.values, draw.W.values, config.volatility())
    return SimulatedPath(DyadicGrid(config.fine_level), values, "oracle", config.digest())


@dataclass
class ReplicaResult:
    replica: int
    draw: Draw
    fast: SimulatedPath | None = None
    wavelet_partial: SimulatedPath | None = None
    oracle: SimulatedPath | None = None

    def route(self, name: str) -> SimulatedPath:
        return getattr(self, name)


def run_ensemble(config: SimConfig, routes=ROUTES, J_partial: int | None = None) -> list[ReplicaResult]:
    """All requested routes for replicas ``0..replicas-1``, each on its own coupled draw."""
    unknown = set(routes) - set(ROUTES)
    if unknown:
        raise ValueError(f"unknown routes {sorted(unknown)}; choose from {ROUTES}")
    results = []
    for r in range(config.replicas):
        draw = draw_paths(config, r)
        res = ReplicaResult(r, draw)
        if "fast" in routes:
            res.fast = simulate_fast(config, draw=draw)
        if "wavelet_partial" in routes:
            res.wavelet_partial = simulate_wavelet_partial(config, J_partial, draw=draw)
        if "oracle" in routes:
            res.oracle = simulate_oracle(config, draw=draw)
        results.append(res)
    return results


def interpolate_to(values: np.ndarray, level: int) -> np.ndarray:
    """Linear interpolation of a dyadic-grid path onto the finer level ``level``."""
    src = int(round(np.log2(values.shape[-1] - 1)))
    if level < src:
        raise ValueError(f"target level {level} is coarser than source level {src}")
    t_src = DyadicGrid(src).points
    return np.interp(DyadicGrid(level).points, t_src, values)
