"""Haar scaling functions, wavelets and Brownian coefficients.

All indicators are half-open ``[a, b)``, so every basis function vanishes at
``s = 1``. Coefficients of ``W`` are taken from grid values through the
closed-form first and second differences, never by quadrature.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .drivers import GaussianPath

SQRT2 = np.sqrt(2.0)


class HaarIndex(NamedTuple):
    j: int
    k: int

    def check(self) -> "HaarIndex":
        if self.j < 0 or not 0 <= self.k < (1 << self.j):
            raise ValueError(f"invalid Haar index (j={self.j}, k={self.k})")
        return self


def _check_unit(s) -> np.ndarray:
    s = np.asarray(s, float)
    if np.any((s < 0.0) | (s > 1.0)):
        raise ValueError("evaluation points must lie in [0, 1]")
    return s


def eval_psi(idx: HaarIndex | tuple, s):
    """Haar wavelet ``psi_{j,k}`` at ``s`` (scalar or array)."""
    j, k = HaarIndex(*idx).check()
    s = _check_unit(s)
    left = k / 2.0 ** j
    mid = (2 * k + 1) / 2.0 ** (j + 1)
    right = (k + 1) / 2.0 ** j
    amp = 2.0 ** (j / 2)
    out = np.where((s >= left) & (s < mid), amp, 0.0) - np.where((s >= mid) & (s < right), amp, 0.0)
    return out if out.ndim else float(out)


def eval_scaling(J: int, l: int, s):
    """Scaling function ``phi_{J,l} = 2^{J/2} 1_[l/2^J, (l+1)/2^J)``."""
    if J < 0 or not 0 <= l < (1 << J):
        raise ValueError(f"invalid scaling index (J={J}, l={l})")
    s = _check_unit(s)
    out = np.where((s >= l / 2.0 ** J) & (s < (l + 1) / 2.0 ** J), 2.0 ** (J / 2), 0.0)
    return out if out.ndim else float(out)


@dataclass
class HaarCoefficients:
    delta00: float
    lambdas: list[np.ndarray]
    source_level: int
    scaling: dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def J_max(self) -> int:
        return len(self.lambdas) - 1

    def flat(self) -> np.ndarray:
        """``[delta00, lambda_{0,0}, lambda_{1,0}, lambda_{1,1}, ...]``."""
        return np.concatenate([[self.delta00], *self.lambdas])


def _values(W) -> tuple[np.ndarray, int]:
    if isinstance(W, GaussianPath):
        return W.values, W.grid.level
    v = np.asarray(W, float)
    level = int(round(np.log2(v.shape[-1] - 1)))
    if (1 << level) + 1 != v.shape[-1]:
        raise ValueError(f"path length {v.shape[-1]} is not 2^n + 1")
    return v, level


def _level_view(values: np.ndarray, level: int, J: int) -> np.ndarray:
    return values[..., :: 1 << (level - J)]


def scaling_coeffs(W, J: int) -> np.ndarray:
    """``delta_{J,l} = 2^{J/2} (W((l+1)/2^J) - W(l/2^J))`` for ``l < 2^J``."""
    values, level = _values(W)
    if J < 0:
        raise ValueError(f"J must be >= 0, got {J}")
    if level < J:
        raise ValueError(f"scaling coefficients at J={J} need a W path of level >= {J}, got {level}")
    return 2.0 ** (J / 2) * np.diff(_level_view(values, level, J), axis=-1)


def _lambdas_at(values: np.ndarray, level: int, j: int) -> np.ndarray:
    w = _level_view(values, level, j + 1)
    return -(2.0 ** (j / 2)) * (w[..., 2::2] - 2.0 * w[..., 1::2] + w[..., :-1:2])


def wavelet_coeffs(W, J_max: int, scaling_levels=()) -> HaarCoefficients:
    """Extract ``delta_{0,0}`` and ``lambda_{j,k}`` for ``j <= J_max`` from a W path."""
    values, level = _values(W)
    if values.ndim != 1:
        raise ValueError("wavelet_coeffs takes a single path; use HaarTransformer for batches")
    if J_max < 0:
        raise ValueError(f"J_max must be >= 0, got {J_max}")
    if level < J_max + 1:
        raise ValueError(
            f"wavelet coefficients up to j={J_max} need a W path of level >= {J_max + 1}, got {level}"
        )
    lambdas = [_lambdas_at(values, level, j) for j in range(J_max + 1)]
    scaling = {J: scaling_coeffs(values, J) for J in scaling_levels}
    return HaarCoefficients(float(values[-1] - values[0]), lambdas, level, scaling)


class HaarTransformer(TransformerMixin, BaseEstimator):
    """Haar analysis of Brownian grid paths as a scikit-learn transformer.

    Rows of ``X`` are paths sampled on a common dyadic grid of ``2^n + 1``
    points. ``transform`` returns ``[delta00, lambda_{0,0}, ..., lambda_{J_max,
    2^J_max - 1}]`` per row, and ``inverse_transform`` rebuilds the path on
    the level-``J_max + 1`` grid (exact there: the Haar expansion of ``W`` at a
    dyadic point of that level is a finite sum).

    Parameters
    ----------
    J_max : int or None
        Finest wavelet scale. ``None`` uses the largest scale the input grid
        supports.
    """

    def __init__(self, J_max=None):
        self.J_max = J_max

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_features=2)
        _, level = _values(X)
        J_max = level - 1 if self.J_max is None else self.J_max
        if J_max < 0 or J_max + 1 > level:
            raise ValueError(f"J_max={J_max} needs input level >= {J_max + 1}, got {level}")
        self.source_level_ = level
        self.J_max_ = J_max
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self)
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} grid values, got {X.shape[1]}")
        parts = [(X[:, -1] - X[:, 0])[:, None]]
        parts += [_lambdas_at(X, self.source_level_, j) for j in range(self.J_max_ + 1)]
        return np.hstack(parts)

    def inverse_transform(self, C):
        check_is_fitted(self)
        C = check_array(C)
        J = self.J_max_ + 1
        # integrate the Haar series against 1_[0,t] on the level-J grid
        t = np.arange((1 << J) + 1) / 2.0 ** J
        out = np.outer(C[:, 0], t)
        pos = 1
        for j in range(J):
            n = 1 << j
            lam = C[:, pos:pos + n]
            pos += n
            out += lam @ _schauder(j, t)
        return out


def _schauder(j: int, t: np.ndarray) -> np.ndarray:
    """``int_0^t psi_{j,k}`` for every k at points t (shape ``(2^j, len(t))``)."""
    k = np.arange(1 << j)[:, None]
    lo = k / 2.0 ** j
    mid = (2 * k + 1) / 2.0 ** (j + 1)
    hi = (k + 1) / 2.0 ** j
    tt = t[None, :]
    return 2.0 ** (j / 2) * (np.clip(tt, lo, mid) - lo - (np.clip(tt, mid, hi) - mid))
