"""Volatility functions and the deterministic kernel coefficients.

Given a driver path ``X`` the kernel is ``K(t, s) = Phi(X(s)) 1_[0,t](s)``.
Its projections on Haar functions reduce to differences of the pathwise
antiderivative ``A(y) = int_0^y Phi(X(s)) ds``, which is computed once with
the left-point rule on the driver grid.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .drivers import DyadicGrid, GaussianPath


@dataclass(frozen=True)
class VolatilityFunction:
    eval: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]
    bound_c: float
    bound_L: float
    name: str

    def __call__(self, x):
        return self.eval(x)

    def spot_check(self, R: float = 10.0, n: int = 10_000, fd_step: float = 1e-5,
                   fd_rtol: float = 1e-6) -> None:
        """Check the declared polynomial bound and the derivative on ``[-R, R]``.

        Raises ``ValueError`` on the first violation.
        """
        x = np.linspace(-R, R, n)
        f = np.asarray(self.eval(x), float) * np.ones_like(x)
        d = np.asarray(self.deriv(x), float) * np.ones_like(x)
        bound = self.bound_c * (1.0 + np.abs(x)) ** self.bound_L
        over = np.abs(f) + np.abs(d) > bound * (1 + 1e-12)
        if over.any():
            i = int(np.argmax(over))
            raise ValueError(
                f"{self.name}: |Phi|+|Phi'| = {abs(f[i]) + abs(d[i]):.6g} exceeds "
                f"c(1+|x|)^L = {bound[i]:.6g} at x = {x[i]:.6g}"
            )
        fd = (np.asarray(self.eval(x + fd_step)) - np.asarray(self.eval(x - fd_step))) / (2 * fd_step)
        # relative to the local scale of Phi' (absolute where Phi' is near zero)
        scale = np.maximum(np.abs(d), 1.0)
        bad = np.abs(fd - d) > fd_rtol * scale
        if bad.any():
            i = int(np.argmax(bad))
            raise ValueError(
                f"{self.name}: derivative {d[i]:.8g} disagrees with finite difference "
                f"{fd[i]:.8g} at x = {x[i]:.6g}"
            )


def _poly_phi(coeffs, name: str) -> VolatilityFunction:
    coeffs = tuple(float(c) for c in coeffs)
    if not coeffs:
        raise ValueError("custom_poly needs at least one coefficient")
    P = np.polynomial.Polynomial(coeffs)
    dP = P.deriv()
    c = sum((1 + i) * abs(a) for i, a in enumerate(coeffs)) or 1.0
    return VolatilityFunction(
        eval=lambda x: P(np.asarray(x, float)),
        deriv=lambda x: dP(np.asarray(x, float)) * np.ones_like(np.asarray(x, float)),
        bound_c=c,
        bound_L=float(len(coeffs) - 1),
        name=name,
    )


PRESETS = ("constant_one", "affine_paper", "sine_paper", "custom_poly")


def preset_phi(name: str, coeffs=None, check: bool = True) -> VolatilityFunction:
    """Build one of the named volatility functions.

    ``affine_paper`` is ``0.5 + 0.5 x`` and ``sine_paper`` is ``sin x``; these
    drive the demonstration trajectories. ``custom_poly`` takes ``coeffs`` in
    increasing powers of ``x``.
    """
    if name == "constant_one":
        phi = VolatilityFunction(
            eval=lambda x: np.ones_like(np.asarray(x, float)),
            deriv=lambda x: np.zeros_like(np.asarray(x, float)),
            bound_c=1.0, bound_L=0.0, name=name,
        )
    elif name == "affine_paper":
        phi = VolatilityFunction(
            eval=lambda x: 0.5 + 0.5 * np.asarray(x, float),
            deriv=lambda x: np.full_like(np.asarray(x, float), 0.5),
            bound_c=1.0, bound_L=1.0, name=name,
        )
    elif name == "sine_paper":
        phi = VolatilityFunction(eval=np.sin, deriv=np.cos, bound_c=2.0, bound_L=0.0, name=name)
    elif name == "custom_poly":
        if coeffs is None:
            raise ValueError("custom_poly needs coeffs")
        phi = _poly_phi(coeffs, f"custom_poly{tuple(coeffs)}")
    else:
        raise ValueError(f"unknown volatility function {name!r}; choose from {PRESETS}")
    if check:
        phi.spot_check()
    return phi


@dataclass
class Antiderivative:
    """Left-point cumulative integral of ``Phi(X)`` on the driver grid."""

    grid: DyadicGrid
    values: np.ndarray
    phi_values: np.ndarray

    def at(self, t) -> np.ndarray:
        """``A(t)``, with ``t`` snapped to the nearest grid point."""
        return self.values[self.snap(t)]

    def snap(self, t) -> np.ndarray:
        t = np.asarray(t, float)
        if np.any((t < 0) | (t > 1)):
            raise ValueError("t must lie in [0, 1]")
        return np.rint(t * (1 << self.grid.level)).astype(np.int64)

    def require_level(self, level: int) -> None:
        if self.grid.level < level:
            raise ValueError(
                f"dyadic points of level {level} are not on the antiderivative grid "
                f"(level {self.grid.level}); need a driver of level >= {level}"
            )


def antiderivative(X: GaussianPath | np.ndarray, phi: VolatilityFunction) -> Antiderivative:
    values = X.values if isinstance(X, GaussianPath) else np.asarray(X, float)
    level = int(round(np.log2(values.size - 1)))
    grid = DyadicGrid(level)
    if grid.size != values.size:
        raise ValueError(f"driver length {values.size} is not 2^n + 1")
    fx = np.asarray(phi(values), float) * np.ones(values.size)
    out = np.empty(values.size)
    out[0] = 0.0
    np.cumsum(fx[:-1], out=out[1:])
    out[1:] *= grid.step
    return Antiderivative(grid, out, fx)


def coeff_a(j: int, k, t, antider: Antiderivative):
    """Kernel coefficient ``a_{j,k}(t) = int K(t, s) psi_{j,k}(s) ds``.

    ``k`` and ``t`` broadcast against each other. The value is zero for
    ``t <= k/2^j``, a truncated signed integral inside the support and the
    second increment ``2^{j/2}(2A(mid) - A(lo) - A(hi))`` once ``t`` has left
    the support.
    """
    antider.require_level(j + 1)
    k = np.asarray(k)
    if np.any((k < 0) | (k >= 1 << j)):
        raise ValueError(f"k out of range for j={j}")
    lo = k / 2.0 ** j
    mid = (2 * k + 1) / 2.0 ** (j + 1)
    hi = (k + 1) / 2.0 ** j
    t = np.asarray(t, float)
    A = antider.at
    val = (A(np.clip(t, lo, mid)) - A(lo)) - (A(np.clip(t, mid, hi)) - A(mid))
    out = 2.0 ** (j / 2) * val
    return out if out.ndim else float(out)


def coeff_b(J: int, l, t, antider: Antiderivative):
    """Kernel coefficient ``b_{J,l}(t) = int K(t, s) phi_{J,l}(s) ds``."""
    antider.require_level(J)
    l = np.asarray(l)
    if np.any((l < 0) | (l >= 1 << J)):
        raise ValueError(f"l out of range for J={J}")
    lo = l / 2.0 ** J
    hi = (l + 1) / 2.0 ** J
    t = np.asarray(t, float)
    out = 2.0 ** (J / 2) * (antider.at(np.clip(t, lo, hi)) - antider.at(lo))
    return out if out.ndim else float(out)


def coeff_b00(t, antider: Antiderivative):
    """``b_{0,0}(t) = A(t)``."""
    out = antider.at(t)
    return out if np.ndim(out) else float(out)


def riemann_b_hat(J: int, X: GaussianPath | np.ndarray, phi: VolatilityFunction,
                  l=None) -> np.ndarray:
    """Riemann sums ``2^{-3J/2} sum_q Phi(X(l/2^J + q/2^{2J}))`` for each ``l``.

    ``X`` must live on the level-``2J`` grid; leading axes are kept, so a
    batch of drivers of shape ``(r, 2^{2J} + 1)`` gives ``(r, 2^J)``.
    """
    values = X.values if isinstance(X, GaussianPath) else np.asarray(X, float)
    if values.shape[-1] != (1 << 2 * J) + 1:
        level = np.log2(values.shape[-1] - 1)
        raise ValueError(f"b_hat at J={J} needs a driver on level {2 * J}, got level {level:g}")
    n = 1 << J
    fx = np.asarray(phi(values[..., :-1]), float) * np.ones(values[..., :-1].shape)
    sums = fx.reshape(*values.shape[:-1], n, n).sum(axis=-1) * 2.0 ** (-1.5 * J)
    return sums if l is None else sums[..., l]
