"""Ground-truth densities on [0, 1] with samplers and exact L2 helpers."""

from __future__ import annotations

import numpy as np

from .core import SQRT2, AnalyticDensity, RngStream, basis_matrix, sobolev_norm_sq

INVERSE_TABLE_SIZE = 2**14


class PiecewiseLinearDensity(AnalyticDensity):
    """Continuous piecewise-linear density through ``(knots, values)``.

    The CDF is piecewise quadratic, so inverse-CDF sampling is exact.
    """

    def __init__(self, knots, values):
        self.knots = np.asarray(knots, dtype=np.float64)
        self.values = np.asarray(values, dtype=np.float64)
        if self.knots[0] != 0.0 or self.knots[-1] != 1.0 or np.any(np.diff(self.knots) <= 0):
            raise ValueError("knots must increase from 0 to 1")
        if np.any(self.values < 0):
            raise ValueError("density values must be nonnegative")
        widths = np.diff(self.knots)
        self._slopes = np.diff(self.values) / widths
        self._cum = np.concatenate([[0.0], np.cumsum(widths * (self.values[:-1] + self.values[1:]) / 2)])
        if abs(self._cum[-1] - 1.0) > 1e-12:
            raise ValueError("density must integrate to 1")

    def breakpoints(self):
        return self.knots

    def pdf(self, x):
        return np.interp(x, self.knots, self.values)

    def cdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        i = np.clip(np.searchsorted(self.knots, x, side="right") - 1, 0, self.knots.size - 2)
        t = x - self.knots[i]
        return self._cum[i] + self.values[i] * t + 0.5 * self._slopes[i] * t * t

    def sq_norm(self) -> float:
        a, b, w = self.values[:-1], self.values[1:], np.diff(self.knots)
        return float(np.sum(w * (a * a + a * b + b * b) / 3.0))

    def bin_masses(self, k: int) -> np.ndarray:
        return np.diff(self.cdf(np.linspace(0.0, 1.0, k + 1)))

    def quantile(self, u):
        u = np.asarray(u, dtype=np.float64)
        i = np.clip(np.searchsorted(self._cum, u, side="right") - 1, 0, self.knots.size - 2)
        r = u - self._cum[i]
        a, m = self.values[i], self._slopes[i]
        # root of m t^2 / 2 + a t = r in the cancellation-free form
        t = 2.0 * r / (a + np.sqrt(np.maximum(a * a + 2.0 * m * r, 0.0)))
        return np.clip(self.knots[i] + t, 0.0, 1.0)

    def sample(self, n: int, rng: RngStream) -> np.ndarray:
        return self.quantile(rng.uniform(n))


class TentDensity(PiecewiseLinearDensity):
    """f = 1 + amplitude * g1, g1 the antisymmetric tent of height 1/4.

    1-Lipschitz for amplitude <= 1.
    """

    def __init__(self, amplitude: float = 1.0):
        if not 0 <= amplitude <= 4:
            raise ValueError("amplitude must lie in [0, 4] to keep f >= 0")
        self.amplitude = float(amplitude)
        h = 0.25 * amplitude
        super().__init__([0.0, 0.25, 0.5, 0.75, 1.0], [1.0, 1.0 + h, 1.0, 1.0 - h, 1.0])


class TrigSeriesDensity(AnalyticDensity):
    """Finite trigonometric series f = sum_j theta_j phi_j with theta_0 = 1.

    Coefficients and squared norm are exact; sampling inverts a tabulated
    CDF (2^14 cells, linear interpolation).
    """

    def __init__(self, coefficients):
        c = np.asarray(coefficients, dtype=np.float64)
        if c.ndim != 1 or c[0] != 1.0:
            raise ValueError("the constant coefficient must equal 1")
        self.theta = c
        grid = np.linspace(0.0, 1.0, 4097)
        if np.min(self.pdf(grid)) < 0:
            raise ValueError("series is negative somewhere on [0, 1]")
        self._table = None

    @property
    def size(self) -> int:
        return self.theta.size

    def pdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        out = basis_matrix(x.ravel(), self.size) @ self.theta
        return out.reshape(x.shape) if x.ndim else float(out[0])

    def cdf(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=np.float64)).ravel()
        j = np.arange(1, self.size)
        m = (j + 1) // 2
        ang = 2.0 * np.pi * np.outer(x, m)
        prim = np.where(j % 2 == 0, np.sin(ang), 1.0 - np.cos(ang)) * SQRT2 / (2.0 * np.pi * m)
        return x + prim @ self.theta[1:]

    def sq_norm(self) -> float:
        return float(np.sum(self.theta**2))

    def coefficients(self, k: int) -> np.ndarray:
        out = np.zeros(k)
        m = min(k, self.size)
        out[:m] = self.theta[:m]
        return out

    def sobolev_norm_sq(self, beta: int) -> float:
        return sobolev_norm_sq(self.theta, beta)

    def quantile(self, u):
        if self._table is None:
            xs = np.linspace(0.0, 1.0, INVERSE_TABLE_SIZE + 1)
            cdf = self.cdf(xs)
            cdf[0], cdf[-1] = 0.0, 1.0
            self._table = (cdf, xs)
        cdf, xs = self._table
        return np.interp(u, cdf, xs)

    def sample(self, n: int, rng: RngStream) -> np.ndarray:
        return self.quantile(rng.uniform(n))


def power_decay_density(decay: float = 2.6, amplitude: float = 1.0, terms: int = 256) -> TrigSeriesDensity:
    """theta_1 = 1 and theta_j = amplitude * j^-decay for j = 2..terms (1-based)."""
    j = np.arange(1, terms + 1, dtype=np.float64)
    theta = amplitude * j**-decay
    theta[0] = 1.0
    return TrigSeriesDensity(theta)


def named_density(name: str, beta: int | None = None) -> AnalyticDensity:
    """Look up a test density by its config name."""
    if name == "tent":
        return TentDensity()
    if name == "uniform":
        return TentDensity(0.0)
    if name == "power_decay":
        return power_decay_density()
    raise ValueError(f"unknown test density {name!r}")
