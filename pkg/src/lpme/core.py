"""Domain types, seeded randomness, the trigonometric basis and L2 geometry.

Everything here is pure and shared by the channel, estimator, bound and
harness modules.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

SQRT2 = math.sqrt(2.0)
SIMPLEX_TOL = 1e-12
SIMPSON_PANELS = 4096


# ---------------------------------------------------------------------------
# Privacy budget and simplex points
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PrivacyBudget:
    """Privacy level epsilon of a locally private channel."""

    epsilon: float

    def __post_init__(self):
        eps = float(self.epsilon)
        if not math.isfinite(eps) or eps <= 0.0:
            raise ValueError(f"epsilon must be positive and finite, got {self.epsilon!r}")
        object.__setattr__(self, "epsilon", eps)

    @property
    def in_theorem_range(self) -> bool:
        """True when the minimax lower bounds are stated for this epsilon."""
        return self.epsilon <= 0.25

    def __float__(self) -> float:
        return self.epsilon


@dataclass(frozen=True)
class SimplexVector:
    """A probability vector: nonnegative coordinates summing to one."""

    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=np.float64).copy()
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coords must be a nonempty 1-d vector")
        if np.any(c < 0.0):
            raise ValueError("simplex coordinates must be nonnegative")
        if abs(c.sum() - 1.0) > SIMPLEX_TOL * max(1, c.size):
            raise ValueError(f"simplex coordinates sum to {c.sum()!r}, not 1")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @property
    def d(self) -> int:
        return self.coords.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coords, dtype=dtype)

    def __len__(self):
        return self.coords.size


@dataclass(frozen=True)
class SobolevClass:
    """Elliptical Sobolev ball over the trigonometric basis.

    Membership means sum_j j^(2 beta) theta_j^2 <= radius^2 with 1-based j,
    so the constant coefficient (always 1 for a density) is counted.
    """

    beta: int
    radius: float
    basis_bound: float = SQRT2

    def __post_init__(self):
        if int(self.beta) != self.beta or self.beta < 1:
            raise ValueError("beta must be an integer >= 1")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if not self.basis_bound > 0:
            raise ValueError("basis_bound must be positive")

    def weighted_norm_sq(self, coefficients) -> float:
        return sobolev_norm_sq(coefficients, self.beta)

    def contains(self, coefficients) -> bool:
        return self.weighted_norm_sq(coefficients) <= self.radius**2


def sobolev_norm_sq(coefficients, beta: int) -> float:
    """sum_j j^(2 beta) theta_j^2 for coefficients indexed from j = 1."""
    theta = np.asarray(coefficients, dtype=np.float64)
    j = np.arange(1, theta.size + 1, dtype=np.float64)
    return float(np.sum(j ** (2 * beta) * theta**2))


# ---------------------------------------------------------------------------
# Randomness
# ---------------------------------------------------------------------------


class RngStream:
    """Deterministic random stream keyed by ``(seed, stream_id)``.

    Distinct stream ids give statistically independent streams (numpy's
    ``SeedSequence`` spawn keys); a stream must not be shared between workers.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.stream_id = int(stream_id) & 0xFFFFFFFFFFFFFFFF
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    def uniform(self, size=None) -> np.ndarray:
        """Uniforms on [0, 1)."""
        return self.generator.random(size)

    def open_uniform(self, size=None) -> np.ndarray:
        """Uniforms on the open interval (0, 1), 53-bit resolution."""
        k = self.generator.integers(0, 2**53, size=size, dtype=np.int64)
        return (k + 0.5) * 2.0**-53

    def bernoulli(self, p, size=None) -> np.ndarray:
        return self.generator.random(size) < p

    def signs(self, size) -> np.ndarray:
        """Uniform +-1 entries as float64, one random bit each."""
        shape = (size,) if np.isscalar(size) else tuple(size)
        total = int(np.prod(shape))
        raw = np.frombuffer(self.generator.bytes((total + 7) // 8), dtype=np.uint8)
        bits = np.unpackbits(raw)[:total]
        return (2.0 * bits - 1.0).reshape(shape)

    def laplace(self, rate: float, size=None) -> np.ndarray:
        """Laplace(rate) draws, density (rate/2) exp(-rate |w|), by inverse CDF."""
        u = self.open_uniform(size)
        return np.where(u < 0.5, np.log(2.0 * u), -np.log(2.0 - 2.0 * u)) / rate

    def child(self, *key) -> "RngStream":
        """Independent stream derived from this one and a hashable key."""
        return RngStream(self.seed, stable_hash64((self.stream_id,) + tuple(key)))


def stable_hash64(key) -> int:
    """Process-independent 64-bit hash of ``repr(key)``."""
    digest = hashlib.blake2b(repr(key).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


# ---------------------------------------------------------------------------
# Trigonometric basis
# ---------------------------------------------------------------------------


def trig_basis_eval(j: int, t):
    """Orthonormal trigonometric basis function number ``j`` (0-based).

    phi_0 = 1, phi_{2m} = sqrt2 cos(2 pi m t) and phi_{2m-1} = sqrt2 sin(2 pi m t)
    for m >= 1.  The sine of frequency m sits at 2m-1 so that every index
    names a nonzero function.
    """
    if j < 0:
        raise ValueError("basis index must be nonnegative")
    t = as_points(t, "t")
    if j == 0:
        out = np.ones_like(t)
    else:
        m = (j + 1) // 2
        wave = np.cos if j % 2 == 0 else np.sin
        out = SQRT2 * wave(2.0 * np.pi * m * t)
    return out if out.ndim else float(out)


def basis_matrix(t, k: int) -> np.ndarray:
    """Rows ``[phi_0(t_i), ..., phi_{k-1}(t_i)]``; shape ``(len(t), k)``.

    Column ``j - 1`` is the j-th function of a truncated series, so column 0 is
    the constant.

    Powers of e^(2 pi i t) are built by a running product, which is several
    times cheaper than separate cos/sin calls; rounding error grows like
    k * 1e-16.
    """
    t = np.atleast_1d(np.asarray(t, dtype=np.float64)).ravel()
    out = np.empty((t.size, k))
    if k:
        out[:, 0] = 1.0
    m = k // 2
    if m:
        z = np.empty((t.size, m), dtype=np.complex128)
        z[:] = np.exp(2j * np.pi * t)[:, None]
        np.cumprod(z, axis=1, out=z)
        z *= SQRT2
        out[:, 1::2] = z.imag[:, : (k // 2)]
        out[:, 2::2] = z.real[:, : (k - 1) // 2]
    return out


# ---------------------------------------------------------------------------
# Simplex projection
# ---------------------------------------------------------------------------


def project_simplex(v, scale: float = 1.0) -> np.ndarray:
    """Euclidean projection of ``v`` onto ``{w >= 0, sum(w) = scale}``.

    Sort-and-threshold: find theta with sum(max(v - theta, 0)) = scale.
    Accepts a 2-d array and projects each row.
    """
    if not scale > 0:
        raise ValueError("scale must be positive")
    v = np.asarray(v, dtype=np.float64)
    if v.ndim == 1:
        return project_simplex(v[None, :], scale)[0]
    if v.ndim != 2 or v.shape[1] == 0:
        raise ValueError("expected a nonempty vector or a 2-d batch of vectors")
    d = v.shape[1]
    # shift-invariant; centring on the row max keeps the active entries small
    v = v - v.max(axis=1, keepdims=True)
    u = -np.sort(-v, axis=1)
    css = np.cumsum(u, axis=1) - scale
    idx = np.arange(1, d + 1)
    cond = u - css / idx > 0
    rho = d - np.argmax(cond[:, ::-1], axis=1)  # last index where cond holds
    theta = css[np.arange(v.shape[0]), rho - 1] / rho
    return np.maximum(v - theta[:, None], 0.0)


# ---------------------------------------------------------------------------
# Density models
# ---------------------------------------------------------------------------


class DensityModel:
    """A function on [0, 1] that can be evaluated and compared in L2."""

    variant: str = ""

    def __call__(self, x):
        raise NotImplementedError

    def breakpoints(self) -> np.ndarray:
        return np.array([0.0, 1.0])

    def integral(self) -> float:
        return simpson(self, 0.0, 1.0, self.breakpoints())


@dataclass(frozen=True, eq=False)
class PiecewiseConstantDensity(DensityModel):
    """Histogram f = sum_j values[j] 1{x in bin j} on k equal bins.

    Bins are [(j-1)/k, j/k) with the last one closed at 1.
    """

    values: np.ndarray
    variant: str = field(default="piecewise_constant", init=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).copy()
        if v.ndim != 1 or v.size == 0:
            raise ValueError("values must be a nonempty 1-d vector")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def k(self) -> int:
        return self.values.size

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        idx = np.clip(np.floor(x * self.k).astype(np.int64), 0, self.k - 1)
        out = self.values[idx]
        return out if out.ndim else float(out)

    def breakpoints(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.k + 1)

    def integral(self) -> float:
        return float(self.values.mean())


@dataclass(frozen=True, eq=False)
class SeriesDensity(DensityModel):
    """Truncated series f = sum_j coefficients[j] phi_j over the trig basis."""

    coefficients: np.ndarray
    variant: str = field(default="series", init=False)

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=np.float64).copy()
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coefficients must be a nonempty 1-d vector")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @property
    def k(self) -> int:
        return self.coefficients.size

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        out = basis_matrix(x.ravel(), self.k) @ self.coefficients
        return out.reshape(x.shape) if x.ndim else float(out[0])

    def integral(self) -> float:
        return float(self.coefficients[0])


class AnalyticDensity(DensityModel):
    """A known density on [0, 1], used as ground truth.

    Subclasses implement ``pdf``; ``cdf``, ``sq_norm`` and ``coefficients``
    fall back to quadrature but may be overridden with closed forms.
    """

    variant = "analytic"

    def pdf(self, x):
        raise NotImplementedError

    def __call__(self, x):
        return self.pdf(x)

    def cdf(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        return np.array([simpson(self.pdf, 0.0, xi, self._cuts(0.0, xi)) for xi in x])

    def sq_norm(self) -> float:
        return simpson(lambda x: self.pdf(x) ** 2, 0.0, 1.0, self.breakpoints())

    def coefficients(self, k: int) -> np.ndarray:
        """``[int f phi_0, ..., int f phi_{k-1}]`` by composite Simpson."""
        cuts = self.breakpoints()
        xs, w = _simpson_nodes(cuts)
        return (w * self.pdf(xs)) @ basis_matrix(xs, k)

    def bin_masses(self, k: int) -> np.ndarray:
        edges = self.cdf(np.linspace(0.0, 1.0, k + 1))
        return np.diff(edges)

    def _cuts(self, a, b):
        bp = self.breakpoints()
        return np.unique(np.concatenate([[a, b], bp[(bp > a) & (bp < b)]]))


# ---------------------------------------------------------------------------
# Quadrature and L2 distances
# ---------------------------------------------------------------------------


def _simpson_nodes(cuts, panels: int = SIMPSON_PANELS):
    """Nodes and weights of composite Simpson on each interval of ``cuts``."""
    cuts = np.unique(np.asarray(cuts, dtype=np.float64))
    xs, ws = [], []
    base = np.ones(2 * panels + 1)
    base[1:-1:2] = 4.0
    base[2:-1:2] = 2.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        h = (b - a) / (2 * panels)
        xs.append(np.linspace(a, b, 2 * panels + 1))
        ws.append(base * h / 3.0)
    return np.concatenate(xs), np.concatenate(ws)


def simpson(func: Callable, a: float, b: float, breakpoints=None, panels: int = SIMPSON_PANELS) -> float:
    """Composite Simpson integral of ``func`` over [a, b].

    ``breakpoints`` inside (a, b) start new pieces so kinks are integrated
    exactly up to the smooth-piece error.
    """
    if b <= a:
        return 0.0
    cuts = [a, b]
    if breakpoints is not None:
        bp = np.asarray(breakpoints, dtype=np.float64)
        cuts = np.concatenate([cuts, bp[(bp > a) & (bp < b)]])
    xs, w = _simpson_nodes(cuts, panels)
    return float(np.dot(w, func(xs)))


def l2_distance_squared(f, g) -> float:
    """Integral over [0, 1] of (f - g)^2.

    Exact for two histograms (merged breakpoints), Parseval for two series,
    closed forms for a histogram or series against an ``AnalyticDensity``,
    and composite Simpson over the union of breakpoints otherwise.
    """
    if isinstance(f, AnalyticDensity) and isinstance(g, (PiecewiseConstantDensity, SeriesDensity)):
        f, g = g, f
    if isinstance(f, PiecewiseConstantDensity) and isinstance(g, PiecewiseConstantDensity):
        return _hist_hist(f, g)
    if isinstance(f, SeriesDensity) and isinstance(g, SeriesDensity):
        k = max(f.k, g.k)
        a = np.zeros(k)
        b = np.zeros(k)
        a[: f.k] = f.coefficients
        b[: g.k] = g.coefficients
        return float(np.sum((a - b) ** 2))
    if isinstance(f, PiecewiseConstantDensity) and isinstance(g, AnalyticDensity):
        masses = g.bin_masses(f.k)
        val = g.sq_norm() - 2.0 * np.dot(f.values, masses) + np.sum(f.values**2) / f.k
        return max(float(val), 0.0)
    if isinstance(f, SeriesDensity) and isinstance(g, AnalyticDensity):
        theta = g.coefficients(f.k)
        val = g.sq_norm() - 2.0 * np.dot(f.coefficients, theta) + np.sum(f.coefficients**2)
        return max(float(val), 0.0)
    if not (callable(f) and callable(g)):
        raise TypeError("both arguments must be densities on [0, 1]")
    bps = [np.array([0.0, 1.0])]
    for h in (f, g):
        if isinstance(h, DensityModel):
            bps.append(h.breakpoints())
    return simpson(lambda x: (np.asarray(f(x)) - np.asarray(g(x))) ** 2, 0.0, 1.0, np.concatenate(bps))


def _hist_hist(f: PiecewiseConstantDensity, g: PiecewiseConstantDensity) -> float:
    edges = np.union1d(f.breakpoints(), g.breakpoints())
    mids = 0.5 * (edges[:-1] + edges[1:])
    return float(np.sum(np.diff(edges) * (f(mids) - g(mids)) ** 2))


def as_points(x: Sequence[float] | np.ndarray, name: str = "x") -> np.ndarray:
    """Validate points of [0, 1]."""
    arr = np.asarray(x, dtype=np.float64)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError(f"{name} must lie in [0, 1]")
    return arr
