"""Locally private channels: each maps raw samples to privatized views.

Every mechanism has a single-sample entry point that returns a
``PrivatizedRecord`` with a 1-d payload, and a batch entry point
(:func:`privatize`) that returns one record whose payload holds one row per
sample.  Estimators accept either form.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .core import SQRT2, PrivacyBudget, RngStream, as_points, basis_matrix

RANDOMIZED_RESPONSE = "randomized_response"
LAPLACE_MULTINOMIAL = "laplace_multinomial"
LAPLACE_HISTOGRAM = "laplace_histogram"
HALFSPACE_SERIES = "halfspace_series"
NAIVE_LAPLACE_SERIES = "naive_laplace_series"

MECHANISMS = (
    RANDOMIZED_RESPONSE,
    LAPLACE_MULTINOMIAL,
    LAPLACE_HISTOGRAM,
    HALFSPACE_SERIES,
    NAIVE_LAPLACE_SERIES,
)
SERIES_MECHANISMS = (HALFSPACE_SERIES, NAIVE_LAPLACE_SERIES)


@dataclass(frozen=True)
class ChannelConfig:
    """Mechanism name, privacy level and dimension (d, bins k or truncation k).

    ``basis_bound`` (sup of |phi_j|) applies to the series mechanisms only and
    defaults to sqrt(2), the trigonometric value.
    """

    mechanism: str
    epsilon: PrivacyBudget
    dims: int
    basis_bound: float | None = None

    def __post_init__(self):
        if self.mechanism not in MECHANISMS:
            raise ValueError(f"unknown mechanism {self.mechanism!r}; expected one of {MECHANISMS}")
        if not isinstance(self.epsilon, PrivacyBudget):
            object.__setattr__(self, "epsilon", PrivacyBudget(self.epsilon))
        if int(self.dims) != self.dims or self.dims < 1:
            raise ValueError("dims must be a positive integer")
        object.__setattr__(self, "dims", int(self.dims))
        if self.mechanism in SERIES_MECHANISMS:
            b0 = SQRT2 if self.basis_bound is None else float(self.basis_bound)
            if not b0 > 0:
                raise ValueError("basis_bound must be positive")
            object.__setattr__(self, "basis_bound", b0)
        elif self.basis_bound is not None:
            raise ValueError(f"basis_bound does not apply to {self.mechanism}")

    @property
    def eps(self) -> float:
        return self.epsilon.epsilon


@dataclass(frozen=True, eq=False)
class PrivatizedRecord:
    """Channel output(s).

    ``payload`` is ``(dims,)`` for one sample or ``(n, dims)`` for a batch.
    For ``halfspace_series`` ``meta["amplitude"]`` holds the output magnitude.
    """

    mechanism: str
    payload: np.ndarray
    epsilon: float
    dims: int
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return 1 if self.payload.ndim == 1 else self.payload.shape[0]

    def rows(self) -> np.ndarray:
        return np.atleast_2d(self.payload)

    def check_invariants(self) -> None:
        """Raise ``AssertionError`` if the payload breaks its mechanism's shape."""
        z = self.rows()
        assert z.shape[1] == self.dims, "payload width differs from dims"
        assert np.all(np.isfinite(z)), "payload must be finite"
        if self.mechanism == RANDOMIZED_RESPONSE:
            assert np.all((z == 0.0) | (z == 1.0)), "randomized response payload must be binary"
        elif self.mechanism == HALFSPACE_SERIES:
            amp = self.meta["amplitude"]
            assert amp > 0
            assert np.all(np.abs(z) == amp), "halfspace payload must lie in {-B, +B}^k"


@dataclass(frozen=True)
class ChannelConstant:
    """Normalisation c_k of the halfspace channel for truncation level k."""

    k: int
    c_k: float


# ---------------------------------------------------------------------------
# Randomized response
# ---------------------------------------------------------------------------


def rr_keep_probability(epsilon: float) -> float:
    """Probability e^(eps/2) / (1 + e^(eps/2)) that a bit is reported truthfully."""
    return 1.0 / (1.0 + math.exp(-epsilon / 2.0))


def _categories(x, d: int) -> np.ndarray:
    x = np.asarray(x)
    if x.size and (not np.issubdtype(x.dtype, np.integer)):
        if np.any(x != np.round(x)):
            raise ValueError("categories must be integers")
        x = x.astype(np.int64)
    if np.any(x < 1) or np.any(x > d):
        raise ValueError(f"category out of range 1..{d}")
    return x.astype(np.int64)


def one_hot(x, d: int) -> np.ndarray:
    """Rows e_{x_i} for 1-based categories."""
    x = _categories(np.atleast_1d(x), d)
    out = np.zeros((x.size, d))
    out[np.arange(x.size), x - 1] = 1.0
    return out


def randomized_response_batch(x, cfg: ChannelConfig, rng: RngStream) -> PrivatizedRecord:
    _require(cfg, RANDOMIZED_RESPONSE)
    e = one_hot(x, cfg.dims)
    flip = rng.bernoulli(1.0 - rr_keep_probability(cfg.eps), size=e.shape)
    z = np.where(flip, 1.0 - e, e)
    return PrivatizedRecord(RANDOMIZED_RESPONSE, z, cfg.eps, cfg.dims)


def randomized_response(x: int, cfg: ChannelConfig, rng: RngStream) -> PrivatizedRecord:
    """Report each coordinate of e_x, flipped with probability 1/(1+e^(eps/2))."""
    rec = randomized_response_batch([x], cfg, rng)
    return _single(rec)


# ---------------------------------------------------------------------------
# Laplace perturbation
# ---------------------------------------------------------------------------


def laplace_rate(cfg: ChannelConfig) -> float:
    """Rate alpha of the Laplace noise added by a Laplace mechanism."""
    if cfg.mechanism in (LAPLACE_MULTINOMIAL, LAPLACE_HISTOGRAM):
        return cfg.eps / 2.0
    if cfg.mechanism == NAIVE_LAPLACE_SERIES:
        return cfg.eps / (cfg.basis_bound * cfg.dims)
    raise ValueError(f"{cfg.mechanism} adds no Laplace noise")


def laplace_perturb(x, cfg: ChannelConfig, rng: RngStream) -> PrivatizedRecord:
    """x + W with W i.i.d. Laplace(eps/2); x is a simplex point or one-hot row(s).

    ``x`` may be a single vector or a batch of rows.
    """
    if cfg.mechanism not in (LAPLACE_MULTINOMIAL, LAPLACE_HISTOGRAM):
        raise ValueError("laplace_perturb serves the multinomial and histogram mechanisms")
    v = np.asarray(x, dtype=np.float64)
    rows = np.atleast_2d(v)
    if rows.shape[1] != cfg.dims:
        raise ValueError(f"expected vectors of length {cfg.dims}")
    if np.any(rows < 0) or np.any(rows.sum(axis=1) > 1.0 + 1e-12):
        raise ValueError("inputs must be nonnegative with l1 norm at most 1")
    z = rows + rng.laplace(laplace_rate(cfg), size=rows.shape)
    return PrivatizedRecord(cfg.mechanism, z[0] if v.ndim == 1 else z, cfg.eps, cfg.dims)


def histogram_bin(x, k: int):
    """1-based bin index of x for [0,1/k), [1/k,2/k), ..., [(k-1)/k, 1]."""
    arr = as_points(x)
    j = np.minimum(np.floor(arr * k).astype(np.int64), k - 1) + 1
    return j if j.ndim else int(j)


def laplace_histogram_batch(x, cfg: ChannelConfig, rng: RngStream) -> PrivatizedRecord:
    _require(cfg, LAPLACE_HISTOGRAM)
    e = one_hot(histogram_bin(np.atleast_1d(x), cfg.dims), cfg.dims)
    return laplace_perturb(e, cfg, rng)


def laplace_multinomial_batch(x, cfg: ChannelConfig, rng: RngStream) -> PrivatizedRecord:
    _require(cfg, LAPLACE_MULTINOMIAL)
    return laplace_perturb(one_hot(x, cfg.dims), cfg, rng)


# ---------------------------------------------------------------------------
# Halfspace sampling channel for series coefficients
# ---------------------------------------------------------------------------


def compute_ck(k: int) -> ChannelConstant:
    """c_k = E|S_k| / sqrt(k) for S_k a sum of k independent signs.

    With ties split evenly between the two halfspaces, E[Z | tau] equals
    c_k * B / (B0 sqrt(k)) * (e^eps - 1)/(e^eps + 1) * tau exactly.
    """
    if int(k) != k or k < 1:
        raise ValueError("k must be a positive integer")
    k = int(k)
    num = sum(math.comb(k, i) * abs(2 * i - k) for i in range(k + 1))
    return ChannelConstant(k, num / 2.0**k / math.sqrt(k))


def halfspace_amplitude(k: int, epsilon: float, basis_bound: float = SQRT2) -> float:
    """Output magnitude B0 sqrt(k) (e^eps + 1) / (c_k (e^eps - 1))."""
    ck = compute_ck(k).c_k
    return basis_bound * math.sqrt(k) / (ck * math.tanh(epsilon / 2.0))


def halfspace_batch(x, cfg: ChannelConfig, rng: RngStream) -> PrivatizedRecord:
    _require(cfg, HALFSPACE_SERIES)
    tau = basis_matrix(as_points(np.atleast_1d(x)), cfg.dims)
    return halfspace_from_vectors(tau, cfg, rng)


def halfspace_from_vectors(tau, cfg: ChannelConfig, rng: RngStream) -> PrivatizedRecord:
    """Run the halfspace sampler on rows ``tau`` in [-B0, B0]^k.

    tau~ is drawn coordinatewise with P(+B0) = 1/2 + tau_j/(2 B0), T is
    Bernoulli(e^eps/(e^eps+1)), and Z is B times a sign vector u drawn from
    the halfspace <u, tau~> > 0 (T = 1) or < 0 (T = 0).  Sign vectors on the
    tie plane <u, tau~> = 0 get half weight in both branches.  Sampling is by
    reflection: draw u uniformly and negate it if it falls on the wrong side.
    """
    _require(cfg, HALFSPACE_SERIES)
    b0 = cfg.basis_bound
    tau = np.atleast_2d(np.asarray(tau, dtype=np.float64))
    if tau.shape[1] != cfg.dims:
        raise ValueError(f"expected vectors of length {cfg.dims}")
    if np.any(np.abs(tau) > b0 * (1 + 1e-12)):
        raise ValueError("tau must lie in the box [-B0, B0]^k")
    n, k = tau.shape
    s = np.where(rng.uniform((n, k)) < 0.5 + tau / (2.0 * b0), 1.0, -1.0)
    t = rng.bernoulli(1.0 / (1.0 + math.exp(-cfg.eps)), size=n)
    u = rng.signs((n, k))
    side = np.einsum("ij,ij->i", u, s)
    wrong = np.where(t, side < 0, side > 0)
    u[wrong] *= -1.0
    amp = halfspace_amplitude(k, cfg.eps, b0)
    z = amp * u
    return PrivatizedRecord(HALFSPACE_SERIES, z, cfg.eps, cfg.dims, {"amplitude": amp})


def halfspace_series_channel(x: float, cfg: ChannelConfig, rng: RngStream) -> PrivatizedRecord:
    """Privatize one sample x in [0, 1] through the halfspace channel."""
    return _single(halfspace_batch([x], cfg, rng))


def halfspace_output_probs(tau, k: int, epsilon: float, basis_bound: float = SQRT2):
    """Exact law of the sign pattern u = Z / B given rows tau.

    Returns ``(P, outputs)`` with ``P[i, m] = P(Z = B * outputs[m] | tau_i)``.
    """
    tau = np.atleast_2d(np.asarray(tau, dtype=np.float64))
    signs = np.array(list(itertools.product((-1.0, 1.0), repeat=k)))
    p = 1.0 / (1.0 + math.exp(-epsilon))
    # P(tau~ = s | tau): product of coordinate probabilities
    q_plus = 0.5 + tau / (2.0 * basis_bound)
    p_in = np.prod(np.where(signs[None, :, :] > 0, q_plus[:, None, :], 1.0 - q_plus[:, None, :]), axis=2)
    side = signs @ signs.T  # side[s, u] = <u, s>
    half = 2.0 ** (k - 1)
    q = np.where(side > 0, p / half, np.where(side < 0, (1.0 - p) / half, 0.5 / half))
    return p_in @ q, signs


# ---------------------------------------------------------------------------
# Naive Laplace perturbation of basis coefficients
# ---------------------------------------------------------------------------


def naive_series_batch(x, cfg: ChannelConfig, rng: RngStream) -> PrivatizedRecord:
    _require(cfg, NAIVE_LAPLACE_SERIES)
    v = basis_matrix(as_points(np.atleast_1d(x)), cfg.dims)
    z = v + rng.laplace(laplace_rate(cfg), size=v.shape)
    return PrivatizedRecord(NAIVE_LAPLACE_SERIES, z, cfg.eps, cfg.dims)


def naive_laplace_series_channel(x: float, cfg: ChannelConfig, rng: RngStream) -> PrivatizedRecord:
    """[phi_j(x)]_{j<=k} plus i.i.d. Laplace(eps / (B0 k)) noise."""
    return _single(naive_series_batch([x], cfg, rng))


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------

_BATCH = {
    RANDOMIZED_RESPONSE: randomized_response_batch,
    LAPLACE_MULTINOMIAL: laplace_multinomial_batch,
    LAPLACE_HISTOGRAM: laplace_histogram_batch,
    HALFSPACE_SERIES: halfspace_batch,
    NAIVE_LAPLACE_SERIES: naive_series_batch,
}


def privatize(samples, cfg: ChannelConfig, rng: RngStream) -> PrivatizedRecord:
    """Apply ``cfg``'s mechanism to every raw sample.

    Categories (1-based) for the multinomial mechanisms, points of [0, 1]
    for the density mechanisms.
    """
    return _BATCH[cfg.mechanism](samples, cfg, rng)


def _require(cfg: ChannelConfig, mechanism: str):
    if cfg.mechanism != mechanism:
        raise ValueError(f"config is for {cfg.mechanism}, not {mechanism}")


def _single(rec: PrivatizedRecord) -> PrivatizedRecord:
    return PrivatizedRecord(rec.mechanism, rec.payload[0], rec.epsilon, rec.dims, dict(rec.meta))


# ---------------------------------------------------------------------------
# Privacy audit
# ---------------------------------------------------------------------------


@dataclass
class AuditReport:
    mechanism: str
    epsilon: float
    max_log_ratio: float
    witness: tuple
    passed: bool
    exact: bool = True

    def to_dict(self) -> dict[str, Any]:
        return {
            "mechanism": self.mechanism,
            "epsilon": self.epsilon,
            "max_log_ratio": self.max_log_ratio,
            "witness": _jsonable(self.witness),
            "pass": self.passed,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (list, tuple)):
        return [_jsonable(o) for o in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


class EnumerationTooLarge(ValueError):
    pass


AUDIT_GRID_POINTS = 101


def audit_channel(
    cfg: ChannelConfig,
    input_grid: Sequence | None = None,
    tolerance: float = 1e-9,
    max_enumeration: int = 2**16,
) -> AuditReport:
    """Largest log-likelihood ratio between two inputs over output events.

    Randomized response and the halfspace channel are enumerated exactly
    over all outputs.  The Laplace channels are checked on a product grid
    of 101 points per coordinate spanning the inputs plus five noise scales
    on each side; the grid maximum never exceeds the true supremum.

    Default inputs: all categories, the box corners {-B0, B0}^k for the
    halfspace channel (the ratio is maximised there), bin midpoints for
    the histogram and 101 equispaced points for the naive series channel.
    """
    m = cfg.mechanism
    if m == RANDOMIZED_RESPONSE:
        value, witness = _audit_rr(cfg, input_grid, max_enumeration)
        exact = True
    elif m == HALFSPACE_SERIES:
        value, witness = _audit_halfspace(cfg, input_grid, max_enumeration)
        exact = True
    else:
        value, witness = _audit_laplace(cfg, input_grid)
        exact = False
    return AuditReport(m, cfg.eps, float(value), witness, bool(value <= cfg.eps + tolerance), exact)


def _max_pair_ratio(loglik: np.ndarray):
    """Max over columns of (max row - min row) and its arg triple."""
    hi = loglik.argmax(axis=0)
    lo = loglik.argmin(axis=0)
    spread = loglik.max(axis=0) - loglik.min(axis=0)
    col = int(np.argmax(spread))
    return float(spread[col]), int(hi[col]), int(lo[col]), col


def _audit_rr(cfg, input_grid, cap):
    d = cfg.dims
    if 2**d > cap:
        raise EnumerationTooLarge(f"2^{d} outputs exceed the enumeration cap {cap}")
    inputs = np.arange(1, d + 1) if input_grid is None else _categories(np.asarray(input_grid), d)
    outputs = np.array(list(itertools.product((0.0, 1.0), repeat=d)))
    keep = rr_keep_probability(cfg.eps)
    e = one_hot(inputs, d)
    agree = e @ outputs.T + (1.0 - e) @ (1.0 - outputs).T
    loglik = agree * math.log(keep) + (d - agree) * math.log1p(-keep)
    value, hi, lo, col = _max_pair_ratio(loglik)
    return value, (int(inputs[hi]), int(inputs[lo]), outputs[col])


def _audit_halfspace(cfg, input_grid, cap):
    k, b0 = cfg.dims, cfg.basis_bound
    if 4**k > cap**2 or 2**k > cap:
        raise EnumerationTooLarge(f"2^{k} sign patterns exceed the enumeration cap {cap}")
    if input_grid is None:
        tau = b0 * np.array(list(itertools.product((-1.0, 1.0), repeat=k)))
        labels = tau
    else:
        pts = as_points(np.asarray(input_grid, dtype=np.float64))
        tau = basis_matrix(pts, k)
        labels = pts
    probs, outputs = halfspace_output_probs(tau, k, cfg.eps, b0)
    value, hi, lo, col = _max_pair_ratio(np.log(probs))
    amp = halfspace_amplitude(k, cfg.eps, b0)
    return value, (labels[hi], labels[lo], amp * outputs[col])


def _audit_laplace(cfg, input_grid):
    m, d = cfg.mechanism, cfg.dims
    alpha = laplace_rate(cfg)
    scale = 1.0 / alpha
    if m == LAPLACE_MULTINOMIAL:
        if input_grid is None:
            vecs = np.eye(d)
        else:
            arr = np.asarray(input_grid, dtype=np.float64)
            vecs = one_hot(arr.astype(np.int64), d) if arr.ndim == 1 else arr
        labels = vecs
        lo_edge, hi_edge = -5.0 * scale, 1.0 + 5.0 * scale
    elif m == LAPLACE_HISTOGRAM:
        pts = (np.arange(d) + 0.5) / d if input_grid is None else as_points(np.asarray(input_grid, dtype=np.float64))
        vecs = one_hot(histogram_bin(np.atleast_1d(pts), d), d)
        labels = pts
        lo_edge, hi_edge = -5.0 * scale, 1.0 + 5.0 * scale
    else:
        pts = np.linspace(0.0, 1.0, AUDIT_GRID_POINTS) if input_grid is None else as_points(np.asarray(input_grid, dtype=np.float64))
        vecs = basis_matrix(pts, d)
        labels = pts
        b0 = cfg.basis_bound
        lo_edge, hi_edge = -b0 - 5.0 * scale, b0 + 5.0 * scale
    grid = np.linspace(lo_edge, hi_edge, AUDIT_GRID_POINTS)
    # log p(y|x) - log p(y|x') = alpha * sum_j (|y_j - x'_j| - |y_j - x_j|); the
    # product grid lets each coordinate be maximised separately.
    best, witness = -np.inf, None
    dist = np.abs(grid[None, None, :] - vecs[:, :, None])  # (n_in, d, G)
    for a in range(vecs.shape[0]):
        gain = dist - dist[a]  # row b: |y - x_b| - |y - x_a|
        total = alpha * gain.max(axis=2).sum(axis=1)
        b = int(np.argmax(total))
        if total[b] > best:
            best = float(total[b])
            y = grid[gain[b].argmax(axis=1)]
            witness = (labels[a], labels[b], y)
    return best, witness
