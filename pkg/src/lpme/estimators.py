"""Estimators that reconstruct multinomials and densities from private views.

Each private estimator has a ``*_partial`` companion returning the unbiased
(unprojected) statistic.  Everything reduces to the column sums of the
payloads, so the ``*_from_sums`` forms let callers supply those sums
directly.
"""

from __future__ import annotations

import math

import numpy as np

from .channels import (
    HALFSPACE_SERIES,
    LAPLACE_HISTOGRAM,
    LAPLACE_MULTINOMIAL,
    NAIVE_LAPLACE_SERIES,
    RANDOMIZED_RESPONSE,
    ChannelConfig,
    PrivatizedRecord,
    histogram_bin,
)
from .core import (
    PiecewiseConstantDensity,
    SeriesDensity,
    SimplexVector,
    as_points,
    basis_matrix,
    project_simplex,
)


def collect(records, mechanism: str, dims: int | None = None, epsilon: float | None = None) -> np.ndarray:
    """Stack payloads of one record batch or an iterable of records into ``(n, dims)``.

    Rejects mixed mechanisms, widths or privacy levels.
    """
    if isinstance(records, PrivatizedRecord):
        records = [records]
    rows, eps_seen = [], set()
    for rec in records:
        if rec.mechanism != mechanism:
            raise ValueError(f"expected {mechanism} records, got {rec.mechanism}")
        if dims is not None and rec.dims != dims:
            raise ValueError(f"expected dims={dims}, got {rec.dims}")
        eps_seen.add(rec.epsilon)
        rows.append(rec.rows())
    if not rows:
        raise ValueError("no records")
    if len(eps_seen) > 1:
        raise ValueError("records mix privacy levels")
    if epsilon is not None and eps_seen != {epsilon}:
        raise ValueError("records were produced at a different epsilon")
    z = np.concatenate(rows, axis=0)
    if len({r.shape[1] for r in rows}) > 1:
        raise ValueError("records mix dimensions")
    return z


def _cfg_dims(cfg, mechanism):
    if isinstance(cfg, ChannelConfig):
        if cfg.mechanism != mechanism:
            raise ValueError(f"config is for {cfg.mechanism}, not {mechanism}")
        return cfg.dims, cfg.eps
    return cfg, None


# ---------------------------------------------------------------------------
# Multinomial
# ---------------------------------------------------------------------------


def rr_debias_from_sums(sums, n: int, epsilon: float) -> np.ndarray:
    """Unbiased theta from the column sums of n randomized-response vectors."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive: the debiasing factor is undefined at 0")
    h = math.exp(epsilon / 2.0)
    return (np.asarray(sums, dtype=np.float64) / n - 1.0 / (1.0 + h)) * (h + 1.0) / (h - 1.0)


def rr_multinomial_partial(records, cfg: ChannelConfig) -> np.ndarray:
    d, eps = _cfg_dims(cfg, RANDOMIZED_RESPONSE)
    z = collect(records, RANDOMIZED_RESPONSE, d, eps)
    return rr_debias_from_sums(z.sum(axis=0), z.shape[0], eps)


def rr_multinomial_estimate(records, cfg: ChannelConfig) -> SimplexVector:
    """Debiased randomized-response frequencies projected onto the simplex."""
    return SimplexVector(_to_simplex(rr_multinomial_partial(records, cfg)))


def laplace_multinomial_partial(records, cfg: ChannelConfig) -> np.ndarray:
    d, eps = _cfg_dims(cfg, LAPLACE_MULTINOMIAL)
    return collect(records, LAPLACE_MULTINOMIAL, d, eps).mean(axis=0)


def laplace_multinomial_estimate(records, cfg: ChannelConfig) -> SimplexVector:
    """Mean of Laplace-perturbed indicators projected onto the simplex."""
    return SimplexVector(_to_simplex(laplace_multinomial_partial(records, cfg)))


def mle_multinomial_estimate(raw_samples, d: int | None = None) -> SimplexVector:
    """Empirical frequencies of 1-based categories."""
    x = np.asarray(raw_samples)
    if x.size == 0:
        raise ValueError("no samples")
    d = int(x.max()) if d is None else d
    if x.min() < 1 or x.max() > d:
        raise ValueError(f"category out of range 1..{d}")
    counts = np.bincount(x.astype(np.int64) - 1, minlength=d)
    return SimplexVector(counts / x.size)


def _to_simplex(v, scale: float = 1.0) -> np.ndarray:
    w = project_simplex(v, scale)
    # absorb the last ulp so the simplex invariant holds exactly
    return w * (scale / w.sum()) if w.sum() > 0 else w


# ---------------------------------------------------------------------------
# Densities
# ---------------------------------------------------------------------------


def histogram_partial_from_sums(sums, n: int) -> np.ndarray:
    k = len(sums)
    return k * np.asarray(sums, dtype=np.float64) / n


def histogram_from_sums(sums, n: int) -> PiecewiseConstantDensity:
    k = len(sums)
    return PiecewiseConstantDensity(_to_simplex(histogram_partial_from_sums(sums, n), k))


def histogram_density_estimate(records, k) -> PiecewiseConstantDensity:
    """Bin heights (k/n) sum Z_i projected onto k * simplex: a valid density."""
    k, eps = _cfg_dims(k, LAPLACE_HISTOGRAM)
    z = collect(records, LAPLACE_HISTOGRAM, k, eps)
    return histogram_from_sums(z.sum(axis=0), z.shape[0])


def classical_histogram_estimate(raw_samples, k: int) -> PiecewiseConstantDensity:
    """Non-private histogram: bin frequencies times k."""
    x = as_points(np.atleast_1d(raw_samples))
    counts = np.bincount(histogram_bin(x, k) - 1, minlength=k)
    return PiecewiseConstantDensity(k * counts / x.size)


def series_density_estimate(records, k) -> SeriesDensity:
    """Coefficients (1/n) sum_i Z_i over the first k basis functions; not projected."""
    k, eps = _cfg_dims(k, HALFSPACE_SERIES)
    return SeriesDensity(collect(records, HALFSPACE_SERIES, k, eps).mean(axis=0))


def naive_series_density_estimate(records, k) -> SeriesDensity:
    """Average of Laplace-perturbed basis vectors."""
    k, eps = _cfg_dims(k, NAIVE_LAPLACE_SERIES)
    return SeriesDensity(collect(records, NAIVE_LAPLACE_SERIES, k, eps).mean(axis=0))


def classical_series_estimate(raw_samples, k: int) -> SeriesDensity:
    """Empirical coefficients (1/n) sum_i phi_j(X_i), j < k."""
    x = as_points(np.atleast_1d(raw_samples))
    return SeriesDensity(basis_sums(x, k) / x.size)


def basis_sums(x, k: int, chunk: int = 1 << 16) -> np.ndarray:
    """sum_i phi_j(x_i) for j < k, in fixed-size chunks to bound memory."""
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros(k)
    for start in range(0, x.size, chunk):
        out += basis_matrix(x[start : start + chunk], k).sum(axis=0)
    return out


def estimate(records, cfg: ChannelConfig):
    """Dispatch to the estimator matching ``cfg.mechanism``."""
    table = {
        RANDOMIZED_RESPONSE: rr_multinomial_estimate,
        LAPLACE_MULTINOMIAL: laplace_multinomial_estimate,
        LAPLACE_HISTOGRAM: histogram_density_estimate,
        HALFSPACE_SERIES: series_density_estimate,
        NAIVE_LAPLACE_SERIES: naive_series_density_estimate,
    }
    return table[cfg.mechanism](records, cfg)
