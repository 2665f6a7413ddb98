"""Lower-bound machinery: packings, bump-function density families,
Le Cam / Fano / information bounds and rate predictors.

Unknown universal constants are never invented.  Every evaluator takes the
measured quantities (covariance norms, cardinalities, bump integrals) of a
concrete construction instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .core import AnalyticDensity, RngStream, _simpson_nodes, basis_matrix, sobolev_norm_sq

K_MAX = 2**16
SIGN_PACKING_CAP = 2**12
EPS_VALIDITY = 0.25


# ---------------------------------------------------------------------------
# Packings
# ---------------------------------------------------------------------------


@dataclass
class PackingSet:
    """Certified finite packing of {0,1}^d (weighted) or {-1,1}^k (sign).

    ``cov_lambda_max`` is the top eigenvalue of the covariance of a uniform
    draw (weighted) or of the second-moment matrix (sign); ``c2`` is that
    value divided by s/d (weighted) or by 1 (sign).
    """

    kind: str
    vectors: np.ndarray
    s: int | None
    min_l1_separation: float
    cov_lambda_max: float
    c2: float
    log_cardinality: float
    theoretical_log_cardinality: float | None = None
    attempts: int = 1

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self):
        return self.vectors.shape[0]

    def to_dict(self, include_vectors: bool = False) -> dict[str, Any]:
        out = {
            "kind": self.kind,
            "dim": self.dim,
            "s": self.s,
            "cardinality": len(self),
            "min_l1_separation": self.min_l1_separation,
            "cov_lambda_max": self.cov_lambda_max,
            "c2": self.c2,
            "log_cardinality": self.log_cardinality,
            "theoretical_log_cardinality": self.theoretical_log_cardinality,
            "attempts": self.attempts,
        }
        if include_vectors:
            out["vectors"] = self.vectors.astype(int).tolist()
        return out


class PackingError(RuntimeError):
    pass


def min_pairwise_l1(vectors: np.ndarray, chunk: int = 2048) -> float:
    """Smallest l1 distance between distinct rows (exact, blockwise)."""
    v = np.asarray(vectors, dtype=np.float64)
    m = v.shape[0]
    if m < 2:
        return math.inf
    binary = np.all((v == 0) | (v == 1))
    sq = np.sum(v * v, axis=1)
    best = math.inf
    for a in range(0, m, chunk):
        block = v[a : a + chunk]
        # entries are in {0,1} or {-1,1}, so |x - y| = (x - y)^2 or |x - y|^2 / 2
        d2 = sq[a : a + chunk, None] + sq[None, :] - 2.0 * block @ v.T
        l1 = d2 if binary else d2 / 2.0
        rows = np.arange(a, min(a + chunk, m))
        l1[rows - a, rows] = np.inf
        best = min(best, float(l1.min()))
    return float(np.rint(best))


def covariance(vectors: np.ndarray) -> np.ndarray:
    """Covariance of a uniform draw from the rows."""
    v = np.asarray(vectors, dtype=np.float64)
    mu = v.mean(axis=0)
    return v.T @ v / v.shape[0] - np.outer(mu, mu)


def second_moment(vectors: np.ndarray) -> np.ndarray:
    v = np.asarray(vectors, dtype=np.float64)
    return v.T @ v / v.shape[0]


def lambda_max(mat: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(mat)[-1])


def slice_covariance(d: int, s: int) -> np.ndarray:
    """Closed-form covariance of a uniform weight-s vector in {0,1}^d.

    Diagonal s/d - s^2/d^2; off-diagonal s(s-1)/(d(d-1)) - s^2/d^2.
    """
    off = s * (s - 1) / (d * (d - 1)) - (s / d) ** 2 if d > 1 else 0.0
    return np.full((d, d), off) + np.eye(d) * (s / d - s * s / d**2 - off)


def _certify_weighted(vectors, d, s, cov_factor, theoretical=None, attempts=1) -> PackingSet:
    v = np.asarray(vectors, dtype=np.float64)
    if not np.all(v.sum(axis=1) == s):
        raise PackingError("a vector does not have exactly s ones")
    sep = min_pairwise_l1(v)
    need = max(s // 4, 1)
    if sep < need:
        raise PackingError(f"separation {sep} below {need}")
    lam = lambda_max(covariance(v))
    c2 = lam * d / s
    if c2 > cov_factor:
        raise PackingError(f"covariance norm {lam:.4g} exceeds {cov_factor} s/d")
    return PackingSet("binary_weighted", v.astype(np.int8), s, sep, lam, c2, math.log(v.shape[0]), theoretical, attempts)


def _full_slice(d: int, s: int) -> np.ndarray:
    from itertools import combinations

    idx = np.array(list(combinations(range(d), s)), dtype=np.int64).reshape(-1, s)
    out = np.zeros((idx.shape[0], d), dtype=np.int8)
    np.put_along_axis(out, idx, 1, axis=1)
    return out


def _random_slice(d: int, s: int, count: int, rng: RngStream) -> np.ndarray:
    keys = rng.uniform((count, d))
    idx = np.argpartition(keys, s - 1, axis=1)[:, :s]
    out = np.zeros((count, d), dtype=np.int8)
    np.put_along_axis(out, idx, 1, axis=1)
    return out


def build_weighted_packing(
    d: int,
    s: int,
    rng: RngStream,
    max_retries: int = 20,
    k_max: int = K_MAX,
    cov_factor: float = 4.0,
) -> PackingSet:
    """Packing of weight-s vectors in {0,1}^d with l1 separation max(s//4, 1).

    * s <= 4: the whole weight-s slice (fails if it exceeds ``k_max``).
    * s a multiple of 4: K = ceil((d/(6t))^(3t/2)) uniform draws from the
      slice, t = s/4, capped at ``k_max``, redrawn until separation and
      ``lambda_max(cov) <= cov_factor * s/d`` both hold.
    * other s <= d/2: a packing of weight 4*(s//4) in dimension d - s%4,
      each vector padded with s%4 ones.
    * s > d/2: complements of a weight-(d-s) packing, thinned greedily to
      the required separation.

    The returned set is always re-verified from scratch.
    """
    if not (1 <= s <= d):
        raise ValueError("need 1 <= s <= d")
    if s <= 4:
        count = math.comb(d, s)
        if count > k_max:
            raise PackingError(f"the weight-{s} slice has {count} > k_max={k_max} vectors")
        return _certify_weighted(_full_slice(d, s), d, s, cov_factor, math.log(count))
    if 2 * s > d:
        base = build_weighted_packing(d, d - s, rng, max_retries, k_max, cov_factor)
        comp = 1 - base.vectors.astype(np.int64)
        kept = _greedy_thin(comp, max(s // 4, 1))
        return _certify_weighted(kept, d, s, max(cov_factor, c2_bound(kept, d, s)), None, base.attempts)
    if s % 4:
        r = s % 4
        inner = build_weighted_packing(d - r, s - r, rng, max_retries, k_max, cov_factor)
        pad = np.ones((len(inner), r), dtype=np.int8)
        vecs = np.concatenate([inner.vectors, pad], axis=1)
        return _certify_weighted(vecs, d, s, cov_factor * d / (d - r), inner.theoretical_log_cardinality, inner.attempts)
    t = s // 4
    log_k = 1.5 * t * math.log(d / (6.0 * t))
    count = int(min(k_max, max(2, math.ceil(math.exp(min(log_k, 50.0))))))
    last = None
    for attempt in range(1, max_retries + 1):
        vecs = _random_slice(d, s, count, rng)
        try:
            return _certify_weighted(vecs, d, s, cov_factor, log_k, attempt)
        except PackingError as err:
            last = err
    raise PackingError(f"no certified packing after {max_retries} draws; last violation: {last}")


def c2_bound(vectors, d, s) -> float:
    return lambda_max(covariance(vectors)) * d / s


def _greedy_thin(vectors: np.ndarray, sep: float) -> np.ndarray:
    keep = []
    v = np.asarray(vectors, dtype=np.int64)
    for row in v:
        if all(np.abs(row - other).sum() >= sep for other in keep):
            keep.append(row)
    return np.array(keep)


def sign_packing_target(k: int) -> int:
    """Number of vectors aimed for: 16k, at most 2^12.

    A fixed ratio to k keeps lambda_max of the second moment near its
    large-k plateau (about 1.8) from k = 64 on, so the information bound
    scales cleanly in k.
    """
    return int(min(SIGN_PACKING_CAP, 16 * k))


def build_sign_packing(
    k: int,
    rng: RngStream,
    target: int | None = None,
    budget: int | None = None,
    c2_max: float = 4.0,
) -> PackingSet:
    """Random-coding packing of {-1,1}^k with pairwise l1 distance >= k/2.

    Candidates are accepted together with their negation (both must clear
    every kept vector), so the set is symmetric and its mean is zero.  The
    default target of :func:`sign_packing_target` keeps the second-moment
    matrix close to the identity.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    target = sign_packing_target(k) if target is None else int(target)
    budget = 200 * target if budget is None else int(budget)
    need = k / 2.0
    kept = np.empty((0, k))
    if k == 2:
        kept = np.array([[1.0, 1.0], [-1.0, -1.0]])
    drawn = 0
    while len(kept) < target and drawn < budget:
        batch = rng.signs((min(256, budget - drawn), k))
        drawn += batch.shape[0]
        for u in batch:
            if len(kept) >= target:
                break
            if len(kept):
                # l1 distance between sign vectors is k - <u, v>
                inner = kept @ u
                if np.any(k - inner < need) or np.any(k + inner < need):
                    continue
            kept = np.vstack([kept, u, -u])
    if len(kept) < 2:
        raise PackingError("sampling budget exhausted before two vectors were found")
    sep = min_pairwise_l1(kept)
    if sep < need:
        raise PackingError(f"separation {sep} below {need}")
    lam = lambda_max(second_moment(kept))
    if lam > c2_max:
        raise PackingError(f"second-moment norm {lam:.4g} exceeds {c2_max}")
    return PackingSet("sign", kept.astype(np.int8), None, sep, lam, lam, math.log(len(kept)), k / 16.0)


# ---------------------------------------------------------------------------
# Bump functions and the density packing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BumpFunction:
    """Antisymmetric bump g on [0, 1]; positive on (0, 1/2), negative on (1/2, 1)."""

    beta: int
    c_half: float
    sq_norm: float
    knots: tuple = field(default=(0.0, 0.25, 0.5, 0.75, 1.0))

    def __call__(self, x):
        return bump_eval(self.beta, x)

    def derivative(self, x, order: int):
        return bump_derivative(self.beta, x, order)


BUMPS = {
    1: BumpFunction(1, 1.0 / 16.0, 1.0 / 48.0),
    2: BumpFunction(2, 1.0 / 480.0, 1.0 / 40320.0),
}


def bump_function(beta: int) -> BumpFunction:
    if beta not in BUMPS:
        raise ValueError("bump functions exist for beta in {1, 2} only")
    return BUMPS[beta]


def _half_bump(beta, y):
    if beta == 1:
        return np.minimum(y, 0.5 - y)
    return 2.0 * y * y * (0.5 - y) ** 2


def bump_eval(beta: int, x):
    """g_1 is the tent min(x, 1/2 - x); g_2 is 2 x^2 (1/2 - x)^2 (so max|g_2''| = 1).

    Both are extended to [1/2, 1] by g(x) = -g(x - 1/2).
    """
    bump_function(beta)
    x = np.asarray(x, dtype=np.float64)
    if np.any(x < 0) or np.any(x > 1):
        raise ValueError("x must lie in [0, 1]")
    upper = x > 0.5
    y = np.where(upper, x - 0.5, x)
    out = np.where(upper, -1.0, 1.0) * _half_bump(beta, y)
    return out if out.ndim else float(out)


def bump_derivative(beta: int, x, order: int):
    """Closed-form derivatives of the bump (order 1, or 2 for beta = 2)."""
    x = np.asarray(x, dtype=np.float64)
    upper = x > 0.5
    y = np.where(upper, x - 0.5, x)
    sign = np.where(upper, -1.0, 1.0)
    if beta == 1 and order == 1:
        return sign * np.where(y < 0.25, 1.0, -1.0)
    if beta == 2 and order == 1:
        return sign * 2.0 * (0.5 * y - 3.0 * y * y + 4.0 * y**3)
    if beta == 2 and order == 2:
        return sign * 2.0 * (0.5 - 6.0 * y + 12.0 * y * y)
    raise ValueError("unsupported derivative order")


class BumpSumDensity(AnalyticDensity):
    """f_nu = 1 + sum_j nu_j k^-beta g(k x - (j-1)) on bin j."""

    def __init__(self, nu, beta: int, k: int):
        self.nu = np.asarray(nu, dtype=np.float64)
        if self.nu.shape != (k,):
            raise ValueError("nu must have length k")
        self.beta = beta
        self.k = k
        self.bump = bump_function(beta)

    def pdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        pos = x * self.k
        j = np.clip(np.floor(pos).astype(np.int64), 0, self.k - 1)
        local = np.clip(pos - j, 0.0, 1.0)
        return 1.0 + self.nu[j] * self.k ** (-self.beta) * bump_eval(self.beta, local)

    def breakpoints(self):
        return np.linspace(0.0, 1.0, 4 * self.k + 1)

    def sq_norm(self) -> float:
        return 1.0 + self.k ** (-2 * self.beta) * self.bump.sq_norm

    def coefficients(self, k: int, panels: int = 64) -> np.ndarray:
        xs, w = _simpson_nodes(self.breakpoints(), panels)
        return (w * self.pdf(xs)) @ basis_matrix(xs, k)

    def sobolev_norm_sq(self, terms: int = 512) -> float:
        """Weighted coefficient sum over the first ``terms`` trig coefficients."""
        return sobolev_norm_sq(self.coefficients(terms), self.beta)


@dataclass
class DensityPacking:
    beta: int
    k: int
    packing: PackingSet

    def member(self, index_or_nu) -> BumpSumDensity:
        nu = self.packing.vectors[index_or_nu] if np.ndim(index_or_nu) == 0 else index_or_nu
        return density_packing_member(self.packing, nu, self.beta, self.k)

    def pair_distance_sq(self, a, b) -> float:
        """Exact ||f_a - f_b||^2 = 4 Hamming k^(-2 beta - 1) ||g||^2."""
        va, vb = self.packing.vectors[a], self.packing.vectors[b]
        ham = int(np.sum(va != vb))
        return 4.0 * ham * self.k ** (-2 * self.beta - 1) * bump_function(self.beta).sq_norm

    def min_distance_sq(self) -> float:
        ham = self.packing.min_l1_separation / 2.0
        return 4.0 * ham * self.k ** (-2 * self.beta - 1) * bump_function(self.beta).sq_norm


def density_packing_member(packing: PackingSet, nu, beta: int, k: int) -> BumpSumDensity:
    nu = np.asarray(nu)
    if packing.kind != "sign" or packing.dim != k:
        raise ValueError("need a sign packing of length k")
    return BumpSumDensity(nu, beta, k)


# ---------------------------------------------------------------------------
# Testing bounds
# ---------------------------------------------------------------------------


def lecam_bound(delta_sq: float, tv: float) -> float:
    """Two-point bound delta^2 (1/2 - tv/2)."""
    if not 0.0 <= tv <= 1.0:
        raise ValueError("tv must lie in [0, 1]")
    return max(delta_sq * (0.5 - 0.5 * tv), 0.0)


def fano_bound(delta: float, info: float, log_card: float) -> float:
    """delta (1 - (I + log 2) / log|V|), floored at 0."""
    if not log_card > math.log(2.0):
        raise ValueError("log cardinality must exceed log 2")
    return max(delta * (1.0 - (info + math.log(2.0)) / log_card), 0.0)


def kl_pair_bound(epsilon: float, tv_list: Sequence[float]) -> float:
    """Symmetrized-KL bound 4 (e^eps - 1)^2 sum_i tv_i^2 for private channels."""
    tv = np.asarray(tv_list, dtype=np.float64)
    if np.any(tv < 0) or np.any(tv > 1):
        raise ValueError("tv values must lie in [0, 1]")
    return float(4.0 * math.expm1(epsilon) ** 2 * np.sum(tv * tv))


def c_epsilon(epsilon: float) -> float:
    """C_eps = 4 / (e^-eps - 2 (e^eps - 1)), finite for eps < log(1/2 + sqrt(3)/2)."""
    return 4.0 / (math.exp(-epsilon) - 2.0 * math.expm1(epsilon))


def _check_eps(epsilon):
    if not 0.0 <= epsilon <= EPS_VALIDITY:
        raise ValueError(f"epsilon must lie in [0, {EPS_VALIDITY}] for the information bound")


def info_bound_multinomial(n: int, epsilon: float, delta: float, s: int, packing: PackingSet) -> float:
    """C_eps n (delta/s)^2 lambda_max(cov) d (e^eps - e^-eps)^2 / 4."""
    _check_eps(epsilon)
    if packing.kind != "binary_weighted":
        raise ValueError("need a binary_weighted packing")
    d = packing.dim
    gap = 2.0 * math.sinh(epsilon)
    return c_epsilon(epsilon) * n * (delta / s) ** 2 * packing.cov_lambda_max * d * gap * gap / 4.0


def kronecker_moment(packing: PackingSet) -> np.ndarray:
    """Average over nu of (e kron nu)(e kron nu)^T with e = [1, -1]: a 2k x 2k matrix."""
    e = np.array([1.0, -1.0])
    return np.kron(np.outer(e, e), second_moment(packing.vectors))


def info_bound_density(n: int, epsilon: float, k: int, beta: int, sign_packing: PackingSet, c_half: float) -> float:
    """C_eps n (c_half^2 / k^(2 beta + 2)) kappa^2 2k lambda_max(M), kappa = sinh(eps)."""
    _check_eps(epsilon)
    if sign_packing.kind != "sign" or sign_packing.dim != k:
        raise ValueError("sign packing dimension does not match k")
    kappa = math.sinh(epsilon)
    lam = lambda_max(kronecker_moment(sign_packing))
    return c_epsilon(epsilon) * n * c_half**2 / k ** (2 * beta + 2) * kappa**2 * 2 * k * lam


# ---------------------------------------------------------------------------
# Rate predictions
# ---------------------------------------------------------------------------


@dataclass
class Rate:
    """A unit-constant rate ``min(1, argument ** exponent)``."""

    argument: float
    exponent: float

    @property
    def value(self) -> float:
        return min(1.0, self.argument**self.exponent)

    def to_dict(self):
        return {"argument": self.argument, "exponent": self.exponent, "value": self.value}


@dataclass
class RatePrediction:
    problem: str
    private_lower: float
    private_upper: float
    classical: float
    naive: float | None = None
    rates: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "problem": self.problem,
            "private_lower": self.private_lower,
            "private_upper": self.private_upper,
            "classical": self.classical,
            "naive": self.naive,
            "rates": {k: v.to_dict() for k, v in self.rates.items()},
        }


def predict_rates(problem: str, n: float, epsilon: float, d: int | None = None, beta: int | None = None) -> RatePrediction:
    """Unit-constant minimax envelopes.

    multinomial: lower min(1, 1/sqrt(n eps^2), d/(n eps^2)), upper
    min(1, d/(n eps^2)), classical (1 - 1/d)/n.  density: private
    (n eps^2)^(-2b/(2b+2)), classical n^(-2b/(2b+1)), naive Laplace
    (n eps^2)^(-2b/(2b+3)).
    """
    if n < 1 or not epsilon > 0:
        raise ValueError("need n >= 1 and epsilon > 0")
    m = n * epsilon * epsilon
    if problem == "multinomial":
        if d is None:
            raise ValueError("multinomial rates need d")
        lower = min(1.0, 1.0 / math.sqrt(m), d / m)
        upper = min(1.0, d / m)
        classical = min(1.0, (1.0 - 1.0 / d) / n)
        rates = {"private_upper": Rate(m / d, -1.0), "classical": Rate(n, -1.0)}
        return RatePrediction(problem, lower, upper, classical, None, rates)
    if problem == "density":
        if beta is None:
            raise ValueError("density rates need beta")
        rates = {
            "private": Rate(m, -2.0 * beta / (2 * beta + 2)),
            "classical": Rate(n, -2.0 * beta / (2 * beta + 1)),
            "naive": Rate(m, -2.0 * beta / (2 * beta + 3)),
        }
        p = rates["private"].value
        return RatePrediction(problem, p, p, rates["classical"].value, rates["naive"].value, rates)
    raise ValueError(f"unknown problem {problem!r}")
