"""Monte Carlo sweeps, rate-slope fits, acceptance checks and report files."""

from __future__ import annotations

import csv
import json
import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from . import channels as ch
from .bounds import predict_rates
from .core import (
    PiecewiseConstantDensity,
    RngStream,
    SeriesDensity,
    l2_distance_squared,
    stable_hash64,
)
from .densities import named_density
from .estimators import (
    basis_sums,
    collect,
    estimate,
    histogram_from_sums,
    rr_debias_from_sums,
    _to_simplex,
)

MLE = "mle"
CLASSICAL_HISTOGRAM = "classical_histogram"
CLASSICAL_SERIES = "classical_series"
CLASSICAL = (MLE, CLASSICAL_HISTOGRAM, CLASSICAL_SERIES)

PROBLEM_MECHANISMS = {
    "multinomial": (ch.RANDOMIZED_RESPONSE, ch.LAPLACE_MULTINOMIAL, MLE),
    "density": (ch.LAPLACE_HISTOGRAM, ch.HALFSPACE_SERIES, ch.NAIVE_LAPLACE_SERIES, CLASSICAL_HISTOGRAM, CLASSICAL_SERIES),
}
DEFAULT_N_GRID = [2**e for e in range(10, 21, 2)]
DEFAULT_EPSILONS = [0.25, 0.5, 1.0, 2.0]
MIN_SLOPE_TRIALS = 30
CHUNK = 1 << 16

CSV_COLUMNS = ["mechanism", "problem", "n", "dims", "epsilon", "beta", "trials", "mse_mean", "mse_stderr", "wall_ms"]


# ---------------------------------------------------------------------------
# Configuration and results
# ---------------------------------------------------------------------------


@dataclass
class ExperimentSpec:
    """Declarative sweep over (mechanism, n, epsilon).

    ``truncation`` maps a mechanism to ``"rule"`` (the default rates below),
    a fixed integer, or a list of integers to scan.  Default rules:
    private histogram and halfspace series k = (n eps^2)^(1/(2b+2)), naive
    series k = (n eps^2)^(1/(2b+3)), classical k = n^(1/(2b+1)), each
    rounded to the nearest integer and at least 1.
    """

    problem: str
    mechanisms: list
    n_grid: list = field(default_factory=lambda: list(DEFAULT_N_GRID))
    epsilon_grid: list = field(default_factory=lambda: list(DEFAULT_EPSILONS))
    trials: int = 100
    seed: int = 0
    d: int | None = None
    beta: int | None = None
    truth: Any = None
    truncation: dict = field(default_factory=dict)
    classical_n_grid: list | None = None
    checks: list = field(default_factory=list)
    record_level: bool = False
    timing: bool = True
    name: str = ""

    def __post_init__(self):
        if self.problem not in PROBLEM_MECHANISMS:
            raise ValueError(f"unknown problem {self.problem!r}")
        bad = [m for m in self.mechanisms if m not in PROBLEM_MECHANISMS[self.problem]]
        if bad:
            raise ValueError(f"mechanisms {bad} do not apply to the {self.problem} problem")
        self.n_grid = [int(n) for n in self.n_grid]
        for grid in (self.n_grid, self.classical_n_grid or [1]):
            if any(n < 1 for n in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
                raise ValueError("n grids must be strictly increasing positive integers")
        self.epsilon_grid = [float(e) for e in self.epsilon_grid]
        if any(not e > 0 for e in self.epsilon_grid):
            raise ValueError("epsilons must be positive")
        if self.trials < 1:
            raise ValueError("trials must be positive")
        if any(c.get("type") == "slope" for c in self.checks) and self.trials < MIN_SLOPE_TRIALS:
            raise ValueError(f"slope checks need at least {MIN_SLOPE_TRIALS} trials")
        if self.problem == "multinomial":
            if self.truth is None:
                if self.d is None:
                    raise ValueError("multinomial specs need d or an explicit truth")
                self.truth = default_multinomial_truth(self.d).tolist()
            theta = np.asarray(self.truth, dtype=np.float64)
            if self.d is None:
                self.d = theta.size
            if theta.size != self.d or np.any(theta < 0) or abs(theta.sum() - 1) > 1e-12:
                raise ValueError("truth must be a simplex vector of length d")
        else:
            if self.beta not in (1, 2):
                raise ValueError("density specs need beta in {1, 2}")
            if self.truth is None:
                self.truth = "tent" if self.beta == 1 else "power_decay"
            named_density(self.truth)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "ExperimentSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ResultRow:
    mechanism: str
    problem: str
    n: int
    dims: int
    epsilon: float | None
    beta: int | None
    trials: int
    mse_mean: float
    mse_stderr: float
    wall_ms: float

    @property
    def private(self) -> bool:
        return self.mechanism in ch.MECHANISMS


def default_multinomial_truth(d: int) -> np.ndarray:
    """theta proportional to (d, d-1, ..., 1): interior, not symmetric."""
    w = np.arange(d, 0, -1, dtype=np.float64)
    return w / w.sum()


def round_k(value: float) -> int:
    return max(1, int(math.floor(value + 0.5)))


def truncation_levels(spec: ExperimentSpec, mechanism: str, n: int, epsilon: float | None) -> list[int]:
    """Truncation levels / bin counts for one cell."""
    rule = spec.truncation.get(mechanism, "rule")
    if isinstance(rule, (list, tuple)):
        return [int(k) for k in rule]
    if isinstance(rule, (int, float)) and not isinstance(rule, bool):
        return [int(rule)]
    b = spec.beta
    if mechanism in (ch.LAPLACE_HISTOGRAM, ch.HALFSPACE_SERIES):
        return [round_k((n * epsilon**2) ** (1.0 / (2 * b + 2)))]
    if mechanism == ch.NAIVE_LAPLACE_SERIES:
        return [round_k((n * epsilon**2) ** (1.0 / (2 * b + 3)))]
    return [round_k(n ** (1.0 / (2 * b + 1)))]


@dataclass(frozen=True)
class Cell:
    mechanism: str
    n: int
    dims: tuple
    epsilon: float | None

    def key(self):
        return (self.mechanism, self.n, self.dims, self.epsilon)


def build_cells(spec: ExperimentSpec) -> list[Cell]:
    cells = []
    for mech in spec.mechanisms:
        private = mech in ch.MECHANISMS
        grid = spec.n_grid if private or spec.classical_n_grid is None else spec.classical_n_grid
        eps_list = spec.epsilon_grid if private else [None]
        for eps in eps_list:
            for n in grid:
                if spec.problem == "multinomial":
                    dims = (spec.d,)
                else:
                    dims = tuple(truncation_levels(spec, mech, n, eps))
                cells.append(Cell(mech, n, dims, eps))
    return cells


# ---------------------------------------------------------------------------
# One replication
# ---------------------------------------------------------------------------


class _Context:
    """Truth and per-cell constants shared by every replication of a spec."""

    def __init__(self, spec: ExperimentSpec):
        self.spec = spec
        if spec.problem == "multinomial":
            self.theta = np.asarray(spec.truth, dtype=np.float64)
        else:
            self.density = named_density(spec.truth)

    def run(self, cell: Cell, trial: int) -> np.ndarray:
        rng = RngStream(self.spec.seed, stable_hash64((cell.key(), trial)))
        if self.spec.problem == "multinomial":
            return np.array([self._multinomial(cell, rng)])
        return self._density(cell, rng)

    # multinomial ---------------------------------------------------------
    def _multinomial(self, cell: Cell, rng: RngStream) -> float:
        d, n, eps = self.spec.d, cell.n, cell.epsilon
        g = rng.generator
        if self.spec.record_level and cell.mechanism != MLE:
            x = g.choice(d, size=n, p=self.theta) + 1
            cfg = ch.ChannelConfig(cell.mechanism, eps, d)
            est = np.asarray(estimate(ch.privatize(x, cfg, rng), cfg))
            return float(np.sum((est - self.theta) ** 2))
        counts = g.multinomial(n, self.theta)
        if cell.mechanism == MLE:
            est = counts / n
        elif cell.mechanism == ch.RANDOMIZED_RESPONSE:
            keep = ch.rr_keep_probability(eps)
            sums = g.binomial(counts, keep) + g.binomial(n - counts, 1.0 - keep)
            est = _to_simplex(rr_debias_from_sums(sums, n, eps))
        else:
            sums = counts + laplace_sum(g, n, eps / 2.0, d)
            est = _to_simplex(sums / n)
        return float(np.sum((est - self.theta) ** 2))

    # density -------------------------------------------------------------
    def _density(self, cell: Cell, rng: RngStream) -> np.ndarray:
        f, n, eps, mech = self.density, cell.n, cell.epsilon, cell.mechanism
        g = rng.generator
        if mech in (ch.LAPLACE_HISTOGRAM, CLASSICAL_HISTOGRAM):
            out = []
            for k in cell.dims:
                if self.spec.record_level and mech == ch.LAPLACE_HISTOGRAM:
                    cfg = ch.ChannelConfig(mech, eps, k)
                    est = estimate(ch.privatize(f.sample(n, rng), cfg, rng), cfg)
                else:
                    counts = g.multinomial(n, _clean_probs(f.bin_masses(k)))
                    if mech == CLASSICAL_HISTOGRAM:
                        est = PiecewiseConstantDensity(k * counts / n)
                    else:
                        est = histogram_from_sums(counts + laplace_sum(g, n, eps / 2.0, k), n)
                out.append(l2_distance_squared(est, f))
            return np.array(out)
        if mech == ch.HALFSPACE_SERIES:
            out = []
            for k in cell.dims:
                cfg = ch.ChannelConfig(mech, eps, k)
                total = np.zeros(k)
                for start in range(0, n, CHUNK):
                    m = min(CHUNK, n - start)
                    rec = ch.privatize(f.sample(m, rng), cfg, rng)
                    total += collect(rec, mech, k, eps).sum(axis=0)
                out.append(l2_distance_squared(SeriesDensity(total / n), f))
            return np.array(out)
        # classical and naive series share one set of raw samples per trial
        kmax = max(cell.dims)
        sums = np.zeros(kmax)
        for start in range(0, n, CHUNK):
            sums += basis_sums(f.sample(min(CHUNK, n - start), rng), kmax)
        out = []
        for k in cell.dims:
            s = sums[:k]
            if mech == ch.NAIVE_LAPLACE_SERIES:
                s = s + laplace_sum(g, n, eps / (ch.SQRT2 * k), k)
            out.append(l2_distance_squared(SeriesDensity(s / n), f))
        return np.array(out)


def laplace_sum(g: np.random.Generator, n: int, rate: float, size: int) -> np.ndarray:
    """Sum of n i.i.d. Laplace(rate) draws per coordinate, exactly in law.

    Laplace(rate) is the difference of two Exp(rate) draws, so the sum is
    the difference of two Gamma(n, 1/rate) draws.
    """
    return g.gamma(n, 1.0 / rate, size) - g.gamma(n, 1.0 / rate, size)


def _clean_probs(p):
    p = np.maximum(np.asarray(p, dtype=np.float64), 0.0)
    return p / p.sum()


# ---------------------------------------------------------------------------
# Sweep driver
# ---------------------------------------------------------------------------

_WORKER_CTX: dict = {}


def _worker_run(spec_dict, cell, trials):
    key = json.dumps(spec_dict, sort_keys=True)
    ctx = _WORKER_CTX.get(key)
    if ctx is None:
        ctx = _WORKER_CTX[key] = _Context(ExperimentSpec.from_dict(spec_dict))
    start = time.perf_counter()
    errs = np.array([ctx.run(cell, t) for t in trials])
    return errs, (time.perf_counter() - start) * 1000.0


def run_sweep(spec: ExperimentSpec, workers: int = 1, progress=None) -> list[ResultRow]:
    """Run every cell of ``spec`` for ``spec.trials`` seeded replications.

    Replication t of a cell uses the stream ``hash(cell, t)``, so results
    do not depend on ``workers`` or on scheduling order.
    """
    cells = build_cells(spec)
    trials = list(range(spec.trials))
    spec_dict = spec.to_dict()
    if workers > 1:
        parts = max(1, min(workers, spec.trials))
        slices = [trials[i::parts] for i in range(parts)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [[pool.submit(_worker_run, spec_dict, c, s) for s in slices] for c in cells]
            results = []
            for c, futs in zip(cells, futures):
                outs = [fu.result() for fu in futs]
                errs = np.empty((spec.trials, len(c.dims)))
                for s, (e, _) in zip(slices, outs):
                    errs[s] = e
                results.append((errs, sum(ms for _, ms in outs)))
    else:
        results = []
        for c in cells:
            results.append(_worker_run(spec_dict, c, trials))
            if progress:
                progress(c)
    rows = []
    for c, (errs, ms) in zip(cells, results):
        for j, k in enumerate(c.dims):
            e = errs[:, j]
            se = float(np.std(e, ddof=1) / math.sqrt(e.size)) if e.size > 1 else 0.0
            rows.append(
                ResultRow(
                    c.mechanism,
                    spec.problem,
                    c.n,
                    int(k),
                    c.epsilon,
                    spec.beta,
                    spec.trials,
                    float(np.mean(e)),
                    se,
                    round(ms / len(c.dims), 3) if spec.timing else 0.0,
                )
            )
    return rows


# ---------------------------------------------------------------------------
# Analysis
# ---------------------------------------------------------------------------


@dataclass
class SlopeFit:
    slope: float
    stderr: float
    r2: float
    intercept: float
    points: int

    def to_dict(self):
        return asdict(self)


def fit_loglog_slope(n, mse) -> SlopeFit:
    """OLS of log(mse) on log(n); nonpositive mse values are dropped with a warning."""
    x = np.asarray(n, dtype=np.float64)
    y = np.asarray(mse, dtype=np.float64)
    keep = y > 0
    if not np.all(keep):
        warnings.warn(f"dropping {np.sum(~keep)} nonpositive mse values", RuntimeWarning, stacklevel=2)
        x, y = x[keep], y[keep]
    if np.unique(x).size < 4 or np.log10(x.max() / x.min()) < 2 - 1e-9:
        raise ValueError("need at least 4 distinct n values spanning two decades")
    lx, ly = np.log(x), np.log(y)
    A = np.column_stack([lx, np.ones_like(lx)])
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - A @ coef
    dof = lx.size - 2
    sxx = np.sum((lx - lx.mean()) ** 2)
    stderr = math.sqrt(np.sum(resid**2) / dof / sxx) if dof > 0 else 0.0
    sst = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / sst if sst > 0 else 1.0
    return SlopeFit(float(coef[0]), stderr, float(r2), float(coef[1]), int(lx.size))


def select_rows(rows: Iterable[ResultRow], mechanism: str, epsilon: float | None = None, best_k: bool = True) -> list[ResultRow]:
    """Rows of one mechanism (and epsilon), keeping the lowest-mse dims per n."""
    chosen: dict[int, ResultRow] = {}
    for r in rows:
        if r.mechanism != mechanism:
            continue
        if epsilon is not None and (r.epsilon is None or not math.isclose(r.epsilon, epsilon)):
            continue
        cur = chosen.get(r.n)
        if cur is None or (best_k and r.mse_mean < cur.mse_mean):
            chosen[r.n] = r
    return [chosen[n] for n in sorted(chosen)]


def fit_rows(rows, mechanism, epsilon=None) -> SlopeFit:
    sel = select_rows(rows, mechanism, epsilon)
    return fit_loglog_slope([r.n for r in sel], [r.mse_mean for r in sel])


def effective_sample_size_report(private_rows: Sequence[ResultRow], classical_rows: Sequence[ResultRow], strict: bool = True) -> list[dict]:
    """For each private row, the classical sample size n' with equal mse.

    n' comes from log-log interpolation of the classical curve; the table
    reports n'/n next to the predicted proportionality eps^2/d.
    """
    cl = sorted(classical_rows, key=lambda r: r.n)
    if len(cl) < 2:
        raise ValueError("need at least two classical rows")
    cn = np.log([r.n for r in cl])
    cm = np.log([r.mse_mean for r in cl])
    # np.interp needs increasing abscissae: classical mse decreases in n
    order = np.argsort(cm)
    out = []
    for r in private_rows:
        lm = math.log(r.mse_mean)
        inside = cm.min() <= lm <= cm.max()
        if not inside:
            if strict:
                raise ValueError(f"private mse {r.mse_mean:.3g} at n={r.n} is outside the classical range")
            continue
        n_prime = math.exp(float(np.interp(lm, cm[order], cn[order])))
        pred = (r.epsilon or 0.0) ** 2 / r.dims
        out.append(
            {
                "mechanism": r.mechanism,
                "n": r.n,
                "dims": r.dims,
                "epsilon": r.epsilon,
                "n_prime": n_prime,
                "ratio": n_prime / r.n,
                "predicted_proportional": pred,
                "normalized": n_prime / r.n / pred if pred else math.nan,
            }
        )
    return out


# ---------------------------------------------------------------------------
# Embedded checks
# ---------------------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    kind: str
    expected_exponent: float | None
    measured: float | None
    tolerance: float | None
    passed: bool
    detail: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "name": self.name,
            "kind": self.kind,
            "expected_exponent": self.expected_exponent,
            "measured": self.measured,
            "tolerance": self.tolerance,
            "pass": self.passed,
            "detail": self.detail,
        }


def multinomial_upper_bound(n, d, eps, constant=5.0):
    return constant * min(1.0, d / (n * eps * eps))


def histogram_upper_bound(n, eps, constant=5.0):
    return constant * (eps * eps * n) ** -0.5 + math.sqrt(eps) * n**-0.75


UPPER_BOUNDS = {
    "multinomial": lambda spec, r, c: multinomial_upper_bound(r.n, spec.d, r.epsilon, c),
    "histogram": lambda spec, r, c: histogram_upper_bound(r.n, r.epsilon, c),
}


def evaluate_checks(spec: ExperimentSpec, rows: Sequence[ResultRow]) -> list[CheckResult]:
    """Run the checks listed in ``spec.checks`` against sweep results."""
    out = []
    for chk in spec.checks:
        kind = chk["type"]
        name = chk.get("name", kind)
        try:
            out.append(_CHECKS[kind](spec, rows, chk, name))
        except ValueError as err:
            out.append(CheckResult(name, kind, None, None, None, False, {"error": str(err)}))
    return out


def _check_slope(spec, rows, chk, name):
    fit = fit_rows(rows, chk["mechanism"], chk.get("epsilon"))
    exp, tol = chk["expected"], chk.get("tolerance")
    mode = chk.get("mode", "within")
    if mode == "at_least":
        ok = fit.slope >= exp
    else:
        ok = abs(fit.slope - exp) <= tol
    return CheckResult(name, "slope", exp, fit.slope, tol, bool(ok), {"mode": mode, **fit.to_dict()})


def _check_upper_bound(spec, rows, chk, name):
    bound = UPPER_BOUNDS[chk["bound"]]
    const = chk.get("constant", 5.0)
    worst, detail = -math.inf, []
    eps = chk.get("epsilon")
    for mech in chk["mechanisms"]:
        for r in rows:
            if r.mechanism != mech or (eps is not None and r.epsilon != eps):
                continue
            b = bound(spec, r, const)
            worst = max(worst, r.mse_mean / b)
            detail.append({"mechanism": mech, "n": r.n, "epsilon": r.epsilon, "mse_mean": r.mse_mean, "bound": b})
    return CheckResult(name, "upper_bound", None, worst, 1.0, bool(worst <= 1.0), {"worst_ratio_to_bound": worst, "cells": detail})


def _check_dominance(spec, rows, chk, name):
    worst, failures = -math.inf, []
    for r in rows:
        if not r.private:
            continue
        pred = predict_rates(spec.problem, r.n, r.epsilon, d=spec.d, beta=spec.beta)
        ratio = pred.private_lower / (r.mse_mean + 3.0 * r.mse_stderr)
        worst = max(worst, ratio)
        if ratio > 1.0:
            failures.append({"mechanism": r.mechanism, "n": r.n, "dims": r.dims, "epsilon": r.epsilon})
    return CheckResult(name, "dominance", None, worst, 1.0, not failures, {"max_ratio_lower_to_mse": worst, "failures": failures})


def _check_ordering(spec, rows, chk, name):
    eps, n_min = chk.get("epsilon"), chk.get("n_min", 1)
    worse = {r.n: r for r in select_rows(rows, chk["worse"], eps)}
    better = {r.n: r for r in select_rows(rows, chk["better"], eps)}
    cells, ok = [], True
    for n in sorted(set(worse) & set(better)):
        if n < n_min:
            continue
        w, b = worse[n], better[n]
        cells.append({"n": n, "worse_mse": w.mse_mean, "worse_dims": w.dims, "better_mse": b.mse_mean, "better_dims": b.dims})
        ok &= w.mse_mean > b.mse_mean
    if not cells:
        raise ValueError("no common n values for the ordering check")
    ratio = min(c["worse_mse"] / c["better_mse"] for c in cells)
    return CheckResult(name, "ordering", None, ratio, 1.0, bool(ok), {"cells": cells})


def _check_ess(spec, rows, chk, name):
    e_lo, e_hi = chk["epsilons"]
    classical = [r for r in rows if r.mechanism == chk["classical"]]
    fitted = {}
    tables = {}
    for e in (e_lo, e_hi):
        priv = select_rows(rows, chk["mechanism"], e)
        table = effective_sample_size_report(priv, classical, strict=False)
        if not table:
            raise ValueError(f"no overlapping mse values at epsilon={e}")
        tables[e] = table
    common = sorted(set(t["n"] for t in tables[e_lo]) & set(t["n"] for t in tables[e_hi]))
    if not common:
        raise ValueError("no common n values")
    for e in (e_lo, e_hi):
        fitted[e] = math.exp(np.mean([math.log(t["ratio"]) for t in tables[e] if t["n"] in common]))
    measured = fitted[e_hi] / fitted[e_lo]
    expected = (e_hi / e_lo) ** 2
    factor = chk.get("factor", 2.0)
    ok = expected / factor <= measured <= expected * factor
    return CheckResult(name, "ess_scaling", 2.0, measured, factor, bool(ok), {"expected_ratio": expected, "fitted": {str(k): v for k, v in fitted.items()}, "tables": {str(k): v for k, v in tables.items()}})


_CHECKS = {
    "slope": _check_slope,
    "upper_bound": _check_upper_bound,
    "dominance": _check_dominance,
    "ordering": _check_ordering,
    "ess_scaling": _check_ess,
}


# ---------------------------------------------------------------------------
# Output files
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def write_results_csv(rows: Sequence[ResultRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])


def read_results_csv(path) -> list[ResultRow]:
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append(
                ResultRow(
                    rec["mechanism"],
                    rec["problem"],
                    int(rec["n"]),
                    int(rec["dims"]),
                    float(rec["epsilon"]) if rec["epsilon"] else None,
                    int(rec["beta"]) if rec["beta"] else None,
                    int(rec["trials"]),
                    float(rec["mse_mean"]),
                    float(rec["mse_stderr"]),
                    float(rec["wall_ms"]),
                )
            )
    return rows


PLOT_TEMPLATE = """# gnuplot script: mse against n on log-log axes, one curve per mechanism/epsilon
set datafile separator ','
set logscale xy
set xlabel 'n'
set ylabel 'mean squared error'
set key outside
set terminal pngcairo size 900,600
set output 'plot.png'
plot {curves}
"""


def _plot_script(rows: Sequence[ResultRow]) -> str:
    series = sorted({(r.mechanism, r.epsilon) for r in rows}, key=lambda t: (t[0], t[1] or 0.0))
    curves = []
    for mech, eps in series:
        eps_txt = _fmt(eps)
        cond = f'(strcol(1) eq "{mech}" && strcol(5) eq "{eps_txt}")'
        label = mech if eps is None else f"{mech} eps={eps_txt}"
        curves.append(f"'results.csv' skip 1 using 3:({cond} ? $8 : 1/0) with linespoints title '{label}'")
    return PLOT_TEMPLATE.format(curves=", \\\n     ".join(curves) if curves else "NaN notitle")


def emit_outputs(rows: Sequence[ResultRow], fits: Sequence[dict], out_dir, checks: Sequence[CheckResult] = (), spec: ExperimentSpec | None = None, command: str | None = None) -> dict:
    """Write results.csv, summary.json and plot.gp into ``out_dir``."""
    if not rows:
        raise ValueError("no rows to write")
    os.makedirs(out_dir, exist_ok=True)
    write_results_csv(rows, os.path.join(out_dir, "results.csv"))
    comparisons = []
    if spec is not None:
        for r in rows:
            pred = predict_rates(spec.problem, r.n, r.epsilon if r.epsilon else 1.0, d=spec.d, beta=spec.beta)
            comparisons.append({"mechanism": r.mechanism, "n": r.n, "dims": r.dims, "epsilon": r.epsilon, "mse_mean": r.mse_mean, "prediction": pred.to_dict()})
    summary = {
        "name": spec.name if spec else "",
        "command": command,
        "fits": list(fits),
        "predict_rates": comparisons,
        "checks": [c.to_dict() for c in checks],
        "all_pass": all(c.passed for c in checks),
    }
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, default=_json_default)
        fh.write("\n")
    with open(os.path.join(out_dir, "plot.gp"), "w") as fh:
        fh.write(_plot_script(rows))
    return summary


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def fits_for(rows: Sequence[ResultRow]) -> list[dict]:
    """Slope fit for every (mechanism, epsilon) series with enough points."""
    out = []
    for mech, eps in sorted({(r.mechanism, r.epsilon) for r in rows}, key=lambda t: (t[0], t[1] or 0.0)):
        try:
            fit = fit_rows(rows, mech, eps)
        except ValueError:
            continue
        out.append({"mechanism": mech, "epsilon": eps, **fit.to_dict()})
    return out
