import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpme import harness as hs
from lpme.harness import (
    CSV_COLUMNS,
    ExperimentSpec,
    ResultRow,
    effective_sample_size_report,
    emit_outputs,
    evaluate_checks,
    fit_loglog_slope,
    fits_for,
    laplace_sum,
    read_results_csv,
    round_k,
    run_sweep,
    select_rows,
    truncation_levels,
    write_results_csv,
)


def row(mech, n, mse, eps=1.0, dims=4, se=0.0, problem="multinomial"):
    return ResultRow(mech, problem, n, dims, eps, None, 100, mse, se, 0.0)


def small_spec(**kw):
    base = dict(problem="multinomial", mechanisms=["randomized_response", "laplace_multinomial", "mle"], d=4, n_grid=[100, 400], epsilon_grid=[1.0], trials=8, seed=5, timing=False)
    base.update(kw)
    return ExperimentSpec(**base)


class TestSlopeFit:
    def test_exact_power_law(self):
        n = np.array([1e2, 1e3, 1e4, 1e5])
        fit = fit_loglog_slope(n, 3.0 * n**-0.75)
        assert fit.slope == pytest.approx(-0.75, abs=1e-12)
        assert fit.intercept == pytest.approx(math.log(3.0))
        assert fit.r2 == pytest.approx(1.0)
        assert fit.stderr < 1e-12

    def test_needs_four_points_and_two_decades(self):
        with pytest.raises(ValueError):
            fit_loglog_slope([1, 10, 100], [1, 0.1, 0.01])
        with pytest.raises(ValueError):
            fit_loglog_slope([10, 20, 40, 80], [1, 0.5, 0.25, 0.125])

    def test_drops_nonpositive_with_warning(self):
        n = [1e1, 1e2, 1e3, 1e4, 1e5]
        with pytest.warns(RuntimeWarning):
            fit = fit_loglog_slope(n, [0.0, 1e-2, 1e-3, 1e-4, 1e-5])
        assert fit.points == 4 and fit.slope == pytest.approx(-1.0)

    def test_select_best_k(self):
        rows = [row("naive_laplace_series", 10, 0.5, dims=2), row("naive_laplace_series", 10, 0.3, dims=3), row("naive_laplace_series", 20, 0.2, dims=2)]
        sel = select_rows(rows, "naive_laplace_series", 1.0)
        assert [(r.n, r.dims) for r in sel] == [(10, 3), (20, 2)]


class TestCsv:
    @settings(max_examples=60, deadline=None)
    @given(
        st.lists(
            st.tuples(
                st.integers(1, 2**40),
                st.one_of(st.none(), st.floats(1e-6, 1e3)),
                st.floats(0, 1e6, allow_subnormal=True),
                st.floats(0, 1e6),
            ),
            min_size=1,
            max_size=8,
        )
    )
    def test_round_trip_bitwise(self, tmp_path_factory, data):
        rows = [ResultRow("mle" if e is None else "laplace_multinomial", "multinomial", n, 3, e, None, 7, m, s, 1.5) for n, e, m, s in data]
        path = tmp_path_factory.mktemp("csv") / "r.csv"
        write_results_csv(rows, path)
        back = read_results_csv(path)
        assert back == rows
        for a, b in zip(rows, back):
            assert np.float64(a.mse_mean).tobytes() == np.float64(b.mse_mean).tobytes()

    def test_header(self, tmp_path):
        write_results_csv([row("mle", 10, 0.1, eps=None)], tmp_path / "r.csv")
        assert (tmp_path / "r.csv").read_text().splitlines()[0] == ",".join(CSV_COLUMNS)
        assert CSV_COLUMNS == ["mechanism", "problem", "n", "dims", "epsilon", "beta", "trials", "mse_mean", "mse_stderr", "wall_ms"]


class TestSpec:
    def test_default_truth(self):
        spec = small_spec()
        np.testing.assert_allclose(spec.truth, [0.4, 0.3, 0.2, 0.1])

    @pytest.mark.parametrize(
        "kw",
        [
            {"n_grid": [100, 100]},
            {"n_grid": [400, 100]},
            {"mechanisms": ["halfspace_series"]},
            {"trials": 5, "checks": [{"type": "slope", "mechanism": "mle", "expected": -1, "tolerance": 0.1}]},
            {"truth": [0.5, 0.6, 0.0, -0.1]},
            {"epsilon_grid": [0.0]},
        ],
    )
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            small_spec(**kw)

    def test_unknown_keys(self):
        with pytest.raises(ValueError):
            ExperimentSpec.from_dict({"problem": "multinomial", "mechanisms": ["mle"], "d": 3, "bogus": 1})

    def test_json_round_trip(self, tmp_path):
        spec = small_spec()
        (tmp_path / "s.json").write_text(json.dumps(spec.to_dict()))
        assert ExperimentSpec.from_json(tmp_path / "s.json") == spec

    def test_density_defaults(self):
        assert ExperimentSpec(problem="density", mechanisms=["laplace_histogram"], beta=1).truth == "tent"
        assert ExperimentSpec(problem="density", mechanisms=["halfspace_series"], beta=2).truth == "power_decay"

    def test_truncation_rules(self):
        spec = ExperimentSpec(problem="density", mechanisms=["laplace_histogram", "classical_histogram"], beta=1)
        assert truncation_levels(spec, "laplace_histogram", 4096, 1.0) == [8]
        assert truncation_levels(spec, "laplace_histogram", 4096, 0.5) == [6]
        assert truncation_levels(spec, "classical_histogram", 4096, None) == [16]
        spec2 = ExperimentSpec(problem="density", mechanisms=["naive_laplace_series"], beta=2, truncation={"naive_laplace_series": [1, 2, 3]})
        assert truncation_levels(spec2, "naive_laplace_series", 10, 1.0) == [1, 2, 3]

    def test_round_half_up(self):
        assert round_k(2.5) == 3 and round_k(2.49) == 2 and round_k(0.2) == 1


class TestSweep:
    def test_deterministic_across_workers(self, tmp_path):
        spec = small_spec()
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_results_csv(run_sweep(spec), a)
        write_results_csv(run_sweep(spec, workers=2), b)
        assert a.read_bytes() == b.read_bytes()
        write_results_csv(run_sweep(small_spec(seed=6)), b)
        assert a.read_bytes() != b.read_bytes()

    def test_density_deterministic(self, tmp_path):
        spec = ExperimentSpec(problem="density", mechanisms=["halfspace_series", "naive_laplace_series", "classical_series"], beta=2, n_grid=[64, 256], epsilon_grid=[1.0], trials=4, seed=1, timing=False, truncation={"naive_laplace_series": [1, 2]})
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_results_csv(run_sweep(spec), a)
        write_results_csv(run_sweep(spec, workers=3), b)
        assert a.read_bytes() == b.read_bytes()
        rows = read_results_csv(a)
        assert sum(r.mechanism == "naive_laplace_series" for r in rows) == 4

    @pytest.mark.parametrize("mech", ["randomized_response", "laplace_multinomial"])
    def test_record_level_agrees_with_sufficient_statistics(self, mech):
        kw = dict(mechanisms=[mech], n_grid=[300], trials=1500, d=4)
        fast = run_sweep(small_spec(**kw))[0]
        slow = run_sweep(small_spec(record_level=True, seed=9, **kw))[0]
        se = math.hypot(fast.mse_stderr, slow.mse_stderr)
        assert abs(fast.mse_mean - slow.mse_mean) <= 4 * se

    def test_histogram_record_level_agrees(self):
        kw = dict(problem="density", mechanisms=["laplace_histogram"], beta=1, d=None, n_grid=[500], trials=1000)
        fast = run_sweep(small_spec(**kw))[0]
        slow = run_sweep(small_spec(record_level=True, seed=11, **kw))[0]
        assert abs(fast.mse_mean - slow.mse_mean) <= 4 * math.hypot(fast.mse_stderr, slow.mse_stderr)

    def test_laplace_sum_law(self):
        g = np.random.default_rng(0)
        s = laplace_sum(g, 50, 0.5, 200_000)
        assert abs(s.mean()) < 4 * math.sqrt(400 / 200_000)
        # variance n * 2 / rate^2 = 400
        assert s.var() == pytest.approx(400, rel=0.02)

    def test_mle_mse_oracle(self):
        # E||p_hat - p||^2 = (1 - sum p^2) / n
        r = run_sweep(small_spec(mechanisms=["mle"], n_grid=[50], trials=4000))[0]
        assert abs(r.mse_mean - (1 - 0.3) / 50) <= 4 * r.mse_stderr


class TestEffectiveSampleSize:
    def test_exact_power_laws(self):
        d = 4
        classical = [row("mle", n, 1.0 / n, eps=None) for n in 2.0 ** np.arange(2, 21)]
        private = [row("laplace_multinomial", n, d / (n * eps**2), eps=eps, dims=d) for eps in (0.5, 1.0) for n in (1024, 4096)]
        rep = effective_sample_size_report(private, classical)
        for t in rep:
            assert t["ratio"] == pytest.approx(t["epsilon"] ** 2 / d, rel=1e-9)
            assert t["normalized"] == pytest.approx(1.0, rel=1e-9)

    def test_out_of_range(self):
        classical = [row("mle", n, 1.0 / n, eps=None) for n in (10, 100)]
        with pytest.raises(ValueError):
            effective_sample_size_report([row("laplace_multinomial", 10, 5.0)], classical)
        assert effective_sample_size_report([row("laplace_multinomial", 10, 5.0)], classical, strict=False) == []


class TestChecks:
    def test_ordering_and_upper_bound(self):
        spec = small_spec(
            checks=[
                {"type": "ordering", "name": "o", "worse": "laplace_multinomial", "better": "randomized_response", "n_min": 200},
                {"type": "upper_bound", "name": "u", "bound": "multinomial", "mechanisms": ["randomized_response"]},
            ]
        )
        rows = [row("laplace_multinomial", 100, 0.01), row("randomized_response", 100, 0.02), row("laplace_multinomial", 400, 0.02), row("randomized_response", 400, 0.01)]
        o, u = evaluate_checks(spec, rows)
        assert o.passed and o.measured == pytest.approx(2.0)
        # bound 5 min(1, 4/400) = 0.05
        assert u.passed and u.measured == pytest.approx(0.2)

    def test_dominance_fails_when_mse_below_lower(self):
        spec = small_spec(checks=[{"type": "dominance"}])
        (c,) = evaluate_checks(spec, [row("randomized_response", 100, 1e-6)])
        assert not c.passed and c.measured > 1

    def test_failed_check_records_error(self):
        spec = small_spec(checks=[{"type": "ordering", "worse": "mle", "better": "randomized_response"}])
        (c,) = evaluate_checks(spec, [row("randomized_response", 100, 0.1)])
        assert not c.passed and "error" in c.detail


def test_emit_schema(tmp_path):
    spec = small_spec(n_grid=[10, 100, 1000, 10_000], trials=30, checks=[{"type": "slope", "name": "s", "mechanism": "mle", "expected": -1.0, "tolerance": 0.1}])
    rows = run_sweep(spec)
    checks = evaluate_checks(spec, rows)
    summary = emit_outputs(rows, fits_for(rows), tmp_path, checks, spec, "lpme multinomial --config x --out y")
    assert {p.name for p in tmp_path.iterdir()} >= {"results.csv", "summary.json", "plot.gp"}
    doc = json.loads((tmp_path / "summary.json").read_text())
    assert doc == json.loads(json.dumps(summary))
    (slope,) = doc["checks"]
    assert {"expected_exponent", "measured", "tolerance", "pass"} <= set(slope)
    assert doc["command"].startswith("lpme multinomial")
    assert {f["mechanism"] for f in doc["fits"]} == {"mle", "randomized_response", "laplace_multinomial"}
    assert "results.csv" in (tmp_path / "plot.gp").read_text()
    assert doc["all_pass"] == all(c["pass"] for c in doc["checks"])


def test_default_grids():
    assert hs.DEFAULT_N_GRID == [2**10, 2**12, 2**14, 2**16, 2**18, 2**20]
    assert hs.DEFAULT_EPSILONS == [0.25, 0.5, 1.0, 2.0]
