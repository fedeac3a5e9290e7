"""Meta-test protocol, baselines, normalization and rule reports."""

import numpy as np
import pytest

from symbopt.evaluation import (budget_to_horizon, interpret,
                                normalize_session, read_report_csv,
                                run_baseline, run_policy_method,
                                write_report_csv)
from symbopt.policy import init_params
from symbopt.problems import instance_from_seed


@pytest.fixture(scope="module")
def suite():
    return [instance_from_seed("Sphere", 2, 1),
            instance_from_seed("Rastrigin", 2, 2)]


class TestNormalization:
    def test_hand_computed_two_instances(self):
        # session with two methods, K=2 instances, M=1 run each
        a = np.array([[1.0], [10.0]])
        b = np.array([[3.0], [30.0]])
        reports = normalize_session({"A": a, "B": b})
        # instance 0: span [1, 3]; instance 1: span [10, 30]
        assert reports["A"].obj == pytest.approx(0.0)
        assert reports["A"].performance == pytest.approx(1.0)
        assert reports["B"].obj == pytest.approx(1.0)
        assert reports["B"].performance == pytest.approx(0.0)
        mid = np.array([[2.0], [20.0]])
        rep = normalize_session({"A": a, "B": b, "C": mid})["C"]
        assert rep.obj == pytest.approx(0.5)
        assert rep.performance == pytest.approx(0.5)

    def test_affine_invariance(self):
        rng = np.random.default_rng(0)
        a = rng.uniform(1, 5, size=(3, 4))
        b = rng.uniform(1, 5, size=(3, 4))
        base = normalize_session({"A": a, "B": b})
        scaled_a, scaled_b = a.copy(), b.copy()
        scaled_a[1] = 7.0 * a[1] + 100.0   # rescale one instance's objective
        scaled_b[1] = 7.0 * b[1] + 100.0
        scaled = normalize_session({"A": scaled_a, "B": scaled_b})
        for m in ("A", "B"):
            assert scaled[m].performance == pytest.approx(base[m].performance,
                                                          abs=1e-12)

    def test_degenerate_instance_contributes_zero(self):
        flat = np.array([[2.0, 2.0]])
        rep = normalize_session({"A": flat})["A"]
        assert rep.obj == 0.0 and rep.performance == 1.0

    def test_bounds(self):
        rng = np.random.default_rng(1)
        reports = normalize_session({"A": rng.normal(size=(4, 3)),
                                     "B": rng.normal(size=(4, 3))})
        for rep in reports.values():
            assert 0.0 <= rep.obj <= 1.0
            assert 0.0 <= rep.performance <= 1.0

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            normalize_session({"A": np.zeros((2, 2)), "B": np.zeros((3, 2))})


class TestBudget:
    def test_horizon_mapping(self):
        assert budget_to_horizon(50_000, 100) == 499
        assert budget_to_horizon(200, 100) == 1   # one generation
        with pytest.raises(ValueError):
            budget_to_horizon(100, 100)


class TestMethods:
    def test_policy_method_shape_and_determinism(self, suite):
        params, critic = init_params(0)
        a = run_policy_method(params, critic, suite, runs=2, budget=160,
                              ps=8, seed=7)
        b = run_policy_method(params, critic, suite, runs=2, budget=160,
                              ps=8, seed=7)
        assert a.shape == (2, 2)
        assert np.array_equal(a, b)

    def test_rs_improves_with_budget(self, suite):
        # stochastic monotonicity: mean best over seeds decreases with budget
        small = run_baseline("RS", suite[:1], runs=8, budget=50, ps=8, seed=3)
        large = run_baseline("RS", suite[:1], runs=8, budget=2000, ps=8, seed=3)
        assert large.mean() < small.mean()

    def test_de_beats_rs_on_sphere(self):
        inst = [instance_from_seed("Sphere", 10, 9)]
        rs = run_baseline("RS", inst, runs=3, budget=10_000, ps=50, seed=5)
        de = run_baseline("DE", inst, runs=3, budget=10_000, ps=50, seed=5)
        assert de.mean() < rs.mean()

    def test_unknown_baseline_rejected(self, suite):
        with pytest.raises(ValueError):
            run_baseline("SA", suite, runs=1, budget=100, ps=8, seed=0)


class TestReportCsv:
    def test_roundtrip(self, suite, tmp_path):
        params, critic = init_params(0)
        pol = run_policy_method(params, critic, suite, runs=2, budget=160,
                                ps=8, seed=7)
        rs = run_baseline("RS", suite, runs=2, budget=160, ps=8, seed=7)
        reports = normalize_session({"policy": pol, "RS": rs})
        path = tmp_path / "report.csv"
        write_report_csv(reports, path)
        rows = read_report_csv(path)
        assert len(rows) == 2 * 2 * 2
        by_key = {(r["method"], r["instance"], r["run"]): r for r in rows}
        for k in range(2):
            for m in range(2):
                assert by_key[("policy", k, m)]["best_value"] == pol[k, m]
                assert by_key[("RS", k, m)]["f_min"] == reports["RS"].f_min[k]


class TestInterpret:
    def test_shares_sum_to_one_and_parse(self, suite):
        params, critic = init_params(0)
        report = interpret(params, critic, suite[1], runs=6, horizon=8,
                           ps=8, seed=4)
        assert report.total == 6 * 8
        assert sum(report.shares.values()) == pytest.approx(1.0, abs=1e-9)
        top = report.top()
        assert len(top) <= 5
        assert all(isinstance(t[0], str) for t in top)

    def test_reproducible(self, suite):
        params, critic = init_params(0)
        a = interpret(params, critic, suite[1], runs=3, horizon=5, ps=8, seed=4)
        b = interpret(params, critic, suite[1], runs=3, horizon=5, ps=8, seed=4)
        assert a.counts == b.counts
        assert a.timeline == b.timeline

    def test_table_format(self, suite):
        params, critic = init_params(0)
        report = interpret(params, critic, suite[0], runs=2, horizon=4,
                           ps=8, seed=4)
        table = report.format_table()
        assert "rule" in table and "share" in table
        assert str(report.total) in table
