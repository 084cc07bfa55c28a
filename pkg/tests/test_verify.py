import math

import numpy as np
import pytest

from fcbio.core import Ball, FirstOrderOracle, InvalidArgument, Setting, SingularSystem
from fcbio.geometry import project_ball
from fcbio.problems import (
    DesignMatrix,
    make_lipschitz_hard_instance,
    make_min_norm_problem,
    make_smooth_hard_instance,
    synthetic_min_norm,
)
from fcbio.subroutines import MinimaxProblem, psi_bar
from fcbio.verify import (
    SupportLedger,
    finite_difference_gradient,
    gradient_mapping_bruteforce,
    lower_bound_floor,
    min_norm_ground_truth,
    monitor_zero_respecting,
    psi_star_reference,
    run_floor,
    run_stall,
    run_suite,
)


class TestGroundTruth:
    def test_example(self):
        x, f = min_norm_ground_truth(DesignMatrix(np.array([[1.0, 1.0]]), np.array([1.0])))
        np.testing.assert_allclose(x, [0.5, 0.5], rtol=1e-15)
        assert f == pytest.approx(0.25, rel=1e-15)

    def test_identity(self):
        b = np.array([0.3, -2.0, 5.0])
        x, f = min_norm_ground_truth(DesignMatrix(np.eye(3), b))
        np.testing.assert_allclose(x, b, rtol=1e-15)

    def test_zero_rhs(self):
        x, f = min_norm_ground_truth(DesignMatrix(np.ones((2, 3)), np.zeros(2)))
        assert not x.any() and f == 0.0

    def test_consistency_against_pinv(self):
        data = synthetic_min_norm(40, 80, seed=7)
        x, f = min_norm_ground_truth(data)
        np.testing.assert_allclose(x, np.linalg.pinv(data.A) @ data.b, atol=1e-12)
        assert f == 0.5 * float(x @ x)
        g = make_min_norm_problem(data, 2.0).g
        assert g.value(x) <= 1e-14 * (1 + data.b @ data.b)

    def test_singular(self):
        A = np.array([[1.0, 2.0], [2.0, 4.0]])
        with pytest.raises(SingularSystem):
            min_norm_ground_truth(DesignMatrix(A, np.array([1.0, 1.0])))


def linear(a, label):
    a = np.atleast_1d(np.asarray(a, dtype=float))
    return FirstOrderOracle(lambda x: float(a @ x), lambda x: a.copy(), label)


class TestPsiStarReference:
    def test_piecewise_linear(self, backend):
        p = MinimaxProblem(linear(1.0, "f"), linear(-1.0, "g"), 0.0, Ball.origin(1, 1.0), 1.0,
                           Setting.LIPSCHITZ)
        assert abs(psi_star_reference(p, 0.02, x0=[0.7])) <= 0.02

    def test_large_t_is_lower_level_minimum(self, backend):
        p = MinimaxProblem(linear(1.0, "f"), linear(-1.0, "g"), 1e3, Ball.origin(1, 1.0), 1.0,
                           Setting.LIPSCHITZ)
        assert abs(psi_star_reference(p, 0.02) - (-1.0)) <= 0.02

    def test_decreasing_in_t(self, backend):
        f = FirstOrderOracle(lambda x: float(x @ x), lambda x: 2 * x, "f")
        g = FirstOrderOracle(lambda x: float((x[0] - 1) ** 2) - 0.5, lambda x: 2 * (x - [1.0, 0.0]), "g")
        base = MinimaxProblem(f, g, 0.0, Ball.origin(2, 2.0), 2.0)
        acc = 1e-4
        vals = [psi_star_reference(base.at(t), acc) for t in np.linspace(0, 1, 6)]
        for a, b in zip(vals, vals[1:]):
            assert b <= a + 2 * acc
            assert a - b <= 0.2 + 2 * acc

    def test_bad_accuracy(self):
        p = MinimaxProblem(linear(1.0, "f"), linear(-1.0, "g"), 0.0, Ball.origin(1, 1.0), 1.0)
        with pytest.raises(InvalidArgument):
            psi_star_reference(p, 0.0)


def const_oracle(v, g, label):
    g = np.asarray(g, dtype=float)
    return FirstOrderOracle(lambda x: v, lambda x: g.copy(), label)


class TestBruteForce:
    def test_zero_gradients_return_y(self, backend):
        p = MinimaxProblem(const_oracle(1.0, [0, 0, 0], "f"), const_oracle(0.0, [0, 0, 0], "g"),
                           0.0, Ball.origin(3, 1.0), 1.0)
        y = np.array([0.2, -0.1, 0.4])
        x, v = gradient_mapping_bruteforce(p, y)
        assert np.linalg.norm(x - y) <= 1e-6
        assert v == pytest.approx(1.0, abs=1e-10)

    def test_single_branch(self, backend):
        gf = np.array([3.0, -1.0, 0.5])
        p = MinimaxProblem(const_oracle(0.0, gf, "f"), const_oracle(-50.0, [1, 1, 1], "g"),
                           0.0, Ball.origin(3, 1.0), 2.0)
        y = np.array([0.5, 0.5, 0.0])
        x, v = gradient_mapping_bruteforce(p, y)
        expected = project_ball(y - gf / 2.0, p.ball)
        ref = psi_bar(expected, y, 0.0, gf, -50.0, np.ones(3), 0.0, 2.0)
        assert abs(v - ref) <= 1e-6

    def test_grid_too_coarse(self):
        p = MinimaxProblem(const_oracle(0.0, [1, 0], "f"), const_oracle(0.0, [0, 1], "g"),
                           0.0, Ball.origin(2, 1.0), 1.0)
        with pytest.raises(InvalidArgument):
            gradient_mapping_bruteforce(p, np.zeros(2), grid=10)


class TestFiniteDifference:
    def test_quadratic(self):
        h = FirstOrderOracle(lambda x: 0.5 * float(x @ x), lambda x: x, "h")
        x = np.array([0.3, -1.7, 4.0])
        np.testing.assert_allclose(finite_difference_gradient(h, x), x, rtol=1e-8)

    def test_constant(self):
        h = FirstOrderOracle(lambda x: 3.0, lambda x: np.zeros_like(x), "h")
        assert not finite_difference_gradient(h, np.ones(4)).any()

    def test_logistic_single_sample(self):
        h = FirstOrderOracle(lambda x: math.log1p(math.exp(-x[0])), lambda x: None, "h")
        for t in (-2.0, 0.0, 0.5, 3.0):
            fd = finite_difference_gradient(h, np.array([t, 0.0]))
            assert fd[0] == pytest.approx(-1 / (1 + math.exp(t)), rel=1e-6)

    def test_bad_step(self):
        h = FirstOrderOracle(lambda x: 0.0, lambda x: x, "h")
        with pytest.raises(InvalidArgument):
            finite_difference_gradient(h, np.zeros(2), step=0.0)


class TestMonitor:
    def test_pass_then_violation(self):
        ledger = SupportLedger(frozenset())
        e1, e2 = np.eye(3)[0], np.eye(3)[1]
        ledger.record("f", "first_order", np.zeros(3), e1)
        ledger.record("g", "first_order", 0.3 * e1, e1)
        assert ledger.check() == []
        ledger.record("f", "first_order", e2, e2)
        bad = ledger.check()
        assert len(bad) == 1 and bad[0].index == 2 and bad[0].extra == frozenset({1})

    def test_value_queries_do_not_extend_support(self):
        ledger = SupportLedger(frozenset())
        ledger.record("f", "value", np.zeros(2), None)
        ledger.record("f", "first_order", np.array([1.0, 0.0]), np.array([1.0, 0.0]))
        assert [v.index for v in ledger.check()] == [1]

    def test_wrapped_problem_counts_and_limits(self):
        from fcbio.core import OracleBudgetExhausted

        p = make_smooth_hard_instance(3)
        mon, ledger = monitor_zero_respecting(p, f_call_limit=2)
        x = np.zeros(6)
        mon.f.first_order(x)
        mon.f.evaluate(x)
        with pytest.raises(OracleBudgetExhausted):
            mon.f.first_order(x)
        assert p.f.calls == 2 and len(ledger.events) == 2

    @pytest.mark.parametrize("make", [make_smooth_hard_instance, make_lipschitz_hard_instance])
    def test_full_run_on_hard_instance(self, make, backend):
        res = run_stall(make(10))
        assert res.violations == [] and res.stalled
        assert len(res.f_values) > 0 and set(res.f_values) == {0.0}

    @pytest.mark.parametrize("setting", ["smooth", "lipschitz"])
    def test_floor(self, setting, backend):
        res = run_floor(setting, T=6)
        assert res.holds
        assert res.floor == lower_bound_floor(setting, 6)


def test_suite_dispatch():
    checks = run_suite("projections")
    assert checks and all(c.passed for c in checks)
    assert {c.suite for c in checks} == {"projections"}
    with pytest.raises(InvalidArgument):
        run_suite("nope")
