import math

import numpy as np
import pytest

from fcbio.core import InvalidArgument, InvalidData, Setting
from fcbio.problems import (
    ChainSpec,
    DesignMatrix,
    lambda_max,
    lipschitz_chain_min_value,
    lipschitz_chain_minimizer,
    logistic_loss,
    make_lipschitz_chain,
    make_lipschitz_hard_instance,
    make_logistic_problem,
    make_lower_bound_instance,
    make_min_norm_problem,
    make_smooth_chain,
    make_smooth_hard_instance,
    smooth_chain_min_value,
    smooth_chain_minimizer,
    synthetic_logistic,
    synthetic_min_norm,
)
from fcbio.verify import finite_difference_gradient


def chain_hessian(q, L):
    """(L/4) * tridiag(-1, 2, -1) built by hand."""
    H = 2 * np.eye(q) - np.eye(q, k=1) - np.eye(q, k=-1)
    return L / 4 * H


def smooth_chain_direct(x, L, R):
    q = x.size
    s = x[0] ** 2 + np.sum(np.diff(x) ** 2) + x[-1] ** 2
    return L / 4 * (0.5 * s - R * x[0])


def lipschitz_chain_direct(x, C, R):
    q = x.size
    return C * math.sqrt(q) / (1 + math.sqrt(q)) * x.max() + C / (2 * R * (1 + math.sqrt(q))) * x @ x


def fd_check(oracle, x, rel=1e-5):
    step = 1e-6 * (1 + np.linalg.norm(x))
    fd = finite_difference_gradient(oracle, x, step)
    g = oracle.first_order(x)
    assert np.linalg.norm(fd - g) <= rel * max(1.0, np.linalg.norm(g))


def test_chain_spec_validation():
    for bad in [(0, 1.0, 1.0), (2, 0.0, 1.0), (2, 1.0, -1.0), (1.5, 1.0, 1.0)]:
        with pytest.raises(InvalidArgument):
            ChainSpec(*bad)


class TestSmoothChain:
    def test_minimizer_example(self, backend):
        spec = ChainSpec(3, 4.0, 1.0)
        np.testing.assert_allclose(smooth_chain_minimizer(spec), [0.75, 0.5, 0.25])
        # solve H x = (L R / 4) e1 independently
        rhs = np.zeros(3)
        rhs[0] = 4.0 * 1.0 / 4
        np.testing.assert_allclose(np.linalg.solve(chain_hessian(3, 4.0), rhs), [0.75, 0.5, 0.25])
        h = make_smooth_chain(spec)
        np.testing.assert_allclose(h.first_order(smooth_chain_minimizer(spec)), 0.0, atol=1e-15)
        assert h.value(smooth_chain_minimizer(spec)) == pytest.approx(smooth_chain_min_value(spec),
                                                                      rel=1e-14)

    def test_origin(self, backend):
        h = make_smooth_chain(ChainSpec(5, 3.0, 2.0))
        assert h.value(np.zeros(5)) == 0.0
        np.testing.assert_array_equal(h.first_order(np.zeros(5)), [-1.5, 0, 0, 0, 0])

    def test_value_and_gradient_match_direct(self, backend):
        rng = np.random.default_rng(0)
        for q in (1, 2, 7):
            spec = ChainSpec(q, 2.5, 1.3)
            h = make_smooth_chain(spec)
            H = chain_hessian(q, 2.5)
            e1 = np.eye(q)[0]
            for _ in range(20):
                x = rng.standard_normal(q)
                assert h.value(x) == pytest.approx(smooth_chain_direct(x, 2.5, 1.3), rel=1e-12, abs=1e-14)
                np.testing.assert_allclose(h.first_order(x), H @ x - 2.5 * 1.3 / 4 * e1, atol=1e-13)

    def test_gradient_lipschitz(self, backend):
        rng = np.random.default_rng(1)
        spec = ChainSpec(10, 3.0, 1.0)
        h = make_smooth_chain(spec)
        for _ in range(200):
            x, y = rng.standard_normal(10), rng.standard_normal(10)
            lhs = np.linalg.norm(h.first_order(x) - h.first_order(y))
            assert lhs <= 3.0 * np.linalg.norm(x - y) * (1 + 1e-9)
        assert np.linalg.eigvalsh(chain_hessian(10, 3.0))[-1] <= 3.0 + 1e-9

    def test_finite_differences(self, backend):
        rng = np.random.default_rng(2)
        h = make_smooth_chain(ChainSpec(6, 2.0, 1.0))
        for _ in range(50):
            fd_check(h, rng.standard_normal(6))


class TestLipschitzChain:
    def test_origin_subgradient(self, backend):
        r = make_lipschitz_chain(ChainSpec(4, 1.0, 1.0))
        assert r.value(np.zeros(4)) == 0.0
        np.testing.assert_allclose(r.first_order(np.zeros(4)), [2 / 3, 0, 0, 0], rtol=1e-15)

    def test_minimizer_and_value(self, backend):
        spec = ChainSpec(4, 1.0, 1.0)
        x = lipschitz_chain_minimizer(spec)
        np.testing.assert_allclose(x, [-0.5] * 4)
        assert np.linalg.norm(x) == pytest.approx(1.0)
        r = make_lipschitz_chain(spec)
        assert r.value(x) == pytest.approx(-1 / 6, rel=1e-14)
        assert lipschitz_chain_min_value(spec) == pytest.approx(-1 / 6, rel=1e-14)
        assert lipschitz_chain_direct(x, 1.0, 1.0) == pytest.approx(-1 / 6, rel=1e-14)

    def test_minimizer_beats_random_points(self, backend):
        spec = ChainSpec(5, 2.0, 1.5)
        r = make_lipschitz_chain(spec)
        best = r.value(lipschitz_chain_minimizer(spec))
        rng = np.random.default_rng(3)
        for _ in range(2000):
            assert r.value(rng.standard_normal(5)) >= best - 1e-12

    def test_smallest_index_rule(self, backend):
        r = make_lipschitz_chain(ChainSpec(4, 1.0, 1.0))
        x = np.array([-1.0, 0.5, 0.5, 0.0])
        coef = 2 / 3
        expected = coef * np.eye(4)[1] + 1.0 / (2 * 3) * 2 * x
        np.testing.assert_allclose(r.first_order(x), expected, rtol=1e-14)

    def test_lipschitz_inside_ball(self, backend):
        C, R, q = 1.7, 2.0, 6
        r = make_lipschitz_chain(ChainSpec(q, C, R))
        rng = np.random.default_rng(4)
        for _ in range(500):
            x, y = rng.standard_normal(q), rng.standard_normal(q)
            x *= R * rng.random() / np.linalg.norm(x)
            y *= R * rng.random() / np.linalg.norm(y)
            assert abs(r.value(x) - r.value(y)) <= C * np.linalg.norm(x - y) * (1 + 1e-12)
            assert r.value(x) == pytest.approx(lipschitz_chain_direct(x, C, R), rel=1e-12, abs=1e-14)


@pytest.mark.parametrize("kind", ["smooth", "lipschitz"])
@pytest.mark.parametrize("q", [1, 8, 64])
def test_zero_chain_span_iterator(kind, q, backend):
    rng = np.random.default_rng(q)
    make = make_smooth_chain if kind == "smooth" else make_lipschitz_chain
    h = make(ChainSpec(q, 1.0, 1.0))
    x = np.zeros(q)
    outputs = []
    for k in range(q + 2):
        # x_k is supported on the first k coordinates
        assert not np.any(x[min(k, q):])
        outputs.append(h.first_order(x))
        coeffs = rng.standard_normal(len(outputs))
        x = sum(c * o for c, o in zip(coeffs, outputs))


class TestHardInstances:
    def test_smooth_T1(self):
        p = make_smooth_hard_instance(1)
        assert p.ground_truth.f_star == pytest.approx(1 / 36, rel=1e-15)
        assert p.f.value(np.zeros(2)) == 0.0

    @pytest.mark.parametrize("T", [1, 2, 5, 50])
    def test_smooth_optimum(self, T, backend):
        p = make_smooth_hard_instance(T)
        gt = p.ground_truth
        assert gt.f_star >= 1 / 48
        assert abs(p.f.value(gt.x_star) - gt.f_star) <= 1e-14
        assert np.linalg.norm(gt.x_star) <= 1.0
        assert p.setting is Setting.SMOOTH and p.ball.radius == 1.0

    @pytest.mark.parametrize("T", [1, 3, 50])
    def test_lipschitz_optimum(self, T, backend):
        p = make_lipschitz_hard_instance(T)
        gt = p.ground_truth
        assert gt.f_star == 0.25
        assert abs(p.f.value(gt.x_star) - gt.f_star) <= 1e-14
        assert np.linalg.norm(gt.x_star) == pytest.approx(1.0, rel=1e-14)
        assert abs(p.f.value(np.zeros(2 * T)) - gt.f_star) >= 0.25

    @pytest.mark.parametrize("make", [make_smooth_hard_instance, make_lipschitz_hard_instance])
    def test_lower_level_optimality(self, make, backend):
        p = make(3)
        q = 6
        g_star = p.g.value(p.ground_truth.x_star)
        rng = np.random.default_rng(5)
        X = rng.standard_normal((10_000, q))
        X *= (rng.random(10_000) ** (1 / q) / np.linalg.norm(X, axis=1))[:, None]
        for x in X:
            assert g_star <= p.g.value(x) + 1e-12

    def test_rejects_bad_T(self):
        with pytest.raises(InvalidArgument):
            make_smooth_hard_instance(0)


class TestLowerBoundInstances:
    def test_smooth_upper(self, backend):
        p = make_lower_bound_instance("smooth", "upper", 3, constant=1.0, D=1.0)
        x = np.random.default_rng(0).standard_normal(7) * 0.2
        h = make_smooth_chain(ChainSpec(7, 1.0, 1.0))
        assert p.f.value(x) == h.value(x)
        assert p.g.value(x) == 0.0 and not p.g.first_order(x).any()
        assert p.ground_truth.g_star == 0.0

    def test_lipschitz_lower(self, backend):
        p = make_lower_bound_instance(Setting.LIPSCHITZ, "lower", 4, constant=1.0, D=1.0)
        assert p.f.value(np.ones(4)) == 0.0
        assert p.ground_truth.g_star == pytest.approx(lipschitz_chain_min_value(ChainSpec(4, 1.0, 1.0)))
        assert p.ball.radius == 1.0

    def test_bad_level(self):
        with pytest.raises(InvalidArgument):
            make_lower_bound_instance("smooth", "middle", 3)


class TestMinNorm:
    def test_example(self):
        p = make_min_norm_problem(DesignMatrix(np.array([[1.0, 1.0]]), np.array([1.0])), 2.0)
        assert p.f.value(np.zeros(2)) == 0.0
        assert p.g.value(np.zeros(2)) == 0.5
        x_star = np.array([0.5, 0.5])
        assert p.g.value(x_star) == 0.0
        np.testing.assert_array_equal(p.g.first_order(x_star), [0.0, 0.0])
        assert p.f.value(x_star) == 0.25
        assert p.g_const == pytest.approx(2.0, rel=1e-9)

    def test_lambda_max(self):
        rng = np.random.default_rng(6)
        for m, n in [(5, 3), (20, 40), (1, 7)]:
            A = rng.standard_normal((m, n))
            assert lambda_max(A) == pytest.approx(np.linalg.eigvalsh(A.T @ A)[-1], rel=1e-8)

    def test_zero_matrix_warns(self):
        with pytest.warns(UserWarning):
            p = make_min_norm_problem(DesignMatrix(np.zeros((2, 3)), np.zeros(2)), 1.0)
        assert p.g_const == 1e-12 and p.meta["L_g_floored"]

    def test_finite_differences(self):
        data = synthetic_min_norm(10, 15, seed=1)
        p = make_min_norm_problem(data, 2.0)
        rng = np.random.default_rng(7)
        for _ in range(50):
            x = rng.standard_normal(15)
            fd_check(p.f, x)
            fd_check(p.g, x)

    def test_synthetic_is_consistent(self):
        data = synthetic_min_norm(40, 80, seed=7)
        x, *_ = np.linalg.lstsq(data.A, data.b, rcond=None)
        assert np.linalg.norm(data.A @ x - data.b) < 1e-10

    def test_bad_data(self):
        with pytest.raises(InvalidData):
            DesignMatrix(np.ones((2, 2)), np.ones(3))
        with pytest.raises(InvalidData):
            DesignMatrix(np.array([[np.inf]]), np.ones(1))


class TestLogistic:
    @pytest.mark.parametrize("m", [2, 40, 94, 95, 200, 375])
    def test_log2_at_origin(self, m):
        train, val = synthetic_logistic(m, 6, seed=0)
        p = make_logistic_problem(train, val, 10.0)
        assert p.f.value(np.zeros(6)) == math.log(2)
        assert p.g.value(np.zeros(6)) == math.log(2)

    @pytest.mark.parametrize("t", [-30.0, -1.0, 0.0, 0.7, 40.0])
    def test_single_sample(self, t):
        A, y = np.array([[1.0, 0.0]]), np.array([1.0])
        loss, grad = logistic_loss(A, y, np.array([t, 0.0]))
        assert loss == pytest.approx(math.log1p(math.exp(-t)), rel=1e-14)
        assert grad[0] == pytest.approx(-1 / (1 + math.exp(t)), rel=1e-14)
        assert grad[1] == 0.0

    def test_finite_differences(self):
        train, val = synthetic_logistic(60, 5, seed=2)
        p = make_logistic_problem(train, val, 10.0)
        rng = np.random.default_rng(8)
        for _ in range(50):
            x = rng.standard_normal(5) * 2
            fd_check(p.f, x, rel=1e-6)
            fd_check(p.g, x, rel=1e-6)

    def test_smoothness_constant(self):
        train, val = synthetic_logistic(30, 4, seed=3)
        p = make_logistic_problem(train, val, 10.0)
        eig = np.linalg.eigvalsh(train.A.T @ train.A)[-1]
        assert p.g_const == pytest.approx(eig / (4 * train.A.shape[0]), rel=1e-8)

    def test_label_error(self):
        bad = DesignMatrix(np.ones((2, 2)), np.array([1.0, 0.0]))
        good = DesignMatrix(np.ones((2, 2)), np.array([1.0, -1.0]))
        with pytest.raises(InvalidData, match="row 2"):
            make_logistic_problem(bad, good, 1.0)

    def test_extreme_margins_finite(self):
        A = np.array([[1.0], [-1.0]])
        loss, grad = logistic_loss(A, np.array([1.0, 1.0]), np.array([1e4]))
        assert np.isfinite(loss) and np.all(np.isfinite(grad))
        assert loss == pytest.approx(1e4 / 2, rel=1e-12)
