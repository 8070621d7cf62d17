import numpy as np
import pytest

from rangelm.linalg import adjoint_mismatch
from rangelm.problems import empirical_eta, linear_diagonal, nonlinear_exp, taylor_order


def test_linear_diagonal_entries():
    p = linear_diagonal(3, 1.0)
    np.testing.assert_allclose(p.meta["diag"], [1, 1 / 2, 1 / 3])
    np.testing.assert_allclose(p.forward(np.ones(3)), [1, 1 / 2, 1 / 3])
    assert p.eta_hint == 0.0
    # jacobian does not depend on the point
    h = np.array([1.0, -2.0, 0.5])
    np.testing.assert_array_equal(p.jacobian_at(np.zeros(3)).apply(h),
                                  p.jacobian_at(np.full(3, 9.0)).apply(h))


def test_linear_diagonal_rejects_bad_args():
    with pytest.raises(ValueError):
        linear_diagonal(1)
    with pytest.raises(ValueError):
        linear_diagonal(5, 0.0)


def test_nonlinear_exp_at_zero():
    p = nonlinear_exp(4, 2.0)
    np.testing.assert_allclose(p.forward(np.zeros(4)), [1, 1 / 4, 1 / 9, 1 / 16])
    np.testing.assert_allclose(p.exact_data(), p.meta["diag"])
    assert p.eta_hint == 0.4


def test_nonlinear_exp_domain():
    p = nonlinear_exp(3, bound=50)
    assert p.domain_check(np.array([0.0, 49.0, -49.0])) is None
    assert p.domain_check(np.array([0.0, 51.0, 0.0])) is not None
    assert p.domain_check(np.array([np.nan, 0.0, 0.0])) is not None
    with pytest.raises(FloatingPointError):
        p.forward(np.array([0.0, 60.0, 0.0]))


@pytest.mark.parametrize("make", [linear_diagonal, nonlinear_exp])
def test_adjoints(make):
    p = make(20)
    x = np.random.default_rng(1).uniform(-1, 1, 20)
    assert adjoint_mismatch(p.jacobian_at(x)) <= 1e-12


def test_taylor_order_nonlinear():
    p = nonlinear_exp(20)
    rng = np.random.default_rng(2)
    x, h = rng.uniform(-1, 1, 20), rng.standard_normal(20)
    errs, orders = taylor_order(p.forward, p.jacobian_at(x).apply, x, h)
    assert np.all(orders >= 1.9), orders


def test_taylor_remainder_vanishes_for_linear():
    p = linear_diagonal(10)
    x, h = np.ones(10), np.arange(10.0)
    errs, _ = taylor_order(p.forward, p.jacobian_at(x).apply, x, h)
    assert np.all(errs <= 1e-14)


def test_rel_error_reference():
    p = linear_diagonal(4)
    assert p.rel_error(p.x0) == pytest.approx(100.0)
    q = nonlinear_exp(4, x0_value=0.5)
    # x* = 0: measured against the start
    assert q.rel_error(q.x0) == pytest.approx(100.0)
    assert q.rel_error(np.zeros(4)) == 0.0


def test_empirical_eta_linear_is_zero():
    p = linear_diagonal(10)
    assert empirical_eta(p, np.zeros(10), 1.0, samples=20) <= 1e-12


def test_empirical_eta_nonlinear_grows_with_radius():
    p = nonlinear_exp(10)
    small = empirical_eta(p, np.zeros(10), 0.01, samples=50)
    large = empirical_eta(p, np.zeros(10), 1.0, samples=50)
    assert 0 < small < large
    assert small < 0.05
