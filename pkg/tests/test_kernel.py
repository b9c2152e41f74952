from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from normest.kernel import (
    BOX,
    EPANECHNIKOV,
    PiecewisePoly1D,
    ProductKernel,
    build_aggregated,
    eval_scaled,
    factor_product_integral,
    get_base,
    moment,
    product_integral_batch,
    self_convolution,
)

bases = st.sampled_from(["box", "epanechnikov"])
ells = st.integers(1, 5)


@pytest.mark.parametrize("base", ["box", "epanechnikov"])
@pytest.mark.parametrize("ell", range(1, 6))
def test_aggregated_moments_exact(base, ell):
    K = build_aggregated(base, ell)
    assert moment(K, 0, exact=True) == 1
    for k in range(1, ell):
        assert moment(K, k, exact=True) == 0
    assert K.poly.support == (-float(ell), float(ell))
    assert K.poly.is_symmetric()


def test_ell_one_is_base():
    assert build_aggregated("box", 1).poly.coefficients == BOX.poly.coefficients
    assert build_aggregated(EPANECHNIKOV, 1).poly.coefficients == EPANECHNIKOV.poly.coefficients


def test_box_aggregated_values():
    K = build_aggregated("box", 2)
    # 2 K(y) - K(y/2) / 2 for the box base
    assert float(K(np.array(0.0))) == 0.75
    assert float(K(np.array(1.5))) == -0.25
    assert float(K(np.array(2.5))) == 0.0
    assert K.poly.value_exact(F(1, 2)) == F(3, 4)
    assert float(build_aggregated("epanechnikov", 2)(np.array(0.0))) == 1.125


def test_breakpoint_convention_symmetric():
    for ell in range(1, 6):
        K = build_aggregated("box", ell)
        y = np.array([float(b) for b in K.poly.breakpoints])
        np.testing.assert_array_equal(K(y), K(-y))
    assert float(BOX.poly(np.array(1.0))) == 0.5
    assert float(BOX.poly(np.array(-1.0))) == 0.5


def test_invalid_inputs():
    with pytest.raises(ValueError):
        build_aggregated("box", 0)
    with pytest.raises(ValueError, match="unknown base"):
        get_base("gauss")
    with pytest.raises(ValueError):
        PiecewisePoly1D([0, 0], [[1]])


def test_sup_norm():
    assert BOX.poly.sup_norm() == 0.5
    assert EPANECHNIKOV.poly.sup_norm() == 0.75
    K = build_aggregated("epanechnikov", 2)
    assert K.sup_norm == pytest.approx(float(K(np.array(0.0))))


def test_eval_scaled_and_product():
    K = ProductKernel(build_aggregated("box", 1), 2)
    assert eval_scaled(K, [0.5, 0.25], np.zeros(2)) == pytest.approx(0.25 / 0.125)
    with pytest.raises(ValueError):
        eval_scaled(K, [0.0, 1.0], np.zeros(2))


def test_factor_product_integral_against_scipy():
    K = build_aggregated("epanechnikov", 3)
    x, h = np.array([0.0, 0.4, -0.7]), 0.5
    f = lambda y: float(np.prod(K((y - x) / h) / h))
    bps = sorted({float(xi + h * b) for xi in x for b in K.poly.breakpoints})
    ref = sum(integrate.quad(f, a, b, epsabs=1e-14, epsrel=1e-14)[0] for a, b in zip(bps, bps[1:]))
    assert factor_product_integral(K, x, h) == pytest.approx(ref, rel=1e-12)


def test_box_pair_integral():
    K = build_aggregated("box", 1)
    assert factor_product_integral(K, [0.0, 0.1], 0.2) == pytest.approx(0.75 / 0.2 / 2)


@given(bases, ells, st.lists(st.floats(-3, 3), min_size=2, max_size=4))
def test_batch_matches_scalar(base, ell, offs):
    K = build_aggregated(base, ell)
    delta = np.array(offs) - offs[0]
    got = product_integral_batch(K, delta[None, :])[0]
    ref = factor_product_integral(K, delta, 1.0)
    assert got == pytest.approx(ref, rel=1e-10, abs=1e-12)


@given(bases, ells, st.floats(-12, 12))
def test_self_convolution_matches_quadrature(base, ell, d):
    K = build_aggregated(base, ell)
    got = float(K.pair_integral(np.array(d)))
    ref = product_integral_batch(K, np.array([[0.0, d]]))[0]
    assert got == pytest.approx(ref, rel=1e-11, abs=1e-13)


@pytest.mark.parametrize("ell", [1, 2, 3])
def test_self_convolution_is_density_like(ell):
    g = self_convolution(build_aggregated("epanechnikov", ell).poly)
    assert g.integral() == 1  # (int K)^2
    assert g.is_symmetric()
    assert g.support == (-2.0 * ell, 2.0 * ell)
