import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from normest.kernel import ProductKernel, build_aggregated
from normest.oracle import (
    DENSITIES,
    QuadratureError,
    QuadratureSpec,
    bias_field,
    exact_norm,
    functionals,
    lemma1_check,
    lemma1_remainder,
    make_density,
    naive_ustat,
    quadrature_norm,
    smoothed,
)


def K1(base="box", ell=1, d=1):
    return ProductKernel(build_aggregated(base, ell), d)


@pytest.mark.parametrize("name", DENSITIES)
@pytest.mark.parametrize("d", [1, 2])
def test_density_integrates_to_one(name, d):
    f = make_density(name, d)
    # truncated densities are renormalised; the removed mass is only reported
    assert quadrature_norm(f, 1) == pytest.approx(1, abs=1e-10)
    for s in (2, 3, 5):
        assert quadrature_norm(f, s) == pytest.approx(f.known_norm(s), abs=1e-9)


def test_known_norms():
    assert exact_norm(make_density("uniform", 3), 4) == 1.0
    assert exact_norm(make_density("triangular"), 2) == pytest.approx(math.sqrt(2 / 3), rel=1e-15)
    assert exact_norm(make_density("raised_cosine"), 2) == pytest.approx(math.sqrt(1.5), rel=1e-15)
    with pytest.raises(ValueError):
        exact_norm(make_density("uniform"), 0.5)


def test_truncation_mass_reported():
    f = make_density("truncated_gaussian", 2, sigma=1.0, radius=3.0)
    assert 0 < f.truncation_mass < 0.01


@pytest.mark.parametrize("name", DENSITIES)
def test_sampler_matches_cdf(name):
    from scipy import stats
    f = make_density(name)
    x = f.sample(20000, np.random.default_rng(5))[:, 0]
    lo, hi = f.support[0]
    grid = np.linspace(lo, hi, 4001)
    pdf = f.pdf(grid[:, None])
    cdf = np.concatenate([[0], np.cumsum(0.5 * (pdf[1:] + pdf[:-1]) * np.diff(grid))])
    cdf /= cdf[-1]
    res = stats.kstest(x, lambda t: np.interp(t, grid, cdf))
    assert res.pvalue > 1e-3


def test_pdf_nonnegative():
    for name in DENSITIES:
        f = make_density(name, 2)
        x = np.random.default_rng(1).uniform(-6, 6, (2000, 2))
        assert np.all(f.pdf(x) >= 0)


def test_triangular_mean_clt():
    f = make_density("triangular")
    x = f.sample(10**6, np.random.default_rng(3))
    assert abs(x.mean()) <= 4 * math.sqrt(1 / 6) / 1000


def test_smoothed_examples():
    u = make_density("uniform")
    assert float(smoothed(u, K1("epanechnikov", 2), [0.05], np.array([[0.5]]))[0]) == pytest.approx(1, abs=1e-10)
    assert float(smoothed(u, K1(), [0.1], np.array([[1.5]]))[0]) == 0.0
    t = make_density("triangular")
    assert float(smoothed(t, K1(), [0.1], np.array([[0.0]]))[0]) == pytest.approx(0.95, abs=1e-12)
    assert float(bias_field(t, K1(), [0.1], np.array([[0.0]]))[0]) == pytest.approx(-0.05, abs=1e-12)
    assert float(bias_field(u, K1(), [0.1], np.array([[0.4]]))[0]) == pytest.approx(0, abs=1e-12)


def test_bias_vanishes_as_h_shrinks():
    f = make_density("raised_cosine")
    b = [abs(float(bias_field(f, K1("epanechnikov", 2), [h], np.array([[0.3]]))[0])) for h in (0.2, 0.1, 0.05, 0.025)]
    assert all(x > y for x, y in zip(b, b[1:]))


@pytest.mark.parametrize("name", DENSITIES)
@pytest.mark.parametrize("p", [2, 3, 4])
def test_lemma1_identity(name, p):
    for ell in (1, 3):
        _, _, res = lemma1_check(make_density(name), K1("epanechnikov", ell), [0.2], p)
        assert res <= 1e-8


def test_lemma1_p2_remainder_is_squared_bias():
    f, K, h = make_density("triangular"), K1("epanechnikov", 2), [0.15]
    x = np.linspace(-1.5, 1.5, 30001)[:, None]
    b2 = np.trapezoid(bias_field(f, K, h, x) ** 2, x[:, 0])
    assert lemma1_remainder(f, K, h, 2) == pytest.approx(b2, rel=1e-5)


def test_p2_cross_inner_products():
    f, K, h = make_density("raised_cosine"), K1("epanechnikov", 1), [0.1]
    t1, t2 = functionals(f, K, h, 2)
    x = np.linspace(-0.2, 1.2, 40001)[:, None]
    S = smoothed(f, K, h, x)
    assert t1 == pytest.approx(np.trapezoid(S * S, x[:, 0]), rel=1e-6)
    assert t2 == pytest.approx(np.trapezoid(S * f.pdf(x), x[:, 0]), rel=1e-6)


def test_nonnegative_functionals_for_positive_kernel():
    for name in DENSITIES:
        t1, t2 = functionals(make_density(name), K1("box", 1), [0.3], 3)
        assert t1 >= 0 and t2 >= 0


def test_uniform_functionals_tend_to_one():
    u = make_density("uniform")
    vals = [functionals(u, K1(), [h], 2) for h in (0.1, 0.01, 0.001)]
    assert abs(vals[-1][0] - 1) < 1e-3 and abs(vals[-1][1] - 1) < 1e-3


def test_refinement_failure_raises():
    f = make_density("raised_cosine")
    with pytest.raises(QuadratureError):
        smoothed(f, K1(), [0.3], np.array([[0.3]]), QuadratureSpec(order=2, panels_per_axis=1, abs_tol=1e-14))


def test_naive_small_examples():
    K, h = K1(), 0.2
    t1, t2 = naive_ustat(np.array([[0.0], [h / 2]]), K, [h], 2)
    assert t1 == pytest.approx(3 / (8 * h), rel=1e-14)
    assert t2 == pytest.approx(1 / (2 * h), rel=1e-14)
    assert naive_ustat(np.array([[0.0], [1.0], [2.0]]), K, [h], 2) == (0.0, 0.0)
    with pytest.raises(ValueError):
        naive_ustat(np.zeros((2, 1)), K, [h], 3)


@given(st.integers(0, 2**31), st.sampled_from([2, 3]))
def test_naive_permutation_invariant(seed, p):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 1, (12, 2))
    K = K1("epanechnikov", 2, d=2)
    a = naive_ustat(X, K, [0.3, 0.4], p)
    b = naive_ustat(X[rng.permutation(12)], K, [0.3, 0.4], p)
    assert a == pytest.approx(b, rel=1e-13, abs=1e-14)
