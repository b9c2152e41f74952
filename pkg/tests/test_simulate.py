import math

import numpy as np
import pytest

from normest.estimator import KernelConfig
from normest.nikolskii import INF, ClassSpec
from normest.oracle import make_density
from normest.simulate import (
    ExperimentConfig,
    fit_slope,
    mann_kendall_upward,
    replicate_rng,
    risk_reduction_violations,
    run_bias_experiment,
    run_fixed_replicates,
    run_risk_experiment,
    run_variance_experiment,
    sample,
)

SPEC = ClassSpec(beta=(1,), r=(INF,), L=(1,), p=2)


def test_config_validation():
    with pytest.raises(ValueError, match="increasing"):
        ExperimentConfig("uniform", SPEC, (100, 50), 10)
    with pytest.raises(ValueError, match="two replicates"):
        ExperimentConfig("uniform", SPEC, (100,), 1)
    with pytest.raises(ValueError, match=">= p"):
        ExperimentConfig("uniform", SPEC, (1, 10), 5)
    with pytest.raises(ValueError, match="needs h"):
        ExperimentConfig("uniform", SPEC, (10,), 5, bandwidth_mode="fixed")


def test_replicate_streams_are_distinct_and_reproducible():
    a = replicate_rng(5, 100, 0).random(4)
    assert np.array_equal(a, replicate_rng(5, 100, 0).random(4))
    assert not np.array_equal(a, replicate_rng(5, 100, 1).random(4))
    assert not np.array_equal(a, replicate_rng(5, 200, 0).random(4))
    assert not np.array_equal(a, replicate_rng(6, 100, 0).random(4))


def test_sample_reproducible_and_uniform_identity():
    f = make_density("uniform")
    s1, s2 = sample(f, 50, 3), sample(f, 50, 3)
    assert np.array_equal(s1.data, s2.data)
    u = replicate_rng(3, 50, 0).random((50, 1))
    assert np.array_equal(s1.data, u)


def test_fit_slope_exact_power_law():
    n = np.array([100, 200, 400, 800])
    slope, (lo, hi) = fit_slope(n, 3.0 * n**-0.5)
    assert slope == pytest.approx(-0.5, abs=1e-12)
    assert lo == pytest.approx(-0.5, abs=1e-9) and hi == pytest.approx(-0.5, abs=1e-9)


def test_mann_kendall():
    assert mann_kendall_upward([1, 2, 3, 4, 5, 6]) < 0.01
    assert mann_kendall_upward([6, 5, 4, 3, 2, 1]) > 0.99


def test_risk_reduction_counter():
    # T = 1.21 -> N = 1.1 with norm 1: (0.1)^2 <= min(0.21, 0.0441)
    assert risk_reduction_violations([1.21], [1.1], 1.0, 2) == 0
    assert risk_reduction_violations([1.21], [1.5], 1.0, 2) == 1


def test_risk_experiment_table_and_determinism():
    cfg = ExperimentConfig("uniform", ClassSpec(beta=(0.5,), r=(INF,), L=(1,), p=2), (64, 128, 256), 40, seed=2)
    a = run_risk_experiment(cfg, workers=1)
    b = run_risk_experiment(cfg, workers=2)
    assert [r.n for r in a.rows] == [64, 128, 256]
    assert a.rows == b.rows and a.fitted_slope == b.fitted_slope and a.slope_ci == b.slope_ci
    assert all(g <= 5 for g in a.decomposition_gaps())
    assert a.risk_reduction_violations() == 0
    head, *body = list(a.to_csv_rows())
    assert head[0] == "n" and len(body) == 3


def test_risk_stabilises_with_more_replicates():
    spec = ClassSpec(beta=(0.5,), r=(INF,), L=(1,), p=2)
    f = make_density("uniform")
    r1 = run_fixed_replicates(f, spec, 128, 500, seed=4)
    r2 = run_fixed_replicates(f, spec, 128, 1000, seed=4)
    e1, e2 = (r1[:, 3] - 1) ** 2, (r2[:, 3] - 1) ** 2
    se = math.sqrt(e1.var(ddof=1) / e1.size + e2.var(ddof=1) / e2.size)
    assert abs(math.sqrt(e1.mean()) - math.sqrt(e2.mean())) <= 2 * se / (2 * math.sqrt(e2.mean()))


def test_bias_p2_equals_squared_bias_norm_and_decreases():
    f = make_density("raised_cosine")
    spec = ClassSpec(beta=(2,), r=(INF,), L=(1,), p=2)
    tab = run_bias_experiment(f, spec, [0.2, 0.1, 0.05, 0.025], KernelConfig("epanechnikov", 1), check_slope=False)
    assert all(b < 0 for b in tab.bias)  # -||B_h||_2^2
    mags = [abs(b) for b in tab.bias]
    assert all(x > y for x, y in zip(mags, mags[1:]))


def test_bias_slope_smooth_density():
    # raised cosine is periodic-smooth; ell = 2 kernel gives |bias| ~ h^4 for p = 2
    f = make_density("raised_cosine")
    spec = ClassSpec(beta=(2,), r=(INF,), L=(1,), p=2)
    tab = run_bias_experiment(f, spec, [0.2, 0.1, 0.05, 0.025], KernelConfig("epanechnikov", 2))
    assert tab.slope_ok, (tab.fitted_slope, tab.threshold)


def test_uniform_boundary_layer_bias_is_order_h():
    f = make_density("uniform")
    tab = run_bias_experiment(f, SPEC, [0.04, 0.02, 0.01, 0.005], KernelConfig("epanechnikov", 1), check_slope=False)
    assert tab.fitted_slope == pytest.approx(1.0, abs=0.05)


def test_variance_slope_constant_free():
    f = make_density("triangular")
    spec = ClassSpec(beta=(0.5,), r=(INF,), L=(1,), p=2)
    a = run_variance_experiment(f, spec, 0.5, (100, 200, 400), 150, seed=1, kernel=KernelConfig("box", 1))
    b = run_variance_experiment(f, spec, 0.5, (100, 200, 400), 150, seed=1, kernel=KernelConfig("epanechnikov", 1))
    # same seeds for both kernels, so the comparison is not swamped by MC noise
    assert -1.5 < a.fitted_slope < -0.5 and -1.5 < b.fitted_slope < -0.5
    assert a.slope_ci[0] <= b.fitted_slope <= a.slope_ci[1] or b.slope_ci[0] <= a.fitted_slope <= b.slope_ci[1]
