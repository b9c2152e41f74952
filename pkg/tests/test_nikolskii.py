import math
from fractions import Fraction as F

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from normest.nikolskii import (
    INF,
    BandwidthPlan,
    ClassSpec,
    DomainError,
    InfeasibleError,
    InsufficientSampleError,
    Regime,
    SpecError,
    bandwidth,
    classify_regime,
    closed_form_inv_upsilon,
    default_ell,
    exponents,
    gamma_j,
    tau,
    variance_constant,
)


def spec1(beta, r, p=2, q=INF, L=1):
    return ClassSpec(beta=(beta,), r=(r,), L=(L,), p=p, q=q)


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("kw, msg", [
    (dict(beta=(1, 1), r=(1, INF), L=(1, 1), p=2), "mixed integrability"),
    (dict(beta=(1,), r=(INF,), L=(1,), p=1), "p must"),
    (dict(beta=(1,), r=(INF,), L=(1,), p=2.5), "p must"),
    (dict(beta=(1,), r=(INF,), L=(1,), p=2, q=2), "q must"),
    (dict(beta=(0,), r=(INF,), L=(1,), p=2), "beta_j"),
    (dict(beta=(1,), r=(0.5,), L=(1,), p=2), "r_j"),
    (dict(beta=(1,), r=(INF,), L=(-1,), p=2), "L_j"),
    (dict(beta=(1, 2), r=(INF,), L=(1,), p=2), "length"),
])
def test_invalid_specs(kw, msg):
    with pytest.raises(SpecError, match=msg):
        ClassSpec(**kw)


def test_boundary_q_admitted():
    assert ClassSpec(beta=(1,), r=(INF,), L=(1,), p=3, q=5).q == 5


def test_record_roundtrip_with_inf_token():
    rec = {"beta": [1, "1/2"], "r": ["inf", "3"], "L": [2, 1], "p": 2, "q": "inf"}
    s = ClassSpec.from_record(rec)
    assert s.r == (INF, 3.0) and s.beta[1] == F(1, 2)
    assert ClassSpec.from_record(s.to_record()) == s


def test_default_ell():
    assert default_ell(spec1(1, INF)) == 2
    assert default_ell(spec1(0.5, INF)) == 1
    assert default_ell(ClassSpec(beta=(2.5, 0.3), r=(INF, INF), L=(1, 1), p=2)) == 3


# ---------------------------------------------------------------------------
# tau, gamma, regimes
# ---------------------------------------------------------------------------

def test_tau_examples():
    assert tau(spec1(1, INF), 1) == 2
    assert tau(spec1(1, 1), INF) == 0
    assert tau(ClassSpec(beta=(1, 1), r=(2, 2), L=(1, 1), p=2), 2) == 1
    with pytest.raises(DomainError):
        tau(spec1(1, INF), 0.5)


@pytest.mark.parametrize("beta, r, q, regime, theta", [
    (1, INF, INF, Regime.TAU_P_GEQ_1, F(1, 2)),
    (F(1, 2), INF, INF, Regime.TAU_P_GEQ_1, F(1, 3)),
    (1, 1, INF, Regime.TAU_Q_NONNEG, F(1, 2)),
    (F(1, 4), 1, 3, Regime.TAU_Q_NEG, F(1, 9)),
])
def test_regime_examples(beta, r, q, regime, theta):
    plan = classify_regime(spec1(F(beta), r, q=q))
    assert plan.regime is regime
    assert plan.theta == theta
    assert plan.theta_star == min(theta, F(1, 2))


def test_phi_n():
    plan = classify_regime(spec1(1, INF))
    assert plan.phi_n(100) == pytest.approx(0.1, rel=1e-15)
    big = classify_regime(ClassSpec(beta=(0.01,), r=(INF,), L=(1e10,), p=2))
    assert math.isfinite(big.phi_n(10**6)) or big.phi_n(10**6) == math.inf


def test_gamma_examples():
    assert gamma_j(spec1(1, 2), 3, 0) == pytest.approx(5 / 6)
    assert gamma_j(spec1(1, INF), 3, 0) == 1
    with pytest.raises(InfeasibleError):
        gamma_j(spec1(F(1, 4), 1), 2, 0)


def test_gamma_two_axes():
    s = ClassSpec(beta=(2, 1), r=(1, 1), L=(1, 1), p=2, q=INF)
    t2, t1 = tau(s, 2), tau(s, 1)
    assert t2 > 0
    assert (gamma_j(s, 2, 0), gamma_j(s, 2, 1)) == (2 * t2 / t1, t2 / t1)


# ---------------------------------------------------------------------------
# exponents and bandwidth
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("r, kappa, pj, inv_ups", [(INF, 1, 1, 1), (2, 1, 2, F(1, 2)), (1, 1, 1, 1)])
def test_exponent_examples(r, kappa, pj, inv_ups):
    ex = exponents(spec1(F(1), r))
    assert ex.kappa == (kappa,) and ex.pj == (pj,) and ex.inv_upsilon == inv_ups


def test_variance_constant_examples():
    assert variance_constant(spec1(1, 2, L=2)) == pytest.approx(math.sqrt(2), rel=1e-14)
    assert variance_constant(spec1(1, 1, L=5)) == 1.0
    assert variance_constant(ClassSpec(beta=(3, 2), r=(2, 2), L=(1, 1), p=2, q=INF)) == 1.0


def test_bandwidth_example():
    plan = bandwidth(spec1(1, INF), 1000)
    assert plan.frakL == 1
    assert plan.h[0] == pytest.approx(plan.frakL / 1000, rel=1e-14)
    assert plan.N == pytest.approx(math.sqrt(1 / 1000), rel=1e-14)
    with pytest.raises(InsufficientSampleError):
        bandwidth(spec1(1, INF, p=3), 2)


def test_bandwidth_dict_roundtrip():
    plan = bandwidth(ClassSpec(beta=(1, 2), r=(3, INF), L=(2, 0.5), p=3, q=INF), 500)
    assert BandwidthPlan.from_dict(plan.to_dict()) == plan


def test_extreme_radii_no_overflow():
    s = ClassSpec(beta=(0.5, 0.5), r=(INF, INF), L=(1e150, 1e-150), p=2)
    plan = bandwidth(s, 10**4)
    assert plan.L_kappa == pytest.approx(1.0, rel=1e-9)
    assert all(h > 0 and math.isfinite(h) for h in plan.h)
    # L_j^(1/kappa_j) = 1e400 cannot be represented, nor can the bandwidth
    s = ClassSpec(beta=(0.05, 0.05), r=(INF, INF), L=(1e20, 1e-20), p=2)
    with pytest.raises(InfeasibleError, match="floating-point range"):
        bandwidth(s, 10**4)
    assert math.isfinite(classify_regime(s).phi_n(10**4))


# ---------------------------------------------------------------------------
# properties
# ---------------------------------------------------------------------------

fracs = st.fractions(min_value=F(1, 8), max_value=F(4), max_denominator=16)
r_vals = st.one_of(st.just(INF), st.integers(1, 8))


@st.composite
def specs(draw, exact=True):
    d = draw(st.integers(1, 3))
    p = draw(st.integers(2, 4))
    beta = draw(st.lists(fracs, min_size=d, max_size=d))
    side = draw(st.booleans())
    if side:
        r = draw(st.lists(st.one_of(st.just(INF), st.integers(p, 9)), min_size=d, max_size=d))
    else:
        r = draw(st.lists(st.integers(1, p), min_size=d, max_size=d))
    q = draw(st.one_of(st.just(INF), st.integers(2 * p - 1, 20)))
    L = draw(st.lists(st.floats(0.1, 10), min_size=d, max_size=d))
    return ClassSpec(beta=tuple(beta), r=tuple(r), L=tuple(L), p=p, q=q)


@given(specs())
def test_theta_star_in_range(s):
    plan = classify_regime(s)
    assert 0 < plan.theta_star <= F(1, 2)


@given(specs(), st.floats(0.01, 100))
def test_theta_independent_of_radius(s, c):
    s2 = ClassSpec(beta=s.beta, r=s.r, L=tuple(c * x for x in s.L), p=s.p, q=s.q)
    assert classify_regime(s).theta == classify_regime(s2).theta


@given(specs())
def test_inv_upsilon_closed_forms(s):
    try:
        ex = exponents(s)
    except InfeasibleError:
        return
    assert ex.inv_upsilon == closed_form_inv_upsilon(s)


@given(st.lists(fracs, min_size=1, max_size=3), st.integers(2, 4))
def test_branches_agree_at_r_equals_p(beta, p):
    d = len(beta)
    s = ClassSpec(beta=tuple(beta), r=(p,) * d, L=(1,) * d, p=p, q=INF)
    assume(tau(s, INF) > 0)
    ex = exponents(s)
    assert ex.kappa == tuple(beta)
    assert all(a == 2 for a in ex.pj)


@given(specs(), st.integers(10, 10**7))
def test_bandwidth_identities(s, n):
    try:
        plan = bandwidth(s, n)
    except InfeasibleError:
        return
    for L, k, a, h in zip(s.L, plan.kappa, plan.pj, plan.h):
        assert h > 0
        assert h == pytest.approx(L ** (-1 / k) * plan.N ** (2 / (k * a)), rel=1e-12)
    small = plan.N**2 <= 1 / n * (1 + 1e-12)
    crit = 2 * (1 - 1 / s.p) * plan.inv_upsilon <= 1
    if plan.frakL == 1:
        assert small == crit or abs(2 * (1 - 1 / s.p) * plan.inv_upsilon - 1) < 1e-12


@given(specs())
def test_N_decreases_with_n(s):
    try:
        a, b = bandwidth(s, 100), bandwidth(s, 10000)
    except InfeasibleError:
        return
    assert b.N < a.N
