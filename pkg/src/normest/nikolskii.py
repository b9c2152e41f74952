"""Class parameters and closed-form rate / bandwidth arithmetic.

A problem instance is an anisotropic Nikolskii ball intersected with an
L_q ball.  Everything here is a pure function of the class parameters and,
for the bandwidth, the sample size.

Infinite indices (``r_j`` and ``q``) are stored as ``math.inf`` and every
reciprocal goes through :func:`_inv`, which maps infinity to an exact integer
zero.  Passing :class:`fractions.Fraction` parameters therefore keeps the
regime/exponent arithmetic exact.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Real
from typing import Any, Sequence

__all__ = [
    "SpecError",
    "DomainError",
    "InfeasibleError",
    "InsufficientSampleError",
    "ClassSpec",
    "Regime",
    "RatePlan",
    "Exponents",
    "BandwidthPlan",
    "tau",
    "classify_regime",
    "gamma_j",
    "exponents",
    "variance_constant",
    "bandwidth",
    "closed_form_inv_upsilon",
    "default_ell",
]

INF = math.inf


class SpecError(ValueError):
    """Invalid class parameters."""


class DomainError(ValueError):
    """Argument outside the domain of a rate function."""


class InfeasibleError(ValueError):
    """A derived quantity is undefined for this class (non-positive tau)."""


class InsufficientSampleError(ValueError):
    """Fewer observations than the order of the U-statistic."""


def _inv(x):
    if x == INF:
        return 0
    return Fraction(1) / x if isinstance(x, (int, Fraction)) else 1 / x


def _coerce(x):
    """Map config tokens to numbers; keeps ints/Fractions untouched."""
    if isinstance(x, str):
        tok = x.strip().lower()
        if tok in ("inf", "+inf", "infinity", "oo"):
            return INF
        try:
            if "/" in tok:
                return Fraction(tok)
            val = float(tok)
            return int(val) if val.is_integer() and abs(val) < 2**53 else val
        except ValueError as exc:
            raise SpecError(f"cannot parse numeric value {x!r}") from exc
    if isinstance(x, bool) or not isinstance(x, Real):
        raise SpecError(f"expected a number, got {x!r}")
    return x


def _fmt(x):
    if x == INF:
        return "inf"
    if isinstance(x, Fraction):
        return str(x) if x.denominator != 1 else int(x)
    return x


@dataclass(frozen=True)
class ClassSpec:
    """Parameters of the class N_{r,d}(beta, L) ∩ B_q(Q) and the norm index p."""

    beta: tuple
    r: tuple
    L: tuple
    p: int
    q: Any = INF
    Q: Any = 1.0
    d: int = field(default=0)

    def __post_init__(self):
        beta = tuple(_coerce(b) for b in _as_seq(self.beta))
        r = tuple(_coerce(x) for x in _as_seq(self.r))
        L = tuple(_coerce(x) for x in _as_seq(self.L))
        d = self.d or len(beta)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "q", _coerce(self.q))
        object.__setattr__(self, "Q", _coerce(self.Q))
        object.__setattr__(self, "d", d)
        p = _coerce(self.p)
        if p == INF or p != int(p):
            raise SpecError(f"p must be an integer >= 2, got {self.p!r}")
        object.__setattr__(self, "p", int(p))
        self._validate()

    def _validate(self):
        d, p = self.d, self.p
        if not (isinstance(d, int) and d >= 1):
            raise SpecError(f"d must be a positive integer, got {d!r}")
        for name in ("beta", "r", "L"):
            if len(getattr(self, name)) != d:
                raise SpecError(f"{name} must have length d={d}")
        if p < 2:
            raise SpecError(f"p must be an integer >= 2, got {p}")
        if any(not (0 < b < INF) for b in self.beta):
            raise SpecError("beta_j must be positive and finite")
        if any(not (0 < x < INF) for x in self.L):
            raise SpecError("L_j must be positive and finite")
        if not (0 < self.Q < INF):
            raise SpecError("Q must be positive and finite")
        if any(not (x >= 1) for x in self.r):
            raise SpecError("r_j must lie in [1, inf]")
        if not (self.q >= 2 * p - 1):
            raise SpecError(f"q must satisfy q >= 2p-1 = {2 * p - 1}, got {self.q}")
        if not (all(x <= p for x in self.r) or all(x >= p for x in self.r)):
            raise SpecError("mixed integrability vector unsupported")

    # derived class quantities -------------------------------------------------
    @property
    def inv_beta(self):
        return sum(_inv(b) for b in self.beta)

    @property
    def inv_omega(self):
        return sum(_inv(b) * _inv(x) for b, x in zip(self.beta, self.r))

    @property
    def r_geq_p(self) -> bool:
        return all(x >= self.p for x in self.r)

    # serialization -------------------------------------------------------------
    def to_record(self) -> dict:
        return {
            "d": self.d,
            "beta": [_fmt(b) for b in self.beta],
            "r": [_fmt(x) for x in self.r],
            "L": [_fmt(x) for x in self.L],
            "p": self.p,
            "q": _fmt(self.q),
            "Q": _fmt(self.Q),
        }

    @classmethod
    def from_record(cls, rec: dict) -> "ClassSpec":
        missing = [k for k in ("beta", "r", "p") if k not in rec]
        if missing:
            raise SpecError(f"missing spec keys: {', '.join(missing)}")
        beta = _as_seq(rec["beta"])
        d = int(rec.get("d", len(beta)))
        L = rec.get("L", [1.0] * d)
        return cls(beta=beta, r=_as_seq(rec["r"]), L=_as_seq(L), p=rec["p"],
                   q=rec.get("q", INF), Q=rec.get("Q", 1.0), d=d)


def _as_seq(x) -> Sequence:
    if isinstance(x, (list, tuple)):
        return x
    if isinstance(x, str) and "," in x:
        return [t for t in x.split(",") if t.strip()]
    return [x]


def default_ell(spec: ClassSpec) -> int:
    """Smallest integer strictly larger than max_j beta_j."""
    return math.floor(max(spec.beta)) + 1


# ---------------------------------------------------------------------------
# rate calculus
# ---------------------------------------------------------------------------

def tau(spec: ClassSpec, s):
    """tau(s) = 1 - 1/omega + 1/(beta s), with 1/(beta * inf) = 0."""
    if not s >= 1:
        raise DomainError(f"tau(s) requires s in [1, inf], got {s}")
    return 1 - spec.inv_omega + spec.inv_beta * _inv(s)


class Regime(str, enum.Enum):
    TAU_P_GEQ_1 = "TauPGeq1"
    TAU_Q_NEG = "TauQNeg"
    TAU_Q_NONNEG = "TauQNonneg"


@dataclass(frozen=True)
class RatePlan:
    inv_beta: Any
    inv_omega: Any
    L_beta: float
    regime: Regime
    theta: Any
    theta_star: Any
    tau1: Any
    p: int
    log_L_beta: float = 0.0

    def phi_n(self, n):
        """Minimax rate L_beta^{(1-1/p)/tau(1)} n^{-theta*}."""
        expo = (1 - 1 / self.p) / float(self.tau1)
        return math.exp(expo * self.log_L_beta) * float(n) ** -float(self.theta_star)

    def to_dict(self) -> dict:
        return {
            "regime": self.regime.value,
            "theta": float(self.theta),
            "theta_star": float(self.theta_star),
            "inv_beta": float(self.inv_beta),
            "inv_omega": float(self.inv_omega),
            "L_beta": self.L_beta,
        }


def classify_regime(spec: ClassSpec) -> RatePlan:
    p, q = spec.p, spec.q
    tp, tq, t1 = tau(spec, p), tau(spec, q), tau(spec, 1)
    if tp >= 1:
        regime, theta = Regime.TAU_P_GEQ_1, 1 / t1
    elif tq < 0:
        regime = Regime.TAU_Q_NEG
        theta = (Fraction(1, p) - _inv(q)) / (1 - _inv(q) - (1 - Fraction(1, p)) * tq)
    else:
        regime, theta = Regime.TAU_Q_NONNEG, tp / t1
    half = Fraction(1, 2)
    theta_star = theta if theta < half else half
    if not isinstance(theta, Fraction):
        theta_star = float(theta_star)
    log_lb = sum(math.log(L) / b for L, b in zip(spec.L, spec.beta))
    return RatePlan(
        inv_beta=spec.inv_beta,
        inv_omega=spec.inv_omega,
        L_beta=_exp(log_lb),
        regime=regime,
        theta=theta,
        theta_star=theta_star,
        tau1=t1,
        p=p,
        log_L_beta=log_lb,
    )


def gamma_j(spec: ClassSpec, s, j: int):
    """Embedding smoothness gamma_j(s) of axis j at index s > 1."""
    if not s > 1:
        raise DomainError(f"gamma_j requires s > 1, got {s}")
    s_star = max(s, max(spec.r))
    if tau(spec, s_star) <= 0:
        raise InfeasibleError(f"tau(s*) <= 0 at s* = {s_star}; gamma_j({s}) undefined")
    b, rj = spec.beta[j], spec.r[j]
    if rj < s:
        return b * tau(spec, s) / tau(spec, rj)
    return b


@dataclass(frozen=True)
class Exponents:
    kappa: tuple
    pj: tuple
    inv_upsilon: Any


def exponents(spec: ClassSpec) -> Exponents:
    """Per-axis bias exponents kappa_j, p_j and 1/upsilon = sum 1/(p_j kappa_j)."""
    p, q = spec.p, spec.q
    tq_pos = tau(spec, q) > 0
    tp = tau(spec, p)
    inv_p, inv_q = Fraction(1, p), _inv(q)
    kappa, pj = [], []
    for b, rj in zip(spec.beta, spec.r):
        if rj <= p and tq_pos:
            trj = tau(spec, rj)
            if trj <= 0:
                raise InfeasibleError(f"tau(r_j) = {trj} <= 0")
            kappa.append(b * tp / trj)
        else:
            kappa.append(b)
        if rj >= p:
            pj.append(2 * (1 - inv_p) / (1 - _inv(rj)))
        elif tq_pos:
            pj.append(2)
        else:
            pj.append(2 * (inv_p - inv_q) / (_inv(rj) - inv_q))
    inv_ups = sum(1 / (a * k) for a, k in zip(pj, kappa))
    return Exponents(tuple(kappa), tuple(pj), inv_ups)


def closed_form_inv_upsilon(spec: ClassSpec):
    """1/upsilon via the regime-specific closed forms (cross-check of exponents)."""
    p, q = spec.p, spec.q
    if spec.r_geq_p:
        return p * (spec.inv_beta - spec.inv_omega) / (2 * (p - 1))
    if tau(spec, q) > 0:
        return spec.inv_beta / (2 * tau(spec, p))
    # pq/(2(q-p)) written as p/(2(1-p/q)) so that q = inf is exact
    inv_q = _inv(q)
    return Fraction(p) / (2 * (1 - p * inv_q)) * (spec.inv_omega - spec.inv_beta * inv_q)


def _log_L_gamma(spec: ClassSpec, s) -> float:
    return sum(math.log(L) / float(gamma_j(spec, s, j)) for j, L in enumerate(spec.L))


def _exp(x: float) -> float:
    return math.exp(x) if x < 709.0 else math.inf


def variance_constant(spec: ClassSpec) -> float:
    """The constant multiplying the variance bound over the class."""
    return _exp(log_variance_constant(spec))


def log_variance_constant(spec: ClassSpec) -> float:
    p = spec.p
    if tau(spec, spec.q) <= 0:
        return 0.0
    tp = tau(spec, p)
    best = -INF
    for k in range(1, p + 1):
        s = 2 * p - k
        expo = (1 - Fraction(k, p)) * tau(spec, s) / tp
        # k = p contributes L^0 = 1 whatever gamma(p) is
        val = 0.0 if expo == 0 else float(expo) * _log_L_gamma(spec, s)
        best = max(best, val)
    return best


@dataclass(frozen=True)
class BandwidthPlan:
    kappa: tuple
    pj: tuple
    inv_upsilon: float
    L_kappa: float
    calL: float
    frakL: float
    N: float
    h: tuple
    n: int

    @property
    def upsilon(self) -> float:
        return 1.0 / self.inv_upsilon

    def to_dict(self) -> dict:
        return {
            "kappa": list(self.kappa),
            "pj": list(self.pj),
            "inv_upsilon": self.inv_upsilon,
            "upsilon": self.upsilon,
            "L_kappa": self.L_kappa,
            "calL": self.calL,
            "frakL": self.frakL,
            "N": self.N,
            "h": list(self.h),
            "n": self.n,
        }

    @classmethod
    def from_dict(cls, rec: dict) -> "BandwidthPlan":
        return cls(
            kappa=tuple(float(x) for x in rec["kappa"]),
            pj=tuple(float(x) for x in rec["pj"]),
            inv_upsilon=float(rec["inv_upsilon"]),
            L_kappa=float(rec["L_kappa"]),
            calL=float(rec["calL"]),
            frakL=float(rec["frakL"]),
            N=float(rec["N"]),
            h=tuple(float(x) for x in rec["h"]),
            n=int(rec["n"]),
        )


def bandwidth(spec: ClassSpec, n: int) -> BandwidthPlan:
    """Rate-optimal bandwidth for sample size n (log-domain arithmetic)."""
    p = spec.p
    if n < p:
        raise InsufficientSampleError(f"need n >= p = {p}, got n = {n}")
    ex = exponents(spec)
    kappa = [float(k) for k in ex.kappa]
    pj = [float(a) for a in ex.pj]
    inv_ups = float(ex.inv_upsilon)
    log_L = [math.log(L) for L in spec.L]
    log_Lk = sum(lL / k for lL, k in zip(log_L, kappa))
    log_calL = log_variance_constant(spec)
    log_frakL = log_calL / p + (1 - 1 / p) * log_Lk
    log_N = (log_frakL - math.log(n)) / (1 + 2 * (1 - 1 / p) * inv_ups)
    log_h = [-lL / k + 2 / (k * a) * log_N for lL, k, a in zip(log_L, kappa, pj)]
    if not all(-700.0 < x < 700.0 for x in log_h):
        raise InfeasibleError("bandwidth outside floating-point range; radii L_j are too extreme")
    h = tuple(math.exp(x) for x in log_h)
    return BandwidthPlan(
        kappa=tuple(kappa),
        pj=tuple(pj),
        inv_upsilon=inv_ups,
        L_kappa=_exp(log_Lk),
        calL=_exp(log_calL),
        frakL=_exp(log_frakL),
        N=math.exp(log_N),
        h=h,
        n=int(n),
    )
