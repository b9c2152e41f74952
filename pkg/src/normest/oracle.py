"""Ground-truth quadrature for smoothed densities and U-statistic functionals.

Test densities are tensor products of one-dimensional factors with known
breakpoints.  Since the product kernel factorises too, S_h(x) is the product
of one-dimensional convolutions; the outer integrals (T1, T2, identity
remainders) are then taken on a full tensor Gauss-Legendre grid whose panels
are split at every kink of S_h and f.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import special

from .kernel import AggregatedKernel, ProductKernel, eval_scaled, factor_product_integral

__all__ = [
    "QuadratureError",
    "Density1D",
    "TestDensity",
    "QuadratureSpec",
    "make_density",
    "smoothed",
    "bias_field",
    "functional_T1",
    "functional_T2",
    "functionals",
    "lemma1_check",
    "lemma1_remainder",
    "exact_norm",
    "quadrature_norm",
    "naive_ustat",
    "DENSITIES",
]


class QuadratureError(RuntimeError):
    """Panel refinement did not reach the requested tolerance."""


@dataclass(frozen=True)
class Density1D:
    name: str
    pdf: Callable[[np.ndarray], np.ndarray]
    breakpoints: tuple  # sorted; first/last are the support ends
    ppf: Callable[[np.ndarray], np.ndarray]
    power_integral: Callable[[float], float]  # s -> int f^s
    mean: float
    var: float

    @property
    def support(self):
        return self.breakpoints[0], self.breakpoints[-1]


def _uniform():
    return Density1D(
        "uniform",
        lambda x: np.where((x >= 0) & (x <= 1), 1.0, 0.0),
        (0.0, 1.0),
        lambda u: np.asarray(u, dtype=float),
        lambda s: 1.0,
        0.5,
        1 / 12,
    )


def _triangular():
    def ppf(u):
        u = np.asarray(u, dtype=float)
        return np.where(u < 0.5, -1 + np.sqrt(2 * u), 1 - np.sqrt(2 * (1 - u)))

    return Density1D(
        "triangular",
        lambda x: np.clip(1 - np.abs(x), 0.0, None),
        (-1.0, 0.0, 1.0),
        ppf,
        lambda s: 2 / (s + 1),
        0.0,
        1 / 6,
    )


def _raised_cosine():
    def cdf(x):
        return x - np.sin(2 * np.pi * x) / (2 * np.pi)

    def ppf(u):
        # F is strictly increasing on [0, 1]; bisection to full precision
        u = np.asarray(u, dtype=float)
        lo, hi = np.zeros_like(u), np.ones_like(u)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            below = cdf(mid) < u
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)

    def power_integral(s):
        # 1 - cos(2 pi x) = 2 sin^2(pi x)
        return math.exp(s * math.log(2) + special.gammaln(s + 0.5) - special.gammaln(s + 1)) / math.sqrt(math.pi)

    return Density1D(
        "raised_cosine",
        lambda x: np.where((x >= 0) & (x <= 1), 1 - np.cos(2 * np.pi * x), 0.0),
        (0.0, 1.0),
        ppf,
        power_integral,
        0.5,
        1 / 12 - 1 / (2 * np.pi**2),
    )


def _truncated_gaussian(sigma: float = 1.0, radius: float = 5.0):
    mass = math.erf(radius / math.sqrt(2))
    lo_cdf = special.ndtr(-radius)

    def pdf(x):
        x = np.asarray(x, dtype=float)
        val = np.exp(-0.5 * (x / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi) * mass)
        return np.where(np.abs(x) <= radius * sigma, val, 0.0)

    def ppf(u):
        return sigma * special.ndtri(lo_cdf + np.asarray(u, dtype=float) * mass)

    def power_integral(s):
        c = (sigma * mass) ** (-s) * (2 * math.pi) ** (-s / 2)
        return c * sigma * math.sqrt(2 * math.pi / s) * math.erf(radius * math.sqrt(s / 2))

    var = sigma**2 * (1 - 2 * radius * math.exp(-radius**2 / 2) / (math.sqrt(2 * math.pi) * mass))
    d = Density1D(
        "truncated_gaussian", pdf, (-radius * sigma, radius * sigma), ppf, power_integral, 0.0, var
    )
    return d, 1 - mass


@dataclass(frozen=True)
class TestDensity:
    """Tensor-product density on R^d with exact norms and an exact sampler."""

    __test__ = False  # not a pytest class

    name: str
    factors: tuple
    truncation_mass: float = 0.0
    params: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return len(self.factors)

    @property
    def support(self):
        return [f.support for f in self.factors]

    def pdf(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.ones(x.shape[:-1])
        for j, f in enumerate(self.factors):
            out = out * f.pdf(x[..., j])
        return out

    def known_norm(self, s) -> float:
        """||f||_s, exact."""
        if s == math.inf:
            raise ValueError("sup-norm not provided")
        return math.prod(f.power_integral(s) for f in self.factors) ** (1 / s)

    def __reduce__(self):
        # factors hold closures; rebuild from the catalog in worker processes
        return (_rebuild_density, (self.name, self.dim, tuple(sorted(self.params.items()))))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        u = rng.random((n, self.dim))
        return np.column_stack([f.ppf(u[:, j]) for j, f in enumerate(self.factors)])


DENSITIES = ("uniform", "triangular", "raised_cosine", "truncated_gaussian")


def make_density(name: str, d: int = 1, **params) -> TestDensity:
    """Catalog lookup: uniform, triangular, raised_cosine, truncated_gaussian."""
    key = name.lower().replace("-", "_")
    trunc = 0.0
    if key == "uniform":
        f = _uniform()
    elif key == "triangular":
        f = _triangular()
    elif key in ("raised_cosine", "cosine"):
        f = _raised_cosine()
    elif key in ("truncated_gaussian", "gaussian"):
        f, m = _truncated_gaussian(float(params.get("sigma", 1.0)), float(params.get("radius", 5.0)))
        trunc = 1 - (1 - m) ** d
    else:
        raise ValueError(f"unknown density {name!r}; choose from {DENSITIES}")
    return TestDensity(f.name, tuple([f] * d), trunc, dict(params))


def _rebuild_density(name: str, d: int, params: tuple) -> TestDensity:
    return make_density(name, d, **dict(params))


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureSpec:
    order: int = 16
    panels_per_axis: int = 2
    abs_tol: float = 1e-9
    refine: bool = True


@lru_cache(maxsize=None)
def _gl(order: int):
    return np.polynomial.legendre.leggauss(order)


def _panel_nodes(cuts: np.ndarray, panels: int, order: int):
    """Nodes/weights on [cuts[0], cuts[-1]], `panels` GL panels per interval."""
    cuts = np.unique(cuts)
    edges = np.concatenate(
        [np.linspace(a, b, panels + 1)[:-1] for a, b in zip(cuts[:-1], cuts[1:])] + [cuts[-1:]]
    )
    xi, wi = _gl(order)
    mid, half = 0.5 * (edges[1:] + edges[:-1]), 0.5 * (edges[1:] - edges[:-1])
    return (mid[:, None] + half[:, None] * xi).ravel(), (half[:, None] * wi).ravel()


def _smoothed_axis(f: Density1D, kern: AggregatedKernel, h: float, x: np.ndarray,
                   panels: int, order: int) -> np.ndarray:
    """int K_ell(t) f(x - h t) dt for each x (the 1-D factor of S_h)."""
    x = np.asarray(x, dtype=float).ravel()
    kb = kern.poly._bp
    lo, hi = kb[0], kb[-1]
    fb = np.asarray(f.breakpoints)
    tcuts = np.clip((x[:, None] - fb[None, :]) / h, lo, hi)
    cuts = np.sort(np.concatenate([np.broadcast_to(kb, (x.size, kb.size)), tcuts], axis=1), axis=1)
    fr = np.linspace(0.0, 1.0, panels + 1)
    a, b = cuts[:, :-1], cuts[:, 1:]
    edges = a[:, :, None] + (b - a)[:, :, None] * fr  # (X, J, panels+1)
    ea, eb = edges[..., :-1], edges[..., 1:]
    xi, wi = _gl(order)
    mid, half = 0.5 * (ea + eb), 0.5 * (eb - ea)
    t = mid[..., None] + half[..., None] * xi
    vals = kern.poly(t) * f.pdf(x[:, None, None, None] - h * t)
    return np.einsum("xjpm,m,xjp->x", vals, wi, half)


def _check_h(K: ProductKernel, h) -> np.ndarray:
    h = np.broadcast_to(np.asarray(h, dtype=float), (K.d,)).copy()
    if np.any(h <= 0):
        raise ValueError("bandwidth components must be positive")
    return h


def _refined(compute, quad: QuadratureSpec):
    v = compute(quad.panels_per_axis)
    if not quad.refine:
        return v
    v2 = compute(2 * quad.panels_per_axis)
    err = np.max(np.abs(np.asarray(v2) - np.asarray(v)))
    if err > quad.abs_tol:
        raise QuadratureError(f"panel refinement changed the value by {err:.3e} > {quad.abs_tol:.1e}")
    return v2


def smoothed(f: TestDensity, K: ProductKernel, h, x, quad: QuadratureSpec = QuadratureSpec()):
    """S_h(x) = int K_h(x - y) f(y) dy at the points x (shape (..., d))."""
    h = _check_h(K, h)
    x = np.asarray(x, dtype=float)
    pts = x.reshape(-1, f.dim)

    def compute(panels):
        out = np.ones(pts.shape[0])
        for j, fj in enumerate(f.factors):
            out = out * _smoothed_axis(fj, K.factor, h[j], pts[:, j], panels, quad.order)
        return out

    return _refined(compute, quad).reshape(x.shape[:-1])


def bias_field(f: TestDensity, K: ProductKernel, h, x, quad: QuadratureSpec = QuadratureSpec()):
    """B_h(x) = S_h(x) - f(x)."""
    x = np.asarray(x, dtype=float)
    return smoothed(f, K, h, x, quad) - f.pdf(x.reshape(-1, f.dim)).reshape(x.shape[:-1])


def _outer_axis_cuts(fj: Density1D, kern: AggregatedKernel, h: float) -> np.ndarray:
    fb = np.asarray(fj.breakpoints)
    kb = kern.poly._bp
    cuts = np.concatenate([fb, (fb[:, None] + h * kb[None, :]).ravel()])
    return np.unique(cuts)


def _grid_fields(f: TestDensity, K: ProductKernel, h, panels: int, order: int):
    """Tensor-grid weights, S_h and f on the inflated support of f."""
    ws, Ss, fs = [], [], []
    for j, fj in enumerate(f.factors):
        x, w = _panel_nodes(_outer_axis_cuts(fj, K.factor, h[j]), panels, order)
        ws.append(w)
        Ss.append(_smoothed_axis(fj, K.factor, h[j], x, panels, order))
        fs.append(fj.pdf(x))
    W, S, F = ws[0], Ss[0], fs[0]
    for w, s, fv in zip(ws[1:], Ss[1:], fs[1:]):
        W = np.multiply.outer(W, w)
        S = np.multiply.outer(S, s)
        F = np.multiply.outer(F, fv)
    return W, S, F


def _integrate(f, K, h, integrand, quad):
    h = _check_h(K, h)

    def compute(panels):
        W, S, F = _grid_fields(f, K, h, panels, quad.order)
        vals = integrand(S, F)
        return np.array([np.sum(W * v) for v in vals])

    return _refined(compute, quad)


def functionals(f: TestDensity, K: ProductKernel, h, p: int, quad: QuadratureSpec = QuadratureSpec()):
    """(T1, T2) = (int S_h^p, int S_h^{p-1} f)."""
    t1, t2 = _integrate(f, K, h, lambda S, F: (S**p, S ** (p - 1) * F), quad)
    return float(t1), float(t2)


def functional_T1(f, K, h, p, quad: QuadratureSpec = QuadratureSpec()) -> float:
    return functionals(f, K, h, p, quad)[0]


def functional_T2(f, K, h, p, quad: QuadratureSpec = QuadratureSpec()) -> float:
    return functionals(f, K, h, p, quad)[1]


def _lemma1_terms(S, F, p):
    B = S - F
    rem = sum(math.comb(p, j) * (-1) ** j * S ** (p - j) * B**j for j in range(2, p + 1))
    return S**p, S ** (p - 1) * F, rem


def lemma1_remainder(f, K, h, p, quad: QuadratureSpec = QuadratureSpec()) -> float:
    """sum_{j=2}^p C(p,j) (-1)^j int S^{p-j} B^j: the norm^p minus E of the estimator."""
    return float(_integrate(f, K, h, lambda S, F: (_lemma1_terms(S, F, p)[2],), quad)[0])


def lemma1_check(f, K, h, p: int, quad: QuadratureSpec = QuadratureSpec()):
    """(lhs, rhs, residual) of ||f||_p^p = (1-p)T1 + p T2 + remainder."""
    if p < 2 or int(p) != p:
        raise ValueError("p must be an integer >= 2")
    t1, t2, rem = _integrate(f, K, h, lambda S, F: _lemma1_terms(S, F, p), quad)
    lhs = exact_norm(f, p) ** p
    rhs = float((1 - p) * t1 + p * t2 + rem)
    return lhs, rhs, abs(lhs - rhs)


def quadrature_norm(f: TestDensity, s: float, quad: QuadratureSpec = QuadratureSpec()) -> float:
    def compute(panels):
        total = 1.0
        for fj in f.factors:
            x, w = _panel_nodes(np.asarray(fj.breakpoints), 4 * panels, quad.order)
            total *= float(np.sum(w * fj.pdf(x) ** s))
        return total

    return float(_refined(compute, quad)) ** (1 / s)


def exact_norm(f: TestDensity, s: float) -> float:
    if not s >= 1:
        raise ValueError("norm index must be >= 1")
    try:
        return f.known_norm(s)
    except (ValueError, AttributeError):
        return quadrature_norm(f, s)


# ---------------------------------------------------------------------------
# brute-force U-statistics
# ---------------------------------------------------------------------------

def _u2_direct(K: ProductKernel, h: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """U2 for a (T, p, d) block, straight from the definition."""
    T, p, d = pts.shape
    out = np.zeros(T)
    for i in range(p):
        term = np.ones(T)
        for k in range(p):
            if k != i:
                term = term * eval_scaled(K, h, pts[:, k, :] - pts[:, i, :])
        out += term
    return out / p


def _u1_exact(K: ProductKernel, h: np.ndarray, pts: np.ndarray) -> float:
    out = 1.0
    for j in range(pts.shape[1]):
        out *= factor_product_integral(K.factor, pts[:, j], h[j])
        if out == 0.0:
            break
    return out


def naive_ustat(sample, K: ProductKernel, h, p: int, block: int = 20000):
    """(T1_hat, T2_hat) by enumerating every p-subset of the sample.

    U2 is evaluated on every subset.  U1 uses the exact scalar product
    integral; subsets whose kernel supports do not intersect on some axis
    integrate to zero and skip the call.
    """
    X = np.asarray(getattr(sample, "data", sample), dtype=float)
    X = X.reshape(X.shape[0], -1)
    n = X.shape[0]
    if n < p:
        raise ValueError(f"need n >= p = {p}, got n = {n}")
    h = _check_h(K, h)
    reach = 2 * K.ell * h
    u1, u2 = [], []
    combos = itertools.combinations(range(n), p)
    while True:
        idx = np.fromiter(itertools.chain.from_iterable(itertools.islice(combos, block)), dtype=np.int64)
        if idx.size == 0:
            break
        pts = X[idx.reshape(-1, p)]
        u2.extend(_u2_direct(K, h, pts).tolist())
        spread = pts.max(axis=1) - pts.min(axis=1)
        overlap = np.all(spread < reach, axis=1)
        vals = np.zeros(pts.shape[0])
        for t in np.flatnonzero(overlap):
            vals[t] = _u1_exact(K, h, pts[t])
        u1.extend(vals.tolist())
    c = math.comb(n, p)
    return math.fsum(u1) / c, math.fsum(u2) / c
