"""Piecewise-polynomial kernels: base, aggregated (higher order) and product.

Coefficients are held as exact rationals so that normalisation and moment
identities can be checked without rounding; float copies drive evaluation.

Evaluation convention at breakpoints: each piece is closed on the side facing
the origin.  For a symmetric kernel this keeps K(-y) == K(y) bit-for-bit and
makes the box kernel equal 1/2 on the closed interval [-1, 1].
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as P

__all__ = [
    "PiecewisePoly1D",
    "BaseKernel",
    "AggregatedKernel",
    "ProductKernel",
    "BOX",
    "EPANECHNIKOV",
    "BASES",
    "get_base",
    "build_aggregated",
    "moment",
    "eval_scaled",
    "factor_product_integral",
    "product_integral_batch",
    "self_convolution",
]


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def _peval(coef: Sequence[Fraction], y: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in reversed(coef):
        acc = acc * y + c
    return acc


def _pint(coef: Sequence[Fraction], a: Fraction, b: Fraction) -> Fraction:
    anti = [Fraction(0)] + [c / (k + 1) for k, c in enumerate(coef)]
    return _peval(anti, b) - _peval(anti, a)


class PiecewisePoly1D:
    """Piecewise polynomial on [b_0, b_K], zero outside.

    ``coefficients[k]`` holds ascending-power coefficients of the piece on
    ``[breakpoints[k], breakpoints[k+1]]``, in the global variable.
    """

    __slots__ = ("breakpoints", "coefficients", "_bp", "_coef")

    def __init__(self, breakpoints, coefficients):
        bp = tuple(_frac(b) for b in breakpoints)
        coefs = tuple(tuple(_frac(c) for c in piece) for piece in coefficients)
        if len(bp) < 2 or any(a >= b for a, b in zip(bp, bp[1:])):
            raise ValueError("breakpoints must be strictly increasing, at least two")
        if len(coefs) != len(bp) - 1:
            raise ValueError("need one coefficient vector per interval")
        self.breakpoints = bp
        self.coefficients = coefs
        deg = max(len(c) for c in coefs)
        arr = np.zeros((len(coefs), deg))
        for k, c in enumerate(coefs):
            arr[k, : len(c)] = [float(x) for x in c]
        self._bp = np.array([float(b) for b in bp])
        self._coef = arr

    @property
    def support(self) -> tuple[float, float]:
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    @property
    def degree(self) -> int:
        return self._coef.shape[1] - 1

    def piece_index(self, y: np.ndarray) -> np.ndarray:
        """Index of the piece used at y, or -1 / K outside the support."""
        y = np.asarray(y, dtype=float)
        right = np.searchsorted(self._bp, y, side="left") - 1
        left = np.searchsorted(self._bp, y, side="right") - 1
        return np.where(y >= 0, right, left)

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        idx = self.piece_index(y)
        inside = (idx >= 0) & (idx < len(self.coefficients))
        c = self._coef[np.clip(idx, 0, len(self.coefficients) - 1)]
        val = c[..., -1]
        for j in range(c.shape[-1] - 2, -1, -1):
            val = val * y + c[..., j]
        return np.where(inside, val, 0.0)

    def value_exact(self, y) -> Fraction:
        y = _frac(y)
        k = int(self.piece_index(np.array(float(y))))
        if not 0 <= k < len(self.coefficients):
            return Fraction(0)
        return _peval(self.coefficients[k], y)

    # exact algebra -------------------------------------------------------------
    def integral(self) -> Fraction:
        return sum(
            (_pint(c, a, b) for c, a, b in zip(self.coefficients, self.breakpoints, self.breakpoints[1:])),
            Fraction(0),
        )

    def moment(self, k: int) -> Fraction:
        shifted = [[Fraction(0)] * k + list(c) for c in self.coefficients]
        return sum(
            (_pint(c, a, b) for c, a, b in zip(shifted, self.breakpoints, self.breakpoints[1:])),
            Fraction(0),
        )

    def dilate(self, a) -> "PiecewisePoly1D":
        """y -> self(y / a) for a > 0."""
        a = _frac(a)
        bp = [b * a for b in self.breakpoints]
        coefs = [[c / a**j for j, c in enumerate(piece)] for piece in self.coefficients]
        return PiecewisePoly1D(bp, coefs)

    def _refined(self, bp: Sequence[Fraction]) -> list[list[Fraction]]:
        out = []
        for a, b in zip(bp, bp[1:]):
            mid = (a + b) / 2
            k = next((i for i, (lo, hi) in enumerate(zip(self.breakpoints, self.breakpoints[1:]))
                      if lo <= mid <= hi), None)
            out.append(list(self.coefficients[k]) if k is not None else [Fraction(0)])
        return out

    def __add__(self, other: "PiecewisePoly1D") -> "PiecewisePoly1D":
        bp = sorted(set(self.breakpoints) | set(other.breakpoints))
        mine, theirs = self._refined(bp), other._refined(bp)
        coefs = []
        for c1, c2 in zip(mine, theirs):
            m = max(len(c1), len(c2))
            c1 = c1 + [Fraction(0)] * (m - len(c1))
            c2 = c2 + [Fraction(0)] * (m - len(c2))
            coefs.append([x + y for x, y in zip(c1, c2)])
        return PiecewisePoly1D(bp, coefs)

    def scale(self, c) -> "PiecewisePoly1D":
        c = _frac(c)
        return PiecewisePoly1D(self.breakpoints, [[c * x for x in piece] for piece in self.coefficients])

    def sup_norm(self) -> float:
        """max |poly| over the support (endpoints and interior critical points)."""
        best = 0.0
        for k, (a, b) in enumerate(zip(self._bp, self._bp[1:])):
            c = self._coef[k]
            cand = [a, b]
            if len(c) > 2:
                for root in P.polyroots(P.polyder(c)):
                    if abs(root.imag) < 1e-12 and a < root.real < b:
                        cand.append(root.real)
            best = max(best, max(abs(P.polyval(x, c)) for x in cand))
        return best

    def is_symmetric(self) -> bool:
        """Exact check that p(-y) == p(y)."""
        if [-b for b in reversed(self.breakpoints)] != list(self.breakpoints):
            return False
        K = len(self.coefficients)
        for k, piece in enumerate(self.coefficients):
            mirror = self.coefficients[K - 1 - k]
            flipped = [c * (-1) ** j for j, c in enumerate(mirror)]
            m = max(len(piece), len(flipped))
            if list(piece) + [0] * (m - len(piece)) != flipped + [0] * (m - len(flipped)):
                return False
        return True

    def __repr__(self):
        return f"PiecewisePoly1D(breakpoints={[str(b) for b in self.breakpoints]}, degree={self.degree})"


@dataclass(frozen=True)
class BaseKernel:
    name: str
    poly: PiecewisePoly1D

    def __post_init__(self):
        if not self.poly.is_symmetric():
            raise ValueError(f"base kernel {self.name!r} is not symmetric")
        if self.poly.integral() != 1:
            raise ValueError(f"base kernel {self.name!r} does not integrate to one")
        if self.poly.support != (-1.0, 1.0):
            raise ValueError("base kernel must be supported on [-1, 1]")


BOX = BaseKernel("box", PiecewisePoly1D([-1, 1], [[Fraction(1, 2)]]))
EPANECHNIKOV = BaseKernel(
    "epanechnikov", PiecewisePoly1D([-1, 1], [[Fraction(3, 4), 0, Fraction(-3, 4)]])
)
BASES = {"box": BOX, "epanechnikov": EPANECHNIKOV}


def get_base(name: str) -> BaseKernel:
    try:
        return BASES[name.lower()]
    except KeyError:
        raise ValueError(f"unknown base kernel {name!r}; choose from {sorted(BASES)}") from None


@dataclass(frozen=True)
class AggregatedKernel:
    """K_ell(y) = sum_{i=1}^{ell} C(ell, i) (-1)^{i+1} i^{-1} K(y / i)."""

    base: BaseKernel
    ell: int
    poly: PiecewisePoly1D

    def __call__(self, y):
        return self.poly(y)

    @property
    def sup_norm(self) -> float:
        return self.poly.sup_norm()

    @property
    def pair_integral(self) -> "PiecewisePoly1D":
        """delta -> int K_ell(t) K_ell(t - delta) dt, exact and cached."""
        return self_convolution(self.poly)


@lru_cache(maxsize=None)
def build_aggregated(base: BaseKernel | str, ell: int) -> AggregatedKernel:
    if isinstance(base, str):
        base = get_base(base)
    if ell < 1:
        raise ValueError(f"ell must be a positive integer, got {ell}")
    total = None
    for i in range(1, ell + 1):
        term = base.poly.dilate(i).scale(Fraction(math.comb(ell, i) * (-1) ** (i + 1), i))
        total = term if total is None else total + term
    return AggregatedKernel(base=base, ell=ell, poly=total)


def moment(kernel: AggregatedKernel, k: int, exact: bool = False):
    """int y^k K_ell(y) dy by exact polynomial integration."""
    m = kernel.poly.moment(k)
    return m if exact else float(m)


@dataclass(frozen=True)
class ProductKernel:
    """K(x) = prod_j K_ell(x_j) on R^d."""

    factor: AggregatedKernel
    d: int

    @property
    def ell(self) -> int:
        return self.factor.ell

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.prod(self.factor(x), axis=-1)


def eval_scaled(K: ProductKernel, h, x):
    """K_h(x) = K(x / h) / V_h, vectorised over leading axes of x."""
    h = np.asarray(h, dtype=float)
    if np.any(h <= 0):
        raise ValueError("bandwidth components must be positive")
    x = np.asarray(x, dtype=float)
    return K(x / h) / np.prod(h)


# ---------------------------------------------------------------------------
# product integrals along one axis
# ---------------------------------------------------------------------------

def _shift_matrix(c: np.ndarray, deg: int) -> np.ndarray:
    """M[..., k, m] = C(m, k) c^(m-k), so that M @ coef shifts coef(u) to coef(s + c)."""
    k = np.arange(deg + 1)
    binom = np.array([[math.comb(m, i) for m in k] for i in k], dtype=float)
    expo = k[None, :] - k[:, None]
    pw = np.where(expo >= 0, np.asarray(c)[..., None, None] ** np.maximum(expo, 0), 0.0)
    return binom * pw


def factor_product_integral(kernel: AggregatedKernel, centers, h: float) -> float:
    """int prod_i [K_ell((y - x_i) / h) / h] dy, exactly, for one axis.

    Works in the dimensionless variable t = (y - x_0) / h.  On each interval
    between consecutive breakpoints the integrand is one polynomial; it is
    re-expanded around the interval midpoint, multiplied out coefficient-wise
    and integrated in closed form.
    """
    x = np.asarray(centers, dtype=float).ravel()
    p = x.size
    delta = (x - x[0]) / h
    lo_s, hi_s = kernel.poly.support
    lo, hi = delta.max() + lo_s, delta.min() + hi_s
    if not lo < hi:
        return 0.0
    poly = kernel.poly
    bp, coef, deg = poly._bp, poly._coef, poly.degree
    cuts = (delta[:, None] + bp[None, :]).ravel()
    cuts = np.unique(np.concatenate([[lo, hi], cuts[(cuts > lo) & (cuts < hi)]]))
    mid, half = 0.5 * (cuts[1:] + cuts[:-1]), 0.5 * (cuts[1:] - cuts[:-1])
    prod = np.ones((mid.size, 1))
    for di in delta:
        k = np.searchsorted(bp, mid - di, side="right") - 1
        local = np.einsum("jkm,jm->jk", _shift_matrix(mid - di, deg), coef[k])
        new = np.zeros((mid.size, prod.shape[1] + deg))
        for m in range(deg + 1):
            new[:, m : m + prod.shape[1]] += prod * local[:, m : m + 1]
        prod = new
    powers = np.arange(0, prod.shape[1], 2)
    seg = prod[:, ::2] * 2 * half[:, None] ** (powers + 1) / (powers + 1)
    return float(np.sum(seg)) / h ** (p - 1)


@lru_cache(maxsize=None)
def _gauss_legendre(m: int):
    return np.polynomial.legendre.leggauss(m)


def product_integral_batch(kernel: AggregatedKernel, delta: np.ndarray) -> np.ndarray:
    """Rows of int prod_i K_ell(t - delta[r, i]) dt for a (T, p) offset array.

    Gauss-Legendre with enough nodes to be exact for the degree of the
    product, applied between consecutive breakpoints of the integrand.
    """
    delta = np.asarray(delta, dtype=float)
    T, p = delta.shape
    poly = kernel.poly
    bp = poly._bp
    lo_s, hi_s = poly.support
    lo = delta.max(axis=1) + lo_s
    hi = delta.min(axis=1) + hi_s
    cuts = (delta[:, :, None] + bp[None, None, :]).reshape(T, -1)
    cuts = np.sort(np.clip(cuts, lo[:, None], np.maximum(lo, hi)[:, None]), axis=1)
    a, b = cuts[:, :-1], cuts[:, 1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    m = (p * poly.degree) // 2 + 1
    xi, wi = _gauss_legendre(m)
    t = mid[:, :, None] + half[:, :, None] * xi  # (T, J, m)
    vals = np.ones_like(t)
    for i in range(p):
        vals *= poly(t - delta[:, i, None, None])
    return np.einsum("tjm,m,tj->t", vals, wi, half)


def _pair_value(poly: PiecewisePoly1D, delta: Fraction) -> Fraction:
    """int poly(t) poly(t - delta) dt in exact arithmetic."""
    total = Fraction(0)
    pieces = list(zip(poly.coefficients, poly.breakpoints, poly.breakpoints[1:]))
    for ci, ai, bi in pieces:
        for cj, aj, bj in pieces:
            lo, hi = max(ai, aj + delta), min(bi, bj + delta)
            if lo >= hi:
                continue
            # cj(t - delta) in powers of t
            shifted = [Fraction(0)] * len(cj)
            for m, c in enumerate(cj):
                for k in range(m + 1):
                    shifted[k] += c * math.comb(m, k) * (-delta) ** (m - k)
            prod = [Fraction(0)] * (len(ci) + len(cj) - 1)
            for u, x in enumerate(ci):
                for v, y in enumerate(shifted):
                    prod[u + v] += x * y
            total += _pint(prod, lo, hi)
    return total


def _solve_exact(A: list, b: list) -> list:
    n = len(b)
    M = [row[:] + [rhs] for row, rhs in zip(A, b)]
    for col in range(n):
        piv = next(r for r in range(col, n) if M[r][col] != 0)
        M[col], M[piv] = M[piv], M[col]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col] / M[col][col]
                M[r] = [x - f * y for x, y in zip(M[r], M[col])]
    return [M[i][n] / M[i][i] for i in range(n)]


@lru_cache(maxsize=None)
def self_convolution(poly: PiecewisePoly1D) -> PiecewisePoly1D:
    """Exact piecewise-polynomial form of delta -> int poly(t) poly(t - delta) dt.

    Between consecutive breakpoint differences the overlap limits are affine in
    delta, so the value is one polynomial of degree <= 2 deg + 1; it is
    recovered by exact interpolation at interior rational nodes.
    """
    bp = poly.breakpoints
    knots = sorted({a - b for a in bp for b in bp})
    m = 2 * poly.degree + 2
    coefs = []
    for u, v in zip(knots, knots[1:]):
        nodes = [u + (v - u) * Fraction(k, m + 1) for k in range(1, m + 1)]
        vals = [_pair_value(poly, x) for x in nodes]
        coefs.append(_solve_exact([[x**k for k in range(m)] for x in nodes], vals))
    return PiecewisePoly1D(knots, coefs)
