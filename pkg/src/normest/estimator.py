"""U-statistic estimator of ||f||_p with a pruned p-tuple scan.

Only subsets whose per-axis coordinate spread is at most 2*ell*h_j can give a
non-zero summand (both kernels vanish otherwise), and spread <= w on every
axis is the same as every pair being within w of each other.  The scan
therefore builds the neighbour graph on a uniform grid of cell edge
2*ell*h_j and enumerates its p-cliques in lexicographic index order.
"""
from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .kernel import AggregatedKernel, ProductKernel, build_aggregated, product_integral_batch
from .nikolskii import (
    BandwidthPlan,
    ClassSpec,
    InsufficientSampleError,
    bandwidth as plan_bandwidth,
    default_ell,
)

__all__ = [
    "Sample",
    "KernelConfig",
    "EstimateResult",
    "ScanResult",
    "u1",
    "u2",
    "u1_batch",
    "u2_batch",
    "neighbor_pairs",
    "candidate_tuples",
    "pruned_tuple_scan",
    "estimate",
    "estimate_fixed",
    "MAX_P_DEFAULT",
]

MAX_P_DEFAULT = 5
CHUNK = 16384


@dataclass(frozen=True)
class Sample:
    data: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.data, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2:
            raise ValueError("sample must be an n x d matrix")
        if not np.all(np.isfinite(X)):
            raise ValueError("sample contains non-finite entries")
        object.__setattr__(self, "data", X)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class KernelConfig:
    base: str = "epanechnikov"
    ell: int | str = "auto"

    def resolve(self, spec: Optional[ClassSpec], d: int) -> ProductKernel:
        ell = self.ell
        if ell == "auto":
            if spec is None:
                raise ValueError("ell='auto' needs a class spec")
            ell = default_ell(spec)
        return ProductKernel(build_aggregated(self.base, int(ell)), d)


@dataclass(frozen=True)
class EstimateResult:
    t1_hat: float
    t2_hat: float
    t_hat: float
    n_hat: float
    tuples_evaluated: int
    tuples_pruned: int
    h: tuple
    p: int
    plan: Optional[BandwidthPlan] = None
    empty_scan: bool = False

    def to_dict(self) -> dict:
        out = {
            "t1": self.t1_hat,
            "t2": self.t2_hat,
            "t_hat": self.t_hat,
            "n_hat": self.n_hat,
            "h": list(self.h),
            "N": self.plan.N if self.plan is not None else None,
            "tuples_evaluated": self.tuples_evaluated,
            "tuples_pruned": self.tuples_pruned,
            "empty_scan": self.empty_scan,
        }
        return out


# ---------------------------------------------------------------------------
# per-tuple kernels
# ---------------------------------------------------------------------------

def u1(points, K: ProductKernel, h) -> float:
    """U1(x_1..x_p) = int prod_i K_h(y - x_i) dy, via per-axis factorisation."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return float(u1_batch(pts[None], K, h)[0])


def u2(points, K: ProductKernel, h) -> float:
    """U2(x_1..x_p) = (1/p) sum_i prod_{j != i} K_h(x_j - x_i)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return float(u2_batch(pts[None], K, h)[0])


def u1_batch(pts: np.ndarray, K: ProductKernel, h) -> np.ndarray:
    """U1 for a (T, p, d) array of tuples."""
    T, p, d = pts.shape
    h = np.broadcast_to(np.asarray(h, dtype=float), (d,))
    out = np.ones(T)
    for j in range(d):
        delta = (pts[:, :, j] - pts[:, :1, j]) / h[j]
        if p == 2:
            out *= K.factor.pair_integral(delta[:, 1]) / h[j]
        else:
            out *= product_integral_batch(K.factor, delta) / h[j] ** (p - 1)
    return out


def u2_batch(pts: np.ndarray, K: ProductKernel, h) -> np.ndarray:
    """U2 for a (T, p, d) array of tuples."""
    T, p, d = pts.shape
    h = np.broadcast_to(np.asarray(h, dtype=float), (d,))
    vh = float(np.prod(h))
    if p == 2:
        # symmetric kernel: both orderings give the same product
        return K((pts[:, 1] - pts[:, 0]) / h) / vh
    # kv[t, i, k] = K_h(x_k - x_i)
    diff = (pts[:, None, :, :] - pts[:, :, None, :]) / h
    kv = np.prod(K.factor(diff), axis=-1) / vh
    total = np.zeros(T)
    for i in range(p):
        others = [k for k in range(p) if k != i]
        total += np.prod(kv[:, i, others], axis=-1)
    return total / p


# ---------------------------------------------------------------------------
# pruned enumeration
# ---------------------------------------------------------------------------

def _ragged_arange(starts: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Concatenation of arange(s, s + c) for each (s, c)."""
    counts = np.asarray(counts, dtype=np.int64)
    total = int(counts.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64)
    offs = np.repeat(np.cumsum(counts) - counts, counts)
    return np.repeat(starts, counts) + np.arange(total, dtype=np.int64) - offs


def _cell_keys(X: np.ndarray, w: np.ndarray):
    """Linear keys of grid cells; axis indices are rank-compressed.

    Rank compression keeps every true neighbour adjacent (consecutive cell
    indices stay consecutive) and may add spurious neighbours, which the exact
    distance filter removes.
    """
    n, d = X.shape
    # inflate the edge so |x - y| <= w always means cell indices differ by <= 1
    cells = np.floor((X - X.min(axis=0)) / (w * (1 + 1e-9))).astype(np.int64)
    ranks = np.empty_like(cells)
    dims = []
    for j in range(d):
        u, inv = np.unique(cells[:, j], return_inverse=True)
        ranks[:, j] = inv.ravel() + 1  # pad so neighbour offsets stay in range
        dims.append(len(u) + 2)
    if math.prod(dims) >= 2**62:
        raise OverflowError("grid too large to encode; reduce dimension or sample size")
    strides = np.ones(d, dtype=np.int64)
    for j in range(d - 2, -1, -1):
        strides[j] = strides[j + 1] * dims[j + 1]
    return ranks @ strides, strides


def neighbor_pairs(X: np.ndarray, w) -> np.ndarray:
    """All pairs (i < j) with |X_i - X_j| <= w_j on every axis, sorted."""
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    w = np.broadcast_to(np.asarray(w, dtype=float), (d,))
    if n < 2:
        return np.zeros((0, 2), dtype=np.int64)
    if d == 1:
        return _sorted_pairs(*_sweep_1d(X[:, 0], w[0]), n)
    keys, strides = _cell_keys(X, w)
    order = np.argsort(keys, kind="stable")
    skeys = keys[order]
    ukeys, starts, counts = np.unique(skeys, return_index=True, return_counts=True)
    chunks = []
    for off in itertools.product((-1, 0, 1), repeat=d):
        off = np.array(off, dtype=np.int64)
        nz = np.flatnonzero(off)
        if nz.size and off[nz[0]] < 0:
            continue  # each unordered cell pair once
        target = ukeys + off @ strides
        pos = np.searchsorted(ukeys, target)
        pos_c = np.minimum(pos, len(ukeys) - 1)
        hit = np.flatnonzero((pos < len(ukeys)) & (ukeys[pos_c] == target))
        if hit.size == 0:
            continue
        a_cell, b_cell = hit, pos_c[hit]
        ca, cb = counts[a_cell], counts[b_cell]
        block = ca * cb
        k = _ragged_arange(np.zeros_like(block), block)
        rep_cb = np.repeat(cb, block)
        ia = np.repeat(starts[a_cell], block) + k // rep_cb
        ib = np.repeat(starts[b_cell], block) + k % rep_cb
        if not nz.size:
            keep = ia < ib
            ia, ib = ia[keep], ib[keep]
        chunks.append((order[ia], order[ib]))
    if not chunks:
        return np.zeros((0, 2), dtype=np.int64)
    i = np.concatenate([c[0] for c in chunks])
    j = np.concatenate([c[1] for c in chunks])
    i, j = np.minimum(i, j), np.maximum(i, j)
    close = np.all(np.abs(X[i] - X[j]) <= w, axis=1)
    return _sorted_pairs(i[close], j[close], n)


def _sweep_1d(x: np.ndarray, w: float):
    """Pairs within w on a line: sort once, then one window per point."""
    order = np.argsort(x, kind="stable")
    xs = x[order]
    edge = xs + w
    hi = np.searchsorted(xs, edge + 1e-12 * (np.abs(edge) + w), side="right")
    a = np.arange(x.size)
    counts = hi - a - 1
    b = _ragged_arange(a + 1, counts)
    a = np.repeat(a, counts)
    # the window is slightly generous; apply the exact rule
    keep = np.abs(xs[b] - xs[a]) <= w
    i, j = order[a[keep]], order[b[keep]]
    return np.minimum(i, j), np.maximum(i, j)


def _sorted_pairs(i: np.ndarray, j: np.ndarray, n: int) -> np.ndarray:
    key = np.sort(i.astype(np.int64) * n + j)
    return np.column_stack([key // n, key % n])


def candidate_tuples(X: np.ndarray, h, ell: int, p: int) -> np.ndarray:
    """Lexicographically sorted index p-tuples with spread <= 2 ell h_j per axis."""
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    w = 2 * ell * np.broadcast_to(np.asarray(h, dtype=float), (d,))
    pairs = neighbor_pairs(X, w)
    if p == 2 or pairs.shape[0] == 0:
        return pairs if p == 2 else np.zeros((0, p), dtype=np.int64)
    pair_keys = pairs[:, 0] * n + pairs[:, 1]  # sorted, since pairs are
    indptr = np.searchsorted(pairs[:, 0], np.arange(n + 1))
    tuples = pairs
    for _ in range(p - 2):
        last = tuples[:, -1]
        deg = indptr[last + 1] - indptr[last]
        rows = np.repeat(np.arange(tuples.shape[0]), deg)
        cand = pairs[_ragged_arange(indptr[last], deg), 1]
        ok = np.ones(cand.size, dtype=bool)
        for c in range(tuples.shape[1] - 1):
            key = tuples[rows, c] * n + cand
            pos = np.minimum(np.searchsorted(pair_keys, key), pair_keys.size - 1)
            ok &= pair_keys[pos] == key
        tuples = np.column_stack([tuples[rows[ok]], cand[ok]])
        if tuples.shape[0] == 0:
            break
    return tuples


@dataclass(frozen=True)
class ScanResult:
    sums: tuple
    tuples_evaluated: int
    tuples_pruned: int


def pruned_tuple_scan(X, h, ell: int, p: int,
                      visitor: Callable[[np.ndarray], Sequence[np.ndarray]],
                      workers: int = 1) -> ScanResult:
    """Apply `visitor` to every surviving index tuple and sum its outputs.

    The visitor gets a (T, p) index chunk and returns per-tuple value arrays.
    Chunks are fixed by tuple order, values are concatenated in that order and
    reduced by one pairwise sum, so results do not depend on `workers`.
    """
    X = np.asarray(X, dtype=float)
    tuples = candidate_tuples(X, h, ell, p)
    T = tuples.shape[0]
    chunks = [tuples[s : s + CHUNK] for s in range(0, T, CHUNK)]
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(visitor, chunks))
    else:
        parts = [visitor(c) for c in chunks]
    if parts:
        k = len(parts[0])
        sums = tuple(float(np.sum(np.concatenate([pt[m] for pt in parts]))) for m in range(k))
    else:
        sums = None
    total = math.comb(X.shape[0], p)
    return ScanResult(sums, T, total - T)


# ---------------------------------------------------------------------------
# estimator
# ---------------------------------------------------------------------------

def _check_p(p: int, allow_large_p: bool):
    if p > MAX_P_DEFAULT and not allow_large_p:
        raise ValueError(f"p = {p} exceeds the default cap {MAX_P_DEFAULT}; pass allow_large_p=True")


def estimate_fixed(sample, K: ProductKernel, h, p: int, workers: int = 1,
                   allow_large_p: bool = False, plan: Optional[BandwidthPlan] = None) -> EstimateResult:
    """Estimator at a given bandwidth vector h."""
    _check_p(p, allow_large_p)
    S = sample if isinstance(sample, Sample) else Sample(sample)
    # canonical row order makes the reduction, hence the result, permutation invariant
    X = S.data[np.lexsort(S.data.T[::-1])]
    n, d = X.shape
    if n < p:
        raise InsufficientSampleError(f"need n >= p = {p}, got n = {n}")
    h = tuple(float(x) for x in np.broadcast_to(np.asarray(h, dtype=float), (d,)))
    if any(x <= 0 for x in h):
        raise ValueError("bandwidth components must be positive")

    def visitor(idx):
        pts = X[idx]
        return u1_batch(pts, K, h), u2_batch(pts, K, h)

    scan = pruned_tuple_scan(X, h, K.ell, p, visitor, workers=workers)
    c = math.comb(n, p)
    if scan.sums is None:
        t1 = t2 = 0.0
    else:
        t1, t2 = scan.sums[0] / c, scan.sums[1] / c
    t_hat = (1 - p) * t1 + p * t2
    return EstimateResult(
        t1_hat=t1,
        t2_hat=t2,
        t_hat=t_hat,
        n_hat=abs(t_hat) ** (1 / p),
        tuples_evaluated=scan.tuples_evaluated,
        tuples_pruned=scan.tuples_pruned,
        h=h,
        p=p,
        plan=plan,
        empty_scan=scan.tuples_evaluated == 0,
    )


def estimate(sample, spec: ClassSpec, kernel: KernelConfig = KernelConfig(),
             bandwidth: Optional[Sequence[float]] = None, workers: int = 1,
             allow_large_p: bool = False) -> EstimateResult:
    """N_hat = |T_hat|^{1/p} at the class bandwidth (or an explicit override)."""
    S = sample if isinstance(sample, Sample) else Sample(sample)
    if S.d != spec.d:
        raise ValueError(f"sample has {S.d} columns but the class has d = {spec.d}")
    if S.n < spec.p:
        raise InsufficientSampleError(f"need n >= p = {spec.p}, got n = {S.n}")
    plan = plan_bandwidth(spec, S.n)
    h = plan.h if bandwidth is None else bandwidth
    K = kernel.resolve(spec, S.d)
    return estimate_fixed(S, K, h, spec.p, workers=workers, allow_large_p=allow_large_p, plan=plan)


def default_workers() -> int:
    env = os.environ.get("NORMEST_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1
