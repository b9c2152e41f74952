"""Invariant suites at pinned desk-scale parameters.

Each suite returns a list of :class:`Check` records; ``verify`` in the CLI
prints them and the acceptance tests assert on them.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .estimator import KernelConfig, estimate_fixed
from .kernel import BASES, ProductKernel, build_aggregated
from .nikolskii import ClassSpec
from .oracle import DENSITIES, functionals, lemma1_check, make_density, naive_ustat
from .simulate import replicate_rng, risk_reduction_violations, run_fixed_replicates

__all__ = ["Check", "SUITES", "lemma1_suite", "kernel_moments_suite", "pruning_suite",
           "unbiasedness_suite", "risk_reduction_suite", "run_suite"]


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    value: float
    threshold: float
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


def _le(suite, name, value, threshold) -> Check:
    return Check(suite, name, float(value), float(threshold), bool(value <= threshold))


LEMMA1_BANDWIDTHS = (0.05, 0.15, 0.4)


def lemma1_suite(tol: float = 1e-8, base: str = "epanechnikov", ells=(1, 2, 3)) -> list:
    out = []
    for name in DENSITIES:
        for d in (1, 2):
            f = make_density(name, d)
            for p in (2, 3):
                for ell in ells:
                    K = ProductKernel(build_aggregated(base, ell), d)
                    for h in LEMMA1_BANDWIDTHS:
                        _, _, res = lemma1_check(f, K, [h] * d, p)
                        out.append(_le("lemma1", f"{name} d={d} p={p} ell={ell} h={h}", abs(res), tol))
    return out


def kernel_moments_suite(tol: float = 1e-10, ells=range(1, 6)) -> list:
    out = []
    for base in BASES:
        for ell in ells:
            K = build_aggregated(base, ell)
            out.append(_le("kernel-moments", f"{base} ell={ell} k=0", abs(K.poly.moment(0) - 1), tol))
            for k in range(1, ell):
                out.append(_le("kernel-moments", f"{base} ell={ell} k={k}", abs(K.poly.moment(k)), tol))
    return out


def _rel(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / scale


def pruning_configs(count: int = 50, seed: int = 2024) -> list:
    """Random (density, d, p, base, ell, n, h) configurations, with n kept small for p = 3."""
    rng = replicate_rng(seed, 0, 0)
    names = sorted(DENSITIES)
    cfgs = []
    for i in range(count):
        p = 2 if i % 2 == 0 else 3
        d = int(rng.integers(1, 3)) if p == 3 else int(rng.integers(1, 4))
        n = int(rng.integers(20, 201)) if p == 2 else int(rng.integers(10, 41))
        cfgs.append(dict(
            density=names[int(rng.integers(len(names)))],
            d=d, p=p,
            base=sorted(BASES)[int(rng.integers(2))],
            ell=int(rng.integers(1, 5)),
            n=n,
            h=[float(x) for x in np.exp(rng.uniform(np.log(0.03), np.log(0.6), d))],
            seed=int(rng.integers(2**32)),
        ))
    return cfgs


def pruning_suite(tol: float = 1e-12, count: int = 50, seed: int = 2024) -> list:
    out = []
    for cfg in pruning_configs(count, seed):
        f = make_density(cfg["density"], cfg["d"])
        X = f.sample(cfg["n"], replicate_rng(cfg["seed"], cfg["n"], 0))
        K = ProductKernel(build_aggregated(cfg["base"], cfg["ell"]), cfg["d"])
        fast = estimate_fixed(X, K, cfg["h"], cfg["p"])
        t1, t2 = naive_ustat(X, K, cfg["h"], cfg["p"])
        diff = max(_rel(fast.t1_hat, t1), _rel(fast.t2_hat, t2))
        label = (f"{cfg['density']} d={cfg['d']} p={cfg['p']} {cfg['base']} ell={cfg['ell']} "
                 f"n={cfg['n']} tuples={fast.tuples_evaluated}")
        out.append(_le("pruning", label, diff, tol))
    return out


def unbiasedness_suite(n: int = 100, replicates: int = 2000, seed: int = 7, h: float = 0.1,
                       base: str = "box", z: float = 4.0, workers: int = 1, density: str = "triangular") -> list:
    """MC means of T1_hat, T2_hat vs the quadrature oracle, in standard errors."""
    f = make_density(density)
    spec = ClassSpec(beta=(1.0,), r=(math.inf,), L=(1.0,), p=2)
    kernel = KernelConfig(base=base, ell=1)
    K = kernel.resolve(spec, 1)
    t1, t2 = functionals(f, K, [h], 2)
    reps = run_fixed_replicates(f, spec, n, replicates, seed, kernel, h=(h,), workers=workers)
    out = []
    for label, col, target in (("T1", 0, t1), ("T2", 1, t2)):
        x = reps[:, col]
        se = np.std(x, ddof=1) / math.sqrt(x.size)
        out.append(_le("unbiasedness", f"{label} mean={x.mean():.6g} oracle={target:.6g}",
                       abs(x.mean() - target) / se, z))
    return out


def risk_reduction_suite(n_values=(64, 256), replicates: int = 200, seed: int = 11) -> list:
    """Per-replicate risk-reduction bounds for the two rate specs."""
    f = make_density("uniform")
    out = []
    for beta in (1.0, 0.5):
        spec = ClassSpec(beta=(beta,), r=(math.inf,), L=(1.0,), p=2)
        for n in n_values:
            reps = run_fixed_replicates(f, spec, n, replicates, seed)
            v = risk_reduction_violations(reps[:, 2], reps[:, 3], 1.0, 2)
            out.append(_le("risk-reduction", f"beta={beta} n={n} violations", v, 0))
    return out


SUITES = {
    "lemma1": lemma1_suite,
    "kernel-moments": kernel_moments_suite,
    "pruning": pruning_suite,
    "unbiasedness": unbiasedness_suite,
    "risk-reduction": risk_reduction_suite,
}


def run_suite(name: str) -> list:
    try:
        fn = SUITES[name]
    except KeyError:
        raise ValueError(f"unknown suite {name!r}; choose from {sorted(SUITES)} or 'all'") from None
    return fn()
