"""Monte Carlo risk, bias and variance experiments.

Replicate ``r`` at sample size ``n`` draws from a Philox generator keyed by
``SeedSequence(master_seed, spawn_key=(n, r))``; every output is a pure
function of the configuration regardless of scheduling or worker count.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .estimator import EstimateResult, KernelConfig, Sample, estimate, estimate_fixed
from .nikolskii import ClassSpec, bandwidth, classify_regime, default_ell, exponents
from .oracle import TestDensity, exact_norm, functionals, lemma1_remainder, make_density

__all__ = [
    "ExperimentConfig",
    "RiskRow",
    "RiskTable",
    "BiasTable",
    "VarianceTable",
    "replicate_rng",
    "sample",
    "fit_slope",
    "mann_kendall_upward",
    "risk_reduction_violations",
    "run_risk_experiment",
    "run_bias_experiment",
    "run_variance_experiment",
    "run_fixed_replicates",
]

BOOTSTRAP_RESAMPLES = 500
_BOOT_KEY = 0xB007


def replicate_rng(seed: int, n: int, r: int) -> np.random.Generator:
    """Counter-based generator for replicate r at sample size n."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(n), int(r)))
    return np.random.Generator(np.random.Philox(ss))


def sample(density: TestDensity, n: int, seed: int, r: int = 0) -> Sample:
    """Reproducible draw of n observations."""
    return Sample(density.sample(int(n), replicate_rng(seed, n, r)))


@dataclass(frozen=True)
class ExperimentConfig:
    density: str
    spec: ClassSpec
    n_grid: tuple
    replicates: int
    seed: int = 0
    bandwidth_mode: str = "plan"
    h: Optional[tuple] = None
    kernel: KernelConfig = KernelConfig()
    density_params: dict = field(default_factory=dict)

    def __post_init__(self):
        grid = tuple(int(n) for n in self.n_grid)
        object.__setattr__(self, "n_grid", grid)
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("n_grid must be strictly increasing")
        if self.replicates < 2:
            raise ValueError("need at least two replicates")
        if grid and grid[0] < self.spec.p:
            raise ValueError("every n in n_grid must be >= p")
        if self.bandwidth_mode not in ("plan", "fixed"):
            raise ValueError("bandwidth_mode must be 'plan' or 'fixed'")
        if self.bandwidth_mode == "fixed" and self.h is None:
            raise ValueError("fixed bandwidth mode needs h")

    def make_density(self) -> TestDensity:
        return make_density(self.density, self.spec.d, **self.density_params)


# ---------------------------------------------------------------------------
# replicate execution
# ---------------------------------------------------------------------------

def _one_replicate(job):
    density, spec, kernel, mode, h, seed, n, r = job
    X = density.sample(n, replicate_rng(seed, n, r))
    if mode == "plan":
        res = estimate(X, spec, kernel)
    else:
        res = estimate_fixed(X, kernel.resolve(spec, spec.d), h, spec.p)
    return res.t1_hat, res.t2_hat, res.t_hat, res.n_hat, res.tuples_evaluated


def _map(jobs, workers: int):
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_one_replicate, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    return [_one_replicate(j) for j in jobs]


def run_fixed_replicates(density: TestDensity, spec: ClassSpec, n: int, replicates: int, seed: int,
                         kernel: KernelConfig = KernelConfig(), h=None, workers: int = 1) -> np.ndarray:
    """(R, 5) array of (t1, t2, t_hat, n_hat, tuples) at one n, rows in replicate order."""
    mode = "plan" if h is None else "fixed"
    jobs = [(density, spec, kernel, mode, h, seed, n, r) for r in range(replicates)]
    return np.array(_map(jobs, workers), dtype=float)


# ---------------------------------------------------------------------------
# slope fits and trend tests
# ---------------------------------------------------------------------------

def fit_slope(n, y, seed: int = 0, resamples: int = BOOTSTRAP_RESAMPLES):
    """OLS slope of log y on log n with a residual-bootstrap 95% interval."""
    x = np.log(np.asarray(n, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    A = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    fitted = A @ coef
    resid = ly - fitted
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(_BOOT_KEY,))))
    boots = np.empty(resamples)
    for b in range(resamples):
        yb = fitted + rng.choice(resid, size=resid.size, replace=True)
        boots[b] = np.linalg.lstsq(A, yb, rcond=None)[0][1]
    lo, hi = np.quantile(boots, [0.025, 0.975])
    return float(coef[1]), (float(lo), float(hi))


def mann_kendall_upward(y) -> float:
    """One-sided p-value for an upward monotone trend (exact Kendall tau vs index)."""
    y = np.asarray(y, dtype=float)
    res = stats.kendalltau(np.arange(y.size), y, alternative="greater", method="exact")
    return float(res.pvalue)


def risk_reduction_violations(t_hat, n_hat, norm: float, p: int, rtol: float = 1e-12) -> int:
    """Count replicates where |N - ||f||_p|^2 exceeds either per-sample bound."""
    t_hat, n_hat = np.asarray(t_hat, dtype=float), np.asarray(n_hat, dtype=float)
    lhs = (n_hat - norm) ** 2
    dev = np.abs(t_hat - norm**p)
    b1 = dev ** (2 / p)
    b2 = dev**2 / norm ** (2 * p - 2)
    bound = np.minimum(b1, b2)
    return int(np.sum(lhs > bound * (1 + rtol) + 1e-300))


# ---------------------------------------------------------------------------
# risk
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RiskRow:
    n: int
    empirical_risk: float
    mc_standard_error: float
    mean_bias: float
    empirical_variance: float
    theoretical_phi_n: float
    h: tuple


@dataclass
class RiskTable:
    rows: list
    fitted_slope: float
    slope_ci: tuple
    theta_star: float
    norm: float
    p: int
    t_hat: dict = field(repr=False, default_factory=dict)
    n_hat: dict = field(repr=False, default_factory=dict)

    def decomposition_gaps(self):
        """|risk^2 - (bias^2 + var)| in units of the MC standard error of risk^2."""
        out = []
        for row in self.rows:
            e2 = (self.n_hat[row.n] - self.norm) ** 2
            se = np.std(e2, ddof=1) / math.sqrt(e2.size)
            gap = abs(row.empirical_risk**2 - (row.mean_bias**2 + row.empirical_variance))
            out.append(gap / se if se > 0 else 0.0)
        return out

    def risk_reduction_violations(self) -> int:
        return sum(risk_reduction_violations(self.t_hat[n], self.n_hat[n], self.norm, self.p)
                   for n in self.t_hat)

    def to_csv_rows(self):
        yield ["n", "empirical_risk", "mc_standard_error", "mean_bias", "empirical_variance",
               "theoretical_phi_n", "h"]
        for r in self.rows:
            yield [r.n, r.empirical_risk, r.mc_standard_error, r.mean_bias, r.empirical_variance,
                   r.theoretical_phi_n, ";".join(format(x, ".17g") for x in r.h)]


def run_risk_experiment(config: ExperimentConfig, workers: int = 1) -> RiskTable:
    """Empirical quadratic risk of N_hat across the n-grid, with a log-log slope."""
    density = config.make_density()
    spec = config.spec
    norm = exact_norm(density, spec.p)
    rate = classify_regime(spec)
    jobs = []
    for n in config.n_grid:
        for r in range(config.replicates):
            jobs.append((density, spec, config.kernel, config.bandwidth_mode, config.h, config.seed, n, r))
    out = np.array(_map(jobs, workers), dtype=float).reshape(len(config.n_grid), config.replicates, -1)
    rows, t_hats, n_hats = [], {}, {}
    for i, n in enumerate(config.n_grid):
        nh = out[i, :, 3]
        err = nh - norm
        e2 = err**2
        risk = math.sqrt(float(np.mean(e2)))
        se_e2 = float(np.std(e2, ddof=1)) / math.sqrt(e2.size)
        h = bandwidth(spec, n).h if config.bandwidth_mode == "plan" else tuple(
            np.broadcast_to(np.asarray(config.h, dtype=float), (spec.d,)))
        rows.append(RiskRow(
            n=n,
            empirical_risk=risk,
            mc_standard_error=se_e2 / (2 * risk) if risk > 0 else 0.0,
            mean_bias=float(np.mean(err)),
            empirical_variance=float(np.var(err, ddof=1)),
            theoretical_phi_n=rate.phi_n(n),
            h=tuple(float(x) for x in h),
        ))
        t_hats[n], n_hats[n] = out[i, :, 2], nh
    slope, ci = fit_slope([r.n for r in rows], [r.empirical_risk for r in rows], seed=config.seed)
    return RiskTable(rows, slope, ci, float(rate.theta_star), norm, spec.p, t_hats, n_hats)


# ---------------------------------------------------------------------------
# bias
# ---------------------------------------------------------------------------

@dataclass
class BiasTable:
    h: list
    t1: list
    t2: list
    bias: list
    fitted_slope: float
    threshold: float
    slope_ok: Optional[bool]


def run_bias_experiment(density: TestDensity, spec: ClassSpec, h_grid: Sequence[float],
                        kernel: KernelConfig = KernelConfig(), check_slope: bool = True) -> BiasTable:
    """Exact bias E T_hat - ||f||_p^p on a bandwidth grid (no sampling).

    T1_hat and T2_hat are unbiased, so the bias equals minus the identity
    remainder, computed by quadrature.  The slope check only makes sense when
    the density is at least as smooth as the class describes.
    """
    K = kernel.resolve(spec, spec.d)
    p = spec.p
    t1s, t2s, biases = [], [], []
    for h in h_grid:
        hv = [float(h)] * spec.d
        t1, t2 = functionals(density, K, hv, p)
        t1s.append(t1)
        t2s.append(t2)
        biases.append(-lemma1_remainder(density, K, hv, p))
    slope, _ = fit_slope(h_grid, np.abs(biases), resamples=1)
    ex = exponents(spec)
    threshold = float(min(a * k for a, k in zip(ex.pj, ex.kappa))) - 0.2
    return BiasTable(list(map(float, h_grid)), t1s, t2s, biases, slope, threshold,
                     (slope >= threshold) if check_slope else None)


# ---------------------------------------------------------------------------
# variance
# ---------------------------------------------------------------------------

@dataclass
class VarianceTable:
    n: list
    variance: list
    n_vh: list
    ratio: list
    fitted_slope: float
    slope_ci: tuple

    @property
    def ratio_spread(self) -> float:
        return max(self.ratio) / min(self.ratio)


def run_variance_experiment(density: TestDensity, spec: ClassSpec, h, n_grid: Sequence[int],
                            replicates: int, seed: int = 0, kernel: KernelConfig = KernelConfig(),
                            workers: int = 1) -> VarianceTable:
    """Empirical var(T_hat) at fixed h across n, with slope and var*n ratio."""
    p = spec.p
    hv = tuple(np.broadcast_to(np.asarray(h, dtype=float), (spec.d,)).tolist())
    vh = math.prod(hv)
    scale = exact_norm(density, 2 * p - 1) ** (2 * p - 1)
    jobs = [(density, spec, kernel, "fixed", hv, seed, n, r) for n in n_grid for r in range(replicates)]
    out = np.array(_map(jobs, workers), dtype=float).reshape(len(n_grid), replicates, -1)
    var = [float(np.var(out[i, :, 2], ddof=1)) for i in range(len(n_grid))]
    slope, ci = fit_slope(n_grid, var, seed=seed)
    return VarianceTable(
        n=[int(n) for n in n_grid],
        variance=var,
        n_vh=[n * vh for n in n_grid],
        ratio=[v * n / scale for v, n in zip(var, n_grid)],
        fitted_slope=slope,
        slope_ci=ci,
    )
