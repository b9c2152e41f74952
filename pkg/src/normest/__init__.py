"""Rate-optimal estimation of the Lp-norm of a multivariate density."""
from .estimator import EstimateResult, KernelConfig, Sample, estimate, estimate_fixed
from .kernel import ProductKernel, build_aggregated
from .nikolskii import (
    BandwidthPlan,
    ClassSpec,
    DomainError,
    InfeasibleError,
    InsufficientSampleError,
    RatePlan,
    Regime,
    SpecError,
    bandwidth,
    classify_regime,
    exponents,
    gamma_j,
    tau,
)
from .oracle import exact_norm, lemma1_check, make_density

__version__ = "0.1.0"
