"""Variance of T_hat at fixed bandwidth, in the nV_h >> 1 and nV_h << 1 regimes."""
import argparse
from fractions import Fraction

from normest.estimator import KernelConfig
from normest.nikolskii import INF, ClassSpec
from normest.oracle import make_density
from normest.simulate import run_variance_experiment


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--replicates", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=3)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    f = make_density("triangular")
    spec = ClassSpec(beta=(Fraction(1, 2),), r=(INF,), L=(1,), p=2)
    for h, grid in ((0.5, (100, 200, 400, 800)), (3e-5, (100, 200, 400, 800, 1600))):
        tab = run_variance_experiment(f, spec, h, grid, args.replicates, seed=args.seed,
                                      kernel=KernelConfig("epanechnikov", 1), workers=args.workers)
        print(f"h={h:g}  slope={tab.fitted_slope:.4f}  CI=({tab.slope_ci[0]:.4f}, {tab.slope_ci[1]:.4f})")
        for n, v, nv, ratio in zip(tab.n, tab.variance, tab.n_vh, tab.ratio):
            print(f"  n={n:5d}  nV_h={nv:10.4g}  var={v:.4e}  var*n/||f||^3_3={ratio:.4f}")


if __name__ == "__main__":
    main()
