"""Empirical risk of N_hat against n for the two reference classes (uniform density)."""
import argparse
import math
from fractions import Fraction

from normest.nikolskii import INF, ClassSpec
from normest.simulate import ExperimentConfig, mann_kendall_upward, run_risk_experiment


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--replicates", type=int, default=200)
    ap.add_argument("--kmax", type=int, default=13, help="largest n is 2**kmax")
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    grid = tuple(2**k for k in range(8, args.kmax + 1))
    for beta in (Fraction(1), Fraction(1, 2)):
        spec = ClassSpec(beta=(beta,), r=(INF,), L=(1,), p=2)
        tab = run_risk_experiment(ExperimentConfig("uniform", spec, grid, args.replicates, seed=args.seed),
                                  workers=args.workers)
        print(f"beta={beta}  theta*={tab.theta_star:.4f}  slope={tab.fitted_slope:.4f}  "
              f"CI=({tab.slope_ci[0]:.4f}, {tab.slope_ci[1]:.4f})  "
              f"violations={tab.risk_reduction_violations()}")
        for row in tab.rows:
            print(f"  n={row.n:6d}  risk={row.empirical_risk:.5f} +- {row.mc_standard_error:.5f}  "
                  f"phi_n={row.theoretical_phi_n:.5f}  risk*sqrt(n)={row.empirical_risk * math.sqrt(row.n):.4f}")
        print(f"  upward trend p-value of risk*sqrt(n): "
              f"{mann_kendall_upward([r.empirical_risk * math.sqrt(r.n) for r in tab.rows]):.3f}")


if __name__ == "__main__":
    main()
