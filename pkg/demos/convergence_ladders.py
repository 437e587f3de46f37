"""Three coupled-ladder diagnostics for the chaos limit.

Each ladder estimates a squared distance between consecutive mollification
levels (or between two mollifier profiles at the same level) and should
decrease toward zero.  The verdict applies the decreasing-within-noise
rule used by the experiment runner.
"""

import argparse

from logchaos import (Bench, ChaosParams, Grid, KernelSpec, Mollifier,
                      bump_function, cauchy_ladder, mollifier_independence,
                      pick_lambda, sobolev_ladder)


def show(title, report):
    print(f"\n{title}")
    for i, step in enumerate(report.steps):
        coarse, fine = (step if isinstance(step, tuple) else (step, step))
        print(f"  rung {i}: eps {float(coarse):.5f} -> {float(fine):.5f}   "
              f"cell {report.values[i]:.3e} (se {report.ses[i]:.1e})")
    print(f"  verdict: {'decreasing within noise' if report.verdict else 'NOT decreasing'}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grid-n", type=int, default=512)
    ap.add_argument("--replicas", type=int, default=800)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--rungs", type=int, default=4,
                    help="ladder length, eps = 2^-3 .. 2^-(2+rungs)")
    args = ap.parse_args()

    spec = KernelSpec(d=1)
    grid = Grid.regular((0.0, 1.0), args.grid_n)
    f = bump_function(grid, center=0.5, radius=0.1)
    ladder = [2.0 ** -(3 + k) for k in range(args.rungs)]
    n_max = 8
    bench = Bench(spec, grid, n_max, f=f)
    bench.add_channel("alt", Mollifier(d=1, profile="quartic"))

    rep = cauchy_ladder(bench, ChaosParams(f=f, gamma=0.8), ladder,
                        args.replicas, args.seed)
    show("Cauchy ladder, gamma = 0.8 (L2, untruncated)", rep)

    lam = pick_lambda(1, 1.1, 0.25)
    params = ChaosParams(f=f, gamma=1.1 + 0.25j, truncation=True, q=2,
                         lam=lam)
    rep = cauchy_ladder(bench, params, ladder, args.replicas, args.seed)
    show(f"Cauchy ladder, gamma = 1.1 + 0.25i (truncated, lambda = {lam:.3f})",
         rep)

    rep = mollifier_independence(bench, ChaosParams(f=f, gamma=0.8), ladder,
                                 args.replicas, args.seed)
    show("profile independence, bump vs quartic, gamma = 0.8", rep)

    rep = sobolev_ladder(bench, params, 0.75, ladder, args.replicas,
                         args.seed)
    show("H^{-0.75} coupled distance, gamma = 1.1 + 0.25i", rep)


if __name__ == "__main__":
    main()
