"""Draw one log-correlated field and watch its ladder build up.

Prints the empirical variance of the partial sums Y_n at the domain center
against the exact value Q_0 + n, then attaches two mollified fields X_eps and
reports their variance against the kernel-table diagonal.  Optionally dumps
one realization's profiles to CSV for plotting elsewhere.
"""

import argparse
import csv
import math

import numpy as np

from logchaos import (Grid, KernelSpec, Mollifier, mollified_table,
                      sample_increments, sample_mollified)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=256, help="grid points")
    ap.add_argument("--n-max", type=int, default=8)
    ap.add_argument("--replicas", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--csv", default=None, help="write one realization here")
    args = ap.parse_args()

    spec = KernelSpec(d=1)
    grid = Grid.regular((0.0, 1.0), args.n)
    mid = args.n // 2
    eps_list = [2.0 ** -4, 2.0 ** -5]

    ys = {k: [] for k in (2, 5, args.n_max)}
    xs = {e: [] for e in eps_list}
    kept = None
    for s in sample_increments(spec, grid, args.n_max, args.seed,
                               replicas=args.replicas):
        sample_mollified(s, eps_list)
        for k in ys:
            ys[k].append(s.y(k)[mid])
        for e in eps_list:
            xs[e].append(s.mollified[e][np.searchsorted(
                s.mollified_rows[e], mid)])
        if s.replica == 0:
            kept = s

    r = args.replicas
    print(f"partial sums at x = 0.5, R = {r}:")
    for k, vals in sorted(ys.items()):
        var = float(np.var(vals, ddof=1))
        se = var * math.sqrt(2.0 / (r - 1))
        exact = spec.q0_value + k
        print(f"  Var(Y_{k})  = {var:7.4f}   exact {exact}   "
              f"({(var - exact) / se:+.2f} se)")

    mol = Mollifier(d=1)
    print("mollified fields:")
    for e in eps_list:
        tab = mollified_table(spec, grid, e, e, mol=mol, rule="grid",
                              n_levels=args.n_max)
        i = np.searchsorted(tab.rows, mid)
        oracle = float(tab.values[i, i])
        var = float(np.var(xs[e], ddof=1))
        se = var * math.sqrt(2.0 / (r - 1))
        print(f"  Var(X_eps), eps = 2^{int(math.log2(e))}: {var:7.4f}"
              f"   table {oracle:7.4f}   ({(var - oracle) / se:+.2f} se)")

    if args.csv and kept is not None:
        rows_e = kept.mollified_rows[eps_list[0]]
        with open(args.csv, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["x", "y2", "y5", "y_top", "x_eps"])
            y2, y5, yt = kept.y(2), kept.y(5), kept.y(args.n_max)
            xe = np.full(grid.n, np.nan)
            xe[rows_e] = kept.mollified[eps_list[0]]
            for i in range(grid.n):
                wr.writerow([grid.points[i, 0], y2[i], y5[i], yt[i], xe[i]])
        print(f"wrote {args.csv}")


if __name__ == "__main__":
    main()
