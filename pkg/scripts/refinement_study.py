"""Grid-refinement convergence of the second-moment oracle.

Halves dt (and dx) repeatedly and prints successive differences at a few
probes together with the observed order log2(e_k / e_{k+1}).
"""

import argparse

import numpy as np

from spdepeaks.grid import Grid
from spdepeaks.kernels import Heat, Wave
from spdepeaks.levy import Brownian
from spdepeaks.oracle import RenewalProblem, solve_second_moment
from spdepeaks.profiles import Bump, InitialData

PROBES = [(1.0, 0.0), (2.0, 0.0), (2.0, 1.5)]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--equation", choices=["heat", "wave"], default="wave")
    ap.add_argument("--levels", type=int, default=4)
    ap.add_argument("--lam", type=float, default=1.0)
    ap.add_argument("--L", type=float, default=9.0)
    args = ap.parse_args()

    vals = []
    for k in range(args.levels):
        dt = 1 / (8 * 2**k)
        if args.equation == "wave":
            eq, dx = Wave(1.0), dt
        else:
            eq, dx = Heat(Brownian(1.0)), 4 * dt
        grid = Grid(dt, dx, 2.0, args.L, int(round(0.5 / dt)))
        f = solve_second_moment(RenewalProblem(eq, args.lam, InitialData(Bump()), grid))
        row = []
        for t, x in PROBES:
            i = int(np.argmin(np.abs(f.times - t)))
            row.append(np.interp(x, f.xs, f.values[i]))
        vals.append(np.array(row))
        print(f"dt=1/{int(round(1 / dt)):<4d} " + "  ".join(f"{v:.8f}" for v in row))

    errs = [np.abs(a - b) for a, b in zip(vals, vals[1:])]
    for k, (e0, e1) in enumerate(zip(errs, errs[1:])):
        print(f"level {k + 1}->{k + 2}: diffs " + "  ".join(f"{v:.2e}" for v in e1)
              + "  order " + "  ".join(f"{v:.2f}" for v in np.log2(e0 / e1)))


if __name__ == "__main__":
    main()
