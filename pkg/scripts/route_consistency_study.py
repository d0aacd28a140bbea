"""Cross-check the three evaluation routes for ltilde(t, lam).

Tabulates the closed form (where available), the fixed-Talbot inversion,
and a Monte Carlo estimate with its standard error over a (t, lam) grid.

Usage: python scripts/route_consistency_study.py [n_samples]
"""

import sys

import fracsphere.symbols as sym
from fracsphere.timechange import ltilde, ltilde_mc


def main(n=20000):
    n = int(n)
    symbols = [sym.stable(0.6), sym.tempered_stable(0.5, 1.0),
               sym.gamma_subordinator()]
    print(f"{'symbol':16s} {'t':>4s} {'lam':>5s} {'closed':>10s} "
          f"{'talbot':>10s} {'mc':>10s} {'mc_se':>8s}")
    for seed, phi in enumerate(symbols, start=1):
        for t in (0.5, 1.0, 2.0):
            for lam in (0.5, 2.0):
                lp = ltilde(phi, t, lam, "laplace")
                try:
                    cf = f"{ltilde(phi, t, lam, 'closed_form'):10.6f}"
                except Exception:
                    cf = " " * 10
                mc, se = ltilde_mc(phi, t, lam, n, seed, n_steps=2000)
                print(f"{phi.kind:16s} {t:4.1f} {lam:5.1f} {cf} "
                      f"{lp:10.6f} {mc:10.6f} {se:8.1e}")


if __name__ == "__main__":
    main(*sys.argv[1:])
