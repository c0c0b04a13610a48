"""Reduced ``thm25`` ensemble against the closed-form moment curves.

    python demos/ensemble_bounds.py [--paths 512] [--workers 1]
"""

import argparse

from thinfilm.asymptotics import energy_bound, mass_moment2
from thinfilm.functionals import energy, mass
from thinfilm.montecarlo import run_ensemble
from thinfilm.presets import get_preset


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--paths", type=int, default=512)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    cfg = get_preset("thm25").replace(paths=args.paths).build_ensemble(workers=args.workers)
    st = run_ensemble(cfg)
    s, m0, e0 = cfg.splitting, mass(cfg.u0), energy(cfg.u0)
    print(f"{'t':>5} {'E mass^2':>10} {'exact':>10} {'E energy':>10} {'bound':>10} {'E sup_dev^2':>12}")
    for i, t in enumerate(st.times):
        print(f"{t:5.1f} {st.column('mass2')[i]:10.4f} {mass_moment2(s.gamma, s.alpha, m0, t):10.4f} "
              f"{st.column('energy')[i]:10.3e} {energy_bound(s.gamma, s.alpha, e0, t):10.3e} "
              f"{st.column('sup_dev2')[i]:12.3e}")


if __name__ == "__main__":
    main()
