"""Regenerate ``tests/golden/thm25_pilot.json`` from the ``thm25`` preset.

The pilot fixes the threshold for the ensemble mean of ``sup_dev^2`` at
``t = 10`` and records the means so later runs can be compared with it.

    python demos/make_golden.py [--workers 4]
"""

import argparse
import json
import pathlib
import time

from thinfilm.montecarlo import run_ensemble
from thinfilm.presets import get_preset

GOLDEN = pathlib.Path(__file__).resolve().parents[1] / "tests" / "golden" / "thm25_pilot.json"
THRESHOLD = 1e-3


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    preset = get_preset("thm25")
    start = time.perf_counter()
    stats = run_ensemble(preset.build_ensemble(workers=args.workers))
    elapsed = time.perf_counter() - start
    out = {
        "preset": json.loads(preset.to_json()),
        "threshold_t10": THRESHOLD,
        "times": [float(t) for t in stats.times],
        "sup_dev2_mean": [float(x) for x in stats.column("sup_dev2")],
        "sup_dev2_se": [float(x) for x in stats.column("sup_dev2", "se")],
    }
    GOLDEN.write_text(json.dumps(out, indent=2) + "\n")
    i1, i10 = stats.index_of(1.0), stats.index_of(10.0)
    print(f"{elapsed:.1f} s; mean sup_dev^2: t=1 {out['sup_dev2_mean'][i1]:.4g}, t=10 {out['sup_dev2_mean'][i10]:.4g}")


if __name__ == "__main__":
    main()
