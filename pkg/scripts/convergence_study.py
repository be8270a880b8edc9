"""Refinement studies: Riemann self-convergence and exact transport of a bump.

Writes convergence and weak-residual tables under --output.
"""

import argparse
import time
from pathlib import Path

from kkscheme.analysis import dump_json
from kkscheme.config import load_config
from kkscheme.experiment import converge

ROOT = Path(__file__).resolve().parent.parent


def show(name, outcome, seconds):
    print(f"== {name} ({outcome.table.kind}, {seconds:.1f} s)")
    print(f"{'N':>6} {'L1 err r':>11} {'rate':>6}")
    for row in outcome.table.rows():
        print(f"{row['n_cells']:>6} {row['l1_error_r']:>11.4e} {row['rate_r']:>6.3f}")
    for pid, st in outcome.studies.items():
        print(f"weak residual {pid}: u factors {[round(f, 3) for f in st.factors_u]}, "
              f"v factors {[round(f, 3) for f in st.factors_v]}")
    print("passed" if outcome.passed else "FAILED: " + "; ".join(outcome.reasons))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--output", default="out/convergence_study")
    ap.add_argument("--levels", type=int, default=4, help="ladder length starting at 200 cells")
    args = ap.parse_args()
    ladder = [200 * 2**k for k in range(args.levels)]
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)

    ok = True
    for name in ("riemann", "transport"):
        cfg = load_config(ROOT / "configs" / f"{name}.yaml", [("convergence.resolutions", ladder)])
        t0 = time.perf_counter()
        outcome = converge(cfg)
        show(name, outcome, time.perf_counter() - t0)
        outcome.table.write_csv(outdir / f"{name}_convergence.csv")
        dump_json({pid: st.to_dict() for pid, st in outcome.studies.items()},
                  outdir / f"{name}_weak_residual.json")
        ok &= outcome.passed
    return 0 if ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
