"""Run the reference Riemann problem with every estimate monitored and print the verdicts."""

import argparse
from pathlib import Path

from kkscheme.cli import _print_verdicts
from kkscheme.config import load_config
from kkscheme.experiment import verify

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(ROOT / "configs" / "riemann.yaml"))
    ap.add_argument("--override", action="append", default=[])
    args = ap.parse_args()

    cfg = load_config(args.config, args.override)
    out = verify(cfg)
    res, mon = out.main.result, out.main.monitor
    print(f"{res.steps} steps to t={res.final.t:.4g} on {cfg.grid.n_cells} cells ({cfg.integrator.method})")
    print(f"||r||_1: {mon.norms.l1_r[0]:.8f} -> {mon.norms.l1_r[-1]:.8f}")
    print(f"||r||_2: {mon.norms.l2_r[0]:.8f} -> {mon.norms.l2_r[-1]:.8f}")
    print(f"max r:   {mon.norms.linf_r[0]:.8f} -> {mon.norms.linf_r[-1]:.8f}")
    print(f"BV(angle): {mon.angles.bv[0]:.8f} -> {mon.angles.bv[-1]:.8f}")
    b = mon.budget
    print(f"dissipation integrals e1 {b.e1_integral:.4g}, e2 {b.e2_integral:.4g}, "
          f"e3 {b.e3_integral:.4g}; rl1 budget {b.rl1_budget:.4g}")
    print(f"strict norm decay without boundary credit: {mon.strict_norm_decay}")
    print()
    _print_verdicts(out.verdicts)
    return 0 if out.passed else 1


if __name__ == "__main__":
    raise SystemExit(main())
