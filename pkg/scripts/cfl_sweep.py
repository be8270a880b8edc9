"""How the monitored estimates respond to the CFL number, including unsafe values above 1."""

import argparse
from pathlib import Path

from kkscheme.config import load_config
from kkscheme.experiment import build_problem, run

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cfl", type=float, nargs="+", default=[0.25, 0.5, 0.9, 1.0, 1.1, 1.2, 1.5])
    ap.add_argument("--method", default="ssprk3")
    ap.add_argument("--t-end", type=float, default=0.2)
    args = ap.parse_args()

    print(f"{'cfl':>5} {'steps':>6} {'max r growth':>13} {'min u,v':>10} {'BV growth':>10} verdicts")
    for cfl in args.cfl:
        cfg = load_config(ROOT / "configs" / "riemann.yaml", [
            ("integrator.cfl", cfl), ("integrator.allow_unsafe_cfl", True),
            ("integrator.method", args.method), ("integrator.t_end", args.t_end),
        ])
        out = run(build_problem(cfg))
        mon = out.monitor
        w = mon.worst_margins()
        failed = [v.name for v in mon.verdicts() if not v.passed]
        growth = max(mon.norms.linf_r) - mon.norms.linf_r[0]
        bv = max(mon.angles.bv) - mon.angles.bv[0]
        min_uv = -(w["positivity"][0] + cfg.diagnostics.slack.positivity)
        status = "aborted" if out.result.aborted else ("all pass" if not failed else ", ".join(failed))
        print(f"{cfl:>5.2f} {out.result.steps:>6d} {growth:>13.3e} {min_uv:>10.3g} {bv:>10.3e} {status}")


if __name__ == "__main__":
    raise SystemExit(main())
