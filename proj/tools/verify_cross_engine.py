#!/usr/bin/env python3
"""Compare the Monte Carlo and PDE estimates of U written by `xva mc` and `xva pde`.

Passes when |U_mc - U_pde| <= 3 * SE_mc + the PDE Richardson error estimate.
"""
import argparse
import json
import sys


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("mc_json", help="xva_breakdown.json")
    ap.add_argument("pde_json", help="pde_result.json")
    args = ap.parse_args()

    with open(args.mc_json) as f:
        mc = json.load(f)
    with open(args.pde_json) as f:
        pde = json.load(f)

    corrected = [r for r in mc["results"] if r["mode"] == "corrected"]
    if not corrected:
        print("no corrected-mode result in", args.mc_json, file=sys.stderr)
        return 2
    r = corrected[0]
    u_mc, se = r["total"], r["total_std_error"]
    u_pde = pde["u0"]
    pde_err = pde.get("richardson", {}).get("error", 0.0)
    budget = 3.0 * se + pde_err
    diff = abs(u_mc - u_pde)
    ok = diff <= budget
    print(f"U_mc={u_mc:.10g} SE={se:.3g} U_pde={u_pde:.10g} |diff|={diff:.3g} budget={budget:.3g} "
          f"{'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
