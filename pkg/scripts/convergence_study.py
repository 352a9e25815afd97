"""Time-step refinement study for one run config.

Runs the config at dt, dt/2, ..., dt/2^(levels-1) and prints the drift of
each conserved quantity, the dH/dt vs int R residual, and the observed
order between consecutive levels.

    python3 scripts/convergence_study.py configs/gaussian_p3.ini --levels 3
"""

import argparse
import dataclasses
import math
import tempfile

import numpy as np

from hybridnls.config import load_run_config
from hybridnls.runner import run


def measures(ledger, dt):
    hm_ref = max(abs(ledger.hybrid_mass[0]), ledger.mass_v[0]) or 1.0
    H, R = ledger.hamiltonian_h, ledger.remainder_integral
    fd = (H[2:] - H[:-2]) / (2 * dt)
    r_scale = float(np.max(np.abs(R))) or 1.0

    def drift(x, ref):
        return float(np.max(np.abs(x - x[0]))) / ref

    return {
        "torus_energy": drift(ledger.energy_w, ledger.energy_w[0]),
        "torus_mass": drift(ledger.mass_w, ledger.mass_w[0]),
        "hybrid_mass": drift(ledger.hybrid_mass, hm_ref),
        "dH_vs_intR": float(np.max(np.abs(fd - R[1:-1]))) / r_scale,
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--levels", type=int, default=3)
    args = ap.parse_args()
    cfg, _ = load_run_config(args.config)
    rows = []
    with tempfile.TemporaryDirectory() as tmp:
        for level in range(args.levels):
            dt = cfg.dt / 2**level
            c = dataclasses.replace(cfg, dt=dt, solver_mode="strang", output_dir=f"{tmp}/l{level}")
            out = run(c)
            rows.append((dt, measures(out.ledger, dt), out.exit_code))
    names = list(rows[0][1])
    print("dt".ljust(12) + "".join(n.rjust(16) for n in names) + "  exit")
    for dt, m, code in rows:
        print(f"{dt:<12.4g}" + "".join(f"{m[n]:16.3e}" for n in names) + f"  {code}")
    for (dt0, a, _), (_, b, _) in zip(rows, rows[1:]):
        orders = [math.log2(a[n] / b[n]) if a[n] > 0 and b[n] > 0 else math.nan for n in names]
        print(f"order {dt0:<6.3g}" + "".join(f"{o:16.2f}" for o in orders))


if __name__ == "__main__":
    main()
