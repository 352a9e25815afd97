"""Run every desk config and tabulate the manifests.

    python3 scripts/desk_runs.py "configs/*.ini" --out out/desk -j 1
"""

import argparse
import json
from pathlib import Path

from hybridnls.config import load_lab_config
from hybridnls.errors import InvalidConfig
from hybridnls.runner import sweep

RESULT_KEYS = ("sup_mass_plus_energy_v", "hybrid_mass_drift", "torus_energy_drift", "plane_wave_l2_error")


def is_run_config(path: str) -> bool:
    """Lab configs share the format; tell them apart by their keys."""
    try:
        load_lab_config(path)
        return False
    except InvalidConfig:
        return True


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("pattern", nargs="?", default="configs/*.ini")
    ap.add_argument("--out", default="out/desk")
    ap.add_argument("-j", "--jobs", type=int, default=1)
    args = ap.parse_args()
    runs = [p for p in sorted(Path().glob(args.pattern)) if is_run_config(str(p))]
    if not runs:
        raise SystemExit("no run configs match")
    link = Path(args.out) / "_configs"
    link.mkdir(parents=True, exist_ok=True)
    for p in runs:
        (link / p.name).write_text(p.read_text())
    results = sweep(str(link / "*.ini"), args.jobs, args.out)
    print(f"{'config':<20}{'exit':>5}{'wall s':>9}  results")
    for path, code in results:
        m = json.loads((Path(args.out) / Path(path).stem / "manifest.json").read_text())
        res = "  ".join(f"{k}={m['results'][k]:.3e}" for k in RESULT_KEYS if k in m["results"])
        print(f"{Path(path).stem:<20}{code:>5}{m['wall_seconds']:>9.1f}  {res}")
        for f in m["failures"]:
            print(f"{'':<20}  [{f['code']}] {f['message']}")


if __name__ == "__main__":
    main()
