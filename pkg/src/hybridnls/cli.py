"""Command line entry point: ``hnls run|lab|compare|sweep``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings

from .config import load_lab_config, load_run_config
from .errors import GridMismatch, HNLSError, InvalidConfig, InvalidField, InvalidParameter
from .runner import EXIT_CODES, EXIT_CONFIG, compare, lab, run, sweep


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hnls", description="Hybrid line + torus NLS runs and estimate checks.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="evolve one scenario and write ledger, checkpoints and manifest")
    r.add_argument("config")
    la = sub.add_parser("lab", help="run the randomized estimate checks")
    la.add_argument("config")
    c = sub.add_parser("compare", help="distances between two checkpoints")
    c.add_argument("a")
    c.add_argument("b")
    s = sub.add_parser("sweep", help="run every matching config in parallel")
    s.add_argument("pattern")
    s.add_argument("-j", "--jobs", type=int, default=None)
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "run":
            with warnings.catch_warnings():
                warnings.simplefilter("ignore" if not args.verbose else "default", RuntimeWarning)
                cfg, defaulted = load_run_config(args.config)
            outcome = run(cfg, defaulted)
            code = outcome.exit_code
            status = "ok" if code == 0 else EXIT_CODES[code]
            print(f"{status}: {outcome.out_dir / 'manifest.json'}")
            for f in outcome.manifest.failures:
                print(f"  [{f['code']}] {f['message']}", file=sys.stderr)
            return code
        if args.command == "lab":
            for lemma, path in lab(load_lab_config(args.config)).items():
                print(f"{lemma}: {path}")
            return 0
        if args.command == "compare":
            print(json.dumps(compare(args.a, args.b), indent=2))
            return 0
        results = sweep(args.pattern, args.jobs)
        for path, code in results:
            print(f"{code} {path}")
        return max(code for _, code in results)
    except (InvalidConfig, InvalidParameter, GridMismatch, InvalidField) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (HNLSError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
