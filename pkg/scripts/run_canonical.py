"""Run every registry experiment and write its report under OUT/<name>/."""
import argparse
import sys
import time
from pathlib import Path

from colombeau_lab.experiments import execute, registry, registry_config


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/canonical")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("names", nargs="*", help="subset of registry names (default: all)")
    args = ap.parse_args(argv)
    names = args.names or list(registry())
    failed = []
    for name in names:
        t0 = time.perf_counter()
        res = execute(registry_config(name), Path(args.out) / name, args.threads)
        print(f"{name:16s} {'PASS' if res.passed else 'FAIL'}  {time.perf_counter() - t0:6.1f}s", flush=True)
        if not res.passed:
            failed.append(name)
    return 2 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
