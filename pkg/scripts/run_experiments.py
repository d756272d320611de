"""Run every canned experiment and write the results under one directory."""
from __future__ import annotations

import argparse
import time
from pathlib import Path

from tewa import experiments


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default="results", help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--only", nargs="*", choices=experiments.EXPERIMENTS, help="subset to run")
    args = p.parse_args(argv)

    root = Path(args.out)
    for name in args.only or experiments.EXPERIMENTS:
        t0 = time.perf_counter()
        files = experiments.experiment(name, args.seed, root / name)
        print(f"{name}: {len(files)} files in {time.perf_counter() - t0:.1f}s -> {root / name}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
