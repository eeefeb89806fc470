#!/usr/bin/env python3
"""Emit the plot data for every demonstration figure into one directory.

Usage:
    python scripts/reproduce_figures.py [--outdir OUT] [--seed N] [--tol TOL]

Each figure lands in OUT/<figure_id>/ with a manifest.json describing the
files; see `twinbeam reproduce --help` for the per-figure CLI.
"""

import argparse
import time

from twinbeam import FIGURE_IDS, reproduce


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--outdir", default="figure-data")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--tol", type=float, default=1e-10)
    parser.add_argument("--figures", nargs="*", default=list(FIGURE_IDS),
                        choices=FIGURE_IDS)
    args = parser.parse_args()

    for figure_id in args.figures:
        start = time.monotonic()
        manifest = reproduce(figure_id, args.outdir, seed=args.seed, tol=args.tol)
        names = ", ".join(entry["path"] for entry in manifest["files"])
        print(f"{figure_id}: {len(manifest['files'])} files in "
              f"{time.monotonic() - start:.1f}s ({names})")


if __name__ == "__main__":
    main()
