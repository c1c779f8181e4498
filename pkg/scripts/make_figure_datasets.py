#!/usr/bin/env python3
"""Regenerate every figure dataset into an output directory.

Usage: python scripts/make_figure_datasets.py [outdir]

Produces one CSV per figure key (analytic bound curves for r=3 and r=1,
the same curves pushed through one Reed-Muller round, and the overhead
comparison at targets 1e-8 / 1e-12 / 1e-16).  Every file embeds its full
parameter header and can be re-created byte-identically with
``biasforge replay <file>``.
"""

import pathlib
import sys

from biasforge.cli import SWEEP_FIGURES, main

outdir = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "figure_data")
outdir.mkdir(parents=True, exist_ok=True)

for figure in SWEEP_FIGURES:
    out = outdir / f"{figure}.csv"
    code = main(["sweep", "--figure", figure, "--out", str(out), "--points", "25"])
    if code != 0:
        sys.exit(code)
    print(f"wrote {out}")
