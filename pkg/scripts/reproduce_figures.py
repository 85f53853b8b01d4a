#!/usr/bin/env python3
"""Run every built-in preset and drop the CSVs under out/figures/.

Each preset writes plot-ready files: the shift sweep at zero switching
rate (both endpoints), the slow-noise shift and spectral-width sweeps,
and the correlated-pixel calibration.
"""
import sys
from pathlib import Path

from ltgsim.cli import PRESETS, main

OUT = Path("out/figures")


def run() -> int:
    for name in sorted(PRESETS):
        code = main(["--preset", name, "--out", str(OUT / name)])
        if code != 0:
            print(f"preset {name} failed with exit code {code}", file=sys.stderr)
            return code
    return 0


if __name__ == "__main__":
    sys.exit(run())
