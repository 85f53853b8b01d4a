#!/usr/bin/env python3
"""Build the correlated-pixel-width table over the default spectral sweep.

Writes out/wcp_table.csv, which transition-spectral runs can consume via
the spectral.table_path config key instead of recomputing the optics.
"""
import sys
from pathlib import Path

from ltgsim.cli import run_config

OUT = Path("out")


def run() -> int:
    files = run_config({"command": "optics-table"})
    OUT.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (OUT / name).write_text(text)
        print(OUT / name)
    return 0


if __name__ == "__main__":
    sys.exit(run())
