#!/usr/bin/env python3
"""Run the four checked-in attractor recipes and export their trajectories.

Usage: python scripts/run_figures.py [output_dir]

Writes figN.csv per recipe (columns t, y1, y2, y3) into output_dir
(default ./out).  Plot e.g. y1 vs y2 vs y3 with your tool of choice to see
the phase portraits; this package deliberately ships no plotting code.
"""

import sys
from pathlib import Path

from sfode.cli import main

REPO = Path(__file__).resolve().parent.parent


def run(out_dir: Path) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    worst = 0
    for name in ("fig1", "fig2", "fig3", "fig4"):
        cfg = REPO / "configs" / f"{name}.cfg"
        out = out_dir / f"{name}.csv"
        code = main(["simulate", "--config", str(cfg), "-o", str(out)])
        print(f"{name}: exit {code} -> {out}")
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    target = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("out")
    sys.exit(run(target))
