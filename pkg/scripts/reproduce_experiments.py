#!/usr/bin/env python3
"""Run every shipped preset (all sweep points) and print a one-line summary per run.

Usage: python3 scripts/reproduce_experiments.py [--out DIR] [--only NAME ...] [--workers N]
"""

import argparse
import os
import sys

import numpy as np

from lvcgp.cli import main as cli_main
from lvcgp.cli import preset_names, preset_text
from lvcgp.config import expand_sweep, parse_config
from lvcgp.model import derive_geometry
from lvcgp.observables import DensityGrid, TimeSeries, node_diagnostic


def summarize(run_dir, cfg):
    s = TimeSeries.read_csv(os.path.join(run_dir, "series.csv"))
    parts = [f"min P_D {np.min(s.P_D):.4f}", f"P_D(end) {s.P_D[-1]:.4f}"]
    for name in sorted(os.listdir(run_dir)):
        if name.startswith("snapshot_"):
            d = node_diagnostic(DensityGrid.read(os.path.join(run_dir, name)), derive_geometry(cfg.subsystem))
            parts.append(f"{name[9:-5]}: strip/baseline {d.ratio:.3f}")
    return ", ".join(parts)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out")
    ap.add_argument("--only", nargs="*", default=None)
    ap.add_argument("--workers", type=int, default=None)
    args = ap.parse_args()
    names = args.only or preset_names()
    status = 0
    for name in names:
        target = os.path.join(args.out, name)
        cfg = parse_config(preset_text(name))
        if name == "perturbative_channels":
            code = cli_main(["tdpt", "--preset", name, "--out", target])
            print(f"{name}: exit {code}, tdpt.csv in {target}")
            status = max(status, code)
            continue
        argv = ["sweep", "--preset", name, "--out", target]
        if args.workers:
            argv += ["--workers", str(args.workers)]
        code = cli_main(argv)
        status = max(status, code)
        for label, ov in expand_sweep(cfg):
            run_dir = os.path.join(target, label)
            if os.path.exists(os.path.join(run_dir, "series.csv")):
                print(f"{name}/{label}: {summarize(run_dir, parse_config(preset_text(name), ov))}")
    return status


if __name__ == "__main__":
    sys.exit(main())
