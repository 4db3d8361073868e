"""Sweep the drive-noise fraction and report held-out Gamma for one preset.

Usage: python scripts/noise_sweep.py [--system purcell3] [--fractions 0.025 0.05 0.075 0.1 0.15]
"""

import argparse
import tempfile
from pathlib import Path

from sudsid import cli
from sudsid.swimmers import PRESETS


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--system", choices=list(PRESETS), default="purcell3")
    parser.add_argument("--fractions", type=float, nargs="+", default=[0.025, 0.05, 0.075, 0.1, 0.15])
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    print(f"{'fraction':>9}{'G_ghat':>8}{'G_rdot':>8}")
    for fraction in args.fractions:
        raw = cli.preset_config(args.system)
        raw["noise"]["fraction"] = fraction
        raw["run"]["seed"] = args.seed
        cfg = cli.resolve_config(raw)
        with tempfile.TemporaryDirectory() as tmp:
            report = cli.cmd_pipeline(cfg, Path(tmp), log=lambda *_: None)
        print(f"{fraction:>9.3f}{report.gamma_ghat:>8.3f}{report.gamma_rdot:>8.3f}")


if __name__ == "__main__":
    main()
