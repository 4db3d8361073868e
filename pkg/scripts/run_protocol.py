"""Run the train/test identification protocol on every preset and tabulate Gamma.

Usage: python scripts/run_protocol.py [--out runs/protocol] [--seed 0]
"""

import argparse
import time
from pathlib import Path

from sudsid import cli
from sudsid.swimmers import PRESETS


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=Path("runs/protocol"))
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    print(f"{'system':<16}{'G_ghat':>8}{'G_rdot':>8}{'records':>9}{'seconds':>9}")
    for name in PRESETS:
        raw = cli.preset_config(name)
        raw["run"]["seed"] = args.seed
        cfg = cli.resolve_config(raw)
        t0 = time.perf_counter()
        report = cli.cmd_pipeline(cfg, args.out / name, log=lambda *_: None)
        elapsed = time.perf_counter() - t0
        print(f"{name:<16}{report.gamma_ghat:>8.3f}{report.gamma_rdot:>8.3f}{report.m:>9d}{elapsed:>9.1f}")


if __name__ == "__main__":
    main()
