"""Measure the global convergence order of the trial integrator.

Integrates one noiseless cycle at several step sizes and fits the log-log
slope of final-pose error against a fine-step reference.

Usage: python scripts/rk4_convergence.py [--system pushmepullyou]
"""

import argparse

import numpy as np

from sudsid.simulate import PRESET_GAITS, NoiseSpec, simulate_trial
from sudsid.swimmers import PRESETS, preset_system


def final_pose(system, gait, samples_per_cycle):
    tr = simulate_trial(system, gait, NoiseSpec(5.0, (0.0,)), 1,
                        samples_per_cycle=samples_per_cycle, warmup_cycles=0)
    return np.array(tr.metadata["final_g"])


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--system", choices=list(PRESETS), default="pushmepullyou")
    args = parser.parse_args()

    system, gait = preset_system(args.system), PRESET_GAITS[args.system]
    ref = final_pose(system, gait, 3200)
    spcs = np.array([100, 200, 400, 800])
    errs = np.array([np.abs(final_pose(system, gait, n) - ref).max() for n in spcs])
    for n, e in zip(spcs, errs):
        print(f"dt = T/{n:<4d}  error {e:.3e}")
    slope = np.polyfit(np.log(1.0 / spcs), np.log(errs), 1)[0]
    print(f"observed order {slope:.2f}")


if __name__ == "__main__":
    main()
