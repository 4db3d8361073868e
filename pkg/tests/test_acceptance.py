"""Acceptance criteria, one check per criterion.

Each check returns ``(passed, detail)``.  Under pytest every criterion
prints one PASS/FAIL line; ``python tests/test_acceptance.py`` prints all
ten and exits nonzero if any fails.
"""

import math
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from sudsid import cli, sysid
from sudsid.geometry import GroupElement
from sudsid.mechanics import passive_resistance, random_states, shape_metric, suds_velocity
from sudsid.phase import estimate_phase
from sudsid.simulate import PRESET_GAITS, NoiseSpec, default_noise, simulate_trial
from sudsid.swimmers import PRESETS, linear_passive_swimmer_solve, preset_system

SYSTEMS = tuple(PRESETS)
SEED = 20240601


def check_oracle_equivalence():
    lp = preset_system("linear_passive")
    rng = np.random.default_rng(SEED)
    states = random_states(lp, rng, 1000)
    rdots = rng.normal(size=1000)
    t0 = time.perf_counter()
    worst = 0.0
    for s, u in zip(states, rdots):
        v = suds_velocity(lp, s, [u])
        xdot, _, rdot_1 = linear_passive_swimmer_solve(lp.params, s, u)
        worst = max(worst, abs(v.ghat_vec[0] - xdot), abs(v.rdot_p[0] - rdot_1))
    elapsed = time.perf_counter() - t0
    return worst < 1e-8 and elapsed < 1.0, f"max |diff| {worst:.2e} over 1000 states in {elapsed:.2f} s"


def check_affinity():
    rng = np.random.default_rng(SEED + 1)
    worst = 0.0
    for name in SYSTEMS:
        system = preset_system(name)
        for s in random_states(system, rng, 100):
            u, v = rng.normal(size=(2, system.dims.n_a))
            lam = rng.uniform(-2, 3)
            y = [suds_velocity(system, s, x).output for x in (u, v, u + lam * (v - u))]
            worst = max(worst, np.abs(y[2] - y[0] - lam * (y[1] - y[0])).max())
    return worst < 1e-9, f"max collinearity residual {worst:.2e} (4 systems x 100 probes)"


def check_positive_definite():
    rng = np.random.default_rng(SEED + 2)
    lo_M = lo_P = math.inf
    for name in SYSTEMS:
        system = preset_system(name)
        for s in random_states(system, rng, 1000):
            lo_M = min(lo_M, np.linalg.eigvalsh(shape_metric(system, s).M).min())
            lo_P = min(lo_P, np.linalg.eigvalsh(passive_resistance(system, s)).min())
    return lo_M > 0 and lo_P > 0, f"min eig M {lo_M:.3e}, min eig M_pp + F_p {lo_P:.3e} (4 x 1000 shapes)"


def check_dissipativity():
    rng = np.random.default_rng(SEED + 3)
    violations, worst = 0, -math.inf
    for name in SYSTEMS:
        system = preset_system(name)
        for s in random_states(system, rng, 10_000):
            rdot = rng.normal(size=system.dims.n)
            power = -(shape_metric(system, s).M @ rdot) @ rdot
            violations += power > 0
            worst = max(worst, power)
    return violations == 0, f"{violations} violations of tau.rdot <= 0 in 4 x 10^4 samples (max {worst:.3e})"


def run_protocol(name, out_dir):
    cfg = cli.resolve_config(cli.preset_config(name))
    t0 = time.perf_counter()
    report = cli.cmd_pipeline(cfg, Path(out_dir), log=lambda *_: None)
    return report, time.perf_counter() - t0


def check_protocol_identification():
    ok, parts = True, []
    for name in SYSTEMS:
        with tempfile.TemporaryDirectory() as tmp:
            report, elapsed = run_protocol(name, tmp)
            records = cli.read_trajectory(Path(tmp) / "train.csv").n_records
        g, r = report.gamma_ghat, report.gamma_rdot
        passed = g > 0 and r > 0 and g >= 0.25 and r >= 0.25 and elapsed < 60 and report.m == records == 3000
        ok &= passed
        parts.append(f"{name} G_ghat={g:.3f} G_rdot={r:.3f} {elapsed:.1f}s")
    return ok, "; ".join(parts)


def check_planted_recovery():
    narrow = sysid.FitConfig(bandwidth=2 * math.pi / 64 / 8)
    errs = []
    for sigma in (1e-3, 0.0):
        data, truth = sysid.planted_dataset(2, 1, sigma_out=sigma, rng=np.random.default_rng(SEED + 4))
        model = sysid.fit(data, narrow)
        errs.append(float(np.sqrt(np.mean((model.coef - truth) ** 2))))
    return errs[0] < 1e-2 and errs[1] < 1e-6, f"coef RMS error {errs[0]:.2e} (sigma 1e-3), {errs[1]:.2e} (sigma 0)"


def check_regressor_scaling():
    lengths = {}
    for name in ("purcell3", "purcell9"):
        dims = preset_system(name).dims
        lengths[name] = len(sysid.build_regressors(np.zeros(dims.n), np.zeros(dims.n_a)))
    narrow = sysid.FitConfig(bandwidth=2 * math.pi / 64 / 8)

    def fit_time(n_p, n_a=1):
        data, _ = sysid.planted_dataset(n_a + n_p, n_a, cycles=120, rng=np.random.default_rng(SEED + 5))
        best = math.inf
        for _ in range(3):
            t0 = time.perf_counter()
            sysid.fit(data, narrow)
            best = min(best, time.perf_counter() - t0)
        return best

    t8, t16 = fit_time(8), fit_time(16)
    exponent = math.log2(t16 / t8)
    ok = lengths == {"purcell3": 6, "purcell9": 45} and exponent < 2.0
    return ok, f"features {lengths['purcell3']} and {lengths['purcell9']}; fit time exponent in n_p {exponent:.2f}"


def check_group_equivariance():
    worst = 0.0
    g0 = GroupElement(3.0, -2.0, 1.1)
    for name in SYSTEMS:
        system, gait = preset_system(name), PRESET_GAITS[name]
        noise = default_noise(gait)
        a = simulate_trial(system, gait, noise, 2, rng=np.random.default_rng(SEED + 6))
        b = simulate_trial(system, gait, noise, 2, g0=g0, rng=np.random.default_rng(SEED + 6))
        worst = max(worst, np.abs(a.ghat - b.ghat).max(), np.abs(a.r - b.r).max(),
                    np.abs(a.rdot - b.rdot).max())
    return worst < 1e-10, f"max body-frame difference {worst:.2e} across 4 systems"


def check_integrator_order():
    system, gait = preset_system("pushmepullyou"), PRESET_GAITS["pushmepullyou"]
    quiet = NoiseSpec(5.0, (0.0,))

    def pose(spc):
        tr = simulate_trial(system, gait, quiet, 1, samples_per_cycle=spc, warmup_cycles=0)
        return np.array(tr.metadata["final_g"])

    ref = pose(3200)
    spcs = np.array([100, 200, 400, 800])
    errs = np.array([np.abs(pose(n) - ref).max() for n in spcs])
    slope = np.polyfit(np.log(1.0 / spcs), np.log(errs), 1)[0]
    return slope >= 3.7, f"log-log slope {slope:.2f}, errors {', '.join(f'{e:.1e}' for e in errs)}"


def check_phase_contract():
    system, gait = preset_system("purcell3"), PRESET_GAITS["purcell3"]
    tr = simulate_trial(system, gait, NoiseSpec(5.0, (0.0,)), 30)
    ph = estimate_phase(tr.r, dt=tr.metadata["dt"])
    drive = tr.r_ref[:, 0] - np.mean(tr.r_ref[:, 0])
    cycles = int(np.sum((drive[:-1] < 0) & (drive[1:] >= 0)))
    rate_err = abs(ph.rate / gait.freq - 1.0)
    ok = abs(ph.winding - cycles) < 1e-3 and rate_err < 0.02
    return ok, f"winding {ph.winding:.6f} vs {cycles} drive cycles; rate error {100 * rate_err:.3f}%"


CRITERIA = [
    (1, "oracle equivalence", check_oracle_equivalence),
    (2, "affinity of dynamics", check_affinity),
    (3, "positive-definiteness", check_positive_definite),
    (4, "dissipativity", check_dissipativity),
    (5, "train/test protocol identification", check_protocol_identification),
    (6, "planted-model recovery", check_planted_recovery),
    (7, "regressor scaling", check_regressor_scaling),
    (8, "group equivariance", check_group_equivariance),
    (9, "integrator order", check_integrator_order),
    (10, "phase estimator contract", check_phase_contract),
]


def verdict_line(number, title, passed, detail):
    return f"[{'PASS' if passed else 'FAIL'}] criterion {number} ({title}): {detail}"


@pytest.mark.slow
@pytest.mark.parametrize("number, title, check", CRITERIA, ids=[f"criterion{n}" for n, *_ in CRITERIA])
def test_criterion(number, title, check, capsys):
    passed, detail = check()
    with capsys.disabled():
        print("\n" + verdict_line(number, title, passed, detail))
    assert passed, detail


if __name__ == "__main__":
    failures = 0
    for number, title, check in CRITERIA:
        passed, detail = check()
        failures += not passed
        print(verdict_line(number, title, passed, detail), flush=True)
    sys.exit(1 if failures else 0)
