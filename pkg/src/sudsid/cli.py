"""Command-line pipeline: simulate trials, fit models, evaluate Gamma.

    sudsid simulate --config purcell3 --out runs/p3
    sudsid fit --train runs/p3/train.csv --out runs/p3
    sudsid evaluate --model runs/p3/model.json --test runs/p3/test.csv --out runs/p3
    sudsid pipeline --config purcell9 --out runs/p9

``--config`` takes a JSON file or the name of a shipped preset.  Exit code 0
on success, 1 on usage or input errors, 2 on numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import sysid
from .errors import ConfigError, InsufficientCoverage, NumericalError
from .phase import NominalGait, deviations, estimate_phase, fit_nominal
from .simulate import (
    DEFAULT_ATTRACTION, DEFAULT_NOISE_FRACTION, GaitSpec, NoiseSpec, Trajectory,
    _atomic_write, default_noise, read_metadata, read_trajectory, simulate_trial, write_trajectory,
)
from .swimmers import PRESETS, build_system, params_from_dict

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2


@dataclass(frozen=True)
class RunConfig:
    system: dict
    gait: GaitSpec
    noise: NoiseSpec
    cycles_train: int = 30
    cycles_test: int = 30
    samples_per_cycle: int = 100
    warmup_cycles: int = 2
    seed: int = 0
    fourier_order: int = 7
    n_bins: int = 64
    bandwidth: float = 2 * math.pi / 16
    ridge: float = 1e-8

    def __post_init__(self):
        for name in ("cycles_train", "cycles_test", "samples_per_cycle", "n_bins", "fourier_order"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.warmup_cycles < 0:
            raise ConfigError("warmup_cycles must be non-negative")

    @property
    def fit_config(self) -> sysid.FitConfig:
        return sysid.FitConfig(n_bins=self.n_bins, bandwidth=self.bandwidth, ridge=self.ridge)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gait"], d["noise"] = asdict(self.gait), asdict(self.noise)
        return d


def preset_config(name: str) -> dict:
    return json.loads(resources.files("sudsid").joinpath("presets", f"{name}.json").read_text())


def read_config_source(source: str) -> dict:
    if source in PRESETS:
        return preset_config(source)
    path = Path(source)
    if not path.is_file():
        raise ConfigError(f"{source!r} is neither a config file nor a preset ({', '.join(PRESETS)})")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc


def resolve_config(raw: dict, args: argparse.Namespace = None) -> RunConfig:
    """Merge a config mapping with command-line overrides."""
    if "system" not in raw:
        raise ConfigError("config needs a 'system' section")
    system = raw["system"]
    params_from_dict(system)  # validate early
    variant = system["variant"]
    gait_d = raw.get("gait") or (preset_config(variant)["gait"] if variant in PRESETS else None)
    if gait_d is None:
        raise ConfigError("config needs a 'gait' section")
    try:
        gait = GaitSpec(**gait_d)
    except TypeError as exc:
        raise ConfigError(f"bad gait section: {exc}") from exc
    noise_d = dict(raw.get("noise", {}))
    run_d = dict(raw.get("run", {}))
    fit_d = dict(raw.get("fit", {}))

    def pick(name, section, default):
        val = getattr(args, name, None) if args is not None else None
        return section.get(name, default) if val is None else val

    lam = float(pick("lambda_", {"lambda_": noise_d.get("attraction_rate", DEFAULT_ATTRACTION)}, None))
    seed = int(pick("seed", run_d, 0))
    sigma = pick("sigma", noise_d, None)
    if sigma is None:
        noise = default_noise(gait, lam, float(noise_d.get("fraction", DEFAULT_NOISE_FRACTION)), seed)
    else:
        noise = NoiseSpec(lam, tuple(np.atleast_1d(sigma).astype(float)), seed)
    try:
        return RunConfig(
            system=system, gait=gait, noise=noise,
            cycles_train=int(pick("cycles_train", run_d, 30)),
            cycles_test=int(pick("cycles_test", run_d, 30)),
            samples_per_cycle=int(pick("samples_per_cycle", run_d, 100)),
            warmup_cycles=int(run_d.get("warmup_cycles", 2)),
            seed=seed,
            fourier_order=int(pick("fourier_order", fit_d, 7)),
            n_bins=int(pick("bins", {"bins": fit_d.get("n_bins", 64)}, None)),
            bandwidth=float(pick("bandwidth", fit_d, 2 * math.pi / 16)),
            ridge=float(pick("ridge", fit_d, 1e-8)),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad run config: {exc}") from exc


# ---------------------------------------------------------------------------
# commands

def trial_summary(traj: Trajectory) -> dict:
    cycles = traj.metadata["n_cycles"]
    disp = traj.metadata["final_g"][:2]
    start = traj.g[0, :2]
    dev = traj.r_a - traj.r_ref
    return dict(records=traj.n_records,
                net_x_per_cycle=float((disp[0] - start[0]) / cycles),
                net_displacement_per_cycle=float(np.hypot(*(np.asarray(disp) - start)) / cycles),
                deviation_std=float(dev.std()))


def cmd_simulate(cfg: RunConfig, out: Path, log=print) -> dict:
    system = build_system(params_from_dict(cfg.system))
    train_ss, test_ss = np.random.SeedSequence(cfg.seed).spawn(2)
    summary = {}
    paths = {}
    for name, ss, cycles in (("train", train_ss, cfg.cycles_train), ("test", test_ss, cfg.cycles_test)):
        traj = simulate_trial(system, cfg.gait, cfg.noise, cycles, cfg.samples_per_cycle,
                              cfg.warmup_cycles, rng=np.random.default_rng(ss))
        paths[name] = write_trajectory(traj, out / f"{name}.csv")
        summary[name] = trial_summary(traj)
        s = summary[name]
        log(f"{name}: {s['records']} records, net displacement/cycle {s['net_displacement_per_cycle']:.6g} "
            f"(x {s['net_x_per_cycle']:.6g}), deviation std {s['deviation_std']:.3g}")
    _atomic_write(out / "run_config.json", json.dumps(cfg.to_dict(), indent=2) + "\n")
    return dict(summary=summary, paths=paths)


def fit_trajectory(traj: Trajectory, cfg: RunConfig):
    phases = estimate_phase(traj.r, dt=traj.metadata.get("dt"))
    nominal = fit_nominal(traj, phases, cfg.fourier_order)
    data = deviations(traj, nominal, phases)
    model = sysid.fit(data, cfg.fit_config, nominal)
    return nominal, model, data


def fit_report(model: sysid.SudsModel) -> dict:
    d = model.diagnostics
    return dict(n_bins=len(model.centers), n_features=model.n_features,
                feature_formula=sysid.feature_count(model.n, model.n_a),
                n=model.n, n_a=model.n_a, n_out=model.n_out,
                rank_deficient_bins=[int(b) for b in np.flatnonzero(d.rank_deficient)],
                weak_columns=d.weak_columns,
                residual_rms=d.residual_rms.tolist(),
                min_effective_samples=float(d.effective_samples.min()),
                nominal_residual_rms=model.nominal.residual_rms if model.nominal else None)


def cmd_fit(cfg: RunConfig, train: Path, out: Path, log=print) -> dict:
    traj = read_trajectory(train)
    nominal, model, _ = fit_trajectory(traj, cfg)
    _atomic_write(out / "nominal.json", json.dumps(nominal.to_dict()) + "\n")
    model.save(out / "model.json")
    report = fit_report(model)
    _atomic_write(out / "fit_report.json", json.dumps(report, indent=2) + "\n")
    log(f"fit: {report['n_bins']} bins, {report['n_features']} features "
        f"(1 + n + n_a + n*n_a = {report['feature_formula']}), "
        f"{len(report['rank_deficient_bins'])} rank-deficient bins")
    return dict(model=model, nominal=nominal, report=report)


def load_nominal(path) -> NominalGait:
    try:
        return NominalGait.from_dict(json.loads(Path(path).read_text()))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read nominal gait {path}: {exc}") from exc


def evaluate_trajectory(model: sysid.SudsModel, nominal: NominalGait, traj: Trajectory) -> sysid.EvaluationReport:
    if nominal.estimator is None:
        raise ConfigError("nominal gait carries no phase estimator")
    if traj.r.shape[1] != nominal.n or traj.group_dim != nominal.group_dim:
        raise ConfigError(f"test data has n={traj.r.shape[1]}, group_dim={traj.group_dim}; "
                          f"model expects n={nominal.n}, group_dim={nominal.group_dim}")
    phases = estimate_phase(traj.r, dt=traj.metadata.get("dt"), estimator=nominal.estimator)
    return sysid.evaluate(model, nominal, deviations(traj, nominal, phases))


def cmd_evaluate(model_path: Path, nominal_path, test: Path, out: Path, log=print) -> sysid.EvaluationReport:
    model = sysid.SudsModel.load(model_path)
    nominal = model.nominal if nominal_path is None else load_nominal(nominal_path)
    if nominal is None:
        raise ConfigError("no nominal gait given and none stored in the model")
    report = evaluate_trajectory(model, nominal, read_trajectory(test))
    report.write(out / "report.json", out / "residuals.csv")
    rdot = "n/a" if report.gamma_rdot is None else f"{report.gamma_rdot:.4f}"
    log(f"evaluate: m={report.m}, Gamma_ghat={report.gamma_ghat:.4f}, Gamma_rdot={rdot}")
    return report


def cmd_pipeline(cfg: RunConfig, out: Path, log=print) -> sysid.EvaluationReport:
    sim = cmd_simulate(cfg, out, log)
    cmd_fit(cfg, sim["paths"]["train"], out, log)
    return cmd_evaluate(out / "model.json", out / "nominal.json", sim["paths"]["test"], out, log)


# ---------------------------------------------------------------------------
# argument parsing

class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="config JSON path or preset name (" + ", ".join(PRESETS) + ")")
    common.add_argument("--seed", type=int)
    common.add_argument("--cycles-train", type=int, dest="cycles_train")
    common.add_argument("--cycles-test", type=int, dest="cycles_test")
    common.add_argument("--samples-per-cycle", type=int, dest="samples_per_cycle")
    common.add_argument("--sigma", type=float, help="OU diffusion for every actuated joint (0 = noiseless)")
    common.add_argument("--lambda", type=float, dest="lambda_", help="OU attraction rate")
    common.add_argument("--fourier-order", type=int, dest="fourier_order")
    common.add_argument("--bins", type=int)
    common.add_argument("--bandwidth", type=float)
    common.add_argument("--ridge", type=float)
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")

    parser = _Parser(prog="sudsid", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="simulate train and test trials")
    p = sub.add_parser("fit", parents=[common], help="fit nominal gait and per-phase model")
    p.add_argument("--train", type=Path, required=True)
    p = sub.add_parser("evaluate", parents=[common], help="score a model on held-out data")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--nominal", type=Path, help="nominal gait JSON (default: the one stored in the model)")
    p.add_argument("--test", type=Path, required=True)
    sub.add_parser("pipeline", parents=[common], help="simulate, fit and evaluate")
    return parser


def _config_from_args(args, fallback: dict = None) -> RunConfig:
    if args.config is None:
        if fallback is None:
            raise UsageError(f"sudsid {args.command}: error: --config is required")
        raw = fallback
    else:
        raw = read_config_source(args.config)
    return resolve_config(raw, args)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    out = args.out
    try:
        if args.command == "simulate":
            cmd_simulate(_config_from_args(args), out)
        elif args.command == "fit":
            meta = read_metadata(args.train) if args.config is None else None
            fallback = None if meta is None else {"system": meta["system"], "gait": meta["gait"]}
            cmd_fit(_config_from_args(args, fallback), args.train, out)
        elif args.command == "evaluate":
            cmd_evaluate(args.model, args.nominal, args.test, out)
        else:
            cmd_pipeline(_config_from_args(args), out)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except InsufficientCoverage as exc:
        print(f"error: {exc}; bins {exc.bins}", file=sys.stderr)
        return EXIT_NUMERICAL
    except NumericalError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
