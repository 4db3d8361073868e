import json

import numpy as np
import pytest

from sudsid import cli
from sudsid.simulate import read_trajectory
from sudsid.swimmers import PRESETS

SHORT = ["--cycles-train", "6", "--cycles-test", "6"]


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("p3")
    assert cli.main(["pipeline", "--config", "purcell3", "--out", str(out), "--seed", "4"] + SHORT) == 0
    return out


def test_pipeline_outputs(run_dir):
    for name in ("train.csv", "train.json", "test.csv", "test.json", "model.json", "nominal.json",
                 "fit_report.json", "report.json", "residuals.csv", "run_config.json"):
        assert (run_dir / name).is_file(), name
    assert read_trajectory(run_dir / "train.csv").n_records == 600
    report = json.loads((run_dir / "fit_report.json").read_text())
    assert report["n_features"] == report["feature_formula"] == 6
    assert report["n_bins"] == 64
    gamma = json.loads((run_dir / "report.json").read_text())
    assert gamma["m"] == 600 and gamma["gamma_ghat"] <= 1.0


def test_train_and_test_streams_differ(run_dir):
    a, b = read_trajectory(run_dir / "train.csv"), read_trajectory(run_dir / "test.csv")
    assert not np.allclose(a.r_a - a.r_ref, b.r_a - b.r_ref)


def test_same_seed_is_byte_identical(run_dir, tmp_path):
    assert cli.main(["pipeline", "--config", "purcell3", "--out", str(tmp_path), "--seed", "4"] + SHORT) == 0
    for name in ("train.csv", "test.csv", "model.json", "report.json", "residuals.csv"):
        assert (tmp_path / name).read_bytes() == (run_dir / name).read_bytes(), name


def test_separate_commands_match_pipeline(run_dir, tmp_path):
    assert cli.main(["fit", "--train", str(run_dir / "train.csv"), "--out", str(tmp_path)]) == 0
    assert cli.main(["evaluate", "--model", str(tmp_path / "model.json"), "--nominal",
                     str(tmp_path / "nominal.json"), "--test", str(run_dir / "test.csv"),
                     "--out", str(tmp_path)]) == 0
    assert (tmp_path / "report.json").read_bytes() == (run_dir / "report.json").read_bytes()


def test_noiseless_flag(tmp_path, capsys):
    assert cli.main(["simulate", "--config", "linear_passive", "--sigma", "0", "--out", str(tmp_path),
                     "--cycles-train", "2", "--cycles-test", "2"]) == 0
    out = capsys.readouterr().out
    stds = [float(line.rsplit("deviation std", 1)[1]) for line in out.splitlines() if "deviation std" in line]
    assert len(stds) == 2 and max(stds) < 1e-6


@pytest.mark.parametrize("variant", list(PRESETS))
def test_preset_defaults(variant):
    cfg = cli.resolve_config(cli.preset_config(variant))
    assert cfg.cycles_train * cfg.samples_per_cycle == 3000
    assert cfg.cycles_test * cfg.samples_per_cycle == 3000
    assert cfg.gait.freq == pytest.approx(2 * np.pi)
    assert (cfg.fourier_order, cfg.n_bins, cfg.ridge) == (7, 64, 1e-8)


def test_flag_overrides():
    args = cli.build_parser().parse_args(["simulate", "--config", "purcell9", "--sigma", "0.2",
                                           "--lambda", "3", "--bins", "32", "--fourier-order", "4"])
    cfg = cli.resolve_config(cli.read_config_source(args.config), args)
    assert cfg.noise.sigma == (0.2,) and cfg.noise.attraction_rate == 3.0
    assert cfg.n_bins == 32 and cfg.fourier_order == 4


def test_config_file(tmp_path):
    raw = cli.preset_config("purcell3")
    raw["run"]["cycles_train"] = 7
    path = tmp_path / "c.json"
    path.write_text(json.dumps(raw))
    assert cli.resolve_config(cli.read_config_source(str(path))).cycles_train == 7


def test_truncated_train_file(run_dir, tmp_path):
    lines = (run_dir / "train.csv").read_text().splitlines()
    (tmp_path / "cut.csv").write_text("\n".join(lines[:200]) + "\n")
    (tmp_path / "cut.json").write_bytes((run_dir / "train.json").read_bytes())
    assert cli.main(["fit", "--train", str(tmp_path / "cut.csv"), "--out", str(tmp_path)]) == 1


def test_dimension_mismatch(run_dir, tmp_path):
    assert cli.main(["simulate", "--config", "linear_passive", "--out", str(tmp_path),
                     "--cycles-train", "1", "--cycles-test", "1"]) == 0
    code = cli.main(["evaluate", "--model", str(run_dir / "model.json"), "--test", str(tmp_path / "test.csv"),
                     "--out", str(tmp_path)])
    assert code == 1


def test_insufficient_coverage_is_numerical(run_dir, tmp_path, capsys):
    code = cli.main(["fit", "--train", str(run_dir / "train.csv"), "--bandwidth", "0.001", "--out", str(tmp_path)])
    assert code == 2
    assert "bins" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [[], ["bogus"], ["simulate"], ["simulate", "--seed", "x", "--config", "purcell3"],
                                  ["simulate", "--config", "nope"]])
def test_usage_errors(argv, tmp_path):
    assert cli.main(argv + ["--out", str(tmp_path)] if argv else argv) == 1


def test_bad_counts(tmp_path):
    assert cli.main(["simulate", "--config", "purcell3", "--cycles-train", "0", "--out", str(tmp_path)]) == 1
