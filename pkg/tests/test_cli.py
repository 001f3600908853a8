import json

import pytest

from brownliq.cli import main
from brownliq.config import ConfigError, DEFAULTS, parse_config


def _run(tmp_path, *args):
    return main([*args, "--output-dir", str(tmp_path), "--run-name", "r"])


def test_defaults_filled_and_echo(tmp_path):
    cfgfile = tmp_path / "one.toml"
    cfgfile.write_text("seed = 3\n[model]\nN = 1\nradii = 0.1\n[sampler]\nsweeps = 300\nburn_in = 0\n")
    cfg = parse_config(cfgfile)
    assert cfg["plan"] == DEFAULTS["plan"] and cfg.seed == 3
    assert main(["sample", "-c", str(cfgfile), "--output-dir", str(tmp_path), "--run-name", "x"]) == 0
    echo = json.loads((tmp_path / "x" / "config.json").read_text())
    assert echo["sampler"]["sweeps"] == 300
    assert (tmp_path / "x" / "snapshots_r0.jsonl").exists() and (tmp_path / "x" / "summary.csv").exists()


def test_unknown_key_names_it(tmp_path):
    cfgfile = tmp_path / "bad.toml"
    cfgfile.write_text("[model]\nraddi = 0.1\n")
    with pytest.raises(ConfigError, match="raddi"):
        parse_config(cfgfile)
    assert main(["sample", "-c", str(cfgfile), "--output-dir", str(tmp_path)]) == 2


def test_archimedes_precondition_message(capsys, tmp_path):
    # 0.0386^2 * 194 * sqrt(12) is about 1.0
    code = _run(tmp_path, "experiment", "archimedes", "--set", "experiment.archimedes.rho=0.0386",
                "--set", "experiment.archimedes.N=194")
    assert code == 2
    assert "1.2146" in capsys.readouterr().err


def test_bad_set_syntax(tmp_path):
    assert _run(tmp_path, "sample", "--set", "model.N") == 2


def test_json_config_and_flag_precedence(tmp_path):
    cfgfile = tmp_path / "c.json"
    cfgfile.write_text(json.dumps({"seed": 1, "model": {"N": 2, "radii": [0.1, 0.2]}}))
    cfg = parse_config(cfgfile, {"seed": 8})
    assert cfg.seed == 8 and list(cfg.model_spec().radii) == [0.1, 0.2]
    with pytest.raises(ConfigError):
        parse_config(cfgfile, {"model": {"N": 3}})


def test_check_vessel_command(tmp_path, capsys):
    assert _run(tmp_path, "check-vessel") == 0
    assert "condition_holds=true" in capsys.readouterr().out
    body = json.loads((tmp_path / "r" / "vessel_check.json").read_text())
    assert body["condition_holds"] is True


def test_path_and_pack_commands(tmp_path):
    assert _run(tmp_path, "path", "--set", "model.N=4", "--set", "model.radii=0.2",
                "--set", "path.samples_per_segment=50") == 0
    assert json.loads((tmp_path / "r" / "certificate.json").read_text())["certificate"] is True
    assert main(["pack", "--set", "pack.hi=[5.0,5.0]", "--output-dir", str(tmp_path), "--run-name", "p"]) == 0
    assert json.loads((tmp_path / "p" / "pack.json").read_text())["count"] > 0


def test_experiment_exit_codes(tmp_path):
    base = ["--set", "plan.sweeps=4000", "--set", "plan.burn_in=200", "--set", "plan.approach_stages=0"]
    assert _run(tmp_path, "experiment", "concentration", "--set", "experiment.concentration.b_list=[200.0]",
                *base) == 0
    assert main(["experiment", "concentration", "--set", "experiment.concentration.b_list=[0.01]",
                 "--output-dir", str(tmp_path), "--run-name", "f", *base]) == 1


def test_identical_outputs_on_rerun(tmp_path):
    args = ["sample", "--seed", "4", "--set", "model.N=5", "--set", "sampler.sweeps=400",
            "--set", "sampler.burn_in=50", "--set", "sampler.thin=4", "--output-dir", str(tmp_path)]
    assert main([*args, "--run-name", "a"]) == 0
    assert main([*args, "--run-name", "b"]) == 0
    for name in ("snapshots_r0.jsonl", "summary.csv", "diagnostics.json", "config.json"):
        a = (tmp_path / "a" / name).read_bytes()
        b = (tmp_path / "b" / name).read_bytes()
        if name == "config.json":
            a, b = (json.loads(x) for x in (a, b))
            a.pop("run_name"), b.pop("run_name")
        assert a == b


def test_simulate_and_anneal(tmp_path):
    assert _run(tmp_path, "simulate", "--set", "model.N=3", "--set", "dynamics.T=0.02",
                "--set", "dynamics.dt=1e-4") == 0
    assert main(["anneal", "--set", "model.N=2", "--set", "model.radii=0.3", "--set", "anneal.restarts=1",
                 "--set", "anneal.sweeps_per_stage=200", "--output-dir", str(tmp_path), "--run-name", "an"]) == 0
    assert json.loads((tmp_path / "an" / "c1.json").read_text())["c1"] == pytest.approx(0.6, abs=0.01)
