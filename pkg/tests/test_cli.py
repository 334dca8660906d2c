import json

import pytest

from blockdag import dag_to_jsonl
from blockdag.cli import main, parse_seeds

from conftest import build_tricolor


@pytest.fixture
def tricolor_file(tmp_path):
    dag, names = build_tricolor()
    path = tmp_path / "tricolor.jsonl"
    path.write_text(dag_to_jsonl(dag))
    return path, names


def test_parse_seeds():
    assert parse_seeds("3..6") == [3, 4, 5, 6]
    assert parse_seeds([1, 5]) == [1, 5]


def test_output_dir_env_default(monkeypatch):
    from blockdag.cli import build_parser

    monkeypatch.setenv("BLOCKDAG_OUT", "/tmp/elsewhere")
    args = build_parser().parse_args(["simulate", "--config", "x.json", "--seeds", "0..0"])
    assert args.out == "/tmp/elsewhere"


def test_help_exists_for_every_subcommand(capsys):
    for cmd in ("simulate", "reward", "ledger", "check", "params", "experiment"):
        with pytest.raises(SystemExit) as exc:
            main([cmd, "--help"])
        assert exc.value.code == 0
        assert capsys.readouterr().out


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["ledger"])  # missing required arguments
    assert exc.value.code == 2


def test_ledger_command(tricolor_file, capsys):
    path, names = tricolor_file
    assert main(["ledger", "--dag", str(path), "--color", "2"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["blocks"] == [names["Y1"], names["Y2"], names["Y3"]]


def test_extended_ledger_command(tricolor_file, capsys):
    path, names = tricolor_file
    assert main(["ledger", "--dag", str(path), "--color", "0", "--extended", "--nl", "2"]) == 0
    doc = json.loads(capsys.readouterr().out)
    expected = [names[x] for x in ("B1", "Y1", "B2", "R1", "B3")]
    assert doc["blocks"] == expected


def test_extended_ledger_requires_nl(tricolor_file, capsys):
    path, _ = tricolor_file
    assert main(["ledger", "--dag", str(path), "--color", "0", "--extended"]) == 2


def test_reward_command(tricolor_file, capsys):
    path, names = tricolor_file
    assert main(["reward", "--dag", str(path), "--nl", "2"]) == 0
    lines = [json.loads(x) for x in capsys.readouterr().out.splitlines()]
    assert len(lines) == 9
    assert all(rec["reward"] == 1 for rec in lines)
    assert all(rec["witness"] is not None for rec in lines)


def test_simulate_then_check(tmp_path, capsys):
    cfg = {
        "t_max": 400,
        "delta": 2,
        "n_colors": 2,
        "delivery": "fixed",
        "miners": [{"power": 0.25} for _ in range(4)],
        "strategies": ["honest", "honest", "honest", "honest"],
    }
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(cfg))
    out_dir = tmp_path / "runs"
    assert main(["simulate", "--config", str(cfg_path), "--seeds", "0..1", "--out", str(out_dir)]) == 0
    histories = sorted(out_dir.glob("history-*.jsonl"))
    assert len(histories) == 2

    params = {
        "n_colors": 2,
        "n_ell": 15,
        "delta": 0.05,
        "delta_c": 0.2,
        "t_max": 400,
        "alpha": 0.25,
        "delta_net": 2,
        "epsilon": 1e-7,
        "c_hat": 0,
    }
    params_path = tmp_path / "params.json"
    params_path.write_text(json.dumps(params))
    code = main(["check", "--history", str(histories[0]), "--params", str(params_path)])
    doc = json.loads(capsys.readouterr().out)
    assert "safety" in doc and "desiderata" in doc
    assert (code == 0) == (doc["safety"]["passed"] and doc["desiderata"]["passed"])


def test_malformed_config_names_field(tmp_path, capsys):
    cfg = {
        "t_max": 100,
        "delta": 0,
        "n_colors": 1,
        "miners": [{"power": 1.0}],
    }
    cfg_path = tmp_path / "bad.json"
    cfg_path.write_text(json.dumps(cfg))
    assert main(["simulate", "--config", str(cfg_path), "--seeds", "0..0", "--out", str(tmp_path)]) == 2
    assert "delta" in capsys.readouterr().err


def test_params_check_command(capsys):
    code = main(
        [
            "params",
            "check",
            "--alpha",
            "0.49",
            "--epsilon",
            "1e-7",
            "--delta-net",
            "5",
            "--nc",
            "10",
            "--nl",
            "10000",
            "--deltac",
            "0.04",
            "--tmax",
            "100000000000",
        ]
    )
    doc = json.loads(capsys.readouterr().out)
    assert code == 1
    assert doc["sh2"]["passed"] and doc["sh3"]["passed"]
    assert not doc["sh1a"]["passed"] and not doc["sh1b"]["passed"]


def test_params_solve_command(capsys):
    code = main(
        [
            "params",
            "solve",
            "--alpha",
            "0.25",
            "--epsilon",
            "1e-7",
            "--delta-net",
            "5",
            "--nc",
            "10",
            "--deltac",
            "0.04",
        ]
    )
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["n_ell"] == 7226
    assert doc["tuple"]["t_max"] == 7226**2


def test_experiment_command(tmp_path):
    spec = {
        "name": "smoke",
        "scheduler": {
            "t_max": 300,
            "delta": 2,
            "n_colors": 2,
            "delivery": "fixed",
            "miners": [{"power": 0.3}, {"power": 0.35}, {"power": 0.35}],
            "strategies": ["self_forker", "honest", "honest"],
        },
        "baseline_strategies": ["honest", "honest", "honest"],
        "adversary_index": 0,
        "params": {
            "n_colors": 2,
            "n_ell": 10,
            "delta": 0.05,
            "delta_c": 0.1,
            "t_max": 300,
            "alpha": 0.3,
            "delta_net": 2,
            "epsilon": 1e-7,
        },
        "seeds": "0..2",
        "outputs": ["utilities", "ledgers"],
        "assertions": {"max_mean_delta": 0.05},
    }
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps(spec))
    out_dir = tmp_path / "exp"
    code = main(["experiment", "--config", str(spec_path), "--out", str(out_dir)])
    assert code == 0
    assert (out_dir / "comparison.csv").exists()
    assert (out_dir / "utilities.csv").exists()
    assert (out_dir / "ledgers.json").exists()
    summary = json.loads((out_dir / "summary.json").read_text())
    assert summary["passed"]
    rows = (out_dir / "comparison.csv").read_text().splitlines()
    assert rows[0] == "seed,baseline_utility,deviant_utility,delta"
    assert len(rows) == 4


def test_experiment_rerun_is_byte_identical(tmp_path):
    spec = {
        "scheduler": {
            "t_max": 200,
            "delta": 3,
            "n_colors": 2,
            "delivery": "uniform",
            "miners": [{"power": 0.5}, {"power": 0.5}],
            "strategies": ["honest", "honest"],
        },
        "params": {
            "n_colors": 2,
            "n_ell": 10,
            "delta": 0.05,
            "delta_c": 0.1,
            "t_max": 200,
            "alpha": 0.4,
            "delta_net": 3,
            "epsilon": 1e-7,
        },
        "seeds": "0..1",
        "outputs": ["histories", "safety", "desiderata", "utilities", "ledgers", "rewards"],
    }
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps(spec))
    a_dir, b_dir = tmp_path / "a", tmp_path / "b"
    main(["experiment", "--config", str(spec_path), "--out", str(a_dir)])
    main(["experiment", "--config", str(spec_path), "--out", str(b_dir)])
    a_files = sorted(p.name for p in a_dir.iterdir())
    assert a_files == sorted(p.name for p in b_dir.iterdir())
    for name in a_files:
        assert (a_dir / name).read_bytes() == (b_dir / name).read_bytes()
