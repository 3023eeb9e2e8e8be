import csv
import json
from pathlib import Path

import pytest

from contract_rl import cli, config as cfgmod
from contract_rl.runner import map_seeds, pool_size

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_figure1_run(tmp_path):
    assert run("run", CONFIGS / "figure1.toml", "--out", tmp_path) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["principal_utility"] == pytest.approx(1.0, abs=1e-9)
    assert summary["agent_utility"] == pytest.approx(0.2, abs=1e-9)
    resolved = json.loads((tmp_path / "config.resolved.json").read_text())
    assert resolved["kind"] == "figure1" and resolved["solver"] == "exact"
    assert (tmp_path / "trace_seed_0.jsonl").read_text().count("\n") == summary["iterations"]


def test_divergence_run_reports_cycle(tmp_path):
    assert run("run", CONFIGS / "divergence.toml", "--out", tmp_path) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["cycle_period"] == 2 and summary["converged"] == 0.0


def _tree_config(tmp_path, solver="exact"):
    p = tmp_path / "tree.toml"
    body = f'kind = "tree"\nsolver = "{solver}"\n[env]\ndepth = 3\n'
    if solver == "tabular":
        body += "[learning]\nupdates = 4000\neval_every = 2000\n"
    p.write_text(body)
    return p


def test_seed_range_writes_one_csv_per_seed(tmp_path):
    out = tmp_path / "out"
    assert run("run", _tree_config(tmp_path), "--seeds", "0..4", "--out", out) == 0
    assert sorted(p.name for p in out.glob("seed_*.csv")) == [f"seed_{i}.csv" for i in range(5)]
    summary = json.loads((out / "summary.json").read_text())
    assert summary["seeds"] == [0, 1, 2, 3, 4] and summary["complete"]
    assert set(summary["stderr"]) >= {"principal_utility", "agent_utility"}
    assert len(summary["per_seed"]) == 5


def test_csv_is_byte_identical_and_nine_digits(tmp_path):
    cfg = _tree_config(tmp_path, "tabular")
    assert run("run", cfg, "--seeds", "1", "--out", tmp_path / "a") == 0
    assert run("run", cfg, "--seeds", "1", "--out", tmp_path / "b") == 0
    a, b = (tmp_path / "a" / "seed_1.csv").read_bytes(), (tmp_path / "b" / "seed_1.csv").read_bytes()
    assert a == b
    rows = list(csv.reader(a.decode().splitlines()))
    assert rows[0] == ["update", "principal_utility_oracle", "agent_utility_oracle", "accuracy"]
    for cell in rows[1][1:]:
        assert len(cell.replace("-", "").replace(".", "").lstrip("0").split("e")[0]) <= 9


def test_unknown_key_is_config_error(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text('kind = "figure1"\nfoo = 1\n')
    assert run("run", bad) == 2
    assert "unknown key" in capsys.readouterr().err


@pytest.mark.parametrize("body", [
    'kind = "maze"',
    'kind = "tree"\n[env]\ndepth = 0',
    'kind = "tree"\n[env]\ndepth = 3\nwidth = 2',
    'kind = "tree"\nsolver = "tabular"\n[env]\ndepth = 3\n[learning]\nlr_initial = 2.0',
    'kind = "figure1"\n[learning]\nupdates = 10',
    'kind = "coingame"\n[env]\ngrid_size = 9',
    'kind = "divergence"\nsolver = "tabular"',
    'kind = "tree"\n[env]\ndepth = 3\n[protocol]\nbaselines = false',
    'kind = [',
])
def test_config_errors(tmp_path, body):
    p = tmp_path / "c.toml"
    p.write_text(body)
    with pytest.raises(cfgmod.ConfigError):
        cfgmod.load(p)
    assert run("run", p) == 2


def test_json_mirror_accepted(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"kind": "figure1", "seeds": "0..1"}))
    cfg = cfgmod.load(p)
    assert cfg.seeds == [0, 1] and cfg.solver == "exact"


def test_nudge_flag_overrides(tmp_path):
    cfg = _tree_config(tmp_path, "tabular")
    assert run("run", cfg, "--nudge", "0.05", "--out", tmp_path / "o") == 0
    resolved = json.loads((tmp_path / "o" / "config.resolved.json").read_text())
    assert resolved["learning"]["nudge"] == 0.05
    assert run("run", CONFIGS / "figure1.toml", "--nudge", "0.1", "--out", tmp_path / "p") == 2


def test_runtime_failure_keeps_partial_artifacts(tmp_path, monkeypatch):
    real = cli.run_seed

    def flaky(cfg, seed):
        if seed == 2:
            raise RuntimeError("solver blew up")
        return real(cfg, seed)

    monkeypatch.setattr(cli, "run_seed", flaky)
    out = tmp_path / "out"
    assert run("run", _tree_config(tmp_path), "--seeds", "0..3", "--workers", "1", "--out", out) == 3
    assert (out / "seed_0.csv").exists() and (out / "seed_1.csv").exists()
    assert not (out / "seed_2.csv").exists()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["complete"] is False and summary["seeds"] == [0, 1]


def test_all_shipped_configs_parse():
    for p in CONFIGS.glob("*.toml"):
        cfg = cfgmod.load(p)
        assert cfg.seeds


def test_golden_unknown_suite():
    assert run("golden", "nope") == 2


def test_golden_divergence_passes(capsys):
    assert run("golden", "divergence") == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") >= 8


def test_gen_tree_and_validate(tmp_path, capsys):
    path = tmp_path / "t.json"
    assert run("gen-tree", "--depth", 4, "--seed", 2, "--out", path) == 0
    assert run("validate-mdp", path) == 0
    assert "15 states" in capsys.readouterr().out
    assert run("validate-mdp", path, "--solve") == 0
    assert json.loads(capsys.readouterr().out.splitlines()[-1])["principal_utility"] > 0
    assert run("gen-tree", "--depth", 0) == 2


def test_validate_reports_violations(tmp_path, capsys):
    good = tmp_path / "m.json"
    assert run("gen-tree", "--depth", 2, "--out", good) == 0
    d = json.loads(good.read_text())
    d["outcome_fn"][0][0] = [0.5, 0.6]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(d))
    assert run("validate-mdp", bad) == 1
    assert "row sum 1.1" in capsys.readouterr().out
    assert run("validate-mdp", tmp_path / "missing.json") == 2


def test_aggregate_means_and_errors():
    mean, err = cli.aggregate([{"x": 1.0, "n": 2, "c": None}, {"x": 3.0, "n": 2, "c": None}])
    assert mean == {"x": 2.0, "n": 2, "c": None}
    assert err["x"] == pytest.approx(1.0) and err["n"] == 0.0


def _square(x):
    return x * x


def test_pool_size_and_map(monkeypatch):
    monkeypatch.setenv("CONTRACT_RL_THREADS", "2")
    assert pool_size(8, 10) == 2 and pool_size(8, 1) == 1
    monkeypatch.setenv("CONTRACT_RL_THREADS", "x")
    with pytest.raises(ValueError):
        pool_size(2, 2)
    monkeypatch.delenv("CONTRACT_RL_THREADS")
    assert map_seeds(_square, [(i,) for i in range(5)], workers=1) == [0, 1, 4, 9, 16]
    assert map_seeds(_square, [(i,) for i in range(5)], workers=2) == [0, 1, 4, 9, 16]
