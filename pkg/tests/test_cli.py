import json

import pytest

from siegel_lowlying import cli, petersson, specfun

CHEAP = {
    "kloosterman": ["--cmax", "1"],
    "hsum": ["--cmax", "4"],
    "bessel-check": ["--numax", "6.5", "--xmax", "20"],
    "product-formula-check": [],
    "neumann-check": ["--K", "16", "--points", "4"],
    "delta": ["--k", "24", "--tol", "1e-6"],
    "delta-avg": ["--K", "12", "--tol", "1e-4"],
    "lemma21-check": ["--draws", "10"],
    "density-spin": ["--k", "1000", "--diag-only", "true"],
    "density-std": ["--k", "1000", "--diag-only", "true"],
    "density-std-avg": ["--K", "24", "--diag-only", "true"],
    "lattice-count": ["--dmax", "3", "--X", "100"],
    "plancherel": ["--v", "0.5"],
    "nonvanishing": [],
}


def test_every_command_has_cheap_args():
    assert set(CHEAP) == set(cli.COMMANDS)


@pytest.mark.parametrize("name", sorted(cli.COMMANDS))
def test_dry_run(name, capsys, tmp_path):
    code = cli.main([name, *CHEAP[name], "--dry-run", "--out", str(tmp_path / "x")])
    assert code == cli.EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["command"] == name and "plan" in doc
    assert not (tmp_path / "x.csv").exists()


@pytest.mark.parametrize("argv, param", [
    (["delta", "--k", "11"], "k"),
    (["delta", "--k", "12.5"], "k"),
    (["delta", "--m", "0"], "m"),
    (["delta", "--tol", "-1"], "tol"),
    (["density-spin", "--v", "1.0"], "v"),
    (["density-std", "--v", "0.25"], "v"),
    (["density-std-avg", "--v", "0.3"], "v"),
    (["kloosterman", "--q", "1,3,1"], "q"),
    (["lattice-count", "--dmax", "0"], "dmax"),
    (["nonvanishing", "--v", "1"], "v"),
    (["delta", "--threads", "0"], "threads"),
])
def test_validation_exit_code(argv, param, capsys, tmp_path):
    code = cli.main([*argv, "--out", str(tmp_path / "x")])
    assert code == cli.EXIT_VALIDATION
    err = capsys.readouterr().err
    assert f"--{param}" in err or param in err
    assert not (tmp_path / "x.json").exists()


def test_nonconvergence_exit_code(monkeypatch, capsys, tmp_path):
    def boom(*args, **kwargs):
        raise specfun.ConvergenceError("quadrature cap reached", (1.0, 2.0))

    monkeypatch.setattr(petersson, "delta_k", boom)
    code = cli.main(["delta", "--k", "24", "--out", str(tmp_path / "x")])
    assert code == cli.EXIT_NONCONVERGENCE
    assert "non-convergence" in capsys.readouterr().err


def test_config_merge(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"parameters": {"k": 14, "tol": 1e-3, "m": 2}}))
    code = cli.main(["delta", "--config", str(cfg), "--tol", "1e-5", "--dry-run"])
    assert code == cli.EXIT_OK
    params = json.loads(capsys.readouterr().out)["parameters"]
    assert params["k"] == 14 and params["m"] == 2
    assert params["tol"] == 1e-5  # flags win
    assert params["n"] == 1  # defaults fill the rest


def test_config_rejects_unknown_and_broken(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"kk": 3}))
    assert cli.main(["delta", "--config", str(bad), "--dry-run"]) == cli.EXIT_VALIDATION
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    assert cli.main(["delta", "--config", str(broken), "--dry-run"]) == cli.EXIT_VALIDATION
    assert cli.main(["delta", "--config", str(tmp_path / "missing.json"), "--dry-run"]) == cli.EXIT_VALIDATION


def test_kloosterman_output(tmp_path):
    prefix = tmp_path / "k"
    assert cli.main(["kloosterman", "--cmax", "2", "--out", str(prefix)]) == cli.EXIT_OK
    lines = (tmp_path / "k.csv").read_text().splitlines()
    assert lines[0] == "c11,c12,c21,c22,det,re,im,abs,bound,bound_ok,terms"
    rows = [ln.split(",") for ln in lines[1:]]
    assert len(rows) == sum(1 for a in range(-2, 3) for b in range(-2, 3) for c in range(-2, 3)
                            for d in range(-2, 3) if a * d - b * c)
    assert all(r[9] == "1" for r in rows)
    doc = json.loads((tmp_path / "k.json").read_text())
    assert set(doc) == {"config", "results", "budgets", "timings", "version"}
    assert doc["config"]["parameters"]["cmax"] == 2


def test_delta_output_near_one(tmp_path):
    prefix = tmp_path / "d"
    assert cli.main(["delta", "--k", "24", "--out", str(prefix)]) == cli.EXIT_OK
    doc = json.loads((tmp_path / "d.json").read_text())
    assert abs(doc["results"]["total"] - 1) < 1e-2
    assert doc["budgets"]["tail_bound"] >= 0


@pytest.mark.parametrize("name", ["kloosterman", "lemma21-check", "density-spin", "plancherel", "delta"])
@pytest.mark.parametrize("threads", [None, "8"])
def test_rerun_is_byte_identical(name, threads, tmp_path):
    prefix = tmp_path / "r"
    argv = [name, *CHEAP[name], "--out", str(prefix), "--seed", "5"]
    if threads:
        argv += ["--threads", threads]
    assert cli.main(argv) == cli.EXIT_OK
    first = ((tmp_path / "r.csv").read_bytes(), (tmp_path / "r.json").read_bytes())
    assert cli.main(argv) == cli.EXIT_OK
    second = ((tmp_path / "r.csv").read_bytes(), (tmp_path / "r.json").read_bytes())
    assert first == second


def test_thread_count_does_not_change_results(tmp_path):
    out = []
    for th in ("1", "8"):
        prefix = tmp_path / th
        assert cli.main(["lemma21-check", "--draws", "20", "--threads", th, "--out", str(prefix)]) == cli.EXIT_OK
        doc = json.loads((tmp_path / f"{th}.json").read_text())
        out.append(((tmp_path / f"{th}.csv").read_bytes(), doc["results"]))
    assert out[0] == out[1]


def test_seed_changes_lemma_draws(tmp_path):
    res = []
    for seed in ("1", "2"):
        prefix = tmp_path / seed
        cli.main(["lemma21-check", "--draws", "5", "--seed", seed, "--out", str(prefix)])
        res.append((tmp_path / f"{seed}.csv").read_text())
    assert res[0] != res[1]
