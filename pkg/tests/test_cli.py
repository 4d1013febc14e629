import csv
import json

import numpy as np
import pytest

import fracport.prox
from fracport.cli import (
    EXIT_CONFIG,
    EXIT_DATA,
    EXIT_OK,
    EXIT_SOLVER,
    RunConfig,
    main,
    parse_config_text,
    render_config,
)
from fracport.data import serialize_returns_csv
from fracport.errors import ConfigError
from fracport.synthetic import factor_panel


@pytest.fixture(scope="module")
def ff_file(tmp_path_factory):
    """A 48-asset file in the library layout covering the default plan."""
    path = tmp_path_factory.mktemp("data") / "ff48.csv"
    path.write_text(serialize_returns_csv(factor_panel(48, "197101", "200612", seed=3)))
    return path


@pytest.fixture(scope="module")
def small_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "small.csv"
    path.write_text(serialize_returns_csv(factor_panel(12, "197101", "200612", seed=4)))
    return path


def _solution(out, method="ifpt"):
    return json.loads((out / f"solution_{method}.json").read_text())


def test_missing_data_file(tmp_path, capsys):
    missing = tmp_path / "nope.csv"
    code = main(["solve", "--data", str(missing), "--out", str(tmp_path / "o"), "--k", "8"])
    assert code == EXIT_DATA
    assert str(missing) in capsys.readouterr().err


def test_k_and_lambda_conflict(tmp_path, ff_file):
    code = main(["solve", "--data", str(ff_file), "--k", "8", "--lambda", "0.1",
                 "--out", str(tmp_path)])
    assert code == EXIT_CONFIG


def test_bad_parameter_is_config_error(tmp_path, ff_file):
    assert main(["solve", "--data", str(ff_file), "--k", "8", "--a", "-1",
                 "--out", str(tmp_path)]) == EXIT_CONFIG


def test_missing_config_file(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "none.txt")]) == EXIT_CONFIG


def test_malformed_data_exit_code(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("Date,A,B\n197101,1.0,x\n")
    assert main(["solve", "--data", str(bad), "--k", "1", "--out", str(tmp_path / "o")]) == EXIT_DATA


def test_solve_target_k(tmp_path, ff_file):
    out = tmp_path / "o"
    assert main(["solve", "--data", str(ff_file), "--k", "8", "--out", str(out)]) == EXIT_OK
    doc = _solution(out)
    x = np.array(doc["weights"])
    assert x.size == 48
    assert np.count_nonzero(x) <= 8
    assert doc["support_size"] == len(doc["support"]) == np.count_nonzero(x)
    assert doc["lambda_bar"] > 0
    for key in ("objective_trace", "lambda_trace", "diagnostics", "termination"):
        assert key in doc
    assert len(doc["lambda_trace"]) == doc["iterations"]


def test_solve_above_lambda_bar(tmp_path, ff_file):
    out = tmp_path / "probe"
    main(["solve", "--data", str(ff_file), "--k", "8", "--out", str(out)])
    lbar = _solution(out)["lambda_bar"]
    out = tmp_path / "zero"
    code = main(["solve", "--data", str(ff_file), "--lambda", repr(1.5 * lbar), "--out", str(out)])
    assert code == EXIT_OK
    doc = _solution(out)
    assert not any(doc["weights"])
    assert doc["termination"] == "zero_solution"


def test_solve_all_methods(tmp_path, small_file):
    out = tmp_path / "o"
    argv = ["solve", "--data", str(small_file), "--k", "4", "--out", str(out)]
    for m in ("ifpt", "infpt", "markowitz", "l1"):
        argv += ["--method", m]
    assert main(argv) == EXIT_OK
    assert min(_solution(out, "infpt")["weights"]) >= 0
    assert abs(sum(_solution(out, "markowitz")["weights"]) - 1) < 1e-8
    assert _solution(out, "l1")["support_size"] <= 4


def test_backtest_layout(tmp_path, small_file):
    out = tmp_path / "bt"
    assert main(["backtest", "--data", str(small_file), "--out", str(out)]) == EXIT_OK
    for name in ("report.csv", "report.json", "report.md", "config.txt"):
        assert (out / name).is_file()
    with open(out / "report.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert sorted({int(r["k"]) for r in rows}) == list(range(6, 21, 2))
    for k in range(6, 21, 2):
        mine = [r for r in rows if int(r["k"]) == k]
        assert len(mine) == 7
        assert mine[-1]["termination"] == "aggregate"
        assert mine[-1]["period"] == "07/76-06/06"
    md = (out / "report.md").read_text()
    headers = [line for line in md.splitlines() if line.startswith("| Period")]
    columns = sum(line.count("k=") for line in headers)
    assert columns == 8


def test_backtest_deterministic_and_config_echo(tmp_path, small_file):
    first, second, third = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    argv = ["backtest", "--data", str(small_file), "--method", "ifpt", "--method", "markowitz",
            "--k", "6,10"]
    assert main(argv + ["--out", str(first)]) == EXIT_OK
    assert main(argv + ["--out", str(second)]) == EXIT_OK
    # rerun from the echoed config, redirecting only the output directory
    assert main(["backtest", "--config", str(first / "config.txt"), "--out", str(third)]) == EXIT_OK
    for name in ("report.csv", "report.json", "report.md"):
        ref = (first / name).read_bytes()
        assert (second / name).read_bytes() == ref
        assert (third / name).read_bytes() == ref


def test_config_text_round_trip():
    cfg = RunConfig(data="x.csv", methods=("ifpt", "l1"), k=(6, 8), a=2.5, eta=10.0,
                    fixed_estimation=True).validate()
    again = parse_config_text(render_config(cfg))
    assert again == cfg


def test_config_rejects_unknown_key():
    with pytest.raises(ConfigError):
        parse_config_text("data = x.csv\ncolour = blue\n")


def test_config_lambda_clears_default_k():
    cfg = parse_config_text("lambda = 0.5\n").validate()
    assert cfg.lam == 0.5 and cfg.k == ()


def test_selftest_passes(tmp_path, capsys):
    assert main(["selftest", "--out", str(tmp_path)]) == EXIT_OK
    lines = [line for line in capsys.readouterr().out.splitlines() if line.strip()]
    assert len(lines) == 4
    assert all(line.startswith("PASS") for line in lines)


def test_selftest_detects_corrupted_threshold(tmp_path, monkeypatch, capsys):
    honest = fracport.prox.threshold_small
    monkeypatch.setattr(fracport.prox, "threshold_small", lambda a, lam: 1.3 * honest(a, lam))
    assert main(["selftest", "--out", str(tmp_path)]) == EXIT_SOLVER
    assert "FAIL" in capsys.readouterr().out


def test_plot_data(tmp_path):
    out = tmp_path / "plot"
    assert main(["plot-data", "--out", str(out)]) == EXIT_OK
    with open(out / "penalty_plot.tsv", newline="") as fh:
        rows = list(csv.reader(fh, delimiter="\t"))
    assert rows[0] == ["a", "t", "rho"]
    body = np.array(rows[1:], dtype=float)
    assert body.shape == (5 * 201, 3)
    a, t, r = body.T
    np.testing.assert_allclose(r, a * np.abs(t) / (a * np.abs(t) + 1), rtol=0, atol=1e-15)
    assert np.all((r >= 0) & (r < 1))
