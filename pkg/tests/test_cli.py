import json
import math

import numpy as np
import pytest

from dirgof.cli import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, constants_table, main, read_report
from dirgof.models import vmf_sample
from dirgof.sphere import RngStream, sample_uniform_sphere

MU = np.array([0.0, 1.0])


def write_rows(path, header, rows):
    lines = [",".join(header)] + [",".join(repr(float(v)) for v in r) for r in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def xy_csv(path, seed=0, n=60, dependent=False):
    r = RngStream(seed)
    x = vmf_sample(MU, 1.0, n, r.child(0))
    y = r.child(1).generator().standard_normal(n)
    if dependent:
        y = x[:, 1] + 0.5 * y
    return write_rows(path, ["x0", "x1", "y"], np.column_stack([x, y]).tolist())


def xu_csv(path, seed=0, n=50):
    r = RngStream(seed)
    x = sample_uniform_sphere(1, n, r.child(0))
    u = sample_uniform_sphere(1, n, r.child(1))
    return write_rows(path, ["x0", "x1", "u0", "u1"], np.column_stack([x, u]).tolist())


@pytest.fixture
def xy(tmp_path):
    return xy_csv(tmp_path / "xy.csv")


@pytest.fixture
def xu(tmp_path):
    return xu_csv(tmp_path / "xu.csv")


# -- test ----------------------------------------------------------------------


@pytest.mark.parametrize("args", [
    ["density", "--h", "0.5"],
    ["density", "--h", "0.5", "--null", "uniform"],
    ["dirlin-density", "--h", "0.5", "--g", "0.5"],
    ["indep", "--h", "0.5", "--g", "0.5"],
    ["regression", "--h", "0.5"],
    ["regression", "--h", "0.5", "--null", "linear", "--p", "1", "--multipliers", "rademacher"],
])
def test_dirlin_subcommands(xy, tmp_path, capsys, args):
    out = tmp_path / "r.json"
    code = main(["test", *args, "--data", str(xy), "--B", "19", "--seed", "1", "--out", str(out)])
    assert code == EXIT_OK
    rep = read_report(out)
    assert rep["schema"] == 1 and rep["seed"] == 1 and rep["B"] == 19
    assert 0 < rep["p_resampled"] <= 1 and rep["statistic"] >= 0
    for key in ("center", "scale", "standardized", "p_asymptotic", "bandwidths", "theta"):
        assert key in rep
    assert "->" in capsys.readouterr().out


@pytest.mark.parametrize("args", [
    ["dirdir-density", "--h", "0.5", "--h2", "0.6"],
    ["dirdir-indep", "--h", "0.5", "--h2", "0.6"],
])
def test_dirdir_subcommands(xu, tmp_path, args):
    out = tmp_path / "r.json"
    assert main(["test", *args, "--data", str(xu), "--B", "19", "--seed", "1", "--out", str(out)]) == EXIT_OK
    assert read_report(out)["bandwidths"] == {"h": 0.5, "h2": 0.6}


def test_angles_input(tmp_path):
    theta = RngStream(3).generator().uniform(0, 2 * math.pi, 40)
    y = np.sin(theta)
    path = write_rows(tmp_path / "a.csv", ["theta", "y"], np.column_stack([theta, y]).tolist())
    out = tmp_path / "r.json"
    code = main(["test", "indep", "--angles", "--data", str(path), "--h", "0.5", "--g", "0.5",
                 "--B", "19", "--seed", "2", "--out", str(out)])
    assert code == EXIT_OK and read_report(out)["p_resampled"] == pytest.approx(0.05)


def test_asymptotic_only(xy, tmp_path):
    out = tmp_path / "r.json"
    assert main(["test", "indep", "--data", str(xy), "--h", "0.5", "--g", "0.5", "--B", "0",
                 "--seed", "1", "--out", str(out)]) == EXIT_OK
    rep = read_report(out)
    assert rep["p_resampled"] is None and 0 <= rep["p_asymptotic"] <= 1


def test_missing_g_is_usage_error(xy, capsys):
    assert main(["test", "indep", "--data", str(xy), "--h", "0.3", "--seed", "1"]) == EXIT_USAGE
    assert "--g" in capsys.readouterr().err


@pytest.mark.parametrize("args", [
    ["--kernel", "nonsense"],
    ["--B", "5"],
    ["--alpha", "1.5"],
    ["--h", "-1"],
    ["--null", "linear"],
])
def test_usage_errors(xy, args):
    base = {"--h": "0.3", "--g": "0.3"}
    for i in range(0, len(args), 2):
        base[args[i]] = args[i + 1]
    flat = [t for kv in base.items() for t in kv]
    assert main(["test", "indep", "--data", str(xy), "--seed", "1", *flat]) == EXIT_USAGE


def test_unknown_subcommand():
    assert main(["frobnicate"]) == EXIT_USAGE


def test_seed_generated_and_printed(xy, tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["test", "indep", "--data", str(xy), "--h", "0.5", "--g", "0.5", "--B", "19",
                 "--out", str(out)]) == EXIT_OK
    printed = capsys.readouterr().out
    seed = int(printed.split("seed: ")[1].split()[0])
    assert read_report(out)["seed"] == seed


def test_report_byte_identical(xy, tmp_path):
    texts = []
    for k, threads in enumerate(("1", "1", "3")):
        out = tmp_path / f"r{k}.json"
        main(["test", "indep", "--data", str(xy), "--h", "0.3", "--g", "0.3", "--B", "199", "--alpha", "0.05",
              "--seed", "42", "--threads", threads, "--out", str(out)])
        texts.append(out.read_bytes())
    assert texts[0] == texts[1] == texts[2]


def test_malformed_row_number(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("x0,x1,y\n1.0,0.0,0.5\n0.0,1.0,0.1\n0.0,abc,0.2\n")
    assert main(["test", "indep", "--data", str(path), "--h", "0.5", "--g", "0.5", "--seed", "1"]) == EXIT_FAILURE
    assert "row 3" in capsys.readouterr().err


def test_short_row(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("x0,x1,y\n1.0,0.0,0.5\n0.0,1.0\n")
    assert main(["test", "indep", "--data", str(path), "--h", "0.5", "--g", "0.5", "--seed", "1"]) == EXIT_FAILURE
    assert "row 2" in capsys.readouterr().err


def test_unit_norm_handling(tmp_path, capsys):
    ok = tmp_path / "ok.csv"
    ok.write_text("x0,x1,y\n1.0000004,0.0,0.5\n0.0,1.0,0.1\n0.6,0.8,0.3\n")
    assert main(["test", "indep", "--data", str(ok), "--h", "0.5", "--g", "0.5", "--B", "0", "--seed", "1"]) == EXIT_OK
    bad = tmp_path / "bad.csv"
    bad.write_text("x0,x1,y\n1.0,0.0,0.5\n0.0,1.0,0.1\n0.6,0.9,0.3\n")
    capsys.readouterr()
    assert main(["test", "indep", "--data", str(bad), "--h", "0.5", "--g", "0.5", "--seed", "1"]) == EXIT_FAILURE
    assert "row 3" in capsys.readouterr().err


def test_missing_file():
    assert main(["test", "indep", "--data", "/nonexistent.csv", "--h", "0.5", "--g", "0.5", "--seed", "1"]) \
        == EXIT_FAILURE


def test_read_report_keeps_unknown_fields(tmp_path):
    path = tmp_path / "r.json"
    path.write_text(json.dumps({"schema": 1, "statistic": 0.1, "future_field": [1, 2]}))
    assert read_report(path)["future_field"] == [1, 2]
    path.write_text(json.dumps({"schema": 99}))
    with pytest.raises(ValueError):
        read_report(path)


def test_indep_size_over_seeds(tmp_path):
    # 100 independent data sets: a 5% test fails the 90% bar with probability about 1e-3
    not_rejected = 0
    seeds = 100
    for s in range(seeds):
        data = xy_csv(tmp_path / f"d{s}.csv", seed=s, n=100)
        out = tmp_path / f"r{s}.json"
        main(["test", "indep", "--data", str(data), "--q", "1", "--h", "0.3", "--g", "0.3", "--B", "199",
              "--alpha", "0.05", "--seed", "42", "--out", str(out)])
        not_rejected += read_report(out)["p_resampled"] > 0.05
    assert not_rejected >= 0.9 * seeds


# -- constants -----------------------------------------------------------------------


def test_constants_vonmises(capsys):
    assert main(["constants", "--kernel", "vonmises", "--q", "1"]) == EXIT_OK
    line = next(l for l in capsys.readouterr().out.splitlines() if l.startswith("nu_d^2"))
    assert "0.199471" in line
    assert float(line.split("delta=")[1].split()[0]) < 1e-6


def test_constants_gaussian(capsys):
    assert main(["constants", "--kernel", "gaussian"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "0.199471" in next(l for l in out.splitlines() if l.startswith("nu_l^2"))
    assert "0.282095" in next(l for l in out.splitlines() if l.startswith("R(K)"))


def test_constants_q5_flagged(capsys):
    assert main(["constants", "--kernel", "vonmises", "--q", "5"]) == EXIT_OK
    line = next(l for l in capsys.readouterr().out.splitlines() if l.startswith("nu_d^2"))
    assert "approximate" in line
    value = float(line.split()[1])
    assert value == pytest.approx((8 * math.pi) ** -2.5, rel=0.05)


def test_constants_table_closed_forms():
    for name, v, ref, approx in constants_table("epanechnikov", 2):
        if ref is not None:
            assert v == pytest.approx(ref, rel=1e-8)
    assert main(["constants", "--kernel", "nope"]) == EXIT_USAGE


# -- sim --------------------------------------------------------------------------------


def test_sim_t3_rows_per_n(tmp_path):
    out = tmp_path / "runs"
    assert main(["sim", "t3-convergence", "--n", "60,120", "--M", "5", "--seed", "7", "--out", str(out)]) == EXIT_OK
    lines = (out / "t3-convergence_replicates.csv").read_text().splitlines()[1:]
    counts = {}
    for l in lines:
        n = int(l.split(",")[1])
        counts[n] = counts.get(n, 0) + 1
    assert counts == {60: 5, 120: 5}
    cfg = json.loads((out / "t3-convergence_config.json").read_text())
    assert cfg["seed"] == 7 and cfg["n"] == [60, 120]


def test_sim_t6_two_qq_files(tmp_path):
    out = tmp_path / "runs"
    assert main(["sim", "t6-convergence", "--rates", "1/3,1/5", "--n", "100", "--M", "4", "--seed", "1",
                 "--out", str(out)]) == EXIT_OK
    assert len(list(out.glob("t6-convergence_qq_*.csv"))) == 2


def test_sim_full_ladder_dry_run(capsys):
    assert main(["sim", "t3-convergence", "--full", "--M", "2", "--seed", "1", "--dry-run"]) == EXIT_OK
    cfg = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert 500_000 in cfg["n"] and cfg["M"] == 2


def test_sim_config_precedence(tmp_path, capsys):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"M": 9, "n": [30], "kappa": 2.0}))
    assert main(["sim", "t3-convergence", "--config", str(path), "--M", "3", "--seed", "1", "--dry-run"]) == EXIT_OK
    cfg = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert cfg["M"] == 3 and cfg["n"] == [30] and cfg["kappa"] == 2.0


def test_sim_unknown_config_field(tmp_path, capsys):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"bogus": 1}))
    assert main(["sim", "t3-convergence", "--config", str(path), "--seed", "1", "--dry-run"]) == EXIT_USAGE
    assert "bogus" in capsys.readouterr().err
    assert main(["sim", "t3-convergence", "--M", "1", "--seed", "1", "--dry-run"]) == EXIT_USAGE


def test_sim_byte_identical_across_threads(tmp_path):
    for t in ("1", "2"):
        assert main(["sim", "size-power", "--statistic", "t6", "--n", "40", "--M", "4", "--B", "19",
                     "--seed", "3", "--threads", t, "--out", str(tmp_path / t)]) == EXIT_OK
    for f in (tmp_path / "1").iterdir():
        assert f.read_bytes() == (tmp_path / "2" / f.name).read_bytes(), f.name


def test_env_threads(monkeypatch, xy, tmp_path):
    monkeypatch.setenv("DIRGOF_THREADS", "2")
    out = tmp_path / "r.json"
    assert main(["test", "indep", "--data", str(xy), "--h", "0.5", "--g", "0.5", "--B", "19",
                 "--seed", "1", "--out", str(out)]) == EXIT_OK
