import json
import subprocess
import sys

import numpy as np
import pytest

from vecassoc.cli import SEED_ENV, main
from vecassoc.copulas import CopulaSpec, sample

SIM = ["simulate", "--family", "clayton", "--thetas", "1", "--sizes", "20", "--replications", "6",
       "--bootstrap", "5", "--population-n", "0"]  # fmt: skip


@pytest.fixture
def mono(tmp_path):
    t = np.arange(1, 51, dtype=float)
    path = tmp_path / "mono.csv"
    path.write_text("x,y\n" + "".join(f"{float(a)!r},{float(b)!r}\n" for a, b in zip(t, np.exp(t / 10))))
    return path


@pytest.fixture
def panel_file(tmp_path):
    u = sample(CopulaSpec.equicorrelated(0.4, 2, 2), 70, seed=3).data
    path = tmp_path / "levels.csv"
    lines = ["date,a,b,c,d"]
    level = np.cumprod(1 + (u - 0.5) / 50, axis=0) * 100
    for i, row in enumerate(level):
        lines.append(f"2020-{1 + i // 28:02d}-{1 + i % 28:02d}," + ",".join(repr(float(v)) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    lines = text.strip().splitlines()
    header = lines[0].split(",")
    return [dict(zip(header, ln.split(","))) for ln in lines[1:]]


def test_estimate_monotone(mono, capsys):
    code, out, _ = run(["estimate", mono, "--partition", "p=1,q=1", "--measures", "rho_bar",
                        "--convention", "normalized"], capsys)  # fmt: skip
    assert code == 0
    (r,) = rows(out)
    assert (r["measure"], float(r["value"]), r["n"], r["convention"]) == ("rho_bar", 1.0, "50", "normalized")
    code, out, _ = run(["estimate", mono, "--partition", "p=1,q=1", "--measures", "rho_bar",
                        "--convention", "paper_literal"], capsys)  # fmt: skip
    assert float(rows(out)[0]["value"]) == 1 - 6 / 50 + 2 / 2500 == 0.8808


def test_estimate_all_measures_with_se(mono, capsys):
    code, out, _ = run(["estimate", mono, "--x-labels", "x", "--y-labels", "y", "--measures", "all",
                        "--resampling", "jackknife"], capsys)  # fmt: skip
    assert code == 0
    got = rows(out)
    assert [r["measure"] for r in got] == ["rho_bar", "rho1", "rho2", "rho3", "rho4", "cca", "rv", "dcor"]
    assert all(r["se_method"] == "jackknife" and float(r["se"]) >= 0 for r in got)


def test_missing_partition_is_usage_error(mono, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["estimate", str(mono)])
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_exit_codes(tmp_path, mono, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n1,2\n3,oops\n")
    code, _, err = run(["estimate", bad, "--partition", "p=1,q=1"], capsys)
    assert code == 2 and "row 3" in err
    code, _, _ = run(["estimate", tmp_path / "nope.csv", "--partition", "p=1,q=1"], capsys)
    assert code == 2
    flat = tmp_path / "flat.csv"
    flat.write_text("x,y\n" + "1,2\n1,3\n1,4\n")
    code, _, err = run(["estimate", flat, "--partition", "p=1,q=1", "--measures", "rho_bar"], capsys)
    assert code == 3 and "degenerate" in err
    with pytest.raises(SystemExit) as exc:
        main(["estimate", str(mono), "--partition", "p=1,q=1", "--measures", "kendall"])
    assert exc.value.code == 2


def test_bound(capsys):
    code, out, _ = run(["bound"], capsys)
    assert code == 0
    vals = {r["quantity"]: float(r["value"]) for r in rows(out)}
    assert vals["integral"] == pytest.approx(0.05548, abs=1e-4)
    assert vals["rho1_max"] == pytest.approx(0.8408, abs=1e-3)
    _, out2, _ = run(["bound", "--grid", "4000"], capsys)
    vals2 = {r["quantity"]: float(r["value"]) for r in rows(out2)}
    assert abs(vals2["integral"] - vals["integral"]) < 1e-6


@pytest.mark.parametrize("sub", ["estimate", "simulate", "bound", "rolling", "density"])
def test_help_exits_zero(sub):
    res = subprocess.run([sys.executable, "-m", "vecassoc", sub, "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "--seed" in res.stdout and "--dry-run" in res.stdout


def test_dry_run_prints_manifest(mono, capsys):
    code, out, _ = run(["simulate", "--table", "1", "--seed", "7", "--dry-run"], capsys)
    assert code == 0
    man = json.loads(out)
    assert man["subcommand"] == "simulate" and man["seed"] == 7
    assert man["config"]["table"] == 1
    code, out, _ = run(["estimate", mono, "--partition", "p=1,q=1", "--dry-run"], capsys)
    assert json.loads(out)["inputs"][str(mono)]


def test_manifest_sidecar(tmp_path, capsys):
    out = tmp_path / "bound.csv"
    assert run(["bound", "-o", out], capsys)[0] == 0
    man = json.loads((tmp_path / "bound.csv.manifest.json").read_text())
    assert man["subcommand"] == "bound" and man["config"]["grid"] == 2000


def test_env_seed(monkeypatch, capsys):
    monkeypatch.setenv(SEED_ENV, "42")
    _, out, _ = run(["bound", "--dry-run"], capsys)
    assert json.loads(out)["seed"] == 42
    _, out, _ = run(["bound", "--dry-run", "--seed", "3"], capsys)
    assert json.loads(out)["seed"] == 3
    a = run(SIM, capsys)[1]
    monkeypatch.setenv(SEED_ENV, "43")
    assert run(SIM, capsys)[1] != a
    monkeypatch.setenv(SEED_ENV, "x")
    with pytest.raises(SystemExit) as exc:
        main(["bound"])
    assert exc.value.code == 2


def test_simulate_layout(capsys):
    code, out, _ = run(SIM + ["--seed", "1"], capsys)
    assert code == 0
    header = out.splitlines()[0].split(",")
    assert header == ["measure", "p", "q", "theta", "n", "true_value", "mean_estimate", "sd_estimate",
                      "mean_boot_se", "mean_jack_se", "sd_boot_se", "sd_jack_se"]  # fmt: skip
    (r,) = rows(out)
    assert r["theta"] == "1.0" and r["n"] == "20" and r["true_value"] == ""


def test_copula_file(tmp_path, capsys):
    spec = tmp_path / "model.txt"
    spec.write_text(CopulaSpec.equicorrelated(0.3, 1, 2).to_text())
    code, out, _ = run(["simulate", "--copula", spec, "--sizes", "20", "--replications", "4",
                        "--bootstrap", "0", "--population-n", "0"], capsys)  # fmt: skip
    assert code == 0 and rows(out)[0]["q"] == "2"


def test_rolling_output(panel_file, capsys):
    code, out, err = run(["rolling", panel_file, "--partition", "p=2,q=2", "--format", "levels",
                          "--window", "50"], capsys)  # fmt: skip
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "window_start,rho_bar,rho1,rho2,rho3,rho4,cca,rv,dcor"
    assert len(lines) == 1 + (69 - 50 + 1)
    code, _, err = run(["rolling", panel_file, "--partition", "p=2,q=2", "--window", "71"], capsys)
    assert code == 2


def test_density_output(tmp_path, capsys):
    summary = tmp_path / "ks.csv"
    code, out, _ = run(["density", "--family", "clayton", "--param", "2", "--n", "30", "--replications", "50",
                        "--grid=-3:3:7", "--summary", summary], capsys)  # fmt: skip
    assert code == 0
    assert len(out.strip().splitlines()) == 1 + 7
    assert "ks" in summary.read_text().splitlines()[0]


DETERMINISM_CASES = {
    "simulate": SIM,
    "density": ["density", "--family", "gaussian_block", "--param", "0.75", "--n", "30", "--replications", "40",
                "--grid=-3:3:13", "--summary", "{tmp}/s.csv"],
    "bound": ["bound", "--grid", "500"],
    "rolling": ["rolling", "{panel}", "--partition", "p=2,q=2", "--window", "60", "--resampling", "bootstrap",
                "--b", "10"],
    "estimate": ["estimate", "{panel}", "--partition", "x=a,c;y=b,d", "--resampling", "bootstrap", "--b", "20"],
}  # fmt: skip


@pytest.mark.parametrize("name", sorted(DETERMINISM_CASES))
def test_byte_identical_across_workers(name, tmp_path, panel_file, capsys):
    outputs = []
    for workers in (1, 2, 1):
        target = tmp_path / f"{name}_{workers}_{len(outputs)}.csv"
        argv = [a.format(tmp=tmp_path, panel=panel_file) for a in DETERMINISM_CASES[name]]
        assert main(argv + ["--seed", "11", "--workers", str(workers), "-o", str(target)]) == 0
        outputs.append(target.read_bytes())
    capsys.readouterr()
    assert outputs[0] == outputs[1] == outputs[2]
    assert len(outputs[0]) > 20
