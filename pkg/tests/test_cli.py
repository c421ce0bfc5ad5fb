"""End-to-end checks of the command line harness.

Everything here drives ojak.cli.main in process with small configs written
to tmp_path, except one subprocess test that makes sure `python -m ojak`
is wired up. The big invariants: a bad config exits 2 and leaves no partial
outputs, results are byte-deterministic in (seed, config) and independent
of --threads, and the sweep agrees with a plain run at the same point.
"""

import json
import os
import subprocess
import sys

import pytest

from ojak.cli import CHECKERS, main
from ojak.oja import CSV_HEADER
from ojak.rng import GENERATOR_ID

SPIKED4 = {
    "kind": "spiked_support",
    "eigenvalues": [1.0, 0.7, 0.3, 0.1],
    "k": 1,
    "noise_scale": 0.3,
    "n_pairs": 2,
    "seed": 3,
}

# single symmetric atom, zero noise: the practical schedule collapses to
# t0 = 0, beta = 1 and the trajectory is deterministic given the start frame
ONE_ATOM = {
    "kind": "finite_support",
    "atoms": [[[5.0, 0.0], [0.0, 1.0]]],
    "weights": [1.0],
    "k": 1,
}


@pytest.fixture(autouse=True)
def _no_ambient_seed(monkeypatch):
    monkeypatch.delenv("OJAK_SEED", raising=False)


def cfg_file(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg), encoding="utf-8")
    return str(path)


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def test_run_writes_trace_and_summary(tmp_path, capsys):
    cfg = cfg_file(tmp_path, {"distribution": SPIKED4, "T": 32, "trials": 5,
                              "seed": 12})
    out = tmp_path / "out"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0

    text = (out / "trace.csv").read_text(encoding="utf-8")
    lines = text.splitlines()
    assert lines[0] == CSV_HEADER
    # full record grid for small T: t = 0..T inclusive, per trial
    assert len(lines) == 1 + 5 * 33

    raw = (out / "summary.json").read_text(encoding="utf-8")
    assert raw.endswith("}\n")
    summary = json.loads(raw)
    assert summary["d"] == 4 and summary["k"] == 1
    assert summary["T"] == 32 and summary["trials"] == 5
    assert summary["seed"] == 12
    assert summary["generator"] == GENERATOR_ID
    assert 0.0 <= summary["survival_final"] <= 1.0
    assert summary["config"]["distribution"] == SPIKED4

    per_t = summary["per_t"]
    assert per_t["t"][0] == 0 and per_t["t"][-1] == 32
    assert per_t["eta"][0] == 0.0
    assert len(per_t["subspace_dist"]["q50"]) == 33
    surv = per_t["survival"]
    assert all(a >= b for a, b in zip(surv, surv[1:]))
    assert set(per_t["phase"]) <= {1, 2}

    out_text = capsys.readouterr().out
    assert "== ojak run" in out_text and "wrote" in out_text


def test_run_single_trial_quantiles_collapse(tmp_path):
    cfg = cfg_file(tmp_path, {"distribution": ONE_ATOM, "T": 16, "trials": 1,
                              "seed": 3, "warm_start_w": 0.5})
    out = tmp_path / "out"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0
    summary = read_json(out / "summary.json")

    assert summary["schedule"]["t0"] == 0
    assert summary["schedule"]["beta"] == 1.0
    per_t = summary["per_t"]
    # all steps past the burn-in, which is empty here
    assert all(p == 2 for p in per_t["phase"])

    q = per_t["subspace_dist"]
    assert q["q10"] == q["q50"] == q["q90"]
    assert q["q50"][-1] < q["q50"][1]
    assert summary["survival_final"] == 1.0

    lines = (out / "trace.csv").read_text(encoding="utf-8").splitlines()
    assert len(lines) == 1 + 17


def test_run_repeats_are_byte_identical(tmp_path):
    cfg = cfg_file(tmp_path, {"distribution": SPIKED4, "T": 32, "trials": 8,
                              "seed": 5})
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", cfg, "--out", str(out_a)]) == 0
    assert main(["run", "--config", cfg, "--out", str(out_b)]) == 0

    assert (out_a / "trace.csv").read_bytes() == (out_b / "trace.csv").read_bytes()

    sa, sb = read_json(out_a / "summary.json"), read_json(out_b / "summary.json")
    for s in (sa, sb):
        s.pop("wall_clock_s")
        s["config"].pop("out")
    assert sa == sb


def test_run_threads_do_not_change_results(tmp_path):
    cfg = cfg_file(tmp_path, {"distribution": SPIKED4, "T": 32, "trials": 40,
                              "seed": 9})
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", cfg, "--out", str(out_a),
                 "--threads", "1"]) == 0
    assert main(["run", "--config", cfg, "--out", str(out_b),
                 "--threads", "3"]) == 0
    assert (out_a / "trace.csv").read_bytes() == (out_b / "trace.csv").read_bytes()


def test_bad_configs_exit_2_without_outputs(tmp_path, capsys):
    variants = []

    def variant(command, cfg_obj, name):
        variants.append((command, cfg_file(tmp_path, cfg_obj, name)))

    variant("run", {"distribution": ONE_ATOM, "T": 8, "trials": 0}, "v0.json")
    variant("run", {"distribution": {"kind": "mystery"}, "T": 8, "trials": 1},
            "v1.json")
    variant("run", {"distribution": ONE_ATOM}, "v2.json")
    variant("verify", {"checkers": ["not_a_checker"]}, "v3.json")
    variant("sweep", {"distribution": ONE_ATOM, "T": 8, "trials": 1,
                      "axis": "eta", "values": "4,8"}, "v4.json")
    variant("sweep", {"distribution": ONE_ATOM, "T": 8, "trials": 1,
                      "axis": "T", "values": ""}, "v5.json")
    # a d sweep needs the generated eigenvalue form, not a literal list
    variant("sweep", {"distribution": SPIKED4, "T": 8, "trials": 1,
                      "axis": "d", "values": "6,8"}, "v6.json")

    broken = tmp_path / "broken.json"
    broken.write_text("{nope", encoding="utf-8")
    variants.append(("run", str(broken)))

    for i, (command, cfg) in enumerate(variants):
        out = tmp_path / f"never_{i}"
        rc = main([command, "--config", cfg, "--out", str(out)])
        err = capsys.readouterr().err
        assert rc == 2, f"variant {i} returned {rc}"
        assert "config error:" in err
        assert not out.exists(), f"variant {i} left a partial output directory"


def test_seed_precedence(tmp_path, monkeypatch):
    def resolved_seed(cfg_obj, argv_extra, name):
        cfg = cfg_file(tmp_path, dict(cfg_obj, checkers=[]), name)
        out = tmp_path / ("out_" + name)
        rc = main(["verify", "--config", cfg, "--out", str(out)] + argv_extra)
        assert rc == 0
        return read_json(out / "verify.json")["seed"]

    monkeypatch.setenv("OJAK_SEED", "123")
    assert resolved_seed({"seed": 7}, ["--seed", "42"], "s0.json") == 42
    assert resolved_seed({"seed": 7}, [], "s1.json") == 7
    assert resolved_seed({}, [], "s2.json") == 123

    monkeypatch.delenv("OJAK_SEED")
    assert resolved_seed({}, [], "s3.json") == 0

    monkeypatch.setenv("OJAK_SEED", "pony")
    cfg = cfg_file(tmp_path, {"checkers": []}, "s4.json")
    assert main(["verify", "--config", cfg, "--out", str(tmp_path / "s4")]) == 2


def test_verify_default_instance_passes(tmp_path, capsys):
    cfg = cfg_file(tmp_path, {"p_grid": [2, 4], "seed": 1})
    out = tmp_path / "out"
    assert main(["verify", "--config", cfg, "--out", str(out)]) == 0

    report = read_json(out / "verify.json")
    assert report["ok"] is True
    names = [entry["name"] for entry in report["checkers"]]
    assert names == list(CHECKERS)
    assert all(entry["ok"] for entry in report["checkers"])

    out_text = capsys.readouterr().out
    assert out_text.count(" pass") == len(CHECKERS)
    assert "FAIL" not in out_text


def test_verify_flags_asymmetric_atom(tmp_path, capsys):
    bad = {
        "kind": "finite_support",
        "atoms": [[[1.0, 0.3], [0.0, 1.0]]],
        "weights": [1.0],
        "k": 1,
    }
    cfg = cfg_file(tmp_path, {"distribution": bad,
                              "checkers": ["validate_assumptions"],
                              "seed": 4})
    out = tmp_path / "out"
    assert main(["verify", "--config", cfg, "--out", str(out)]) == 1

    report = read_json(out / "verify.json")
    assert report["ok"] is False
    entry = report["checkers"][0]
    assert entry["ok"] is False
    joined = " ".join(entry["stream_violations"])
    assert "symmetry defect" in joined
    assert "FAIL" in capsys.readouterr().out


def test_verify_with_no_checkers(tmp_path):
    cfg = cfg_file(tmp_path, {"checkers": [], "seed": 2})
    out = tmp_path / "out"
    assert main(["verify", "--config", cfg, "--out", str(out)]) == 0
    report = read_json(out / "verify.json")
    assert report["checkers"] == [] and report["ok"] is True


def test_run_with_overrides_reaches_decay(tmp_path):
    cfg = cfg_file(tmp_path, {
        "distribution": SPIKED4, "T": 256, "trials": 30, "seed": 5,
        "warm_start_w": 0.9, "schedule": {"overrides": {"t0": 0}},
    })
    out = tmp_path / "out"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0
    summary = read_json(out / "summary.json")

    assert summary["schedule"]["t0"] == 0
    assert summary["config"]["schedule_overrides"] == {"t0": 0}
    per_t = summary["per_t"]
    assert all(p == 2 for p in per_t["phase"])
    assert per_t["bound"][0] is None
    assert all(b is not None for b in per_t["bound"][1:])
    assert summary["slope"] is not None and summary["slope"] < 0
    assert summary["survival_final"] > 0.5


def test_run_theoretical_profile_stays_in_burn_in(tmp_path):
    cfg = cfg_file(tmp_path, {"distribution": SPIKED4, "T": 16, "trials": 3,
                              "seed": 8})
    out = tmp_path / "out"
    assert main(["run", "--config", cfg, "--out", str(out),
                 "--profile", "theoretical"]) == 0
    summary = read_json(out / "summary.json")

    # the worst-case burn-in length dwarfs any runnable horizon
    assert summary["schedule"]["t0"] > 10 ** 6
    per_t = summary["per_t"]
    assert all(p == 1 for p in per_t["phase"][1:])
    eta1 = summary["schedule"]["phase1_eta"]
    assert eta1 > 0
    assert all(e == eta1 for e in per_t["eta"][1:])
    assert all(b is None for b in per_t["bound"])
    assert summary["slope"] is None
    assert summary["config"]["profile"] == "theoretical"


def test_sweep_T_axis_matches_plain_run(tmp_path):
    base = {"distribution": SPIKED4, "T": 64, "trials": 40, "seed": 12}
    cfg = cfg_file(tmp_path, base)
    out_run, out_sweep = tmp_path / "run", tmp_path / "sweep"
    assert main(["run", "--config", cfg, "--out", str(out_run)]) == 0
    assert main(["sweep", "--config", cfg, "--out", str(out_sweep),
                 "--axis", "T", "--values", "64"]) == 0

    summary = read_json(out_run / "summary.json")
    sweep = read_json(out_sweep / "sweep_summary.json")
    row = sweep["rows"][0]
    assert row["median_dist"] == pytest.approx(
        summary["per_t"]["subspace_dist"]["q50"][-1], rel=1e-15)
    assert row["survival"] == pytest.approx(summary["survival_final"], rel=1e-15)

    lines = (out_sweep / "sweep.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == ("axis,value,d,k,t0,beta,eta_T,median_dist,q25_dist,"
                        "q75_dist,survival")
    assert len(lines) == 2
    assert float(lines[1].split(",")[7]) == pytest.approx(row["median_dist"],
                                                          rel=1e-15)


def test_sweep_T_axis_slope_is_negative(tmp_path):
    cfg = cfg_file(tmp_path, {
        "distribution": SPIKED4, "T": 64, "trials": 30, "seed": 5,
        "warm_start_w": 0.9, "schedule": {"overrides": {"t0": 0}},
    })
    out = tmp_path / "out"
    assert main(["sweep", "--config", cfg, "--out", str(out),
                 "--axis", "T", "--values", "256,1024"]) == 0
    sweep = read_json(out / "sweep_summary.json")
    assert len(sweep["rows"]) == 2
    assert sweep["slope"] is not None and sweep["slope"] < 0


def test_sweep_noise_and_beta_axes(tmp_path):
    cfg = cfg_file(tmp_path, {"distribution": SPIKED4, "T": 32, "trials": 5,
                              "seed": 6})

    out_n = tmp_path / "noise"
    assert main(["sweep", "--config", cfg, "--out", str(out_n),
                 "--axis", "noise_scale", "--values", "0.2,0.4"]) == 0
    rows = read_json(out_n / "sweep_summary.json")["rows"]
    # burn-in length scales with the square of the noise bound
    ratio = rows[1]["t0"] / rows[0]["t0"]
    assert 3.5 <= ratio <= 4.5
    assert all(0.0 <= r["survival"] <= 1.0 for r in rows)

    out_b = tmp_path / "beta"
    assert main(["sweep", "--config", cfg, "--out", str(out_b),
                 "--axis", "beta", "--values", "50,100"]) == 0
    rows = read_json(out_b / "sweep_summary.json")["rows"]
    assert [r["beta"] for r in rows] == [50.0, 100.0]
    assert rows[0]["t0"] == rows[1]["t0"]


def test_sweep_d_axis_on_generated_eigenvalues(tmp_path):
    dist = {
        "kind": "bounded_noise",
        "d": 6,
        "k": 2,
        "eigenvalues": {"head": [1.0, 0.8], "tail": [0.4, 0.1]},
        "noise_scale": 0.3,
        "seed": 2,
    }
    cfg = cfg_file(tmp_path, {"distribution": dist, "T": 24, "trials": 2,
                              "seed": 11})
    out = tmp_path / "out"
    assert main(["sweep", "--config", cfg, "--out", str(out),
                 "--axis", "d", "--values", "6,8"]) == 0
    lines = (out / "sweep.csv").read_text(encoding="utf-8").splitlines()
    assert [int(line.split(",")[2]) for line in lines[1:]] == [6, 8]


def test_sweep_delta_axis_theoretical_burn_in_ratio(tmp_path):
    dist = {
        "kind": "spiked_support",
        "eigenvalues": [1.0, 0.8, 0.3, 0.22, 0.17, 0.14, 0.12, 0.1],
        "k": 2,
        "noise_scale": 0.4,
        "n_pairs": 2,
        "seed": 99,
    }
    cfg = cfg_file(tmp_path, {"distribution": dist, "T": 40, "trials": 2,
                              "seed": 13})
    out = tmp_path / "out"
    assert main(["sweep", "--config", cfg, "--out", str(out),
                 "--profile", "theoretical",
                 "--axis", "delta", "--values", "0.1,0.2"]) == 0
    rows = read_json(out / "sweep_summary.json")["rows"]
    # halving the failure budget costs about a factor four of burn-in,
    # plus slowly varying log terms
    ratio = rows[0]["t0"] / rows[1]["t0"]
    assert 3.0 <= ratio <= 8.0
    assert all(r["t0"] > 10 ** 6 for r in rows)
    assert all(r["eta_T"] > 0 for r in rows)


def test_resolver_rejects_bad_knobs(tmp_path):
    out = str(tmp_path / "out")

    cfg = cfg_file(tmp_path, {"p_grid": [1.5], "checkers": []}, "r0.json")
    assert main(["verify", "--config", cfg, "--out", out]) == 2

    cfg = cfg_file(tmp_path, {"checkers": []}, "r1.json")
    assert main(["verify", "--config", cfg, "--out", out, "--threads", "0"]) == 2
    assert main(["verify", "--config", cfg, "--out", out, "--seed", "-1"]) == 2

    cfg = cfg_file(tmp_path, {"schedule": {"profile": "magic"},
                              "checkers": []}, "r2.json")
    assert main(["verify", "--config", cfg, "--out", out]) == 2

    cfg = cfg_file(tmp_path, {"schedule": {"overrides": {"zap": 1.0}},
                              "checkers": []}, "r3.json")
    assert main(["verify", "--config", cfg, "--out", out]) == 2

    cfg = cfg_file(tmp_path, {"distribution": {"kind": "finite_support",
                                               "atoms": [[[1.0]]], "k": 1},
                              "T": 8, "trials": 1}, "r4.json")
    assert main(["run", "--config", cfg, "--out", out]) == 2


def test_module_entry_point_oracle(tmp_path):
    res = subprocess.run(
        [sys.executable, "-m", "ojak", "oracle"],
        capture_output=True, text=True, timeout=300, cwd=str(tmp_path),
        env={k: v for k, v in os.environ.items() if k != "OJAK_SEED"},
    )
    assert res.returncode == 0, res.stderr
    assert "worked example values" in res.stdout
    assert "expect 2e" in res.stdout
    assert "exercised by the test suite" in res.stdout
