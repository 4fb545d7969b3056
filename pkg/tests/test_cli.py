import csv
import json
import math

import numpy as np
import pytest
import yaml

from exactsplit.cli import EXIT_CONFIG, EXIT_DIVERGE, EXIT_OK, EXIT_VERIFY, main
from exactsplit.engine import load_field, l2_norm
from exactsplit.program import SplittingProgram


def run(*argv):
    return main(list(argv))


def test_factor_harmonic_writes_program_and_report(tmp_path):
    out = tmp_path / "job"
    code = run("factor", "--problem", "harmonic", "--t", "0.5", "--out", str(out))
    assert code == EXIT_OK
    prog = SplittingProgram.load(out / "program.json")
    assert prog.step_count() == 3
    report = json.loads((out / "report.json").read_text())
    assert report["ok"] and report["residual"] <= 1e-12


def test_factor_near_singular_angle_exits_3(tmp_path):
    code = run("factor", "--problem", "rotation2d", "--theta", "3.1415",
               "--out", str(tmp_path))
    assert code == EXIT_DIVERGE


def test_factor_unknown_problem_exits_4(tmp_path):
    code = run("factor", "--problem", "harmonic", "--config",
               str(tmp_path / "missing.yaml"))
    assert code == EXIT_CONFIG


def test_config_file_with_overrides(tmp_path):
    cfg = {"problem": "kfp", "params": {"t": 0.3}}
    path = tmp_path / "job.yaml"
    path.write_text(yaml.safe_dump(cfg))
    code = run("factor", "--config", str(path), "--out", str(tmp_path / "o"))
    assert code == EXIT_OK
    prog = SplittingProgram.load(tmp_path / "o" / "program.json")
    assert prog.provenance == "catalog:kfp"


def test_verify_roundtrip(tmp_path):
    out = tmp_path / "f"
    assert run("factor", "--problem", "fokker_planck", "--t", "0.4",
               "--out", str(out)) == EXIT_OK
    assert run("verify", "--program", str(out / "program.json")) == EXIT_OK


def test_verify_detects_tampering(tmp_path):
    out = tmp_path / "f"
    run("factor", "--problem", "harmonic", "--t", "0.5", "--out", str(out))
    doc = json.loads((out / "program.json").read_text())
    doc["steps"][0]["matrix"][0][0] += 1e-3
    (out / "program.json").write_text(json.dumps(doc))
    assert run("verify", "--program", str(out / "program.json")) == EXIT_VERIFY


def test_solve_harmonic_ground_state_decay(tmp_path):
    out = tmp_path / "s"
    code = run("solve", "--problem", "harmonic", "--t-final", "1.0",
               "--n-steps", "10", "--grid-size", "128",
               "--grid-bounds", "-10", "10", "--out", str(out))
    assert code == EXIT_OK
    field = load_field(out / "field_final.bin")
    expected = math.pi ** 0.25 * math.exp(-1.0)
    assert abs(l2_norm(field) / expected - 1.0) < 1e-8
    with open(out / "diagnostics.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["time_step", "step_index", "kind", "norm_after",
                       "fft_calls", "boundary_mass"]
    assert len(rows) == 1 + 10 * 3


def test_solve_zero_steps_copies_field(tmp_path):
    out = tmp_path / "z"
    code = run("solve", "--problem", "harmonic", "--t-final", "0.0",
               "--n-steps", "0", "--grid-size", "64",
               "--grid-bounds", "-8", "8", "--out", str(out))
    assert code == EXIT_OK
    field = load_field(out / "field_final.bin")
    x = np.linspace(-8, 8, 64, endpoint=False)
    assert np.array_equal(field.values, np.exp(-x ** 2 / 2).astype(complex))


def test_solve_reuses_factored_program(tmp_path):
    f1 = tmp_path / "f1"
    run("factor", "--problem", "harmonic", "--t", "0.1", "--out", str(f1))
    out1 = tmp_path / "s1"
    out2 = tmp_path / "s2"
    common = ["--t-final", "1.0", "--n-steps", "10", "--grid-size", "96",
              "--grid-bounds", "-10", "10"]
    assert run("solve", "--problem", "harmonic", *common, "--out", str(out1)) == EXIT_OK
    assert run("solve", "--problem", "harmonic", "--program",
               str(f1 / "program.json"), *common, "--out", str(out2)) == EXIT_OK
    a = (out1 / "diagnostics.csv").read_text()
    b = (out2 / "diagnostics.csv").read_text()
    assert a == b  # bit-identical diagnostics from the reloaded program


def test_solve_fp_maxwellian_invariant(tmp_path):
    cfg = {
        "problem": "fokker_planck",
        "t_final": 0.8,
        "n_steps": 2,
        "grid": {"sizes": [48, 96], "bounds": [[-6.0, 6.0], [-10.0, 10.0]]},
        "initial": {"type": "preset", "preset": "maxwellian"},
    }
    path = tmp_path / "fp.yaml"
    path.write_text(yaml.safe_dump(cfg))
    out = tmp_path / "fp"
    assert run("solve", "--config", str(path), "--out", str(out)) == EXIT_OK
    field = load_field(out / "field_final.bin")
    v = np.linspace(-10, 10, 96, endpoint=False)
    expected = np.exp(-v ** 2 / 2)[None, :] * np.ones((48, 1))
    err = np.sqrt(np.sum(np.abs(field.values - expected) ** 2)
                  / np.sum(expected ** 2))
    assert err < 1e-7


def test_solve_field_dumps(tmp_path):
    out = tmp_path / "d"
    cfg = {
        "problem": "harmonic",
        "t_final": 0.4,
        "n_steps": 4,
        "grid": {"sizes": [64], "bounds": [[-8.0, 8.0]]},
        "outputs": {"field_dump_every": 2},
    }
    path = tmp_path / "d.yaml"
    path.write_text(yaml.safe_dump(cfg))
    assert run("solve", "--config", str(path), "--out", str(out)) == EXIT_OK
    assert (out / "field_000002.bin").exists()
    assert (out / "field_000004.bin").exists()


def test_bench_smoke(tmp_path):
    out = tmp_path / "b"
    code = run("bench", "--problem", "harmonic", "--t-final", "0.4",
               "--taus", "0.1", "--grid-size", "64", "--grid-bounds", "-9", "9",
               "--out", str(out))
    assert code == EXIT_OK
    with open(out / "bench.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["method", "t", "steps", "fft_calls", "error_vs_oracle",
                       "wall_time"]
    methods = {r[0] for r in rows[1:]}
    assert methods == {"exact", "strang"}
    # same FFT cost per step for exact and Strang on this problem
    by_method = {r[0]: r for r in rows[1:]}
    assert by_method["exact"][3] == by_method["strang"][3]
    assert float(by_method["exact"][4]) < 1e-10 < float(by_method["strang"][4])


def test_schrodinger_factor_writes_iteration_log(tmp_path):
    out = tmp_path / "schro"
    cfg = {
        "problem": "schrodinger",
        "params": {"t": 0.1, "V": [[1.0, 0.0], [0.0, 1.0]],
                   "B": [[0.0, 1.0], [-1.0, 0.0]]},
    }
    path = tmp_path / "schro.yaml"
    path.write_text(yaml.safe_dump(cfg))
    assert run("factor", "--config", str(path), "--out", str(out)) == EXIT_OK
    lines = (out / "iterations.jsonl").read_text().strip().splitlines()
    recs = [json.loads(line) for line in lines]
    assert all({"k", "residual", "digest"} <= set(r) for r in recs)
    assert recs[-1]["residual"] < 1e-12


def test_solve_schrodinger_norm_preserving(tmp_path):
    cfg = {
        "problem": "schrodinger",
        "params": {"t": 0.1, "V": [[1.0, 0.0], [0.0, 1.0]],
                   "B": [[0.0, 1.0], [-1.0, 0.0]]},
        "t_final": 0.5,
        "n_steps": 5,
        "grid": {"sizes": [48, 48], "bounds": [[-8.0, 8.0], [-8.0, 8.0]]},
        "initial": {"type": "gaussian", "center": [0.6, 0.0], "width": [1.0, 1.1]},
    }
    path = tmp_path / "s.yaml"
    path.write_text(yaml.safe_dump(cfg))
    out = tmp_path / "s"
    assert run("solve", "--config", str(path), "--out", str(out)) == EXIT_OK
    with open(out / "diagnostics.csv") as fh:
        rows = list(csv.DictReader(fh))
    norms = [float(r["norm_after"]) for r in rows]
    assert max(norms) / min(norms) - 1.0 < 1e-11  # unitary propagation
    # per time step: 5 program steps, 4 fused FFT passes -> 4*48 calls
    calls = [int(r["fft_calls"]) for r in rows if r["time_step"] == "0"]
    assert calls[-1] == 4 * 48


def test_factor_shear_matrix_config(tmp_path):
    cfg = {"problem": "shear_factor",
           "params": {"matrix": [[1.0, 0.5], [0.0, 1.0]]}}
    path = tmp_path / "g.yaml"
    path.write_text(yaml.safe_dump(cfg))
    out = tmp_path / "g"
    assert run("factor", "--config", str(path), "--out", str(out)) == EXIT_OK
    prog = SplittingProgram.load(out / "program.json")
    assert all(s.kind == "shear" for s in prog.steps)
    assert prog.target_map is not None


def test_custom_symbol_problem(tmp_path):
    sym = {
        "n": 1,
        "Q_re": [[1.0, 0.0], [0.0, 0.5]],
        "Q_im": [[0.0, 0.0], [0.0, 0.0]],
        "Y_re": [-2.0, 0.0],
        "Y_im": [0.0, 0.0],
        "c_re": 1.0,
        "c_im": 0.0,
    }
    cfg = {"problem": "custom_symbol", "params": {"symbol": sym, "t": 0.5}}
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump(cfg))
    assert run("factor", "--config", str(path), "--out", str(tmp_path / "c")) == EXIT_OK
