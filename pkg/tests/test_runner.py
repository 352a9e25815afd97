import json
import math
import shutil

import numpy as np
import pytest

from hybridnls.checkpoint import read_checkpoint, write_checkpoint
from hybridnls.cli import main
from hybridnls.config import RunConfig, dump_config
from hybridnls.errors import GridMismatch
from hybridnls.runner import (
    EXIT_BOUNDARY, EXIT_CONFIG, EXIT_ENVELOPE, EXIT_NONFINITE, EXIT_PICARD, compare, run, sweep,
)
from hybridnls.spectral import ComplexField, LineGrid, lp_norm

SMALL = dict(torus_n=32, line_n=1024, line_K=8, dt=2e-3, t_end=0.1, seed=0)


def _cfg(tmp_path, name="run", **kw):
    return RunConfig(**{**SMALL, "output_dir": str(tmp_path / name), **kw})


def _write(path, cfg):
    path.write_text(dump_config(cfg))
    return path


def test_constant_scenario_keeps_v_zero(tmp_path):
    out = run(_cfg(tmp_path, scenario="constant"))
    assert out.exit_code == 0, out.manifest.failures
    v = read_checkpoint(out.out_dir / f"v_{out.manifest.steps:06d}.bin")
    assert np.all(v.field.values == 0)
    assert np.all(out.ledger.mass_v == 0)
    m = json.loads((out.out_dir / "manifest.json").read_text())
    assert m["exit_code"] == 0 and m["regime"] == "global"


def test_plane_wave_error_recorded(tmp_path):
    out = run(_cfg(tmp_path, scenario="plane_wave", torus_n=64, line_n=2048, line_K=4, carrier_k=2,
                   dt=1e-3, t_end=0.2))
    assert out.exit_code == 0, out.manifest.failures
    assert out.manifest.results["plane_wave_l2_error"] <= 1e-8


def test_manifest_lists_files_with_hashes(tmp_path):
    out = run(_cfg(tmp_path, scenario="gaussian_on_carrier", checkpoint_every=25))
    m = json.loads((out.out_dir / "manifest.json").read_text())
    names = {f["name"] for f in m["files"]}
    assert {"ledger.csv", "config.resolved", "v_000000.bin", "v_000025.bin", "w_000050.bin"} <= names
    import hashlib
    for f in m["files"]:
        assert hashlib.sha256((out.out_dir / f["name"]).read_bytes()).hexdigest() == f["sha256"]
    assert m["config_hash"] == out.manifest.config_hash
    assert "scenario" not in m["defaulted_keys"]


def test_rerun_is_byte_identical(tmp_path):
    a = run(_cfg(tmp_path, "a", w_noise=0.1, seed=3))
    b = run(_cfg(tmp_path, "b", w_noise=0.1, seed=3))
    c = run(_cfg(tmp_path, "c", w_noise=0.1, seed=4))
    ledger = lambda o: (o.out_dir / "ledger.csv").read_bytes()
    assert ledger(a) == ledger(b)
    assert ledger(a) != ledger(c)
    assert a.manifest.config_hash == b.manifest.config_hash != c.manifest.config_hash


def test_restart_from_checkpoint_continues_run(tmp_path):
    full = run(_cfg(tmp_path, "full", t_end=0.2))
    half = run(_cfg(tmp_path, "half", t_end=0.1))
    steps = half.manifest.steps
    rest = run(_cfg(tmp_path, "rest", scenario="custom_checkpoint", t_end=0.1,
                    v0_path=str(half.out_dir / f"v_{steps:06d}.bin"),
                    w0_path=str(half.out_dir / f"w_{steps:06d}.bin")))
    assert rest.exit_code == 0, rest.manifest.failures
    a = read_checkpoint(full.out_dir / f"v_{2 * steps:06d}.bin").field.values
    b = read_checkpoint(rest.out_dir / f"v_{steps:06d}.bin").field.values
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_custom_checkpoint_grid_mismatch_is_config_error(tmp_path):
    half = run(_cfg(tmp_path, "half"))
    out = run(_cfg(tmp_path, "bad", scenario="custom_checkpoint", torus_n=16,
                   v0_path=str(half.out_dir / "v_000050.bin"), w0_path=str(half.out_dir / "w_000050.bin")))
    assert out.exit_code == EXIT_CONFIG
    assert out.ledger is None


def test_bump_outside_domain_is_config_error(tmp_path):
    out = run(_cfg(tmp_path, scenario="dropped_bit", bump_center=20.0))
    assert out.exit_code == EXIT_CONFIG


def test_boundary_violation_exit_code(tmp_path):
    out = run(_cfg(tmp_path, scenario="gaussian_on_carrier", gaussian_center=19.0, gaussian_sigma=0.5,
                   dt=1e-3, t_end=0.5))
    assert out.exit_code == EXIT_BOUNDARY
    assert not out.manifest.monitors["boundary"]["passed"]


def test_envelope_violation_exit_code(tmp_path):
    out = run(_cfg(tmp_path, tolerances={"envelope_ceiling": 1e-12}))
    assert out.exit_code == EXIT_ENVELOPE
    assert all(f["code"] == EXIT_ENVELOPE for f in out.manifest.failures)


def test_blow_up_exit_code_and_precedence(tmp_path):
    out = run(_cfg(tmp_path, tolerances={"blowup_ceiling": 1e-3, "envelope_ceiling": 1e-12}))
    codes = {f["code"] for f in out.manifest.failures}
    assert codes == {EXIT_NONFINITE, EXIT_ENVELOPE}
    assert out.exit_code == EXIT_NONFINITE


def test_picard_non_convergence_exit_code(tmp_path):
    out = run(_cfg(tmp_path, solver_mode="picard", picard_max_iter=1, t_end=0.002, dt=1e-3,
                   picard_quad_nodes=5))
    assert out.exit_code == EXIT_PICARD
    assert "error" in out.manifest.monitors["picard"]


def test_picard_and_strang_cross_validate(tmp_path):
    out = run(_cfg(tmp_path, solver_mode="both", amplitude=0.5, gaussian_amplitude=0.3,
                   dt=1e-4, t_end=8e-4, picard_quad_nodes=9))
    assert out.exit_code == 0, out.manifest.failures
    agree = out.manifest.monitors["picard"]["agreement"]
    assert agree["nodes_compared"] == 9
    assert agree["sup_l2"] <= 1e-6
    assert (out.out_dir / "ledger_picard.csv").exists()


def test_picard_nodes_off_the_step_grid(tmp_path):
    out = run(_cfg(tmp_path, solver_mode="both", amplitude=0.5, gaussian_amplitude=0.3,
                   dt=3e-4, t_end=9e-4, picard_quad_nodes=9))
    # nodes 0 and T always coincide, so the comparison still happens
    assert out.manifest.monitors["picard"]["agreement"]["nodes_compared"] >= 2


def test_compare_checkpoints(tmp_path):
    g = LineGrid(512, 4)
    f = ComplexField(g, np.exp(-g.x**2) * (1 + 0.5j))
    theta = 0.7
    write_checkpoint(tmp_path / "a.bin", f, 0.0, 3.0)
    write_checkpoint(tmp_path / "b.bin", ComplexField(g, f.values * np.exp(1j * theta)), 1.0, 3.0)
    same = compare(tmp_path / "a.bin", tmp_path / "a.bin")
    assert same["l2"] == 0 and same["h1"] == 0 and same["linf"] == 0
    d = compare(tmp_path / "a.bin", tmp_path / "b.bin")
    assert d["l2"] == pytest.approx(2 * abs(math.sin(theta / 2)) * lp_norm(f, 2), rel=1e-12)
    assert d["t_b"] == 1.0
    write_checkpoint(tmp_path / "c.bin", ComplexField(LineGrid(256, 4), np.zeros(256)), 0.0, 3.0)
    with pytest.raises(GridMismatch):
        compare(tmp_path / "a.bin", tmp_path / "c.bin")


def test_sweep_parallel_matches_serial(tmp_path):
    cfgdir = tmp_path / "cfg"
    cfgdir.mkdir()
    for i, sc in enumerate(("constant", "gaussian_on_carrier", "dropped_bit")):
        _write(cfgdir / f"r{i}.ini", _cfg(tmp_path, scenario=sc, w_noise=0.05, seed=i, t_end=0.04,
                                          bump_plateau=2.0, bump_ramp=2.0))
    serial = sweep(str(cfgdir / "*.ini"), jobs=1, base_dir=str(tmp_path / "serial"))
    parallel = sweep(str(cfgdir / "*.ini"), jobs=2, base_dir=str(tmp_path / "parallel"))
    assert [c for _, c in serial] == [c for _, c in parallel] == [0, 0, 0]
    for i in range(3):
        a, b = tmp_path / "serial" / f"r{i}", tmp_path / "parallel" / f"r{i}"
        for name in ("ledger.csv", "v_000020.bin", "w_000020.bin"):
            assert (a / name).read_bytes() == (b / name).read_bytes()
        hashes = [json.loads((d / "manifest.json").read_text())["config_hash"] for d in (a, b)]
        assert hashes[0] == hashes[1]


def test_output_dir_env_override(tmp_path, monkeypatch):
    path = _write(tmp_path / "c.ini", _cfg(tmp_path, "ignored", scenario="constant", t_end=0.01))
    monkeypatch.setenv("HNLS_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["run", str(path)]) == 0
    assert (tmp_path / "env" / "manifest.json").exists()
    assert not (tmp_path / "ignored").exists()


def test_cli_run_and_exit_codes(tmp_path, capsys):
    path = _write(tmp_path / "ok.ini", _cfg(tmp_path, "ok", scenario="constant", t_end=0.01))
    assert main(["run", str(path)]) == 0
    assert capsys.readouterr().out.startswith("ok: ")
    bad = tmp_path / "bad.ini"
    bad.write_text("p = 3\nbogus = 1\n")
    assert main(["run", str(bad)]) == EXIT_CONFIG
    assert "unknown key" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.ini")]) == EXIT_CONFIG
    env = _write(tmp_path / "env.ini", _cfg(tmp_path, "env", t_end=0.01, tolerances={"envelope_ceiling": 1e-12}))
    assert main(["run", str(env)]) == EXIT_ENVELOPE


def test_cli_lab_is_deterministic(tmp_path, capsys):
    text = "lemmas = difference, interpolation, taylor\np = 3\nsamples = 30\nseed = 2\nn = 64\noutput_dir = {}\n"
    (tmp_path / "a.ini").write_text(text.format(tmp_path / "a"))
    (tmp_path / "b.ini").write_text(text.format(tmp_path / "b"))
    assert main(["lab", str(tmp_path / "a.ini")]) == 0
    assert main(["lab", str(tmp_path / "b.ini")]) == 0
    for lemma in ("difference", "interpolation", "taylor"):
        assert (tmp_path / "a" / f"lab_{lemma}.csv").read_bytes() == (tmp_path / "b" / f"lab_{lemma}.csv").read_bytes()
    (tmp_path / "c.ini").write_text("lemmas = taylor\np = 2.5\nsamples = 3\noutput_dir = {}\n".format(tmp_path / "c"))
    assert main(["lab", str(tmp_path / "c.ini")]) == EXIT_CONFIG


def test_cli_compare_and_sweep(tmp_path, capsys):
    out = run(_cfg(tmp_path, "r", scenario="constant", t_end=0.01, checkpoint_every=5))
    assert main(["compare", str(out.out_dir / "v_000000.bin"), str(out.out_dir / "v_000005.bin")]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["l2"] == 0 and d["t_b"] == pytest.approx(0.01)
    assert main(["compare", str(out.out_dir / "v_000000.bin"), str(out.out_dir / "w_000000.bin")]) == EXIT_CONFIG
    assert main(["sweep", str(tmp_path / "nothing*.ini")]) == EXIT_CONFIG
    shutil.rmtree(out.out_dir)
