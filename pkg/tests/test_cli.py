import os

import numpy as np
import pytest

from westfem.cli import (EXIT_CONFIG, EXIT_OK, build_config, main,
                         make_parser)
from westfem.report import ORDER_TABLE_HEADER


def run_cli(*argv):
    return main(list(argv))


def test_mms_command_outputs(tmp_path):
    out = tmp_path / "mms"
    code = run_cli("mms", "--levels", "3,4", "--tsteps", "50",
                   "--out", str(out), "--quiet", "--no-plots")
    assert code == EXIT_OK
    table = (out / "orders.csv").read_text().splitlines()
    assert table[0] == ORDER_TABLE_HEADER
    assert table[1].startswith("3,")
    assert table[2].startswith("4,")
    assert (out / "config.txt").exists()
    assert (out / "level3_summary.csv").exists()
    assert not (out / "convergence.png").exists()


def test_channel_command_and_determinism(tmp_path):
    args = ("channel", "--levels", "1", "--ref-level", "2", "--tsteps", "40",
            "--stride", "20", "--quiet", "--no-plots")
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    assert run_cli(*args, "--out", str(out_a)) == EXIT_OK
    assert run_cli(*args, "--out", str(out_b)) == EXIT_OK
    for name in ("orders.csv", "level1_summary.csv", "level1_snapshots.csv",
                 "level2_summary.csv"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name
    cfg_a = [ln for ln in (out_a / "config.txt").read_text().splitlines()
             if not ln.startswith("out=")]
    cfg_b = [ln for ln in (out_b / "config.txt").read_text().splitlines()
             if not ln.startswith("out=")]
    assert cfg_a == cfg_b
    summary = (out_a / "level1_summary.csv").read_text().splitlines()
    assert summary[0] == "step,t,fp_iters,max_abs_u,margin"
    assert len(summary) == 42
    snaps = (out_a / "level1_snapshots.csv").read_text().splitlines()
    assert snaps[0] == "t,node_index,x,u,v,a"
    assert len(snaps) == 1 + 3 * 101   # snapshots at steps 0, 20, 40


def test_channel_zero_amplitude_zero_errors(tmp_path):
    out = tmp_path / "zero"
    code = run_cli("channel", "--levels", "1", "--ref-level", "2",
                   "--tsteps", "20", "--a1", "0", "--a2", "0",
                   "--out", str(out), "--quiet", "--no-plots")
    assert code == EXIT_OK
    rows = (out / "orders.csv").read_text().splitlines()
    cells = rows[1].split(",")
    assert float(cells[1]) == 0.0
    assert cells[2] == "nan"


def test_focus_command_outputs(tmp_path):
    out = tmp_path / "focus"
    code = run_cli("focus", "--levels", "1,2,3", "--tsteps", "40",
                   "--stride", "40", "--out", str(out), "--quiet",
                   "--no-plots")
    assert code == EXIT_OK
    qoi_rows = (out / "qoi.csv").read_text().splitlines()
    assert qoi_rows[0] == "level,h,q"
    assert len(qoi_rows) == 4
    fit_rows = (out / "fit.csv").read_text().splitlines()
    assert fit_rows[0] == "alpha,beta,gamma,residual"
    orders_rows = (out / "qoi_orders.csv").read_text().splitlines()
    assert orders_rows[0] == "level,e_q,ord"
    snaps = (out / "level1_snapshots.csv").read_text().splitlines()
    assert snaps[0] == "t,node_index,x,y,u,v,a"


def test_plots_rendered_by_default(tmp_path):
    out = tmp_path / "mmsplots"
    code = run_cli("mms", "--levels", "3,4", "--tsteps", "30",
                   "--out", str(out), "--quiet")
    assert code == EXIT_OK
    assert (out / "convergence.png").stat().st_size > 0


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "study.cfg"
    cfg.write_text("levels=3,4\ntsteps=25\n# comment\nstride=25\n")
    out = tmp_path / "cfg_out"
    code = run_cli("mms", "--config", str(cfg), "--tsteps", "30",
                   "--out", str(out), "--quiet", "--no-plots")
    assert code == EXIT_OK
    text = (out / "config.txt").read_text()
    assert "tsteps=30" in text          # CLI overrides the file
    assert "levels=3,4" in text
    assert "kind=mms" in text


def test_config_errors_exit_2(tmp_path):
    assert run_cli("channel", "--levels", "3,4", "--ref-level", "4",
                   "--quiet") == EXIT_CONFIG
    assert run_cli("mms", "--levels", "0", "--quiet") == EXIT_CONFIG
    bad = tmp_path / "bad.cfg"
    bad.write_text("nonsense_key=1\n")
    assert run_cli("mms", "--config", str(bad), "--quiet") == EXIT_CONFIG
    malformed = tmp_path / "mal.cfg"
    malformed.write_text("just a line\n")
    assert run_cli("mms", "--config", str(malformed),
                   "--quiet") == EXIT_CONFIG
    assert run_cli("focus", "--levels", "1,2", "--quiet") == EXIT_CONFIG


def test_dump_mesh_command(tmp_path):
    path = tmp_path / "mesh.txt"
    assert run_cli("dump-mesh", "--kind", "focus", "--level", "1",
                   "--out", str(path)) == EXIT_OK
    header = path.read_text().splitlines()[0].split()
    assert header == ["2", "756", "700", "110"]


def test_build_config_preset_paper():
    parser = make_parser()
    args = parser.parse_args(["channel", "--preset", "paper"])
    cfg = build_config("channel", args)
    assert cfg["levels"] == [1, 2, 3, 4, 5, 6]
    assert cfg["ref_level"] == 8
    args = parser.parse_args(["focus", "--preset", "paper"])
    cfg = build_config("focus", args)
    assert cfg["levels"] == [1, 2, 3, 4, 5]


def test_compiled_in_defaults():
    parser = make_parser()
    args = parser.parse_args(["channel"])
    cfg = build_config("channel", args)
    assert cfg["A1"] == 1.2e8 and cfg["A2"] == -1e11
    assert cfg["sigma1"] == 0.015 and cfg["sigma2"] == 0.02
    assert cfg["mu"] == 0.1
    assert cfg["c"] == 1500.0 and cfg["rho"] == 1000.0
    assert cfg["b"] == 6e-9 and cfg["beta_a"] == 3.5
    assert cfg["newmark_beta"] == 0.45 and cfg["newmark_gamma"] == 0.75
    assert cfg["fp_tol"] == 1e-8
    assert cfg["tsteps"] == 2000 and cfg["final_time"] == 37e-6
    args = parser.parse_args(["focus"])
    cfg = build_config("focus", args)
    assert cfg["g0"] == 1e7 and cfg["freq"] == 60e3
    assert cfg["tsteps"] == 3500 and cfg["final_time"] == 40e-6


def test_degeneracy_exit_4(tmp_path):
    # pressure amplitude beyond 1/(2k) ~ 3.2e8 Pa degenerates immediately
    code = run_cli("channel", "--levels", "1", "--ref-level", "2",
                   "--tsteps", "10", "--a1", "4e8",
                   "--out", str(tmp_path / "degen"), "--quiet", "--no-plots")
    assert code == 4
