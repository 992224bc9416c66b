"""Command-line driver: CSV schemas, determinism, exit codes."""

import io
import numpy as np
import pytest

from curlcurl.cli import ADAPT_HEADER, SINGLE_HEADER, main


def run_cli(args, path):
    code = main(args + ["--out", str(path)])
    text = path.read_text() if path.exists() else ""
    return code, text


def test_hconv_rows_decrease(tmp_path):
    out = tmp_path / "h.csv"
    code, text = run_cli(["--case", "cube", "--mode", "hconv", "--p", "0",
                          "--n", "1", "--levels", "3"], out)
    assert code == 0
    lines = text.strip().splitlines()
    assert lines[0] == SINGLE_HEADER
    assert len(lines) == 4
    errs = [float(l.split(",")[3]) for l in lines[1:]]
    assert errs[0] > errs[1] > errs[2]
    hs = [float(l.split(",")[0]) for l in lines[1:]]
    assert hs[0] == pytest.approx(2 * hs[1]) and hs[1] == pytest.approx(2 * hs[2])


def test_poly_case_zero_residual_row(tmp_path):
    # the polynomial oracle is exact from degree 4 on (no admissible field
    # with vanishing tangential trace exists below that degree)
    out = tmp_path / "poly.csv"
    code, text = run_cli(["--case", "poly", "--mode", "single", "--p", "4",
                          "--n", "2"], out)
    assert code == 0
    row = text.strip().splitlines()[1].split(",")
    err, etae_raw = float(row[3]), float(row[4])
    assert err <= 1e-8
    assert etae_raw <= 1e-8


def test_validation_exit_code(tmp_path):
    out = tmp_path / "x.csv"
    assert main(["--case", "cube", "--mode", "adapt", "--theta", "1.5",
                 "--out", str(out)]) == 2
    assert main(["--case", "nope", "--out", str(out)]) == 2
    assert main(["--case", "cube", "--p", "-1", "--out", str(out)]) == 2


def test_adapt_csv_schema(tmp_path):
    out = tmp_path / "a.csv"
    code, text = run_cli(["--case", "ltype-pi2", "--mode", "adapt", "--p", "0",
                          "--driver", "cell", "--theta", "0.3", "--n", "1",
                          "--budget-dofs", "300"], out)
    assert code == 0
    lines = text.strip().splitlines()
    assert lines[0] == ADAPT_HEADER
    assert len(lines) >= 3
    iters = [int(l.split(",")[0]) for l in lines[1:]]
    assert iters == list(range(len(iters)))


def test_deterministic_output(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["--case", "cube", "--mode", "single", "--p", "0", "--n", "2"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_text() == b.read_text()


def test_significant_digits(tmp_path):
    out = tmp_path / "s.csv"
    code, text = run_cli(["--case", "cube", "--mode", "single", "--p", "0",
                          "--n", "2"], out)
    err_field = text.strip().splitlines()[1].split(",")[3]
    mantissa = err_field.replace(".", "").replace("-", "").lstrip("0")
    mantissa = mantissa.split("e")[0]
    assert len(mantissa) == 12


def test_mesh_in_round_trip(tmp_path):
    from curlcurl.medit import write_medit
    from curlcurl.mesh import unit_cube_mesh

    mesh_path = tmp_path / "m.mesh"
    write_medit(unit_cube_mesh(2), mesh_path)
    out = tmp_path / "m.csv"
    code, text = run_cli(["--case", "cube", "--mode", "single", "--p", "0",
                          "--mesh-in", str(mesh_path), "--dirichlet-refs", "1"],
                         out)
    assert code == 0
    direct = tmp_path / "d.csv"
    run_cli(["--case", "cube", "--mode", "single", "--p", "0", "--n", "2"], direct)
    assert text == direct.read_text()


def test_osc_flag_increases_totals(tmp_path):
    base, osc = tmp_path / "b.csv", tmp_path / "o.csv"
    args = ["--case", "cube", "--mode", "single", "--p", "0", "--n", "2"]
    run_cli(args, base)
    run_cli(args + ["--osc"], osc)
    eb = float(base.read_text().strip().splitlines()[1].split(",")[5])
    eo = float(osc.read_text().strip().splitlines()[1].split(",")[5])
    assert eo > eb
