import json

import pytest

from critrace.cli import FIXTURES, ConfigError, load_job, main


def _write_job(tmp_path, body, name="job.ini"):
    path = tmp_path / name
    path.write_text(body)
    return path


@pytest.fixture(scope="module")
def example1_output(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "report.json"
    status = main(["run", str(FIXTURES / "example1.job"), "--out", str(out)])
    return status, out.read_text()


def test_example1_job_reports_half_power(example1_output):
    status, text = example1_output
    assert status == 0
    rep = json.loads(text)
    trace = rep["results"]["trace"]
    assert trace["exponent"] == "-1/2"
    assert trace["branch"] == "indefinite"
    assert abs(trace["K_T_corrected"]["abs"] - 2**0.5 / 8) < 0.01 * 2**0.5 / 8
    assert rep["results"]["verify"]["passed"]


def test_example1_job_output_is_byte_stable(example1_output, tmp_path):
    _, first = example1_output
    out = tmp_path / "again.json"
    assert main(["run", str(FIXTURES / "example1.job"), "--out", str(out)]) == 0
    assert out.read_text() == first


def test_definite_trace_with_indefinite_branch_exits_one(tmp_path):
    job = _write_job(tmp_path, f"[job]\nhamiltonian = {FIXTURES / 'definite.ham'}\ntasks = theorem2\n")
    assert main(["run", str(job), "--out", str(tmp_path / "r.json")]) == 1
    rep = json.loads((tmp_path / "r.json").read_text())
    assert rep["status"] == "failed"


def test_empty_task_list_exits_zero(tmp_path):
    job = _write_job(tmp_path, f"[job]\nhamiltonian = {FIXTURES / 'example1.ham'}\ntasks =\n")
    assert main(["run", str(job), "--out", str(tmp_path / "r.json")]) == 0


@pytest.mark.parametrize(
    "body",
    [
        "[job]\ntasks = verify\n",
        "[job]\nhamiltonian = example1.ham\ntasks = dance\n",
        "[job]\nhamiltonian = example1.ham\n[tolerances]\ntol = -1\n",
        "[job]\nhamiltonian = example1.ham\n[spectral]\nh_grid = 0.01, 0.02\n",
        "[job]\nhamiltonian = missing.ham\n",
    ],
)
def test_bad_configuration_exits_two(tmp_path, body):
    job = _write_job(tmp_path, body)
    with pytest.raises(ConfigError):
        load_job(job)
    assert main(["run", str(job)]) == 2


def test_bad_h_grid_flag_exits_two(tmp_path):
    assert main(["spectral", "--h-grid", "0.01,0.02", "--out", str(tmp_path / "s.csv")]) == 2


@pytest.mark.parametrize(
    "argv",
    [
        ["verify", "example1.ham"],
        ["flow", "example1.ham", "--point", "0.1,0,0.2,0", "--t", "1.0"],
        ["monodromy", "example1.ham", "--t", "3.0"],
        ["jet", "example1.ham", "--order", "2", "--t", "1.0", "--check"],
        ["periods", "siegel_moser.ham"],
        ["resonance", "siegel_moser.ham", "--order", "3"],
        ["rk", "example1.ham"],
        ["cone", "example1.ham", "--samples", "20000"],
        ["charts", "siegel_moser.ham", "--index", "1"],
        ["trace", "definite.ham"],
        ["osc", "expand", "--k", "4"],
        ["osc", "quad", "--k", "3", "--lam", "1e2,1e3"],
    ],
)
def test_subcommands_succeed(argv, tmp_path):
    out = tmp_path / "out"
    assert main(argv + ["--out", str(out)]) == 0
    assert out.stat().st_size > 0


def test_osc_fit_roundtrip(tmp_path):
    data = tmp_path / "series.csv"
    data.write_text("lam,re,im\n" + "".join(f"{l},{l ** -1.5},0\n" for l in (1e2, 1e3, 1e4, 1e5)))
    out = tmp_path / "fit.json"
    assert main(["osc", "fit", "--csv", str(data), "--out", str(out)]) == 0
    assert json.loads(out.read_text())["exponent"] == pytest.approx(-1.5)


def test_spectral_subcommand_writes_rows(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["spectral", "--h-grid", "0.02,0.01", "--out", str(out)]) == 0
    assert len(out.read_text().strip().splitlines()) == 3
