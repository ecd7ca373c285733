import textwrap

import pandas as pd
import pytest

import main
from exceptions import EXIT_BLOWUP, EXIT_INVALID, EXIT_OK, EXIT_RESOURCE
from utils.artifacts import CsvArtifact

GM_NETWORK = """
[network]
model = "gm"

[network.gm]
D1 = 1e-4
D2 = 5e-5
mu1 = {mu1}
mu2 = 5.0
c1 = 1.0
b1 = 1.0
b2 = 0.0

[grid]
n = {n}
"""

SHORT_SOLVER = """
[solver]
dt = 0.001
t_final = 0.1
record_every = 10
"""


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def write_config(path, *parts, mu1=5.0, n=8):
    text = GM_NETWORK.format(mu1=mu1, n=n) + "".join(textwrap.dedent(p) for p in parts)
    path.write_text(text, encoding="utf-8")
    return str(path)


def lines_without_wall_time(path):
    return [line for line in path.read_text().splitlines() if not line.startswith("# wall_time_s")]


def test_compare_writes_error_and_metrics_csv(workdir):
    """Test the err.csv contract and the metadata echo"""
    config = write_config(workdir / "gm.toml", SHORT_SOLVER, "\n[carleman]\nk = [2, 3]\n")
    status = main.run(["compare", "--config", config, "--out", "err.csv", "--metrics-out", "metrics.csv"])
    assert status == EXIT_OK

    errors = CsvArtifact.read(workdir / "err.csv")
    assert list(errors.columns) == ["t", "species", "k", "err_abs_inf"]
    assert sorted(errors["k"].unique()) == [2, 3]
    metrics = CsvArtifact.read(workdir / "metrics.csv")
    assert list(metrics.columns) == ["t", "species", "k", "err_abs_inf", "err_rel_mean"]

    metadata = CsvArtifact.read_metadata(workdir / "err.csv")
    assert metadata["command"] == "compare"
    assert metadata["config"]["network"]["gm"]["D1"] == 1e-4
    assert metadata["config"]["grid"] == {"n": 8, "d": 1}
    assert metadata["blowup"] is False
    assert "wall_time_s" in metadata


def test_compare_reruns_are_byte_identical(workdir):
    config = write_config(workdir / "gm.toml", SHORT_SOLVER)
    assert main.run(["compare", "--config", config, "--out", "a.csv", "--metrics-out", "am.csv"]) == EXIT_OK
    assert main.run(["compare", "--config", config, "--out", "b.csv", "--metrics-out", "bm.csv"]) == EXIT_OK
    assert lines_without_wall_time(workdir / "a.csv") == lines_without_wall_time(workdir / "b.csv")
    assert lines_without_wall_time(workdir / "am.csv") == lines_without_wall_time(workdir / "bm.csv")


def test_simulate_uses_output_section(workdir):
    config = write_config(workdir / "gm.toml", SHORT_SOLVER, '\n[output]\ntrajectory = "traj.csv"\n')
    assert main.run(["simulate", "--config", config]) == EXIT_OK
    frame = CsvArtifact.read(workdir / "traj.csv")
    assert list(frame.columns) == ["t", "species", "node", "value"]
    assert len(frame) == 11 * 2 * 8


def test_simulate_blowup_exit_code(workdir):
    solver = "\n[solver]\ndt = 0.01\nt_final = 1.0\nblowup_cap = 1000.0\n"
    config = write_config(workdir / "gm.toml", solver, mu1=-40.0)
    assert main.run(["simulate", "--config", config, "--out", "partial.csv"]) == EXIT_BLOWUP
    assert CsvArtifact.read_metadata(workdir / "partial.csv")["blowup"] is True


def test_carleman_dump_pattern(workdir, capsys):
    config = write_config(workdir / "gm.toml", n=5)
    status = main.run(["carleman", "--config", config, "-k", "3", "--dump-pattern", "pattern.csv"])
    assert status == EXIT_OK
    assert "dim=70" in capsys.readouterr().out
    pattern = CsvArtifact.read(workdir / "pattern.csv")
    assert list(pattern.columns) == ["block_row", "block_col", "nnz"]
    assert set(zip(pattern["block_row"], pattern["block_col"])) == {(i, i) for i in range(1, 15)} | {(1, 8), (2, 8)}


def test_carleman_dimension_limit_exit_code(workdir, override_settings):
    override_settings(RDE_MAX_CARLEMAN_DIM="100")
    config = write_config(workdir / "gm.toml", n=10)
    assert main.run(["carleman", "--config", config, "-k", "3"]) == EXIT_RESOURCE


def test_missing_section_and_file(workdir, capsys):
    config = write_config(workdir / "gm.toml")
    assert main.run(["compare", "--config", config]) == EXIT_INVALID
    assert "[solver]" in capsys.readouterr().err
    assert main.run(["compare", "--config", str(workdir / "absent.toml")]) == EXIT_INVALID


def test_invalid_config_reports_location(workdir, capsys):
    config = write_config(workdir / "gm.toml", "\n[grid.extra]\nvalue = 1\n")
    (workdir / "bad.toml").write_text("[grid]\nn = 2\n", encoding="utf-8")
    assert main.run(["simulate", "--config", str(workdir / "bad.toml")]) == EXIT_INVALID
    assert "grid.n" in capsys.readouterr().err
    assert main.run(["simulate", "--config", config]) == EXIT_INVALID


def test_lchs_verify_rejects_beta(workdir, capsys):
    assert main.run(["lchs-verify", "--beta", "1.5"]) == EXIT_INVALID
    assert "beta" in capsys.readouterr().err


def test_lchs_verify_writes_table(workdir):
    status = main.run(["lchs-verify", "--dim", "3", "--nodes", "640", "--out", "lchs.csv"])
    assert status == EXIT_OK
    table = CsvArtifact.read(workdir / "lchs.csv")
    assert table["nodes"].tolist() == [160, 320, 640]
    assert CsvArtifact.read_metadata(workdir / "lchs.csv")["lchs"]["beta"] == 0.8


def test_laplacian_norm_and_spectrum(workdir, capsys):
    assert main.run(["laplacian", "--n", "4", "--d", "2", "--norm", "--spectrum", "spec.csv"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "dim=16" in out
    assert "||Delta|| = 128" in out
    spectrum = CsvArtifact.read(workdir / "spec.csv")
    assert list(spectrum.columns) == ["k_1", "k_2", "eigenvalue"]
    assert len(spectrum) == 16
    assert spectrum["eigenvalue"].min() == pytest.approx(-128.0)
    assert main.run(["laplacian", "--n", "2"]) == EXIT_INVALID


def test_rates_from_csv(workdir):
    (workdir / "dg.csv").write_text("# barrier heights\ni,j,deltaG\n1,2,0.0\n0,1,1.0\n", encoding="utf-8")
    status = main.run(["rates", "--deltaG", "dg.csv", "--kbt", "1.0", "--second-order", "--dim", "4"])
    assert status == EXIT_OK
    rates = CsvArtifact.read(workdir / "rates.csv")
    assert rates[["i", "j"]].values.tolist() == [[0, 1], [1, 2]]
    scan = CsvArtifact.read(workdir / "zwanzig.csv")
    assert scan["lambda"].tolist() == [0.4, 0.2, 0.1, 0.05]
    assert scan["abs_error"].iloc[-1] < scan["abs_error"].iloc[0]


def test_rates_rejects_bad_tables(workdir):
    (workdir / "dg.csv").write_text("i,j,barrier\n0,1,1.0\n", encoding="utf-8")
    assert main.run(["rates", "--deltaG", "dg.csv", "--kbt", "1.0"]) == EXIT_INVALID
    assert main.run(["rates", "--deltaG", "missing.csv", "--kbt", "1.0"]) == EXIT_INVALID
    assert main.run(["rates", "--deltaG", "dg.csv", "--kbt", "0"]) == EXIT_INVALID


def test_estimate_report(workdir):
    scenarios = """
    [[scenarios]]
    name = "unit"
    k = 2

    [scenarios.inputs]
    alpha_i = 1.0
    alpha_j_max = 1.0
    kBT = 1.0
    gamma = 1.0
    delta = 1.0
    epsilon = 0.001
    stoich_sum = 2.0

    [[scenarios]]
    name = "longer"
    k = 2
    t = 0.2

    [scenarios.inputs]
    alpha_i = 1.0
    alpha_j_max = 1.0
    kBT = 1.0
    gamma = 1.0
    delta = 1.0
    epsilon = 0.001
    stoich_sum = 2.0
    """
    config = write_config(workdir / "est.toml", SHORT_SOLVER, scenarios)
    assert main.run(["estimate", "--config", config, "--out", "report.csv"]) == EXIT_OK
    report = CsvArtifact.read(workdir / "report.csv")
    assert report["scenario"].tolist() == ["unit", "longer"]
    assert report["sys_t"].tolist() == pytest.approx([0.1, 0.2])
    assert (report["queries_total"] > 0).all()
    assert (report["tag"] == "asymptotic-shape").all()


def test_sweep_from_config(workdir):
    sweep = """
    [sweep]
    k_orders = [2]
    n = 4

    [[sweep.axes]]
    name = "c1"
    values = [0.5, 1.0]

    [sweep.fixed]
    D1 = 3e-4
    D2 = 2e-5
    mu1 = 1.0
    mu2 = 1.0
    c1 = 1.0
    b1 = 1.0
    b2 = 1.0

    [sweep.solver]
    dt = 0.001
    t_final = 0.05
    record_every = 10
    """
    config = write_config(workdir / "sweep.toml", sweep)
    assert main.run(["--threads", "2", "sweep", "--config", config, "--out", "grid.csv"]) == EXIT_OK
    frame = CsvArtifact.read(workdir / "grid.csv")
    assert frame["param1"].tolist() == [0.5, 0.5, 1.0, 1.0]
    assert frame["param2"].isna().all()
    assert CsvArtifact.read_metadata(workdir / "grid.csv")["axes"] == ["c1"]


def test_threads_must_be_positive(workdir):
    assert main.run(["--threads", "0", "laplacian", "--n", "4"]) == EXIT_INVALID


def test_metadata_round_trip(workdir):
    frame = pd.DataFrame({"x": [1, 2]})
    CsvArtifact.write(workdir / "out" / "x.csv", frame, {"b": [1, 2], "a": {"z": 1, "y": 2}}, wall_time=0.5)
    text = (workdir / "out" / "x.csv").read_text().splitlines()
    assert text[0].startswith("# toolkit_version:")
    assert text[1] == '# a: {"y": 2, "z": 1}'
    assert CsvArtifact.read_metadata(workdir / "out" / "x.csv")["wall_time_s"] == 0.5
    pd.testing.assert_frame_equal(CsvArtifact.read(workdir / "out" / "x.csv"), frame)
