import pytest

from droopsim.cli import main

SHORT_SCENARIO = """\
[simulation]
duration = 0.4
avi = on
offset_comp = on

[lbc]
report_period = 0.05

[dg.1]
r_line = 0.44
v_offset = -5.0
est_settle_time = 0.1

[dg.2]
r_line = 0.22
est_settle_time = 0.1
"""

OVERLOAD_SCENARIO = """\
[simulation]
duration = 1.0

[plant]
r_load = 0.1

[dg.1]
r_line = 0.22

[dg.2]
r_line = 0.22
"""


@pytest.fixture()
def short_scn(tmp_path):
    path = tmp_path / "short_mix.scn"
    path.write_text(SHORT_SCENARIO)
    return path


def test_run_writes_every_artifact(tmp_path, short_scn, capsys):
    out = tmp_path / "out"
    rc = main(["run", "--scenario", str(short_scn), "--out", str(out),
               "--csv", "--plots"])
    assert rc == 0
    for name in ("summary.txt", "timeseries.csv", "metrics.csv",
                 "messages.csv", "output_currents.svg",
                 "circulating_current.svg", "power_sharing.svg",
                 "adaptation.svg", "dc_bus.svg"):
        assert (out / name).is_file(), name
    captured = capsys.readouterr()
    assert "scenario = short_mix" in captured.out
    assert "wrote:" in captured.out
    header = (out / "messages.csv").read_text().splitlines()[0]
    assert header == "t_send,t_deliver,sender,value,dropped"


def test_run_seed_and_decimate_overrides(tmp_path, short_scn):
    out = tmp_path / "out"
    rc = main(["run", "--scenario", str(short_scn), "--out", str(out),
               "--csv", "--seed", "999", "--decimate", "200"])
    assert rc == 0
    assert "seed = 999" in (out / "summary.txt").read_text()
    rows = (out / "timeseries.csv").read_text().strip().split("\n")
    assert len(rows) == 1 + len(range(0, 8001, 200))


def test_run_builtin_by_name(tmp_path, capsys):
    out = tmp_path / "out"
    rc = main(["run", "--scenario", "balanced", "--out", str(out)])
    assert rc == 0
    assert (out / "summary.txt").is_file()
    assert "scenario = balanced" in capsys.readouterr().out


def test_run_unknown_scenario(tmp_path, capsys):
    rc = main(["run", "--scenario", "nope", "--out", str(tmp_path / "o")])
    assert rc == 2
    assert "scenario error" in capsys.readouterr().err


def test_run_reports_numerical_failure(tmp_path, capsys):
    scn = tmp_path / "overload.scn"
    scn.write_text(OVERLOAD_SCENARIO)
    rc = main(["run", "--scenario", str(scn), "--out", str(tmp_path / "o")])
    assert rc == 3
    assert "numerical failure at t =" in capsys.readouterr().err


def test_list_scenarios(capsys):
    assert main(["list-scenarios"]) == 0
    out = capsys.readouterr().out
    for name in ("balanced", "mismatch_baseline", "mismatch_compensated",
                 "avi_engage", "offset_comp_engage"):
        assert name in out


def test_validate_good_file(short_scn, capsys):
    assert main(["validate", str(short_scn)]) == 0
    assert capsys.readouterr().out.startswith("ok: short_mix")


def test_validate_rejects_bad_file(tmp_path, capsys):
    path = tmp_path / "bad.scn"
    path.write_text("[simulation]\nduration = -1\n[dg.1]\nr_line = 0.22\n")
    assert main(["validate", str(path)]) == 2
    assert "scenario error" in capsys.readouterr().err


def test_validate_missing_file(tmp_path, capsys):
    assert main(["validate", str(tmp_path / "ghost.scn")]) == 2
    assert "does not exist" in capsys.readouterr().err
