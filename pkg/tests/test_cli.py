from importlib import resources

import pytest

from nfvgw.cli import main


def test_run_writes_the_outputs(tmp_path, capsys):
    assert main(["run", "--scenario", "fire", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "fire: status=available provisioning=310 orchestration=250" in out
    assert "fire-robot: status=available" in out
    for name in ("metrics.csv", "events.log", "trace.log"):
        assert (tmp_path / name).stat().st_size > 0
    assert (tmp_path / "metrics.csv").read_text().startswith("metric,phase,value_ticks,count\n")


def test_run_with_a_seed(capsys):
    assert main(["run", "--scenario", "earthquake", "--seed", "7"]) == 0
    assert "earthquake: status=available" in capsys.readouterr().out


def test_run_of_a_scenario_file(tmp_path, capsys):
    p = tmp_path / "quake.scn"
    p.write_text(resources.files("nfvgw.data").joinpath("earthquake.scn").read_text())
    assert main(["run", "--scenario", str(p)]) == 0
    assert "status=available" in capsys.readouterr().out


def test_scale(tmp_path, capsys):
    assert main(["scale", "--k", "3", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "overlay_nodes=15" in out and "provisioning=840" in out
    assert (tmp_path / "metrics.csv").exists()


def test_compare_orders(capsys):
    assert main(["compare-orders", "--scenario", "earthquake"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert "e2e=120 IMC records=1" in lines[0] and lines[0].startswith("DA-first")
    assert "e2e=140 IMC records=5" in lines[1]
    assert lines[2] == "same final records: True"


def test_upgrade(capsys):
    assert main(["upgrade", "--scenario", "upgrade"]) == 0
    fresh, upgrade = capsys.readouterr().out.splitlines()
    assert "orchestration=250 instantiations=3" in fresh
    assert "orchestration=80 instantiations=2" in upgrade


def test_unknown_scenario_exits_2(capsys):
    assert main(["run", "--scenario", "volcano"]) == 2
    assert "ScenarioError" in capsys.readouterr().err


def test_subcommand_is_required():
    with pytest.raises(SystemExit):
        main([])
