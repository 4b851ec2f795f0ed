import json

import pytest

from msqferry.cli import EXIT_CONFIG, EXIT_OK, main, run_scenario
from msqferry.geometry import network_from_dict, validate


def read(p):
    return json.loads(p.read_text())


@pytest.fixture
def generated(tmp_path):
    out = tmp_path / "gen"
    assert main(["generate", "--target", "50", "--region", "hexagon", "--seed", "4", "--out", str(out)]) == EXIT_OK
    return out


def test_generate_valid_and_reproducible(generated, tmp_path):
    net = network_from_dict(read(generated / "network.json"))
    assert len(net.nodes) <= 50 and validate(net).ok
    assert read(generated / "validation.json")["ok"]
    again = tmp_path / "again"
    main(["generate", "--target", "50", "--region", "hexagon", "--seed", "4", "--out", str(again)])
    assert (again / "network.json").read_bytes() == (generated / "network.json").read_bytes()
    m = read(generated / "manifest.json")
    assert m["subcommand"] == "generate" and m["seed"] == 4 and len(m["config_hash"]) == 64


def test_generate_target_too_small(tmp_path, capsys):
    code = main(["generate", "--target", "3", "--region", "hexagon", "--out", str(tmp_path / "x")])
    assert code == EXIT_CONFIG
    assert "TargetTooSmall" in capsys.readouterr().err


def test_plan_route_optimize_simulate_chain(generated, tmp_path):
    net = str(generated / "network.json")
    assert main(["plan", "--network", net, "--out", str(tmp_path / "plan")]) == EXIT_OK
    plan = str(tmp_path / "plan" / "plan.json")
    assert main(["route", "--network", net, "--plan", plan, "--source", "0", "--terminal", "3",
                 "--format", "csv", "--out", str(tmp_path / "route")]) == EXIT_OK
    r = read(tmp_path / "route" / "route.json")
    assert r["nodes"][0] == 0 and r["nodes"][-1] == 3
    assert (tmp_path / "route" / "route.csv").is_file()
    dem = tmp_path / "dem.json"
    dem.write_text(json.dumps({"0,3": 0.4, "5,1": 0.2}))
    assert main(["optimize", "--network", net, "--plan", plan, "--demands", str(dem),
                 "--out", str(tmp_path / "opt")]) == EXIT_OK
    sol = read(tmp_path / "opt" / "solution.json")
    assert sol["cost"] <= sol["initial_cost"]
    assert all(m > 0 for m in sol["stability_margins"].values())
    assert main(["simulate", "--network", net, "--plan", plan, "--demands", str(dem), "--horizon", "200",
                 "--replications", "2", "--out", str(tmp_path / "sim")]) == EXIT_OK
    summary = read(tmp_path / "sim" / "summary.json")
    assert summary["replications"] == 2 and len(set(summary["seeds"])) == 2
    assert (tmp_path / "sim" / "rep-001" / "metrics.json").is_file()
    for d in ("gen", "plan", "route", "opt", "sim"):
        assert (tmp_path / d / "manifest.json").is_file()


def test_unstable_fixed_rate_names_cycle(generated, tmp_path, capsys):
    net = str(generated / "network.json")
    dem = tmp_path / "dem.json"
    dem.write_text(json.dumps({"0,3": 5.0}))
    rates = tmp_path / "rates.json"
    rates.write_text("{}")
    code = main(["simulate", "--network", net, "--demands", str(dem), "--rates", str(rates),
                 "--default-rate", "1.0", "--out", str(tmp_path / "sim")])
    assert code == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "UnstableConfig" in err and "cycle " in err


def test_bad_inputs_exit_2(tmp_path):
    assert main(["plan", "--network", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["plan", "--network", str(bad), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["pipeline", "no-such-scenario", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_pipeline_tandem_short(tmp_path):
    doc = read_bundled("fig6-tandem")
    doc["horizon"] = 40_000.0
    path = tmp_path / "tandem.json"
    path.write_text(json.dumps(doc))
    summary, (m,) = run_scenario(path, tmp_path / "out")
    assert m.mean_delay() == pytest.approx(doc["analytic_delay"], rel=0.06)
    for f in ("network.json", "plan.json", "solution.json", "metrics.json", "messages.csv", "events.csv",
              "manifest.json"):
        assert (tmp_path / "out" / f).is_file()
    assert summary["generated"] == m.generated


def test_pipeline_ferry_scenario_with_figures(tmp_path):
    code = main(["pipeline", "fig8-ferry-failure", "--figures", "--format", "csv", "--out", str(tmp_path)])
    assert code == EXIT_OK
    for f in ("network.png", "delays.png", "timeline.png", "pairs.csv"):
        assert (tmp_path / f).stat().st_size > 0
    met = read(tmp_path / "metrics.json")
    assert met["stranded"] == 0 and met["coverage_violations"] == 0
    assert any(e["kind"] == "unify" for e in met["recovery_timeline"])


def read_bundled(name):
    from msqferry.cli import find_scenario
    return read(find_scenario(name))
