import json

import pytest

from parkingtax.cli import MANIFEST_NAME, main, parse_duration, parse_rate


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_breakeven_text(capsys):
    code, out, _ = run(capsys, "breakeven", "--profile", "h100", "--load-power", "300", "--load-time", "45")
    assert code == 0
    assert out.strip() == "T* = 270.5 s (4.5 min), λ* = 13.3/hr"


def test_breakeven_json(capsys, tmp_path):
    code, out, _ = run(capsys, "breakeven", "--load-profile", "qwen2.5-7b", "--json", "--out", str(tmp_path / "b.json"))
    assert code == 0
    d = json.loads((tmp_path / "b.json").read_text())
    assert d["schema_version"] == 1
    assert d["t_star_s"] == pytest.approx(124 * 30 / 49.9)
    assert (tmp_path / MANIFEST_NAME).exists()


def test_impact_text(capsys):
    code, out, _ = run(capsys, "impact", "--fleet", "3.76e6", "--utilization", "0.65", "--park-power", "40")
    assert code == 0
    assert "GWh/yr (461.1)" in out
    gwh = int(out.split()[0])
    assert abs(gwh - 462) <= 1


def test_impact_sensitivity(capsys, tmp_path):
    corners = [(2.0e6, 0.8, 26.3), (3.76e6, 0.65, 40), (6.0e6, 0.5, 66.4)]
    paths = []
    for name, (n, rho, w) in zip(("low", "base", "high"), corners):
        p = tmp_path / f"{name}.json"
        p.write_text(json.dumps({"n_gpus": n, "utilization": rho, "park_w": w}))
        paths.append(str(p))
    code, out, _ = run(capsys, "impact", "--sensitivity", *paths, "--out", str(tmp_path / "i.json"))
    assert code == 0
    grid = {r["parameter"]: r for r in json.loads((tmp_path / "i.json").read_text())["sensitivity"]}
    assert [round(grid["e_park_gwh"][k]) for k in ("low", "base", "high")] == [92, 461, 1745]
    code, _, err = run(capsys, "impact", "--sensitivity", paths[2], paths[1], paths[0])
    assert code == 1 and "n_gpus" in err


def test_usage_errors(capsys):
    assert run(capsys)[0] == 2
    code, _, err = run(capsys, "simulate", "--sed", "3")
    assert code == 2 and "did you mean --seed?" in err
    assert run(capsys, "reproduce", "table9")[0] == 2
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "impact", "--fleet", "1")[0] == 2
    assert run(capsys, "breakeven", "--load-power", "300")[0] == 2


def test_domain_errors(capsys):
    assert run(capsys, "breakeven", "--park-power", "0")[0] == 1
    assert run(capsys, "breakeven", "--profile", "nope")[0] == 1
    assert run(capsys, "simulate", "--policy", "ttl:-5")[0] == 1
    assert run(capsys, "impact", "--fleet", "1", "--utilization", "1.5", "--park-power", "40")[0] == 1


def test_parsers():
    assert parse_duration("24h") == 86400 and parse_duration("90m") == 5400 and parse_duration("300s") == 300
    assert parse_rate("5/hr") == 5 and parse_rate("0.01/s") == pytest.approx(36)


def _rerun(tmp_path, out_name):
    manifest = json.loads((tmp_path / MANIFEST_NAME).read_text())
    first = {p: open(p, "rb").read() for p in manifest["outputs"]}
    for p in manifest["outputs"]:
        open(p, "wb").close()
    assert main(manifest["argv"]) == 0
    for p, content in first.items():
        assert open(p, "rb").read() == content, p
    return manifest


def test_gen_traffic_and_simulate_from_file(capsys, tmp_path):
    trace = str(tmp_path / "trace.csv")
    code, out, _ = run(capsys, "gen-traffic", "--pattern", "bursty", "--duration", "24h", "--seed", "4", "--out", trace)
    assert code == 0 and "arrivals" in out
    m = _rerun(tmp_path, "trace.csv")
    assert m["schema_version"] == 1 and m["config"]["seed"] == 4
    sim_dir = tmp_path / "sim"
    sim_dir.mkdir()
    code, out, _ = run(capsys, "simulate", "--traffic", trace, "--policy", "breakeven",
                       "--out", str(sim_dir / "r.json"), "--emit-timeline", str(sim_dir / "tl.csv"))
    assert code == 0
    r = json.loads((sim_dir / "r.json").read_text())
    lines = (sim_dir / "tl.csv").read_text().splitlines()[1:]
    energy = sum((float(b) - float(a)) * float(p) for a, b, _, p in (l.split(",") for l in lines)) / 3600
    assert energy == pytest.approx(r["energy_wh"], rel=1e-9)
    assert float(lines[-1].split(",")[1]) == 86400.0


def test_simulate_manifest_rerun(capsys, tmp_path):
    code, *_ = run(capsys, "simulate", "--traffic", "diurnal", "--policy", "ttl:300", "--seed", "2",
                   "--out", str(tmp_path / "r.json"), "--emit-timeline", str(tmp_path / "tl.csv"))
    assert code == 0
    _rerun(tmp_path, "r.json")


def test_compare(capsys, tmp_path):
    code, out, _ = run(capsys, "compare", "--traffic", "steady:5/hr", "--policies", "ttl:300,breakeven",
                       "--seeds", "3", "--out", str(tmp_path / "c.json"))
    assert code == 0
    rows = json.loads((tmp_path / "c.json").read_text())["rows"]
    assert [r["policy"] for r in rows] == ["always-on", "ttl:300", "breakeven"]
    assert rows[0]["savings_vs_always_on_pct"] == 0 and rows[0]["n_runs"] == 3
    assert rows[2]["savings_vs_always_on_pct"] > 10
    _rerun(tmp_path, "c.json")


def test_telemetry_roundtrip(capsys, tmp_path):
    sched = tmp_path / "sched.json"
    sched.write_text(json.dumps([{"vram_gb": 0, "ctx": False, "duration_s": 1200}] +
                                [{"vram_gb": v, "ctx": True, "duration_s": 1200} for v in range(0, 65, 8)]))
    tel = tmp_path / "tel.csv"
    assert run(capsys, "gen-telemetry", "--schedule", str(sched), "--seed", "1", "--out", str(tel))[0] == 0
    _rerun(tmp_path, "tel.csv")
    code, out, _ = run(capsys, "analyze", "--input", str(tel), "--out", str(tmp_path / "rep.json"))
    assert code == 0 and "equivalent" in out
    rep = json.loads((tmp_path / "rep.json").read_text())
    assert rep["retention"]["fraction"] == 1.0
    assert rep["two_state"]["delta_w"] == pytest.approx(49.9, abs=0.1)
    bad = tmp_path / "bad.csv"
    bad.write_text(tel.read_text().replace("gpu0,", "gpu0,oops", 1))
    code, _, err = run(capsys, "analyze", "--input", str(bad))
    assert code == 1 and "line 2" in err


def test_reproduce(capsys, tmp_path):
    code, out, _ = run(capsys, "reproduce", "table3", "--out", str(tmp_path))
    assert code == 0 and "FAIL" not in out
    assert (tmp_path / "table3.csv").exists() and (tmp_path / "table3_comparison.json").exists()
    code, out, _ = run(capsys, "reproduce", "table5", "--seeds", "2", "--jobs", "2", "--out", str(tmp_path))
    assert code == 0
    _rerun(tmp_path, "table5.csv")


def test_compare_policy_list_with_commas(capsys, tmp_path):
    code, *_ = run(capsys, "compare", "--traffic", "bursty", "--policies", "ttl:300,hysteresis:120,900,rate:3600",
                   "--out", str(tmp_path / "c.json"))
    assert code == 0
    rows = json.loads((tmp_path / "c.json").read_text())["rows"]
    assert [r["policy"] for r in rows] == ["always-on", "ttl:300", "hysteresis:120,900", "rate:3600"]
