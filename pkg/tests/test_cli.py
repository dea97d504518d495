"""CLI exit codes, artifacts, and determinism."""

import json

import pytest

from detsdv.cli import main
from detsdv.report import fixture_text

from conftest import WHEELCHAIR_TOML, chain_topology_text


@pytest.fixture
def workdir(tmp_path):
    (tmp_path / "svc.toml").write_text(
        fixture_text("context_aware_maneuvering.service.toml"))
    (tmp_path / "topo.toml").write_text(
        fixture_text("invehicle_3hop.topology.toml"))
    (tmp_path / "sim.toml").write_text(fixture_text("default.sim.toml"))
    (tmp_path / "wheelchair.toml").write_text(WHEELCHAIR_TOML)
    return tmp_path


def test_validate_ok(workdir):
    assert main(["validate", "--service", str(workdir / "wheelchair.toml"),
                 "--topology", str(workdir / "topo.toml")]) == 0


def test_validate_invariant_violation(workdir, capsys):
    bad = workdir / "bad.toml"
    bad.write_text(WHEELCHAIR_TOML.replace("Replicas = 2", "Replicas = 0"))
    assert main(["validate", "--service", str(bad)]) == 2
    line = json.loads(capsys.readouterr().out.strip())
    assert line["code"] == "INVARIANT"
    assert line["key_path"] == "Flows.Flow1.NodeSpecs.NodeA.Replicas"


def test_validate_missing_file(workdir, capsys):
    assert main(["validate", "--service", str(workdir / "nope.toml")]) == 2
    line = json.loads(capsys.readouterr().out.strip())
    assert line["code"] == "IO"


def test_plan_writes_artifacts(workdir):
    out = workdir / "out"
    code = main(["plan", "--service", str(workdir / "svc.toml"),
                 "--topology", str(workdir / "topo.toml"), "--out", str(out)])
    assert code == 0
    for name in ("placement.json", "tsn_config.json", "interop.json"):
        assert (out / name).exists()
    placement = json.loads((out / "placement.json").read_text())
    assert placement["admission"][0]["admitted"] is True
    tsn = json.loads((out / "tsn_config.json").read_text())
    assert tsn["schema"] == "v1"
    assert tsn["flows"][0]["id"] == "cam"
    assert tsn["bounds"]
    interop = json.loads((out / "interop.json").read_text())
    assert interop["five_qi"][0]["resource_type"] == "GBR"


def test_plan_gpu_service_without_gpu_exits_3(workdir, capsys):
    svc = workdir / "gpu.toml"
    svc.write_text(WHEELCHAIR_TOML.replace("GPU = false", "GPU = true"))
    topo = workdir / "gpuless.toml"
    topo.write_text(chain_topology_text())
    out = workdir / "out-gpu"
    code = main(["plan", "--service", str(svc), "--topology", str(topo),
                 "--out", str(out)])
    assert code == 3
    placement = json.loads((out / "placement.json").read_text())
    verdict = placement["admission"][0]
    assert verdict["admitted"] is False
    assert verdict["binding"] == "NO_FEASIBLE_NODE"


def test_plan_is_deterministic(workdir):
    out1, out2 = workdir / "d1", workdir / "d2"
    for out in (out1, out2):
        assert main(["plan", "--service", str(workdir / "svc.toml"),
                     "--topology", str(workdir / "topo.toml"),
                     "--out", str(out)]) == 0
    for name in ("placement.json", "tsn_config.json", "interop.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_simulate_and_report(workdir, capsys):
    out = workdir / "out"
    main(["plan", "--service", str(workdir / "svc.toml"),
          "--topology", str(workdir / "topo.toml"), "--out", str(out)])
    code = main(["simulate", "--topology", str(workdir / "topo.toml"),
                 "--sim", str(workdir / "sim.toml"), "--out", str(out)])
    assert code == 0
    for name in ("trace.ndjson", "metrics.json", "verdicts.json"):
        assert (out / name).exists()
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["flows"]["cam"]["deadline_misses"] == 0

    capsys.readouterr()
    assert main(["report", "--out", str(out), "--format", "text"]) == 0
    assert "PASS" in capsys.readouterr().out
    assert main(["report", "--out", str(out), "--format", "csv"]) == 0
    assert "scenario,flow" in capsys.readouterr().out


def test_simulate_seed_repeat_identical(workdir):
    out = workdir / "out"
    main(["plan", "--service", str(workdir / "svc.toml"),
          "--topology", str(workdir / "topo.toml"), "--out", str(out)])
    blobs = []
    for _ in range(2):
        assert main(["simulate", "--topology", str(workdir / "topo.toml"),
                     "--sim", str(workdir / "sim.toml"), "--out", str(out),
                     "--seed", "99"]) == 0
        blobs.append(((out / "metrics.json").read_bytes(),
                      (out / "trace.ndjson").read_bytes()))
    assert blobs[0] == blobs[1]


def test_simulate_failure_on_plain_flow_exits_4(workdir):
    out = workdir / "out-fail"
    main(["plan", "--service", str(workdir / "svc.toml"),
          "--topology", str(workdir / "topo.toml"), "--out", str(out)])
    sim = workdir / "failsim.toml"
    sim.write_text("""
DurationMs = 2050.0
Seed = 7
ClockSyncErrorUs = 1.0
[[Failures]]
Link = "eth-backbone"
FailAtMs = 1000.0
""")
    # the cam flow has MaxLatency set and loses every frame after the cut:
    # no deadline misses occur, but delivery collapses; cam declares
    # Delivery=false so losses alone do not fail it -- use the wheelchair
    # service (Delivery=true) to see exit 4
    out2 = workdir / "out-fail2"
    ring = workdir / "ring.toml"
    ring.write_text(fixture_text("ring.topology.toml"))
    main(["plan", "--service", str(workdir / "wheelchair.toml"),
          "--topology", str(ring), "--out", str(out2)])
    sim2 = workdir / "failsim2.toml"
    sim2.write_text("""
DurationMs = 2050.0
Seed = 7
ClockSyncErrorUs = 1.0
[[Failures]]
Link = "eth-a-down"
FailAtMs = 1000.0
[[Failures]]
Link = "eth-a-up"
FailAtMs = 1000.0
""")
    code = main(["simulate", "--topology", str(ring), "--sim", str(sim2),
                 "--out", str(out2)])
    assert code == 4
    verdicts = json.loads((out2 / "verdicts.json").read_text())
    flow = verdicts["scenarios"][0]["flows"][0]
    assert flow["passed"] is False
    assert flow["binding"] == "Delivery"


def test_simulate_without_plan_artifacts(workdir, capsys):
    assert main(["simulate", "--topology", str(workdir / "topo.toml"),
                 "--out", str(workdir / "never")]) == 2
