import json

import pytest

from boostersim.cli import parse_size, run
from boostersim.config import load_config


def call(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize(
    "argv",
    [
        ["topo"],
        ["topo", "route", "0", "500"],
        ["hw", "show"],
        ["collective", "-p", "4", "64", "--size", "100MB", "1GiB"],
        ["collective", "--algorithm", "hierarchical", "-p", "64", "--size", "1MB", "--compression", "FP32:FP16"],
        ["train", "--workload", "resnet152x4_in21k"],
        ["sweep", "--workload", "convlstm", "--devices", "1", "2", "4"],
        ["calibrate", "--measurements", "convlstm_scaling"],
        ["reproduce", "--case", "peaks"],
    ],
)
def test_every_subcommand_runs(capsys, argv):
    code, out, _ = call(capsys, *argv, "--quiet")
    assert code == 0
    assert out


def test_topo_edges_and_dot(capsys, tmp_path):
    topo = tmp_path / "t.json"
    topo.write_text(json.dumps({"num_nodes": 8, "nodes_per_cell": 4, "intercell_links_per_pair": 2}))
    code, out, _ = call(capsys, "topo", "edges", "--topology", str(topo))
    assert code == 0 and out.startswith("src_id,dst_id,kind,bandwidth_bits_per_s,latency_s\n")
    code, out, _ = call(capsys, "topo", "dot", "--topology", str(topo))
    assert code == 0 and out.startswith("graph")


def test_route_needs_endpoints(capsys):
    code, _, err = call(capsys, "topo", "route", "3")
    assert code == 2 and "SRC and DST" in err


def test_route_bad_node_is_model_error(capsys):
    code, _, err = call(capsys, "topo", "route", "0", "99999")
    assert code == 1 and err


def test_empty_sweep_exits_2(capsys):
    code, _, err = call(capsys, "sweep", "--workload", "convlstm", "--devices")
    assert code == 2 and "--devices" in err


def test_invalid_config_exits_2(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"system": {"topology": {"num_nodes": 0}}}')
    code, _, err = call(capsys, "hw", "--config", str(bad))
    assert code == 2 and "system.topology.num_nodes" in err


def test_unknown_workload_exits_2(capsys):
    code, _, err = call(capsys, "train", "--workload", "gpt")
    assert code == 2 and "unknown workload" in err


def test_bisection_case_output(capsys):
    code, out, _ = call(capsys, "reproduce", "--case", "bisection")
    assert code == 0
    assert "400 Tbit/s" in out and "PASS bisection" in out


def test_repeated_runs_are_byte_identical(capsys, tmp_path):
    outputs = []
    for i in range(2):
        target = tmp_path / f"sweep{i}.csv"
        assert run(["sweep", "--workload", "bigearthnet", "--quiet", "--out", str(target)]) == 0
        outputs.append(target.read_bytes())
    assert outputs[0] == outputs[1]
    assert b"\r" not in outputs[0]


def test_formats(capsys):
    _, csv_out, _ = call(capsys, "hw", "--format", "csv")
    _, json_out, _ = call(capsys, "hw", "--format", "json")
    _, text_out, err = call(capsys, "hw", "--format", "text")
    assert csv_out.splitlines()[0].startswith("precision,")
    assert len(json.loads(json_out)) == 6
    assert "---" in text_out and err == ""


def test_human_table_goes_to_stderr(capsys):
    _, out, err = call(capsys, "hw")
    assert "," in out.splitlines()[0]
    assert "---" in err


def test_calibrate_fragment_round_trips(capsys, tmp_path):
    frag = tmp_path / "fit.json"
    assert run(["calibrate", "--measurements", "bigearthnet_scaling", "--quiet", "--out", str(frag)]) == 0
    doc = json.loads(frag.read_text())
    fitted = doc["workloads"]["bigearthnet"]
    assert set(fitted) == {"compute_efficiency", "alpha", "beta"}
    job = load_config([frag]).job("bigearthnet")
    assert job.alpha == fitted["alpha"]
    code, out, _ = call(capsys, "train", "--workload", "bigearthnet", "--devices", "256",
                        "--config", str(frag), "--format", "json", "--quiet")
    epoch = json.loads(out)[0]["epoch_time_s"]
    assert epoch == pytest.approx(50, rel=1e-6)


def test_calibrate_from_csv(capsys, tmp_path):
    data = tmp_path / "m.csv"
    data.write_text("p,time_s\n1,3000\n16,208.33333333333334\n")
    code, out, _ = call(capsys, "calibrate", "--csv", str(data), "--workload", "convlstm", "--quiet")
    assert code == 0
    assert json.loads(out)["workloads"]["convlstm"]["compute_efficiency"] == pytest.approx(0.0659, rel=1e-2)


def test_calibrate_bad_csv(capsys, tmp_path):
    data = tmp_path / "m.csv"
    data.write_text("devices,seconds\n1,3\n")
    code, _, err = call(capsys, "calibrate", "--csv", str(data), "--workload", "convlstm")
    assert code == 2 and "missing columns" in err


def test_reproduce_needs_selection(capsys):
    assert call(capsys, "reproduce")[0] == 2


@pytest.mark.parametrize(
    "text,value",
    [("4096", 4096), ("1KB", 1e3), ("1.5MB", 1.5e6), ("2GB", 2e9), ("1KiB", 1024), ("1GiB", 2**30), ("3e2B", 300)],
)
def test_parse_size(text, value):
    assert parse_size(text) == value


def test_parse_size_rejects_garbage():
    import argparse

    with pytest.raises(argparse.ArgumentTypeError):
        parse_size("ten MB")
