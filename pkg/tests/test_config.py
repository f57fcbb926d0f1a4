import json
from pathlib import Path

import pytest

from boostersim.config import builtin_document, deep_merge, load_config, load_topology, validate_document
from boostersim.errors import ConfigError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def write(tmp_path, name, doc):
    path = tmp_path / name
    path.write_text(doc if isinstance(doc, str) else json.dumps(doc))
    return path


def test_builtin_is_valid(default_config):
    system = default_config.system_spec()
    assert system.num_nodes == 936 and system.total_devices == 3744
    assert set(default_config.workloads) >= {"bigearthnet", "convlstm", "resnet152x4_in21k"}


@pytest.mark.parametrize("name", ["bigearthnet_fitted.json", "small_cluster.json"])
def test_shipped_configs_validate(name):
    cfg = load_config([CONFIGS / name])
    assert cfg.system_spec().total_devices >= 4


def test_shipped_topology_validates():
    spec = load_topology(CONFIGS / "two_cell_topology.json")
    assert spec.num_cells == 2


def test_fitted_fragment_overrides_only_its_fields():
    cfg = load_config([CONFIGS / "bigearthnet_fitted.json"])
    job = cfg.job("bigearthnet")
    assert job.alpha is not None and job.compute_efficiency < 0.01
    assert job.per_device_batch == 16


def test_deep_merge():
    base = {"a": {"b": 1, "c": [1, 2]}, "d": 0}
    merged = deep_merge(base, {"a": {"c": [3]}, "e": 5})
    assert merged == {"a": {"b": 1, "c": [3]}, "d": 0, "e": 5}
    assert base["a"]["c"] == [1, 2]


def test_layers_apply_in_order(tmp_path):
    first = write(tmp_path, "a.json", {"output": {"format": "json"}})
    second = write(tmp_path, "b.json", {"output": {"format": "text"}})
    assert load_config([first, second]).output.format == "text"
    assert load_config([second, first]).output.format == "json"


def test_env_var_fallback(tmp_path, monkeypatch):
    path = write(tmp_path, "env.json", {"output": {"format": "json"}})
    monkeypatch.setenv("BOOSTERSIM_CONFIG", str(path))
    assert load_config([]).output.format == "json"
    explicit = write(tmp_path, "x.json", {"output": {"format": "text"}})
    assert load_config([explicit]).output.format == "text"


def test_bad_reference_names_field(tmp_path):
    path = write(tmp_path, "bad.json", {"workloads": {"bigearthnet": {"model": "nope"}}})
    with pytest.raises(ConfigError) as info:
        load_config([path])
    assert "workloads.bigearthnet.model" in str(info.value)


def test_unknown_key_rejected(tmp_path):
    path = write(tmp_path, "bad.json", {"system": {"topology": {"links": 3}}})
    with pytest.raises(ConfigError) as info:
        load_config([path])
    assert "system.topology.links" in str(info.value)


def test_oversized_device_counts(tmp_path):
    path = write(tmp_path, "bad.json", {"workloads": {"convlstm": {"devices": [1, 10_000]}}})
    with pytest.raises(ConfigError) as info:
        load_config([path])
    assert "convlstm.devices" in str(info.value)


def test_json_syntax_error_has_position(tmp_path):
    path = write(tmp_path, "broken.json", '{\n  "output": {"format": "csv",}\n}')
    with pytest.raises(ConfigError) as info:
        load_config([path])
    assert "line 2" in str(info.value)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config([tmp_path / "absent.json"])


def test_custom_gpu(tmp_path):
    doc = deep_merge(builtin_document(), {
        "system": {"gpu": {"name": "toy", "peak_flops": {"FP64": 1e12, "FP32": 2e12, "TF32_TC": 8e12},
                           "tdp": 100, "memory": 1e10}},
    })
    # the built-in models compute in TF32_TC, which the toy part supports
    cfg = validate_document(doc)
    assert cfg.system_spec().gpu.name == "toy"


def test_unknown_gpu_preset(tmp_path):
    path = write(tmp_path, "bad.json", {"system": {"gpu": "Z100"}})
    with pytest.raises(ConfigError) as info:
        load_config([path])
    assert "system.gpu" in str(info.value)
