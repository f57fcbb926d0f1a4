import pytest

from boostersim.config import load_config
from boostersim.hardware import A100_40GB, NodeSpec, SystemSpec, juwels_booster
from boostersim.topology import TopologySpec, build_dragonfly_plus

# criterion id -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def small_system(num_nodes=96, nodes_per_cell=48, gpus_per_node=4, **topo) -> SystemSpec:
    spec = TopologySpec(num_nodes=num_nodes, nodes_per_cell=nodes_per_cell, **topo)
    node = NodeSpec(
        gpu=A100_40GB,
        gpus_per_node=gpus_per_node,
        nics_per_node=spec.nics_per_node,
        nic_bandwidth=spec.nic_bandwidth,
        intra_node_bandwidth=spec.intra_node_bandwidth,
    )
    return SystemSpec(node=node, num_nodes=num_nodes, topology=spec)


@pytest.fixture(scope="session")
def juwels():
    return juwels_booster()


@pytest.fixture(scope="session")
def juwels_graph(juwels):
    return build_dragonfly_plus(juwels.topology)


@pytest.fixture(scope="session")
def default_config():
    return load_config([])


@pytest.fixture(autouse=True)
def _no_env_config(monkeypatch):
    monkeypatch.delenv("BOOSTERSIM_CONFIG", raising=False)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (len(k), k)):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
