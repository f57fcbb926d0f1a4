"""Alpha-beta cost models for gradient allreduce and link contention on the topology."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache

from boostersim.errors import ModelError
from boostersim.hardware import NodeSpec, Precision
from boostersim.topology import NetworkGraph, TopologySpec, cached_graph, route

RING = "ring"
HIERARCHICAL = "hierarchical"
ALGORITHMS = (RING, HIERARCHICAL)

PACKED = "packed"
ROUND_ROBIN_CELLS = "round_robin_cells"
POLICIES = (PACKED, ROUND_ROBIN_CELLS)


@dataclass(frozen=True)
class CollectiveParams:
    algorithm: str
    participants: int
    message_bytes: float
    alpha: float  # s per step
    beta: float  # s per byte
    compression_factor: float = 1.0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ModelError(f"unknown algorithm {self.algorithm!r}")
        if self.participants < 1:
            raise ModelError("participants must be >= 1")
        if self.message_bytes < 0:
            raise ModelError("message size must be >= 0")
        if self.alpha < 0:
            raise ModelError("alpha must be >= 0")
        if self.beta <= 0:
            raise ModelError("beta must be > 0")
        if not 0 < self.compression_factor <= 1:
            raise ModelError("compression factor must lie in (0, 1]")

    @property
    def wire_bytes(self) -> float:
        return self.message_bytes * self.compression_factor


@dataclass(frozen=True)
class Placement:
    """Rank to ``(node id, local device index)`` map.

    ``nodes`` lists every node reserved for the job, in ring order. It defaults
    to the nodes hosting ranks, in order of first appearance.
    """

    ranks: tuple[tuple[int, int], ...]
    policy: str = PACKED
    nodes: tuple[int, ...] | None = None

    def __post_init__(self):
        if len(set(self.ranks)) != len(self.ranks):
            raise ModelError("placement maps two ranks onto the same device")
        if self.nodes is None:
            object.__setattr__(self, "nodes", tuple(dict.fromkeys(n for n, _ in self.ranks)))

    @property
    def size(self) -> int:
        return len(self.ranks)

    def devices_per_node(self) -> dict[int, int]:
        counts = Counter(n for n, _ in self.ranks)
        return {n: counts.get(n, 0) for n in self.nodes}


def make_placement(p: int, gpus_per_node: int, topology: TopologySpec, policy: str = PACKED) -> Placement:
    """Fill ``ceil(p / gpus_per_node)`` nodes, chosen per ``policy``."""
    if p < 1:
        raise ModelError("need at least one rank")
    n_nodes = math.ceil(p / gpus_per_node)
    if n_nodes > topology.num_nodes:
        raise ModelError(f"{p} ranks need {n_nodes} nodes, system has {topology.num_nodes}")
    if policy == PACKED:
        order = range(n_nodes)
    elif policy == ROUND_ROBIN_CELLS:
        order = []
        for local in range(topology.nodes_per_cell):
            for cell in range(topology.num_cells):
                node = cell * topology.nodes_per_cell + local
                if node < topology.num_nodes:
                    order.append(node)
        order = order[:n_nodes]
    else:
        raise ModelError(f"unknown placement policy {policy!r}")
    ranks = tuple((order[r // gpus_per_node], r % gpus_per_node) for r in range(p))
    return Placement(ranks=ranks, policy=policy)


def compressed_bytes(message_bytes: float, src: Precision | str, dst: Precision | str) -> float:
    return message_bytes * Precision.parse(dst).bytes_per_element / Precision.parse(src).bytes_per_element


def ring_allreduce_time(params: CollectiveParams) -> float:
    p = params.participants
    if p == 1:
        return 0.0
    return 2 * (p - 1) * params.alpha + 2 * ((p - 1) / p) * params.wire_bytes * params.beta


def hierarchical_allreduce_time(params: CollectiveParams, node_spec: NodeSpec, placement: Placement) -> float:
    """Intra-node reduce, ring allreduce across node leaders, intra-node broadcast.

    The local phases run at the node's GPU-to-GPU bandwidth and are paced by
    the most heavily populated node.
    """
    per_node = placement.devices_per_node()
    empty = [n for n, k in per_node.items() if k == 0]
    if empty:
        raise ModelError(f"placement reserves nodes without devices: {empty}")
    if sum(per_node.values()) != params.participants:
        raise ModelError("participants disagree with placement size")
    g = max(per_node.values())
    if g > node_spec.gpus_per_node:
        raise ModelError(f"{g} devices placed on a node with {node_spec.gpus_per_node} GPUs")

    local = 0.0
    if g > 1:
        local = (g - 1) * params.alpha + ((g - 1) / g) * params.wire_bytes / node_spec.intra_node_bandwidth
    inter = ring_allreduce_time(
        CollectiveParams(
            RING, len(per_node), params.message_bytes, params.alpha, params.beta, params.compression_factor
        )
    )
    return local + inter + local


def allreduce_time(params: CollectiveParams, node_spec: NodeSpec | None = None,
                   placement: Placement | None = None) -> float:
    if params.algorithm == RING:
        return ring_allreduce_time(params)
    if node_spec is None or placement is None:
        raise ModelError("hierarchical allreduce needs a node spec and a placement")
    return hierarchical_allreduce_time(params, node_spec, placement)


# -- contention ---------------------------------------------------------------


def ring_messages(placement: Placement, algorithm: str) -> list[tuple[int, int]]:
    """(src node, dst node) pairs of one logical ring step; same-node pairs included."""
    if algorithm == RING:
        members = [n for n, _ in placement.ranks]
    elif algorithm == HIERARCHICAL:
        members = list(placement.nodes)
    else:
        raise ModelError(f"unknown algorithm {algorithm!r}")
    if len(members) < 2:
        return []
    return [(members[i], members[(i + 1) % len(members)]) for i in range(len(members))]


@dataclass(frozen=True)
class EdgeLoads:
    loads: dict[tuple[int, int], int]  # (edge index, +1 forward / -1 reverse) -> message count
    injected: int  # sum of hop counts over routed messages
    network_messages: int
    local_messages: int
    max_path_latency: float

    @property
    def total_load(self) -> int:
        return sum(self.loads.values())


def edge_loads(graph: NetworkGraph, placement: Placement, algorithm: str) -> EdgeLoads:
    for n in placement.nodes:
        if not 0 <= n < graph.spec.num_nodes:
            raise ModelError(f"placed node {n} not in graph")
    index = {id(e): i for i, e in enumerate(graph.edges)}
    loads: Counter = Counter()
    injected = local = routed = 0
    worst = 0.0
    for a, b in ring_messages(placement, algorithm):
        if a == b:
            local += 1
            continue
        path = route(graph, a, b)
        routed += 1
        injected += path.hops
        worst = max(worst, path.latency)
        for i, e in enumerate(path.edges):
            direction = 1 if e.src == path.vertices[i] else -1
            loads[(index[id(e)], direction)] += 1
    return EdgeLoads(dict(loads), injected, routed, local, worst)


def contended_beta(graph: NetworkGraph, placement: Placement, algorithm: str) -> float:
    """Seconds per byte through the most loaded link of one ring step.

    Every directed link carrying ``k`` concurrent messages offers each of them
    ``bandwidth / k``; same-node hops run at the intra-node bandwidth.
    """
    return _beta_from_loads(graph, edge_loads(graph, placement, algorithm))


def _beta_from_loads(graph: NetworkGraph, traffic: EdgeLoads) -> float:
    assert traffic.total_load == traffic.injected, "per-edge load must equal injected traffic"
    spec = graph.spec
    rates = [graph.edges[i].bandwidth / k for (i, _), k in traffic.loads.items()]
    if traffic.local_messages or not rates:
        rates.append(spec.intra_node_bandwidth * 8)
    return 8 / min(rates)


@dataclass(frozen=True)
class CommEnvironment:
    contention_factor: float  # contended beta relative to one idle NIC
    default_alpha: float


@lru_cache(maxsize=4096)
def comm_environment(topology: TopologySpec, gpus_per_node: int, p: int, policy: str,
                     algorithm: str) -> CommEnvironment:
    """Placement-dependent inputs of the collective model, cached per job shape."""
    graph = cached_graph(topology)
    placement = make_placement(p, gpus_per_node, topology, policy)
    if algorithm == HIERARCHICAL and len(placement.nodes) == 1:
        return CommEnvironment(1.0, topology.nic_latency)
    traffic = edge_loads(graph, placement, algorithm)
    beta = _beta_from_loads(graph, traffic)
    lat = traffic.max_path_latency or topology.nic_latency
    return CommEnvironment(beta * topology.nic_bandwidth / 8, lat)
