"""DragonFly+ network construction, minimal routing and bisection analysis.

Vertex numbering is fixed so that output is reproducible: compute nodes take
ids ``0..num_nodes-1``, followed by each cell's leaf switches and then its
spine switches, cell by cell.
"""

from __future__ import annotations

import io
import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

from boostersim.errors import ModelError

COMPUTE = "compute-node"
LEAF = "leaf-switch"
SPINE = "spine-switch"

NIC_LINK = "nic"
LOCAL_LINK = "intra-cell"
GLOBAL_LINK = "inter-cell"


@dataclass(frozen=True)
class TopologySpec:
    num_nodes: int
    nodes_per_cell: int
    intercell_links_per_pair: int = 10
    link_bandwidth: float = 200e9  # bits/s per direction
    intra_cell_levels: int = 2
    nics_per_node: int = 4
    nic_bandwidth: float = 200e9  # bits/s per direction
    intra_node_bandwidth: float = 300e9  # bytes/s
    switch_hop_latency: float = 150e-9
    nic_latency: float = 1e-6
    hosts_per_leaf: int | None = None  # defaults to nodes_per_cell
    spines_per_cell: int | None = None  # defaults to the leaf count

    def __post_init__(self):
        if self.num_nodes < 1:
            raise ModelError("topology needs at least one compute node")
        if self.nodes_per_cell < 1:
            raise ModelError("nodes_per_cell must be >= 1")
        for name in ("intercell_links_per_pair", "nics_per_node"):
            if getattr(self, name) < 1:
                raise ModelError(f"{name} must be >= 1")
        if self.intra_cell_levels != 2:
            raise ModelError("only two-level (leaf/spine) cells are supported")
        for name in ("link_bandwidth", "nic_bandwidth", "intra_node_bandwidth"):
            if getattr(self, name) <= 0:
                raise ModelError(f"{name} must be positive")
        if self.switch_hop_latency < 0 or self.nic_latency < 0:
            raise ModelError("latencies must be non-negative")
        if self.hosts_per_leaf is not None and self.hosts_per_leaf < 1:
            raise ModelError("hosts_per_leaf must be >= 1")
        if self.spines_per_cell is not None and self.spines_per_cell < 1:
            raise ModelError("spines_per_cell must be >= 1")

    @property
    def num_cells(self) -> int:
        return math.ceil(self.num_nodes / self.nodes_per_cell)

    @property
    def leaf_hosts(self) -> int:
        return min(self.hosts_per_leaf or self.nodes_per_cell, self.nodes_per_cell)

    @property
    def leaf_groups(self) -> int:
        return math.ceil(self.nodes_per_cell / self.leaf_hosts)

    @property
    def leaves_per_cell(self) -> int:
        # one leaf plane per NIC rail
        return self.nics_per_node * self.leaf_groups

    @property
    def spines(self) -> int:
        return self.spines_per_cell or self.leaves_per_cell

    def cell_population(self, cell: int) -> int:
        return min(self.nodes_per_cell, self.num_nodes - cell * self.nodes_per_cell)


@dataclass(frozen=True)
class Vertex:
    id: int
    kind: str
    cell: int


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    kind: str
    bandwidth: float  # bits/s per direction
    latency: float

    def other(self, v: int) -> int:
        return self.dst if v == self.src else self.src


@dataclass(frozen=True, eq=False)
class NetworkGraph:
    spec: TopologySpec
    vertices: tuple[Vertex, ...]
    edges: tuple[Edge, ...]

    @cached_property
    def adjacency(self) -> tuple[tuple[tuple[int, int], ...], ...]:
        """Per vertex: ``(neighbour, edge index)`` pairs in ascending order."""
        adj: list[list[tuple[int, int]]] = [[] for _ in self.vertices]
        for i, e in enumerate(self.edges):
            adj[e.src].append((e.dst, i))
            adj[e.dst].append((e.src, i))
        return tuple(tuple(sorted(a)) for a in adj)

    @property
    def num_cells(self) -> int:
        return self.spec.num_cells

    def cell_of(self, v: int) -> int:
        return self.vertices[v].cell

    def compute_nodes(self) -> range:
        return range(self.spec.num_nodes)

    def leaves(self, cell: int) -> list[int]:
        return [v.id for v in self.vertices if v.cell == cell and v.kind == LEAF]

    def spines(self, cell: int) -> list[int]:
        return [v.id for v in self.vertices if v.cell == cell and v.kind == SPINE]

    def inter_cell_edges(self) -> list[Edge]:
        return [e for e in self.edges if e.kind == GLOBAL_LINK]

    def is_connected(self) -> bool:
        seen = {0}
        queue = deque([0])
        adj = self.adjacency
        while queue:
            u = queue.popleft()
            for v, _ in adj[u]:
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return len(seen) == len(self.vertices)


@dataclass(frozen=True)
class Path:
    vertices: tuple[int, ...]
    edges: tuple[Edge, ...]
    nic_latency: float = 0.0

    def __post_init__(self):
        if len(self.vertices) != len(self.edges) + 1:
            raise ModelError("path needs one more vertex than edges")
        for i, e in enumerate(self.edges):
            if {e.src, e.dst} != {self.vertices[i], self.vertices[i + 1]}:
                raise ModelError(f"edge {i} does not join consecutive path vertices")

    @property
    def hops(self) -> int:
        return len(self.edges)

    @property
    def bottleneck_bandwidth(self) -> float:
        if not self.edges:
            raise ModelError("empty path has no bottleneck")
        return min(e.bandwidth for e in self.edges)

    @property
    def latency(self) -> float:
        return path_latency(self)


def build_dragonfly_plus(spec: TopologySpec) -> NetworkGraph:
    """Build the full vertex/edge list for ``spec``.

    Each cell is a two-level fat tree: every node has one link per NIC rail
    to a leaf of that rail, and every leaf has a trunk to every spine sized
    so the cell is non-blocking. Each unordered cell pair gets exactly
    ``intercell_links_per_pair`` spine-to-spine links, spread round-robin over
    the spines of both cells.
    """
    n_cells = spec.num_cells
    vertices = [Vertex(i, COMPUTE, i // spec.nodes_per_cell) for i in range(spec.num_nodes)]
    leaf_ids: list[list[int]] = []
    spine_ids: list[list[int]] = []
    next_id = spec.num_nodes
    for c in range(n_cells):
        leaves = list(range(next_id, next_id + spec.leaves_per_cell))
        next_id += spec.leaves_per_cell
        spines = list(range(next_id, next_id + spec.spines))
        next_id += spec.spines
        vertices += [Vertex(v, LEAF, c) for v in leaves]
        vertices += [Vertex(v, SPINE, c) for v in spines]
        leaf_ids.append(leaves)
        spine_ids.append(spines)

    h = spec.switch_hop_latency
    edges: list[Edge] = []
    for node in range(spec.num_nodes):
        c, local = divmod(node, spec.nodes_per_cell)
        group = local // spec.leaf_hosts
        for rail in range(spec.nics_per_node):
            leaf = leaf_ids[c][rail * spec.leaf_groups + group]
            edges.append(Edge(node, leaf, NIC_LINK, spec.nic_bandwidth, h))

    trunk = spec.leaf_hosts * spec.nic_bandwidth / spec.spines
    for c in range(n_cells):
        for leaf in leaf_ids[c]:
            for spine in spine_ids[c]:
                edges.append(Edge(leaf, spine, LOCAL_LINK, trunk, h))

    s = spec.spines
    for a, b in itertools.combinations(range(n_cells), 2):
        for k in range(spec.intercell_links_per_pair):
            sa = spine_ids[a][(k + b) % s]
            sb = spine_ids[b][(k + a + k // s) % s]
            edges.append(Edge(sa, sb, GLOBAL_LINK, spec.link_bandwidth, h))

    return NetworkGraph(spec=spec, vertices=tuple(vertices), edges=tuple(edges))


@lru_cache(maxsize=32)
def cached_graph(spec: TopologySpec) -> NetworkGraph:
    return build_dragonfly_plus(spec)


def _check_vertex(graph: NetworkGraph, v: int) -> None:
    if not isinstance(v, int) or not 0 <= v < len(graph.vertices):
        raise ModelError(f"unknown vertex id {v!r}")


def route(graph: NetworkGraph, src: int, dst: int) -> Path:
    """Minimum-hop path from ``src`` to ``dst``.

    Compute nodes never act as transit vertices. Among equal-length paths the
    lowest-numbered next vertex (then lowest edge index) wins at every step.
    """
    _check_vertex(graph, src)
    _check_vertex(graph, dst)
    if graph.vertices[src].kind != COMPUTE or graph.vertices[dst].kind != COMPUTE:
        raise ModelError("route endpoints must be compute nodes")
    if src == dst:
        raise ModelError("route requires src != dst")

    adj = graph.adjacency
    # BFS from dst; stop once the level holding src is complete.
    dist = {dst: 0}
    frontier = [dst]
    while src not in dist:
        if not frontier:
            raise ModelError(f"no route from {src} to {dst}")
        nxt = []
        for u in frontier:
            if u != dst and graph.vertices[u].kind == COMPUTE:
                continue
            for v, _ in adj[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    nxt.append(v)
        frontier = nxt

    verts = [src]
    used: list[Edge] = []
    u = src
    while u != dst:
        want = dist[u] - 1
        for v, ei in adj[u]:
            if dist.get(v) == want and (v == dst or graph.vertices[v].kind != COMPUTE):
                used.append(graph.edges[ei])
                verts.append(v)
                u = v
                break
        else:  # pragma: no cover - BFS guarantees a predecessor
            raise ModelError("routing table inconsistent")
    return Path(tuple(verts), tuple(used), graph.spec.nic_latency)


def path_latency(path: Path) -> float:
    if not path.edges:
        raise ModelError("path latency undefined for an empty path")
    return sum(e.latency for e in path.edges) + 2 * path.nic_latency


def bisection_bandwidth(graph: NetworkGraph) -> float:
    """Bits/s across the weakest balanced split of cells, both directions summed.

    Every cell pair carries the same number of global links, so any split into
    ``floor(C/2)`` and ``ceil(C/2)`` cells cuts the same capacity.
    """
    c = graph.num_cells
    half = c // 2
    spec = graph.spec
    return half * (c - half) * spec.intercell_links_per_pair * spec.link_bandwidth * 2


def exhaustive_bisection_bandwidth(graph: NetworkGraph) -> float:
    """Minimum cut capacity over all balanced cell bipartitions, by enumeration."""
    c = graph.num_cells
    if c < 2:
        return 0.0
    cells = range(c)
    best = math.inf
    for side in itertools.combinations(cells, c // 2):
        if 0 not in side and c % 2 == 0:
            continue  # mirror image of a split already seen
        left = set(side)
        cut = sum(
            e.bandwidth
            for e in graph.edges
            if (graph.cell_of(e.src) in left) != (graph.cell_of(e.dst) in left)
        )
        best = min(best, 2 * cut)
    return best


def edge_list_csv(graph: NetworkGraph) -> str:
    out = io.StringIO()
    out.write("src_id,dst_id,kind,bandwidth_bits_per_s,latency_s\n")
    for e in graph.edges:
        out.write(f"{e.src},{e.dst},{e.kind},{e.bandwidth!r},{e.latency!r}\n")
    return out.getvalue()


_DOT_SHAPE = {COMPUTE: "box", LEAF: "ellipse", SPINE: "diamond"}


def to_dot(graph: NetworkGraph) -> str:
    lines = ["graph dragonfly_plus {"]
    for c in range(graph.num_cells):
        lines.append(f"  subgraph cluster_cell{c} {{")
        lines.append(f'    label="cell {c}";')
        for v in graph.vertices:
            if v.cell == c:
                lines.append(f'    v{v.id} [label="{v.kind} {v.id}", shape={_DOT_SHAPE[v.kind]}];')
        lines.append("  }")
    for e in graph.edges:
        style = ' [style=bold, color="red"]' if e.kind == GLOBAL_LINK else ""
        lines.append(f"  v{e.src} -- v{e.dst}{style};")
    lines.append("}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class TopologySummary:
    cells: int
    compute_nodes: int
    leaf_switches: int
    spine_switches: int
    edges: int
    inter_cell_edges: int
    bisection_bits_per_s: float
    cell_sizes: tuple[int, ...] = field(default=())


def summarize(graph: NetworkGraph) -> TopologySummary:
    kinds = [v.kind for v in graph.vertices]
    spec = graph.spec
    return TopologySummary(
        cells=graph.num_cells,
        compute_nodes=kinds.count(COMPUTE),
        leaf_switches=kinds.count(LEAF),
        spine_switches=kinds.count(SPINE),
        edges=len(graph.edges),
        inter_cell_edges=len(graph.inter_cell_edges()),
        bisection_bits_per_s=bisection_bandwidth(graph),
        cell_sizes=tuple(spec.cell_population(c) for c in range(graph.num_cells)),
    )
