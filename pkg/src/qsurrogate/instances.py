"""Classical problem instances: weighted 3-regular Max-Cut and heavy-hex Ising models.

Bitstrings use z_i in {-1, +1}. When an instance is laid out over the 2**n
computational basis states, bit i of the basis index b maps to
z_i = 1 - 2 * ((b >> i) & 1), so index 0 is the all-(+1) string.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import networkx as nx
import numpy as np

MAX_ENUMERATION_QUBITS = 24


class InstanceError(ValueError):
    pass


@dataclass(frozen=True)
class Graph:
    n: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        seen = set()
        normalized = []
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise InstanceError(f"self-loop on vertex {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise InstanceError(f"edge ({i}, {j}) out of range for n={self.n}")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise InstanceError(f"duplicate edge {key}")
            seen.add(key)
            normalized.append(key)
        object.__setattr__(self, "edges", tuple(normalized))

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def neighbors(self, v: int) -> list[int]:
        out = [j for i, j in self.edges if i == v] + [i for i, j in self.edges if j == v]
        return sorted(out)

    def is_connected(self) -> bool:
        if self.n == 0:
            return True
        adj = [[] for _ in range(self.n)]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        seen = {0}
        queue = deque([0])
        while queue:
            v = queue.popleft()
            for w in adj[v]:
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        return len(seen) == self.n


# eq=False keeps identity hashing so engines can cache per-instance tables.
@dataclass(eq=False)
class MaxCutInstance:
    graph: Graph
    weights: np.ndarray  # aligned with graph.edges
    seed: int | None = None
    kind: str = field(default="maxcut", init=False)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (len(self.graph.edges),):
            raise InstanceError("need exactly one weight per edge")
        if np.any(self.weights < 0.0) or np.any(self.weights > 1.0):
            raise InstanceError("Max-Cut weights must lie in [0, 1]")

    @property
    def n(self) -> int:
        return self.graph.n


@dataclass(eq=False)
class HeavyHexInstance:
    graph: Graph
    linear: np.ndarray  # (n,) entries in {-1, +1}
    quadratic: np.ndarray  # aligned with graph.edges
    cubic: tuple[tuple[int, int, int, int], ...]  # (i, j, k, coefficient)
    seed: int | None = None
    kind: str = field(default="heavy_hex", init=False)

    def __post_init__(self):
        self.linear = np.asarray(self.linear, dtype=np.int64)
        self.quadratic = np.asarray(self.quadratic, dtype=np.int64)
        self.cubic = tuple(tuple(int(v) for v in t) for t in self.cubic)
        if self.linear.shape != (self.graph.n,):
            raise InstanceError("need one linear coefficient per vertex")
        if self.quadratic.shape != (len(self.graph.edges),):
            raise InstanceError("need one quadratic coefficient per edge")
        coeffs = np.concatenate([self.linear, self.quadratic, [t[3] for t in self.cubic]])
        if not np.all(np.abs(coeffs) == 1):
            raise InstanceError("heavy-hex coefficients must be +1 or -1")
        deg = self.graph.degrees()
        centers = sorted(t[0] for t in self.cubic)
        if centers != [int(v) for v in np.flatnonzero(deg == 2)]:
            raise InstanceError("cubic terms must sit exactly on degree-2 vertices")
        for i, j, k, _ in self.cubic:
            if [j, k] != self.graph.neighbors(i):
                raise InstanceError(f"cubic term on {i} must couple its two neighbours")

    @property
    def n(self) -> int:
        return self.graph.n


Instance = Union[MaxCutInstance, HeavyHexInstance]


@dataclass(frozen=True)
class SpectrumExtrema:
    c_min: float
    c_max: float
    argmin: np.ndarray
    argmax: np.ndarray


def generate_3regular_maxcut(n: int, seed: int, max_retries: int = 1000) -> MaxCutInstance:
    """Random connected 3-regular graph (pairing model) with U[0, 1] edge weights.

    Pairings with self-loops, repeated edges, or more than one component are
    rejected and redrawn from the same generator.
    """
    if n < 4 or n % 2:
        raise InstanceError(f"3-regular graphs need an even n >= 4, got {n}")
    rng = np.random.default_rng(seed)
    stubs = np.repeat(np.arange(n), 3)
    for _ in range(max_retries):
        pairs = rng.permutation(stubs).reshape(-1, 2)
        if np.any(pairs[:, 0] == pairs[:, 1]):
            continue
        keys = {(int(min(a, b)), int(max(a, b))) for a, b in pairs}
        if len(keys) != len(pairs):
            continue
        graph = Graph(n, tuple(sorted(keys)))
        if not graph.is_connected():
            continue
        weights = rng.uniform(0.0, 1.0, size=len(graph.edges))
        return MaxCutInstance(graph, weights, seed=seed)
    raise InstanceError(f"no simple connected 3-regular graph after {max_retries} draws")


def generate_heavy_hex(rows: int, cols: int) -> Graph:
    """Honeycomb patch of rows x cols hexagons with every edge subdivided once.

    Original lattice sites come first (sorted by lattice coordinate), then one
    degree-2 site per honeycomb edge in sorted edge order.
    """
    if rows < 1 or cols < 1:
        raise InstanceError("heavy-hex patch needs rows >= 1 and cols >= 1")
    lattice = nx.hexagonal_lattice_graph(rows, cols)
    sites = sorted(lattice.nodes)
    index = {site: k for k, site in enumerate(sites)}
    honeycomb_edges = sorted(tuple(sorted((index[a], index[b]))) for a, b in lattice.edges)
    edges = []
    next_id = len(sites)
    for a, b in honeycomb_edges:
        edges.append((a, next_id))
        edges.append((b, next_id))
        next_id += 1
    return Graph(next_id, tuple(sorted(edges)))


def truncate_graph(graph: Graph, n_keep: int, root: int = 0) -> Graph:
    """Connected induced subgraph on the first ``n_keep`` vertices of a BFS from ``root``.

    Vertices are relabelled in visit order. Used to cut heavy-hex patches
    down to sizes the exact simulator can handle.
    """
    if not 1 <= n_keep <= graph.n:
        raise InstanceError(f"n_keep must be in [1, {graph.n}]")
    order = [root]
    seen = {root}
    queue = deque([root])
    while queue and len(order) < n_keep:
        v = queue.popleft()
        for w in graph.neighbors(v):
            if w not in seen and len(order) < n_keep:
                seen.add(w)
                order.append(w)
                queue.append(w)
    if len(order) < n_keep:
        raise InstanceError("graph component smaller than n_keep")
    relabel = {v: k for k, v in enumerate(order)}
    edges = [(relabel[i], relabel[j]) for i, j in graph.edges if i in relabel and j in relabel]
    return Graph(n_keep, tuple(sorted(tuple(sorted(e)) for e in edges)))


def generate_heavy_hex_instance(graph: Graph, seed: int) -> HeavyHexInstance:
    if graph.n and graph.degrees().max() > 3:
        raise InstanceError("heavy-hex instances need max degree <= 3")
    rng = np.random.default_rng(seed)

    def signs(size):
        return 2 * rng.integers(0, 2, size=size) - 1

    linear = signs(graph.n)
    quadratic = signs(len(graph.edges))
    deg = graph.degrees()
    centers = np.flatnonzero(deg == 2)
    cubic_signs = signs(len(centers))
    cubic = []
    for c, s in zip(centers, cubic_signs):
        j, k = graph.neighbors(int(c))
        cubic.append((int(c), j, k, int(s)))
    return HeavyHexInstance(graph, linear, quadratic, tuple(cubic), seed=seed)


def _spins(instance: Instance, z) -> np.ndarray:
    z = np.asarray(z)
    if z.shape[-1] != instance.n:
        raise InstanceError(f"bitstring length {z.shape[-1]} != n={instance.n}")
    return z


def classical_cost(instance: Instance, z) -> np.ndarray | float:
    """C(z) for one bitstring (shape (n,)) or a batch (shape (m, n))."""
    z = _spins(instance, z)
    zf = z.astype(np.float64)
    if instance.graph.edges:
        e = np.asarray(instance.graph.edges)
        pair = zf[..., e[:, 0]] * zf[..., e[:, 1]]
    else:
        pair = np.zeros(zf.shape[:-1] + (0,))
    if isinstance(instance, MaxCutInstance):
        out = pair @ instance.weights
    else:
        out = zf @ instance.linear + pair @ instance.quadratic
        for i, j, k, c in instance.cubic:
            out = out + c * zf[..., i] * zf[..., j] * zf[..., k]
    return float(out) if np.ndim(out) == 0 else out


def cost_table(instance: Instance) -> np.ndarray:
    """C(z) for every basis index 0 .. 2**n - 1 (see module docstring for bit order)."""
    n = instance.n
    if n > MAX_ENUMERATION_QUBITS:
        raise InstanceError(f"n={n} exceeds enumeration limit {MAX_ENUMERATION_QUBITS}")
    idx = np.arange(1 << n, dtype=np.int64)
    z = [1.0 - 2.0 * ((idx >> i) & 1) for i in range(n)]
    table = np.zeros(1 << n)
    if isinstance(instance, MaxCutInstance):
        for (i, j), w in zip(instance.graph.edges, instance.weights):
            table += w * (z[i] * z[j])
    else:
        for i in range(n):
            table += instance.linear[i] * z[i]
        for (i, j), d in zip(instance.graph.edges, instance.quadratic):
            table += d * (z[i] * z[j])
        for i, j, k, c in instance.cubic:
            table += c * (z[i] * z[j] * z[k])
    return table


def index_to_spins(index: int, n: int) -> np.ndarray:
    return np.array([1 - 2 * ((index >> i) & 1) for i in range(n)], dtype=np.int8)


def brute_force_extrema(instance: Instance) -> SpectrumExtrema:
    table = cost_table(instance)
    lo, hi = int(np.argmin(table)), int(np.argmax(table))
    return SpectrumExtrema(
        c_min=float(table[lo]),
        c_max=float(table[hi]),
        argmin=index_to_spins(lo, instance.n),
        argmax=index_to_spins(hi, instance.n),
    )


def instance_to_dict(instance: Instance) -> dict:
    out = {
        "kind": instance.kind,
        "n": instance.n,
        "edges": [list(e) for e in instance.graph.edges],
    }
    if isinstance(instance, MaxCutInstance):
        out["weights"] = [float(w) for w in instance.weights]
    else:
        out["linear"] = [int(v) for v in instance.linear]
        out["quadratic"] = [int(v) for v in instance.quadratic]
        out["cubic"] = [list(t) for t in instance.cubic]
    out["seed"] = instance.seed
    return out


def instance_from_dict(data: dict) -> Instance:
    graph = Graph(int(data["n"]), tuple(tuple(e) for e in data["edges"]))
    kind = data["kind"]
    if kind == "maxcut":
        return MaxCutInstance(graph, data["weights"], seed=data.get("seed"))
    if kind == "heavy_hex":
        return HeavyHexInstance(
            graph,
            data["linear"],
            data["quadratic"],
            tuple(tuple(t) for t in data["cubic"]),
            seed=data.get("seed"),
        )
    raise InstanceError(f"unknown instance kind {kind!r}")


def save_instance(instance: Instance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(instance), indent=1) + "\n")


def load_instance(path) -> Instance:
    return instance_from_dict(json.loads(Path(path).read_text()))
