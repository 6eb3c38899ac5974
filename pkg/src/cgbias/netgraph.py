"""Directed multigraphs, series-parallel composition and path enumeration.

Graphs that must be directed series-parallel are *built* from a recipe
(``dsp_edge`` / ``dsp_series`` / ``dsp_parallel``) rather than recognised; the
recipe travels with the network as its certificate.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import PathExplosion

__all__ = [
    "Network",
    "DspRecipe",
    "PathSet",
    "dsp_edge",
    "dsp_series",
    "dsp_parallel",
    "build_dsp",
    "enumerate_paths",
    "validate_flow",
    "DEFAULT_PATH_CAP",
]

DEFAULT_PATH_CAP = 10_000


@dataclass(frozen=True)
class Network:
    """Directed multigraph with stable edge order.

    ``edges`` is a tuple of ``(edge_id, tail, head)``.  Parallel edges between
    the same pair of nodes are allowed.
    """

    nodes: Tuple
    edges: Tuple[Tuple[str, object, object], ...]
    dsp_certificate: Optional["DspRecipe"] = None
    source: object = None
    target: object = None

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(tuple(e) for e in self.edges))
        node_set = set(self.nodes)
        if len(node_set) != len(self.nodes):
            raise ValueError("duplicate node identifiers")
        ids = [e[0] for e in self.edges]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate edge identifiers")
        for eid, u, v in self.edges:
            if u not in node_set or v not in node_set:
                raise ValueError(f"edge {eid!r} references an unknown node")
        if self.dsp_certificate is not None:
            mapping = _match_certificate(build_dsp(self.dsp_certificate), self)
            if mapping is None:
                raise ValueError("dsp certificate does not reproduce the edge set")
            built = build_dsp(self.dsp_certificate)
            for attr in ("source", "target"):
                want = mapping[getattr(built, attr)]
                if getattr(self, attr) is None:
                    object.__setattr__(self, attr, want)
                elif getattr(self, attr) != want:
                    raise ValueError(f"dsp certificate {attr} disagrees with the network")

    @property
    def edge_ids(self) -> Tuple[str, ...]:
        return tuple(e[0] for e in self.edges)

    @property
    def edge_index(self) -> Dict[str, int]:
        return {e[0]: i for i, e in enumerate(self.edges)}

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def is_dsp(self) -> bool:
        return self.dsp_certificate is not None

    def out_edges(self) -> Dict[object, List[Tuple[str, object]]]:
        out = {n: [] for n in self.nodes}
        for eid, u, v in self.edges:
            out[u].append((eid, v))
        for lst in out.values():
            lst.sort(key=lambda t: t[0])
        return out

    def topological_order(self) -> Optional[List]:
        """Kahn order with ties broken by node repr; ``None`` if cyclic."""
        indeg = {n: 0 for n in self.nodes}
        for _, _, v in self.edges:
            indeg[v] += 1
        out = self.out_edges()
        ready = sorted((n for n, d in indeg.items() if d == 0), key=repr)
        order = []
        while ready:
            n = ready.pop(0)
            order.append(n)
            for _, v in out[n]:
                indeg[v] -= 1
                if indeg[v] == 0:
                    ready.append(v)
            ready.sort(key=repr)
        return order if len(order) == len(self.nodes) else None

    def is_acyclic(self) -> bool:
        return self.topological_order() is not None

    def reachable(self, u, v) -> bool:
        out = self.out_edges()
        seen, stack = {u}, [u]
        while stack:
            n = stack.pop()
            if n == v:
                return True
            for _, w in out[n]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return False


def _match_certificate(built: "Network", net: "Network"):
    """Node bijection under which ``built`` and ``net`` share every edge, or None."""
    if len(built.edges) != len(net.edges) or len(built.nodes) != len(net.nodes):
        return None
    theirs = {eid: (u, v) for eid, u, v in net.edges}
    mapping, used = {}, set()
    for eid, bu, bv in built.edges:
        if eid not in theirs:
            return None
        for b, t in zip((bu, bv), theirs[eid]):
            if b in mapping:
                if mapping[b] != t:
                    return None
            elif t in used:
                return None
            else:
                mapping[b] = t
                used.add(t)
    return mapping


# --- series-parallel recipes -----------------------------------------------


@dataclass(frozen=True)
class DspRecipe:
    """Binary composition tree: leaves are edge ids, inner nodes SERIES/PARALLEL."""

    op: str
    edge: Optional[str] = None
    children: Tuple["DspRecipe", ...] = ()

    def __post_init__(self):
        if self.op == "EDGE":
            if self.edge is None or self.children:
                raise ValueError("leaf recipe needs an edge id and no children")
        elif self.op in ("SERIES", "PARALLEL"):
            if len(self.children) != 2:
                raise ValueError(f"{self.op} needs exactly two children")
        else:
            raise ValueError(f"unknown recipe op {self.op!r}")

    def leaves(self) -> List[str]:
        if self.op == "EDGE":
            return [self.edge]
        return self.children[0].leaves() + self.children[1].leaves()

    def path_count(self) -> int:
        if self.op == "EDGE":
            return 1
        a, b = (c.path_count() for c in self.children)
        return a * b if self.op == "SERIES" else a + b

    def depth(self) -> int:
        if self.op == "EDGE":
            return 0
        return 1 + max(c.depth() for c in self.children)

    def to_dict(self):
        if self.op == "EDGE":
            return {"edge": self.edge}
        return {self.op.lower(): [c.to_dict() for c in self.children]}

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict) or len(data) != 1:
            raise ValueError("recipe node must be a single-key object")
        (key, val), = data.items()
        if key == "edge":
            return dsp_edge(str(val))
        if key in ("series", "parallel"):
            if not isinstance(val, list) or len(val) != 2:
                raise ValueError(f"{key} needs a two-element list")
            kids = tuple(cls.from_dict(v) for v in val)
            return DspRecipe(key.upper(), children=kids)
        raise ValueError(f"unknown recipe key {key!r}")


def dsp_edge(edge_id: str) -> DspRecipe:
    return DspRecipe("EDGE", edge=str(edge_id))


def dsp_series(a: DspRecipe, b: DspRecipe) -> DspRecipe:
    return DspRecipe("SERIES", children=(a, b))


def dsp_parallel(a: DspRecipe, b: DspRecipe) -> DspRecipe:
    return DspRecipe("PARALLEL", children=(a, b))


def _build(recipe, counter, edges, nodes):
    if recipe.op == "EDGE":
        u, v = next(counter), next(counter)
        nodes.extend([u, v])
        edges.append([recipe.edge, u, v])
        return u, v
    su, sv = _build(recipe.children[0], counter, edges, nodes)
    mark = len(edges)
    tu, tv = _build(recipe.children[1], counter, edges, nodes)
    if recipe.op == "SERIES":
        merge = {tu: sv}
        result = (su, tv)
    else:
        merge = {tu: su, tv: sv}
        result = (su, sv)
    for e in edges[mark:]:
        e[1] = merge.get(e[1], e[1])
        e[2] = merge.get(e[2], e[2])
    for old in merge:
        nodes.remove(old)
    return result


def build_dsp(recipe: DspRecipe, certify: bool = False) -> Network:
    """Replay a recipe into a network with canonical integer node labels.

    Nodes are renumbered in order of first appearance along the edge list, so
    the same recipe always yields the same graph.  With ``certify`` the recipe
    is attached as the network's ``dsp_certificate``.
    """
    edges, nodes = [], []
    src, dst = _build(recipe, itertools.count(), edges, nodes)
    relabel = {}
    for n in [src] + [x for e in edges for x in (e[1], e[2])] + [dst]:
        if n not in relabel:
            relabel[n] = f"n{len(relabel)}"
    edge_tuples = tuple((e[0], relabel[e[1]], relabel[e[2]]) for e in edges)
    node_tuple = tuple(sorted(relabel.values(), key=lambda s: int(s[1:])))
    net = Network(node_tuple, edge_tuples, None, relabel[src], relabel[dst])
    if certify:
        object.__setattr__(net, "dsp_certificate", recipe)
    return net


# --- paths -----------------------------------------------------------------


@dataclass(frozen=True)
class PathSet:
    source: object
    target: object
    paths: Tuple[Tuple[str, ...], ...] = field(default_factory=tuple)

    def __len__(self):
        return len(self.paths)

    def __iter__(self):
        return iter(self.paths)


def enumerate_paths(net: Network, u, v, cap: int = DEFAULT_PATH_CAP) -> PathSet:
    """All simple directed ``u -> v`` paths in lexicographic edge-id order."""
    if u not in set(net.nodes) or v not in set(net.nodes):
        raise ValueError("terminals must be nodes of the network")
    if cap <= 0:
        raise ValueError("cap must be positive")
    out = net.out_edges()
    found: List[Tuple[str, ...]] = []

    def dfs(node, visited, trail):
        if node == v:
            found.append(tuple(trail))
            if len(found) > cap:
                raise PathExplosion(cap)
            return
        for eid, w in out[node]:
            if w in visited:
                continue
            visited.add(w)
            trail.append(eid)
            dfs(w, visited, trail)
            trail.pop()
            visited.discard(w)

    if u == v:
        return PathSet(u, v, ((),))
    dfs(u, {u}, [])
    return PathSet(u, v, tuple(sorted(found)))


def validate_flow(net: Network, types: Sequence, flows, tol: float = 1e-9) -> List[str]:
    """Check per-type conservation, sign and mass; return a list of violations.

    ``types`` are objects with ``source``, ``target`` and ``mass`` attributes;
    ``flows`` is an array of shape ``(len(types), n_edges)``.
    """
    s = np.asarray(flows, dtype=float)
    problems: List[str] = []
    if s.shape != (len(types), net.n_edges):
        return [f"flow shape {s.shape} does not match {(len(types), net.n_edges)}"]
    idx = {n: i for i, n in enumerate(net.nodes)}
    inc = np.zeros((len(net.nodes), net.n_edges))
    for j, (_, a, b) in enumerate(net.edges):
        inc[idx[a], j] += 1.0
        inc[idx[b], j] -= 1.0
    for i, t in enumerate(types):
        neg = np.flatnonzero(s[i] < -tol)
        for j in neg:
            problems.append(f"type {i}: negative flow {s[i, j]:.3g} on edge {net.edges[j][0]!r}")
        net_out = inc @ s[i]
        for n, k in idx.items():
            want = 0.0
            if t.source != t.target:
                if n == t.source:
                    want = t.mass
                elif n == t.target:
                    want = -t.mass
            if abs(net_out[k] - want) > tol:
                if n in (t.source, t.target):
                    problems.append(
                        f"type {i}: mass {abs(net_out[k]):.12g} at terminal {n!r}, expected {t.mass:.12g}"
                    )
                else:
                    problems.append(f"type {i}: conservation violated at node {n!r} ({net_out[k]:.3g})")
    return problems
