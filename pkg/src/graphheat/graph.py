"""Weighted locally finite graphs, vertex functions, domains and hop metrics.

Vertices are opaque strings. At build time every vertex receives a dense
index (lexicographic order) so that functions can be held as numpy arrays
and the difference operators become sparse aggregations over directed edges.
"""
from __future__ import annotations

import math
from collections import deque
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import (
    DisconnectedGraph,
    DuplicateEdge,
    IsolatedVertex,
    MissingValue,
    NegativeWeight,
    SelfLoop,
    UnknownVertex,
)

__all__ = [
    "WeightedGraph",
    "VertexFunction",
    "Domain",
    "RootedMetric",
    "build_graph",
    "rooted_metric",
    "ball",
    "whole",
]


class WeightedGraph:
    """Immutable symmetric weighted graph without loops or multiple edges.

    Use :func:`build_graph` to construct one from edge records; the
    constructor trusts its (already canonical) input.

    Attributes
    ----------
    vertices : tuple of str
        Vertex identifiers in lexicographic order; position is the dense index.
    edges : tuple of (str, str, float)
        One record per edge, ``u < v``, sorted.
    degree : ndarray, shape (n,)
        ``d_x``, the sum of the weights of the edges at ``x``.
    """

    def __init__(self, vertices: tuple[str, ...], edges: tuple[tuple[str, str, float], ...]):
        self.vertices = vertices
        self.edges = edges
        self.index = {v: i for i, v in enumerate(vertices)}
        degree = np.zeros(len(vertices))
        for u, v, w in edges:
            degree[self.index[u]] += w
            degree[self.index[v]] += w
        degree.setflags(write=False)
        self.degree = degree

    def __repr__(self):
        return f"WeightedGraph(n={self.n}, edges={len(self.edges)})"

    def __eq__(self, other):
        if not isinstance(other, WeightedGraph):
            return NotImplemented
        return self.vertices == other.vertices and self.edges == other.edges

    def __hash__(self):
        return hash((self.vertices, self.edges))

    @property
    def n(self) -> int:
        return len(self.vertices)

    def __len__(self):
        return len(self.vertices)

    def __contains__(self, v):
        return v in self.index

    def index_of(self, v: str) -> int:
        try:
            return self.index[v]
        except KeyError:
            raise UnknownVertex(f"unknown vertex {v!r}") from None

    def degree_of(self, v: str) -> float:
        return float(self.degree[self.index_of(v)])

    def neighbors(self, v: str) -> tuple[str, ...]:
        """Vertices joined to ``v`` by an edge of positive weight."""
        i = self.index_of(v)
        return tuple(self.vertices[j] for j in self._nbr_idx[i])

    def weight(self, u: str, v: str) -> float:
        i, j = self.index_of(u), self.index_of(v)
        return float(self.adjacency[i, j])

    def scaled(self, c: float) -> WeightedGraph:
        """The same graph with every weight multiplied by ``c > 0``."""
        return build_graph((u, v, c * w) for u, v, w in self.edges)

    # -- array machinery ----------------------------------------------------

    @cached_property
    def _directed(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        src, dst, mu = [], [], []
        for u, v, w in self.edges:
            if w <= 0:
                continue
            i, j = self.index[u], self.index[v]
            src += [i, j]
            dst += [j, i]
            mu += [w, w]
        order = np.lexsort((np.asarray(dst, dtype=np.intp), np.asarray(src, dtype=np.intp)))
        src = np.asarray(src, dtype=np.intp)[order]
        dst = np.asarray(dst, dtype=np.intp)[order]
        mu = np.asarray(mu, dtype=float)[order]
        return src, dst, mu

    @property
    def edge_src(self) -> np.ndarray:
        return self._directed[0]

    @property
    def edge_dst(self) -> np.ndarray:
        return self._directed[1]

    @property
    def edge_mu(self) -> np.ndarray:
        return self._directed[2]

    @cached_property
    def source_sum(self) -> sp.csr_matrix:
        """Sparse (n, n_directed) matrix summing directed-edge values at their source."""
        src = self.edge_src
        m = len(src)
        return sp.csr_matrix((np.ones(m), (src, np.arange(m))), shape=(self.n, m))

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.edge_mu, (self.edge_src, self.edge_dst)), shape=(self.n, self.n))

    @cached_property
    def _nbr_idx(self) -> list[np.ndarray]:
        starts = np.searchsorted(self.edge_src, np.arange(self.n + 1))
        return [self.edge_dst[starts[i]:starts[i + 1]] for i in range(self.n)]

    @cached_property
    def _nbr_mu(self) -> list[np.ndarray]:
        starts = np.searchsorted(self.edge_src, np.arange(self.n + 1))
        return [self.edge_mu[starts[i]:starts[i + 1]] for i in range(self.n)]

    @cached_property
    def two_chains(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """All walks ``x ~ y ~ z`` (``z = x`` allowed) with weight ``mu_xy mu_yz / d_y``."""
        xs, ys, zs, ws = [], [], [], []
        nbr = self._nbr_idx
        for x, y, mu_xy in zip(self.edge_src, self.edge_dst, self.edge_mu):
            zz = nbr[y]
            mu_yz = self._nbr_mu[y]
            xs.append(np.full(len(zz), x))
            ys.append(np.full(len(zz), y))
            zs.append(zz)
            ws.append(mu_xy * mu_yz / self.degree[y])
        if not xs:
            empty = np.zeros(0, dtype=np.intp)
            return empty, empty, empty, np.zeros(0)
        return (np.concatenate(xs).astype(np.intp), np.concatenate(ys).astype(np.intp),
                np.concatenate(zs).astype(np.intp), np.concatenate(ws))

    @cached_property
    def chain_sum(self) -> sp.csr_matrix:
        x = self.two_chains[0]
        return sp.csr_matrix((np.ones(len(x)), (x, np.arange(len(x)))), shape=(self.n, len(x)))

    # -- hop metric ---------------------------------------------------------

    def hop_distances(self, x0: str) -> np.ndarray:
        """Breadth-first hop distance from ``x0``; ``-1`` marks unreachable vertices."""
        start = self.index_of(x0)
        dist = np.full(self.n, -1, dtype=np.int64)
        dist[start] = 0
        queue = deque([start])
        nbr = self._nbr_idx
        while queue:
            i = queue.popleft()
            for j in nbr[i]:
                if dist[j] < 0:
                    dist[j] = dist[i] + 1
                    queue.append(j)
        return dist

    def ball_indices(self, x0: str, radius: int) -> np.ndarray:
        dist = self.hop_distances(x0)
        return np.flatnonzero((dist >= 0) & (dist <= radius))

    def is_connected(self) -> bool:
        return self.n == 0 or bool(np.all(self.hop_distances(self.vertices[0]) >= 0))


def build_graph(edge_records: Iterable[tuple[str, str, float]]) -> WeightedGraph:
    """Validate edge records ``(u, v, mu)`` and build a :class:`WeightedGraph`.

    Raises
    ------
    SelfLoop, DuplicateEdge, NegativeWeight
        On malformed records (a pair repeated in either order is a duplicate).
    IsolatedVertex
        If some vertex ends up with ``d_x = 0`` (all of its edges have zero weight).
    """
    seen = {}
    for rec in edge_records:
        u, v, w = rec
        u, v, w = str(u), str(v), float(w)
        if u == v:
            raise SelfLoop(f"self-loop at vertex {u!r}")
        if not math.isfinite(w) or w < 0:
            raise NegativeWeight(f"edge {u!r}-{v!r} has invalid weight {w!r}")
        key = (u, v) if u < v else (v, u)
        if key in seen:
            raise DuplicateEdge(f"edge {key[0]!r}-{key[1]!r} given more than once")
        seen[key] = w

    edges = tuple(sorted((u, v, w) for (u, v), w in seen.items()))
    vertices = tuple(sorted({u for u, _, _ in edges} | {v for _, v, _ in edges}))
    g = WeightedGraph(vertices, edges)
    isolated = [v for v, d in zip(vertices, g.degree) if d <= 0]
    if isolated:
        raise IsolatedVertex(f"vertices with zero total weight: {', '.join(isolated)}")
    return g


class VertexFunction(Mapping):
    """Finite, immutable association vertex -> real value.

    The support is the set of keys. Values must be finite.
    """

    __slots__ = ("_values",)

    def __init__(self, values: Mapping[str, float] | Iterable[tuple[str, float]] = ()):
        items = values.items() if isinstance(values, Mapping) else values
        data = {}
        for k, val in items:
            val = float(val)
            if not math.isfinite(val):
                raise ValueError(f"non-finite value {val!r} at vertex {k!r}")
            data[str(k)] = val
        self._values = dict(sorted(data.items()))

    @classmethod
    def from_array(cls, graph: WeightedGraph, values, support: Iterable[str] | None = None) -> VertexFunction:
        """Wrap a graph-indexed array; restrict to ``support`` when given."""
        values = np.asarray(values, dtype=float)
        if support is None:
            return cls(zip(graph.vertices, values.tolist()))
        return cls((v, values[graph.index_of(v)]) for v in support)

    @classmethod
    def constant(cls, vertices: Iterable[str], c: float) -> VertexFunction:
        return cls((v, c) for v in vertices)

    def __getitem__(self, k):
        return self._values[k]

    def __iter__(self) -> Iterator[str]:
        return iter(self._values)

    def __len__(self):
        return len(self._values)

    def __repr__(self):
        return f"VertexFunction({self._values!r})"

    @property
    def support(self) -> frozenset[str]:
        return frozenset(self._values)

    def on(self, graph: WeightedGraph) -> np.ndarray:
        """Graph-indexed array with ``nan`` where the function is undefined."""
        out = np.full(graph.n, np.nan)
        for k, val in self._values.items():
            out[graph.index_of(k)] = val
        return out

    def restrict(self, vertices: Iterable[str]) -> VertexFunction:
        try:
            return VertexFunction((v, self._values[v]) for v in vertices)
        except KeyError as exc:
            raise MissingValue(f"no value at vertex {exc.args[0]!r}") from None

    def max(self) -> float:
        return max(self._values.values())

    def min(self) -> float:
        return min(self._values.values())


@dataclass(frozen=True)
class Domain:
    """Interior vertex set with its exterior vertex boundary.

    Build via :meth:`of`, :func:`ball` or :func:`whole`; the boundary is
    always computed, never supplied.
    """

    interior: frozenset
    boundary: frozenset

    @classmethod
    def of(cls, graph: WeightedGraph, interior: Iterable[str]) -> Domain:
        inner = frozenset(interior)
        for v in inner:
            graph.index_of(v)
        boundary = {u for v in inner for u in graph.neighbors(v)} - inner
        return cls(inner, frozenset(boundary))

    @property
    def closure(self) -> frozenset:
        return self.interior | self.boundary

    @property
    def is_closed(self) -> bool:
        """True when the boundary is empty."""
        return not self.boundary

    def interior_mask(self, graph: WeightedGraph) -> np.ndarray:
        mask = np.zeros(graph.n, dtype=bool)
        mask[[graph.index_of(v) for v in self.interior]] = True
        return mask

    def closure_mask(self, graph: WeightedGraph) -> np.ndarray:
        mask = np.zeros(graph.n, dtype=bool)
        mask[[graph.index_of(v) for v in self.closure]] = True
        return mask

    def lift(self, graph: WeightedGraph, f: Mapping[str, float]) -> np.ndarray:
        """Graph-indexed copy of ``f`` on the closure, zero elsewhere."""
        out = np.zeros(graph.n)
        for v in self.closure:
            try:
                out[graph.index_of(v)] = f[v]
            except KeyError:
                raise MissingValue(f"no value at closure vertex {v!r}") from None
        return out


def whole(graph: WeightedGraph) -> Domain:
    return Domain.of(graph, graph.vertices)


def ball(graph: WeightedGraph, x0: str, radius: int) -> Domain:
    """Domain whose interior is the hop ball ``{x : r(x) <= radius}``."""
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    idx = graph.ball_indices(x0, radius)
    return Domain.of(graph, (graph.vertices[i] for i in idx))


@dataclass(frozen=True)
class RootedMetric:
    """Hop distance to a root with the level weights ``d_+``, ``d_-`` and mean curvature ``H``."""

    root: str
    r: VertexFunction
    d_plus: VertexFunction
    d_minus: VertexFunction
    H: VertexFunction


def rooted_metric(graph: WeightedGraph, x0: str) -> RootedMetric:
    dist = graph.hop_distances(x0)
    if np.any(dist < 0):
        raise DisconnectedGraph("graph is not connected")
    src, dst, mu = graph.edge_src, graph.edge_dst, graph.edge_mu
    step = dist[dst] - dist[src]
    d_plus = np.bincount(src, weights=mu * (step == 1), minlength=graph.n)
    d_minus = np.bincount(src, weights=mu * (step == -1), minlength=graph.n)
    H = (d_plus - d_minus) / graph.degree
    return RootedMetric(
        root=x0,
        r=VertexFunction.from_array(graph, dist.astype(float)),
        d_plus=VertexFunction.from_array(graph, d_plus),
        d_minus=VertexFunction.from_array(graph, d_minus),
        H=VertexFunction.from_array(graph, H),
    )
