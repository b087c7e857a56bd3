"""Immutable attributed-graph container and structural primitives.

Nodes carry dense feature vectors, an optional source/target domain label,
an optional category label (simulation/evaluation only) and an optional
novelty mask (evaluation only). Edges are undirected, stored once in
canonical ``(min, max)`` order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, IntEnum

import numpy as np
import scipy.sparse as sp

__all__ = [
    "Domain",
    "PairClass",
    "GraphError",
    "AttributedGraph",
    "normalized_adjacency",
    "classify_complement_pair",
    "sample_complement_edges",
    "multi_source_bfs",
    "UNREACHABLE",
]

# Unreachable BFS distance: sorts above every finite hop count.
UNREACHABLE = np.inf


class Domain(IntEnum):
    SOURCE = 0
    TARGET = 1


class PairClass(Enum):
    """Class of an unordered node pair relative to the edge complement."""

    SS = "SS"
    ST = "ST"
    TT = "TT"
    NOT_COMPLEMENT = "NotComplement"


class GraphError(ValueError):
    """Raised for structurally invalid graphs or malformed graph queries."""


def _canonicalize_edges(edges: np.ndarray, num_nodes: int) -> np.ndarray:
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if edges.size == 0:
        return edges.reshape(0, 2)
    if edges.min() < 0 or edges.max() >= num_nodes:
        raise GraphError("edge endpoint out of range")
    if np.any(edges[:, 0] == edges[:, 1]):
        raise GraphError("self-loops are not allowed")
    lo = np.minimum(edges[:, 0], edges[:, 1])
    hi = np.maximum(edges[:, 0], edges[:, 1])
    order = np.lexsort((hi, lo))
    canon = np.stack([lo[order], hi[order]], axis=1)
    if np.any((np.diff(canon[:, 0]) == 0) & (np.diff(canon[:, 1]) == 0)):
        raise GraphError("duplicate edges are not allowed")
    return canon


@dataclass(frozen=True)
class AttributedGraph:
    """Attributed graph with optional domain/category/novelty annotations.

    Parameters
    ----------
    features : (N, d) float array
        Per-node feature vectors; must be finite.
    edges : (m, 2) int array
        Undirected edges. Any orientation/order is accepted and normalized
        to canonical ``i < j`` lexicographic form. Self-loops and duplicate
        pairs are rejected.
    domain : (N,) int array or None
        ``Domain.SOURCE`` / ``Domain.TARGET`` per node; ``None`` while a
        generated graph has not been split into domains yet.
    category : (N,) int array or None
        Category labels, ``-1`` for unknown. Hidden from trainers.
    novel_mask : (N,) bool array or None
        Ground-truth novelty flags. Evaluation only; every flagged node
        must live in the target domain.
    """

    features: np.ndarray
    edges: np.ndarray
    domain: np.ndarray | None = None
    category: np.ndarray | None = None
    novel_mask: np.ndarray | None = None
    # sorted codes i * N + j for O(log m) membership tests
    _edge_codes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        feats = np.ascontiguousarray(self.features, dtype=np.float64)
        if feats.ndim != 2:
            raise GraphError("features must be a 2-D (N, d) array")
        if not np.all(np.isfinite(feats)):
            raise GraphError("features contain NaN or Inf")
        n = feats.shape[0]
        edges = _canonicalize_edges(self.edges, n)

        domain = self.domain
        if domain is not None:
            domain = np.asarray(domain, dtype=np.int8)
            if domain.shape != (n,):
                raise GraphError("domain must have one entry per node")
            if not np.all(np.isin(domain, (int(Domain.SOURCE), int(Domain.TARGET)))):
                raise GraphError("domain entries must be SOURCE or TARGET")

        category = self.category
        if category is not None:
            category = np.asarray(category, dtype=np.int64)
            if category.shape != (n,):
                raise GraphError("category must have one entry per node")
            if category.min(initial=0) < -1:
                raise GraphError("category labels must be >= -1")

        novel = self.novel_mask
        if novel is not None:
            novel = np.asarray(novel, dtype=bool)
            if novel.shape != (n,):
                raise GraphError("novel_mask must have one entry per node")
            if domain is None:
                raise GraphError("novel_mask requires domain labels")
            if np.any(novel & (domain != int(Domain.TARGET))):
                raise GraphError("novel nodes must belong to the target domain")

        for name, value in (
            ("features", feats),
            ("edges", edges),
            ("domain", domain),
            ("category", category),
            ("novel_mask", novel),
        ):
            if value is not None:
                value.flags.writeable = False
            object.__setattr__(self, name, value)
        codes = edges[:, 0] * n + edges[:, 1]
        codes.flags.writeable = False
        object.__setattr__(self, "_edge_codes", codes)

    @property
    def num_nodes(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def num_edges(self) -> int:
        return self.edges.shape[0]

    def require_domain(self) -> np.ndarray:
        if self.domain is None:
            raise GraphError("graph has no domain labels assigned")
        return self.domain

    def source_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.require_domain() == int(Domain.SOURCE))

    def target_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.require_domain() == int(Domain.TARGET))

    def has_edge(self, i: int, j: int) -> bool:
        if i == j:
            return False
        lo, hi = (i, j) if i < j else (j, i)
        code = lo * self.num_nodes + hi
        pos = np.searchsorted(self._edge_codes, code)
        return pos < self._edge_codes.size and self._edge_codes[pos] == code

    def has_edges(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        """Vectorized edge membership for canonical (lo < hi) index arrays."""
        codes = lo.astype(np.int64) * self.num_nodes + hi.astype(np.int64)
        pos = np.searchsorted(self._edge_codes, codes)
        pos = np.minimum(pos, max(self._edge_codes.size - 1, 0))
        if self._edge_codes.size == 0:
            return np.zeros(codes.shape, dtype=bool)
        return self._edge_codes[pos] == codes

    def replace(self, **updates) -> "AttributedGraph":
        """Return a copy with the given annotation fields replaced."""
        fields = {
            "features": self.features,
            "edges": self.edges,
            "domain": self.domain,
            "category": self.category,
            "novel_mask": self.novel_mask,
        }
        fields.update(updates)
        return AttributedGraph(**fields)


def normalized_adjacency(graph: AttributedGraph) -> sp.csr_matrix:
    """Symmetric normalized message-passing operator with self-loops.

    Returns the sparse matrix ``D^{-1/2} (A + I) D^{-1/2}`` where ``D`` is
    the degree matrix of ``A + I``. Row ``i`` is nonzero exactly on
    ``{i} | neighbors(i)``; an isolated node keeps a unit self-loop entry.
    """
    n = graph.num_nodes
    e = graph.edges
    rows = np.concatenate([e[:, 0], e[:, 1], np.arange(n)])
    cols = np.concatenate([e[:, 1], e[:, 0], np.arange(n)])
    data = np.ones(rows.shape[0], dtype=np.float64)
    a_loop = sp.coo_matrix((data, (rows, cols)), shape=(n, n))
    deg = np.asarray(a_loop.sum(axis=1)).ravel()
    inv_sqrt = 1.0 / np.sqrt(deg)
    scaled = a_loop.data * inv_sqrt[a_loop.row] * inv_sqrt[a_loop.col]
    return sp.csr_matrix((scaled, (a_loop.row, a_loop.col)), shape=(n, n))


def classify_complement_pair(graph: AttributedGraph, i: int, j: int) -> PairClass:
    """Classify an unordered node pair as SS/ST/TT complement or an edge."""
    if i == j:
        raise GraphError("pair endpoints must be distinct")
    n = graph.num_nodes
    if not (0 <= i < n and 0 <= j < n):
        raise GraphError("pair endpoint out of range")
    if graph.has_edge(i, j):
        return PairClass.NOT_COMPLEMENT
    domain = graph.require_domain()
    n_source = int(domain[i] == int(Domain.SOURCE)) + int(domain[j] == int(Domain.SOURCE))
    if n_source == 2:
        return PairClass.SS
    if n_source == 1:
        return PairClass.ST
    return PairClass.TT


def sample_complement_edges(
    graph: AttributedGraph,
    candidate_nodes: np.ndarray,
    count: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, bool]:
    """Uniformly sample non-edges among ``candidate_nodes`` by rejection.

    Draws ``count`` unordered pairs with replacement across draws, each
    uniform over the complement edges restricted to the candidate set
    (self-pairs and existing edges rejected). The complement is never
    materialized; rejection keeps the cost independent of its O(N^2) size.

    Returns
    -------
    pairs : (k, 2) int array
        Sampled canonical pairs; ``k == count`` unless the complement is
        empty, in which case the array is empty.
    complement_empty : bool
        True iff the candidate subgraph is complete (no pair to sample).
    """
    cand = np.unique(np.asarray(candidate_nodes, dtype=np.int64))
    if cand.size < 2:
        raise GraphError("need at least two candidate nodes")
    if cand.min() < 0 or cand.max() >= graph.num_nodes:
        raise GraphError("candidate node out of range")
    k = cand.size
    total_pairs = k * (k - 1) // 2
    in_cand = np.zeros(graph.num_nodes, dtype=bool)
    in_cand[cand] = True
    internal = int(np.sum(in_cand[graph.edges[:, 0]] & in_cand[graph.edges[:, 1]]))
    if internal >= total_pairs:
        return np.empty((0, 2), dtype=np.int64), True
    if count <= 0:
        return np.empty((0, 2), dtype=np.int64), False

    out = np.empty((count, 2), dtype=np.int64)
    have = 0
    while have < count:
        m = max(16, int((count - have) * 1.5))
        ii = cand[rng.integers(0, k, size=m)]
        jj = cand[rng.integers(0, k, size=m)]
        lo = np.minimum(ii, jj)
        hi = np.maximum(ii, jj)
        ok = lo != hi
        ok &= ~graph.has_edges(lo, hi)
        take = min(int(ok.sum()), count - have)
        if take:
            idx = np.flatnonzero(ok)[:take]
            out[have : have + take, 0] = lo[idx]
            out[have : have + take, 1] = hi[idx]
            have += take
    return out, False


def _neighbor_lists(graph: AttributedGraph) -> tuple[np.ndarray, np.ndarray]:
    """CSR-style (indptr, indices) over both edge directions."""
    n = graph.num_nodes
    e = graph.edges
    src = np.concatenate([e[:, 0], e[:, 1]])
    dst = np.concatenate([e[:, 1], e[:, 0]])
    order = np.argsort(src, kind="stable")
    indices = dst[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    np.cumsum(indptr, out=indptr)
    return indptr, indices


def multi_source_bfs(graph: AttributedGraph, sources: np.ndarray) -> np.ndarray:
    """Unweighted hop distance from each node to its nearest source.

    Returns a float array; unreachable nodes get ``UNREACHABLE`` (+inf),
    which deliberately sorts above every finite distance.
    """
    sources = np.unique(np.asarray(sources, dtype=np.int64))
    if sources.size == 0:
        raise GraphError("sources must be nonempty")
    if sources.min() < 0 or sources.max() >= graph.num_nodes:
        raise GraphError("source node out of range")
    indptr, indices = _neighbor_lists(graph)
    dist = np.full(graph.num_nodes, UNREACHABLE, dtype=np.float64)
    dist[sources] = 0.0
    frontier = sources
    level = 0.0
    while frontier.size:
        spans = [indices[indptr[v] : indptr[v + 1]] for v in frontier]
        if not spans:
            break
        nbrs = np.unique(np.concatenate(spans)) if spans else np.empty(0, np.int64)
        fresh = nbrs[np.isinf(dist[nbrs])]
        level += 1.0
        dist[fresh] = level
        frontier = fresh
    return dist
