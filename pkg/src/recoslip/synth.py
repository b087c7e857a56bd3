"""Synthetic homophilous attributed graphs with controllable domain shift.

Node features are drawn from per-category isotropic Gaussians; edges follow
a planted-partition model with separate within/across-category probabilities
(homophily requires ``p_inter < p_intra``). A shift specification then
assigns each node to the source or target domain with per-category ratios,
which is what induces subpopulation shift between the two domains.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .graph import AttributedGraph, Domain, GraphError

__all__ = [
    "CategorySpec",
    "GraphGenSpec",
    "ShiftSpec",
    "SplitMode",
    "ScarReport",
    "generate_graph",
    "apply_shift_split",
    "scar_violation_report",
]


@dataclass(frozen=True)
class CategorySpec:
    """One mixture component: Gaussian feature cloud of ``count`` nodes."""

    mean: tuple[float, ...]
    std: float
    count: int

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ValueError("category count must be >= 1")
        if not self.std > 0:
            raise ValueError("category std must be positive")


@dataclass(frozen=True)
class GraphGenSpec:
    categories: tuple[CategorySpec, ...]
    p_intra: float
    p_inter: float
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.categories:
            raise ValueError("need at least one category")
        dims = {len(c.mean) for c in self.categories}
        if len(dims) != 1:
            raise ValueError("all category means must share one dimension")
        if not (0.0 <= self.p_inter < self.p_intra <= 1.0):
            raise ValueError("homophily requires 0 <= p_inter < p_intra <= 1")

    @property
    def feature_dim(self) -> int:
        return len(self.categories[0].mean)

    @property
    def num_nodes(self) -> int:
        return sum(c.count for c in self.categories)


class SplitMode(Enum):
    EXACT_COUNT = "exact"
    BERNOULLI = "bernoulli"


@dataclass(frozen=True)
class ShiftSpec:
    """Per-category probability of landing in the source domain.

    The novel category (by convention the last one unless given explicitly)
    must have ratio 0: novel nodes exist only in the target domain.
    """

    source_ratio: tuple[float, ...]
    novel_category: int | None = None

    def resolved_novel(self) -> int:
        idx = len(self.source_ratio) - 1 if self.novel_category is None else self.novel_category
        if not 0 <= idx < len(self.source_ratio):
            raise ValueError("novel_category index out of range")
        return idx

    def __post_init__(self) -> None:
        if any(not (0.0 <= r <= 1.0) for r in self.source_ratio):
            raise ValueError("source ratios must lie in [0, 1]")
        if self.source_ratio[self.resolved_novel()] != 0.0:
            raise ValueError("the novel category's source ratio must be 0")


def generate_graph(spec: GraphGenSpec) -> AttributedGraph:
    """Draw features per category and plant edges block by block.

    Nodes are grouped by category in spec order. Domain labels are left
    unassigned; apply :func:`apply_shift_split` afterwards.
    """
    rng = np.random.default_rng(spec.seed)
    d = spec.feature_dim
    feats = []
    cats = []
    for c_idx, cat in enumerate(spec.categories):
        mean = np.asarray(cat.mean, dtype=np.float64)
        feats.append(rng.normal(0.0, 1.0, size=(cat.count, d)) * cat.std + mean)
        cats.append(np.full(cat.count, c_idx, dtype=np.int64))
    features = np.concatenate(feats, axis=0)
    category = np.concatenate(cats)

    offsets = np.cumsum([0] + [c.count for c in spec.categories])
    blocks = []
    k = len(spec.categories)
    for a in range(k):
        ia = np.arange(offsets[a], offsets[a + 1])
        # within-category pairs: upper triangle of the diagonal block
        u = rng.random((ia.size, ia.size))
        mask = np.triu(u < spec.p_intra, k=1)
        ri, ci = np.nonzero(mask)
        blocks.append(np.stack([ia[ri], ia[ci]], axis=1))
        for b in range(a + 1, k):
            ib = np.arange(offsets[b], offsets[b + 1])
            u = rng.random((ia.size, ib.size))
            ri, ci = np.nonzero(u < spec.p_inter)
            blocks.append(np.stack([ia[ri], ib[ci]], axis=1))
    edges = np.concatenate(blocks, axis=0) if blocks else np.empty((0, 2), dtype=np.int64)
    return AttributedGraph(features=features, edges=edges, category=category)


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def apply_shift_split(
    graph: AttributedGraph,
    shift: ShiftSpec,
    mode: SplitMode = SplitMode.EXACT_COUNT,
    rng: np.random.Generator | None = None,
) -> AttributedGraph:
    """Assign source/target domains per category and set the novelty mask.

    ``EXACT_COUNT`` puts exactly ``round(ratio * n_c)`` nodes of category
    ``c`` into the source domain (rounding half up); ``BERNOULLI`` flips a
    coin per node. Novel-category nodes always land in the target domain.
    """
    if graph.category is None or np.any(graph.category < 0):
        raise GraphError("shift split requires a category label on every node")
    rng = np.random.default_rng(0) if rng is None else rng
    n_cats = int(graph.category.max()) + 1
    if len(shift.source_ratio) != n_cats:
        raise ValueError(
            f"shift spec has {len(shift.source_ratio)} ratios but graph has {n_cats} categories"
        )
    novel_cat = shift.resolved_novel()
    domain = np.full(graph.num_nodes, int(Domain.TARGET), dtype=np.int8)
    for c in range(n_cats):
        idx = np.flatnonzero(graph.category == c)
        if idx.size == 0:
            continue
        ratio = shift.source_ratio[c]
        if mode is SplitMode.EXACT_COUNT:
            n_src = _round_half_up(ratio * idx.size)
            chosen = rng.permutation(idx)[:n_src]
        else:
            chosen = idx[rng.random(idx.size) < ratio]
        domain[chosen] = int(Domain.SOURCE)
    novel_mask = graph.category == novel_cat
    return graph.replace(domain=domain, novel_mask=novel_mask)


@dataclass(frozen=True)
class ScarReport:
    """Empirical per-category source probabilities and their spread.

    A large ``max_gap`` certifies that nodes of different (non-novel)
    categories had unequal chances of being observed in the source domain,
    i.e. that the labeled-at-random assumption fails on this split.
    """

    categories: tuple[int, ...]
    counts: tuple[int, ...]
    p_source: tuple[float, ...]
    max_gap: float

    def rows(self) -> list[dict]:
        return [
            {"category": c, "n_nodes": n, "p_source": p}
            for c, n, p in zip(self.categories, self.counts, self.p_source)
        ]


def scar_violation_report(graph: AttributedGraph) -> ScarReport:
    """Tabulate P(source | category) for every non-novel category."""
    if graph.category is None:
        raise GraphError("report requires category labels")
    domain = graph.require_domain()
    n_cats = int(graph.category.max()) + 1
    cats: list[int] = []
    counts: list[int] = []
    probs: list[float] = []
    for c in range(n_cats):
        idx = np.flatnonzero(graph.category == c)
        if idx.size == 0:
            warnings.warn(f"category {c} has no nodes; omitted from SCAR report", stacklevel=2)
            continue
        if graph.novel_mask is not None and bool(graph.novel_mask[idx].all()):
            continue
        cats.append(c)
        counts.append(int(idx.size))
        probs.append(float(np.mean(domain[idx] == int(Domain.SOURCE))))
    gap = (max(probs) - min(probs)) if probs else 0.0
    return ScarReport(
        categories=tuple(cats), counts=tuple(counts), p_source=tuple(probs), max_gap=gap
    )
