"""CSV file formats for graphs and node scores.

A dataset directory holds:

* ``nodes.csv``  — header ``node_id,domain,category,x0,...,x{d-1}``;
  ``domain`` is ``S``/``T`` (or ``-`` while unassigned), ``category`` an
  integer with ``-1`` for unknown, features as decimal floats.
* ``edges.csv``  — header ``src,dst``, one undirected edge per row.
* ``novel.csv``  — header ``node_id,is_novel`` with 0/1 flags; written only
  when ground truth is known and loaded only by the evaluator.

All floats are written with ``repr`` so a read-back is bit-exact.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .graph import AttributedGraph, Domain, GraphError

__all__ = [
    "GraphFormatError",
    "write_graph",
    "read_graph",
    "read_novel_mask",
    "write_scores",
    "read_scores",
]

NODES_FILE = "nodes.csv"
EDGES_FILE = "edges.csv"
NOVEL_FILE = "novel.csv"

_DOMAIN_TO_CHAR = {int(Domain.SOURCE): "S", int(Domain.TARGET): "T"}
_CHAR_TO_DOMAIN = {"S": int(Domain.SOURCE), "T": int(Domain.TARGET)}


class GraphFormatError(ValueError):
    """Malformed dataset file; message carries file name and line number."""


def _fail(path: Path, line: int, msg: str) -> None:
    raise GraphFormatError(f"{path.name}, line {line}: {msg}")


def write_graph(graph: AttributedGraph, out_dir: str | Path) -> None:
    """Write ``nodes.csv`` / ``edges.csv`` (and ``novel.csv`` if known)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    d = graph.feature_dim
    header = ["node_id", "domain", "category"] + [f"x{k}" for k in range(d)]
    with open(out / NODES_FILE, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for v in range(graph.num_nodes):
            dom = "-" if graph.domain is None else _DOMAIN_TO_CHAR[int(graph.domain[v])]
            cat = -1 if graph.category is None else int(graph.category[v])
            w.writerow([v, dom, cat] + [repr(float(x)) for x in graph.features[v]])
    with open(out / EDGES_FILE, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["src", "dst"])
        for i, j in graph.edges:
            w.writerow([int(i), int(j)])
    if graph.novel_mask is not None:
        with open(out / NOVEL_FILE, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["node_id", "is_novel"])
            for v in range(graph.num_nodes):
                w.writerow([v, int(graph.novel_mask[v])])


def read_graph(data_dir: str | Path) -> AttributedGraph:
    """Load a dataset directory. ``novel.csv`` is deliberately not read here."""
    data = Path(data_dir)
    nodes_path = data / NODES_FILE
    edges_path = data / EDGES_FILE
    if not nodes_path.exists():
        raise GraphFormatError(f"missing {NODES_FILE} in {data}")
    if not edges_path.exists():
        raise GraphFormatError(f"missing {EDGES_FILE} in {data}")

    features: list[list[float]] = []
    domains: list[str] = []
    categories: list[int] = []
    with open(nodes_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            _fail(nodes_path, 1, "empty file")
        for col, name in enumerate(["node_id", "domain", "category"]):
            if col >= len(header) or header[col] != name:
                _fail(nodes_path, 1, f"expected column '{name}' at position {col}")
        n_feat = len(header) - 3
        if n_feat < 1:
            _fail(nodes_path, 1, "no feature columns found")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                _fail(nodes_path, lineno, f"expected {len(header)} fields, got {len(row)}")
            try:
                node_id = int(row[0])
            except ValueError:
                _fail(nodes_path, lineno, f"bad node_id {row[0]!r}")
            if node_id != lineno - 2:
                _fail(nodes_path, lineno, f"node ids must be consecutive from 0, got {node_id}")
            if row[1] not in ("S", "T", "-"):
                _fail(nodes_path, lineno, f"domain must be S, T or -, got {row[1]!r}")
            domains.append(row[1])
            try:
                categories.append(int(row[2]))
            except ValueError:
                _fail(nodes_path, lineno, f"bad category {row[2]!r}")
            try:
                features.append([float(x) for x in row[3:]])
            except ValueError:
                _fail(nodes_path, lineno, "bad feature value")

    edges: list[tuple[int, int]] = []
    with open(edges_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["src", "dst"]:
            _fail(edges_path, 1, "expected header src,dst")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 2:
                _fail(edges_path, lineno, f"expected 2 fields, got {len(row)}")
            try:
                edges.append((int(row[0]), int(row[1])))
            except ValueError:
                _fail(edges_path, lineno, f"bad edge endpoints {row!r}")

    unset = [c == "-" for c in domains]
    if any(unset) and not all(unset):
        raise GraphFormatError(f"{nodes_path.name}: domain column mixes '-' with S/T")
    domain = None if all(unset) else np.array([_CHAR_TO_DOMAIN[c] for c in domains], dtype=np.int8)
    category = np.asarray(categories, dtype=np.int64)
    if np.all(category == -1):
        category = None
    try:
        return AttributedGraph(
            features=np.asarray(features, dtype=np.float64),
            edges=np.asarray(edges, dtype=np.int64).reshape(-1, 2),
            domain=domain,
            category=category,
        )
    except GraphError as exc:
        raise GraphFormatError(f"{data}: {exc}") from exc


def read_novel_mask(data_dir: str | Path, num_nodes: int) -> np.ndarray:
    """Load ``novel.csv``; evaluator-only ground truth."""
    path = Path(data_dir) / NOVEL_FILE
    if not path.exists():
        raise GraphFormatError(f"missing {NOVEL_FILE} in {data_dir}")
    mask = np.zeros(num_nodes, dtype=bool)
    seen = np.zeros(num_nodes, dtype=bool)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["node_id", "is_novel"]:
            _fail(path, 1, "expected header node_id,is_novel")
        for lineno, row in enumerate(reader, start=2):
            try:
                v = int(row[0])
                flag = int(row[1])
            except (ValueError, IndexError):
                _fail(path, lineno, f"bad row {row!r}")
            if not 0 <= v < num_nodes:
                _fail(path, lineno, f"node_id {v} out of range")
            if flag not in (0, 1):
                _fail(path, lineno, f"is_novel must be 0 or 1, got {row[1]!r}")
            mask[v] = bool(flag)
            seen[v] = True
    if not seen.all():
        missing = int(np.flatnonzero(~seen)[0])
        raise GraphFormatError(f"{path.name}: no entry for node {missing}")
    return mask


def write_scores(path: str | Path, scores: np.ndarray) -> None:
    """Write per-node scores as ``node_id,score`` rows."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node_id", "score"])
        for v, s in enumerate(np.asarray(scores, dtype=np.float64).ravel()):
            w.writerow([v, repr(float(s))])


def read_scores(path: str | Path, num_nodes: int | None = None) -> np.ndarray:
    path = Path(path)
    rows: list[tuple[int, float]] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["node_id", "score"]:
            _fail(path, 1, "expected header node_id,score")
        for lineno, row in enumerate(reader, start=2):
            try:
                rows.append((int(row[0]), float(row[1])))
            except (ValueError, IndexError):
                _fail(path, lineno, f"bad row {row!r}")
    n = num_nodes if num_nodes is not None else len(rows)
    scores = np.full(n, np.nan)
    for v, s in rows:
        if not 0 <= v < n:
            raise GraphFormatError(f"{path.name}: node_id {v} out of range")
        scores[v] = s
    if np.any(np.isnan(scores)):
        missing = int(np.flatnonzero(np.isnan(scores))[0])
        raise GraphFormatError(f"{path.name}: no score for node {missing}")
    return scores
