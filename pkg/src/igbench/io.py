"""Text-file graph formats and bundle directories.

Edge file: ``u<TAB>v`` per line. Label file: ``node<TAB>label``. Feature
file: ``node<TAB>dim<TAB>value`` sparse triplets. Lines starting with ``#``
and blank lines are ignored. A bundle directory holds ``edges.tsv``,
``labels.tsv``, optional ``features.tsv`` and ``meta.json``.
"""
from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .graph import Graph, GraphIntegrityError

log = logging.getLogger(__name__)

__all__ = ["GraphFormatError", "load_graph", "write_graph", "load_bundle", "write_json"]


class GraphFormatError(ValueError):
    def __init__(self, path: Path | str, lineno: int, msg: str) -> None:
        super().__init__(f"{path}:{lineno}: {msg}")
        self.path = str(path)
        self.lineno = lineno


def _rows(path: Path, width: int):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != width:
                raise GraphFormatError(path, lineno, f"expected {width} tab-separated fields, got {len(parts)}")
            yield lineno, parts


def _int(path: Path, lineno: int, s: str) -> int:
    try:
        return int(s)
    except ValueError:
        raise GraphFormatError(path, lineno, f"not an integer: {s!r}") from None


def load_graph(
    edge_path: str | Path,
    label_path: str | Path,
    feature_path: str | Path | None = None,
    *,
    feature_dim: int | None = None,
    name: str | None = None,
) -> Graph:
    """Read a graph from edge/label/feature text files.

    Node ids are remapped to ``0..n-1`` in ascending original-id order and
    labels are densified to ``0..k-1`` in ascending original-label order.
    Self-loops and duplicate edges are dropped; the counts land in
    ``graph.meta`` and the log.
    """
    edge_path, label_path = Path(edge_path), Path(label_path)

    raw_labels: dict[int, int] = {}
    for lineno, (node, lab) in _rows(label_path, 2):
        node_id = _int(label_path, lineno, node)
        if node_id in raw_labels:
            raise GraphIntegrityError(f"{label_path}:{lineno}: node {node_id} labelled twice")
        raw_labels[node_id] = _int(label_path, lineno, lab)

    ids = np.array(sorted(raw_labels), dtype=np.int64)
    index = {int(v): i for i, v in enumerate(ids)}
    lab_values = np.array([raw_labels[int(v)] for v in ids], dtype=np.int64)
    _, labels = np.unique(lab_values, return_inverse=True)

    pairs = []
    for lineno, (u, v) in _rows(edge_path, 2):
        u_id, v_id = _int(edge_path, lineno, u), _int(edge_path, lineno, v)
        for x in (u_id, v_id):
            if x not in index:
                raise GraphIntegrityError(f"{edge_path}:{lineno}: edge endpoint {x} has no label")
        pairs.append((index[u_id], index[v_id]))

    n = ids.size
    rows, cols, vals = [], [], []
    if feature_path is not None and Path(feature_path).exists():
        feature_path = Path(feature_path)
        for lineno, (node, dim, value) in _rows(feature_path, 3):
            node_id = _int(feature_path, lineno, node)
            if node_id not in index:
                raise GraphIntegrityError(f"{feature_path}:{lineno}: features for unknown node {node_id}")
            try:
                val = float(value)
            except ValueError:
                raise GraphFormatError(feature_path, lineno, f"not a number: {value!r}") from None
            rows.append(index[node_id])
            cols.append(_int(feature_path, lineno, dim))
            vals.append(val)
    d = feature_dim if feature_dim is not None else (max(cols) + 1 if cols else 0)
    if cols and max(cols) >= d:
        raise GraphIntegrityError(f"feature dim {max(cols)} exceeds declared dimension {d}")
    features = sp.csr_matrix((vals, (rows, cols)), shape=(n, d), dtype=np.float64)

    g = Graph.from_edges(
        n,
        np.array(pairs, dtype=np.int64).reshape(-1, 2),
        labels,
        features,
        name=name or edge_path.parent.name or "graph",
        original_ids=ids,
    )
    if g.meta["dropped_duplicates"] or g.meta["dropped_self_loops"]:
        log.info(
            "%s: dropped %d duplicate edge(s) and %d self-loop(s)",
            edge_path,
            g.meta["dropped_duplicates"],
            g.meta["dropped_self_loops"],
        )
    return g


def write_json(path: str | Path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_graph(g: Graph, directory: str | Path, name: str | None = None) -> Path:
    """Write ``g`` as a bundle using its dense node ids."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "edges.tsv", "w", encoding="utf-8") as fh:
        for u, v in g.edges():
            fh.write(f"{u}\t{v}\n")
    labels = np.asarray(g.labels)
    with open(directory / "labels.tsv", "w", encoding="utf-8") as fh:
        for v, lab in enumerate(labels):
            fh.write(f"{v}\t{lab}\n")
    if g.d:
        coo = g.features.tocoo()
        order = np.lexsort((coo.col, coo.row))
        with open(directory / "features.tsv", "w", encoding="utf-8") as fh:
            for i in order:
                fh.write(f"{coo.row[i]}\t{coo.col[i]}\t{float(coo.data[i])!r}\n")
    meta = {"n": g.n, "k": g.k, "d": g.d, "name": name or g.name}
    if g.original_ids is not None:
        meta["original_ids"] = [int(x) for x in g.original_ids]
    write_json(directory / "meta.json", meta)
    return directory


def load_bundle(directory: str | Path) -> Graph:
    directory = Path(directory)
    meta_path = directory / "meta.json"
    meta = json.loads(meta_path.read_text(encoding="utf-8")) if meta_path.exists() else {}
    g = load_graph(
        directory / "edges.tsv",
        directory / "labels.tsv",
        directory / "features.tsv",
        feature_dim=meta.get("d"),
        name=meta.get("name", directory.name),
    )
    if "n" in meta and meta["n"] != g.n:
        raise GraphIntegrityError(f"{meta_path}: declares n={meta['n']} but files hold {g.n} nodes")
    if "original_ids" in meta:
        object.__setattr__(g, "original_ids", np.asarray(meta["original_ids"], dtype=np.int64))
    return g
