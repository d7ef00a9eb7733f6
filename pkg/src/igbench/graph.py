"""Immutable undirected graph with node labels and sparse features."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any

import numpy as np
import scipy.sparse as sp

from .guard import LabelView

__all__ = [
    "Graph",
    "DiscreteDistribution",
    "GraphIntegrityError",
    "GenerationError",
    "check_invariants",
    "generate_sbm",
    "node_label_distribution",
    "edge_category_distribution",
    "label_distribution",
    "edge_distribution",
    "truncate_features",
]


class GraphIntegrityError(ValueError):
    pass


class GenerationError(ValueError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Graph:
    """Simple undirected graph in CSR form.

    Attributes
    ----------
    indptr, indices : ndarray of int64
        Symmetric adjacency; neighbours of ``u`` are
        ``indices[indptr[u]:indptr[u + 1]]``, sorted ascending.
    labels : ndarray of int64, shape (n,)
        Class id per node in ``[0, k)``. Inside model code this is a
        :class:`~igbench.guard.LabelView` instead.
    k : int
        Number of classes.
    features : scipy.sparse.csr_matrix, shape (n, d)
    name : str
    original_ids : ndarray, optional
        Node id in the source files for each dense node index.
    meta : dict
        Free-form load/generation notes (e.g. dropped edge counts).
    """

    indptr: np.ndarray
    indices: np.ndarray
    labels: Any
    k: int
    features: sp.csr_matrix
    name: str = "graph"
    original_ids: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "indptr", _frozen(np.asarray(self.indptr, dtype=np.int64)))
        object.__setattr__(self, "indices", _frozen(np.asarray(self.indices, dtype=np.int64)))
        if not isinstance(self.labels, LabelView):
            object.__setattr__(self, "labels", _frozen(np.asarray(self.labels, dtype=np.int64)))
        if self.features is None:
            object.__setattr__(self, "features", sp.csr_matrix((self.n, 0)))
        elif not sp.isspmatrix_csr(self.features):
            object.__setattr__(self, "features", sp.csr_matrix(self.features))

    @classmethod
    def from_edges(
        cls,
        n: int,
        edges,
        labels,
        features=None,
        *,
        k: int | None = None,
        name: str = "graph",
        original_ids: np.ndarray | None = None,
    ) -> Graph:
        """Build a graph, dropping self-loops and duplicate edges.

        The number of dropped entries is recorded in ``meta``.
        """
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape != (n,):
            raise GraphIntegrityError(f"expected {n} labels, got {labels.shape}")
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise GraphIntegrityError("edge endpoint out of range")
        loops = edges[:, 0] == edges[:, 1]
        n_loops = int(loops.sum())
        edges = edges[~loops]
        lo = np.minimum(edges[:, 0], edges[:, 1])
        hi = np.maximum(edges[:, 0], edges[:, 1])
        key = np.unique(lo * n + hi)
        n_dup = int(edges.shape[0] - key.size)
        lo, hi = key // n, key % n
        rows = np.concatenate([lo, hi])
        cols = np.concatenate([hi, lo])
        adj = sp.csr_matrix((np.ones(rows.size, dtype=np.int8), (rows, cols)), shape=(n, n))
        adj.sort_indices()
        if features is None:
            features = sp.csr_matrix((n, 0))
        features = sp.csr_matrix(features)
        if features.shape[0] != n:
            raise GraphIntegrityError(f"features have {features.shape[0]} rows for {n} nodes")
        g = cls(
            indptr=adj.indptr,
            indices=adj.indices,
            labels=labels,
            k=int(labels.max()) + 1 if k is None and n else int(k or 0),
            features=features,
            name=name,
            original_ids=None if original_ids is None else _frozen(np.asarray(original_ids)),
            meta={"dropped_self_loops": n_loops, "dropped_duplicates": n_dup},
        )
        check_invariants(g, full=False)
        return g

    @property
    def n(self) -> int:
        return self.indptr.shape[0] - 1

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def num_edges(self) -> int:
        return self.indices.shape[0] // 2

    @cached_property
    def degree(self) -> np.ndarray:
        return _frozen(np.diff(self.indptr))

    def neighbors(self, u: int) -> np.ndarray:
        return self.indices[self.indptr[u] : self.indptr[u + 1]]

    def edges(self) -> np.ndarray:
        """Undirected edges as an ``(m, 2)`` array with ``u < v``, sorted."""
        src = np.repeat(np.arange(self.n, dtype=np.int64), self.degree)
        keep = src < self.indices
        return np.stack([src[keep], self.indices[keep]], axis=1)

    def adjacency(self) -> sp.csr_matrix:
        data = np.ones(self.indices.shape[0], dtype=np.float64)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    def with_label_view(self, allowed: np.ndarray | None) -> Graph:
        """Copy of this graph whose labels are readable only at ``allowed``."""
        raw = self.labels._labels if isinstance(self.labels, LabelView) else self.labels
        return dataclasses.replace(self, labels=LabelView(raw, allowed), meta=dict(self.meta))

    def same_as(self, other: Graph) -> bool:
        """Structural equality: adjacency, labels, k and features."""
        if self.n != other.n or self.k != other.k or self.features.shape != other.features.shape:
            return False
        if not (
            np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(np.asarray(self.labels), np.asarray(other.labels))
        ):
            return False
        return (self.features != other.features).nnz == 0

    def __repr__(self) -> str:
        return f"Graph(name={self.name!r}, n={self.n}, m={self.num_edges}, k={self.k}, d={self.d})"


def check_invariants(g: Graph, full: bool = True) -> None:
    """Raise :class:`GraphIntegrityError` if ``g`` breaks a structural invariant.

    ``full=True`` additionally verifies symmetry by a complete scan.
    """
    n = g.n
    if g.indptr[0] != 0 or np.any(np.diff(g.indptr) < 0):
        raise GraphIntegrityError("indptr is not monotone from 0")
    if g.indices.size and (g.indices.min() < 0 or g.indices.max() >= n):
        raise GraphIntegrityError("neighbour index out of range")
    src = np.repeat(np.arange(n), np.diff(g.indptr))
    if np.any(src == g.indices):
        raise GraphIntegrityError("self-loop stored")
    for u in range(n) if full else ():
        nb = g.neighbors(u)
        if nb.size > 1 and np.any(np.diff(nb) <= 0):
            raise GraphIntegrityError(f"neighbours of {u} not strictly ascending")
    if full:
        fwd = np.unique(src * n + g.indices)
        bwd = np.unique(g.indices * n + src)
        if fwd.size != g.indices.size or not np.array_equal(fwd, bwd):
            raise GraphIntegrityError("adjacency is not symmetric")
    labels = np.asarray(g.labels)
    if labels.size:
        if labels.min() < 0 or labels.max() >= g.k:
            raise GraphIntegrityError(f"label outside [0, {g.k})")
        if np.unique(labels).size != g.k:
            raise GraphIntegrityError("k is not tight: some class has no node")


@dataclass(frozen=True)
class DiscreteDistribution:
    probs: np.ndarray

    def __post_init__(self) -> None:
        p = _frozen(np.asarray(self.probs, dtype=np.float64))
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("probabilities must be non-negative and sum to 1")
        object.__setattr__(self, "probs", p)

    @property
    def support_size(self) -> int:
        return self.probs.shape[0]


def label_distribution(labels: np.ndarray, k: int) -> DiscreteDistribution:
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValueError("empty node set")
    return DiscreteDistribution(np.bincount(labels, minlength=k) / labels.size)


def edge_distribution(edges: np.ndarray, labels: np.ndarray, k: int) -> DiscreteDistribution:
    """Distribution over unordered endpoint-label pairs, index ``a*k + b`` with ``a <= b``."""
    edges = np.asarray(edges).reshape(-1, 2)
    if edges.shape[0] == 0:
        raise ValueError("edge category distribution needs at least one edge")
    la = np.asarray(labels)[edges[:, 0]]
    lb = np.asarray(labels)[edges[:, 1]]
    cat = np.minimum(la, lb) * k + np.maximum(la, lb)
    return DiscreteDistribution(np.bincount(cat, minlength=k * k) / edges.shape[0])


def node_label_distribution(g: Graph) -> DiscreteDistribution:
    return label_distribution(np.asarray(g.labels), g.k)


def edge_category_distribution(g: Graph) -> DiscreteDistribution:
    return edge_distribution(g.edges(), np.asarray(g.labels), g.k)


def generate_sbm(
    block_sizes: list[int],
    p_in: float,
    p_out: float,
    feature_dim: int,
    feature_signal: float,
    rng_seed: int,
    *,
    signal_noise: float = 0.0,
    name: str = "sbm",
) -> Graph:
    """Stochastic block model graph with block-indicator features.

    Node ``v`` in block ``b`` gets label ``b``. Feature column ``b`` holds
    ``feature_signal`` (plus ``signal_noise``-scaled Gaussian noise across
    the first ``len(block_sizes)`` columns); the remaining columns are
    standard normal noise.
    """
    block_sizes = [int(s) for s in block_sizes]
    nb = len(block_sizes)
    if nb == 0:
        raise GenerationError("block_sizes is empty")
    if not 0.0 <= p_out <= p_in <= 1.0:
        raise GenerationError(f"need 0 <= p_out <= p_in <= 1, got p_in={p_in}, p_out={p_out}")
    if feature_dim < nb:
        raise GenerationError(f"feature_dim={feature_dim} is smaller than the {nb} blocks")
    if any(s <= 0 for s in block_sizes):
        raise GenerationError("every block needs at least one node (empty class)")

    rng = np.random.default_rng(rng_seed)
    offsets = np.concatenate([[0], np.cumsum(block_sizes)])
    n = int(offsets[-1])
    labels = np.repeat(np.arange(nb), block_sizes)
    parts = []
    for a in range(nb):
        for b in range(a, nb):
            na, nbb = block_sizes[a], block_sizes[b]
            hit = rng.random((na, nbb)) < (p_in if a == b else p_out)
            if a == b:
                hit = np.triu(hit, 1)
            r, c = np.nonzero(hit)
            parts.append(np.stack([r + offsets[a], c + offsets[b]], axis=1))
    edges = np.concatenate(parts) if parts else np.empty((0, 2), dtype=np.int64)

    x = np.zeros((n, feature_dim))
    x[np.arange(n), labels] = feature_signal
    if signal_noise:
        x[:, :nb] += signal_noise * rng.standard_normal((n, nb))
    x[:, nb:] = rng.standard_normal((n, feature_dim - nb))
    return Graph.from_edges(n, edges, labels, sp.csr_matrix(x), k=nb, name=name)


def truncate_features(g: Graph, keep: int) -> Graph:
    """Keep the ``keep`` feature columns with the most nonzero rows.

    Ties go to the lower column index. "Most frequent" is read as document
    frequency; total-count ranking would differ for non-binary features.
    """
    if keep >= g.d:
        return g
    df = np.diff(g.features.tocsc().indptr)
    order = np.lexsort((np.arange(g.d), -df))[:keep]
    cols = np.sort(order)
    return dataclasses.replace(g, features=g.features[:, cols].tocsr(), meta=dict(g.meta))
