"""Random-walk subgraph sampling with KL-divergence acceptance thresholds."""
from __future__ import annotations

import dataclasses
import functools
import json
import math
import weakref
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from ._parallel import map_ordered
from ._seeding import derive_rng, derive_seed
from .graph import DiscreteDistribution, Graph, edge_distribution, label_distribution
from .io import load_bundle, write_graph, write_json

__all__ = [
    "SamplingError",
    "WalkExhaustedError",
    "ThresholdInfeasibleError",
    "SubgraphSample",
    "SamplerConfig",
    "DatasetStats",
    "KL_EPS",
    "kl_divergence",
    "random_walk_sample",
    "vertex_sample",
    "reject_sample",
    "pilot_kls",
    "calibrate_thresholds",
    "overlap_rate",
    "coverage_rate",
    "dataset_stats",
    "write_samples",
    "read_samples",
]

KL_EPS = 1e-9
_STEP_BUDGET_PER_EDGE = 10_000


class SamplingError(ValueError):
    pass


class WalkExhaustedError(SamplingError):
    pass


class ThresholdInfeasibleError(SamplingError):
    def __init__(self, sample_index: int, attempts: int, best_node_kl: float, best_edge_kl: float) -> None:
        super().__init__(
            f"sample {sample_index}: no walk accepted in {attempts} attempts "
            f"(best node KL {best_node_kl:.6g}, best edge KL {best_edge_kl:.6g})"
        )
        self.sample_index = sample_index
        self.attempts = attempts
        self.best_node_kl = best_node_kl
        self.best_edge_kl = best_edge_kl


@dataclass(frozen=True, eq=False)
class SubgraphSample:
    """A sampled subgraph expressed in local node ids.

    ``parent_ids[i]`` is the parent-graph id of local node ``i``; ``edges``
    holds local ``(u, v)`` pairs with ``u < v``.
    """

    parent_ids: np.ndarray
    edges: np.ndarray
    seed_node: int
    walk_steps: int
    node_kl: float = float("nan")
    edge_kl: float = float("nan")
    attempts: int = 1

    @property
    def n_nodes(self) -> int:
        return self.parent_ids.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    def parent_edges(self) -> np.ndarray:
        return self.parent_ids[self.edges]

    def to_graph(self, parent: Graph, name: str | None = None) -> Graph:
        """Materialise as a :class:`Graph` on the traversed edges.

        Labels are densified to the classes present, so ``k`` may be smaller
        than the parent's.
        """
        present, labels = np.unique(np.asarray(parent.labels)[self.parent_ids], return_inverse=True)
        g = Graph.from_edges(
            self.n_nodes,
            self.edges,
            labels,
            parent.features[self.parent_ids],
            k=present.size,
            name=name or f"{parent.name}-sample",
            original_ids=self.parent_ids,
        )
        g.meta["label_map"] = [int(c) for c in present]
        return g


@dataclass(frozen=True)
class SamplerConfig:
    target_edges: int = 5000
    node_kl_threshold: float = math.inf
    edge_kl_threshold: float = math.inf
    sample_count: int = 100
    max_attempts_per_sample: int = 1000
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.target_edges < 1 or self.sample_count < 1 or self.max_attempts_per_sample < 1:
            raise ValueError("target_edges, sample_count and max_attempts_per_sample must be >= 1")
        if self.node_kl_threshold < 0 or self.edge_kl_threshold < 0:
            raise ValueError("KL thresholds must be >= 0")


@dataclass(frozen=True)
class DatasetStats:
    mean_node_kl: float
    std_node_kl: float
    mean_edge_kl: float
    std_edge_kl: float
    overlap_rate: float
    coverage_rate: float
    mean_nodes: float
    std_nodes: float
    overlap_method: str = "jaccard"

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def kl_divergence(p: DiscreteDistribution | np.ndarray, q: DiscreteDistribution | np.ndarray) -> float:
    """``KL(p || q)`` in nats with additive smoothing ``KL_EPS`` on both sides.

    Smoothing is applied before renormalisation; both vectors gain the same
    total mass, so the renormalising constant cancels inside the log.
    Categories with ``p == 0`` contribute nothing.
    """
    p = np.asarray(getattr(p, "probs", p), dtype=np.float64)
    q = np.asarray(getattr(q, "probs", q), dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"support sizes differ: {p.shape[0]} vs {q.shape[0]}")
    nz = p > 0
    val = float(np.sum(p[nz] * np.log((p[nz] + KL_EPS) / (q[nz] + KL_EPS))))
    return max(val, 0.0)


_components: weakref.WeakKeyDictionary = weakref.WeakKeyDictionary()


def _component_edges(g: Graph) -> tuple[np.ndarray, np.ndarray]:
    """Per-node component id and per-component edge count (cached per graph)."""
    hit = _components.get(g)
    if hit is None:
        _, comp = connected_components(g.adjacency(), directed=False)
        counts = np.bincount(comp, weights=g.degree, minlength=comp.max() + 1 if comp.size else 0) / 2
        hit = (comp, counts.astype(np.int64))
        _components[g] = hit
    return hit


def _subgraph_from_keys(keys: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    keys = np.sort(keys)
    pairs = np.stack([keys // n, keys % n], axis=1)
    parent_ids = np.unique(pairs)
    return parent_ids, np.searchsorted(parent_ids, pairs)


def random_walk_sample(g: Graph, seed_node: int, target_edges: int, rng: np.random.Generator) -> SubgraphSample:
    """Simple random walk from ``seed_node`` until ``target_edges`` distinct edges are traversed.

    Each step moves to a uniformly chosen neighbour. The sample keeps the
    traversed edges only, not the induced subgraph on visited nodes.
    """
    seed_node = int(seed_node)
    deg = g.degree
    if deg[seed_node] == 0:
        raise SamplingError(f"seed node {seed_node} is isolated")
    comp, comp_edges = _component_edges(g)
    if comp_edges[comp[seed_node]] < target_edges:
        raise WalkExhaustedError(
            f"component of node {seed_node} has {comp_edges[comp[seed_node]]} edges < target {target_edges}"
        )
    indptr, indices = g.indptr, g.indices
    n = g.n
    budget = _STEP_BUDGET_PER_EDGE * target_edges
    seen: set[int] = set()
    cur = seed_node
    steps = 0
    while len(seen) < target_edges:
        if steps >= budget:
            raise WalkExhaustedError(f"walk from {seed_node} exceeded {budget} steps")
        for u in rng.random(min(1024, budget - steps)):
            lo = indptr[cur]
            nxt = int(indices[lo + int(u * (indptr[cur + 1] - lo))])
            seen.add(cur * n + nxt if cur < nxt else nxt * n + cur)
            cur = nxt
            steps += 1
            if len(seen) == target_edges:
                break
    parent_ids, edges = _subgraph_from_keys(np.fromiter(seen, dtype=np.int64, count=len(seen)), n)
    return SubgraphSample(parent_ids=parent_ids, edges=edges, seed_node=seed_node, walk_steps=steps)


def vertex_sample(g: Graph, node_count: int, rng: np.random.Generator) -> SubgraphSample:
    """Uniform node sample plus induced edges; the result may be disconnected."""
    if not 0 < node_count <= g.n:
        raise SamplingError(f"node_count must be in [1, {g.n}], got {node_count}")
    nodes = np.sort(rng.choice(g.n, size=node_count, replace=False))
    sub = g.adjacency()[nodes][:, nodes]
    r, c = sp.triu(sub, 1).nonzero()
    edges = np.stack([r, c], axis=1).astype(np.int64)
    order = np.lexsort((edges[:, 1], edges[:, 0]))
    sample = SubgraphSample(parent_ids=nodes, edges=edges[order], seed_node=-1, walk_steps=0)
    return _stamp(sample, g)


def _parent_dists(g: Graph) -> tuple[DiscreteDistribution, DiscreteDistribution]:
    labels = np.asarray(g.labels)
    return label_distribution(labels, g.k), edge_distribution(g.edges(), labels, g.k)


def _sample_kls(sample: SubgraphSample, g: Graph, parent_node, parent_edge) -> tuple[float, float]:
    labels = np.asarray(g.labels)
    node_kl = kl_divergence(label_distribution(labels[sample.parent_ids], g.k), parent_node)
    if sample.n_edges == 0:
        return node_kl, float("nan")
    edge_kl = kl_divergence(edge_distribution(sample.parent_edges(), labels, g.k), parent_edge)
    return node_kl, edge_kl


def _stamp(sample: SubgraphSample, g: Graph, dists=None) -> SubgraphSample:
    node_kl, edge_kl = _sample_kls(sample, g, *(dists or _parent_dists(g)))
    return dataclasses.replace(sample, node_kl=node_kl, edge_kl=edge_kl)


def _eligible_seeds(g: Graph, target_edges: int) -> np.ndarray:
    comp, comp_edges = _component_edges(g)
    ok = (g.degree > 0) & (comp_edges[comp] >= target_edges)
    seeds = np.flatnonzero(ok)
    if seeds.size == 0:
        raise WalkExhaustedError(f"no connected component holds {target_edges} edges")
    return seeds


def _draw_accepted(index: int, g: Graph, cfg: SamplerConfig, seeds: np.ndarray, dists) -> SubgraphSample:
    rng = derive_rng(cfg.rng_seed, index)
    best = (math.inf, math.inf)
    for attempt in range(1, cfg.max_attempts_per_sample + 1):
        seed_node = seeds[rng.integers(seeds.size)]
        sample = random_walk_sample(g, seed_node, cfg.target_edges, rng)
        node_kl, edge_kl = _sample_kls(sample, g, *dists)
        if node_kl <= cfg.node_kl_threshold and edge_kl <= cfg.edge_kl_threshold:
            return dataclasses.replace(sample, node_kl=node_kl, edge_kl=edge_kl, attempts=attempt)
        if node_kl + edge_kl < sum(best):
            best = (node_kl, edge_kl)
    raise ThresholdInfeasibleError(index, cfg.max_attempts_per_sample, *best)


def reject_sample(g: Graph, cfg: SamplerConfig, workers: int = 1) -> list[SubgraphSample]:
    """Draw ``cfg.sample_count`` random-walk subgraphs that pass both KL thresholds.

    Sample ``i`` uses its own RNG stream derived from ``(cfg.rng_seed, i)``,
    so the result does not depend on ``workers``. Seeds are drawn uniformly
    from positive-degree nodes whose component can supply the target edge
    count.
    """
    seeds = _eligible_seeds(g, cfg.target_edges)
    draw = functools.partial(_draw_accepted, g=g, cfg=cfg, seeds=seeds, dists=_parent_dists(g))
    return map_ordered(draw, range(cfg.sample_count), workers)


def pilot_kls(g: Graph, cfg: SamplerConfig, pilot_count: int, workers: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Node and edge KL of ``pilot_count`` unthresholded walks."""
    pilot = dataclasses.replace(
        cfg,
        node_kl_threshold=math.inf,
        edge_kl_threshold=math.inf,
        sample_count=pilot_count,
        rng_seed=derive_seed(cfg.rng_seed, "pilot"),
    )
    samples = reject_sample(g, pilot, workers)
    return np.array([s.node_kl for s in samples]), np.array([s.edge_kl for s in samples])


def calibrate_thresholds(
    g: Graph, cfg: SamplerConfig, pilot_count: int, percentile: float, workers: int = 1
) -> tuple[float, float]:
    """Thresholds at the given percentile of a pilot run's node and edge KL."""
    if pilot_count < 10:
        raise ValueError("pilot_count must be >= 10")
    if not 0 < percentile <= 100:
        raise ValueError("percentile must be in (0, 100]")
    node, edge = pilot_kls(g, cfg, pilot_count, workers)
    return float(np.percentile(node, percentile)), float(np.percentile(edge, percentile))


def _membership(samples: list[SubgraphSample], n: int | None = None) -> sp.csr_matrix:
    if n is None:
        n = max(int(s.parent_ids.max()) for s in samples) + 1
    rows = np.repeat(np.arange(len(samples)), [s.n_nodes for s in samples])
    cols = np.concatenate([s.parent_ids for s in samples])
    return sp.csr_matrix((np.ones(cols.size), (rows, cols)), shape=(len(samples), n))


def overlap_rate(samples: list[SubgraphSample], method: str = "jaccard") -> float:
    """Mean pairwise node overlap.

    ``method="jaccard"`` gives ``|Vi & Vj| / |Vi | Vj|``; ``"total"`` gives
    ``|Vi & Vj| / (|Vi| + |Vj|)``.
    """
    if len(samples) < 2:
        raise ValueError("overlap needs at least two samples")
    m = _membership(samples)
    inter = (m @ m.T).toarray()
    sizes = np.array([s.n_nodes for s in samples], dtype=np.float64)
    i, j = np.triu_indices(len(samples), 1)
    common = inter[i, j]
    if method == "jaccard":
        denom = sizes[i] + sizes[j] - common
    elif method == "total":
        denom = sizes[i] + sizes[j]
    else:
        raise ValueError(f"unknown overlap method {method!r}")
    return float(np.mean(common / denom))


def coverage_rate(samples: list[SubgraphSample], parent: Graph | int) -> float:
    if not samples:
        raise ValueError("coverage needs at least one sample")
    n = parent if isinstance(parent, int) else parent.n
    union = np.unique(np.concatenate([s.parent_ids for s in samples]))
    return union.size / n


def dataset_stats(samples: list[SubgraphSample], parent: Graph, overlap_method: str = "jaccard") -> DatasetStats:
    """Table-style summary: KL mean/std, overlap, coverage, node-count mean/std.

    Standard deviations are population (``ddof=0``). KLs are recomputed
    against ``parent`` rather than trusted from the samples.
    """
    if len(samples) < 2:
        raise ValueError("dataset statistics need at least two samples")
    dists = _parent_dists(parent)
    kls = np.array([_sample_kls(s, parent, *dists) for s in samples])
    nodes = np.array([s.n_nodes for s in samples], dtype=np.float64)
    return DatasetStats(
        mean_node_kl=float(kls[:, 0].mean()),
        std_node_kl=float(kls[:, 0].std()),
        mean_edge_kl=float(kls[:, 1].mean()),
        std_edge_kl=float(kls[:, 1].std()),
        overlap_rate=overlap_rate(samples, overlap_method),
        coverage_rate=coverage_rate(samples, parent),
        mean_nodes=float(nodes.mean()),
        std_nodes=float(nodes.std()),
        overlap_method=overlap_method,
    )


def write_samples(
    samples: list[SubgraphSample], parent: Graph, out_dir: str | Path, rng_seed: int | None = None
) -> list[Path]:
    """Write ``sample_000/``, ``sample_001/``, ... bundles with ``provenance.json``."""
    out_dir = Path(out_dir)
    paths = []
    for i, s in enumerate(samples):
        sub = s.to_graph(parent, name=f"{parent.name}-sample_{i:03d}")
        d = write_graph(sub, out_dir / f"sample_{i:03d}")
        write_json(
            d / "provenance.json",
            {
                "index": i,
                "seed_node": int(s.seed_node),
                "walk_steps": int(s.walk_steps),
                "attempts": int(s.attempts),
                "node_kl": s.node_kl,
                "edge_kl": s.edge_kl,
                "rng_seed": rng_seed,
                "parent_ids": [int(x) for x in s.parent_ids],
                "label_map": sub.meta["label_map"],
            },
        )
        paths.append(d)
    return paths


def sample_dirs(directory: str | Path) -> list[Path]:
    directory = Path(directory)
    if (directory / "edges.tsv").exists():
        return [directory]
    return sorted(p for p in directory.iterdir() if p.is_dir() and (p / "edges.tsv").exists())


def read_samples(directory: str | Path) -> list[tuple[SubgraphSample, Graph]]:
    """Load sample bundles written by :func:`write_samples`."""
    out = []
    for d in sample_dirs(directory):
        g = load_bundle(d)
        prov = json.loads((d / "provenance.json").read_text(encoding="utf-8"))
        parent_ids = np.asarray(prov["parent_ids"], dtype=np.int64)
        sample = SubgraphSample(
            parent_ids=parent_ids,
            edges=g.edges(),
            seed_node=prov["seed_node"],
            walk_steps=prov["walk_steps"],
            node_kl=prov["node_kl"],
            edge_kl=prov["edge_kl"],
            attempts=prov.get("attempts", 1),
        )
        out.append((sample, g))
    return out
