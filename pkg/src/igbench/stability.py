"""Benchmark stability: ranking inversions across seeds and accuracy spread."""
from __future__ import annotations

import dataclasses
import functools
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np

from ._parallel import map_ordered
from .evaluator import HyperGrid, pipeline_evaluate
from .graph import Graph
from .models import ModelContract

__all__ = [
    "RankingSequence",
    "StabilityResult",
    "VarianceResult",
    "rank_models",
    "inversion_number",
    "stability_experiment",
    "variance_comparison",
]


@dataclass(frozen=True)
class RankingSequence:
    """Models ordered best-first for one seed, with their accuracies."""

    seed: int
    models: tuple[str, ...]
    accuracies: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(set(self.models)) != len(self.models):
            raise ValueError("model identifiers must be unique")
        if len(self.models) != len(self.accuracies):
            raise ValueError("models and accuracies differ in length")
        if any(b > a for a, b in zip(self.accuracies, self.accuracies[1:])):
            raise ValueError("accuracies must be non-increasing")


def rank_models(seed: int, scores: Mapping[str, float]) -> RankingSequence:
    """Sort by accuracy descending; exact ties fall back to model name."""
    order = sorted(scores, key=lambda name: (-scores[name], name))
    return RankingSequence(seed, tuple(order), tuple(float(scores[m]) for m in order))


def _count_inversions(seq: list[int]) -> int:
    if len(seq) < 2:
        return 0
    mid = len(seq) // 2
    left, right = seq[:mid], seq[mid:]
    count = _count_inversions(left) + _count_inversions(right)
    i = j = 0
    for idx in range(len(seq)):
        if j >= len(right) or (i < len(left) and left[i] <= right[j]):
            seq[idx] = left[i]
            i += 1
        else:
            seq[idx] = right[j]
            j += 1
            count += len(left) - i
    return count


def inversion_number(reference: RankingSequence, others: Sequence[RankingSequence]) -> int:
    """Total model pairs ordered differently from ``reference``, summed over ``others``."""
    pos = {m: i for i, m in enumerate(reference.models)}
    total = 0
    for other in others:
        if set(other.models) != set(pos) or len(other.models) != len(pos):
            raise ValueError(f"seed {other.seed} ranks a different model set than the reference")
        total += _count_inversions([pos[m] for m in other.models])
    return total


@dataclass
class StabilityResult:
    rankings: list[RankingSequence]
    inversion_number: int
    kendall_tau: list[float]

    def to_dict(self) -> dict[str, Any]:
        return {
            "reference_seed": self.rankings[0].seed,
            "rankings": [dataclasses.asdict(r) for r in self.rankings],
            "inversion_number": self.inversion_number,
            "kendall_tau_vs_reference": self.kendall_tau,
        }


def _kendall_tau(reference: RankingSequence, other: RankingSequence) -> float:
    m = len(reference.models)
    if m < 2:
        return 1.0
    pairs = m * (m - 1) / 2
    return 1.0 - 2.0 * inversion_number(reference, [other]) / pairs


def _seed_means(seed, models, graphs, labeled_fraction, valid_fraction):
    return {
        model.name: pipeline_evaluate(model, grid, graphs, labeled_fraction, valid_fraction, seed).mean
        for model, grid in models
    }


def stability_experiment(
    models: Sequence[tuple[ModelContract, HyperGrid]],
    graphs: Sequence[Graph],
    seeds: Sequence[int],
    labeled_fraction: float = 0.2,
    valid_fraction: float = 0.5,
    *,
    workers: int = 1,
) -> StabilityResult:
    """Rank the models by mean pipeline accuracy for each seed.

    The first seed's ranking is the reference for the inversion count. All
    seeds share the same graph family; only split and training randomness
    changes.
    """
    names = [m.name for m, _ in models]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate model names: {names}")
    if not models or len(seeds) < 1:
        raise ValueError("need at least one model and one seed")
    run = functools.partial(
        _seed_means, models=list(models), graphs=list(graphs),
        labeled_fraction=labeled_fraction, valid_fraction=valid_fraction,
    )
    means = map_ordered(run, list(seeds), workers)
    rankings = [rank_models(int(s), scores) for s, scores in zip(seeds, means)]
    ref, rest = rankings[0], rankings[1:]
    return StabilityResult(rankings, inversion_number(ref, rest), [_kendall_tau(ref, r) for r in rest])


@dataclass
class VarianceResult:
    std_iid: float
    std_splits: float
    iid_accuracies: list[float]
    split_accuracies: list[float]

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


def _split_accuracy(seed, model, grid, graph, labeled_fraction, valid_fraction):
    return pipeline_evaluate(model, grid, [graph], labeled_fraction, valid_fraction, seed).per_graph_accuracy[0]


def variance_comparison(
    model: ModelContract,
    grid: HyperGrid,
    samples: Sequence[Graph],
    single_graph: Graph,
    split_seeds: Sequence[int],
    labeled_fraction: float = 0.2,
    valid_fraction: float = 0.5,
    *,
    split_labeled_fraction: float | None = None,
    rng_seed: int = 0,
    workers: int = 1,
) -> VarianceResult:
    """Spread of accuracy over i.i.d. subgraphs versus random splits of one graph.

    ``std_iid`` comes from one pipeline run over ``samples``; ``std_splits``
    from one run per split seed on ``single_graph``, labelling
    ``split_labeled_fraction`` of its nodes (defaults to ``labeled_fraction``).
    Standard deviations are population (``ddof=0``).
    """
    iid = pipeline_evaluate(model, grid, samples, labeled_fraction, valid_fraction, rng_seed, workers=workers)
    run = functools.partial(
        _split_accuracy, model=model, grid=grid, graph=single_graph,
        labeled_fraction=split_labeled_fraction or labeled_fraction, valid_fraction=valid_fraction,
    )
    splits = map_ordered(run, [int(s) for s in split_seeds], workers)
    return VarianceResult(
        std_iid=float(np.std(iid.per_graph_accuracy)),
        std_splits=float(np.std(splits)),
        iid_accuracies=list(iid.per_graph_accuracy),
        split_accuracies=[float(a) for a in splits],
    )
