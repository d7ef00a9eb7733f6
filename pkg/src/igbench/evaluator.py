"""Labeled/unlabeled evaluation pipeline.

Per graph: split nodes into labeled and unlabeled, split the labeled part
into train and validation, grid-search on train/validation, retrain the
winner on every labeled node, and score on the unlabeled nodes. Models only
ever see a guarded label view of the graph.
"""
from __future__ import annotations

import dataclasses
import functools
import itertools
import json
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ._parallel import map_ordered
from ._seeding import derive_seed
from .graph import Graph
from .guard import AccuracyOracle, LabelLeakError
from .models import MajorityModel, ModelContract, ModelError, PropLin, make_model, reference_model

__all__ = [
    "Split",
    "SplitError",
    "PipelineError",
    "EvaluationReport",
    "HyperGrid",
    "expand_grid",
    "load_grid",
    "make_split",
    "subdivide",
    "accuracy",
    "fit_predict",
    "grid_search",
    "search",
    "pipeline_evaluate",
    "ModelContract",
    "ModelError",
    "PropLin",
    "MajorityModel",
    "reference_model",
    "make_model",
]

HyperGrid = Mapping[str, Sequence[Any]]


class SplitError(ValueError):
    pass


class PipelineError(RuntimeError):
    def __init__(self, index: int, cause: BaseException) -> None:
        super().__init__(f"graph {index}: {type(cause).__name__}: {cause}")
        self.index = index


@dataclass(frozen=True, eq=False)
class Split:
    labeled: np.ndarray
    unlabeled: np.ndarray
    train: np.ndarray | None = None
    valid: np.ndarray | None = None

    def check(self, n: int) -> None:
        both = np.concatenate([self.labeled, self.unlabeled])
        if both.size != n or not np.array_equal(np.sort(both), np.arange(n)):
            raise SplitError("labeled and unlabeled must partition the node set")
        if self.train is not None:
            tv = np.concatenate([self.train, self.valid])
            if tv.size != self.labeled.size or not np.array_equal(np.sort(tv), self.labeled):
                raise SplitError("train and valid must partition the labeled set")


def _round(x: float) -> int:
    return int(np.floor(x + 0.5))


def make_split(g: Graph, labeled_fraction: float = 0.2, rng_seed: int = 0, max_tries: int = 100) -> Split:
    """Uniform labeled/unlabeled partition with every class represented in the labeled part."""
    if not 0 < labeled_fraction < 1:
        raise SplitError("labeled_fraction must be in (0, 1)")
    size = _round(labeled_fraction * g.n)
    if size < g.k or size >= g.n:
        raise SplitError(f"{size} labeled nodes cannot cover {g.k} classes and leave a test set (n={g.n})")
    labels = np.asarray(g.labels)
    rng = np.random.default_rng(rng_seed)
    for _ in range(max_tries):
        perm = rng.permutation(g.n)
        labeled = np.sort(perm[:size])
        if np.unique(labels[labeled]).size == g.k:
            return Split(labeled, np.sort(perm[size:]))
    raise SplitError(f"no split with every class labeled after {max_tries} tries")


def subdivide(split: Split, valid_fraction: float = 0.5, rng_seed: int = 0) -> Split:
    """Split the labeled nodes into train and validation parts."""
    if split.train is not None:
        raise SplitError("split is already subdivided")
    if not 0 < valid_fraction < 1:
        raise SplitError("valid_fraction must be in (0, 1)")
    n_valid = _round(valid_fraction * split.labeled.size)
    if not 0 < n_valid < split.labeled.size:
        raise SplitError(f"cannot split {split.labeled.size} labeled nodes with valid_fraction={valid_fraction}")
    perm = np.random.default_rng(rng_seed).permutation(split.labeled)
    return dataclasses.replace(split, train=np.sort(perm[n_valid:]), valid=np.sort(perm[:n_valid]))


def accuracy(predictions, truth, node_set) -> float:
    """Fraction of ``node_set`` where the prediction matches ``truth``.

    ``predictions`` is either aligned with ``node_set`` or a mapping from
    node id to label. ``truth`` is a graph or a full label array.
    """
    nodes = np.asarray(node_set, dtype=np.int64)
    if nodes.size == 0:
        raise ValueError("empty node set")
    truth = np.asarray(truth.labels if isinstance(truth, Graph) else truth)
    if isinstance(predictions, Mapping):
        missing = [int(v) for v in nodes if int(v) not in predictions]
        if missing:
            raise ValueError(f"no prediction for {len(missing)} node(s), e.g. {missing[0]}")
        pred = np.array([predictions[int(v)] for v in nodes])
    else:
        pred = np.asarray(predictions)
        if pred.shape != nodes.shape:
            raise ValueError(f"{pred.shape[0] if pred.ndim else 0} predictions for {nodes.size} nodes")
    return float(np.mean(pred == truth[nodes]))


def expand_grid(grid: HyperGrid) -> list[dict[str, Any]]:
    """Cartesian product of ``grid``: names alphabetically, candidates in listed order."""
    if not grid:
        raise ValueError("empty hyper-parameter grid")
    names = sorted(grid)
    for name in names:
        if len(grid[name]) == 0:
            raise ValueError(f"hyper-parameter {name!r} has no candidates")
    return [dict(zip(names, combo)) for combo in itertools.product(*(grid[n] for n in names))]


def load_grid(path: str | Path) -> dict[str, list]:
    grid = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(grid, dict) or not all(isinstance(v, list) for v in grid.values()):
        raise ValueError(f"{path}: grid must map names to candidate lists")
    return grid


def fit_predict(
    model: ModelContract,
    g: Graph,
    nodes: np.ndarray,
    labels: np.ndarray,
    hparams: Mapping[str, Any],
    seed: int,
    predict_nodes: np.ndarray,
    allowed: np.ndarray | None = None,
) -> np.ndarray:
    """Fit on ``(nodes, labels)`` and predict ``predict_nodes`` behind the label guard.

    ``allowed`` lists nodes whose true labels the model may read through
    ``graph.labels`` (defaults to ``nodes``). A read outside it raises
    :class:`LabelLeakError`, even if the model caught the first one.
    """
    guarded = g.with_label_view(nodes if allowed is None else allowed)
    fitted = model.fit(guarded, nodes, labels, hparams, seed)
    pred = np.asarray(model.predict(fitted, predict_nodes))
    if guarded.labels.violations:
        raise LabelLeakError(f"{model.name} read {sum(v.size for v in guarded.labels.violations)} hidden label(s)")
    if pred.shape != np.shape(predict_nodes) or (pred.size and (pred.min() < 0 or pred.max() >= g.k)):
        raise ModelError(f"{model.name} returned malformed predictions")
    return pred


def _config_predictions(hparams, model, g, nodes, labels, seed, predict_nodes, allowed):
    return fit_predict(model, g, nodes, labels, hparams, seed, predict_nodes, allowed)


def search(
    model: ModelContract,
    grid: HyperGrid,
    g: Graph,
    nodes: np.ndarray,
    labels: np.ndarray,
    oracle: AccuracyOracle,
    rng_seed: int,
    *,
    extra_nodes: np.ndarray | None = None,
    allowed: np.ndarray | None = None,
    workers: int = 1,
) -> tuple[dict[str, Any], float, list[float], np.ndarray | None]:
    """Score every grid point against ``oracle`` and return the first best one.

    Returns ``(hparams, score, all_scores, winner_predictions_on_extra_nodes)``.
    Every grid point is fitted with the same seed.
    """
    configs = expand_grid(grid)
    seed = derive_seed(rng_seed, "grid")
    extra = np.empty(0, dtype=np.int64) if extra_nodes is None else np.asarray(extra_nodes, dtype=np.int64)
    targets = np.concatenate([oracle.nodes, extra])
    run = functools.partial(
        _config_predictions, model=model, g=g, nodes=nodes, labels=labels, seed=seed, predict_nodes=targets, allowed=allowed
    )
    preds = map_ordered(run, configs, workers)
    scores = [oracle.score(p[: len(oracle)]) for p in preds]
    best = int(np.argmax(scores))
    winner_extra = preds[best][len(oracle) :] if extra_nodes is not None else None
    return configs[best], scores[best], scores, winner_extra


def grid_search(
    model: ModelContract, grid: HyperGrid, g: Graph, split: Split, rng_seed: int = 0, workers: int = 1
) -> tuple[dict[str, Any], float]:
    """Fit every grid point on ``split.train``, score on ``split.valid``; return the argmax.

    Ties go to the earliest point in :func:`expand_grid` order.
    """
    if split.train is None:
        raise SplitError("grid_search needs a subdivided split")
    labels = np.asarray(g.labels)
    oracle = AccuracyOracle(labels, split.valid)
    hp, score, _, _ = search(model, grid, g, split.train, labels[split.train], oracle, rng_seed, workers=workers)
    return hp, score


Selector = Callable[..., tuple[dict[str, Any], float]]


@dataclass
class EvaluationReport:
    model_name: str
    dataset_name: str
    per_graph_accuracy: list[float]
    best_hparams_per_graph: list[dict[str, Any]]
    valid_accuracy_per_graph: list[float] = field(default_factory=list)
    search_train_sizes: list[int] = field(default_factory=list)
    final_train_sizes: list[int] = field(default_factory=list)
    seed: int = 0
    labeled_fraction: float = 0.2
    valid_fraction: float = 0.5

    @property
    def mean(self) -> float:
        return float(np.mean(self.per_graph_accuracy))

    @property
    def std(self) -> float:
        return float(np.std(self.per_graph_accuracy))

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["mean"], d["std"] = self.mean, self.std
        return d


def _evaluate_graph(
    g: Graph,
    model: ModelContract,
    grid: HyperGrid,
    labeled_fraction: float,
    valid_fraction: float,
    rng_seed: int,
    selector: Selector,
) -> dict[str, Any]:
    split = make_split(g, labeled_fraction, derive_seed(rng_seed, "split"))
    split = subdivide(split, valid_fraction, derive_seed(rng_seed, "subdivide"))
    hp, valid_acc = selector(model, grid, g, split, derive_seed(rng_seed, "select"))
    labels = np.asarray(g.labels)
    pred = fit_predict(
        model, g, split.labeled, labels[split.labeled], hp, derive_seed(rng_seed, "final"), split.unlabeled
    )
    return {
        "accuracy": accuracy(pred, labels, split.unlabeled),
        "hparams": hp,
        "valid_accuracy": valid_acc,
        "search_train_size": int(split.train.size),
        "final_train_size": int(split.labeled.size),
    }


def _evaluate_indexed(item, **kwargs):
    index, g = item
    try:
        return _evaluate_graph(g, **kwargs)
    except LabelLeakError as exc:
        raise LabelLeakError(f"graph {index}: {exc}") from exc
    except Exception as exc:
        raise PipelineError(index, exc) from exc


def pipeline_evaluate(
    model: ModelContract,
    grid: HyperGrid,
    graphs: Sequence[Graph],
    labeled_fraction: float = 0.2,
    valid_fraction: float = 0.5,
    rng_seed: int = 0,
    *,
    workers: int = 1,
    selector: Selector = grid_search,
    dataset_name: str | None = None,
) -> EvaluationReport:
    """Run the split / select / retrain / test pipeline on every graph.

    Every graph is processed with the same seed stream, so identical graphs
    give identical results; different graphs still get different splits.
    """
    if not graphs:
        raise ValueError("pipeline_evaluate needs at least one graph")
    run = functools.partial(
        _evaluate_indexed,
        model=model,
        grid=grid,
        labeled_fraction=labeled_fraction,
        valid_fraction=valid_fraction,
        rng_seed=rng_seed,
        selector=selector,
    )
    rows = map_ordered(run, list(enumerate(graphs)), workers)
    return EvaluationReport(
        model_name=model.name,
        dataset_name=dataset_name or graphs[0].name,
        per_graph_accuracy=[r["accuracy"] for r in rows],
        best_hparams_per_graph=[r["hparams"] for r in rows],
        valid_accuracy_per_graph=[r["valid_accuracy"] for r in rows],
        search_train_sizes=[r["search_train_size"] for r in rows],
        final_train_sizes=[r["final_train_size"] for r in rows],
        seed=rng_seed,
        labeled_fraction=labeled_fraction,
        valid_fraction=valid_fraction,
    )
