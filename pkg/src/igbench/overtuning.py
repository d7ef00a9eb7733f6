"""Validation-label over-tuning: pseudo-label search and validation-size sweeps.

:func:`validutil` treats each validation node's training label as an extra
hyper-parameter and tunes them one node at a time against validation
accuracy. Hidden validation labels reach the search only through the scalar
:class:`~igbench.guard.AccuracyOracle`.
"""
from __future__ import annotations

import dataclasses
from collections import Counter
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.stats import spearmanr

from ._seeding import derive_rng, derive_seed
from .evaluator import HyperGrid, Split, SplitError, accuracy, fit_predict, search
from .graph import Graph
from .guard import AccuracyOracle
from .models import ModelContract

__all__ = [
    "PseudoLabelState",
    "ValidUtilResult",
    "SweepRow",
    "SweepReport",
    "validutil",
    "validutil_partial",
    "plain_evaluate",
    "sweep_validation_size",
]


@dataclass
class PseudoLabelState:
    """Search state for the pseudo-label hyper-parameters.

    ``candidate_acc[i, l]`` is the validation accuracy observed with node
    ``i``'s pseudo-label set to ``l``; ``per_node_chosen_acc[i]`` is the
    row maximum.
    """

    valid_nodes: np.ndarray
    initial_predictions: np.ndarray
    pseudo_labels: np.ndarray
    candidate_acc: np.ndarray
    per_node_chosen_acc: np.ndarray
    k: int
    budget: int
    search_queries: int = 0
    final_queries: int = 0
    label_reads: int = 0
    overfit_train_accuracy: float = float("nan")

    @property
    def t(self) -> int:
        return self.valid_nodes.shape[0]

    @property
    def query_count(self) -> int:
        return self.search_queries + self.final_queries

    def to_dict(self) -> dict[str, Any]:
        return {
            "valid_nodes": self.valid_nodes.tolist(),
            "initial_predictions": self.initial_predictions.tolist(),
            "pseudo_labels": self.pseudo_labels.tolist(),
            "chosen_accuracy": self.per_node_chosen_acc.tolist(),
            "candidate_accuracy": self.candidate_acc.tolist(),
            "t": self.t,
            "k": self.k,
            "budget": self.budget,
            "search_queries": self.search_queries,
            "final_queries": self.final_queries,
            "query_count": self.query_count,
            "label_reads": self.label_reads,
            "overfit_train_accuracy": self.overfit_train_accuracy,
            "node_order": "ascending node id",
        }


@dataclass
class ValidUtilResult:
    test_accuracy: float
    state: PseudoLabelState
    final_hparams: dict[str, Any]
    final_valid_accuracy: float


def plain_evaluate(
    model: ModelContract,
    g: Graph,
    train_nodes: np.ndarray,
    valid_nodes: np.ndarray,
    test_nodes: np.ndarray,
    final_grid: HyperGrid,
    rng_seed: int,
) -> tuple[float, dict[str, Any]]:
    """Grid-search on train/valid, then score the winner on ``test_nodes``.

    Identical to :func:`validutil` with ``budget=0``.
    """
    res = validutil_partial(model, g, train_nodes, valid_nodes, test_nodes, {}, final_grid, rng_seed, budget=0)
    return res.test_accuracy, res.final_hparams


def validutil(
    model: ModelContract,
    g: Graph,
    train_nodes: np.ndarray,
    valid_nodes: np.ndarray,
    test_nodes: np.ndarray,
    base_hparams: dict[str, Any],
    final_grid: HyperGrid,
    rng_seed: int,
    **kwargs: Any,
) -> ValidUtilResult:
    """Pseudo-label search over every validation node; see :func:`validutil_partial`."""
    return validutil_partial(
        model, g, train_nodes, valid_nodes, test_nodes, base_hparams, final_grid, rng_seed,
        budget=np.size(valid_nodes), **kwargs,
    )


def validutil_partial(
    model: ModelContract,
    g: Graph,
    train_nodes: np.ndarray,
    valid_nodes: np.ndarray,
    test_nodes: np.ndarray,
    base_hparams: dict[str, Any],
    final_grid: HyperGrid,
    rng_seed: int,
    budget: int,
    *,
    strict: bool = True,
    oracle: AccuracyOracle | None = None,
) -> ValidUtilResult:
    """Tune pseudo-labels for the first ``budget`` validation nodes (ascending id).

    1. Fit on the training labels and predict the validation nodes.
    2. Initialise each tuned node's pseudo-label to that prediction.
    3. For each tuned node, try every class with dropout forced to 0, query
       validation accuracy, and switch to the best class only if it beats
       the accuracy at the original prediction (``strict=False`` uses >=).
    4. Grid-search ``final_grid`` training on train + pseudo-labels, scored
       on the same validation set, and report the winner's test accuracy.

    Ties among candidate classes go to the lowest class id.
    """
    labels = np.asarray(g.labels)
    train_nodes = np.sort(np.asarray(train_nodes, dtype=np.int64))
    valid_nodes = np.sort(np.asarray(valid_nodes, dtype=np.int64))
    test_nodes = np.asarray(test_nodes, dtype=np.int64)
    t, k = valid_nodes.size, g.k
    if not 0 <= budget <= t:
        raise ValueError(f"budget must be in [0, {t}], got {budget}")
    oracle = AccuracyOracle(labels, valid_nodes) if oracle is None else oracle
    train_labels = labels[train_nodes]

    fit_nodes = np.concatenate([train_nodes, valid_nodes[:budget]])

    def fit_and_predict(pseudo: np.ndarray, hp: dict[str, Any], seed: int, nodes: np.ndarray) -> np.ndarray:
        return fit_predict(
            model, g, fit_nodes, np.concatenate([train_labels, pseudo]), hp, seed, nodes, allowed=train_nodes
        )

    initial = fit_predict(
        model, g, train_nodes, train_labels, base_hparams, derive_seed(rng_seed, "init"), valid_nodes
    )
    tuned = initial[:budget].copy()
    cand = np.full((budget, k), np.nan)
    search_hp = {**base_hparams, "dropout": 0.0}
    before = oracle.queries
    for i in range(budget):
        for lab in range(k):
            tuned[i] = lab
            seed = derive_seed(rng_seed, "node", int(valid_nodes[i]), lab)
            cand[i, lab] = oracle.score(fit_and_predict(tuned, search_hp, seed, valid_nodes))
        best = int(np.argmax(cand[i]))
        keep = int(initial[i])
        better = cand[i, best] > cand[i, keep] if strict else cand[i, best] >= cand[i, keep]
        tuned[i] = best if better else keep
    search_queries = oracle.queries - before

    before = oracle.queries
    final_seed = derive_seed(rng_seed, "final")
    hp, valid_acc, _, test_pred = search(
        model, final_grid, g, fit_nodes, np.concatenate([train_labels, tuned]), oracle, final_seed,
        extra_nodes=test_nodes, allowed=train_nodes,
    )
    final_queries = oracle.queries - before
    # same seed search() used for the winner
    fit_pred = fit_and_predict(tuned, hp, derive_seed(final_seed, "grid"), fit_nodes)
    state = PseudoLabelState(
        valid_nodes=valid_nodes,
        initial_predictions=initial,
        pseudo_labels=np.concatenate([tuned, initial[budget:]]),
        candidate_acc=cand,
        per_node_chosen_acc=cand.max(axis=1) if budget else np.empty(0),
        k=k,
        budget=budget,
        search_queries=search_queries,
        final_queries=final_queries,
        label_reads=oracle.label_reads,
        overfit_train_accuracy=float(np.mean(fit_pred == np.concatenate([train_labels, tuned]))),
    )
    return ValidUtilResult(accuracy(test_pred, labels, test_nodes), state, hp, valid_acc)


@dataclass
class SweepRow:
    validation_size: int
    best_hparams: dict[str, Any]
    test_accuracy_mean: float
    test_accuracy_std: float
    accuracies: list[float] = field(default_factory=list)
    winners: list[dict[str, Any]] = field(default_factory=list)


@dataclass
class SweepReport:
    model_name: str
    rows: list[SweepRow]
    seeds: list[int]

    @property
    def sizes(self) -> list[int]:
        return [r.validation_size for r in self.rows]

    @property
    def means(self) -> list[float]:
        return [r.test_accuracy_mean for r in self.rows]

    def spearman(self) -> float:
        """Rank correlation between validation size and mean test accuracy."""
        if len(self.rows) < 2 or len(set(self.means)) == 1:
            return float("nan")
        return float(spearmanr(self.sizes, self.means).statistic)

    def to_dict(self) -> dict[str, Any]:
        return {
            "model_name": self.model_name,
            "seeds": list(self.seeds),
            "rows": [dataclasses.asdict(r) for r in self.rows],
            "spearman": self.spearman(),
        }

    def to_tsv(self) -> str:
        return "size\tmean_accuracy\n" + "".join(f"{r.validation_size}\t{r.test_accuracy_mean!r}\n" for r in self.rows)


def sweep_validation_size(
    model: ModelContract,
    grid: HyperGrid,
    g: Graph,
    split: Split,
    sizes: Sequence[int],
    seeds: Sequence[int],
) -> SweepReport:
    """Test accuracy after tuning on growing validation subsets.

    For each seed the validation nodes are shuffled once and size ``s``
    exposes the first ``s`` of them, so smaller sets nest in larger ones.
    The winner is trained on ``split.train`` and scored on
    ``split.unlabeled``.
    """
    if split.train is None:
        raise SplitError("sweep needs a subdivided split")
    sizes = [int(s) for s in sizes]
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError("sizes must be strictly increasing")
    if not sizes or sizes[0] < 1 or sizes[-1] > split.valid.size:
        raise ValueError(f"sizes must lie in [1, {split.valid.size}]")
    labels = np.asarray(g.labels)
    acc = np.zeros((len(sizes), len(seeds)))
    winners: list[list[dict[str, Any]]] = [[] for _ in sizes]
    for j, seed in enumerate(seeds):
        order = derive_rng(seed, "sweep-order").permutation(split.valid)
        for i, s in enumerate(sizes):
            oracle = AccuracyOracle(labels, np.sort(order[:s]))
            hp, _, _, test_pred = search(
                model, grid, g, split.train, labels[split.train], oracle, derive_seed(seed, "sweep"),
                extra_nodes=split.unlabeled,
            )
            acc[i, j] = accuracy(test_pred, labels, split.unlabeled)
            winners[i].append(hp)
    rows = []
    for i, s in enumerate(sizes):
        keys = [tuple(sorted(w.items())) for w in winners[i]]
        counts = Counter(keys)
        modal = dict(next(key for key in keys if counts[key] == max(counts.values())))
        rows.append(SweepRow(s, modal, float(acc[i].mean()), float(acc[i].std()), acc[i].tolist(), winners[i]))
    return SweepReport(model.name, rows, [int(s) for s in seeds])
