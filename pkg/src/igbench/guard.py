"""Access-guarded label views.

Models never see the raw label array. They get a graph whose ``labels``
attribute is a :class:`LabelView` that only answers for nodes the caller is
allowed to train on. Any other read is logged and raises
:class:`LabelLeakError`, so a model that swallows the exception is still
caught by the caller inspecting ``view.violations``.

Validation-set tuning goes through :class:`AccuracyOracle`, which answers
"how many of these predictions are right" and nothing finer.
"""
from __future__ import annotations

import numpy as np


class LabelLeakError(RuntimeError):
    """Raised when code reads a label it has no right to see."""


class LabelView:
    """Read-only label lookup restricted to ``allowed`` nodes."""

    def __init__(self, labels: np.ndarray, allowed: np.ndarray | None = None) -> None:
        self._labels = np.asarray(labels)
        n = self._labels.shape[0]
        self._mask = np.zeros(n, dtype=bool)
        if allowed is not None:
            self._mask[np.asarray(allowed, dtype=np.int64)] = True
        self.violations: list[np.ndarray] = []

    def __len__(self) -> int:
        return self._labels.shape[0]

    @property
    def allowed_nodes(self) -> np.ndarray:
        return np.flatnonzero(self._mask)

    def __getitem__(self, idx):
        nodes = np.asarray(idx)
        if nodes.dtype == bool:
            nodes = np.flatnonzero(nodes)
        if nodes.dtype.kind not in "iu":
            # slices and anything else that could enumerate hidden nodes
            nodes = np.arange(len(self))[idx]
        flat = np.atleast_1d(nodes).astype(np.int64)
        bad = flat[~self._mask[flat]]
        if bad.size:
            self.violations.append(bad.copy())
            raise LabelLeakError(f"read of {bad.size} hidden label(s), e.g. node {int(bad[0])}")
        return self._labels[idx]

    def __array__(self, dtype=None, copy=None):
        if not self._mask.all():
            hidden = np.flatnonzero(~self._mask)
            self.violations.append(hidden)
            raise LabelLeakError("bulk conversion would expose hidden labels")
        return np.asarray(self._labels, dtype=dtype)

    def __iter__(self):
        return iter(self[np.arange(len(self))])

    def __repr__(self) -> str:
        return f"LabelView(n={len(self)}, allowed={int(self._mask.sum())})"


class AccuracyOracle:
    """Scores predictions against hidden labels without revealing them.

    ``queries`` counts calls to :meth:`score`; ``label_reads`` counts any
    attempt to index the oracle directly (always refused).
    """

    def __init__(self, truth: np.ndarray, nodes: np.ndarray) -> None:
        self._nodes = np.asarray(nodes, dtype=np.int64)
        self._truth = np.asarray(truth)[self._nodes].copy()
        self.queries = 0
        self.label_reads = 0

    @property
    def nodes(self) -> np.ndarray:
        return self._nodes

    def __len__(self) -> int:
        return self._nodes.size

    def score(self, predictions: np.ndarray) -> float:
        predictions = np.asarray(predictions)
        if predictions.shape != self._truth.shape:
            raise ValueError(
                f"expected {self._truth.size} predictions aligned to oracle nodes, got {predictions.shape}"
            )
        self.queries += 1
        return float(np.mean(predictions == self._truth))

    def __getitem__(self, idx):
        self.label_reads += 1
        raise LabelLeakError("the accuracy oracle does not expose individual labels")
