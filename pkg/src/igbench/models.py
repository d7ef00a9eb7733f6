"""Node classifiers that plug into the evaluation pipeline."""
from __future__ import annotations

from collections import OrderedDict
from collections.abc import Mapping
from dataclasses import dataclass
from typing import Any, Protocol, runtime_checkable

import numpy as np
import scipy.sparse as sp

from .graph import Graph

__all__ = ["ModelContract", "ModelError", "PropLin", "MajorityModel", "reference_model", "make_model", "MODELS"]


class ModelError(RuntimeError):
    pass


@runtime_checkable
class ModelContract(Protocol):
    """What any classifier must provide.

    ``fit`` receives a graph whose ``labels`` are guarded, the node ids it
    may train on, the training label for each of them (possibly pseudo
    labels), a hyper-parameter mapping and a seed. It must be deterministic
    given those inputs. ``predict`` returns one class id in ``[0, graph.k)``
    per requested node.
    """

    name: str

    def fit(self, graph: Graph, nodes: np.ndarray, labels: np.ndarray, hparams: Mapping[str, Any], seed: int) -> Any: ...

    def predict(self, fitted: Any, nodes: np.ndarray) -> np.ndarray: ...


def normalized_adjacency(g: Graph, self_loop: float = 2.0) -> sp.csr_matrix:
    """``D^-1/2 (A + self_loop * I) D^-1/2`` with ``D`` the degree of ``A + self_loop * I``."""
    a = g.adjacency() + self_loop * sp.identity(g.n, format="csr")
    dinv = 1.0 / np.sqrt(np.asarray(a.sum(axis=1)).ravel())
    return sp.csr_matrix(sp.diags(dinv) @ a @ sp.diags(dinv))


@dataclass
class _LinearFit:
    weights: np.ndarray
    bias: np.ndarray
    features: np.ndarray

    def scores(self, nodes: np.ndarray) -> np.ndarray:
        return self.features[nodes] @ self.weights + self.bias


class PropLin:
    """Propagated-features linear classifier.

    Features are smoothed ``depth`` times with the self-loop-reinforced
    normalised adjacency, then a softmax regression is trained by full-batch
    gradient descent on the given nodes.

    Hyper-parameters: ``depth``, ``lr``, ``epochs``, ``l2``, ``dropout``
    (applied to the propagated feature rows during training only).
    """

    defaults = {"depth": 2, "lr": 0.5, "epochs": 200, "l2": 5e-4, "dropout": 0.0}

    def __init__(self, name: str = "proplin", self_loop: float = 2.0, **overrides: Any) -> None:
        unknown = set(overrides) - set(self.defaults)
        if unknown:
            raise ValueError(f"unknown PropLin hyper-parameters: {sorted(unknown)}")
        self.name = name
        self.self_loop = self_loop
        self.overrides = overrides
        self._cache: OrderedDict = OrderedDict()

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_cache"] = OrderedDict()
        return state

    def __repr__(self) -> str:
        return f"PropLin(name={self.name!r}, overrides={self.overrides})"

    def propagate(self, g: Graph, depth: int) -> np.ndarray:
        key = (id(g.indptr), id(g.features), depth)
        hit = self._cache.get(key)
        if hit is not None and hit[0] is g.indptr and hit[1] is g.features:
            self._cache.move_to_end(key)
            return hit[2]
        if g.d == 0:
            raise ModelError(f"{self.name}: graph {g.name!r} has no features")
        x = g.features.astype(np.float64)
        if depth:
            s = normalized_adjacency(g, self.self_loop)
            for _ in range(depth):
                x = s @ x
        x = np.asarray(x.todense()) if sp.issparse(x) else np.asarray(x)
        x.setflags(write=False)
        self._cache[key] = (g.indptr, g.features, x)
        while len(self._cache) > 8:
            self._cache.popitem(last=False)
        return x

    def fit(self, graph: Graph, nodes: np.ndarray, labels: np.ndarray, hparams: Mapping[str, Any], seed: int) -> _LinearFit:
        hp = {**self.defaults, **self.overrides, **hparams}
        nodes = np.asarray(nodes, dtype=np.int64)
        labels = np.asarray(labels, dtype=np.int64)
        if nodes.size == 0:
            raise ModelError(f"{self.name}: no training nodes")
        xt = self.propagate(graph, int(hp["depth"]))
        x = xt[nodes]
        k = graph.k
        y = np.zeros((nodes.size, k))
        y[np.arange(nodes.size), labels] = 1.0
        rng = np.random.default_rng(seed)
        w = np.zeros((xt.shape[1], k))
        b = np.zeros(k)
        lr, l2, p = float(hp["lr"]), float(hp["l2"]), float(hp["dropout"])
        for _ in range(int(hp["epochs"])):
            xe = x
            if p > 0:
                xe = x * (rng.random(x.shape) >= p) / (1.0 - p)
            z = xe @ w + b
            z -= z.max(axis=1, keepdims=True)
            e = np.exp(z)
            err = e / e.sum(axis=1, keepdims=True) - y
            w -= lr * (xe.T @ err / nodes.size + l2 * w)
            b -= lr * err.mean(axis=0)
        if not np.all(np.isfinite(w)):
            raise ModelError(f"{self.name}: training diverged (lr={lr})")
        return _LinearFit(w, b, xt)

    def predict(self, fitted: _LinearFit, nodes: np.ndarray) -> np.ndarray:
        return np.argmax(fitted.scores(np.asarray(nodes, dtype=np.int64)), axis=1)


class MajorityModel:
    """Predicts the most frequent training label everywhere (lowest id on ties)."""

    def __init__(self, name: str = "majority") -> None:
        self.name = name

    def fit(self, graph, nodes, labels, hparams, seed) -> int:
        return int(np.argmax(np.bincount(np.asarray(labels), minlength=graph.k)))

    def predict(self, fitted: int, nodes: np.ndarray) -> np.ndarray:
        return np.full(np.asarray(nodes).shape[0], fitted, dtype=np.int64)


def reference_model(name: str = "proplin", **overrides: Any) -> PropLin:
    return PropLin(name=name, **overrides)


MODELS = {"proplin": PropLin, "majority": MajorityModel}


def make_model(kind: str, name: str | None = None, **kwargs: Any) -> ModelContract:
    try:
        cls = MODELS[kind]
    except KeyError:
        raise ModelError(f"unknown model {kind!r}; choose from {sorted(MODELS)}") from None
    return cls(name=name or kind, **kwargs)
