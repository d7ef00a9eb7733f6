"""Evaluate a model on a family of sampled subgraphs.

Each graph gets its own labeled/unlabeled split; the model tunes itself on
the labeled part only and is scored on the unlabeled part.
"""
from __future__ import annotations

from igbench import SamplerConfig, generate_sbm, pipeline_evaluate, reference_model, reject_sample

parent = generate_sbm([800, 800], 0.01, 0.003, 16, 1.0, rng_seed=2, signal_noise=1.5)
samples = reject_sample(parent, SamplerConfig(target_edges=800, sample_count=20, rng_seed=3))
graphs = [s.to_graph(parent) for s in samples]

grid = {"depth": [0, 1, 2], "l2": [0.0, 5e-3], "epochs": [100]}
report = pipeline_evaluate(reference_model(), grid, graphs, labeled_fraction=0.2, valid_fraction=0.5, rng_seed=0)
print(f"accuracy {report.mean:.4f} +/- {report.std:.4f} over {len(graphs)} subgraphs")
for i, (acc, hp) in enumerate(zip(report.per_graph_accuracy[:5], report.best_hparams_per_graph)):
    print(f"  graph {i}: {acc:.3f} with depth={hp['depth']} l2={hp['l2']}")
