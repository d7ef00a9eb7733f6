"""Compare ranking stability on i.i.d. subgraphs and on splits of one graph."""
from __future__ import annotations

from igbench import SamplerConfig, generate_sbm, reference_model, reject_sample
from igbench.stability import stability_experiment, variance_comparison

parent = generate_sbm([1000] * 4, 0.008, 0.002, 16, 1.0, rng_seed=11, signal_noise=1.5)
samples = reject_sample(parent, SamplerConfig(target_edges=2000, sample_count=30, rng_seed=3))
graphs = [s.to_graph(parent) for s in samples]
single = generate_sbm([250] * 4, 16 / 437.5, 4 / 437.5, 16, 1.0, rng_seed=99, signal_noise=1.5)

models = [(reference_model(f"depth{d}"), {"depth": [d], "epochs": [100]}) for d in (0, 1, 2)]
var = variance_comparison(*models[1], graphs, single, range(30), split_labeled_fraction=0.05)
print(f"accuracy std: i.i.d. subgraphs {var.std_iid:.4f}, random splits {var.std_splits:.4f}")

for label, family, frac in [("i.i.d.", graphs, 0.2), ("splits", [single], 0.05)]:
    res = stability_experiment(models, family, range(5), labeled_fraction=frac)
    print(f"{label:>7}: inversion number {res.inversion_number}, reference ranking {res.rankings[0].models}")
