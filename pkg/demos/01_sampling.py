"""Draw i.i.d. random-walk subgraphs from one large synthetic graph.

We calibrate KL thresholds from a pilot run, reject-sample 50 subgraphs,
and compare their label statistics with an unthresholded run.
"""
from __future__ import annotations

from igbench import SamplerConfig, calibrate_thresholds, dataset_stats, generate_sbm, reject_sample

parent = generate_sbm([500, 500, 500], 0.02, 0.004, 16, 1.0, rng_seed=0)
print(parent)

cfg = SamplerConfig(target_edges=500, sample_count=50, rng_seed=1)
node_thr, edge_thr = calibrate_thresholds(parent, cfg, pilot_count=100, percentile=25)
print(f"thresholds: node KL <= {node_thr:.5f}, edge KL <= {edge_thr:.5f}")

for label, c in [("unthresholded", cfg), ("thresholded", SamplerConfig(500, node_thr, edge_thr, 50, 1000, 1))]:
    stats = dataset_stats(reject_sample(parent, c), parent)
    print(f"{label:>14}: node KL {stats.mean_node_kl:.5f}  edge KL {stats.mean_edge_kl:.5f}  "
          f"overlap {stats.overlap_rate:.3f}  coverage {stats.coverage_rate:.3f}  "
          f"nodes {stats.mean_nodes:.0f} +/- {stats.std_nodes:.0f}")
