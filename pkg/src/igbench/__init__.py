"""i.i.d. graph benchmark toolkit.

- ``graph``: immutable CSR graph, label/edge-category distributions, SBM generator
- ``io``: edge/label/feature text formats and bundle directories
- ``sampler``: random-walk subgraphs with KL acceptance thresholds, dataset statistics
- ``evaluator``: labeled/unlabeled pipeline, grid search, label-leak guard
- ``models``: the model contract and the PropLin reference classifier
- ``overtuning``: pseudo-label search on the validation set and validation-size sweeps
- ``stability``: ranking inversion numbers and accuracy-spread comparison
"""
from .evaluator import (
    EvaluationReport,
    Split,
    accuracy,
    grid_search,
    make_split,
    pipeline_evaluate,
    subdivide,
)
from .graph import (
    DiscreteDistribution,
    Graph,
    edge_category_distribution,
    generate_sbm,
    node_label_distribution,
)
from .guard import AccuracyOracle, LabelLeakError, LabelView
from .io import load_bundle, load_graph, write_graph
from .models import MajorityModel, ModelContract, PropLin, reference_model
from .overtuning import sweep_validation_size, validutil, validutil_partial
from .sampler import (
    SamplerConfig,
    SubgraphSample,
    calibrate_thresholds,
    coverage_rate,
    dataset_stats,
    kl_divergence,
    overlap_rate,
    random_walk_sample,
    reject_sample,
    vertex_sample,
)
from .stability import RankingSequence, inversion_number, stability_experiment, variance_comparison

__version__ = "0.1.0"
