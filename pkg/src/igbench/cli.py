"""Command-line front end.

Subcommands: generate, sample, stats, eval, validutil, sweep, stability.
Every command writes JSON reports into ``--out``; reports embed the
resolved configuration and keep the wall-clock time under ``timestamp``
so the rest of the file is reproducible byte for byte.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np

from .evaluator import PipelineError, SplitError, load_grid, make_split, pipeline_evaluate, subdivide
from .graph import GenerationError, GraphIntegrityError, generate_sbm
from .guard import LabelLeakError
from .io import GraphFormatError, load_bundle, write_graph, write_json
from .models import ModelError, make_model
from .overtuning import sweep_validation_size, validutil_partial
from .sampler import (
    SamplerConfig,
    SamplingError,
    ThresholdInfeasibleError,
    WalkExhaustedError,
    dataset_stats,
    pilot_kls,
    read_samples,
    reject_sample,
    sample_dirs,
    write_samples,
)
from .stability import stability_experiment, variance_comparison

log = logging.getLogger("igbench")

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_MODEL = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


def _config(args: argparse.Namespace) -> dict[str, Any]:
    out = {}
    for key, value in sorted(vars(args).items()):
        if key in ("func", "out", "verbose"):
            continue
        if isinstance(value, Path):
            value = str(value.resolve())
        out[key] = value
    return out


def _report(path: Path, payload: dict[str, Any], args: argparse.Namespace) -> None:
    payload = dict(payload)
    payload["config"] = _config(args)
    payload["timestamp"] = datetime.now(timezone.utc).isoformat()
    path.parent.mkdir(parents=True, exist_ok=True)
    write_json(path, payload)
    log.info("wrote %s", path)


def _require_dir(path: Path, what: str) -> Path:
    if not path.is_dir():
        raise ConfigError(f"{what} {path} is not a directory")
    return path


def _graphs_from(directory: Path):
    _require_dir(directory, "sample directory")
    try:
        pairs = read_samples(directory)
    except FileNotFoundError:
        pairs = [(None, load_bundle(d)) for d in sample_dirs(directory)]
    if not pairs:
        raise ConfigError(f"no graph bundles under {directory}")
    return pairs


def _json_arg(value: str | None) -> dict[str, Any]:
    if not value:
        return {}
    path = Path(value)
    text = path.read_text(encoding="utf-8") if path.exists() else value
    payload = json.loads(text)
    if not isinstance(payload, dict):
        raise ConfigError("expected a JSON object")
    return payload


def _int_list(value: str) -> list[int]:
    return [int(x) for x in value.split(",") if x.strip()]


def _split_for(g, args):
    split = make_split(g, args.labeled_fraction, args.seed)
    return subdivide(split, args.valid_fraction, args.seed + 1)


def cmd_generate(args: argparse.Namespace) -> int:
    g = generate_sbm(
        _int_list(args.blocks), args.p_in, args.p_out, args.feature_dim, args.feature_signal, args.seed,
        signal_noise=args.signal_noise, name=args.name,
    )
    write_graph(g, args.out)
    return EXIT_OK


def cmd_sample(args: argparse.Namespace) -> int:
    g = load_bundle(_require_dir(args.graph, "graph bundle"))
    cfg = SamplerConfig(
        target_edges=args.edges,
        node_kl_threshold=args.node_kl_thr,
        edge_kl_threshold=args.edge_kl_thr,
        sample_count=args.count,
        max_attempts_per_sample=args.max_attempts,
        rng_seed=args.seed,
    )
    pilot = None
    if args.calibrate_percentile is not None:
        node, edge = pilot_kls(g, cfg, args.pilot_count, args.workers)
        cfg = dataclasses.replace(
            cfg,
            node_kl_threshold=float(np.percentile(node, args.calibrate_percentile)),
            edge_kl_threshold=float(np.percentile(edge, args.calibrate_percentile)),
        )
        pilot = {"percentile": args.calibrate_percentile, "node_kl": node.tolist(), "edge_kl": edge.tolist()}
    samples = reject_sample(g, cfg, args.workers)
    write_samples(samples, g, args.out, args.seed)
    stats = dataset_stats(samples, g, args.overlap) if len(samples) >= 2 else None
    _report(
        args.out / "stats.json",
        {
            **(stats.to_dict() if stats else {}),
            "sample_count": len(samples),
            "target_edges": cfg.target_edges,
            "node_kl_threshold": cfg.node_kl_threshold,
            "edge_kl_threshold": cfg.edge_kl_threshold,
            "acceptance_rate": len(samples) / sum(s.attempts for s in samples),
            "pilot": pilot,
        },
        args,
    )
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    parent = load_bundle(_require_dir(args.graph, "graph bundle"))
    pairs = _graphs_from(args.samples)
    samples = [s for s, _ in pairs if s is not None]
    if len(samples) < 2:
        raise ConfigError("stats needs at least two sample bundles with provenance.json")
    _report(args.out / "stats.json", dataset_stats(samples, parent, args.overlap).to_dict(), args)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    grid = load_grid(args.grid)
    graphs = [g for _, g in _graphs_from(args.samples)]
    model = make_model(args.model)
    report = pipeline_evaluate(
        model, grid, graphs, args.labeled_fraction, args.valid_fraction, args.seed,
        workers=args.workers, dataset_name=args.samples.name,
    )
    _report(args.out / "report.json", report.to_dict(), args)
    return EXIT_OK


def cmd_validutil(args: argparse.Namespace) -> int:
    g = load_bundle(_require_dir(args.graph, "graph bundle"))
    grid = load_grid(args.grid)
    split = _split_for(g, args)
    budget = split.valid.size if args.budget is None else args.budget
    res = validutil_partial(
        make_model(args.model), g, split.train, split.valid, split.unlabeled,
        _json_arg(args.base_hparams), grid, args.seed, budget,
    )
    _report(
        args.out / "validutil.json",
        {
            **res.state.to_dict(),
            "test_accuracy": res.test_accuracy,
            "final_hparams": res.final_hparams,
            "final_valid_accuracy": res.final_valid_accuracy,
            "final_grid_scored_on": "the same validation set used for the pseudo-label search",
        },
        args,
    )
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    g = load_bundle(_require_dir(args.graph, "graph bundle"))
    grid = load_grid(args.grid)
    split = _split_for(g, args)
    seeds = list(range(args.seed, args.seed + args.num_seeds))
    rep = sweep_validation_size(make_model(args.model), grid, g, split, _int_list(args.sizes), seeds)
    _report(args.out / "sweep.json", rep.to_dict(), args)
    (args.out / "sweep.tsv").write_text(rep.to_tsv(), encoding="utf-8")
    return EXIT_OK


def _load_models(path: Path):
    entries = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(entries, list) or not entries:
        raise ConfigError(f"{path}: expected a non-empty JSON list of models")
    models = []
    for entry in entries:
        grid = entry["grid"]
        if isinstance(grid, str):
            grid = load_grid(path.parent / grid)
        kind = entry.get("model", "proplin")
        models.append((make_model(kind, entry.get("name", kind), **entry.get("options", {})), grid))
    return models


def cmd_stability(args: argparse.Namespace) -> int:
    models = _load_models(args.models)
    graphs = [g for _, g in _graphs_from(args.samples)]
    seeds = _int_list(args.seeds) if args.seeds else list(range(10))
    res = stability_experiment(models, graphs, seeds, args.labeled_fraction, args.valid_fraction, workers=args.workers)
    payload: dict[str, Any] = {"iid": res.to_dict()}
    if args.single_graph is not None:
        single = load_bundle(_require_dir(args.single_graph, "single graph bundle"))
        split_frac = args.split_labeled_fraction or args.labeled_fraction
        payload["splits"] = stability_experiment(
            models, [single], seeds, split_frac, args.valid_fraction, workers=args.workers
        ).to_dict()
        split_seeds = list(range(args.split_count))
        variance = {
            model.name: variance_comparison(
                model, grid, graphs, single, split_seeds, args.labeled_fraction, args.valid_fraction,
                split_labeled_fraction=split_frac, rng_seed=seeds[0], workers=args.workers,
            ).to_dict()
            for model, grid in models
        }
        _report(args.out / "variance.json", {"models": variance}, args)
    _report(args.out / "stability.json", payload, args)
    return EXIT_OK


def _fraction_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--labeled-fraction", type=float, default=0.2)
    p.add_argument("--valid-fraction", type=float, default=0.5)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="igbench", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic SBM graph bundle")
    p.add_argument("--blocks", default="500,500", help="comma-separated block sizes")
    p.add_argument("--p-in", type=float, default=0.05)
    p.add_argument("--p-out", type=float, default=0.01)
    p.add_argument("--feature-dim", type=int, default=16)
    p.add_argument("--feature-signal", type=float, default=1.0)
    p.add_argument("--signal-noise", type=float, default=0.0)
    p.add_argument("--name", default="sbm")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("sample", help="draw KL-thresholded random-walk subgraphs")
    p.add_argument("--graph", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--edges", type=int, default=5000)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--node-kl-thr", type=float, default=math.inf)
    p.add_argument("--edge-kl-thr", type=float, default=math.inf)
    p.add_argument("--calibrate-percentile", type=float, default=None)
    p.add_argument("--pilot-count", type=int, default=200)
    p.add_argument("--max-attempts", type=int, default=1000)
    p.add_argument("--overlap", choices=["jaccard", "total"], default="jaccard")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("stats", help="dataset statistics for a sample directory")
    p.add_argument("--samples", type=Path, required=True)
    p.add_argument("--graph", type=Path, required=True)
    p.add_argument("--overlap", choices=["jaccard", "total"], default="jaccard")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("eval", help="labeled/unlabeled pipeline over sample graphs")
    p.add_argument("--model", default="proplin")
    p.add_argument("--grid", type=Path, required=True)
    p.add_argument("--samples", type=Path, required=True)
    _fraction_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("validutil", help="pseudo-label search on the validation set")
    p.add_argument("--model", default="proplin")
    p.add_argument("--graph", type=Path, required=True)
    p.add_argument("--grid", type=Path, required=True, help="final grid searched after pseudo-labels are fixed")
    p.add_argument("--base-hparams", default=None, help="JSON object or path")
    _fraction_args(p)
    p.add_argument("--budget", type=int, default=None, help="validation nodes to tune (default: all)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_validutil)

    p = sub.add_parser("sweep", help="test accuracy versus validation-set size")
    p.add_argument("--model", default="proplin")
    p.add_argument("--graph", type=Path, required=True)
    p.add_argument("--grid", type=Path, required=True)
    p.add_argument("--sizes", default="10,50,100,200")
    p.add_argument("--num-seeds", type=int, default=20)
    _fraction_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("stability", help="ranking inversions and accuracy spread")
    p.add_argument("--models", type=Path, required=True, help="JSON list of {name, model, grid}")
    p.add_argument("--samples", type=Path, required=True)
    p.add_argument("--seeds", default=None, help="comma-separated seeds (default 0..9)")
    p.add_argument("--single-graph", type=Path, default=None)
    p.add_argument("--split-count", type=int, default=100)
    p.add_argument("--split-labeled-fraction", type=float, default=None)
    _fraction_args(p)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_stability)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ThresholdInfeasibleError, WalkExhaustedError) as exc:
        print(f"igbench: sampling infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ModelError, LabelLeakError, PipelineError) as exc:
        print(f"igbench: model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (
        ConfigError, SplitError, SamplingError, GraphFormatError, GraphIntegrityError, GenerationError,
        FileNotFoundError, KeyError, ValueError,
    ) as exc:
        print(f"igbench: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
