"""Command-line interface.

Subcommands: ingest, precompute, train, splits, grid, study, ablate, sweep,
alphas. Every command writes machine-readable JSON/CSV (bit-identical on
re-runs with the same recorded config) plus a human summary on stdout.
Exit codes: 0 success, 1 trial failure, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

from .data import (
    DEFAULT_FRACTIONS,
    DatasetError,
    ingestion_report,
    load_dataset,
    make_random_split,
    parse_split_file,
    split_fractions_by_class,
    write_split_file,
    dataset_hash,
)
from .harness import (
    SETTING_ALL,
    SETTING_SINGLE,
    SETTING_SUB,
    TrainConfig,
    TrainDiverged,
    ablation_run,
    export_alpha_report,
    feature_cache_path,
    feature_setting_study,
    full_search_space,
    grid_search,
    hop_features_for,
    hop_sweep,
    load_or_compute_features,
    mlp_search_space,
    result_basename,
    run_splits,
    small_search_space,
    write_csv,
    write_json,
)
from .hops import (
    MODE_BOTH,
    MODE_NOLOOP_ONLY,
    MODE_SELF_ONLY,
    CacheError,
    load_feature_cache,
    save_feature_cache,
)
from .rng import derive_seed

DATA_ROOT_ENV = "FSGNN_DATA_ROOT"

EXIT_OK = 0
EXIT_TRIAL = 1
EXIT_INPUT = 2

CLI_MODES = {"all": MODE_BOTH, "homo": MODE_SELF_ONLY, "hetero": MODE_NOLOOP_ONLY}

# Published best settings of the 3-hop and 8-hop all-feature models, keyed by
# dataset name: (wd_sca, lr_sca, wd_fc1, wd_fc2, lr_fc, dropout).
PRESETS = {
    "table8": {
        "cora": (0.1, 0.01, 0.001, 0.0001, 0.01, 0.6),
        "citeseer": (0.0001, 0.005, 0.001, 0.0, 0.01, 0.5),
        "pubmed": (0.01, 0.005, 0.0001, 0.0001, 0.01, 0.7),
        "chameleon": (0.1, 0.005, 0.0, 0.0, 0.005, 0.5),
        "wisconsin": (0.0001, 0.01, 0.001, 0.0001, 0.01, 0.5),
        "texas": (0.001, 0.01, 0.001, 0.0, 0.01, 0.7),
        "cornell": (0.0, 0.01, 0.001, 0.001, 0.01, 0.5),
        "squirrel": (0.1, 0.04, 0.0, 0.001, 0.01, 0.7),
        "actor": (0.0, 0.04, 0.001, 0.0001, 0.01, 0.7),
    },
    "table9": {
        "cora": (0.1, 0.02, 0.001, 0.0001, 0.01, 0.6),
        "citeseer": (0.0001, 0.01, 0.001, 0.0001, 0.01, 0.5),
        "pubmed": (0.01, 0.02, 0.0001, 0.0, 0.005, 0.7),
        "chameleon": (0.1, 0.01, 0.0, 0.0, 0.005, 0.5),
        "wisconsin": (0.001, 0.02, 0.001, 0.0001, 0.01, 0.5),
        "texas": (0.01, 0.01, 0.001, 0.0, 0.01, 0.7),
        "cornell": (0.0, 0.01, 0.001, 0.0001, 0.01, 0.5),
        "squirrel": (0.1, 0.02, 0.0, 0.0001, 0.01, 0.5),
        "actor": (0.0001, 0.04, 0.001, 0.0001, 0.01, 0.7),
    },
}

SPACES = {"full": full_search_space, "mlp": mlp_search_space, "small": small_search_space}


def _default_tag() -> str:
    return time.strftime("%Y%m%d-%H%M%S", time.gmtime())


def _resolve_dataset_dir(spec: str) -> Path:
    path = Path(spec)
    if path.is_dir():
        return path
    root = os.environ.get(DATA_ROOT_ENV)
    if root and (Path(root) / spec).is_dir():
        return Path(root) / spec
    raise DatasetError(
        f"dataset {spec!r} not found (not a directory, and not under ${DATA_ROOT_ENV})"
    )


def _load_bundle(args):
    directory = _resolve_dataset_dir(args.dataset)
    return load_dataset(directory), directory


def _parse_fractions(text: str):
    parts = [float(t) for t in text.split(",")]
    if len(parts) != 3:
        raise DatasetError(f"--fractions needs 3 comma-separated values, got {text!r}")
    return tuple(parts)


def _get_splits(args, bundle):
    """Split files when given, stratified random splits otherwise."""
    files = list(getattr(args, "split_file", None) or [])
    if files:
        splits = [parse_split_file(f, bundle.num_nodes) for f in files]
        provenance = {"files": [str(f) for f in files]}
    else:
        n = getattr(args, "n_splits", 1)
        seed = getattr(args, "split_seed", 0)
        fractions = _parse_fractions(getattr(args, "fractions", "0.48,0.32,0.2"))
        splits = [
            make_random_split(
                bundle.graph.labels, fractions, seed=derive_seed(seed, "split", i)
            )
            for i in range(n)
        ]
        provenance = {"generated": {"n": n, "seed": seed, "fractions": list(fractions)}}
    return splits, provenance


def _assemble_config(args, dataset_name: str) -> TrainConfig:
    cfg = TrainConfig()
    if getattr(args, "preset", None):
        table = PRESETS[args.preset]
        key = dataset_name.lower()
        if key not in table:
            raise DatasetError(
                f"preset {args.preset!r} has no entry for dataset {dataset_name!r}"
            )
        wd_sca, lr_sca, wd_fc1, wd_fc2, lr_fc, dropout = table[key]
        cfg = replace(
            cfg, wd_sca=wd_sca, lr_sca=lr_sca, wd_fc1=wd_fc1, wd_fc2=wd_fc2,
            lr_fc=lr_fc, dropout=dropout,
        )
    overrides = {}
    for flag, field_name in (
        ("lr_fc", "lr_fc"), ("lr_sca", "lr_sca"), ("wd_fc1", "wd_fc1"),
        ("wd_fc2", "wd_fc2"), ("wd_sca", "wd_sca"), ("dropout", "dropout"),
        ("hidden", "hidden"), ("patience", "patience"), ("max_epochs", "max_epochs"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[field_name] = value
    cfg = replace(
        cfg,
        hops=args.hops,
        loop_mode=CLI_MODES[args.mode],
        aggregation=args.agg,
        soft_selection=not getattr(args, "no_soft_selection", False),
        shared_w0=getattr(args, "shared_w0", False),
        l2_norm=not getattr(args, "no_l2_norm", False),
        hidden_relu=not getattr(args, "no_relu", False),
        seed=args.seed,
        **overrides,
    )
    cfg.validate()
    return cfg


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _features(args, bundle):
    cache_dir = getattr(args, "cache_dir", None)
    mode = CLI_MODES[args.mode]
    return load_or_compute_features(bundle, args.hops, mode, cache_dir)


def cmd_ingest(args) -> int:
    bundle, directory = _load_bundle(args)
    split = None
    if args.split_file:
        split = parse_split_file(args.split_file, bundle.num_nodes)
    report = ingestion_report(bundle, split)
    out = _outdir(args)
    path = out / f"{bundle.name}_ingest.json"
    write_json(path, report)
    print(
        f"{bundle.name}: nodes={report['nodes']} edges={report['edges']} "
        f"features={report['features']} classes={report['classes']} "
        f"homophily={report['homophily_ratio']:.4f}"
    )
    print(f"wrote {path}")
    return EXIT_OK


def cmd_precompute(args) -> int:
    bundle, directory = _load_bundle(args)
    mode = CLI_MODES[args.mode]
    cache_dir = Path(args.cache_dir) if args.cache_dir else directory / "cache"
    cache_dir.mkdir(parents=True, exist_ok=True)
    path = feature_cache_path(cache_dir, mode, args.hops)
    digest = dataset_hash(bundle)
    if path.is_file():
        load_feature_cache(path, digest, args.hops, mode)
        print(f"cache valid, skipped: {path}")
        return EXIT_OK
    fs = hop_features_for(bundle, args.hops, mode)
    save_feature_cache(fs, path, digest, args.hops, mode)
    print(f"wrote {path} ({fs.num_branches} branch matrices)")
    return EXIT_OK


def cmd_train(args) -> int:
    bundle, _ = _load_bundle(args)
    cfg = _assemble_config(args, bundle.name)
    splits, provenance = _get_splits(args, bundle)
    fs = _features(args, bundle)
    started = time.perf_counter()
    result = run_splits(cfg, bundle, splits, fs=fs)
    elapsed = time.perf_counter() - started
    tag = args.tag or _default_tag()
    base = result_basename(bundle.name, args.mode, args.hops, tag)
    payload = {
        "command": "train",
        "dataset": bundle.name,
        "mode": args.mode,
        "hops": args.hops,
        "tag": tag,
        "config": cfg.to_dict(),
        "splits": provenance,
        "result": result.to_dict(),
    }
    out = _outdir(args)
    write_json(out / f"{base}_train.json", payload)
    write_csv(
        out / f"{base}_train.csv",
        ["split", "test_acc", "best_val_acc", "best_epoch", "epochs_run"],
        [
            (i, r.test_acc, r.best_val_acc, r.best_epoch, r.epochs_run)
            for i, r in enumerate(result.results)
        ],
    )
    print(
        f"{bundle.name} {args.mode} {args.hops}-hop: "
        f"test acc {100 * result.mean_test_acc:.2f} +- {100 * result.std_test_acc:.2f} "
        f"over {len(splits)} split(s) [{elapsed:.1f}s]"
    )
    print(f"wrote {out / (base + '_train.json')}")
    return EXIT_OK


def cmd_splits(args) -> int:
    bundle, _ = _load_bundle(args)
    fractions = _parse_fractions(args.fractions)
    out = _outdir(args)
    rows = []
    for i in range(args.n):
        split = make_random_split(
            bundle.graph.labels, fractions, seed=derive_seed(args.seed, "split", i)
        )
        path = out / f"{bundle.name}_split_{i:02d}.txt"
        write_split_file(path, split)
        for cls, fracs in split_fractions_by_class(bundle.graph.labels, split).items():
            rows.append((i, cls, fracs["train"], fracs["val"], fracs["test"]))
    csv_path = out / f"{bundle.name}_splits.csv"
    write_csv(csv_path, ["split", "class", "train_frac", "val_frac", "test_frac"], rows)
    print(f"wrote {args.n} split files and {csv_path}")
    return EXIT_OK


def cmd_grid(args) -> int:
    bundle, _ = _load_bundle(args)
    base_cfg = _assemble_config(args, bundle.name)
    splits, provenance = _get_splits(args, bundle)
    fs = _features(args, bundle)
    axes = SPACES[args.space]()
    result = grid_search(axes, base_cfg, bundle, splits, fs=fs, jobs=args.jobs)
    tag = args.tag or _default_tag()
    base = result_basename(bundle.name, args.mode, args.hops, tag)
    payload = {
        "command": "grid",
        "dataset": bundle.name,
        "mode": args.mode,
        "hops": args.hops,
        "tag": tag,
        "space": args.space,
        "base_config": base_cfg.to_dict(),
        "splits": provenance,
        "result": result.to_dict(),
    }
    out = _outdir(args)
    write_json(out / f"{base}_grid.json", payload)
    write_csv(
        out / f"{base}_grid.csv",
        ["rank", "config_index", "mean_val_acc", "mean_test_acc", "std_test_acc", "overrides"],
        [
            (rank, e.config_index, e.mean_val_acc, e.mean_test_acc, e.std_test_acc,
             json.dumps(e.overrides, sort_keys=True).replace(",", ";"))
            for rank, e in enumerate(result.ranked)
        ],
    )
    best = result.best
    print(
        f"best of {len(result.ranked)} configs: val {100 * best.mean_val_acc:.2f}, "
        f"test {100 * best.mean_test_acc:.2f} +- {100 * best.std_test_acc:.2f}"
    )
    print(f"wrote {out / (base + '_grid.json')}")
    return EXIT_OK


def cmd_study(args) -> int:
    bundle, _ = _load_bundle(args)
    splits, provenance = _get_splits(args, bundle)
    study_agg = args.agg
    args.agg = study_agg or "cat"  # placeholder; the study sets aggregation per row
    base_cfg = _assemble_config(args, bundle.name)
    axes = SPACES[args.space]() if args.space else None
    fs = hop_features_for(bundle, args.hops, MODE_BOTH)
    result = feature_setting_study(
        bundle, splits, args.setting, agg=study_agg, hops=args.hops,
        base_cfg=base_cfg, axes=axes, fs=fs, jobs=args.jobs,
    )
    tag = args.tag or _default_tag()
    base = result_basename(bundle.name, "all", args.hops, tag)
    payload = {
        "command": "study",
        "dataset": bundle.name,
        "setting": args.setting,
        "hops": args.hops,
        "tag": tag,
        "base_config": base_cfg.to_dict(),
        "splits": provenance,
        "result": result.to_dict(),
    }
    out = _outdir(args)
    write_json(out / f"{base}_study_{args.setting}.json", payload)
    write_csv(
        out / f"{base}_study_{args.setting}.csv",
        ["setting", "aggregation", "mask", "branches", "mean_val_acc", "mean_test_acc", "std_test_acc"],
        [
            (r.setting, r.aggregation, r.mask, "|".join(r.branches),
             r.mean_val_acc, r.mean_test_acc, r.std_test_acc)
            for r in result.rows
        ],
    )
    for agg, row in result.best.items():
        print(
            f"{args.setting}/{agg}: best branches {row.branches} "
            f"test {100 * row.mean_test_acc:.2f}"
        )
    print(f"wrote {out / (base + f'_study_{args.setting}.json')}")
    return EXIT_OK


def cmd_ablate(args) -> int:
    bundle, _ = _load_bundle(args)
    splits, provenance = _get_splits(args, bundle)
    base_cfg = _assemble_config(args, bundle.name)
    axes = SPACES[args.space]()
    fs = _features(args, bundle)
    rows = ablation_run(bundle, splits, axes, base_cfg=base_cfg, fs=fs, jobs=args.jobs)
    tag = args.tag or _default_tag()
    base = result_basename(bundle.name, args.mode, args.hops, tag)
    payload = {
        "command": "ablate",
        "dataset": bundle.name,
        "hops": args.hops,
        "tag": tag,
        "space": args.space,
        "base_config": base_cfg.to_dict(),
        "splits": provenance,
        "result": [r.to_dict() for r in rows],
    }
    out = _outdir(args)
    write_json(out / f"{base}_ablate.json", payload)
    write_csv(
        out / f"{base}_ablate.csv",
        ["variant", "mean_acc", "std_acc"],
        [(r.variant, r.mean_acc, r.std_acc) for r in rows],
    )
    for r in rows:
        print(f"{r.variant}: {100 * r.mean_acc:.2f} +- {100 * r.std_acc:.2f}")
    print(f"wrote {out / (base + '_ablate.json')}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    bundle, _ = _load_bundle(args)
    splits, provenance = _get_splits(args, bundle)
    hops_list = [int(t) for t in args.hops_list.split(",")]
    args.hops = hops_list[0]
    base_cfg = _assemble_config(args, bundle.name)
    rows = hop_sweep(bundle, splits, hops_list, base_cfg=base_cfg)
    tag = args.tag or _default_tag()
    base = result_basename(bundle.name, args.mode, hops_list[-1], tag)
    payload = {
        "command": "sweep",
        "dataset": bundle.name,
        "hops_list": hops_list,
        "tag": tag,
        "base_config": base_cfg.to_dict(),
        "splits": provenance,
        "result": [r.to_dict() for r in rows],
    }
    out = _outdir(args)
    write_json(out / f"{base}_sweep.json", payload)
    write_csv(
        out / f"{base}_sweep.csv",
        ["hops", "branches", "mean_test_acc", "std_test_acc"],
        [(r.hops, r.branches, r.mean_test_acc, r.std_test_acc) for r in rows],
    )
    for r in rows:
        print(f"hops={r.hops} ({r.branches} branches): {100 * r.mean_test_acc:.2f}")
    print(f"wrote {out / (base + '_sweep.csv')}")
    return EXIT_OK


def cmd_alphas(args) -> int:
    results_by_dataset: dict = {}

    class _Stub:
        def __init__(self, labels, alphas):
            self.branch_labels = labels
            self.alphas = alphas

    for path in args.results:
        payload = json.loads(Path(path).read_text())
        if "result" not in payload or "splits" not in payload.get("result", {}):
            raise DatasetError(f"{path}: not a train-command result file")
        name = payload["dataset"]
        for entry in payload["result"]["splits"]:
            results_by_dataset.setdefault(name, []).append(
                _Stub(entry["branch_labels"], entry["alphas"])
            )
    report = export_alpha_report(results_by_dataset)
    out = _outdir(args)
    path = out / f"alphas_{args.tag or _default_tag()}.csv"
    write_csv(
        path,
        ["dataset"] + report.branch_labels,
        [(name, *vector) for name, vector in sorted(report.rows.items())],
    )
    print(f"wrote {path}")
    return EXIT_OK


def _add_common(sub, *, splits=True, model=True):
    sub.add_argument("--dataset", required=True, help="dataset directory or name under $FSGNN_DATA_ROOT")
    sub.add_argument("--out", default="results", help="output directory")
    sub.add_argument("--tag", default=None, help="output name tag (default: UTC timestamp)")
    sub.add_argument("--seed", type=int, default=0)
    if splits:
        sub.add_argument("--split-file", action="append", help="split file (repeatable)")
        sub.add_argument("--n-splits", type=int, default=1, help="random splits when no files given")
        sub.add_argument("--split-seed", type=int, default=0)
        sub.add_argument("--fractions", default="0.48,0.32,0.2")
    if model:
        sub.add_argument("--hops", type=int, default=3)
        sub.add_argument("--mode", choices=sorted(CLI_MODES), default="all")
        sub.add_argument("--agg", choices=["cat", "sum"], default="cat")
        sub.add_argument("--preset", choices=sorted(PRESETS), default=None)
        sub.add_argument("--cache-dir", default=None, help="read hop features from this cache directory")
        for flag in ("--lr-fc", "--lr-sca", "--wd-fc1", "--wd-fc2", "--wd-sca", "--dropout"):
            sub.add_argument(flag, type=float, default=None)
        sub.add_argument("--hidden", type=int, default=None)
        sub.add_argument("--patience", type=int, default=None)
        sub.add_argument("--max-epochs", type=int, default=None)
        sub.add_argument("--no-soft-selection", action="store_true")
        sub.add_argument("--shared-w0", action="store_true")
        sub.add_argument("--no-l2-norm", action="store_true")
        sub.add_argument("--no-relu", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fsgnn",
        description="Feature-selection GNN: precomputed hop features, gated branch selection, reproducible experiments.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("ingest", help="parse and validate a dataset, write a report")
    _add_common(p, splits=False, model=False)
    p.add_argument("--split-file", default=None, help="also report per-class split fractions")
    p.set_defaults(func=cmd_ingest)

    p = subs.add_parser("precompute", help="materialize the hop-feature cache")
    _add_common(p, splits=False, model=False)
    p.add_argument("--hops", type=int, default=3)
    p.add_argument("--mode", choices=sorted(CLI_MODES), default="all")
    p.add_argument("--cache-dir", default=None)
    p.set_defaults(func=cmd_precompute)

    p = subs.add_parser("train", help="train on one or more splits")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("splits", help="generate stratified random split files")
    _add_common(p, splits=False, model=False)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--fractions", default="0.48,0.32,0.2")
    p.set_defaults(func=cmd_splits)

    p = subs.add_parser("grid", help="hyperparameter grid search")
    _add_common(p)
    p.add_argument("--space", choices=sorted(SPACES), default="small")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_grid)

    p = subs.add_parser("study", help="single/all/sub feature-setting study")
    _add_common(p)
    p.add_argument("--setting", choices=[SETTING_SINGLE, SETTING_ALL, SETTING_SUB], required=True)
    p.add_argument("--space", choices=sorted(SPACES), default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_study, agg=None)

    p = subs.add_parser("ablate", help="design-variant ablation over a grid")
    _add_common(p)
    p.add_argument("--space", choices=sorted(SPACES), default="small")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_ablate)

    p = subs.add_parser("sweep", help="accuracy vs hop depth")
    _add_common(p)
    p.add_argument("--hops-list", default="3,8,16,32")
    p.set_defaults(func=cmd_sweep)

    p = subs.add_parser("alphas", help="aggregate learned gate values into a CSV matrix")
    p.add_argument("--results", nargs="+", required=True, help="train-command JSON files")
    p.add_argument("--out", default="results")
    p.add_argument("--tag", default=None)
    p.set_defaults(func=cmd_alphas)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except TrainDiverged as exc:
        print(f"trial failed: {exc}", file=sys.stderr)
        return EXIT_TRIAL
    except (DatasetError, CacheError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
