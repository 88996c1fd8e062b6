"""Training loop, grid search, and the reproduction studies.

Training is full-batch and transductive: every epoch takes one Adam step
over the training rows, evaluates validation accuracy in eval mode, and
keeps the best checkpoint (ties broken by lower validation loss). Test
accuracy is computed exactly once, on the restored best parameters.
"""

from __future__ import annotations

import itertools
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .data import DatasetBundle, SplitSpec, dataset_hash, validate_split
from .graph import sym_normalize
from .hops import (
    MODE_BOTH,
    MODE_NOLOOP_ONLY,
    MODE_SELF_ONLY,
    MODES,
    HopFeatureSet,
    enumerate_subset_masks,
    generate_hop_features,
    load_feature_cache,
    row_normalize,
    select_features,
)
from .model import (
    AGG_CAT,
    AGG_SUM,
    ModelVariant,
    NumericalError,
    forward_mats,
    get_alphas,
    init_params,
    loss_and_grads_mats,
    predict,
)
from .nn import AdamState, adam_step, softmax_xent_fwd
from .rng import RngStream, derive_seed

SETTING_SINGLE = "single"
SETTING_ALL = "all"
SETTING_SUB = "sub"

ABLATION_VARIANTS = (
    ("proposed", {}),
    ("no_soft_selection", {"soft_selection": False}),
    ("shared_w0", {"shared_w0": True}),
    ("no_l2_norm", {"l2_norm": False}),
)


class TrainDiverged(RuntimeError):
    """Loss became NaN/Inf; carries the epoch and the offending config."""

    def __init__(self, epoch: int, cfg: "TrainConfig", split_index: int | None = None):
        self.epoch = epoch
        self.cfg = cfg
        self.split_index = split_index
        where = f" (split {split_index})" if split_index is not None else ""
        super().__init__(
            f"non-finite loss at epoch {epoch}{where}; config: {json.dumps(cfg.to_dict(), sort_keys=True)}"
        )


@dataclass
class TrainConfig:
    """One trial's hyperparameters, model flags, and seed."""

    lr_fc: float = 0.01
    lr_sca: float = 0.01
    wd_fc1: float = 0.0
    wd_fc2: float = 0.0
    wd_sca: float = 0.0
    dropout: float = 0.5
    hidden: int = 64
    hops: int = 3
    loop_mode: str = MODE_BOTH
    aggregation: str = AGG_CAT
    soft_selection: bool = True
    shared_w0: bool = False
    l2_norm: bool = True
    hidden_relu: bool = True
    max_epochs: int = 1000
    patience: int = 100
    seed: int = 0

    def validate(self) -> "TrainConfig":
        if self.lr_fc <= 0 or self.lr_sca <= 0:
            raise ValueError("learning rates must be positive")
        if min(self.wd_fc1, self.wd_fc2, self.wd_sca) < 0:
            raise ValueError("weight decays must be nonnegative")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.hidden < 1 or self.hops < 1:
            raise ValueError("hidden width and hop count must be >= 1")
        if self.patience < 1 or self.max_epochs < 1:
            raise ValueError("patience and max_epochs must be >= 1")
        if self.loop_mode not in MODES:
            raise ValueError(f"unknown loop mode {self.loop_mode!r}")
        if self.aggregation not in (AGG_CAT, AGG_SUM):
            raise ValueError(f"unknown aggregation {self.aggregation!r}")
        return self

    def variant(self) -> ModelVariant:
        return ModelVariant(
            soft_selection=self.soft_selection,
            shared_w0=self.shared_w0,
            l2_norm=self.l2_norm,
            hidden_relu=self.hidden_relu,
            aggregation=self.aggregation,
        )

    def to_dict(self) -> dict:
        return {
            "lr_fc": self.lr_fc,
            "lr_sca": self.lr_sca,
            "wd_fc1": self.wd_fc1,
            "wd_fc2": self.wd_fc2,
            "wd_sca": self.wd_sca,
            "dropout": self.dropout,
            "hidden": self.hidden,
            "hops": self.hops,
            "loop_mode": self.loop_mode,
            "aggregation": self.aggregation,
            "soft_selection": self.soft_selection,
            "shared_w0": self.shared_w0,
            "l2_norm": self.l2_norm,
            "hidden_relu": self.hidden_relu,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "seed": self.seed,
        }


@dataclass
class TrainResult:
    """Learning curves plus the restored-best test accuracy and gate values.

    ``wall_time`` is informational only and is excluded from ``to_dict`` so
    emitted result files stay bit-identical across re-runs.
    """

    config: TrainConfig
    branch_labels: list
    train_losses: list
    val_accs: list
    val_losses: list
    best_epoch: int
    best_val_acc: float
    best_val_loss: float
    epochs_run: int
    test_acc: float
    alphas: list
    wall_time: float

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "branch_labels": list(self.branch_labels),
            "train_losses": [float(x) for x in self.train_losses],
            "val_accs": [float(x) for x in self.val_accs],
            "val_losses": [float(x) for x in self.val_losses],
            "best_epoch": int(self.best_epoch),
            "best_val_acc": float(self.best_val_acc),
            "best_val_loss": float(self.best_val_loss),
            "epochs_run": int(self.epochs_run),
            "test_acc": float(self.test_acc),
            "alphas": [float(a) for a in self.alphas],
        }


class EarlyStopper:
    """Best-checkpoint tracking with a patience counter.

    Improvement means strictly higher validation accuracy, or equal accuracy
    with strictly lower validation loss. ``should_stop`` turns true once
    ``patience`` consecutive epochs fail to improve.
    """

    def __init__(self, patience: int):
        self.patience = patience
        self.best_acc = -np.inf
        self.best_loss = np.inf
        self.best_epoch = 0
        self.epoch = 0
        self.stale = 0

    def update(self, val_acc: float, val_loss: float) -> bool:
        self.epoch += 1
        improved = val_acc > self.best_acc or (
            val_acc == self.best_acc and val_loss < self.best_loss
        )
        if improved:
            self.best_acc = val_acc
            self.best_loss = val_loss
            self.best_epoch = self.epoch
            self.stale = 0
        else:
            self.stale += 1
        return improved

    @property
    def should_stop(self) -> bool:
        return self.stale >= self.patience


def hop_features_for(bundle: DatasetBundle, hops: int, mode: str = MODE_BOTH) -> HopFeatureSet:
    """Row-normalize raw features once, then propagate under the operators
    the mode needs."""
    x = row_normalize(bundle.features)
    a_sym = (
        sym_normalize(bundle.graph, self_loops=False)
        if mode in (MODE_BOTH, MODE_NOLOOP_ONLY)
        else None
    )
    a_tilde = (
        sym_normalize(bundle.graph, self_loops=True)
        if mode in (MODE_BOTH, MODE_SELF_ONLY)
        else None
    )
    return generate_hop_features(x, a_sym, a_tilde, hops, mode)


def feature_cache_path(cache_dir, mode: str, hops: int) -> Path:
    return Path(cache_dir) / f"hop_features_{mode}_{hops}hop.bin"


def load_or_compute_features(
    bundle: DatasetBundle, hops: int, mode: str, cache_dir=None
) -> HopFeatureSet:
    """Use a cache file when one exists (validating its key), else compute.

    A present-but-stale cache raises rather than silently recomputing.
    """
    if cache_dir is not None:
        path = feature_cache_path(cache_dir, mode, hops)
        if path.is_file():
            return load_feature_cache(path, dataset_hash(bundle), hops, mode)
    return hop_features_for(bundle, hops, mode)


def _sliced(mats, idx):
    return [np.ascontiguousarray(m[idx]) for m in mats]


def _param_groups(params, variant, cfg):
    tensors = params.tensors()
    fc1 = [k for k in tensors if k.startswith(("w0.", "b0."))]
    groups = [
        ("fc1", fc1, cfg.lr_fc, cfg.wd_fc1),
        ("fc2", ["w1", "b1"], cfg.lr_fc, cfg.wd_fc2),
    ]
    if variant.soft_selection:
        groups.append(("sca", ["gamma"], cfg.lr_sca, cfg.wd_sca))
    return [(names, [tensors[k] for k in names], lr, wd) for _, names, lr, wd in groups]


def _eval_mats(params, mats, labels, variant):
    logits = forward_mats(params, mats, variant)
    loss, _ = softmax_xent_fwd(logits, labels, np.arange(labels.size))
    acc = float((predict(logits) == labels).mean())
    return acc, loss


def train(
    cfg: TrainConfig, bundle: DatasetBundle, fs: HopFeatureSet, split: SplitSpec
) -> TrainResult:
    """Full-batch training with patience-based early stopping.

    Deterministic: the same config (seed included) reproduces the result
    bit-for-bit. Test rows are touched exactly once, after the best
    validation checkpoint has been restored.
    """
    cfg.validate()
    validate_split(split, bundle.num_nodes)
    if fs.num_nodes != bundle.num_nodes:
        raise ValueError("feature set and dataset disagree on node count")
    started = time.perf_counter()
    variant = cfg.variant()
    labels = bundle.graph.labels
    params = init_params(fs, cfg.hidden, bundle.num_classes, variant, cfg.seed)
    mats = fs.matrices()
    mats_tr = _sliced(mats, split.train_idx)
    mats_va = _sliced(mats, split.val_idx)
    y_tr = labels[split.train_idx]
    y_va = labels[split.val_idx]

    groups = _param_groups(params, variant, cfg)
    states = [AdamState.for_params(tensors) for _, tensors, _, _ in groups]
    drop_rng = RngStream(cfg.seed).derive("dropout")
    stopper = EarlyStopper(cfg.patience)
    best_params = None
    train_losses, val_accs, val_losses = [], [], []

    for epoch in range(1, cfg.max_epochs + 1):
        try:
            loss, grads = loss_and_grads_mats(
                params, mats_tr, y_tr, variant, drop_rng, cfg.dropout
            )
            if not np.isfinite(loss):
                raise TrainDiverged(epoch, cfg)
            for (names, tensors, lr, wd), state in zip(groups, states):
                adam_step(tensors, [grads[k] for k in names], state, lr, wd)
            val_acc, val_loss = _eval_mats(params, mats_va, y_va, variant)
        except NumericalError as exc:
            raise TrainDiverged(epoch, cfg) from exc
        train_losses.append(loss)
        val_accs.append(val_acc)
        val_losses.append(val_loss)
        if stopper.update(val_acc, val_loss):
            best_params = params.copy()
        if stopper.should_stop:
            break

    params = best_params
    mats_te = _sliced(mats, split.test_idx)
    test_acc, _ = _eval_mats(params, mats_te, labels[split.test_idx], variant)
    return TrainResult(
        config=cfg,
        branch_labels=fs.labels(),
        train_losses=train_losses,
        val_accs=val_accs,
        val_losses=val_losses,
        best_epoch=stopper.best_epoch,
        best_val_acc=stopper.best_acc,
        best_val_loss=stopper.best_loss,
        epochs_run=stopper.epoch,
        test_acc=test_acc,
        alphas=list(get_alphas(params)),
        wall_time=time.perf_counter() - started,
    )


def evaluate(params, fs: HopFeatureSet, labels, idx, variant: ModelVariant) -> float:
    """Accuracy of the model over the given node indices (eval mode)."""
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("cannot evaluate on an empty index set")
    acc, _ = _eval_mats(params, _sliced(fs.matrices(), idx), np.asarray(labels)[idx], variant)
    return acc


@dataclass
class SplitsResult:
    """Per-split results plus the population mean/std of test accuracy."""

    results: list
    mean_test_acc: float
    std_test_acc: float
    mean_val_acc: float

    def to_dict(self) -> dict:
        return {
            "mean_test_acc": float(self.mean_test_acc),
            "std_test_acc": float(self.std_test_acc),
            "mean_val_acc": float(self.mean_val_acc),
            "splits": [r.to_dict() for r in self.results],
        }


def run_splits(
    cfg: TrainConfig,
    bundle: DatasetBundle,
    splits,
    fs: HopFeatureSet | None = None,
) -> SplitsResult:
    """Train once per split with the same config; aggregate test accuracy."""
    if not splits:
        raise ValueError("need at least one split")
    if fs is None:
        fs = hop_features_for(bundle, cfg.hops, cfg.loop_mode)
    results = []
    for si, split in enumerate(splits):
        try:
            results.append(train(cfg, bundle, fs, split))
        except TrainDiverged as exc:
            raise TrainDiverged(exc.epoch, exc.cfg, split_index=si) from None
    accs = np.array([r.test_acc for r in results])
    vals = np.array([r.best_val_acc for r in results])
    return SplitsResult(
        results=results,
        mean_test_acc=float(accs.mean()),
        std_test_acc=float(accs.std()),
        mean_val_acc=float(vals.mean()),
    )


def full_search_space() -> dict:
    """The 1080-combination space: gate decay/lr, layer decays, lr, dropout."""
    return {
        "wd_sca": [0.0, 0.0001, 0.001, 0.01, 0.1],
        "lr_sca": [0.04, 0.02, 0.01, 0.005],
        "wd_fc1": [0.0, 0.0001, 0.001],
        "wd_fc2": [0.0, 0.0001, 0.001],
        "lr_fc": [0.01, 0.005],
        "dropout": [0.5, 0.6, 0.7],
    }


def mlp_search_space() -> dict:
    """54-combination space used by the feature-setting studies (no gate axes)."""
    return {
        "wd_fc1": [0.0, 0.0001, 0.001],
        "wd_fc2": [0.0, 0.0001, 0.001],
        "lr_fc": [0.01, 0.005],
        "dropout": [0.5, 0.6, 0.7],
    }


def small_search_space() -> dict:
    """Desk-scale smoke grid."""
    return {"lr_fc": [0.01], "dropout": [0.5, 0.6]}


def expand_grid(axes: dict) -> list[dict]:
    """Cartesian product of the axes, in axis order; empty axes rejected."""
    if not axes:
        raise ValueError("grid axes must be nonempty")
    names = list(axes)
    for name, values in axes.items():
        if not list(values):
            raise ValueError(f"axis {name!r} has no values")
    return [dict(zip(names, combo)) for combo in itertools.product(*axes.values())]


_POOL_STATE: dict = {}


def _pool_init(bundle, fs, splits, configs):
    _POOL_STATE.update(bundle=bundle, fs=fs, splits=splits, configs=configs)


def _pool_trial(task):
    ci, si = task
    result = train(
        _POOL_STATE["configs"][ci],
        _POOL_STATE["bundle"],
        _POOL_STATE["fs"],
        _POOL_STATE["splits"][si],
    )
    return ci, si, result


def _run_trials(configs, bundle, splits, fs, jobs: int):
    """All (config, split) trials; output order is independent of scheduling."""
    tasks = [(ci, si) for ci in range(len(configs)) for si in range(len(splits))]
    gathered = {}
    if jobs <= 1:
        for ci, si in tasks:
            gathered[(ci, si)] = train(configs[ci], bundle, fs, splits[si])
    else:
        with ProcessPoolExecutor(
            max_workers=jobs,
            initializer=_pool_init,
            initargs=(bundle, fs, splits, configs),
        ) as pool:
            for ci, si, result in pool.map(_pool_trial, tasks):
                gathered[(ci, si)] = result
    return [
        [gathered[(ci, si)] for si in range(len(splits))] for ci in range(len(configs))
    ]


@dataclass
class GridEntry:
    config_index: int
    overrides: dict
    config: TrainConfig
    mean_val_acc: float
    std_val_acc: float
    mean_test_acc: float
    std_test_acc: float
    per_split_test: list

    def to_dict(self) -> dict:
        return {
            "config_index": self.config_index,
            "overrides": dict(self.overrides),
            "config": self.config.to_dict(),
            "mean_val_acc": float(self.mean_val_acc),
            "std_val_acc": float(self.std_val_acc),
            "mean_test_acc": float(self.mean_test_acc),
            "std_test_acc": float(self.std_test_acc),
            "per_split_test": [float(x) for x in self.per_split_test],
        }


@dataclass
class GridSearchResult:
    """Configs ranked by mean validation accuracy; test never drives ranking."""

    ranked: list

    @property
    def best(self) -> GridEntry:
        return self.ranked[0]

    def to_dict(self) -> dict:
        return {
            "best_config_index": self.best.config_index,
            "best_mean_test_acc": float(self.best.mean_test_acc),
            "ranked": [e.to_dict() for e in self.ranked],
        }


def grid_search(
    axes: dict,
    base_cfg: TrainConfig,
    bundle: DatasetBundle,
    splits,
    fs: HopFeatureSet | None = None,
    jobs: int = 1,
) -> GridSearchResult:
    """Exhaustive search; each trial's seed derives from (seed, config index)."""
    combos = expand_grid(axes)
    if fs is None:
        fs = hop_features_for(bundle, base_cfg.hops, base_cfg.loop_mode)
    configs = [
        replace(base_cfg, **combo, seed=derive_seed(base_cfg.seed, "config", ci)).validate()
        for ci, combo in enumerate(combos)
    ]
    per_config = _run_trials(configs, bundle, splits, fs, jobs)
    entries = []
    for ci, results in enumerate(per_config):
        vals = np.array([r.best_val_acc for r in results])
        tests = np.array([r.test_acc for r in results])
        entries.append(
            GridEntry(
                config_index=ci,
                overrides=combos[ci],
                config=configs[ci],
                mean_val_acc=float(vals.mean()),
                std_val_acc=float(vals.std()),
                mean_test_acc=float(tests.mean()),
                std_test_acc=float(tests.std()),
                per_split_test=[float(t) for t in tests],
            )
        )
    ranked = sorted(entries, key=lambda e: (-e.mean_val_acc, e.config_index))
    return GridSearchResult(ranked=ranked)


@dataclass
class StudyRow:
    setting: str
    aggregation: str
    mask: str                 # one character per branch, canonical order
    branches: list
    mean_val_acc: float
    mean_test_acc: float
    std_test_acc: float

    def to_dict(self) -> dict:
        return {
            "setting": self.setting,
            "aggregation": self.aggregation,
            "mask": self.mask,
            "branches": list(self.branches),
            "mean_val_acc": float(self.mean_val_acc),
            "mean_test_acc": float(self.mean_test_acc),
            "std_test_acc": float(self.std_test_acc),
        }


@dataclass
class StudyResult:
    setting: str
    rows: list
    best: dict                # aggregation -> StudyRow, chosen on validation

    def to_dict(self) -> dict:
        return {
            "setting": self.setting,
            "rows": [r.to_dict() for r in self.rows],
            "best": {agg: row.to_dict() for agg, row in self.best.items()},
        }


def _mask_string(mask) -> str:
    return "".join("1" if b else "0" for b in mask)


def feature_setting_study(
    bundle: DatasetBundle,
    splits,
    setting: str,
    agg: str | None = None,
    hops: int = 3,
    base_cfg: TrainConfig | None = None,
    axes: dict | None = None,
    fs: HopFeatureSet | None = None,
    jobs: int = 1,
) -> StudyResult:
    """Single/all/sub feature studies with the gate disabled (plain MLP head).

    ``single`` trains one branch at a time; ``all`` uses every branch under
    both aggregators (or the one requested); ``sub`` enumerates every mask
    that is neither a singleton nor the full set (119 masks for 7 branches)
    and flags the best by validation accuracy. When ``axes`` is given, each
    cell is itself grid-searched and its best-validation entry is reported.
    """
    if setting not in (SETTING_SINGLE, SETTING_ALL, SETTING_SUB):
        raise ValueError(f"unknown study setting {setting!r}")
    base_cfg = replace(
        base_cfg if base_cfg is not None else TrainConfig(),
        soft_selection=False,
        hops=hops,
        loop_mode=MODE_BOTH,
    )
    if fs is None:
        fs = hop_features_for(bundle, hops, MODE_BOTH)
    num_branches = fs.num_branches
    if setting == SETTING_SINGLE:
        masks = [
            tuple(i == b for i in range(num_branches)) for b in range(num_branches)
        ]
        aggs = [agg or AGG_CAT]
    elif setting == SETTING_ALL:
        masks = [tuple(True for _ in range(num_branches))]
        aggs = [agg] if agg else [AGG_CAT, AGG_SUM]
    else:
        masks = enumerate_subset_masks(num_branches)
        aggs = [agg] if agg else [AGG_CAT, AGG_SUM]

    rows = []
    best: dict = {}
    for agg_name in aggs:
        best_row = None
        for mask in masks:
            sub = select_features(fs, mask)
            cfg = replace(base_cfg, aggregation=agg_name)
            if axes:
                entry = grid_search(axes, cfg, bundle, splits, fs=sub, jobs=jobs).best
                mean_val, mean_test, std_test = (
                    entry.mean_val_acc,
                    entry.mean_test_acc,
                    entry.std_test_acc,
                )
            else:
                sr = run_splits(cfg, bundle, splits, fs=sub)
                mean_val, mean_test, std_test = (
                    sr.mean_val_acc,
                    sr.mean_test_acc,
                    sr.std_test_acc,
                )
            row = StudyRow(
                setting=setting,
                aggregation=agg_name,
                mask=_mask_string(mask),
                branches=[t for t, keep in zip(fs.labels(), mask) if keep],
                mean_val_acc=mean_val,
                mean_test_acc=mean_test,
                std_test_acc=std_test,
            )
            rows.append(row)
            if best_row is None or row.mean_val_acc > best_row.mean_val_acc:
                best_row = row
        best[agg_name] = best_row
    return StudyResult(setting=setting, rows=rows, best=best)


@dataclass
class AblationRow:
    variant: str
    overrides: dict
    mean_acc: float           # mean over configs of per-config mean over splits
    std_acc: float
    per_config_mean: list

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "overrides": dict(self.overrides),
            "mean_acc": float(self.mean_acc),
            "std_acc": float(self.std_acc),
            "per_config_mean": [float(x) for x in self.per_config_mean],
        }


def ablation_run(
    bundle: DatasetBundle,
    splits,
    axes: dict,
    base_cfg: TrainConfig | None = None,
    fs: HopFeatureSet | None = None,
    jobs: int = 1,
) -> list[AblationRow]:
    """Average test accuracy over the whole grid, for each design variant.

    Averaging order: per config over splits first, then over configs.
    """
    base_cfg = base_cfg if base_cfg is not None else TrainConfig()
    if fs is None:
        fs = hop_features_for(bundle, base_cfg.hops, base_cfg.loop_mode)
    rows = []
    for name, overrides in ABLATION_VARIANTS:
        cfg = replace(base_cfg, **overrides)
        result = grid_search(axes, cfg, bundle, splits, fs=fs, jobs=jobs)
        by_index = sorted(result.ranked, key=lambda e: e.config_index)
        means = np.array([e.mean_test_acc for e in by_index])
        rows.append(
            AblationRow(
                variant=name,
                overrides=overrides,
                mean_acc=float(means.mean()),
                std_acc=float(means.std()),
                per_config_mean=[float(x) for x in means],
            )
        )
    return rows


@dataclass
class SweepRow:
    hops: int
    branches: int
    mean_test_acc: float
    std_test_acc: float

    def to_dict(self) -> dict:
        return {
            "hops": int(self.hops),
            "branches": int(self.branches),
            "mean_test_acc": float(self.mean_test_acc),
            "std_test_acc": float(self.std_test_acc),
        }


def hop_sweep(
    bundle: DatasetBundle,
    splits,
    hops_list=(3, 8, 16, 32),
    base_cfg: TrainConfig | None = None,
    overrides_per_hop: dict | None = None,
) -> list[SweepRow]:
    """Accuracy as aggregation depth grows; branch matrices are built
    hop-by-hop and freed between depths to bound memory."""
    base_cfg = base_cfg if base_cfg is not None else TrainConfig()
    rows = []
    for hops in hops_list:
        extra = (overrides_per_hop or {}).get(hops, {})
        cfg = replace(base_cfg, hops=hops, **extra)
        fs = hop_features_for(bundle, hops, cfg.loop_mode)
        sr = run_splits(cfg, bundle, splits, fs=fs)
        rows.append(
            SweepRow(
                hops=hops,
                branches=fs.num_branches,
                mean_test_acc=sr.mean_test_acc,
                std_test_acc=sr.std_test_acc,
            )
        )
        del fs
    return rows


@dataclass
class AlphaReport:
    branch_labels: list
    rows: dict                # dataset name -> mean gate vector

    def to_dict(self) -> dict:
        return {
            "branch_labels": list(self.branch_labels),
            "rows": {k: [float(x) for x in v] for k, v in self.rows.items()},
        }


def export_alpha_report(results_by_dataset: dict) -> AlphaReport:
    """Mean learned gate values per dataset, averaged over the given results."""
    branch_labels = None
    rows = {}
    for name, results in results_by_dataset.items():
        if not results:
            raise ValueError(f"no results for dataset {name!r}")
        labels = list(results[0].branch_labels)
        if branch_labels is None:
            branch_labels = labels
        elif labels != branch_labels:
            raise ValueError("results disagree on branch ordering")
        rows[name] = list(np.mean([r.alphas for r in results], axis=0))
    return AlphaReport(branch_labels=branch_labels or [], rows=rows)


def write_json(path, payload: dict) -> None:
    """Canonical JSON emission: sorted keys, full float precision."""
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, header, rows) -> None:
    lines = [",".join(header)]
    lines += [",".join(_cell(v) for v in row) for row in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def result_basename(dataset: str, mode: str, hops: int, tag: str) -> str:
    return f"{dataset}_{mode}_{hops}hop_{tag}"
