"""Plain-text dataset parsing, split handling, and ingestion reports.

Three file formats, all with one header line:

* node file:  ``node_id <TAB> comma-separated feature values <TAB> label``
* edge file:  ``src <TAB> dst`` (directed pairs; symmetrized at build time)
* split file: three lines ``train:``, ``val:``, ``test:``, each followed on
  the same line by space-separated node indices

The node/edge layouts mirror the common public text distribution of these
benchmarks, so those files load unmodified.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import Graph, GraphError, build_graph, homophily_ratio
from .rng import RngStream

NODE_FILE_NAMES = ("out1_node_feature_label.txt", "nodes.txt")
EDGE_FILE_NAMES = ("out1_graph_edges.txt", "edges.txt")
DEFAULT_FRACTIONS = (0.48, 0.32, 0.20)


class DatasetError(ValueError):
    """Unparseable or inconsistent dataset file."""


@dataclass(frozen=True)
class SplitSpec:
    """Disjoint train/validation/test node index sets."""

    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray

    def sets(self):
        return (("train", self.train_idx), ("val", self.val_idx), ("test", self.test_idx))


def validate_split(split: SplitSpec, num_nodes: int) -> SplitSpec:
    seen = {}
    for name, idx in split.sets():
        if idx.size == 0:
            raise DatasetError(f"{name} set is empty")
        if idx.min() < 0 or idx.max() >= num_nodes:
            bad = idx[(idx < 0) | (idx >= num_nodes)][0]
            raise DatasetError(f"{name} index {bad} out of range [0, {num_nodes})")
        if np.unique(idx).size != idx.size:
            raise DatasetError(f"{name} set contains duplicate indices")
        for i in idx:
            if i in seen:
                raise DatasetError(f"index {i} appears in both {seen[i]} and {name}")
            seen[int(i)] = name
    return split


def _make_split(train, val, test, num_nodes: int) -> SplitSpec:
    split = SplitSpec(
        train_idx=np.sort(np.asarray(train, dtype=np.int64)),
        val_idx=np.sort(np.asarray(val, dtype=np.int64)),
        test_idx=np.sort(np.asarray(test, dtype=np.int64)),
    )
    return validate_split(split, num_nodes)


@dataclass(frozen=True)
class DatasetBundle:
    """Parsed dataset: graph, raw (unnormalized) features, label bookkeeping."""

    name: str
    graph: Graph
    features: np.ndarray          # (n, d) float64
    label_map: dict               # original label -> internal class id

    @property
    def num_nodes(self) -> int:
        return self.graph.num_nodes

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    @property
    def num_classes(self) -> int:
        return self.graph.num_classes


def parse_node_file(path):
    """Parse features and labels; node ids must form 0..n-1."""
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines:
        raise DatasetError(f"{path.name}: empty file (missing header)")
    entries = {}
    width = None
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        parts = raw.split("\t")
        if len(parts) != 3:
            raise DatasetError(
                f"{path.name}:{lineno}: expected 'id<TAB>features<TAB>label', got {len(parts)} fields"
            )
        try:
            nid = int(parts[0])
            label = int(parts[2])
        except ValueError:
            raise DatasetError(f"{path.name}:{lineno}: non-integer node id or label") from None
        if nid in entries:
            raise DatasetError(f"{path.name}:{lineno}: duplicate node id {nid}")
        try:
            feats = np.array(parts[1].split(","), dtype=np.float64)
        except ValueError:
            raise DatasetError(f"{path.name}:{lineno}: unparseable feature value") from None
        if width is None:
            width = feats.size
        elif feats.size != width:
            raise DatasetError(
                f"{path.name}:{lineno}: {feats.size} features, expected {width}"
            )
        entries[nid] = (feats, label)
    if not entries:
        raise DatasetError(f"{path.name}: no node lines")
    n = len(entries)
    ids = sorted(entries)
    if ids[0] != 0 or ids[-1] != n - 1:
        missing = next(i for i in range(n) if i not in entries)
        raise DatasetError(f"{path.name}: node ids not contiguous (missing id {missing})")
    features = np.vstack([entries[i][0] for i in range(n)])
    labels = np.array([entries[i][1] for i in range(n)], dtype=np.int64)
    return features, labels


def parse_edge_file(path) -> np.ndarray:
    """Parse raw directed pairs; range checks happen at graph build time."""
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines:
        raise DatasetError(f"{path.name}: empty file (missing header)")
    pairs = []
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        parts = raw.split("\t")
        if len(parts) != 2:
            raise DatasetError(f"{path.name}:{lineno}: expected 'src<TAB>dst'")
        try:
            pairs.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise DatasetError(f"{path.name}:{lineno}: non-integer node id") from None
    if not pairs:
        raise DatasetError(f"{path.name}: no edges (empty body)")
    return np.array(pairs, dtype=np.int64)


def parse_split_file(path, num_nodes: int) -> SplitSpec:
    path = Path(path)
    lines = [l for l in path.read_text().splitlines() if l.strip()]
    if len(lines) != 3:
        raise DatasetError(f"{path.name}: expected 3 lines (train/val/test), got {len(lines)}")
    sets = []
    for line, want in zip(lines, ("train:", "val:", "test:")):
        if not line.startswith(want):
            raise DatasetError(f"{path.name}: expected line starting with {want!r}")
        try:
            sets.append([int(t) for t in line[len(want):].split()])
        except ValueError:
            raise DatasetError(f"{path.name}: non-integer index on {want!r} line") from None
    try:
        return _make_split(*sets, num_nodes=num_nodes)
    except DatasetError as exc:
        raise DatasetError(f"{path.name}: {exc}") from None


def make_random_split(
    labels, fractions=DEFAULT_FRACTIONS, seed: int = 0
) -> SplitSpec:
    """Per-class stratified split.

    Each class is shuffled with the seeded stream, then assigned
    floor(f_train * s) and floor(f_val * s) nodes; the remainder goes to the
    test set. Classes need at least 3 nodes.
    """
    labels = np.asarray(labels, dtype=np.int64)
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f <= 0 for f in fractions):
        raise DatasetError(f"need 3 positive fractions, got {fractions}")
    if sum(fractions) > 1.0 + 1e-9:
        raise DatasetError(f"fractions sum to {sum(fractions)} > 1")
    rng = RngStream(seed)
    train, val, test = [], [], []
    for c in range(int(labels.max()) + 1):
        members = np.flatnonzero(labels == c)
        size = members.size
        if size < 3:
            raise DatasetError(f"class {c} has only {size} nodes; need at least 3 to split")
        perm = members[rng.permutation(size)]
        n_train = int(np.floor(fractions[0] * size))
        n_val = int(np.floor(fractions[1] * size))
        train.append(perm[:n_train])
        val.append(perm[n_train : n_train + n_val])
        test.append(perm[n_train + n_val :])
    return _make_split(
        np.concatenate(train), np.concatenate(val), np.concatenate(test), labels.size
    )


def _find_file(directory: Path, candidates) -> Path:
    for name in candidates:
        p = directory / name
        if p.is_file():
            return p
    raise DatasetError(
        f"missing {candidates[0]} in {directory} (also looked for {', '.join(candidates[1:])})"
    )


def load_dataset(directory, name: str | None = None) -> DatasetBundle:
    """Load node + edge files from a dataset directory.

    Labels are remapped to a contiguous [0, C) range (original values
    recorded in ``label_map``); feature values are parsed as float64.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise DatasetError(f"dataset directory {directory} does not exist")
    node_path = _find_file(directory, NODE_FILE_NAMES)
    edge_path = _find_file(directory, EDGE_FILE_NAMES)
    features, raw_labels = parse_node_file(node_path)
    uniques = np.unique(raw_labels)
    label_map = {int(orig): i for i, orig in enumerate(uniques)}
    labels = np.searchsorted(uniques, raw_labels)
    pairs = parse_edge_file(edge_path)
    try:
        graph = build_graph(pairs, features.shape[0], labels)
    except GraphError as exc:
        raise DatasetError(f"{edge_path.name}: {exc}") from None
    return DatasetBundle(
        name=name or directory.name,
        graph=graph,
        features=features,
        label_map=label_map,
    )


def dataset_hash(bundle: DatasetBundle) -> str:
    """Content hash over nodes, edges, features, and labels (hex digest)."""
    digest = hashlib.sha256()
    digest.update(f"n={bundle.num_nodes};c={bundle.num_classes};".encode())
    digest.update(np.ascontiguousarray(bundle.graph.edge_pairs(), dtype="<i8").tobytes())
    digest.update(np.ascontiguousarray(bundle.graph.labels, dtype="<i8").tobytes())
    digest.update(np.ascontiguousarray(bundle.features, dtype="<f8").tobytes())
    return digest.hexdigest()


def split_fractions_by_class(labels, split: SplitSpec) -> dict:
    """Per-class fraction of nodes landing in each split set."""
    labels = np.asarray(labels)
    out = {}
    for c in range(int(labels.max()) + 1):
        size = int((labels == c).sum())
        row = {}
        for set_name, idx in split.sets():
            row[set_name] = float((labels[idx] == c).sum() / size) if size else 0.0
        out[str(c)] = row
    return out


def ingestion_report(bundle: DatasetBundle, split: SplitSpec | None = None) -> dict:
    """Summary statistics used by the ingest command and its JSON report.

    The edge count is the computed one: distributions of the same dataset
    disagree once symmetrization and dedup are applied, so the observed
    value is reported rather than asserted against any published table.
    """
    graph = bundle.graph
    report = {
        "dataset": bundle.name,
        "nodes": int(graph.num_nodes),
        "edges": int(graph.num_edges),
        "features": int(bundle.num_features),
        "classes": int(bundle.num_classes),
        "homophily_ratio": homophily_ratio(graph),
        "class_counts": [int(c) for c in np.bincount(graph.labels, minlength=bundle.num_classes)],
        "label_map": {str(k): int(v) for k, v in bundle.label_map.items()},
    }
    if split is not None:
        report["split_fractions"] = split_fractions_by_class(graph.labels, split)
    return report


def write_node_file(path, features, labels) -> None:
    """Serialize features/labels in the node file format (lossless float64)."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    with open(path, "w") as f:
        f.write("node_id\tfeature\tlabel\n")
        for i in range(features.shape[0]):
            values = ",".join(repr(float(v)) for v in features[i])
            f.write(f"{i}\t{values}\t{labels[i]}\n")


def write_edge_file(path, pairs) -> None:
    pairs = np.asarray(pairs, dtype=np.int64)
    with open(path, "w") as f:
        f.write("src\tdst\n")
        for u, v in pairs:
            f.write(f"{u}\t{v}\n")


def write_split_file(path, split: SplitSpec) -> None:
    with open(path, "w") as f:
        for name, idx in split.sets():
            f.write(f"{name}: " + " ".join(str(int(i)) for i in idx) + "\n")
