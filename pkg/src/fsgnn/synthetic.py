"""Small synthetic datasets with planted signal, for tests and demos.

These constructions control which hop branch carries label information, so
they can exercise training, gate learning, and subset enumeration without
any real benchmark files.
"""

from __future__ import annotations

import numpy as np

from .data import DatasetBundle
from .graph import build_graph
from .rng import RngStream


def separable_bundle(num_nodes: int = 10, num_classes: int = 2, seed: int = 0) -> DatasetBundle:
    """Ring graph whose raw features are exactly one-hot labels.

    The X branch alone separates the classes perfectly; neighbors mostly
    disagree, so propagated branches are noise.
    """
    if num_nodes < num_classes * 3:
        raise ValueError("need at least 3 nodes per class")
    labels = np.arange(num_nodes) % num_classes
    features = np.eye(num_classes)[labels]
    edges = [(i, (i + 1) % num_nodes) for i in range(num_nodes)]
    graph = build_graph(edges, num_nodes, labels)
    return DatasetBundle(
        name=f"separable{num_nodes}", graph=graph, features=features, label_map={}
    )


def paired_homophily_bundle(
    num_pairs: int = 40,
    num_classes: int = 2,
    noise: float = 3.0,
    signal: float = 1.0,
    extra_dims: int = 2,
    seed: int = 0,
) -> DatasetBundle:
    """Same-label node pairs where only pair-averaged features are clean.

    Within a pair (u, v) of class c the features are signal*onehot(c) +- r,
    with the noise r confined to non-signal dimensions. Both members then
    share the same L1 norm, so the cancellation x_u + x_v = 2*signal*onehot(c)
    survives row normalization: (A+I)X rows point exactly along the class
    axis, while AX and X keep the full noise. Trained gates should therefore
    concentrate on the (A+I)X branch.
    """
    if num_pairs < num_classes * 3:
        raise ValueError("need at least 3 pairs per class")
    rng = RngStream(seed)
    n = 2 * num_pairs
    d = num_classes + extra_dims
    labels = np.repeat(np.arange(num_pairs) % num_classes, 2)
    features = np.zeros((n, d))
    for p in range(num_pairs):
        c = labels[2 * p]
        r = rng.uniform(-noise, noise, d)
        r[c] = 0.0
        mean = signal * np.eye(d)[c]
        features[2 * p] = mean + r
        features[2 * p + 1] = mean - r
    edges = [(2 * p, 2 * p + 1) for p in range(num_pairs)]
    graph = build_graph(edges, n, labels)
    return DatasetBundle(
        name=f"paired{num_pairs}", graph=graph, features=features, label_map={}
    )


def noisy_pair_bundle(
    num_pairs: int = 10,
    num_classes: int = 2,
    signal: float = 0.6,
    noise: float = 1.0,
    seed: int = 0,
) -> DatasetBundle:
    """Pair graph where every branch is informative to a different degree.

    Each node sees the class signal plus independent noise; averaging over
    a pair improves the signal-to-noise ratio, so branch accuracies are
    strictly ordered rather than saturating. Handy for subset-selection
    oracles where ties would hide enumeration bugs.
    """
    if num_pairs < num_classes * 3:
        raise ValueError("need at least 3 pairs per class")
    rng = RngStream(seed)
    n = 2 * num_pairs
    d = num_classes + 2
    labels = np.repeat(np.arange(num_pairs) % num_classes, 2)
    base = np.zeros((n, d))
    base[np.arange(n), labels] = signal
    features = base + rng.uniform(-noise, noise, (n, d))
    edges = [(2 * p, 2 * p + 1) for p in range(num_pairs)]
    graph = build_graph(edges, n, labels)
    return DatasetBundle(
        name=f"noisypair{num_pairs}", graph=graph, features=features, label_map={}
    )


def random_bundle(
    num_nodes: int = 12,
    num_classes: int = 3,
    num_features: int = 5,
    edge_prob: float = 0.3,
    seed: int = 0,
) -> DatasetBundle:
    """Erdos-Renyi graph with random features and labels (always connected
    enough to have at least one edge)."""
    rng = RngStream(seed)
    labels = np.arange(num_nodes) % num_classes
    labels = labels[rng.permutation(num_nodes)]
    features = rng.uniform(-1.0, 1.0, (num_nodes, num_features))
    draws = rng.random((num_nodes, num_nodes))
    edges = [
        (u, v)
        for u in range(num_nodes)
        for v in range(u + 1, num_nodes)
        if draws[u, v] < edge_prob
    ]
    if not edges:
        edges = [(0, 1)]
    graph = build_graph(edges, num_nodes, labels)
    return DatasetBundle(
        name=f"random{num_nodes}", graph=graph, features=features, label_map={}
    )
