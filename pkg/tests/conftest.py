import numpy as np
import pytest

from fsgnn.data import write_edge_file, write_node_file


def dense_adjacency(pairs, n: int) -> np.ndarray:
    a = np.zeros((n, n))
    for u, v in pairs:
        a[u, v] = a[v, u] = 1.0
    return a


def dense_sym_normalize(pairs, n: int, self_loops: bool) -> np.ndarray:
    """Brute-force reference for the normalized operators."""
    a = dense_adjacency(pairs, n)
    if self_loops:
        a = a + np.eye(n)
    deg = a.sum(axis=1)
    inv_sqrt = np.where(deg > 0, deg, 1.0) ** -0.5
    inv_sqrt[deg == 0] = 0.0
    return inv_sqrt[:, None] * a * inv_sqrt[None, :]


def write_dataset_dir(root, bundle, name=None):
    """Serialize a bundle into a directory the loaders/CLI can consume."""
    d = root / (name or bundle.name)
    d.mkdir(parents=True, exist_ok=True)
    write_node_file(d / "nodes.txt", bundle.features, bundle.graph.labels)
    write_edge_file(d / "edges.txt", bundle.graph.edge_pairs())
    return d


@pytest.fixture
def dataset_dir(tmp_path):
    def _write(bundle, name=None):
        return write_dataset_dir(tmp_path, bundle, name)

    return _write
