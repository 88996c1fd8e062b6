"""Undirected graphs in CSR form and symmetric adjacency normalization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


class GraphError(ValueError):
    """Malformed graph input: bad node ids, labels, or matrix shapes."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Graph:
    """Immutable simple graph: symmetric CSR adjacency plus node labels.

    ``row_offsets``/``col_indices`` store both directions of every undirected
    edge; self-loops and duplicate edges are never present. Instances are
    safe to share across parallel workers.
    """

    num_nodes: int
    row_offsets: np.ndarray  # int64, shape (num_nodes + 1,)
    col_indices: np.ndarray  # int64, sorted within each row
    labels: np.ndarray       # int64, shape (num_nodes,), values in [0, num_classes)
    num_classes: int

    @property
    def num_edges(self) -> int:
        """Number of undirected edges."""
        return self.col_indices.size // 2

    def degrees(self) -> np.ndarray:
        return np.diff(self.row_offsets)

    def edge_rows(self) -> np.ndarray:
        """Row index of every stored (directed) CSR entry."""
        return np.repeat(np.arange(self.num_nodes, dtype=np.int64), self.degrees())

    def edge_pairs(self) -> np.ndarray:
        """Deduplicated undirected pairs (u, v) with u < v, lexicographically sorted."""
        rows = self.edge_rows()
        keep = rows < self.col_indices
        return np.column_stack([rows[keep], self.col_indices[keep]])


@dataclass(frozen=True)
class SparseMatrix:
    """CSR matrix of 64-bit floats, immutable after construction."""

    num_rows: int
    num_cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.values, self.col_indices, self.row_offsets),
            shape=(self.num_rows, self.num_cols),
        )

    def to_dense(self) -> np.ndarray:
        return self.to_scipy().toarray()


def build_graph(edge_pairs, num_nodes: int, labels) -> Graph:
    """Build a Graph from raw (possibly directed, possibly duplicated) pairs.

    Input pairs are symmetrized and deduplicated; self-loops are dropped.
    Node ids must lie in [0, num_nodes) and labels must be nonnegative with
    at least two classes present in range.
    """
    if num_nodes < 1:
        raise GraphError(f"num_nodes must be positive, got {num_nodes}")
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (num_nodes,):
        raise GraphError(f"expected {num_nodes} labels, got shape {labels.shape}")
    bad = np.flatnonzero(labels < 0)
    if bad.size:
        raise GraphError(f"negative label {labels[bad[0]]} at node {bad[0]}")
    num_classes = int(labels.max()) + 1
    if num_classes < 2:
        raise GraphError("need at least 2 label classes")

    pairs = np.asarray(edge_pairs, dtype=np.int64)
    if pairs.size == 0:
        pairs = pairs.reshape(0, 2)
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise GraphError(f"edge pairs must have shape (m, 2), got {pairs.shape}")
    out_of_range = (pairs < 0) | (pairs >= num_nodes)
    if out_of_range.any():
        i = int(np.flatnonzero(out_of_range.any(axis=1))[0])
        raise GraphError(
            f"edge {i}: node id {pairs[i].max()} out of range [0, {num_nodes})"
        )

    both = np.vstack([pairs, pairs[:, ::-1]])
    both = both[both[:, 0] != both[:, 1]]
    if len(both):
        order = np.lexsort((both[:, 1], both[:, 0]))
        both = both[order]
        keep = np.empty(len(both), dtype=bool)
        keep[0] = True
        np.any(both[1:] != both[:-1], axis=1, out=keep[1:])
        both = both[keep]
    counts = np.bincount(both[:, 0], minlength=num_nodes)
    row_offsets = np.zeros(num_nodes + 1, dtype=np.int64)
    np.cumsum(counts, out=row_offsets[1:])
    return Graph(
        num_nodes=num_nodes,
        row_offsets=_frozen(row_offsets),
        col_indices=_frozen(both[:, 1].copy()),
        labels=_frozen(labels),
        num_classes=num_classes,
    )


def sym_normalize(graph: Graph, self_loops: bool) -> SparseMatrix:
    """Symmetric degree normalization D^{-1/2} A D^{-1/2} of the adjacency.

    With ``self_loops`` the identity is merged into the adjacency before
    normalizing, so every node mixes its own features into each aggregation.
    Rows of isolated nodes stay all-zero: their scaling factor is defined as
    0 rather than dividing by a zero degree.
    """
    n = graph.num_nodes
    deg = graph.degrees().astype(np.float64)
    rows = graph.edge_rows()
    cols = graph.col_indices
    if self_loops:
        diag = np.arange(n, dtype=np.int64)
        rows = np.concatenate([rows, diag])
        cols = np.concatenate([cols, diag])
        order = np.lexsort((cols, rows))
        rows, cols = rows[order], cols[order]
        deg = deg + 1.0
        inv_sqrt = deg ** -0.5
        counts = np.bincount(rows, minlength=n)
        row_offsets = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(counts, out=row_offsets[1:])
    else:
        inv_sqrt = np.zeros(n, dtype=np.float64)
        nonzero = deg > 0
        inv_sqrt[nonzero] = deg[nonzero] ** -0.5
        row_offsets = graph.row_offsets
    values = inv_sqrt[rows] * inv_sqrt[cols]
    return SparseMatrix(
        num_rows=n,
        num_cols=n,
        row_offsets=_frozen(row_offsets),
        col_indices=_frozen(cols),
        values=_frozen(values),
    )


def spmm(matrix: SparseMatrix, dense) -> np.ndarray:
    """Exact CSR x dense product in 64-bit arithmetic.

    Output is bit-identical across runs: row reductions run sequentially.
    """
    x = np.asarray(dense, dtype=np.float64)
    if x.ndim != 2 or matrix.num_cols != x.shape[0]:
        raise GraphError(
            f"shape mismatch: ({matrix.num_rows}x{matrix.num_cols}) @ {x.shape}"
        )
    return np.asarray(matrix.to_scipy() @ x)


def homophily_ratio(graph: Graph) -> float:
    """Fraction of undirected edges whose endpoints share a label."""
    if graph.num_edges == 0:
        raise GraphError("homophily ratio is undefined on an edgeless graph")
    same = graph.labels[graph.edge_rows()] == graph.labels[graph.col_indices]
    return float(same.mean())
