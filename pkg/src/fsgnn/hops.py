"""Multi-hop feature precomputation with both aggregation flavors.

Given row-normalized node features X and the two normalized operators (with
and without self-loops), this module materializes the ordered branch set

    X, AX, (A+I)X, A^2X, (A+I)^2X, ..., A^KX, (A+I)^KX

hop-major with the no-loop branch first, supports subset selection over the
branches, and caches the whole set on disk bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .binio import ContainerError, read_container, write_container
from .graph import SparseMatrix, spmm

MODE_BOTH = "both"
MODE_SELF_ONLY = "self_loop_only"
MODE_NOLOOP_ONLY = "no_loop_only"
MODES = (MODE_BOTH, MODE_SELF_ONLY, MODE_NOLOOP_ONLY)

LOOP_NONE = "none"
LOOP_SELF = "self_loop"

_CACHE_MAGIC = b"FSGNHOP1"


class CacheError(RuntimeError):
    """Feature cache rejected: corrupt file or mismatched key."""


@dataclass(frozen=True)
class FeatureTag:
    """Provenance of one branch matrix: hop count and loop mode."""

    hop: int
    loop: str

    def label(self) -> str:
        if self.hop == 0:
            return "X"
        power = "" if self.hop == 1 else f"^{self.hop}"
        base = "(A+I)" if self.loop == LOOP_SELF else "A"
        return f"{base}{power}X"


def canonical_tags(hops: int, mode: str = MODE_BOTH) -> tuple[FeatureTag, ...]:
    """Branch ordering: X first, then per hop no-loop before self-loop."""
    if hops < 1:
        raise ValueError(f"hops must be >= 1, got {hops}")
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}, expected one of {MODES}")
    tags = [FeatureTag(0, LOOP_NONE)]
    for k in range(1, hops + 1):
        if mode in (MODE_BOTH, MODE_NOLOOP_ONLY):
            tags.append(FeatureTag(k, LOOP_NONE))
        if mode in (MODE_BOTH, MODE_SELF_ONLY):
            tags.append(FeatureTag(k, LOOP_SELF))
    return tuple(tags)


@dataclass(frozen=True)
class HopFeatureSet:
    """Ordered, immutable list of (tag, dense n x d matrix) branches."""

    items: tuple[tuple[FeatureTag, np.ndarray], ...]

    def __post_init__(self):
        if not self.items:
            raise ValueError("feature set must contain at least one branch")
        n = self.items[0][1].shape[0]
        for tag, mat in self.items:
            if mat.ndim != 2 or mat.shape[0] != n:
                raise ValueError(f"branch {tag.label()} has shape {mat.shape}")

    @property
    def num_branches(self) -> int:
        return len(self.items)

    @property
    def num_nodes(self) -> int:
        return self.items[0][1].shape[0]

    def tags(self) -> list[FeatureTag]:
        return [tag for tag, _ in self.items]

    def labels(self) -> list[str]:
        return [tag.label() for tag, _ in self.items]

    def matrices(self) -> list[np.ndarray]:
        return [mat for _, mat in self.items]

    def branch_dims(self) -> list[int]:
        return [mat.shape[1] for _, mat in self.items]


def _frozen(mat: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(mat, dtype=np.float64)
    out.setflags(write=False)
    return out


def row_normalize(x) -> np.ndarray:
    """Divide each row by its L1 norm; all-zero rows pass through unchanged."""
    x = np.asarray(x, dtype=np.float64)
    norms = np.abs(x).sum(axis=1, keepdims=True)
    return np.divide(x, norms, out=x.copy(), where=norms > 0)


def generate_hop_features(
    x,
    a_sym: SparseMatrix | None,
    a_tilde_sym: SparseMatrix | None,
    hops: int,
    mode: str = MODE_BOTH,
) -> HopFeatureSet:
    """Iterated propagation of x under the normalized operators.

    Hop j of each chain is operator @ (hop j-1), seeded from x; x itself is
    always branch 0. ``both`` interleaves the two chains in canonical order
    (2*hops + 1 branches); the single-chain modes yield hops + 1 branches.
    The chains never re-normalize rows: x should already be row-normalized.
    """
    tags = canonical_tags(hops, mode)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"features must be 2-D, got shape {x.shape}")
    if not np.isfinite(x).all():
        raise ValueError("features contain NaN or Inf")
    need_noloop = mode in (MODE_BOTH, MODE_NOLOOP_ONLY)
    need_self = mode in (MODE_BOTH, MODE_SELF_ONLY)
    for name, op, needed in (
        ("a_sym", a_sym, need_noloop),
        ("a_tilde_sym", a_tilde_sym, need_self),
    ):
        if needed:
            if op is None:
                raise ValueError(f"mode {mode!r} requires operator {name}")
            if op.num_rows != op.num_cols or op.num_cols != x.shape[0]:
                raise ValueError(
                    f"{name} is {op.num_rows}x{op.num_cols}, features have {x.shape[0]} rows"
                )

    by_tag = {FeatureTag(0, LOOP_NONE): _frozen(x)}
    for loop, op, needed in (
        (LOOP_NONE, a_sym, need_noloop),
        (LOOP_SELF, a_tilde_sym, need_self),
    ):
        if not needed:
            continue
        prev = x
        for k in range(1, hops + 1):
            prev = spmm(op, prev)
            if not np.isfinite(prev).all():
                raise ValueError(f"hop {k} ({loop}) produced NaN or Inf")
            by_tag[FeatureTag(k, loop)] = _frozen(prev)
    return HopFeatureSet(items=tuple((tag, by_tag[tag]) for tag in tags))


def select_features(fs: HopFeatureSet, mask) -> HopFeatureSet:
    """Keep the branches whose mask bit is set, preserving canonical order."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (fs.num_branches,):
        raise ValueError(
            f"mask length {mask.size} does not match {fs.num_branches} branches"
        )
    if not mask.any():
        raise ValueError("feature mask selects no branches")
    return HopFeatureSet(
        items=tuple(item for item, keep in zip(fs.items, mask) if keep)
    )


def enumerate_subset_masks(
    num_branches: int,
    exclude_singletons: bool = True,
    exclude_full: bool = True,
) -> list[tuple[bool, ...]]:
    """All nonempty branch subsets in ascending bitmask order.

    Bit i of the mask integer selects branch i. With both exclusions and 7
    branches this is the 2^7 - 1 - 7 - 1 = 119 subsets that remain once the
    single-branch and all-branch runs are accounted for separately.
    """
    if num_branches < 1:
        raise ValueError("need at least one branch")
    masks = []
    for bits in range(1, 2**num_branches):
        count = bits.bit_count()
        if exclude_singletons and count == 1:
            continue
        if exclude_full and count == num_branches:
            continue
        masks.append(tuple(bool(bits >> i & 1) for i in range(num_branches)))
    return masks


def save_feature_cache(
    fs: HopFeatureSet, path, dataset_hash: str, hops: int, mode: str
) -> None:
    """Write the branch set to disk, keyed by (dataset hash, hops, mode)."""
    header = {
        "format": "fsgnn-hop-cache",
        "version": 1,
        "dataset_hash": dataset_hash,
        "hops": int(hops),
        "mode": mode,
        "items": [{"hop": tag.hop, "loop": tag.loop} for tag in fs.tags()],
    }
    write_container(path, _CACHE_MAGIC, header, fs.matrices())


def load_feature_cache(
    path,
    dataset_hash: str | None = None,
    hops: int | None = None,
    mode: str | None = None,
) -> HopFeatureSet:
    """Load a cached branch set, rejecting corrupt files and stale keys.

    A mismatch is always an error, never a silent recompute: the caller
    decides whether to rebuild.
    """
    try:
        header, arrays = read_container(path, _CACHE_MAGIC)
    except ContainerError as exc:
        raise CacheError(str(exc)) from exc
    if header.get("format") != "fsgnn-hop-cache":
        raise CacheError(f"{path}: not a hop-feature cache")
    for key, expected in (("dataset_hash", dataset_hash), ("hops", hops), ("mode", mode)):
        if expected is not None and header.get(key) != expected:
            raise CacheError(
                f"{path}: cache {key} is {header.get(key)!r}, expected {expected!r}"
            )
    items = []
    for spec, arr in zip(header["items"], arrays):
        arr = arr.copy()
        arr.setflags(write=False)
        items.append((FeatureTag(int(spec["hop"]), spec["loop"]), arr))
    return HopFeatureSet(items=tuple(items))
