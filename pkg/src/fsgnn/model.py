"""Two-layer model with softmax-gated soft-selection over hop-feature branches.

Forward pipeline, per branch l over its precomputed feature matrix X_l:

    dropout(X_l) -> linear W0_l -> L2 row-normalize -> scale by alpha_l

followed by branch aggregation (concat or sum), ReLU, dropout, and the
output linear layer. The gate alpha = softmax(gamma) is trained jointly
with the weights; ablation flags switch each stage off independently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .binio import ContainerError, read_container, write_container
from .hops import HopFeatureSet
from .nn import (
    aggregate_bwd,
    aggregate_fwd,
    dropout_bwd,
    dropout_fwd,
    l2_row_normalize_bwd,
    l2_row_normalize_fwd,
    linear_bwd,
    linear_fwd,
    relu_bwd,
    relu_fwd,
    softmax_vec_bwd,
    softmax_vec_fwd,
    softmax_xent_bwd,
    softmax_xent_fwd,
)
from .rng import RngStream

AGG_CAT = "cat"
AGG_SUM = "sum"

_PARAMS_MAGIC = b"FSGNPAR1"


class NumericalError(FloatingPointError):
    """NaN or Inf produced by a named layer."""


@dataclass(frozen=True)
class ModelVariant:
    """Ablation switches; the default is the full proposed pipeline."""

    soft_selection: bool = True
    shared_w0: bool = False
    l2_norm: bool = True
    hidden_relu: bool = True
    aggregation: str = AGG_CAT

    def __post_init__(self):
        if self.aggregation not in (AGG_CAT, AGG_SUM):
            raise ValueError(f"unknown aggregation {self.aggregation!r}")

    def to_dict(self) -> dict:
        return {
            "soft_selection": self.soft_selection,
            "shared_w0": self.shared_w0,
            "l2_norm": self.l2_norm,
            "hidden_relu": self.hidden_relu,
            "aggregation": self.aggregation,
        }


@dataclass
class ModelParams:
    """Trainable tensors. ``w0``/``b0`` hold one entry per branch, or a
    single shared entry when the variant uses a common first layer."""

    w0: list
    b0: list
    gamma: np.ndarray
    w1: np.ndarray
    b1: np.ndarray

    @property
    def num_branches(self) -> int:
        return self.gamma.size

    def copy(self) -> "ModelParams":
        return ModelParams(
            w0=[w.copy() for w in self.w0],
            b0=[b.copy() for b in self.b0],
            gamma=self.gamma.copy(),
            w1=self.w1.copy(),
            b1=self.b1.copy(),
        )

    def tensors(self) -> dict:
        """Named live references to every tensor, in a fixed order."""
        out = {}
        for i, (w, b) in enumerate(zip(self.w0, self.b0)):
            out[f"w0.{i}"] = w
            out[f"b0.{i}"] = b
        out["gamma"] = self.gamma
        out["w1"] = self.w1
        out["b1"] = self.b1
        return out


def init_params(
    fs: HopFeatureSet, hidden: int, num_classes: int, variant: ModelVariant, seed: int
) -> ModelParams:
    """Seeded initialization: uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights,
    zero biases, all-ones gate logits (so alpha starts exactly uniform)."""
    if hidden < 1:
        raise ValueError(f"hidden width must be >= 1, got {hidden}")
    if num_classes < 2:
        raise ValueError(f"need >= 2 classes, got {num_classes}")
    dims = fs.branch_dims()
    num_branches = fs.num_branches
    if variant.shared_w0 and len(set(dims)) != 1:
        raise ValueError(f"shared first layer requires equal branch dims, got {dims}")
    rng = RngStream(seed)

    def uniform_weight(fan_in: int, fan_out: int) -> np.ndarray:
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, (fan_in, fan_out))

    first_dims = dims[:1] if variant.shared_w0 else dims
    w0 = [uniform_weight(d, hidden) for d in first_dims]
    b0 = [np.zeros(hidden) for _ in first_dims]
    width = hidden * (num_branches if variant.aggregation == AGG_CAT else 1)
    w1 = uniform_weight(width, num_classes)
    b1 = np.zeros(num_classes)
    return ModelParams(w0=w0, b0=b0, gamma=np.ones(num_branches), w1=w1, b1=b1)


def _require_finite(name: str, arr) -> None:
    if not np.isfinite(arr).all():
        raise NumericalError(f"NaN or Inf in {name}")


def _forward_mats(
    params: ModelParams,
    mats,
    variant: ModelVariant,
    training: bool,
    rng: RngStream | None,
    dropout: float,
    keep_cache: bool,
):
    num_branches = len(mats)
    if num_branches != params.num_branches:
        raise ValueError(
            f"model has {params.num_branches} branches, features have {num_branches}"
        )
    alphas = softmax_vec_fwd(params.gamma) if variant.soft_selection else None
    dropped, masks, pre_norm, normed, scaled = [], [], [], [], []
    for l, x in enumerate(mats):
        xd, mask = dropout_fwd(x, dropout, rng, training)
        w = params.w0[0 if variant.shared_w0 else l]
        b = params.b0[0 if variant.shared_w0 else l]
        h = linear_fwd(xd, w, b)
        _require_finite(f"first linear, branch {l}", h)
        n = l2_row_normalize_fwd(h) if variant.l2_norm else h
        s = alphas[l] * n if variant.soft_selection else n
        if keep_cache:
            dropped.append(xd)
            masks.append(mask)
            pre_norm.append(h)
            normed.append(n)
        scaled.append(s)
    u = aggregate_fwd(scaled, variant.aggregation)
    r = relu_fwd(u) if variant.hidden_relu else u
    rd, hidden_mask = dropout_fwd(r, dropout, rng, training)
    z = linear_fwd(rd, params.w1, params.b1)
    _require_finite("output linear", z)
    if not keep_cache:
        return z, None
    cache = {
        "alphas": alphas,
        "dropped": dropped,
        "masks": masks,
        "pre_norm": pre_norm,
        "normed": normed,
        "widths": [s.shape[1] for s in scaled],
        "u": u,
        "rd": rd,
        "hidden_mask": hidden_mask,
    }
    return z, cache


def forward_mats(
    params: ModelParams,
    mats,
    variant: ModelVariant,
    training: bool = False,
    rng: RngStream | None = None,
    dropout: float = 0.0,
) -> np.ndarray:
    """Forward pass over already row-sliced branch matrices.

    Every stage is row-local once features are precomputed, so slicing
    commutes with the forward map; training loops exploit this to evaluate
    only the rows they need.
    """
    logits, _ = _forward_mats(params, mats, variant, training, rng, dropout, False)
    return logits


def forward(
    params: ModelParams,
    fs: HopFeatureSet,
    variant: ModelVariant,
    training: bool = False,
    rng: RngStream | None = None,
    dropout: float = 0.0,
) -> np.ndarray:
    """Logits for every node. Eval mode is deterministic and RNG-free."""
    return forward_mats(params, fs.matrices(), variant, training, rng, dropout)


def loss_and_grads_mats(
    params: ModelParams,
    mats,
    labels: np.ndarray,
    variant: ModelVariant,
    rng: RngStream | None = None,
    dropout: float = 0.0,
):
    """Training-mode loss plus gradients for every tensor in ``params``.

    ``mats`` and ``labels`` cover exactly the rows being trained on. The
    gate logits always receive a gradient entry; it is zero when the
    variant disables soft-selection.
    """
    z, cache = _forward_mats(params, mats, variant, True, rng, dropout, True)
    all_rows = np.arange(z.shape[0])
    loss, probs = softmax_xent_fwd(z, labels, all_rows)
    dz = softmax_xent_bwd(probs, labels, all_rows)

    d_rd, d_w1, d_b1 = linear_bwd(dz, cache["rd"], params.w1)
    dr = dropout_bwd(d_rd, cache["hidden_mask"], dropout)
    du = relu_bwd(dr, cache["u"]) if variant.hidden_relu else dr
    d_scaled = aggregate_bwd(du, cache["widths"], variant.aggregation)

    num_branches = len(mats)
    alphas = cache["alphas"]
    d_alpha = np.zeros(num_branches)
    shared = variant.shared_w0
    d_w0 = [np.zeros_like(w) for w in params.w0]
    d_b0 = [np.zeros_like(b) for b in params.b0]
    for l in range(num_branches):
        ds = d_scaled[l]
        if variant.soft_selection:
            d_alpha[l] = np.einsum("ij,ij->", cache["normed"][l], ds)
            dn = alphas[l] * ds
        else:
            dn = ds
        dh = l2_row_normalize_bwd(dn, cache["pre_norm"][l]) if variant.l2_norm else dn
        slot = 0 if shared else l
        d_w0[slot] += cache["dropped"][l].T @ dh
        d_b0[slot] += dh.sum(axis=0)
    d_gamma = (
        softmax_vec_bwd(d_alpha, alphas)
        if variant.soft_selection
        else np.zeros_like(params.gamma)
    )

    grads = {}
    for i in range(len(params.w0)):
        grads[f"w0.{i}"] = d_w0[i]
        grads[f"b0.{i}"] = d_b0[i]
    grads["gamma"] = d_gamma
    grads["w1"] = d_w1
    grads["b1"] = d_b1
    return loss, grads


def loss_and_grads(
    params: ModelParams,
    fs: HopFeatureSet,
    labels: np.ndarray,
    train_idx,
    variant: ModelVariant,
    rng: RngStream | None = None,
    dropout: float = 0.0,
):
    """Loss and gradients over the training rows only."""
    train_idx = np.asarray(train_idx, dtype=np.int64)
    if train_idx.size == 0:
        raise ValueError("train_idx must be nonempty")
    mats = [m[train_idx] for m in fs.matrices()]
    return loss_and_grads_mats(
        params, mats, np.asarray(labels)[train_idx], variant, rng, dropout
    )


def predict(logits: np.ndarray) -> np.ndarray:
    """Row-wise argmax; ties resolve to the lowest class index."""
    _require_finite("logits", logits)
    return np.argmax(logits, axis=1)


def get_alphas(params: ModelParams) -> np.ndarray:
    """Current gate values softmax(gamma); strictly positive, sums to 1."""
    return softmax_vec_fwd(params.gamma)


def save_params(params: ModelParams, path, variant: ModelVariant, meta: dict | None = None) -> None:
    """Checkpoint to the self-describing binary container format."""
    header = {
        "format": "fsgnn-params",
        "version": 1,
        "variant": variant.to_dict(),
        "num_first_layers": len(params.w0),
        "meta": meta or {},
    }
    arrays = list(params.w0) + list(params.b0) + [params.gamma, params.w1, params.b1]
    write_container(path, _PARAMS_MAGIC, header, arrays)


def load_params(path):
    """Load a checkpoint; returns (params, variant, meta)."""
    header, arrays = read_container(path, _PARAMS_MAGIC)
    if header.get("format") != "fsgnn-params":
        raise ContainerError(f"{path}: not a parameter checkpoint")
    k = int(header["num_first_layers"])
    arrays = [a.copy() for a in arrays]
    params = ModelParams(
        w0=arrays[:k],
        b0=arrays[k : 2 * k],
        gamma=arrays[2 * k].reshape(-1),
        w1=arrays[2 * k + 1],
        b1=arrays[2 * k + 2].reshape(-1),
    )
    variant = ModelVariant(**header["variant"])
    return params, variant, header.get("meta", {})
