"""Differentiable layer primitives with hand-derived backward passes.

Everything operates on float64 ndarrays. Each ``*_fwd`` returns the output
plus whatever its matching ``*_bwd`` needs; each ``*_bwd`` returns exact
gradients of the forward map. ``grad_check`` verifies any loss closure
against central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rng import RngStream

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

L2_NORM_EPS = 1e-12


def linear_fwd(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """x @ w + b with b broadcast over rows."""
    if x.shape[1] != w.shape[0]:
        raise ValueError(f"linear: {x.shape} @ {w.shape} mismatch")
    return x @ w + b


def linear_bwd(grad_out: np.ndarray, x: np.ndarray, w: np.ndarray):
    """Gradients of x @ w + b: returns (grad_x, grad_w, grad_b)."""
    return grad_out @ w.T, x.T @ grad_out, grad_out.sum(axis=0)


def relu_fwd(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_bwd(grad_out: np.ndarray, x: np.ndarray) -> np.ndarray:
    # Subgradient at exactly 0 is defined as 0.
    return np.where(x > 0.0, grad_out, 0.0)


def dropout_fwd(
    x: np.ndarray, rate: float, rng: RngStream | None, training: bool
):
    """Inverted dropout: zero entries with probability ``rate``, scale by 1/(1-rate).

    Returns (output, keep_mask); the mask is None when dropout was a no-op
    (eval mode or rate 0), in which case the output is ``x`` itself. Eval
    mode never consumes the RngStream.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x, None
    if rng is None:
        raise ValueError("training-mode dropout requires an RngStream")
    keep = rng.random(x.shape) >= rate
    return np.where(keep, x / (1.0 - rate), 0.0), keep


def dropout_bwd(grad_out: np.ndarray, keep_mask, rate: float) -> np.ndarray:
    if keep_mask is None:
        return grad_out
    return np.where(keep_mask, grad_out / (1.0 - rate), 0.0)


def l2_row_normalize_fwd(x: np.ndarray) -> np.ndarray:
    """Scale each row onto the unit sphere: x / max(||x||_2, eps)."""
    norms = np.sqrt((x * x).sum(axis=1, keepdims=True))
    return x / np.maximum(norms, L2_NORM_EPS)


def l2_row_normalize_bwd(grad_out: np.ndarray, x: np.ndarray) -> np.ndarray:
    # Per-row Jacobian I/r - x x^T / r^3 for r > eps; the eps branch is the
    # linear map x/eps, whose Jacobian is I/eps.
    norms = np.sqrt((x * x).sum(axis=1, keepdims=True))
    safe = np.maximum(norms, L2_NORM_EPS)
    y = x / safe
    dot = (y * grad_out).sum(axis=1, keepdims=True)
    gx = grad_out / safe
    gx -= np.where(norms > L2_NORM_EPS, y * dot / safe, 0.0)
    return gx


def softmax_vec_fwd(v: np.ndarray) -> np.ndarray:
    """Numerically stable softmax of a vector; strictly positive, sums to 1."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size < 1:
        raise ValueError(f"expected a nonempty vector, got shape {v.shape}")
    e = np.exp(v - v.max())
    return e / e.sum()


def softmax_vec_bwd(grad_out: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    # (diag(a) - a a^T) g  ==  a * (g - <a, g>)
    return alpha * (grad_out - float(alpha @ grad_out))


def aggregate_fwd(branches, scheme: str) -> np.ndarray:
    """Combine branch matrices: column-wise concatenation or elementwise sum."""
    if scheme == "cat":
        return np.concatenate(branches, axis=1)
    if scheme == "sum":
        first = branches[0]
        for other in branches[1:]:
            if other.shape != first.shape:
                raise ValueError(
                    f"sum aggregation needs equal shapes, got {first.shape} and {other.shape}"
                )
        out = branches[0].copy()
        for other in branches[1:]:
            out += other
        return out
    raise ValueError(f"unknown aggregation scheme {scheme!r}")


def aggregate_bwd(grad_out: np.ndarray, widths, scheme: str):
    """Split (cat) or broadcast (sum) the upstream gradient back to branches."""
    if scheme == "cat":
        edges = np.cumsum([0] + list(widths))
        if edges[-1] != grad_out.shape[1]:
            raise ValueError("branch widths do not add up to the gradient width")
        return [grad_out[:, a:b] for a, b in zip(edges[:-1], edges[1:])]
    if scheme == "sum":
        return [grad_out] * len(widths)
    raise ValueError(f"unknown aggregation scheme {scheme!r}")


def softmax_xent_fwd(logits: np.ndarray, labels: np.ndarray, index_set: np.ndarray):
    """Mean negative log-likelihood over ``index_set`` rows only.

    Returns (loss, probabilities) where the probabilities are the row-wise
    softmax of all logits, computed through a stable log-sum-exp.
    """
    index_set = np.asarray(index_set, dtype=np.int64)
    if index_set.size == 0:
        raise ValueError("index_set must be nonempty")
    z = logits - logits.max(axis=1, keepdims=True)
    log_probs = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = -log_probs[index_set, labels[index_set]].mean()
    return float(loss), np.exp(log_probs)


def softmax_xent_bwd(
    probs: np.ndarray, labels: np.ndarray, index_set: np.ndarray
) -> np.ndarray:
    """(softmax - one_hot) / |index_set| on indexed rows, zero elsewhere."""
    index_set = np.asarray(index_set, dtype=np.int64)
    grad = np.zeros_like(probs)
    grad[index_set] = probs[index_set]
    grad[index_set, labels[index_set]] -= 1.0
    grad[index_set] /= index_set.size
    return grad


@dataclass
class AdamState:
    """First/second moment accumulators plus the shared step counter."""

    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    t: int = 0

    @classmethod
    def for_params(cls, params) -> "AdamState":
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
        )


def adam_step(params, grads, state: AdamState, lr: float, weight_decay: float = 0.0):
    """One Adam update, in place on ``params``.

    Weight decay is classic L2: ``grad + wd * param`` feeds the moment
    updates. Moments use the standard (0.9, 0.999, 1e-8) constants with
    bias correction. Fully deterministic.
    """
    state.t += 1
    bc1 = 1.0 - ADAM_BETA1**state.t
    bc2 = 1.0 - ADAM_BETA2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError(f"param/grad shape mismatch: {p.shape} vs {g.shape}")
        if weight_decay != 0.0:
            g = g + weight_decay * p
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * (g * g)
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)
    return params, state


def grad_check(loss_fn, params: dict, h: float = 1e-5) -> dict:
    """Compare analytic gradients with central finite differences.

    ``loss_fn(params)`` must deterministically return ``(loss, grads)`` with
    ``grads`` keyed like ``params`` (freeze any dropout first). Entries of
    each tensor are perturbed in place by +-h and restored bit-exactly. The
    report maps tensor name to its max-norm relative error

        max|analytic - numeric| / max(max|analytic|, max|numeric|, 1e-12)

    so per-entry noise on tensors with healthy gradient scale cannot drown
    the signal. Never mutates the parameters it was given.
    """
    _, analytic = loss_fn(params)
    report = {}
    for name, p in params.items():
        numeric = np.zeros(p.size, dtype=np.float64)
        for i in range(p.size):
            orig = p.flat[i]
            p.flat[i] = orig + h
            loss_plus, _ = loss_fn(params)
            p.flat[i] = orig - h
            loss_minus, _ = loss_fn(params)
            p.flat[i] = orig
            numeric[i] = (loss_plus - loss_minus) / (2.0 * h)
        a = np.asarray(analytic[name], dtype=np.float64).reshape(-1)
        denom = max(np.abs(a).max(), np.abs(numeric).max(), 1e-12)
        report[name] = float(np.abs(a - numeric).max() / denom)
    return report
