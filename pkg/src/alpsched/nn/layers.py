"""Network layers built on the autodiff primitives.

All layers operate on row-batched rank-2 tensors (one row per aircraft) and
share no state; parameters are passed in explicitly so a parameter store can
own them.
"""
from __future__ import annotations

import numpy as np

from .autodiff import Tensor, as_tensor, concat, masked_softmax, matmul, mul, sigmoid, tanh


def init_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    """Weight init: uniform(-1/sqrt(fan_in), +1/sqrt(fan_in))."""
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def linear(x, weight, bias=None) -> Tensor:
    """x @ weight (+ bias broadcast over rows)."""
    out = matmul(x, weight)
    if bias is not None:
        out = out + bias
    return out


def gru_cell(h_prev, message, weights: dict) -> Tensor:
    """Gated recurrent update of node states from aggregated messages.

    Standard gates on the concatenated [h, m] input:
        z = sigmoid([h, m] Wz + bz)        update gate
        r = sigmoid([h, m] Wr + br)        reset gate
        h~ = tanh([r*h, m] Wh + bh)        candidate
        h' = (1 - z) * h + z * h~
    The output stays inside (-1, 1) per channel whenever h_prev does, since
    it is a convex combination of h_prev and a tanh value.
    """
    h_prev = as_tensor(h_prev)
    message = as_tensor(message)
    if h_prev.shape != message.shape:
        raise ValueError(f"state/message width mismatch: {h_prev.shape} vs {message.shape}")
    hm = concat([h_prev, message], axis=1)
    z = sigmoid(linear(hm, weights["wz"], weights["bz"]))
    r = sigmoid(linear(hm, weights["wr"], weights["br"]))
    candidate_in = concat([mul(r, h_prev), message], axis=1)
    h_tilde = tanh(linear(candidate_in, weights["wh"], weights["bh"]))
    return (1.0 - z) * h_prev + z * h_tilde


def attention(queries, keys, values, d_k: int, mask: np.ndarray | None = None) -> Tensor:
    """Scaled dot-product attention over the neighbor mask.

    Scores q_i . k_j / sqrt(d_k) are row-softmaxed across j (restricted to
    `mask` when given; rows with no neighbors yield zero output) and used to
    mix the value rows.
    """
    queries, keys, values = as_tensor(queries), as_tensor(keys), as_tensor(values)
    scores = matmul(queries, transpose(keys)) * (1.0 / np.sqrt(d_k))
    if mask is None:
        mask = np.ones((queries.shape[0], keys.shape[0]), dtype=bool)
    alpha = masked_softmax(scores, mask, axis=1)
    return matmul(alpha, values)


def transpose(x) -> Tensor:
    x = as_tensor(x)
    out = Tensor(x.data.T, _parents=(x,), _backward=None)

    def backward_fn(g):
        if x.requires_grad:
            x._accumulate(g.T)

    out._backward = backward_fn
    return out


def multi_head_attention(h, weights: dict, heads: int, mask: np.ndarray | None = None) -> Tensor:
    """Multi-head self-attention; per-head projections of width hidden/heads,
    outputs concatenated back to the full width."""
    h = as_tensor(h)
    hidden = h.shape[1]
    if hidden % heads:
        raise ValueError(f"hidden width {hidden} not divisible by {heads} heads")
    d_k = hidden // heads
    outputs = []
    for k in range(heads):
        q = matmul(h, weights[f"wq{k}"])
        key = matmul(h, weights[f"wk{k}"])
        v = matmul(h, weights[f"wv{k}"])
        outputs.append(attention(q, key, v, d_k, mask))
    return concat(outputs, axis=1)
