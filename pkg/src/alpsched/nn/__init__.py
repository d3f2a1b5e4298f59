"""Minimal dense tensor math with reverse-mode differentiation.

Float64 tensors up to rank 3, a tape of recorded operations walked once in
reverse topological order, standard layers (linear, GRU cell, scaled
dot-product attention), and Adam with element-wise gradient clipping.
"""
from .autodiff import (
    Tensor,
    backward,
    clamp,
    concat,
    exp,
    log,
    masked_softmax,
    matmul,
    mean,
    relu,
    reshape,
    sigmoid,
    softmax,
    square,
    tanh,
    tsum,
)
from .layers import attention, gru_cell, init_uniform, linear, multi_head_attention
from .optim import AdamConfig, adam_step, clip_gradients
from .store import CheckpointError, ParameterStore, load_checkpoint, save_checkpoint

__all__ = [
    "Tensor",
    "backward",
    "clamp",
    "concat",
    "exp",
    "log",
    "masked_softmax",
    "matmul",
    "mean",
    "relu",
    "reshape",
    "sigmoid",
    "softmax",
    "square",
    "tanh",
    "tsum",
    "attention",
    "gru_cell",
    "init_uniform",
    "linear",
    "multi_head_attention",
    "AdamConfig",
    "adam_step",
    "clip_gradients",
    "CheckpointError",
    "ParameterStore",
    "load_checkpoint",
    "save_checkpoint",
]
