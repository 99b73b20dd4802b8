from .tensor import (
    ShapeError,
    Tensor,
    add,
    apply_causal_mask,
    as_tensor,
    causal_attention,
    concat,
    cross_entropy_with_logits,
    embedding,
    gather_last,
    gelu,
    huber,
    layer_norm,
    logsumexp,
    matmul,
    mse,
    mul,
    relu,
    reshape,
    softmax,
    square,
    sub,
    tabs,
    take_axis1,
    tmean,
    transpose_last2,
    tsum,
)
from .nn import MissingGradientError, ParamSet, dense_init, embedding_init, grad_check
from .optim import adam_step
from .checkpoint import load_paramset, save_paramset

__all__ = [
    "ShapeError",
    "Tensor",
    "add",
    "apply_causal_mask",
    "as_tensor",
    "causal_attention",
    "concat",
    "cross_entropy_with_logits",
    "embedding",
    "gather_last",
    "gelu",
    "huber",
    "layer_norm",
    "logsumexp",
    "matmul",
    "mse",
    "mul",
    "relu",
    "reshape",
    "softmax",
    "square",
    "sub",
    "tabs",
    "take_axis1",
    "tmean",
    "transpose_last2",
    "tsum",
    "MissingGradientError",
    "ParamSet",
    "dense_init",
    "embedding_init",
    "grad_check",
    "adam_step",
    "load_paramset",
    "save_paramset",
]
