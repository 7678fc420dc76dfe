from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .gradcheck import GradcheckReport, gradcheck, relative_error
from .params import AdamState, Parameter, ParamSet, init_mlp, mlp_apply, mlp_layers
from .tensor import (
    DegenerateAttentionError,
    ShapeError,
    Tensor,
    add,
    as_tensor,
    concat,
    cumsum,
    div,
    exp,
    getitem,
    layer_norm,
    linear,
    masked_softmax,
    matmul,
    mean,
    mul,
    relu,
    reshape,
    sigmoid,
    softmax,
    square,
    stack,
    sub,
    tanh,
    tensor_sum,
    transpose,
)
