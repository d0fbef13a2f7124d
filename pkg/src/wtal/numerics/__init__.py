from . import tensor as F
from .gradcheck import GradCheckError, GradCheckReport, grad_check, param_grad_check
from .optim import AdamState, adam_step
from .params import ParamSet, checked_matrix
from .rng import RngStream, seeded_rng
from .tensor import Tensor, no_grad

__all__ = [
    "F",
    "AdamState",
    "GradCheckError",
    "GradCheckReport",
    "ParamSet",
    "RngStream",
    "Tensor",
    "adam_step",
    "checked_matrix",
    "grad_check",
    "no_grad",
    "param_grad_check",
    "seeded_rng",
]
