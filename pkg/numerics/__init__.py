"""
MOTIONTOK Numerics Module
Differentiable operator contract, gradient oracle and checkpoints.
"""

from .ops import (
    FeatureMapSequence,
    bilinear_sample,
    bilinear_sample_torch,
    stop_gradient,
    straight_through,
    uniform_fan_in_,
    zero_,
    count_parameters,
)
from .gradcheck import grad_check, GradCheckReport
from .checkpoint import (
    serialize_checkpoint,
    deserialize_checkpoint,
    save_checkpoint,
    load_checkpoint,
)

__all__ = [
    'FeatureMapSequence',
    'bilinear_sample',
    'bilinear_sample_torch',
    'stop_gradient',
    'straight_through',
    'uniform_fan_in_',
    'zero_',
    'count_parameters',
    'grad_check',
    'GradCheckReport',
    'serialize_checkpoint',
    'deserialize_checkpoint',
    'save_checkpoint',
    'load_checkpoint',
]
