"""Model construction: layouts to initialized parameter sets."""

from dataclasses import dataclass, field

import numpy as np

from . import attention, operator, recurrent
from .layers import init_parameters
from .spec import ATTENTION, OPERATOR, RECURRENT

_LAYOUTS = {
    RECURRENT: recurrent.layout,
    OPERATOR: operator.layout,
    ATTENTION: attention.layout,
}


@dataclass
class TrainedModel:
    spec: object
    parameters: dict  # name -> Tensor, requires_grad=True
    seed: int
    normalization_stats: object = None
    epoch_losses: list = field(default_factory=list)

    def parameter_vector(self):
        return np.concatenate(
            [self.parameters[k].data.ravel() for k in sorted(self.parameters)]
        )


def layout(spec):
    return _LAYOUTS[spec.family](spec)


def parameter_count(spec):
    return sum(
        int(np.prod(shape, dtype=np.int64)) if shape else 1
        for _, shape, _ in layout(spec)
    )


def build(spec, seed):
    """Deterministically initialize an untrained model from a seed."""
    params = init_parameters(layout(spec), seed)
    return TrainedModel(spec=spec, parameters=params, seed=int(seed))
