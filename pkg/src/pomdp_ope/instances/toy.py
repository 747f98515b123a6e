"""A small benchmark POMDP: binary covariate, binary hidden state, binary
treatment.

The behavior policy treats with probability 1/2 regardless of the covariate;
the target policy treats exactly when the covariate is 1. Rewards are
Gaussian around 0.5*w*x*h + 0.5*h with standard deviation 0.1, so the hidden
state drives the outcome and the treatment pays off only in the (1, 1)
joint state. Exact oracles: the stationary laws round to (0.24, 0.20, 0.20,
0.35) under the behavior policy and (0.09, 0.10, 0.10, 0.71) under the
target, with long-run rewards 0.37 and 0.76.
"""

from __future__ import annotations

import numpy as np

from ..core import Gaussian, PomdpModel, Policy

# Joint states ordered (x, h) = (0,0), (0,1), (1,0), (1,1).
CONTROL_KERNEL = np.array(
    [
        [0.30, 0.30, 0.20, 0.20],
        [0.20, 0.30, 0.30, 0.20],
        [0.20, 0.10, 0.50, 0.20],
        [0.20, 0.20, 0.30, 0.30],
    ]
)

TREAT_KERNEL = np.array(
    [
        [0.75, 0.10, 0.10, 0.05],
        [0.25, 0.60, 0.05, 0.10],
        [0.05, 0.10, 0.15, 0.70],
        [0.05, 0.05, 0.05, 0.85],
    ]
)

REWARD_NOISE_SD = 0.1


def toy_model() -> tuple[PomdpModel, Policy, Policy]:
    """Build the benchmark model; returns (model, behavior, target)."""
    reward = tuple(
        tuple(
            Gaussian(mean=0.5 * a * x * h + 0.5 * h, sd=REWARD_NOISE_SD)
            for a in range(2)
        )
        for x in range(2)
        for h in range(2)
    )
    model = PomdpModel(
        num_x=2,
        num_h=2,
        num_actions=2,
        transition=np.stack([CONTROL_KERNEL, TREAT_KERNEL]),
        reward=reward,
    )
    behavior = Policy(probs=np.array([[0.5, 0.5], [0.5, 0.5]]))
    target = Policy(probs=np.array([[1.0, 0.0], [0.0, 1.0]]))
    return model, behavior, target
