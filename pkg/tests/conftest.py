from __future__ import annotations

import numpy as np
import pytest

from pomdp_ope import Gaussian, PointMass, Policy, PomdpModel
from pomdp_ope.instances import toy_model


@pytest.fixture(scope="session")
def toy():
    """(model, behavior, target) of the benchmark environment."""
    return toy_model()


def random_model(
    rng: np.random.Generator,
    num_x: int = 2,
    num_h: int = 2,
    num_actions: int = 2,
    point_mass: bool = False,
) -> PomdpModel:
    s = num_x * num_h
    transition = rng.dirichlet(np.ones(s), size=(num_actions, s))
    if point_mass:
        reward = tuple(
            tuple(PointMass(value=float(rng.normal())) for _ in range(num_actions))
            for _ in range(s)
        )
    else:
        reward = tuple(
            tuple(
                Gaussian(mean=float(rng.normal()), sd=float(rng.uniform(0.05, 0.5)))
                for _ in range(num_actions)
            )
            for _ in range(s)
        )
    return PomdpModel(
        num_x=num_x,
        num_h=num_h,
        num_actions=num_actions,
        transition=transition,
        reward=reward,
    )


def random_policy(rng: np.random.Generator, num_x: int = 2, num_actions: int = 2) -> Policy:
    return Policy(probs=rng.dirichlet(np.ones(num_actions), size=num_x))


def interior_policy(rng: np.random.Generator, num_x: int = 2, num_actions: int = 2) -> Policy:
    """Random policy with all probabilities bounded away from zero."""
    raw = rng.dirichlet(np.ones(num_actions), size=num_x)
    probs = 0.8 * raw + 0.2 / num_actions
    probs = probs / probs.sum(axis=1, keepdims=True)
    return Policy(probs=probs)
