"""Finite POMDP models, policies, trajectory simulation, and exact chain
analysis.

The joint state s ranges over observed-covariate x hidden-state pairs,
flattened row-major as s = x * num_h + h. A policy sees only x. All
operations are pure functions of their inputs; model and policy arrays are
frozen after validation and safe to share across threads.

Chain oracles provided here:

- ``policy_transition_matrix``: the state kernel induced by a policy,
  M[s, s'] = sum_a pi_a(x(s)) T[a, s, s'].
- ``stationary_distribution``: power iteration from a uniform start.
- ``policy_value_exact``: expected reward under the stationary law.
- ``mixing_overlap_report``: Dobrushin one-step contraction coefficient of
  the target kernel (a computable certificate of geometric mixing) together
  with the log overlap constant max ln(pi_a(x) / e_a(x)).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import ConfigurationError, MixingFailureError
from .rng import make_rng

ROW_SUM_TOL = 1e-12


@dataclass(frozen=True)
class Gaussian:
    """Normal reward with standard deviation ``sd`` (not variance)."""

    mean: float
    sd: float

    def __post_init__(self):
        if self.sd < 0:
            raise ConfigurationError(f"reward sd must be >= 0, got {self.sd}")


@dataclass(frozen=True)
class PointMass:
    """Deterministic reward."""

    value: float


RewardSpec = Union[Gaussian, PointMass]


def _reward_mean_sd(spec: RewardSpec) -> tuple[float, float]:
    if isinstance(spec, Gaussian):
        return spec.mean, spec.sd
    if isinstance(spec, PointMass):
        return spec.value, 0.0
    raise ConfigurationError(f"unknown reward descriptor {spec!r}")


@dataclass(frozen=True, eq=False)
class PomdpModel:
    """Finite POMDP with per-action transition tensor and per-(state, action)
    reward law.

    transition has shape (num_actions, S, S) with S = num_x * num_h; every
    row transition[a][s] is a probability vector. reward[s][a] is a
    ``Gaussian`` or ``PointMass``.
    """

    num_x: int
    num_h: int
    num_actions: int
    transition: np.ndarray
    reward: tuple[tuple[RewardSpec, ...], ...]
    reward_mean: np.ndarray = field(init=False, repr=False)
    reward_sd: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.num_x < 1 or self.num_h < 1:
            raise ConfigurationError("num_x and num_h must be >= 1")
        if self.num_actions < 2:
            raise ConfigurationError("num_actions must be >= 2")
        s = self.num_states
        trans = np.asarray(self.transition, dtype=float)
        if trans.shape != (self.num_actions, s, s):
            raise ConfigurationError(
                f"transition shape {trans.shape} != {(self.num_actions, s, s)}"
            )
        if (trans < 0).any():
            raise ConfigurationError("transition entries must be >= 0")
        rowsum = trans.sum(axis=2)
        if np.abs(rowsum - 1.0).max() > ROW_SUM_TOL:
            worst = float(np.abs(rowsum - 1.0).max())
            raise ConfigurationError(
                f"transition rows must sum to 1 within {ROW_SUM_TOL}, worst deviation {worst:.3e}"
            )
        reward = tuple(tuple(row) for row in self.reward)
        if len(reward) != s or any(len(row) != self.num_actions for row in reward):
            raise ConfigurationError(
                f"reward must be {s} x {self.num_actions} descriptors"
            )
        means = np.empty((s, self.num_actions))
        sds = np.empty((s, self.num_actions))
        for i, row in enumerate(reward):
            for a, spec in enumerate(row):
                means[i, a], sds[i, a] = _reward_mean_sd(spec)
        trans.setflags(write=False)
        means.setflags(write=False)
        sds.setflags(write=False)
        object.__setattr__(self, "transition", trans)
        object.__setattr__(self, "reward", reward)
        object.__setattr__(self, "reward_mean", means)
        object.__setattr__(self, "reward_sd", sds)

    @property
    def num_states(self) -> int:
        return self.num_x * self.num_h

    def state_x(self, s: int) -> int:
        return s // self.num_h

    def state_h(self, s: int) -> int:
        return s % self.num_h

    @property
    def x_of_state(self) -> np.ndarray:
        """Covariate index of each joint state, shape (S,)."""
        return np.arange(self.num_states) // self.num_h


@dataclass(frozen=True, eq=False)
class Policy:
    """Map from observed covariate to a probability vector over actions."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 2:
            raise ConfigurationError(f"policy probs must be 2-D, got shape {p.shape}")
        if (p < 0).any() or (p > 1 + ROW_SUM_TOL).any():
            raise ConfigurationError("policy probabilities must lie in [0, 1]")
        if np.abs(p.sum(axis=1) - 1.0).max() > ROW_SUM_TOL:
            raise ConfigurationError(f"policy rows must sum to 1 within {ROW_SUM_TOL}")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def num_x(self) -> int:
        return self.probs.shape[0]

    @property
    def num_actions(self) -> int:
        return self.probs.shape[1]


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Aligned (x, h, w, y) sequences recorded after a burn-in period."""

    x: np.ndarray
    h: np.ndarray
    w: np.ndarray
    y: np.ndarray
    seed: int
    burn_in: int

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.int64)
        h = np.asarray(self.h, dtype=np.int64)
        w = np.asarray(self.w, dtype=np.int64)
        y = np.asarray(self.y, dtype=float)
        n = len(y)
        if n < 1 or not (len(x) == len(h) == len(w) == n):
            raise ConfigurationError("trajectory sequences must share a length T >= 1")
        for arr in (x, h, w, y):
            arr.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "y", y)

    @property
    def T(self) -> int:
        return len(self.y)


@dataclass(frozen=True)
class MixingOverlapReport:
    """One-step contraction coefficient of the target kernel, the implied
    mixing time, and the log overlap constant of target vs. behavior."""

    dobrushin: float
    mixing_time: float
    overlap_zeta: float
    overlap_violated: bool = False


def _check_dimensions(model: PomdpModel, policy: Policy) -> None:
    if policy.num_x != model.num_x or policy.num_actions != model.num_actions:
        raise ConfigurationError(
            f"policy shape {policy.probs.shape} does not match model "
            f"({model.num_x} covariates, {model.num_actions} actions)"
        )


def policy_transition_matrix(model: PomdpModel, policy: Policy) -> np.ndarray:
    """State kernel induced by a policy: M[s, s'] = sum_a pi_a(x(s)) T[a, s, s']."""
    _check_dimensions(model, policy)
    per_state = policy.probs[model.x_of_state]  # (S, A)
    return np.einsum("sa,asz->sz", per_state, model.transition)


def stationary_distribution(
    kernel: np.ndarray, tol: float = 1e-12, max_iter: int = 10**6
) -> np.ndarray:
    """Stationary distribution of a row-stochastic kernel by power iteration
    from the uniform distribution.

    Returns d with ||d @ kernel - d||_1 <= tol. Raises MixingFailureError
    (carrying the last iterate and residual) if max_iter is exhausted.
    """
    M = np.asarray(kernel, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ConfigurationError(f"kernel must be square, got shape {M.shape}")
    if tol <= 0:
        raise ConfigurationError("tol must be > 0")
    if (M < 0).any() or np.abs(M.sum(axis=1) - 1.0).max() > 1e-9:
        raise ConfigurationError("kernel must be row-stochastic")
    d = np.full(M.shape[0], 1.0 / M.shape[0])
    residual = np.inf
    for _ in range(max_iter):
        d_next = d @ M
        residual = float(np.abs(d_next - d).sum())
        d = d_next
        if residual <= tol:
            # Fixed-point check on the returned iterate, not its predecessor.
            if float(np.abs(d @ M - d).sum()) <= tol:
                return d / d.sum()
    raise MixingFailureError(d, residual, max_iter)


def policy_value_exact(model: PomdpModel, policy: Policy, tol: float = 1e-12) -> float:
    """Long-run expected reward V = sum_s d(s) sum_a pi_a(x(s)) E[Y | s, a]."""
    _check_dimensions(model, policy)
    d = stationary_distribution(policy_transition_matrix(model, policy), tol=tol)
    per_state = policy.probs[model.x_of_state]
    return float(d @ (per_state * model.reward_mean).sum(axis=1))


def dobrushin_coefficient(kernel: np.ndarray) -> float:
    """Half the maximum L1 distance between any two rows of the kernel."""
    M = np.asarray(kernel, dtype=float)
    if M.shape[0] == 1:
        return 0.0
    diffs = np.abs(M[:, None, :] - M[None, :, :]).sum(axis=2)
    return float(diffs.max()) / 2.0


def mixing_overlap_report(
    model: PomdpModel, target: Policy, behavior: Policy
) -> MixingOverlapReport:
    """Contraction and overlap diagnostics for a (target, behavior) pair.

    The Dobrushin coefficient of the target kernel is a valid one-step total
    variation contraction rate, so exp(-1/mixing_time) certifies geometric
    mixing. If the behavior policy puts zero mass on an action the target
    policy can take, overlap_zeta is +inf and overlap_violated is set instead
    of silently returning a number.
    """
    _check_dimensions(model, target)
    _check_dimensions(model, behavior)
    coeff = min(dobrushin_coefficient(policy_transition_matrix(model, target)), 1.0)
    if coeff <= 0.0:
        mixing_time = 0.0
    elif coeff >= 1.0:
        mixing_time = np.inf
    else:
        mixing_time = -1.0 / np.log(coeff)
    pi = target.probs
    e = behavior.probs
    support = pi > 0
    violated = bool((support & (e == 0)).any())
    if violated:
        zeta = np.inf
    else:
        zeta = float(np.log(pi[support] / e[support]).max())
    return MixingOverlapReport(
        dobrushin=coeff,
        mixing_time=float(mixing_time),
        overlap_zeta=zeta,
        overlap_violated=violated,
    )


def simulate(
    model: PomdpModel,
    behavior: Policy,
    T: int,
    burn_in: int = 100,
    seed: int = 0,
) -> Trajectory:
    """Simulate one trajectory of length T under the behavior policy.

    Runs burn_in + T steps from a uniform random initial joint state; each
    step draws the action from behavior(x), the reward from the (state,
    action) reward law, and the next state from the transition tensor. Only
    the last T steps are recorded. Identical arguments produce a bit-identical
    trajectory.
    """
    return simulate_batch(model, behavior, T, burn_in, [seed])[0]


def simulate_batch(
    model: PomdpModel,
    behavior: Policy,
    T: int,
    burn_in: int,
    seeds: Sequence[int],
) -> list[Trajectory]:
    """Simulate one trajectory per seed, vectorizing the time loop across
    seeds.

    Each seed drives its own random stream with a fixed consumption order
    (initial state, then per-step action/transition uniforms, then reward
    normals), so the result for a given seed does not depend on which other
    seeds share the batch. Equivalent to, and tested against, a loop of
    single-seed ``simulate`` calls.
    """
    _check_dimensions(model, behavior)
    if T < 1:
        raise ConfigurationError("T must be >= 1")
    if burn_in < 0:
        raise ConfigurationError("burn_in must be >= 0")
    out: list[Trajectory] = []
    total = T + burn_in
    # Chunk so uniforms + normals stay within ~100 MB regardless of T.
    chunk = max(1, int(4_000_000 // max(total, 1)))
    for start in range(0, len(seeds), chunk):
        out.extend(_simulate_chunk(model, behavior, T, burn_in, seeds[start : start + chunk]))
    return out


def _simulate_chunk(
    model: PomdpModel,
    behavior: Policy,
    T: int,
    burn_in: int,
    seeds: Sequence[int],
) -> list[Trajectory]:
    n = len(seeds)
    total = T + burn_in
    num_s = model.num_states
    uu = np.empty((n, total, 2))
    zz = np.empty((n, total))
    state = np.empty(n, dtype=np.int64)
    for r, sd in enumerate(seeds):
        rng = make_rng(sd)
        state[r] = rng.integers(0, num_s)
        uu[r] = rng.random((total, 2))
        zz[r] = rng.standard_normal(total)

    cum_pol = np.cumsum(behavior.probs, axis=1)
    cum_trans = np.cumsum(model.transition, axis=2)
    x_of_state = model.x_of_state
    xs = np.empty((n, T), dtype=np.int64)
    hs = np.empty((n, T), dtype=np.int64)
    ws = np.empty((n, T), dtype=np.int64)
    ys = np.empty((n, T))
    for t in range(total):
        x = x_of_state[state]
        w = (uu[:, t, 0, None] >= cum_pol[x]).sum(axis=1)
        y = model.reward_mean[state, w] + model.reward_sd[state, w] * zz[:, t]
        if t >= burn_in:
            j = t - burn_in
            xs[:, j] = x
            hs[:, j] = state % model.num_h
            ws[:, j] = w
            ys[:, j] = y
        state = (uu[:, t, 1, None] >= cum_trans[w, state]).sum(axis=1)
    return [
        Trajectory(x=xs[r], h=hs[r], w=ws[r], y=ys[r], seed=int(seeds[r]), burn_in=burn_in)
        for r in range(n)
    ]
