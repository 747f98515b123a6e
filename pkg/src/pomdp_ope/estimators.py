"""Partial-history importance weighting with HAC confidence intervals and
adaptive window selection.

The point estimator weights each reward Y_t by the product of
target-to-behavior probability ratios of the k+1 most recent actions
(overlapping windows), averaging over t = k+1..T and over trajectories:

    V_hat(k) = (1/n) sum_i (1/(T-k)) sum_{t=k+1}^T
               [ prod_{s=0}^{k} pi_{W_{t-s}}(X_{t-s}) / e_{W_{t-s}}(X_{t-s}) ] Y_{i,t}

Window length k = -1 denotes the unweighted sample mean baseline and k = 0
reweights the current step only. Larger k reduces the bias from evaluating
a policy that was not the one generating the data, at the price of
exponentially growing weight variance; the Lepski scan below picks k from
data by intersecting the Gaussian confidence intervals of successive
windows.

Every estimator here has a ``*_from_ratios`` twin operating on raw per-step
ratio sequences, used for environments (such as the glucose simulator) whose
observed state is continuous and therefore carries ratios directly instead
of finite policy tables.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import norm

from .core import Policy, Trajectory
from .errors import ConfigurationError, OverlapViolationError

# Switch window products to log space once the worst-case product magnitude
# could overflow or lose precision; below this, direct multiplication is exact
# enough and slightly faster.
_LOG_SPACE_THRESHOLD = 30.0


@dataclass(frozen=True)
class EstimatorConfig:
    """Window length k (>= -1), CI level alpha, and HAC bandwidth."""

    k: int
    alpha: float = 0.05
    bandwidth: float = 10.0

    def __post_init__(self):
        if self.k < -1:
            raise ConfigurationError("k must be >= -1")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigurationError("alpha must lie in (0, 1)")
        if self.bandwidth <= 0:
            raise ConfigurationError("bandwidth must be > 0")


@dataclass(frozen=True)
class BandwidthRule:
    """Bandwidth as a function of trajectory length: T**value or a constant."""

    kind: str  # "power" | "fixed"
    value: float

    def __post_init__(self):
        if self.kind not in ("power", "fixed"):
            raise ConfigurationError(f"unknown bandwidth rule kind {self.kind!r}")
        if self.kind == "fixed" and self.value <= 0:
            raise ConfigurationError("fixed bandwidth must be > 0")

    def bandwidth(self, T: int) -> float:
        if self.kind == "power":
            return float(T) ** self.value
        return self.value


DEFAULT_BANDWIDTH_RULE = BandwidthRule("power", 1.0 / 3.0)


@dataclass(frozen=True)
class EstimateReport:
    """Point estimate with HAC variance and Gaussian confidence interval."""

    value: float
    variance: float
    ci_lo: float
    ci_hi: float
    k: int
    n_units: int
    t_used: int
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "variance": self.variance,
            "ci": [self.ci_lo, self.ci_hi],
            "k": self.k,
            "n_units": self.n_units,
            "t_used": self.t_used,
            "flags": list(self.flags),
        }


@dataclass(frozen=True)
class LepskiResult:
    """Selected window plus the per-candidate reports the scan used."""

    selected_k: int
    reports: tuple[EstimateReport, ...]

    def report_for(self, k: int) -> EstimateReport:
        for rep in self.reports:
            if rep.k == k:
                return rep
        raise KeyError(k)

    def to_dict(self) -> dict:
        return {
            "selected_k": self.selected_k,
            "reports": [rep.to_dict() for rep in self.reports],
        }


def importance_ratios(traj: Trajectory, target: Policy, behavior: Policy) -> np.ndarray:
    """Per-step ratio pi_{W_t}(X_t) / e_{W_t}(X_t) along a trajectory.

    Raises OverlapViolationError naming (t, x, a) if the behavior policy has
    zero probability on a realized action to which the target assigns
    positive probability. Steps where the target probability is zero yield a
    zero ratio (the window weight vanishes).
    """
    pi = target.probs[traj.x, traj.w]
    e = behavior.probs[traj.x, traj.w]
    bad = (e == 0.0) & (pi > 0.0)
    if bad.any():
        t = int(np.flatnonzero(bad)[0])
        raise OverlapViolationError(t=t + 1, x=int(traj.x[t]), a=int(traj.w[t]))
    out = np.zeros(traj.T)
    ok = e > 0.0
    out[ok] = pi[ok] / e[ok]
    return out


def window_weights(ratios: np.ndarray, k: int) -> np.ndarray:
    """Products of k+1 consecutive ratios; entry j covers steps j..j+k.

    Large windows (where the worst-case log magnitude exceeds a safe bound)
    are accumulated in log space, with zero ratios tracked separately so a
    single zero still annihilates its window.
    """
    rho = np.asarray(ratios, dtype=float)
    if k < 0:
        raise ConfigurationError("window_weights requires k >= 0")
    n = rho.size - k
    if n < 1:
        raise ConfigurationError(f"need at least k+1={k + 1} steps, got {rho.size}")
    positive = rho > 0.0
    max_log = float(np.abs(np.log(rho[positive])).max()) if positive.any() else 0.0
    if (k + 1) * max_log <= _LOG_SPACE_THRESHOLD:
        w = np.ones(n)
        for s in range(k + 1):
            w = w * rho[s : s + n]
        return w
    log_rho = np.where(positive, np.log(np.where(positive, rho, 1.0)), 0.0)
    log_w = np.zeros(n)
    zeros = np.zeros(n, dtype=np.int64)
    for s in range(k + 1):
        log_w += log_rho[s : s + n]
        zeros += ~positive[s : s + n]
    return np.where(zeros > 0, 0.0, np.exp(log_w))


def weighted_terms(ratios: np.ndarray, rewards: np.ndarray, k: int) -> np.ndarray:
    """The summands of the estimator: window weight times reward.

    k = -1 returns the rewards unchanged (sample-mean baseline, all T terms).
    """
    y = np.asarray(rewards, dtype=float)
    if k == -1:
        return y.copy()
    if y.size < k + 2:
        raise ConfigurationError(
            f"trajectory length {y.size} too short for window k={k} (need T >= k+2)"
        )
    return window_weights(ratios, k) * y[k:]


def _as_ratio_lists(
    trajectories: Sequence[Trajectory], target: Policy, behavior: Policy
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    if not trajectories:
        raise ConfigurationError("need at least one trajectory")
    ratios = [importance_ratios(traj, target, behavior) for traj in trajectories]
    rewards = [traj.y for traj in trajectories]
    return ratios, rewards


def phiw_estimate_from_ratios(
    ratios: Sequence[np.ndarray], rewards: Sequence[np.ndarray], k: int
) -> float:
    """Partial-history importance-weighted estimate from raw ratio sequences."""
    if len(ratios) != len(rewards) or not ratios:
        raise ConfigurationError("ratios and rewards must be nonempty and aligned")
    per_unit = [weighted_terms(rho, y, k).mean() for rho, y in zip(ratios, rewards)]
    return float(np.mean(per_unit))


def phiw_estimate(
    trajectories: Sequence[Trajectory], target: Policy, behavior: Policy, k: int
) -> float:
    """Partial-history importance-weighted estimate of the target policy value.

    For k >= 0, each reward is weighted by the product of the k+1 most recent
    action-probability ratios; k = -1 is the plain mean of all rewards.
    Requires every trajectory to have T >= k+2 so the time sum is nonempty.
    """
    ratios, rewards = _as_ratio_lists(trajectories, target, behavior)
    return phiw_estimate_from_ratios(ratios, rewards, k)


def parzen_kernel(x):
    """Piecewise-cubic lag window: 1 - 6x^2 + 6|x|^3 on |x| <= 1/2,
    2(1-|x|)^3 on 1/2 <= |x| <= 1, and 0 outside [-1, 1]."""
    ax = np.abs(np.asarray(x, dtype=float))
    out = np.zeros_like(ax)
    inner = ax <= 0.5
    out[inner] = 1.0 - 6.0 * ax[inner] ** 2 + 6.0 * ax[inner] ** 3
    outer = (ax > 0.5) & (ax <= 1.0)
    out[outer] = 2.0 * (1.0 - ax[outer]) ** 3
    if out.ndim == 0:
        return float(out)
    return out


def _hac_from_terms(
    terms_per_unit: list[np.ndarray], bandwidth: float
) -> tuple[float, bool]:
    """Kernel-weighted long-run variance of the estimator summands.

    Terms are centered at their pooled mean (the sample analogue of the
    population centering constant). Computed per unit via the lag
    decomposition sum_t ytilde_t^2 + 2 sum_{j>=1} Psi(j/B) sum_t ytilde_t
    ytilde_{t+j}, then averaged across units. Returns (value, clamped);
    clamped marks a negative result forced to zero.
    """
    center = float(np.mean(np.concatenate(terms_per_unit)))
    per_unit = []
    for terms in terms_per_unit:
        yt = terms - center
        n = yt.size
        acc = float(yt @ yt)
        max_lag = min(int(math.floor(bandwidth)), n - 1)
        for j in range(1, max_lag + 1):
            psi = parzen_kernel(j / bandwidth)
            if psi == 0.0:
                continue
            acc += 2.0 * psi * float(yt[:-j] @ yt[j:])
        per_unit.append(acc / n)
    value = float(np.mean(per_unit))
    if value < 0.0:
        return 0.0, True
    return value, False


def hac_variance_from_ratios(
    ratios: Sequence[np.ndarray],
    rewards: Sequence[np.ndarray],
    k: int,
    bandwidth: float,
) -> float:
    if bandwidth <= 0:
        raise ConfigurationError("bandwidth must be > 0")
    terms = [weighted_terms(rho, y, k) for rho, y in zip(ratios, rewards)]
    value, clamped = _hac_from_terms(terms, bandwidth)
    if clamped:
        warnings.warn(
            "HAC variance came out negative (numerical issue; the lag window "
            "is positive semidefinite) and was clamped to 0",
            RuntimeWarning,
            stacklevel=2,
        )
    return value


def hac_variance(
    trajectories: Sequence[Trajectory],
    target: Policy,
    behavior: Policy,
    k: int,
    bandwidth: float,
) -> float:
    """Long-run variance estimate for the weighted reward series.

    Estimates the asymptotic variance of sqrt(n (T-k)) times the estimation
    error, combining lagged autocovariances with the piecewise-cubic lag
    window so that lags beyond the bandwidth are ignored. Negative output
    (possible only through floating-point cancellation) is clamped to zero
    with a warning.
    """
    ratios, rewards = _as_ratio_lists(trajectories, target, behavior)
    return hac_variance_from_ratios(ratios, rewards, k, bandwidth)


def estimate_with_ci_from_ratios(
    ratios: Sequence[np.ndarray],
    rewards: Sequence[np.ndarray],
    config: EstimatorConfig,
) -> EstimateReport:
    if len(ratios) != len(rewards) or not ratios:
        raise ConfigurationError("ratios and rewards must be nonempty and aligned")
    k = config.k
    terms = [weighted_terms(rho, y, k) for rho, y in zip(ratios, rewards)]
    t_used = min(t.size for t in terms)
    value = float(np.mean([t.mean() for t in terms]))
    variance, clamped = _hac_from_terms(terms, config.bandwidth)
    z = float(norm.ppf(1.0 - config.alpha / 2.0))
    half = z * math.sqrt(variance / (len(terms) * t_used))
    return EstimateReport(
        value=value,
        variance=variance,
        ci_lo=value - half,
        ci_hi=value + half,
        k=k,
        n_units=len(terms),
        t_used=t_used,
        flags=("hac_clamped",) if clamped else (),
    )


def estimate_with_ci(
    trajectories: Sequence[Trajectory],
    target: Policy,
    behavior: Policy,
    config: EstimatorConfig,
) -> EstimateReport:
    """Point estimate, HAC variance, and Gaussian confidence interval.

    The variance estimates the limit of n(T-k) * Var(V_hat), so the interval
    half-width is z_{1-alpha/2} * sqrt(variance / (n (T-k))). k = -1 reuses
    the same machinery with unit weights.
    """
    ratios, rewards = _as_ratio_lists(trajectories, target, behavior)
    return estimate_with_ci_from_ratios(ratios, rewards, config)


def select_window_from_intervals(
    candidates: Sequence[int], intervals: Sequence[tuple[float, float]]
) -> int:
    """Backward scan over candidate windows: keep intersecting confidence
    intervals from the largest candidate down; when the running intersection
    first becomes empty at candidate k, return the next candidate above k.
    If the intersection never empties, return the smallest candidate."""
    cands = list(candidates)
    if not cands:
        raise ConfigurationError("candidate set must be nonempty")
    if sorted(cands) != cands:
        raise ConfigurationError("candidates must be sorted ascending")
    if len(intervals) != len(cands):
        raise ConfigurationError("need one interval per candidate")
    lo, hi = -np.inf, np.inf
    for idx in range(len(cands) - 1, -1, -1):
        c_lo, c_hi = intervals[idx]
        lo = max(lo, c_lo)
        hi = min(hi, c_hi)
        if lo > hi:
            return cands[idx + 1]
    return cands[0]


def lepski_select_from_ratios(
    ratios: Sequence[np.ndarray],
    rewards: Sequence[np.ndarray],
    candidates: Sequence[int],
    alpha: float = 0.05,
    bandwidth_rule: BandwidthRule = DEFAULT_BANDWIDTH_RULE,
) -> LepskiResult:
    T = min(y.size for y in rewards)
    bandwidth = bandwidth_rule.bandwidth(T)
    reports = tuple(
        estimate_with_ci_from_ratios(
            ratios, rewards, EstimatorConfig(k=k, alpha=alpha, bandwidth=bandwidth)
        )
        for k in candidates
    )
    selected = select_window_from_intervals(
        list(candidates), [(rep.ci_lo, rep.ci_hi) for rep in reports]
    )
    return LepskiResult(selected_k=selected, reports=reports)


def lepski_select(
    trajectories: Sequence[Trajectory],
    target: Policy,
    behavior: Policy,
    candidates: Sequence[int],
    alpha: float = 0.05,
    bandwidth_rule: BandwidthRule = DEFAULT_BANDWIDTH_RULE,
) -> LepskiResult:
    """Adaptive window choice by interval intersection.

    Builds a confidence interval for every candidate window (ascending order
    required; -1 and 0 are allowed) and scans from the largest window down,
    returning the smallest window whose interval still meets the intersection
    of all larger ones. Deterministic given the reports.
    """
    ratios, rewards = _as_ratio_lists(trajectories, target, behavior)
    return lepski_select_from_ratios(
        ratios, rewards, candidates, alpha=alpha, bandwidth_rule=bandwidth_rule
    )


def corollary_window(n: int, T: int, t0: float, zeta: float, C0: float = 1.0) -> int:
    """Theoretically calibrated window length
    round(t0 / (t0 zeta + 2) * ln(C0 n T)), clamped to [0, T-1].

    Nondecreasing in n*T for fixed (t0, zeta, C0).
    """
    if t0 <= 0 or C0 <= 0:
        raise ConfigurationError("t0 and C0 must be > 0")
    if n * T < 1:
        raise ConfigurationError("n*T must be >= 1")
    if zeta < 0:
        raise ConfigurationError("zeta must be >= 0")
    k = int(np.round(t0 / (t0 * zeta + 2.0) * math.log(C0 * n * T)))
    return max(0, min(k, T - 1))
