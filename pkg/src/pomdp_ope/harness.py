"""Seeded Monte Carlo experiment runner.

Replications are independent work items: replication r of horizon index ti
draws its trajectory from the stream hash(master_seed, ti, r), every window
length is evaluated on that same trajectory (a paired design), and results
are gathered into preallocated per-replication arrays before aggregation.
Output is therefore bit-identical for a given spec no matter how many
worker threads run it (cap with the OPE_THREADS environment variable or the
``workers`` argument).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .core import Policy, PomdpModel, policy_value_exact, simulate_batch
from .errors import ConfigurationError, OverlapViolationError
from .estimators import (
    BandwidthRule,
    DEFAULT_BANDWIDTH_RULE,
    EstimatorConfig,
    estimate_with_ci_from_ratios,
    select_window_from_intervals,
)
from .instances.glucose import (
    DEFAULT_ORACLE_HOURS,
    DEFAULT_ORACLE_RUNS,
    DEFAULT_ORACLE_SEED,
    glucose_rewards_and_ratios,
    target_value_oracle,
)
from .instances.hard import hard_instance_pair, params_from_mixing_time
from .instances.toy import toy_model
from .rng import derive_seed

DEFAULT_BURN_IN = 100


# ---------------------------------------------------------------------------
# Environments


class FiniteEnvironment:
    """Finite POMDP with exact value oracle."""

    def __init__(self, name: str, model: PomdpModel, behavior: Policy, target: Policy):
        self.name = name
        self.model = model
        self.behavior = behavior
        self.target = target

    def rewards_and_ratios(
        self, T: int, burn_in: int, seeds: Sequence[int]
    ) -> tuple[np.ndarray, np.ndarray]:
        trajs = simulate_batch(self.model, self.behavior, T, burn_in, seeds)
        X = np.stack([tr.x for tr in trajs])
        W = np.stack([tr.w for tr in trajs])
        Y = np.stack([tr.y for tr in trajs])
        pi = self.target.probs[X, W]
        e = self.behavior.probs[X, W]
        bad = (e == 0.0) & (pi > 0.0)
        if bad.any():
            r, t = np.argwhere(bad)[0]
            raise OverlapViolationError(
                t=int(t) + 1, x=int(X[r, t]), a=int(W[r, t]), env=self.name
            )
        rho = np.zeros_like(pi)
        ok = e > 0.0
        rho[ok] = pi[ok] / e[ok]
        return Y, rho

    def oracle(self) -> tuple[float, dict]:
        return policy_value_exact(self.model, self.target), {"kind": "exact", "tol": 1e-12}


class GlucoseEnvironment:
    """Blood-glucose simulator with a cached Monte Carlo value oracle."""

    def __init__(
        self,
        oracle_runs: int = DEFAULT_ORACLE_RUNS,
        oracle_hours: int = DEFAULT_ORACLE_HOURS,
        oracle_seed: int = DEFAULT_ORACLE_SEED,
        oracle_burn_in: int = 50,
    ):
        self.name = "glucose"
        self.oracle_runs = oracle_runs
        self.oracle_hours = oracle_hours
        self.oracle_seed = oracle_seed
        self.oracle_burn_in = oracle_burn_in

    def rewards_and_ratios(
        self, T: int, burn_in: int, seeds: Sequence[int]
    ) -> tuple[np.ndarray, np.ndarray]:
        return glucose_rewards_and_ratios(T, burn_in, seeds)

    def oracle(self) -> tuple[float, dict]:
        return target_value_oracle(
            runs=self.oracle_runs,
            hours=self.oracle_hours,
            burn_in=self.oracle_burn_in,
            seed=self.oracle_seed,
        )


def parse_hard_spec(text: str) -> dict[str, float]:
    """Parse 'Q=3,t0=1,zeta=0.69,M1=1,M2=2,Delta=0.5' into a dict."""
    out: dict[str, float] = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ConfigurationError(f"bad hard-instance parameter {part!r}")
        key, _, value = part.partition("=")
        key = key.strip()
        if key not in ("Q", "t0", "zeta", "M1", "M2", "Delta"):
            raise ConfigurationError(f"unknown hard-instance parameter {key!r}")
        try:
            out[key] = float(value)
        except ValueError as exc:
            raise ConfigurationError(f"bad value for {key!r}: {value!r}") from exc
    for key in ("Q", "t0", "zeta", "M1", "M2"):
        if key not in out:
            raise ConfigurationError(f"hard-instance spec missing {key!r}")
    return out


def make_environment(env_id: str, **glucose_overrides):
    """Build a named environment: 'toy', 'glucose', or 'hard:<params>'.

    Hard-instance sweeps simulate and evaluate the first (high-mean)
    instance of the pair.
    """
    if env_id == "toy":
        model, behavior, target = toy_model()
        return FiniteEnvironment("toy", model, behavior, target)
    if env_id == "glucose":
        return GlucoseEnvironment(**glucose_overrides)
    if env_id.startswith("hard:"):
        kv = parse_hard_spec(env_id[len("hard:") :])
        params = params_from_mixing_time(
            Q=int(kv["Q"]),
            t0=kv["t0"],
            zeta=kv["zeta"],
            M1=kv["M1"],
            M2=kv["M2"],
            Delta=kv.get("Delta", kv["M1"] / 2.0),
        )
        hi, _lo, behavior, target = hard_instance_pair(params)
        return FiniteEnvironment(env_id, hi, behavior, target)
    raise ConfigurationError(f"unknown environment {env_id!r}")


# ---------------------------------------------------------------------------
# Sweeps


@dataclass(frozen=True)
class SweepSpec:
    """What to run: environment, windows, horizons, replication count, and
    the shared randomness / inference settings."""

    environment: str
    k_values: tuple[int, ...]
    T_values: tuple[int, ...]
    replications: int
    burn_in: int = DEFAULT_BURN_IN
    master_seed: int = 0
    bandwidth: BandwidthRule = DEFAULT_BANDWIDTH_RULE
    alpha: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "k_values", tuple(int(k) for k in self.k_values))
        object.__setattr__(self, "T_values", tuple(int(t) for t in self.T_values))
        if self.replications < 1:
            raise ConfigurationError("replications must be >= 1")
        if not self.k_values or not self.T_values:
            raise ConfigurationError("k_values and T_values must be nonempty")
        if min(self.k_values) < -1:
            raise ConfigurationError("window lengths must be >= -1")
        if max(self.k_values) >= min(self.T_values):
            raise ConfigurationError("every k must be smaller than every T")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigurationError("alpha must lie in (0, 1)")

    def to_dict(self) -> dict:
        return {
            "environment": self.environment,
            "k_values": list(self.k_values),
            "T_values": list(self.T_values),
            "replications": self.replications,
            "burn_in": self.burn_in,
            "master_seed": self.master_seed,
            "bandwidth": {"kind": self.bandwidth.kind, "value": self.bandwidth.value},
            "alpha": self.alpha,
        }


@dataclass(frozen=True)
class SweepCell:
    """Aggregates for one (k, T) combination."""

    k: int
    T: int
    mse: float
    bias: float
    variance: float
    mean_estimate: float
    ci_coverage: float
    n_replications: int


@dataclass(frozen=True)
class SweepResult:
    spec: SweepSpec
    cells: tuple[SweepCell, ...]
    oracle: float
    oracle_provenance: dict = field(default_factory=dict)

    def cell(self, k: int, T: int) -> SweepCell:
        for c in self.cells:
            if c.k == k and c.T == T:
                return c
        raise KeyError((k, T))


def _resolve_workers(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get("OPE_THREADS", "1"))
    return max(1, workers)


def _chunk_ranges(n: int, chunk: int) -> list[tuple[int, int]]:
    return [(s, min(s + chunk, n)) for s in range(0, n, chunk)]


def _run_chunks(jobs, workers: int) -> None:
    """Execute side-effecting jobs (each writes a disjoint slice)."""
    if workers <= 1:
        for job in jobs:
            job()
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for fut in [pool.submit(job) for job in jobs]:
                fut.result()


def _auto_chunk(T: int, burn_in: int) -> int:
    # Keep per-chunk simulation buffers around tens of MB.
    return max(16, int(2_000_000 // max(T + burn_in, 1)))


def run_sweep(
    spec: SweepSpec, workers: int | None = None, chunk_size: int | None = None
) -> SweepResult:
    """Mean-squared-error sweep over (k, T).

    For each horizon index ti and replication r, simulates one behavior
    trajectory from stream hash(master_seed, ti, r) and evaluates every
    window length on it together with its confidence interval. Aggregates
    MSE, bias, variance, mean estimate, and CI coverage against the
    environment's value oracle. Results do not depend on workers or
    chunk_size (those only trade memory for parallelism).
    """
    env = make_environment(spec.environment)
    oracle, provenance = env.oracle()
    workers = _resolve_workers(workers)
    ks = spec.k_values
    cells: list[SweepCell] = []
    for ti, T in enumerate(spec.T_values):
        R = spec.replications
        est = np.empty((R, len(ks)))
        cover = np.empty((R, len(ks)), dtype=bool)
        bandwidth = spec.bandwidth.bandwidth(T)
        seeds = [derive_seed(spec.master_seed, ti, r) for r in range(R)]

        def job_for(start: int, stop: int, T=T, seeds=seeds, est=est, cover=cover, bandwidth=bandwidth):
            def job():
                Y, RHO = env.rewards_and_ratios(T, spec.burn_in, seeds[start:stop])
                for i in range(stop - start):
                    for ki, k in enumerate(ks):
                        rep = estimate_with_ci_from_ratios(
                            [RHO[i]],
                            [Y[i]],
                            EstimatorConfig(k=k, alpha=spec.alpha, bandwidth=bandwidth),
                        )
                        est[start + i, ki] = rep.value
                        cover[start + i, ki] = rep.ci_lo <= oracle <= rep.ci_hi
            return job

        chunk = chunk_size if chunk_size else _auto_chunk(T, spec.burn_in)
        jobs = [job_for(s, e) for s, e in _chunk_ranges(R, chunk)]
        _run_chunks(jobs, workers)
        for ki, k in enumerate(ks):
            col = est[:, ki]
            mean_est = float(col.mean())
            bias = mean_est - oracle
            variance = float(col.var())
            cells.append(
                SweepCell(
                    k=k,
                    T=T,
                    mse=float(((col - oracle) ** 2).mean()),
                    bias=bias,
                    variance=variance,
                    mean_estimate=mean_est,
                    ci_coverage=float(cover[:, ki].mean()),
                    n_replications=R,
                )
            )
    return SweepResult(
        spec=spec, cells=tuple(cells), oracle=oracle, oracle_provenance=provenance
    )


# ---------------------------------------------------------------------------
# Window-selection studies


@dataclass(frozen=True)
class LepskiRow:
    """Selection frequencies and MSE curves for one horizon."""

    T: int
    selection_freq: dict[int, float]
    mse_by_k: dict[int, float]
    mse_selected: float


@dataclass(frozen=True)
class LepskiStudyResult:
    spec: SweepSpec
    candidates: tuple[int, ...]
    rows: tuple[LepskiRow, ...]
    oracle: float
    oracle_provenance: dict = field(default_factory=dict)

    def row(self, T: int) -> LepskiRow:
        for r in self.rows:
            if r.T == T:
                return r
        raise KeyError(T)


def run_lepski_study(
    spec: SweepSpec,
    candidates: Sequence[int],
    workers: int | None = None,
    chunk_size: int | None = None,
) -> LepskiStudyResult:
    """Adaptive-window study: how often each candidate gets selected per
    horizon, and the MSE of the selected estimator next to every fixed
    window."""
    candidates = tuple(int(k) for k in candidates)
    if list(candidates) != sorted(candidates):
        raise ConfigurationError("candidates must be sorted ascending")
    env = make_environment(spec.environment)
    oracle, provenance = env.oracle()
    workers = _resolve_workers(workers)
    rows: list[LepskiRow] = []
    for ti, T in enumerate(spec.T_values):
        R = spec.replications
        est = np.empty((R, len(candidates)))
        sel = np.empty(R, dtype=np.int64)
        bandwidth = spec.bandwidth.bandwidth(T)
        seeds = [derive_seed(spec.master_seed, ti, r) for r in range(R)]

        def job_for(start: int, stop: int, T=T, seeds=seeds, est=est, sel=sel, bandwidth=bandwidth):
            def job():
                Y, RHO = env.rewards_and_ratios(T, spec.burn_in, seeds[start:stop])
                for i in range(stop - start):
                    intervals = []
                    for ki, k in enumerate(candidates):
                        rep = estimate_with_ci_from_ratios(
                            [RHO[i]],
                            [Y[i]],
                            EstimatorConfig(k=k, alpha=spec.alpha, bandwidth=bandwidth),
                        )
                        est[start + i, ki] = rep.value
                        intervals.append((rep.ci_lo, rep.ci_hi))
                    sel[start + i] = select_window_from_intervals(candidates, intervals)
            return job

        chunk = chunk_size if chunk_size else _auto_chunk(T, spec.burn_in)
        jobs = [job_for(s, e) for s, e in _chunk_ranges(R, chunk)]
        _run_chunks(jobs, workers)
        sel_idx = np.searchsorted(np.asarray(candidates), sel)
        sel_est = est[np.arange(R), sel_idx]
        rows.append(
            LepskiRow(
                T=T,
                selection_freq={
                    k: float((sel == k).mean()) for k in candidates
                },
                mse_by_k={
                    k: float(((est[:, ki] - oracle) ** 2).mean())
                    for ki, k in enumerate(candidates)
                },
                mse_selected=float(((sel_est - oracle) ** 2).mean()),
            )
        )
    return LepskiStudyResult(
        spec=spec,
        candidates=candidates,
        rows=tuple(rows),
        oracle=oracle,
        oracle_provenance=provenance,
    )


# ---------------------------------------------------------------------------
# Rate fits


@dataclass(frozen=True)
class RateFit:
    """OLS fit of log(rmse) against log(nT)."""

    slope: float
    intercept: float
    residuals: tuple[float, ...]
    r_squared: float


def fit_rate(points: Sequence[tuple[float, float]]) -> RateFit:
    """Least-squares slope of log(rmse) vs log(nT) with residual diagnostics.

    Accepts (nT, rmse) pairs; needs at least 3, all strictly positive.
    """
    if len(points) < 3:
        raise ConfigurationError("need at least 3 points to fit a rate")
    nt = np.array([p[0] for p in points], dtype=float)
    rmse = np.array([p[1] for p in points], dtype=float)
    if (nt <= 0).any() or (rmse <= 0).any():
        raise ConfigurationError("rate fit requires strictly positive inputs")
    lx = np.log(nt)
    ly = np.log(rmse)
    slope, intercept = np.polyfit(lx, ly, 1)
    fitted = slope * lx + intercept
    resid = ly - fitted
    total = float(((ly - ly.mean()) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / total if total > 0 else 1.0
    return RateFit(
        slope=float(slope),
        intercept=float(intercept),
        residuals=tuple(float(r) for r in resid),
        r_squared=r2,
    )


# ---------------------------------------------------------------------------
# Output files


def sweep_result_to_csv(result: SweepResult, path: Union[str, Path]) -> None:
    """CSV with header env,k,T,replications,mse,bias,variance,mean_estimate,
    ci_coverage,oracle; one row per (k, T) cell in spec order."""
    lines = ["env,k,T,replications,mse,bias,variance,mean_estimate,ci_coverage,oracle"]
    for cell in result.cells:
        lines.append(
            f"{result.spec.environment},{cell.k},{cell.T},{cell.n_replications},"
            f"{cell.mse:.17g},{cell.bias:.17g},{cell.variance:.17g},"
            f"{cell.mean_estimate:.17g},{cell.ci_coverage:.17g},{result.oracle:.17g}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def sweep_result_to_json(result: SweepResult) -> dict:
    """Companion document: spec echo plus oracle provenance and the seed
    derivation scheme."""
    return {
        "spec": result.spec.to_dict(),
        "oracle": result.oracle,
        "oracle_provenance": result.oracle_provenance,
        "seed_scheme": "stream(r, ti) = hash(master_seed, T_index=ti, replication=r)",
        "cells": [
            {
                "k": c.k,
                "T": c.T,
                "replications": c.n_replications,
                "mse": c.mse,
                "bias": c.bias,
                "variance": c.variance,
                "mean_estimate": c.mean_estimate,
                "ci_coverage": c.ci_coverage,
            }
            for c in result.cells
        ],
    }


def lepski_study_to_json(result: LepskiStudyResult) -> dict:
    return {
        "spec": result.spec.to_dict(),
        "candidates": list(result.candidates),
        "oracle": result.oracle,
        "oracle_provenance": result.oracle_provenance,
        "rows": [
            {
                "T": row.T,
                "selection_freq": {str(k): v for k, v in row.selection_freq.items()},
                "mse_by_k": {str(k): v for k, v in row.mse_by_k.items()},
                "mse_selected": row.mse_selected,
            }
            for row in result.rows
        ],
    }
