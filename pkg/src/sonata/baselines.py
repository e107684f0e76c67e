"""Comparison algorithms without gradient tracking.

The push-sum subgradient scheme is the canonical reconstruction of the
classical method: mix the phi-scaled iterates, de-bias, take a subgradient
step at the de-biased point (the step lands rescaled by the fresh phi, as
any push-sum perturbation does).  Each agent descends its own share
f_i + penalty / I so the network-wide sum matches the true objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .algorithm import StepRule, StepSizeSchedule, TraceRecord
from .consensus import ConsensusState, mix, weighted_average
from .graphs import GraphSequence, WeightMatrix
from .metrics import compute_merits
from .problems import ProblemInstance, SetKind, reg_subgradient


class BaselineKind:
    SUBGRADIENT_PUSH = "subgradient_push"
    GRADIENT_PROJECTION = "gradient_projection"


@dataclass(frozen=True)
class BaselineConfig:
    kind: str = BaselineKind.SUBGRADIENT_PUSH
    schedule: StepSizeSchedule = field(default_factory=StepSizeSchedule)
    name: str = "baseline"

    def __post_init__(self):
        if self.kind not in (BaselineKind.SUBGRADIENT_PUSH, BaselineKind.GRADIENT_PROJECTION):
            raise ValueError(f"unknown baseline kind {self.kind!r}")
        if self.schedule.rule is StepRule.CONSTANT:
            raise ValueError("baselines run with diminishing step sizes")


def subgradient_push_step(
    state: ConsensusState, A: WeightMatrix, problem: ProblemInstance, alpha: float
) -> ConsensusState:
    """One push-sum mixing pass followed by a rescaled local subgradient step."""
    if problem.constraint.kind is not SetKind.FULL_SPACE:
        raise ValueError("the push-sum subgradient baseline is unconstrained only")
    phi_new, mixed = mix(A, state.phi, state.x)
    I = problem.num_agents
    sub = np.stack(
        [
            problem.costs[i].grad(mixed[i]) + reg_subgradient(problem.reg, mixed[i]) / I
            for i in range(I)
        ]
    )
    x_new = mixed - (alpha / phi_new)[:, None] * sub
    return ConsensusState(x_new, phi_new, state.y)


def gradient_projection_step(
    state: ConsensusState, A: WeightMatrix, problem: ProblemInstance, alpha: float
) -> ConsensusState:
    """Consensus mix, then a projected local gradient step at the mixed point."""
    if not problem.reg.is_zero:
        raise ValueError("the gradient projection baseline handles smooth objectives only")
    phi_new, mixed = mix(A, state.phi, state.x)
    x_new = np.stack(
        [
            problem.constraint.project(mixed[i] - alpha * problem.costs[i].grad(mixed[i]))
            for i in range(problem.num_agents)
        ]
    )
    return ConsensusState(x_new, phi_new, state.y)


def run_baseline(
    problem: ProblemInstance,
    config: BaselineConfig,
    seq: GraphSequence,
    n_iters: int,
    seed: int = 0,
    log_every: int = 1,
    x0: np.ndarray | None = None,
) -> list[TraceRecord]:
    """Run a baseline and log the same trace schema as the main loop.

    Baselines have no tracking variables, so the tracking error column is
    NaN.
    """
    from .algorithm import initial_iterates
    from .graphs import build_push_sum_weights

    step = (
        subgradient_push_step
        if config.kind == BaselineKind.SUBGRADIENT_PUSH
        else gradient_projection_step
    )
    x = initial_iterates(problem, seed, x0)
    state = ConsensusState(x, np.ones(problem.num_agents))
    alphas = config.schedule.values(n_iters)
    sign_aligned = problem.ground_truth is not None and problem.nmse_sign_aligned
    records: list[TraceRecord] = []
    exchanges = 0

    def log(n: int):
        merits = compute_merits(problem, state.x, sign_aligned_nmse=sign_aligned)
        xbar_phi = weighted_average(state)
        records.append(
            TraceRecord(
                iter=n,
                msg_exchanges=exchanges,
                alpha=float(alphas[n]),
                J=merits.J,
                J_inf=merits.J_inf,
                D=merits.D,
                D_inf=merits.D_inf,
                M=merits.M,
                nmse=merits.nmse,
                consensus_err=float(np.linalg.norm(state.x - xbar_phi[None, :])),
                tracking_err=math.nan,
                u_mean=problem.objective(state.x.mean(axis=0)),
            )
        )

    for n in range(n_iters + 1):
        if n % log_every == 0 or n == n_iters:
            log(n)
        if n == n_iters:
            break
        snapshot = seq.snapshot(n)
        exchanges += len(snapshot.edges)
        A = build_push_sum_weights(snapshot)
        state = step(state, A, problem, float(alphas[n]))
    return records
