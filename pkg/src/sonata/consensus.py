"""Perturbed condensed push-sum consensus over column-stochastic matrices.

Each agent i keeps a copy ``x_(i)`` and a positive scalar ``phi_i``.  One
step mixes the phi-scaled copies with a column-stochastic matrix and rescales
by the new phi, which makes the effective mixing matrix row stochastic and
locks consensus even on directed graphs.  A caller-supplied perturbation
``delta_i`` is added after the rescaling; the optimization layer uses it to
inject gradient information, the tracking layer to follow moving signals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .graphs import (
    GraphSequence,
    WeightKind,
    WeightMatrix,
    build_push_sum_weights,
)

#: tolerance for conserved quantities over long runs
CONSERVATION_TOL = 1e-9


@dataclass(frozen=True)
class ConsensusState:
    """Stacked per-agent state: copies ``x`` (I, m), scalars ``phi`` (I,)
    and optional tracking variables ``y`` (I, m)."""

    x: np.ndarray
    phi: np.ndarray
    y: np.ndarray | None = None

    def __post_init__(self):
        if self.x.ndim != 2:
            raise ValueError("x must be a stacked (num_agents, dim) array")
        I = self.x.shape[0]
        if self.phi.shape != (I,):
            raise ValueError("phi must have one scalar per agent")
        if np.any(self.phi <= 0):
            raise ValueError("phi must stay positive")
        if abs(float(self.phi.sum()) - I) > CONSERVATION_TOL:
            raise ValueError("sum of phi must equal the number of agents")
        if self.y is not None and self.y.shape != self.x.shape:
            raise ValueError("y must match the shape of x")

    @property
    def num_agents(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]


def initial_state(x0: np.ndarray, y0: np.ndarray | None = None) -> ConsensusState:
    """State with phi = 1 for every agent (the standard initialization)."""
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    return ConsensusState(x0, np.ones(x0.shape[0]), None if y0 is None else np.asarray(y0, float))


def mix(A: WeightMatrix, phi: np.ndarray, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One phi-corrected mixing pass: returns (A @ phi, de-biased mix of values)."""
    phi_new = A.entries @ phi
    mixed = (A.entries @ (phi[:, None] * values)) / phi_new[:, None]
    return phi_new, mixed


def push_sum_step(
    state: ConsensusState, A: WeightMatrix, delta: np.ndarray | None = None
) -> ConsensusState:
    """One perturbed condensed push-sum step.

    phi' = A phi and x'_(i) = (1/phi'_i) sum_j a_ij phi_j x_(j) + delta_i.
    With delta = 0 the phi-weighted sum of the copies is invariant.
    """
    if A.entries.shape[0] != state.num_agents:
        raise ValueError("weight matrix size does not match the state")
    if delta is not None and delta.shape != state.x.shape:
        raise ValueError("perturbation shape does not match the stacked copies")
    phi_new, mixed = mix(A, state.phi, state.x)
    if delta is not None:
        mixed = mixed + delta
    return ConsensusState(mixed, phi_new, state.y)


def effective_row_stochastic(
    A: WeightMatrix, phi_old: np.ndarray, phi_new: np.ndarray
) -> np.ndarray:
    """Equivalent row-stochastic weights w_ij = a_ij phi_j / phi'_i."""
    if np.max(np.abs(A.entries @ phi_old - phi_new)) > 1e-9:
        raise ValueError("phi_new is not the image of phi_old under A")
    return (A.entries * phi_old[None, :]) / phi_new[:, None]


def weighted_average(state: ConsensusState) -> np.ndarray:
    """The invariant-weighted network average (1/I) sum_i phi_i x_(i)."""
    return (state.phi @ state.x) / state.num_agents


def consensus_error(state: ConsensusState) -> float:
    """Euclidean norm of the stacked deviation from the weighted average."""
    return float(np.linalg.norm(state.x - weighted_average(state)[None, :]))


def tracking_error_to(state: ConsensusState, target: np.ndarray) -> float:
    """Stacked distance of the copies from a common target vector."""
    return float(np.linalg.norm(state.x - target[None, :]))


def track_average(
    signal: Callable[[int], np.ndarray],
    seq: GraphSequence,
    n_iters: int,
    weight_builder: Callable = build_push_sum_weights,
) -> np.ndarray:
    """Run dynamic average tracking of a time-varying signal.

    ``signal(n)`` returns the (I, m) stack of per-agent samples u_i^n.  The
    protocol starts from x_(i)^0 = u_i^0, phi = 1, and perturbs each step
    with the phi-rescaled signal increments, so the copies chase the running
    network average of the samples.  Returns the per-iteration distances
    ``|| x^n - 1 (x) avg(u^n) ||`` for n = 0 .. n_iters.
    """
    u = np.asarray(signal(0), dtype=float)
    state = initial_state(u)
    errors = [tracking_error_to(state, u.mean(axis=0))]
    for n in range(n_iters):
        A = weight_builder(seq.snapshot(n))
        u_next = np.asarray(signal(n + 1), dtype=float)
        phi_new, mixed = mix(A, state.phi, state.x)
        x_next = mixed + (u_next - u) / phi_new[:, None]
        state = ConsensusState(x_next, phi_new)
        u = u_next
        errors.append(tracking_error_to(state, u.mean(axis=0)))
    return np.asarray(errors)


@dataclass(frozen=True)
class NetworkConstants:
    """Connectivity constants of a B-strongly-connected weighted sequence.

    ``phi_lb``/``phi_ub`` bound the push-sum scalars for any compliant
    column-stochastic sequence; the pair (c0, rho) drives the geometric
    envelope of the consensus error; ``B_bar`` is the smallest window over
    which the envelope coefficient ``rho_Bbar`` drops below one; ``c`` is
    the crude one-step operator bound used in the step-size analysis.

    For doubly stochastic sequences the whole set tightens (phi stays at 1,
    c = 1, B_bar = B) and the envelope becomes min{1, rho^floor(t/B)}.

    Entries that would overflow the float range on large directed networks
    are propagated as ``inf`` rather than clamped: every downstream use is a
    majorization, so an infinite constant is a weak but still sound bound.
    """

    num_agents: int
    window_b: int
    kappa: float
    doubly_stochastic: bool
    phi_lb: float
    phi_ub: float
    c0: float
    rho: float
    kappa_tilde: float
    B_bar: float
    rho_Bbar: float
    c: float
    # log(2 c0 I) and -log(rho), kept separately so the envelope stays
    # computable when c0 overflows or rho rounds to 1.0
    log_2c0I: float
    neg_log_rho: float

    def decay_envelope(self, t: int) -> float:
        """Majorant of the t-step consensus contraction factor."""
        if self.doubly_stochastic:
            return min(1.0, self.rho ** (t // self.window_b))
        k = t // ((self.num_agents - 1) * self.window_b)
        log_val = self.log_2c0I - k * self.neg_log_rho
        geo = math.exp(log_val) if log_val < 700 else math.inf
        return min(math.sqrt(2) * self.num_agents, geo)


def network_constants(
    num_agents: int, window_b: int, kappa: float, doubly_stochastic: bool = False
) -> NetworkConstants:
    """Evaluate the connectivity constants for given (I, B, kappa).

    Rejects a single-agent network: a network of one agent needs no
    consensus and the constants are undefined there.
    """
    if num_agents < 2:
        raise ValueError("network constants need at least two agents")
    if window_b < 1:
        raise ValueError("connectivity window B must be >= 1")
    if not (0.0 < kappa < 1.0):
        raise ValueError("kappa must lie in (0, 1)")
    I, B = num_agents, window_b
    phi_lb = kappa ** (2 * (I - 1) * B)
    phi_ub = I - phi_lb
    if doubly_stochastic:
        rho = math.sqrt(1.0 - kappa / (2 * I * I))
        return NetworkConstants(
            num_agents=I,
            window_b=B,
            kappa=kappa,
            doubly_stochastic=True,
            phi_lb=1.0,
            phi_ub=1.0,
            c0=1.0 / (2 * I),
            rho=rho,
            kappa_tilde=math.nan,
            B_bar=B,
            rho_Bbar=rho,
            c=1.0,
            log_2c0I=0.0,
            neg_log_rho=-math.log(rho),
        )
    log_kt = (2 * (I - 1) * B + 1) * math.log(kappa) - math.log(I)
    kappa_tilde = math.exp(log_kt)
    u_log = (I - 1) * B * log_kt  # log of kappa_tilde^((I-1)B)
    u = math.exp(u_log)
    rho = 1.0 - u
    # -log(rho); falls back to u itself once 1 - u rounds to 1.0
    neg_log_rho = -math.log1p(-u) if u > 0 else 0.0
    if neg_log_rho == 0.0:
        neg_log_rho = u
    # c0 = 2 (1 + kappa_tilde^(-(I-1)B)), assembled in log space
    log_c0 = math.log(2.0) + np.logaddexp(0.0, -u_log)
    c0 = math.exp(log_c0) if log_c0 < 700 else math.inf
    log_2c0I = log_c0 + math.log(2 * I)
    if neg_log_rho > 0.0:
        k_star = math.floor(log_2c0I / neg_log_rho) + 1
        B_bar = k_star * (I - 1) * B
        rho_Bbar = math.exp(log_2c0I - k_star * neg_log_rho)
    else:  # decay too slow to resolve in floats
        B_bar = math.inf
        rho_Bbar = math.nan
    return NetworkConstants(
        num_agents=I,
        window_b=B,
        kappa=kappa,
        doubly_stochastic=False,
        phi_lb=phi_lb,
        phi_ub=phi_ub,
        c0=c0,
        rho=rho,
        kappa_tilde=kappa_tilde,
        B_bar=B_bar,
        rho_Bbar=rho_Bbar,
        c=I * math.sqrt(2 * I),
        log_2c0I=log_2c0I,
        neg_log_rho=neg_log_rho,
    )


def sequence_kappa(seq: GraphSequence, weight_builder: Callable, probe: int = 50) -> float:
    """Smallest weight realized over a probe window of the sequence.

    The generated models have slot-independent degree structure, so a short
    probe is exact for them; custom sequences are probed over a full period.
    """
    from .graphs import GraphModel

    if seq.model is GraphModel.CUSTOM:
        slots = range(len(seq.snapshots))
    elif seq.model in (GraphModel.STATIC_STRONGLY_CONNECTED, GraphModel.STATIC_UNDIRECTED):
        slots = range(1)
    else:
        slots = range(probe)
    return min(weight_builder(seq.snapshot(n)).kappa for n in slots)
