"""The distributed gradient-tracking SCA loop (SONATA) and its presets.

One iteration per agent: solve the strongly convex local model, move a step
alpha toward its solution, then run one phi-corrected consensus pass over
the iterates and one over the tracking variables, the latter perturbed by
the fresh gradient increments.  ATC mixes after the local step (and keeps
constrained iterates feasible); CAA mixes first and steps after, which is
only sound without constraints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable

import numpy as np

from .consensus import ConsensusState, NetworkConstants, weighted_average
from .graphs import (
    GraphModel,
    GraphSequence,
    WeightKind,
    WeightMatrix,
    build_metropolis_weights,
    build_push_sum_weights,
)
from .metrics import compute_merits
from .problems import ProblemInstance, SetKind, reg_value
from .surrogates import SurrogateKind, SurrogateSpec, solve_subproblem


class ConfigError(ValueError):
    """An algorithm configuration that cannot run on the given problem/graph."""


class StepRule(Enum):
    CONSTANT = "constant"
    DIMINISHING_POWER = "power"
    DIMINISHING_RECURSIVE = "recursive"


@dataclass(frozen=True)
class StepSizeSchedule:
    """Step-size sequence alpha^n.

    constant: alpha^n = alpha0 (optionally one value per agent);
    power: alpha0 / (n+1)^beta with beta in (0.5, 1];
    recursive: alpha^n = alpha^{n-1} (1 - mu alpha^{n-1}).
    Both diminishing rules vanish while their sums diverge.
    """

    rule: StepRule = StepRule.DIMINISHING_RECURSIVE
    alpha0: float = 0.5
    beta: float = 1.0
    mu: float = 0.01
    per_agent: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.rule is StepRule.CONSTANT:
            if not (0.0 < self.alpha0 <= 1.0):
                raise ValueError("constant step needs alpha in (0, 1]")
            if self.per_agent is not None and any(
                not (0.0 < a <= 1.0) for a in self.per_agent
            ):
                raise ValueError("per-agent steps must lie in (0, 1]")
        else:
            if self.per_agent is not None:
                raise ValueError("per-agent steps only combine with the constant rule")
            if self.rule is StepRule.DIMINISHING_POWER:
                if not (0.5 < self.beta <= 1.0):
                    raise ValueError("power rule needs beta in (0.5, 1]")
                if self.alpha0 <= 0:
                    raise ValueError("alpha0 must be positive")
            else:
                if not (0.0 < self.alpha0 <= 1.0):
                    raise ValueError("recursive rule needs alpha0 in (0, 1]")
                if not (0.0 < self.mu < 1.0):
                    raise ValueError("recursive rule needs mu in (0, 1)")

    def values(self, n_iters: int) -> np.ndarray:
        """alpha^0 .. alpha^{n_iters} as a flat array (shared component)."""
        n = n_iters + 1
        if self.rule is StepRule.CONSTANT:
            return np.full(n, self.alpha0)
        if self.rule is StepRule.DIMINISHING_POWER:
            return self.alpha0 / np.arange(1.0, n + 1.0) ** self.beta
        out = np.empty(n)
        a = self.alpha0
        for k in range(n):
            out[k] = a
            a = a * (1.0 - self.mu * a)
        return out

    def step_for(self, alpha_shared: float) -> float | np.ndarray:
        if self.per_agent is not None:
            return np.asarray(self.per_agent)
        return alpha_shared


class Mixing(Enum):
    ATC = "atc"
    CAA = "caa"


class WeightRule(Enum):
    PUSH_SUM = "push_sum"
    METROPOLIS = "metropolis"

    def build(self, snapshot) -> WeightMatrix:
        if self is WeightRule.PUSH_SUM:
            return build_push_sum_weights(snapshot)
        return build_metropolis_weights(snapshot)


class Preset(Enum):
    SONATA_L = "sonata_l"
    NEXT_L = "next_l"
    AUG_DGM = "aug_dgm"
    DIGING = "diging"
    PUSH_DIGING = "push_diging"
    ADD_OPT = "add_opt"


@dataclass(frozen=True)
class AlgorithmConfig:
    surrogate: SurrogateSpec = field(default_factory=SurrogateSpec)
    schedule: StepSizeSchedule = field(default_factory=StepSizeSchedule)
    mixing: Mixing = Mixing.ATC
    weights: WeightRule = WeightRule.PUSH_SUM
    preset: Preset | None = None
    name: str = "sonata"


def apply_preset(
    preset: Preset, num_agents: int, schedule: StepSizeSchedule | None = None
) -> AlgorithmConfig:
    """Configuration reproducing a named special case.

    All presets linearize the local costs with proximal weight tau = I, so
    the subproblem collapses to x - y up to scaling.  The doubly stochastic
    family (NEXT-L, Aug-DGM, DIGing) forces Metropolis weights and therefore
    symmetric snapshots; DIGing and ADD-OPT mix before the local step (CAA),
    Aug-DGM and push-DIGing after it (ATC).
    """
    surrogate = SurrogateSpec(kind=SurrogateKind.LINEARIZATION, tau=float(num_agents))
    schedule = schedule or StepSizeSchedule()
    mixing = Mixing.CAA if preset in (Preset.DIGING, Preset.ADD_OPT) else Mixing.ATC
    weights = (
        WeightRule.METROPOLIS
        if preset in (Preset.NEXT_L, Preset.AUG_DGM, Preset.DIGING)
        else WeightRule.PUSH_SUM
    )
    return AlgorithmConfig(
        surrogate=surrogate,
        schedule=schedule,
        mixing=mixing,
        weights=weights,
        preset=preset,
        name=preset.value,
    )


@dataclass(frozen=True)
class StepBoundParams:
    """Problem and network quantities entering the constant-step bound."""

    L: float
    L_mx: float
    Ltilde_mx: float
    c_tau: float
    L_G: float
    sigma: float
    constants: NetworkConstants

    def __post_init__(self):
        if not (0.0 < self.sigma < 1.0):
            raise ValueError("sigma must lie in (0, 1)")
        if self.c_tau <= 0:
            raise ValueError("c_tau must be positive")

    @property
    def c_L(self) -> float:
        I = self.constants.num_agents
        return (self.L * math.sqrt(I) + self.L_mx + self.Ltilde_mx) / I

    @staticmethod
    def from_problem(
        problem: ProblemInstance,
        surrogate: SurrogateSpec,
        constants: NetworkConstants,
        sigma: float = 0.5,
    ) -> "StepBoundParams":
        lips = [c.lipschitz for c in problem.costs]
        l_g = problem.reg.lipschitz_gminus
        ltilde = max(
            surrogate.smooth_lipschitz(lips[i], i) for i in range(problem.num_agents)
        )
        return StepBoundParams(
            L=float(sum(lips)),
            L_mx=float(max(lips)),
            Ltilde_mx=ltilde + l_g,
            c_tau=surrogate.min_tau(problem.num_agents),
            L_G=l_g,
            sigma=sigma,
            constants=constants,
        )


def constant_step_bound(p: StepBoundParams) -> float:
    """Largest constant step covered by the convergence analysis.

    The minimum of a pure network branch and a curvature branch; for doubly
    stochastic weight sequences the tightened constants (c = 1, B_bar = B,
    phi bounds at 1) apply automatically through ``p.constants``.
    """
    k = p.constants
    if not math.isfinite(k.B_bar) or not math.isfinite(k.rho_Bbar):
        raise ValueError(
            "network constants too degenerate for a usable bound "
            "(decay window not representable)"
        )
    I = k.num_agents
    b_bar = float(k.B_bar)
    gap = 1.0 - k.rho_Bbar
    branch1 = gap * p.sigma / (math.sqrt(2.0) * k.c * b_bar)
    denom = (
        (p.L + p.L_G) / I
        + (2.0 * p.c_L * b_bar * k.c / gap) * math.sqrt(2.0 / (1.0 - p.sigma**2))
        + (12.0 * p.L_mx * b_bar**2 * k.c**2 / (k.phi_lb * gap**2))
        * math.sqrt(1.0 / (1.0 - p.sigma**2))
    )
    branch2 = (2.0 * p.c_tau * k.phi_lb / (I * k.phi_ub)) / denom
    return min(branch1, branch2)


@dataclass(frozen=True)
class TraceRecord:
    """Per-iteration diagnostics of one run."""

    iter: int
    msg_exchanges: int
    alpha: float
    J: float
    J_inf: float
    D: float
    D_inf: float
    M: float
    nmse: float | None
    consensus_err: float
    tracking_err: float
    u_mean: float
    u_phi: float | None = None
    delta_xtilde_norm: float | None = None


def _solve_all(
    config: AlgorithmConfig,
    problem: ProblemInstance,
    x: np.ndarray,
    y: np.ndarray,
    warm: np.ndarray | None,
) -> np.ndarray:
    xt = np.empty_like(x)
    for i in range(problem.num_agents):
        xt[i] = solve_subproblem(
            config.surrogate,
            problem,
            i,
            x[i],
            y[i],
            z0=None if warm is None else warm[i],
        )
    return xt


def _step(
    state: ConsensusState,
    config: AlgorithmConfig,
    problem: ProblemInstance,
    A: WeightMatrix,
    alpha,
    g_old: np.ndarray,
    xtilde: np.ndarray,
) -> tuple[ConsensusState, np.ndarray]:
    """Advance one iteration given the solved local targets."""
    x, phi, y = state.x, state.phi, state.y
    a = A.entries
    alpha_col = np.asarray(alpha, dtype=float).reshape(-1, 1)
    phi_new = a @ phi
    if config.mixing is Mixing.ATC:
        half = x + alpha_col * (xtilde - x)
        x_new = (a @ (phi[:, None] * half)) / phi_new[:, None]
    else:
        mixed = (a @ (phi[:, None] * x)) / phi_new[:, None]
        x_new = mixed + (phi / phi_new)[:, None] * (alpha_col * (xtilde - x))
    g_new = np.stack([problem.costs[i].grad(x_new[i]) for i in range(len(x_new))])
    y_new = ((a @ (phi[:, None] * y)) + (g_new - g_old)) / phi_new[:, None]
    return ConsensusState(x_new, phi_new, y_new), g_new


def sonata_iteration(
    state: ConsensusState,
    config: AlgorithmConfig,
    problem: ProblemInstance,
    A: WeightMatrix,
    n: int,
) -> ConsensusState:
    """One full iteration (local model solve + mixing + gradient tracking).

    Self-contained: recomputes the local gradients at the current copies.
    ``run`` uses the same update with gradient caching.
    """
    if state.y is None:
        raise ValueError("state must carry tracking variables y")
    g_old = np.stack(
        [problem.costs[i].grad(state.x[i]) for i in range(problem.num_agents)]
    )
    alpha = config.schedule.step_for(float(config.schedule.values(n)[n]))
    xtilde = _solve_all(config, problem, state.x, state.y, None)
    new_state, _ = _step(state, config, problem, A, alpha, g_old, xtilde)
    return new_state


def initial_iterates(
    problem: ProblemInstance, seed: int, x0: np.ndarray | None = None
) -> np.ndarray:
    """Default starting copies: zeros on the full space, random feasible
    points otherwise (seeded, one draw per agent)."""
    I, m = problem.num_agents, problem.dim
    if x0 is not None:
        x0 = np.asarray(x0, dtype=float)
        if x0.ndim == 1:
            x0 = np.tile(x0, (I, 1))
        return x0.copy()
    if problem.constraint.kind is SetKind.FULL_SPACE:
        return np.zeros((I, m))
    rng = np.random.default_rng([seed, 0x5EED])
    draws = rng.standard_normal((I, m))
    return np.stack([problem.constraint.project(row) for row in draws])


def _validate_run(config: AlgorithmConfig, problem: ProblemInstance, seq: GraphSequence):
    if config.mixing is Mixing.CAA and problem.constraint.kind is not SetKind.FULL_SPACE:
        raise ConfigError(
            "CAA mixing is only supported on unconstrained problems; use ATC"
        )
    if config.weights is WeightRule.METROPOLIS and not seq.snapshot(0).is_symmetric:
        raise ConfigError(
            "doubly stochastic weights need a symmetric graph model; "
            f"{seq.model.value} generates directed snapshots"
        )


def run(
    problem: ProblemInstance,
    config: AlgorithmConfig,
    seq: GraphSequence,
    n_iters: int,
    seed: int = 0,
    log_every: int = 1,
    x0: np.ndarray | None = None,
    early_stop_m: float = 0.0,
    record_extras: bool = False,
    observer: Callable[[int, ConsensusState], None] | None = None,
) -> list[TraceRecord]:
    """Run the full loop and return the per-iteration trace.

    Records cover n = 0 .. n_iters at stride ``log_every`` (first and last
    always included); the whole trajectory is a pure function of
    (problem, config, seq, seed).  ``record_extras`` adds the diagnostics
    needed by the descent certificate (value at the weighted average and the
    norm of the stacked local-solution deviation) and requires stride 1.
    ``early_stop_m`` > 0 stops as soon as the merit M drops below it.
    """
    if record_extras and log_every != 1:
        raise ValueError("diagnostic recording requires log_every = 1")
    _validate_run(config, problem, seq)
    I = problem.num_agents
    x = initial_iterates(problem, seed, x0)
    g = np.stack([problem.costs[i].grad(x[i]) for i in range(I)])
    state = ConsensusState(x, np.ones(I), g.copy())
    alphas = config.schedule.values(n_iters)
    sign_aligned = problem.ground_truth is not None and problem.nmse_sign_aligned
    records: list[TraceRecord] = []
    exchanges = 0
    warm: np.ndarray | None = None

    def log(n: int, xtilde: np.ndarray | None):
        merits = compute_merits(problem, state.x, sign_aligned_nmse=sign_aligned)
        xbar_phi = weighted_average(state)
        e_x = float(np.linalg.norm(state.x - xbar_phi[None, :]))
        ybar_phi = (state.phi @ state.y) / I
        e_y = float(np.linalg.norm(state.y - ybar_phi[None, :]))
        u_phi = dxt = None
        if record_extras:
            u_phi = problem.objective(xbar_phi)
            assert xtilde is not None
            dxt = float(np.linalg.norm(xtilde - xbar_phi[None, :]))
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
                consensus_err=e_x,
                tracking_err=e_y,
                u_mean=problem.objective(state.x.mean(axis=0)),
                u_phi=u_phi,
                delta_xtilde_norm=dxt,
            )
        )
        if observer is not None:
            observer(n, state)
        return merits

    for n in range(n_iters + 1):
        last = n == n_iters
        logged = n % log_every == 0 or last
        xtilde = None
        if not last or record_extras:
            xtilde = _solve_all(config, problem, state.x, state.y, warm)
            warm = xtilde
        if logged:
            merits = log(n, xtilde)
            if early_stop_m > 0.0 and merits.M <= early_stop_m:
                break
        if last:
            break
        snapshot = seq.snapshot(n)
        A = config.weights.build(snapshot)
        exchanges += len(snapshot.edges)
        state, g = _step(state, config, problem, A, config.schedule.step_for(float(alphas[n])), g, xtilde)
    return records


@dataclass(frozen=True)
class LyapunovDiagnostics:
    """Descent-certificate series over sliding windows of length B_bar.

    ``V[k]`` is the certificate value at window start k; the energies are
    the squared optimization input and disagreement sums over the window.
    """

    window: int
    V: np.ndarray
    E_dxtilde: np.ndarray
    E_x: np.ndarray
    E_y: np.ndarray


def lyapunov_diagnostics(
    records: list[TraceRecord], params: StepBoundParams
) -> LyapunovDiagnostics:
    """Evaluate the descent certificate along a fully logged trace.

    Requires records at stride 1 carrying the extra diagnostics, a window of
    at least 2 B_bar iterations, and a representable B_bar.
    """
    k = params.constants
    if not math.isfinite(k.B_bar):
        raise ValueError("decay window is not representable for these constants")
    b_bar = int(k.B_bar)
    if len(records) < 2 * b_bar:
        raise ValueError("trace shorter than two decay windows")
    if any(r.u_phi is None or r.delta_xtilde_norm is None for r in records):
        raise ValueError("records lack diagnostics; rerun with record_extras=True")
    rho_b = k.rho_Bbar
    eps = (1.0 - rho_b) / (rho_b * b_bar)
    rho_t = rho_b**2 * (1.0 + b_bar * eps)
    mu_min = 1.0 - params.sigma**2
    c_delta = (1.0 / eps + b_bar) * 2.0 * b_bar * k.c**2 / (1.0 - rho_t)
    c_perp = c_delta * params.L_mx**2 / k.phi_lb**2
    alpha_mx = params.sigma * math.sqrt(
        (1.0 - rho_t) / (2.0 * b_bar * (b_bar + 1.0 / eps) * k.c**2)
    )
    eps_x = math.sqrt(c_delta / (1.0 - params.sigma**2))
    eps_y = math.sqrt(9.0 * c_perp * c_delta / (1.0 - params.sigma**2))
    coef_y = k.phi_ub / (2.0 * eps_y)
    coef_x = (k.phi_ub / (2.0 * mu_min)) * (
        params.c_L / eps_x + (c_perp / eps_y) * (2.0 + alpha_mx) ** 2
    )
    w = np.array(
        [(t + 1 + (b_bar - t - 1) * rho_t) / (1.0 - rho_t) for t in range(b_bar)]
    )
    u_phi = np.array([r.u_phi for r in records])
    e_x2 = np.array([r.consensus_err for r in records]) ** 2
    e_y2 = np.array([r.tracking_err for r in records]) ** 2
    adx2 = np.array([(r.alpha * r.delta_xtilde_norm) ** 2 for r in records])
    n_windows = len(records) - b_bar + 1
    V = np.empty(n_windows)
    E_dx = np.empty(n_windows)
    E_x = np.empty(n_windows)
    E_y = np.empty(n_windows)
    for n in range(n_windows):
        sl = slice(n, n + b_bar)
        V[n] = u_phi[sl].sum() + coef_y * float(w @ e_y2[sl]) + coef_x * float(w @ e_x2[sl])
        E_dx[n] = adx2[sl].sum()
        E_x[n] = e_x2[sl].sum()
        E_y[n] = e_y2[sl].sum()
    return LyapunovDiagnostics(window=b_bar, V=V, E_dxtilde=E_dx, E_x=E_x, E_y=E_y)
