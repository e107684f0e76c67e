"""Strongly convex local models and the per-agent subproblem solvers.

Each outer iteration, agent i minimizes over the feasible set

    ftilde_i(z; x_i) - grad G-(x_i)' (z - x_i)
      + (I y_i - grad f_i(x_i))' (z - x_i) + G+(z),

where ftilde_i is a strongly convex surrogate of its own cost that matches
the true gradient at the anchor x_i, and I y_i - grad f_i(x_i) stands in for
the sum of the other agents' gradients.  Linearized surrogates admit closed
forms (shrinkage and projections); the rest go through a proximal-gradient
inner loop with a slowly diminishing relaxation.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from .problems import (
    ConstraintSet,
    ProblemInstance,
    RegKind,
    SetKind,
    reg_dc_parts,
    reg_grad_gminus,
    reg_value,
)


class SurrogateKind(Enum):
    LINEARIZATION = "linearization"
    PARTIAL_LINEARIZATION = "partial_linearization"
    PARTIAL_CONVEXIFICATION = "partial_convexification"


@dataclass(frozen=True)
class SurrogateSpec:
    """Choice and parameters of the local convex model.

    ``tau`` is the proximal weight (scalar, or one value per agent);
    ``split`` marks the first nonconvex coordinate for partial
    convexification -- there is no automatic convexity detection.
    The inner_* fields drive the generic subproblem solver: proximal
    parameter, relaxation schedule gamma^r = gamma^{r-1} (1 - mu gamma^{r-1})
    and a fixed-point-residual stopping rule.
    """

    kind: SurrogateKind = SurrogateKind.LINEARIZATION
    tau: float | tuple[float, ...] = 1.5
    split: int | None = None
    inner_tolerance: float = 1e-8
    inner_max_iters: int = 200_000
    inner_gamma0: float = 0.5
    inner_mu: float = 0.01
    inner_prox_weight: float = 2.0

    def __post_init__(self):
        taus = self.tau if isinstance(self.tau, tuple) else (self.tau,)
        if any(t <= 0 for t in taus):
            raise ValueError("tau must be positive")
        if self.inner_tolerance <= 0:
            raise ValueError("inner tolerance must be positive")
        if self.kind is SurrogateKind.PARTIAL_CONVEXIFICATION and self.split is None:
            raise ValueError("partial convexification needs the coordinate split")

    def tau_for(self, i: int) -> float:
        if isinstance(self.tau, tuple):
            return self.tau[i]
        return self.tau

    def min_tau(self, num_agents: int) -> float:
        return min(self.tau_for(i) for i in range(num_agents))

    def smooth_lipschitz(self, cost_lipschitz: float, i: int) -> float:
        """Lipschitz constant of grad ftilde_i(x; .) in the anchor argument."""
        if self.kind is SurrogateKind.PARTIAL_LINEARIZATION:
            return self.tau_for(i)
        return self.tau_for(i) + cost_lipschitz


class SubproblemError(RuntimeError):
    """Inner solver ran out of iterations; carries the last residual."""

    def __init__(self, residual: float, iters: int):
        super().__init__(
            f"inner solver failed to reach tolerance after {iters} iterations "
            f"(residual {residual:.3e})"
        )
        self.residual = residual
        self.iters = iters


def soft_threshold(x: np.ndarray, beta: float) -> np.ndarray:
    """Componentwise shrink-toward-zero sign(x) * max(|x| - beta, 0)."""
    if beta < 0:
        raise ValueError("threshold must be nonnegative")
    return np.sign(x) * np.maximum(np.abs(x) - beta, 0.0)


def composite_prox(
    u: np.ndarray, l1_weight: float, constraint: ConstraintSet
) -> np.ndarray:
    """argmin_z (1/2)||z - u||^2 + l1_weight ||z||_1  over the constraint set.

    Shrink-then-project is exact for all supported sets: componentwise for
    boxes, and by radial scaling for the centered ball (shrinkage commutes
    with positive scaling).
    """
    z = soft_threshold(u, l1_weight) if l1_weight > 0 else u
    return constraint.project(z)


def surrogate_value(
    spec: SurrogateSpec, problem: ProblemInstance, i: int, x_i: np.ndarray, z: np.ndarray
) -> float:
    """ftilde_i(z; x_i) for the configured surrogate kind."""
    cost = problem.costs[i]
    tau = spec.tau_for(i)
    d = z - x_i
    prox = 0.5 * tau * float(d @ d)
    if spec.kind is SurrogateKind.LINEARIZATION:
        return cost.value(x_i) + float(cost.grad(x_i) @ d) + prox
    if spec.kind is SurrogateKind.PARTIAL_LINEARIZATION:
        # keeps the whole local cost; valid when it is convex
        return cost.value(z) + prox
    s = spec.split
    mixed = np.concatenate([z[:s], x_i[s:]])
    d2 = z[s:] - x_i[s:]
    g2 = cost.grad(x_i)[s:]
    return cost.value(mixed) + 0.5 * tau * float(d2 @ d2) + float(g2 @ d2)


def surrogate_grad(
    spec: SurrogateSpec, problem: ProblemInstance, i: int, x_i: np.ndarray, z: np.ndarray
) -> np.ndarray:
    """Gradient of ftilde_i(.; x_i) at z."""
    cost = problem.costs[i]
    tau = spec.tau_for(i)
    if spec.kind is SurrogateKind.LINEARIZATION:
        return cost.grad(x_i) + tau * (z - x_i)
    if spec.kind is SurrogateKind.PARTIAL_LINEARIZATION:
        return cost.grad(z) + tau * (z - x_i)
    s = spec.split
    mixed = np.concatenate([z[:s], x_i[s:]])
    g = cost.grad(mixed)
    out = np.empty_like(z)
    out[:s] = g[:s]
    out[s:] = tau * (z[s:] - x_i[s:]) + cost.grad(x_i)[s:]
    return out


def subproblem_objective(
    spec: SurrogateSpec,
    problem: ProblemInstance,
    i: int,
    x_i: np.ndarray,
    y_i: np.ndarray,
    z: np.ndarray,
) -> float:
    """Full local objective whose minimizer is the agent's next target."""
    I = problem.num_agents
    _, _, grad_gm = reg_dc_parts(problem.reg, x_i)
    d = z - x_i
    linear = I * y_i - problem.costs[i].grad(x_i) - grad_gm
    gplus = problem.reg.lam * problem.reg.eta * float(np.abs(z).sum())
    return surrogate_value(spec, problem, i, x_i, z) + float(linear @ d) + gplus


def _subproblem_smooth_grad(
    spec: SurrogateSpec,
    problem: ProblemInstance,
    i: int,
    x_i: np.ndarray,
    y_i: np.ndarray,
) -> Callable[[np.ndarray], np.ndarray]:
    I = problem.num_agents
    shift = I * y_i - problem.costs[i].grad(x_i) - reg_grad_gminus(problem.reg, x_i)

    def grad(z):
        return surrogate_grad(spec, problem, i, x_i, z) + shift

    return grad


def inner_proximal_solver(
    smooth_grad: Callable[[np.ndarray], np.ndarray],
    strong_convexity: float,
    l1_weight: float,
    constraint: ConstraintSet,
    z0: np.ndarray,
    tol: float,
    max_iters: int,
    gamma0: float = 0.5,
    mu: float = 0.01,
    prox_weight: float = 2.0,
) -> np.ndarray:
    """Relaxed proximal-gradient loop for a strongly convex composite model.

    Each pass forms the proximal candidate with weight ``prox_weight`` and
    relaxes toward it with the diminishing factor gamma^r; it stops when the
    unit-step fixed-point residual ||z - prox(z - grad(z))||_inf drops below
    ``tol``.  The candidate and the residual share one gradient evaluation.
    """
    if strong_convexity <= 0:
        raise ValueError("model must be strongly convex")
    z = np.asarray(z0, dtype=float).copy()
    gamma = gamma0
    c = prox_weight
    residual = np.inf
    for _ in range(max_iters):
        g = smooth_grad(z)
        fixed_point = composite_prox(z - g, l1_weight, constraint)
        residual = float(np.max(np.abs(z - fixed_point)))
        if residual <= tol:
            return z
        candidate = composite_prox(z - g / c, l1_weight / c, constraint)
        z = z + gamma * (candidate - z)
        gamma = gamma * (1.0 - mu * gamma)
    raise SubproblemError(residual, max_iters)


def _prox_dispatch(
    spec: SurrogateSpec, problem: ProblemInstance, i: int, anchor: np.ndarray, drift: np.ndarray
) -> np.ndarray | None:
    """Closed form for linearized models: prox of the scaled l1 over the set.

    ``drift`` is the full linear term of the smooth model at the anchor.
    Returns None when no exact closed form applies.
    """
    if spec.kind is not SurrogateKind.LINEARIZATION:
        return None
    tau = spec.tau_for(i)
    reg = problem.reg
    constraint = problem.constraint
    u = anchor - drift / tau
    if reg.is_zero:
        if constraint.kind in (SetKind.FULL_SPACE, SetKind.BALL, SetKind.BOX):
            return constraint.project(u)
        return None
    if constraint.kind is SetKind.FULL_SPACE:
        return soft_threshold(u, reg.lam * reg.eta / tau)
    return None


def solve_subproblem(
    spec: SurrogateSpec,
    problem: ProblemInstance,
    i: int,
    x_i: np.ndarray,
    y_i: np.ndarray,
    force_generic: bool = False,
    z0: np.ndarray | None = None,
) -> np.ndarray:
    """Minimize the agent's local model; closed form when one applies.

    Linearized models reduce to one proximal step at the anchor:
    soft-thresholding for l1-type penalties on the full space, a plain
    projection when the penalty is absent (with tau = I and no constraint
    this is literally x_i - y_i).  Everything else runs the inner loop,
    warm-started at ``z0`` (default: the anchor).
    """
    I = problem.num_agents
    drift = I * y_i - reg_grad_gminus(problem.reg, x_i)
    if not force_generic:
        closed = _prox_dispatch(spec, problem, i, x_i, drift)
        if closed is not None:
            return closed
    grad = _subproblem_smooth_grad(spec, problem, i, x_i, y_i)
    return inner_proximal_solver(
        grad,
        spec.tau_for(i),
        problem.reg.lam * problem.reg.eta,
        problem.constraint,
        x_i if z0 is None else z0,
        spec.inner_tolerance,
        spec.inner_max_iters,
        spec.inner_gamma0,
        spec.inner_mu,
        spec.inner_prox_weight,
    )
