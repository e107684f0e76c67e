"""Optimality, consensus and accuracy measures, plus the exact-information
best-response map used as a test oracle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problems import ProblemInstance, reg_grad_gminus
from .surrogates import (
    SurrogateKind,
    SurrogateSpec,
    composite_prox,
    inner_proximal_solver,
    surrogate_grad,
)


@dataclass(frozen=True)
class MeritReport:
    """Stationarity gap J, consensus disagreement D, their merit M = max(J^2, D^2),
    infinity-norm variants, and optionally the NMSE against a ground truth."""

    J: float
    D: float
    M: float
    J_inf: float
    D_inf: float
    nmse: float | None = None


def _stationarity_target(problem: ProblemInstance, x_bar: np.ndarray) -> np.ndarray:
    """The proximal target whose distance from x_bar defines J.

    argmin_z (grad F(xb) - grad G-(xb))' (z - xb) + 0.5 ||z - xb||^2 + G+(z)
    over the feasible set; one exact composite prox for every supported set.
    """
    u = x_bar - problem.grad_sum(x_bar) + reg_grad_gminus(problem.reg, x_bar)
    return composite_prox(u, problem.reg.lam * problem.reg.eta, problem.constraint)


def merit_J(problem: ProblemInstance, x_bar: np.ndarray) -> float:
    """Euclidean distance of x_bar from its proximal stationarity target."""
    return float(np.linalg.norm(x_bar - _stationarity_target(problem, x_bar)))


def merit_D(x: np.ndarray) -> tuple[float, float]:
    """Euclidean and infinity-norm deviation of the stack from its uniform mean."""
    dev = x - x.mean(axis=0, keepdims=True)
    return float(np.linalg.norm(dev)), float(np.max(np.abs(dev))) if dev.size else 0.0


def nmse(x: np.ndarray, x_star: np.ndarray, sign_aligned: bool = False) -> float:
    """||x - 1 (x) x*||^2 / (I ||x*||^2); optionally up to a global sign.

    Sign alignment exists for eigenvector targets, which are only defined up
    to sign.
    """
    denom = float(x_star @ x_star)
    if denom == 0.0:
        raise ValueError("ground truth must be nonzero")
    I = x.shape[0]

    def value(target):
        d = x - target[None, :]
        return float((d * d).sum()) / (I * denom)

    if not sign_aligned:
        return value(x_star)
    return min(value(x_star), value(-x_star))


def compute_merits(
    problem: ProblemInstance, x: np.ndarray, sign_aligned_nmse: bool = False
) -> MeritReport:
    """All merit quantities of one stacked iterate."""
    x_bar = x.mean(axis=0)
    diff = x_bar - _stationarity_target(problem, x_bar)
    j = float(np.linalg.norm(diff))
    j_inf = float(np.max(np.abs(diff))) if diff.size else 0.0
    d, d_inf = merit_D(x)
    err = None
    if problem.ground_truth is not None:
        err = nmse(x, problem.ground_truth, sign_aligned=sign_aligned_nmse)
    return MeritReport(J=j, D=d, M=max(j * j, d * d), J_inf=j_inf, D_inf=d_inf, nmse=err)


def best_response_oracle(
    spec: SurrogateSpec,
    problem: ProblemInstance,
    i: int,
    z: np.ndarray,
    tol: float | None = None,
) -> np.ndarray:
    """Error-free local solution map: the subproblem solved with the exact
    sum of the other agents' gradients instead of the tracked proxy.

    Its fixed points are exactly the d-stationary points of the problem;
    tests compare it against the tracked subproblem along runs.
    """
    others = problem.grad_sum(z) - problem.costs[i].grad(z)
    shift = others - reg_grad_gminus(problem.reg, z)
    reg = problem.reg
    if spec.kind is SurrogateKind.LINEARIZATION:
        tau = spec.tau_for(i)
        u = z - (problem.costs[i].grad(z) + shift) / tau
        return composite_prox(u, reg.lam * reg.eta / tau, problem.constraint)

    def grad(w):
        return surrogate_grad(spec, problem, i, z, w) + shift

    return inner_proximal_solver(
        grad,
        spec.tau_for(i),
        reg.lam * reg.eta,
        problem.constraint,
        z,
        spec.inner_tolerance if tol is None else tol,
        spec.inner_max_iters,
        spec.inner_gamma0,
        spec.inner_mu,
        spec.inner_prox_weight,
    )
