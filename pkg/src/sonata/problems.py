"""Problem instances: smooth local costs, DC sparsity regularizers, constraint sets.

The composite objective minimized by the network is

    U(x) = sum_i f_i(x) + lambda * (G+(x) - G-(x)),

where every nonconvex sparsity surrogate g in use splits as
g(x) = eta(theta) |x| - (eta(theta) |x| - g(x)), i.e. an l1 term minus a
smooth convex remainder whose derivative vanishes at the origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable

import numpy as np

DC_IDENTITY_TOL = 1e-12


class RegKind(Enum):
    NONE = "none"
    L1 = "l1"
    EXP = "exp"
    LP_PLUS = "lp_plus"
    LP_MINUS = "lp_minus"
    SCAD = "scad"
    LOG = "log"


@dataclass(frozen=True)
class Regularizer:
    """Separable sparsity penalty ``lam * sum_k g(x_k)`` with DC structure.

    theta controls how tightly g approximates the indicator of a nonzero
    entry; scad_a is the SCAD knee parameter (conventional default 3.7);
    eps smooths the lp (0<p<1) surrogate, whose exponent is 1/theta; the
    lp (p<0) surrogate additionally takes its negative exponent ``p``.
    """

    kind: RegKind = RegKind.NONE
    lam: float = 0.0
    theta: float = 1.0
    scad_a: float = 3.7
    eps: float = 1e-4
    p: float = -1.0

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("regularization weight must be nonnegative")
        if self.kind in (RegKind.NONE, RegKind.L1):
            return
        if self.theta <= 0:
            raise ValueError("theta must be positive")
        if self.kind is RegKind.SCAD and self.scad_a <= 1:
            raise ValueError("SCAD needs a > 1")
        if self.kind is RegKind.LP_PLUS:
            if self.eps <= 0:
                raise ValueError("lp (0<p<1) needs eps > 0")
            if not (0.0 < 1.0 / self.theta < 1.0):
                raise ValueError("lp (0<p<1) needs the exponent 1/theta in (0, 1)")
        if self.kind is RegKind.LP_MINUS and self.p >= 0:
            raise ValueError("lp (p<0) needs a negative exponent")

    @property
    def is_zero(self) -> bool:
        return self.kind is RegKind.NONE or self.lam == 0.0

    @property
    def eta(self) -> float:
        """Slope eta(theta) of the convex l1 majorant (unscaled by lam)."""
        t = self.theta
        if self.kind is RegKind.NONE:
            return 0.0
        if self.kind is RegKind.L1:
            return 1.0
        if self.kind is RegKind.EXP:
            return t
        if self.kind is RegKind.LP_PLUS:
            return (1.0 / t) * self.eps ** (1.0 / t - 1.0)
        if self.kind is RegKind.LP_MINUS:
            return -self.p * t
        if self.kind is RegKind.SCAD:
            return 2.0 * t / (self.scad_a + 1.0)
        return t / math.log1p(t)  # LOG

    @property
    def lipschitz_gminus(self) -> float:
        """Lipschitz constant of the (lam-scaled) gradient of the smooth part."""
        t = self.theta
        if self.is_zero or self.kind is RegKind.L1:
            return 0.0
        if self.kind is RegKind.EXP:
            raw = t * t
        elif self.kind is RegKind.LP_PLUS:
            raw = (1.0 / t) * (1.0 - 1.0 / t) * self.eps ** (1.0 / t - 2.0)
        elif self.kind is RegKind.LP_MINUS:
            raw = self.p * (self.p - 1.0) * t * t
        elif self.kind is RegKind.SCAD:
            raw = 2.0 * t * t / (self.scad_a**2 - 1.0)
        else:  # LOG
            raw = t * t / math.log1p(t)
        return self.lam * raw

    def _g(self, a: np.ndarray) -> np.ndarray:
        """Surrogate value g(|x|) per component, unscaled by lam."""
        t = self.theta
        if self.kind is RegKind.NONE:
            return np.zeros_like(a)
        if self.kind is RegKind.L1:
            return a
        if self.kind is RegKind.EXP:
            return -np.expm1(-t * a)
        if self.kind is RegKind.LP_PLUS:
            return (a + self.eps) ** (1.0 / t)
        if self.kind is RegKind.LP_MINUS:
            return 1.0 - (t * a + 1.0) ** self.p
        if self.kind is RegKind.SCAD:
            narrow = a <= 1.0 / t
            mid = (a > 1.0 / t) & (a <= self.scad_a / t)
            out = np.ones_like(a)
            out[narrow] = 2.0 * t * a[narrow] / (self.scad_a + 1.0)
            am = a[mid]
            out[mid] = (-(t * am) ** 2 + 2.0 * self.scad_a * t * am - 1.0) / (self.scad_a**2 - 1.0)
            return out
        return np.log1p(t * a) / math.log1p(t)  # LOG

    def _dgminus(self, x: np.ndarray) -> np.ndarray:
        """Derivative of the smooth part g- = eta|x| - g, unscaled by lam.

        Defined as 0 at the origin for every kind (continuity).
        """
        t = self.theta
        s = np.sign(x)
        a = np.abs(x)
        if self.kind in (RegKind.NONE, RegKind.L1):
            return np.zeros_like(x)
        if self.kind is RegKind.EXP:
            return s * t * (-np.expm1(-t * a))
        if self.kind is RegKind.LP_PLUS:
            e = 1.0 / t
            return s * e * (self.eps ** (e - 1.0) - (a + self.eps) ** (e - 1.0))
        if self.kind is RegKind.LP_MINUS:
            return -s * self.p * t * (1.0 - (1.0 + t * a) ** (self.p - 1.0))
        if self.kind is RegKind.SCAD:
            out = np.zeros_like(x)
            mid = (a > 1.0 / t) & (a <= self.scad_a / t)
            big = a > self.scad_a / t
            out[mid] = s[mid] * 2.0 * t * (t * a[mid] - 1.0) / (self.scad_a**2 - 1.0)
            out[big] = s[big] * 2.0 * t / (self.scad_a + 1.0)
            return out
        return s * t * t * a / (math.log1p(t) * (1.0 + t * a))  # LOG


def reg_value(r: Regularizer, x: np.ndarray) -> float:
    """Total penalty lam * sum_k g(x_k)."""
    if r.is_zero:
        return 0.0
    return float(r.lam * r._g(np.abs(np.asarray(x, float))).sum())


def reg_dc_parts(r: Regularizer, x: np.ndarray) -> tuple[float, float, np.ndarray]:
    """(G+, G-, grad G-) of the lam-scaled penalty at x.

    G+ = lam * eta * ||x||_1 and G+ - G- equals the penalty value exactly.
    """
    x = np.asarray(x, float)
    if r.is_zero:
        return 0.0, 0.0, np.zeros_like(x)
    gplus = float(r.lam * r.eta * np.abs(x).sum())
    gminus = gplus - reg_value(r, x)
    return gplus, gminus, r.lam * r._dgminus(x)


def reg_grad_gminus(r: Regularizer, x: np.ndarray) -> np.ndarray:
    """Gradient of the lam-scaled smooth part alone."""
    x = np.asarray(x, float)
    if r.is_zero:
        return np.zeros_like(x)
    return r.lam * r._dgminus(x)


def reg_subgradient(r: Regularizer, x: np.ndarray) -> np.ndarray:
    """A subgradient of the lam-scaled penalty, taking sign(0) = 0."""
    x = np.asarray(x, float)
    if r.is_zero:
        return np.zeros_like(x)
    return r.lam * r.eta * np.sign(x) - reg_grad_gminus(r, x)


class SetKind(Enum):
    FULL_SPACE = "full_space"
    BALL = "ball"
    BOX = "box"


@dataclass(frozen=True)
class ConstraintSet:
    """Closed convex feasible set with a Euclidean projector."""

    kind: SetKind
    radius: float = 0.0
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None

    @staticmethod
    def full_space() -> "ConstraintSet":
        return ConstraintSet(SetKind.FULL_SPACE)

    @staticmethod
    def ball(radius: float) -> "ConstraintSet":
        if radius <= 0:
            raise ValueError("ball radius must be positive")
        return ConstraintSet(SetKind.BALL, radius=radius)

    @staticmethod
    def box(lo, hi) -> "ConstraintSet":
        lo, hi = np.asarray(lo, float), np.asarray(hi, float)
        if np.any(lo > hi):
            raise ValueError("box needs lo <= hi componentwise")
        return ConstraintSet(SetKind.BOX, lo=lo, hi=hi)

    def project(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, float)
        if self.kind is SetKind.FULL_SPACE:
            return x
        if self.kind is SetKind.BALL:
            norm = float(np.linalg.norm(x))
            if norm <= self.radius:
                return x
            return x * (self.radius / norm)
        return np.clip(x, self.lo, self.hi)

    def contains(self, x: np.ndarray, tol: float = 1e-12) -> bool:
        x = np.asarray(x, float)
        if self.kind is SetKind.FULL_SPACE:
            return True
        if self.kind is SetKind.BALL:
            return float(np.linalg.norm(x)) <= self.radius + tol
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))


def project(constraint: ConstraintSet, x: np.ndarray) -> np.ndarray:
    return constraint.project(x)


@dataclass(frozen=True)
class SmoothLocalCost:
    """One agent's smooth cost: value, gradient and a gradient Lipschitz bound."""

    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    lipschitz: float
    dim: int


@dataclass(frozen=True)
class ProblemInstance:
    """A full network problem: I smooth costs + shared penalty + shared set."""

    costs: tuple[SmoothLocalCost, ...]
    reg: Regularizer
    constraint: ConstraintSet
    ground_truth: np.ndarray | None = None
    lower_bounded: bool = True
    nmse_sign_aligned: bool = False

    def __post_init__(self):
        dims = {c.dim for c in self.costs}
        if len(dims) != 1:
            raise ValueError("all local costs must share one dimension")

    @property
    def num_agents(self) -> int:
        return len(self.costs)

    @property
    def dim(self) -> int:
        return self.costs[0].dim

    @property
    def total_lipschitz(self) -> float:
        return float(sum(c.lipschitz for c in self.costs))

    def smooth_value(self, x: np.ndarray) -> float:
        return float(sum(c.value(x) for c in self.costs))

    def grad_sum(self, x: np.ndarray) -> np.ndarray:
        g = np.zeros(self.dim)
        for c in self.costs:
            g += c.grad(x)
        return g

    def objective(self, x: np.ndarray) -> float:
        """U(x) = sum_i f_i(x) + penalty(x)."""
        return self.smooth_value(x) + reg_value(self.reg, x)


def power_iteration_gram(mat: np.ndarray, iters: int = 50, tol: float = 1e-10) -> float:
    """Largest eigenvalue of mat.T @ mat by power iteration on the Gram map."""
    m = mat.shape[1]
    v = np.ones(m) / math.sqrt(m)
    lam = 0.0
    for _ in range(iters):
        w = mat.T @ (mat @ v)
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return 0.0
        v_new = w / norm
        lam_new = float(v_new @ (mat.T @ (mat @ v_new)))
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
            return lam_new
        v, lam = v_new, lam_new
    return lam


def _quadratic_cost(a: np.ndarray, b: np.ndarray) -> SmoothLocalCost:
    """f(x) = ||b - A x||^2 with gradient 2 A^T (A x - b)."""

    def value(x, a=a, b=b):
        r = a @ x - b
        return float(r @ r)

    def grad(x, a=a, b=b):
        return 2.0 * (a.T @ (a @ x - b))

    return SmoothLocalCost(value, grad, 2.0 * power_iteration_gram(a), a.shape[1])


def _neg_gram_cost(d: np.ndarray) -> SmoothLocalCost:
    """f(x) = -||D x||^2 with gradient -2 D^T D x."""

    def value(x, d=d):
        r = d @ x
        return -float(r @ r)

    def grad(x, d=d):
        return -2.0 * (d.T @ (d @ x))

    return SmoothLocalCost(value, grad, 2.0 * power_iteration_gram(d), d.shape[1])


def make_sparse_regression(
    num_agents: int,
    dim: int,
    rows_per_agent: int,
    noise_sigma: float,
    sparsity: float,
    seed: int,
    reg: Regularizer,
) -> ProblemInstance:
    """Distributed sparse linear regression with per-agent measurements.

    The ground truth is standard normal with its smallest-magnitude
    ``sparsity`` fraction zeroed; each agent's rows are i.i.d. normal and
    normalized to unit norm, and observes them through Gaussian noise of
    standard deviation ``noise_sigma``.
    """
    if min(num_agents, dim, rows_per_agent) < 1:
        raise ValueError("sizes must be positive")
    rng = np.random.default_rng(seed)
    x_star = rng.standard_normal(dim)
    n_zero = int(round(sparsity * dim))
    order = np.argsort(np.abs(x_star), kind="stable")
    x_star[order[:n_zero]] = 0.0
    costs = []
    for _ in range(num_agents):
        a = rng.standard_normal((rows_per_agent, dim))
        a /= np.linalg.norm(a, axis=1, keepdims=True)
        noise = noise_sigma * rng.standard_normal(rows_per_agent) if noise_sigma > 0 else 0.0
        b = a @ x_star + noise
        costs.append(_quadratic_cost(a, b))
    return ProblemInstance(
        tuple(costs), reg, ConstraintSet.full_space(), ground_truth=x_star
    )


def load_matrix_csv(path: str | Path) -> np.ndarray:
    """Dense numeric matrix from a comma-separated file, one sample per row."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc}") from exc
    rows = []
    width = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            row = [float(tok) for tok in line.split(",")]
        except ValueError as exc:
            raise IngestionError(f"{path}:{lineno}: non-numeric entry") from exc
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise IngestionError(f"{path}:{lineno}: ragged row")
        rows.append(row)
    if not rows:
        raise IngestionError(f"{path}: no data rows")
    return np.asarray(rows)


class IngestionError(ValueError):
    """Raised when an external data file cannot be turned into a matrix."""


def make_distributed_pca(
    num_agents: int,
    rows_per_agent: int,
    dim: int,
    seed: int,
    mode: str = "synthetic",
    path: str | Path | None = None,
    reg: Regularizer | None = None,
) -> ProblemInstance:
    """Distributed leading-component estimation: maximize sum_i ||D_i x||^2
    over the unit ball, written as minimization of the negated quadratics.

    Synthetic mode draws each agent's rows from N(0, Sigma) with Sigma built
    from a random orthonormal basis and uniform [0, 1] eigenvalues.  File
    mode mean-centers the samples and gives the first I-1 agents
    floor(d/I) rows each, the last agent the remainder.  The stored ground
    truth is the unit leading eigenvector of sum_i D_i^T D_i from a dense
    eigendecomposition.
    """
    if mode == "synthetic":
        if min(num_agents, rows_per_agent, dim) < 1:
            raise ValueError("sizes must be positive")
        rng = np.random.default_rng(seed)
        basis, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
        eigvals = rng.uniform(0.0, 1.0, size=dim)
        half = basis * np.sqrt(eigvals)[None, :]  # rows z @ half.T have cov Sigma
        blocks = [rng.standard_normal((rows_per_agent, dim)) @ half.T for _ in range(num_agents)]
    elif mode == "from_file":
        data = load_matrix_csv(path)
        data = data - data.mean(axis=0, keepdims=True)
        total, dim = data.shape
        base = total // num_agents
        if base < 1:
            raise ValueError("fewer samples than agents")
        blocks = [data[i * base:(i + 1) * base] for i in range(num_agents - 1)]
        blocks.append(data[(num_agents - 1) * base:])
    else:
        raise ValueError(f"unknown mode {mode!r}")
    costs = tuple(_neg_gram_cost(d) for d in blocks)
    gram = np.zeros((dim, dim))
    for d in blocks:
        gram += d.T @ d
    eigvals, eigvecs = np.linalg.eigh(gram)
    leading = eigvecs[:, -1]
    leading = leading / np.linalg.norm(leading)
    return ProblemInstance(
        costs,
        reg if reg is not None else Regularizer(),
        ConstraintSet.ball(1.0),
        ground_truth=leading,
        nmse_sign_aligned=True,
    )
