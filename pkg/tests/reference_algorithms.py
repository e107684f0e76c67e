"""Independent matrix-form implementations of the published special cases.

These loops are written directly from the classical update equations, with
no shared code with the engine, and serve as oracles for the preset
equivalence tests.
"""

from __future__ import annotations

import numpy as np


def _grads(problem, x):
    return np.stack([problem.costs[i].grad(x[i]) for i in range(problem.num_agents)])


def next_l(problem, W, x0, alpha, n_iters, caa=False):
    """(ATC/CAA-)NEXT with linearized costs on a doubly stochastic W."""
    x = x0.copy()
    g = _grads(problem, x)
    y = g.copy()
    xs = [x.copy()]
    for _ in range(n_iters):
        x_new = W @ x - alpha * y if caa else W @ (x - alpha * y)
        g_new = _grads(problem, x_new)
        y = W @ y + g_new - g
        x, g = x_new, g_new
        xs.append(x.copy())
    return xs


def diging(problem, W, x0, alpha, n_iters):
    """DIGing: combine-then-step iterates with plain gradient tracking."""
    x = x0.copy()
    g = _grads(problem, x)
    y = g.copy()
    xs = [x.copy()]
    for _ in range(n_iters):
        x_new = W @ x - alpha * y
        g_new = _grads(problem, x_new)
        y = W @ y + g_new - g
        x, g = x_new, g_new
        xs.append(x.copy())
    return xs


def aug_dgm(problem, W, x0, alpha, n_iters):
    """Aug-DGM: both consensus passes wrap the full updated quantities."""
    x = x0.copy()
    g = _grads(problem, x)
    y = g.copy()
    xs = [x.copy()]
    for _ in range(n_iters):
        x_new = W @ (x - alpha * y)
        g_new = _grads(problem, x_new)
        y = W @ (y + g_new - g)
        x, g = x_new, g_new
        xs.append(x.copy())
    return xs


def add_opt(problem, A, x0, alpha, n_iters):
    """ADD-OPT in its original biased variables (z, phi, y-tilde)."""
    z = x0.copy()
    phi = np.ones(problem.num_agents)
    x = z.copy()
    g = _grads(problem, x)
    yt = g.copy()
    xs = [x.copy()]
    for _ in range(n_iters):
        z = A @ z - alpha * yt
        phi = A @ phi
        x_new = z / phi[:, None]
        g_new = _grads(problem, x_new)
        yt = A @ yt + g_new - g
        x, g = x_new, g_new
        xs.append(x.copy())
    return xs
