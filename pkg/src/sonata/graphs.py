"""Time-varying digraph sequences and consensus mixing matrices.

A digraph snapshot describes who can talk to whom in one time slot; edge
``(i, j)`` is a directed link from agent ``i`` to agent ``j``.  Self-loops
are implicit: every agent always belongs to its own in- and out-neighborhood
and is never stored in the edge set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path

import numpy as np

#: single-step stochasticity tolerance for generated weight matrices
STOCHASTICITY_TOL = 1e-12


class GraphModel(Enum):
    RING_PLUS_RANDOM = "ring_plus_random"
    STATIC_STRONGLY_CONNECTED = "static_strongly_connected"
    STATIC_UNDIRECTED = "static_undirected"
    CUSTOM = "custom"


class WeightKind(Enum):
    COLUMN_STOCHASTIC = "column_stochastic"
    DOUBLY_STOCHASTIC = "doubly_stochastic"


@dataclass(frozen=True)
class DigraphSnapshot:
    """One time slot's communication topology."""

    num_agents: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self):
        if self.num_agents < 1:
            raise ValueError("snapshot needs at least one agent")
        arr = self.edge_array  # validates and caches in one pass
        if arr.size:
            if arr.min() < 0 or arr.max() >= self.num_agents:
                raise ValueError(f"edge endpoints out of range for {self.num_agents} agents")
            if np.any(arr[:, 0] == arr[:, 1]):
                raise ValueError("self-loops are implicit; do not list them as edges")

    @cached_property
    def edge_array(self) -> np.ndarray:
        if not self.edges:
            return np.empty((0, 2), dtype=np.int64)
        return np.fromiter(
            (v for e in self.edges for v in e), dtype=np.int64, count=2 * len(self.edges)
        ).reshape(-1, 2)

    def in_neighbors(self, i: int) -> set[int]:
        return {j for j, k in self.edges if k == i} | {i}

    def out_neighbors(self, i: int) -> set[int]:
        return {k for j, k in self.edges if j == i} | {i}

    def out_degree(self, i: int) -> int:
        return len(self.out_neighbors(i))

    @cached_property
    def out_degrees(self) -> np.ndarray:
        d = np.ones(self.num_agents, dtype=np.int64)
        np.add.at(d, self.edge_array[:, 0], 1)
        return d

    @cached_property
    def is_symmetric(self) -> bool:
        return all((j, i) in self.edges for i, j in self.edges)


def make_snapshot(num_agents: int, edges) -> DigraphSnapshot:
    """Build a snapshot from any iterable of (i, j) pairs."""
    return DigraphSnapshot(num_agents, frozenset((int(i), int(j)) for i, j in edges))


@dataclass(frozen=True)
class GraphSequence:
    """Deterministic generator of one digraph per time slot.

    The same ``(model, seed, num_agents)`` triple yields the identical
    snapshot at every index ``n``, across runs and platforms.
    ``window_b`` is the claimed connectivity window B of the sequence.
    ``extras`` is the number of random extra out-neighbors per agent in the
    ring-plus-random model (1 gives the classic two-out-neighbor digraph;
    larger values densify the mixing, which stiff step tunings need).
    """

    model: GraphModel
    num_agents: int
    seed: int = 0
    window_b: int = 1
    extras: int = 1
    snapshots: tuple[DigraphSnapshot, ...] = field(default=())

    def __post_init__(self):
        if self.window_b < 1:
            raise ValueError("connectivity window B must be >= 1")
        if self.extras < 0:
            raise ValueError("extras must be nonnegative")
        if self.model is GraphModel.CUSTOM:
            if not self.snapshots:
                raise ValueError("custom sequence needs at least one snapshot")
            for s in self.snapshots:
                if s.num_agents != self.num_agents:
                    raise ValueError("custom snapshots disagree on the number of agents")
        elif self.num_agents < 2:
            raise ValueError("generated graph models need at least two agents")

    def snapshot(self, n: int) -> DigraphSnapshot:
        return generate_snapshot(self, n)


def _trusted_snapshot(num_agents: int, edge_arr: np.ndarray) -> DigraphSnapshot:
    """Construct a snapshot from a by-construction-valid edge array,
    skipping re-validation (hot path of the sequence generators)."""
    snap = object.__new__(DigraphSnapshot)
    object.__setattr__(snap, "num_agents", num_agents)
    object.__setattr__(snap, "edges", frozenset(map(tuple, edge_arr.tolist())))
    snap.__dict__["edge_array"] = edge_arr
    return snap


def _ring_plus_random_snapshot(
    num_agents: int, seed: int, n: int, extras: int
) -> DigraphSnapshot:
    I = num_agents
    agents = np.arange(I)
    ring = (agents + 1) % I
    parts = [np.column_stack([agents, ring])]
    k = min(extras, I - 2)
    if k > 0:
        # counter-based stream: slot n indexes the Philox counter, agent i the row
        if k == 1:
            # raw 64-bit words with modulo fold; the bias of (I-2)/2^64 is immaterial
            raw = np.random.Philox(key=seed, counter=[0, 0, 0, n]).random_raw(I)
            picks = (raw % (I - 2)).astype(np.int64).reshape(I, 1)
        else:
            gen = np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, 0, n]))
            picks = np.argsort(gen.random((I, I - 2)), axis=1, kind="stable")[:, :k]
        lo = np.minimum(agents, ring)[:, None]
        hi = np.maximum(agents, ring)[:, None]
        picks = picks + (picks >= lo)
        picks = picks + (picks >= hi)
        src = np.repeat(agents, k)
        parts.append(np.column_stack([src, picks.reshape(-1)]))
    return _trusted_snapshot(I, np.concatenate(parts, axis=0))


def generate_snapshot(seq: GraphSequence, n: int) -> DigraphSnapshot:
    """Digraph of time slot ``n`` under the sequence's model.

    RingPlusRandom gives every agent a directed ring edge to ``(i+1) mod I``
    plus one extra out-neighbor drawn uniformly from the non-ring, non-self
    targets; every slot is therefore strongly connected on its own (B = 1).
    Custom sequences repeat periodically past their last listed slot.
    """
    if n < 0:
        raise ValueError("slot index must be nonnegative")
    I = seq.num_agents
    if seq.model is GraphModel.RING_PLUS_RANDOM:
        return _ring_plus_random_snapshot(I, seq.seed, n, seq.extras)
    if seq.model is GraphModel.STATIC_STRONGLY_CONNECTED:
        return _ring_plus_random_snapshot(I, seq.seed, 0, seq.extras)
    if seq.model is GraphModel.STATIC_UNDIRECTED:
        edges = set()
        for i in range(I - 1):
            edges.add((i, i + 1))
            edges.add((i + 1, i))
        return DigraphSnapshot(I, frozenset(edges))
    return seq.snapshots[n % len(seq.snapshots)]


def _strongly_connected(num_agents: int, edges) -> bool:
    fwd = [[] for _ in range(num_agents)]
    bwd = [[] for _ in range(num_agents)]
    for i, j in edges:
        fwd[i].append(j)
        bwd[j].append(i)

    def reaches_all(adj) -> bool:
        seen = [False] * num_agents
        stack = [0]
        seen[0] = True
        count = 1
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    count += 1
                    stack.append(v)
        return count == num_agents

    return reaches_all(fwd) and reaches_all(bwd)


def check_b_strong_connectivity(snapshots: list[DigraphSnapshot], window_b: int) -> bool:
    """True iff every length-B window's edge union is strongly connected."""
    if window_b < 1:
        raise ValueError("empty connectivity window")
    if len(snapshots) < window_b:
        raise ValueError("need at least B snapshots to check a window")
    I = snapshots[0].num_agents
    for k in range(len(snapshots) - window_b + 1):
        union = set()
        for s in snapshots[k:k + window_b]:
            union |= s.edges
        if not _strongly_connected(I, union):
            return False
    return True


@dataclass(frozen=True)
class WeightMatrix:
    """A mixing matrix compliant with one digraph snapshot.

    ``entries[i, j]`` may be nonzero only if j = i or (j, i) is an edge,
    i.e. column j holds the weights agent j assigns to its out-neighbors.
    ``kappa`` is the smallest nonzero entry actually realized; it feeds the
    network constants and the constant-step bound.
    """

    entries: np.ndarray
    kind: WeightKind
    kappa: float

    def __post_init__(self):
        a = self.entries
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("weight matrix must be square")
        if np.any(a < 0):
            raise ValueError("weights must be nonnegative")
        cols = a.sum(axis=0)
        if np.max(np.abs(cols - 1.0)) > STOCHASTICITY_TOL:
            raise ValueError("columns must sum to one")
        if self.kind is WeightKind.DOUBLY_STOCHASTIC:
            rows = a.sum(axis=1)
            if np.max(np.abs(rows - 1.0)) > STOCHASTICITY_TOL:
                raise ValueError("rows must sum to one for a doubly stochastic matrix")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")

    @property
    def num_agents(self) -> int:
        return self.entries.shape[0]


def _min_nonzero(a: np.ndarray) -> float:
    nz = a[a > 0]
    return float(nz.min()) if nz.size else 0.0


def _trusted_weights(entries: np.ndarray, kind: WeightKind, kappa: float) -> WeightMatrix:
    """Wrap by-construction-stochastic entries without re-validation."""
    w = object.__new__(WeightMatrix)
    object.__setattr__(w, "entries", entries)
    object.__setattr__(w, "kind", kind)
    object.__setattr__(w, "kappa", kappa)
    return w


def build_push_sum_weights(g: DigraphSnapshot) -> WeightMatrix:
    """Column-stochastic push-sum weights: sender j splits mass as 1/d_j.

    a_ij = 1/d_j for (j, i) an edge or i = j, with d_j the out-degree of j
    counting its self-loop.  Buildable locally: agent j only needs its own
    out-degree.
    """
    I = g.num_agents
    d = g.out_degrees
    a = np.zeros((I, I))
    inv = 1.0 / d
    a[np.arange(I), np.arange(I)] = inv
    arr = g.edge_array
    if arr.size:
        a[arr[:, 1], arr[:, 0]] = inv[arr[:, 0]]
    return _trusted_weights(a, WeightKind.COLUMN_STOCHASTIC, kappa=float(1.0 / d.max()))


def build_metropolis_weights(g: DigraphSnapshot) -> WeightMatrix:
    """Doubly stochastic Metropolis weights for a symmetric snapshot.

    a_ij = 1 / (1 + max(deg_i, deg_j)) for neighbors i != j and the diagonal
    absorbs the rest; degrees exclude self-loops.
    """
    if not g.is_symmetric:
        raise AsymmetricGraphError("Metropolis weights need a symmetric edge set")
    I = g.num_agents
    deg = g.out_degrees - 1
    a = np.zeros((I, I))
    for i, j in g.edges:
        a[i, j] = 1.0 / (1.0 + max(deg[i], deg[j]))
    a[np.arange(I), np.arange(I)] = 1.0 - a.sum(axis=1)
    return WeightMatrix(a, WeightKind.DOUBLY_STOCHASTIC, kappa=_min_nonzero(a))


class AsymmetricGraphError(ValueError):
    """Raised when a doubly stochastic construction meets a directed-only snapshot."""


def load_custom_sequence(path: str | Path, num_agents: int, window_b: int = 1) -> GraphSequence:
    """Read a custom sequence from a line-oriented text file.

    One line per time slot; each edge is written ``j>i`` (a directed link
    from j to i) and edges are separated by spaces.  A blank line is a slot
    with no edges (agents keep only their self-loops).
    """
    path = Path(path)
    snapshots = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        edges = []
        for token in line.split():
            src, sep, dst = token.partition(">")
            if not sep or not src or not dst:
                raise ValueError(f"{path}:{lineno}: malformed edge token {token!r}")
            try:
                edges.append((int(src), int(dst)))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: non-integer endpoint in {token!r}") from exc
        snapshots.append(make_snapshot(num_agents, edges))
    return GraphSequence(
        GraphModel.CUSTOM, num_agents, seed=0, window_b=window_b, snapshots=tuple(snapshots)
    )
