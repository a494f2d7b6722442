"""Finite discounted-cost MDPs built from random graphs (stochastic shortest path).

Nodes are ``0 .. N-1``; the goal is node ``N-1``. At a non-goal node the
actions are "move to neighbour y" (neighbours sorted ascending). The move
succeeds with ``success_prob``; otherwise the agent lands on a neighbour of
the current node drawn uniformly (the intended one included). Every step
costs 1. The goal has a single absorbing action with cost 0.

State-action pairs are numbered state by state, actions in neighbour order;
``Q`` tables are vectors indexed by pair.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

FORMAT_HEADER = "# momentum-sa mdp v1"


def pinned_cdf(p: np.ndarray) -> np.ndarray:
    """Row-wise CDFs with the tail pinned to exactly 1 from the last positive mass on.

    Inverse-CDF sampling with ``searchsorted(..., side="right")`` then never
    returns a zero-probability column.
    """
    cum = np.cumsum(p, axis=1)
    for i, row in enumerate(p):
        cum[i, np.flatnonzero(row > 0)[-1]:] = 1.0
    return cum


@dataclass(frozen=True, eq=False)
class Mdp:
    n_states: int
    pair_state: np.ndarray      # (d,) state of each pair
    pair_action: np.ndarray     # (d,) action label (target node) of each pair
    transitions: np.ndarray     # (d, n_states) rows of P_u(x, .)
    cost: np.ndarray            # (d,)
    beta: float
    state_pairs: tuple          # per state: array of its pair indices
    goal: int | None = None
    edges: tuple = ()
    success_prob: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")
        rows = self.transitions.sum(axis=1)
        if np.abs(rows - 1.0).max() > 1e-12:
            raise ValueError("transition rows must sum to 1")
        if np.any(self.transitions < 0):
            raise ValueError("transition probabilities must be non-negative")
        if any(len(p) == 0 for p in self.state_pairs):
            raise ValueError("every state needs at least one action")

    @property
    def d(self) -> int:
        return self.pair_state.size

    @property
    def first_pair(self) -> np.ndarray:
        return np.array([p[0] for p in self.state_pairs], dtype=np.int64)

    @property
    def n_actions(self) -> np.ndarray:
        return np.array([len(p) for p in self.state_pairs], dtype=np.int64)

    def cumulative(self) -> np.ndarray:
        return pinned_cdf(self.transitions)

    def greedy_pairs(self, q: np.ndarray) -> np.ndarray:
        """Per state, the pair minimizing ``q`` (lowest index on ties)."""
        return np.array([p[np.argmin(q[p])] for p in self.state_pairs], dtype=np.int64)

    def min_q(self, q: np.ndarray) -> np.ndarray:
        return np.array([q[p].min() for p in self.state_pairs])

    def non_goal_states(self) -> np.ndarray:
        return np.array([x for x in range(self.n_states) if x != self.goal], dtype=np.int64)

    def is_strongly_connected(self) -> bool:
        """Every state reaches every other state with positive probability."""
        reach = np.zeros((self.n_states, self.n_states), dtype=bool)
        for i in range(self.d):
            reach[self.pair_state[i]] |= self.transitions[i] > 0
        adj = reach | reach.T if self.goal is not None else reach
        seen = {0}
        stack = [0]
        while stack:
            x = stack.pop()
            for y in np.flatnonzero(adj[x]):
                if int(y) not in seen:
                    seen.add(int(y))
                    stack.append(int(y))
        return len(seen) == self.n_states


def from_graph(n_nodes: int, edges, success_prob: float = 0.8, beta: float = 0.8,
               **meta) -> Mdp:
    """Shortest-path MDP on an undirected graph; the goal is node ``n_nodes - 1``."""
    if n_nodes < 2:
        raise ValueError("need at least two nodes")
    if not 0.0 < success_prob <= 1.0:
        raise ValueError("success_prob must lie in (0, 1]")
    nbrs = [set() for _ in range(n_nodes)]
    clean = set()
    for i, j in edges:
        i, j = int(i), int(j)
        if i == j:
            continue
        a, b = min(i, j), max(i, j)
        clean.add((a, b))
        nbrs[a].add(b)
        nbrs[b].add(a)
    goal = n_nodes - 1
    pair_state, pair_action, rows, cost, state_pairs = [], [], [], [], []
    for x in range(n_nodes):
        start = len(pair_state)
        if x == goal:
            row = np.zeros(n_nodes)
            row[goal] = 1.0
            pair_state.append(x)
            pair_action.append(x)
            rows.append(row)
            cost.append(0.0)
        else:
            nb = sorted(nbrs[x])
            if not nb:
                raise ValueError(f"node {x} is isolated")
            for y in nb:
                row = np.zeros(n_nodes)
                row[nb] += (1.0 - success_prob) / len(nb)
                row[y] += success_prob
                pair_state.append(x)
                pair_action.append(y)
                rows.append(row)
                cost.append(1.0)
        state_pairs.append(np.arange(start, len(pair_state), dtype=np.int64))
    return Mdp(
        n_states=n_nodes,
        pair_state=np.array(pair_state, dtype=np.int64),
        pair_action=np.array(pair_action, dtype=np.int64),
        transitions=np.array(rows),
        cost=np.array(cost),
        beta=float(beta),
        state_pairs=tuple(state_pairs),
        goal=goal,
        edges=tuple(sorted(clean)),
        success_prob=float(success_prob),
        meta=dict(meta),
    )


def random_graph_mdp(n_nodes: int, edge_prob: float, success_prob: float = 0.8,
                     rng_seed: int = 0, beta: float = 0.8) -> Mdp:
    """Random graph with i.i.d. edges of probability ``edge_prob`` plus the chain (i, i+1)."""
    if not 0.0 <= edge_prob <= 1.0:
        raise ValueError("edge_prob must lie in [0, 1]")
    rng = np.random.default_rng(rng_seed)
    iu, ju = np.triu_indices(n_nodes, k=1)
    keep = rng.random(iu.size) < edge_prob
    edges = set(zip(iu[keep].tolist(), ju[keep].tolist()))
    edges |= {(i, i + 1) for i in range(n_nodes - 1)}
    return from_graph(n_nodes, edges, success_prob, beta,
                      edge_prob=float(edge_prob), seed=int(rng_seed))


def six_state_mdp(beta: float = 0.8, success_prob: float = 0.8) -> Mdp:
    """Small shortest-path example: 6 nodes, 7 edges, goal node 5, d = 13 pairs."""
    edges = [(0, 1), (0, 3), (1, 2), (1, 4), (2, 5), (3, 4), (4, 5)]
    return from_graph(6, edges, success_prob, beta, name="six-state")


# dynamic programming -------------------------------------------------------

def bellman_operator(mdp: Mdp, q: np.ndarray) -> np.ndarray:
    return mdp.cost + mdp.beta * (mdp.transitions @ mdp.min_q(q))


def q_value_iteration(mdp: Mdp, tol: float = 1e-12, max_iter: int = 1_000_000) -> np.ndarray:
    """Q* by successive approximation; the returned table has Bellman residual <= tol."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    q = np.zeros(mdp.d)
    stop = tol * (1.0 - mdp.beta) / mdp.beta
    for _ in range(max_iter):
        q_new = bellman_operator(mdp, q)
        if np.abs(q_new - q).max() <= stop:
            return q_new
        q = q_new
    raise RuntimeError("value iteration did not converge")


def bellman_error(mdp: Mdp, q) -> float:
    q = np.asarray(q, dtype=float)
    return float(np.abs(bellman_operator(mdp, q) - q).max())


# exploration ---------------------------------------------------------------

class Event(NamedTuple):
    x: int
    u: int        # action label (target node)
    x_next: int
    pair: int


@dataclass
class ExplorationStream:
    """Online (``async``) trajectory exploration or deterministic ``clock`` sweeps.

    Each event consumes three uniforms ``(u_action, u_next, u_restart)`` in
    async mode and one uniform in clock mode, in that order.
    """

    kind: str
    state: int = 0
    position: int = 0

    def __post_init__(self):
        if self.kind not in ("async", "clock"):
            raise ValueError("exploration kind must be 'async' or 'clock'")


def _draw_next(cum_row: np.ndarray, u: float) -> int:
    return int(np.searchsorted(cum_row, u, side="right"))


def next_event(stream: ExplorationStream, mdp: Mdp, rng: np.random.Generator,
               cum: np.ndarray | None = None) -> Event:
    cum = mdp.cumulative() if cum is None else cum
    if stream.kind == "clock":
        u_next = rng.random()
        pair = stream.position % mdp.d
        stream.position += 1
        x_next = _draw_next(cum[pair], u_next)
        return Event(int(mdp.pair_state[pair]), int(mdp.pair_action[pair]), x_next, pair)
    u_act, u_next, u_restart = rng.random(3)
    x = stream.state
    pairs = mdp.state_pairs[x]
    pair = int(pairs[min(int(u_act * len(pairs)), len(pairs) - 1)])
    x_next = _draw_next(cum[pair], u_next)
    if mdp.goal is not None and x == mdp.goal:
        starts = mdp.non_goal_states()
        stream.state = int(starts[min(int(u_restart * starts.size), starts.size - 1)])
    else:
        stream.state = x_next
    return Event(x, int(mdp.pair_action[pair]), x_next, pair)


def draw_uniforms(kind: str, rng: np.random.Generator, n: int) -> np.ndarray:
    """The raw uniforms an ``n``-event stream consumes, shape (n, 3) or (n, 1)."""
    return rng.random((n, 3) if kind == "async" else (n, 1))


# serialization -------------------------------------------------------------

def dumps(mdp: Mdp) -> str:
    out = io.StringIO()
    out.write(FORMAT_HEADER + "\n")
    out.write(f"nodes {mdp.n_states}\n")
    out.write(f"success_prob {mdp.success_prob!r}\n")
    out.write(f"beta {mdp.beta!r}\n")
    for key in ("edge_prob", "seed", "name"):
        if key in mdp.meta:
            out.write(f"{key} {mdp.meta[key]!r}\n" if key != "name" else f"name {mdp.meta[key]}\n")
    out.write(f"edges {len(mdp.edges)}\n")
    for i, j in mdp.edges:
        out.write(f"{i} {j}\n")
    return out.getvalue()


def loads(text: str) -> Mdp:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    header: dict[str, str] = {}
    edges = []
    it = iter(lines)
    for line in it:
        key, _, value = line.partition(" ")
        if key == "edges":
            count = int(value)
            for _ in range(count):
                i, j = next(it).split()
                edges.append((int(i), int(j)))
            break
        header[key] = value.strip()
    try:
        n = int(header["nodes"])
        success = float(header["success_prob"])
        beta = float(header["beta"])
    except KeyError as exc:
        raise ValueError(f"MDP file is missing key {exc.args[0]!r}") from None
    meta = {}
    if "edge_prob" in header:
        meta["edge_prob"] = float(header["edge_prob"])
    if "seed" in header:
        meta["seed"] = int(header["seed"])
    if "name" in header:
        meta["name"] = header["name"]
    return from_graph(n, edges, success, beta, **meta)


def save(mdp: Mdp, path) -> None:
    Path(path).write_text(dumps(mdp))


def load(path) -> Mdp:
    return loads(Path(path).read_text())


DATA_DIR = Path(__file__).parent / "data"

MDP_PRESETS = {
    "six-state": lambda: six_state_mdp(),
    "d19": lambda: load(DATA_DIR / "graph_d19.mdp"),
    "d117": lambda: load(DATA_DIR / "graph_d117.mdp"),
}


def preset(name: str) -> Mdp:
    if name in MDP_PRESETS:
        return MDP_PRESETS[name]()
    if Path(name).exists():
        return load(name)
    raise KeyError(f"unknown MDP preset {name!r}; choose from {sorted(MDP_PRESETS)} or a file path")
