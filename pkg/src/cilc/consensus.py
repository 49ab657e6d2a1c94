"""Best-performer election by max-consensus flooding over a directed network.

Agents exchange ``(error norm, agent id, payload)`` tuples in synchronous
rounds.  Each round every agent sends its current tuple to its out-neighbours
and keeps the lexicographically smallest ``(norm, id)`` it has seen, so after
``diameter`` rounds every agent holds the global best performer and its
``(u, e)`` pair.  Links are lossless and rounds are instantaneous relative to
a trial.
"""
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from .collective import cilc_step, run_cilc
from .errors import EmptyCollective, NotStronglyConnected


@dataclass(frozen=True)
class Topology:
    """Directed communication graph over agents ``1..M`` (self-loops implicit)."""
    M: int
    edges: frozenset

    def in_neighbors(self, v):
        return sorted(a for a, b in self.edges if b == v and a != v)

    def out_neighbors(self, v):
        return sorted(b for a, b in self.edges if a == v and b != v)

    def adjacency(self):
        rows = [a - 1 for a, b in sorted(self.edges) if a != b]
        cols = [b - 1 for a, b in sorted(self.edges) if a != b]
        return csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(self.M, self.M))


def _reachable(M, succ, start):
    seen = {start}
    queue = deque([start])
    while queue:
        v = queue.popleft()
        for w in succ[v]:
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return seen


def build_topology(M, edges):
    if M < 1:
        raise EmptyCollective("a topology needs at least one agent")
    clean = set()
    for a, b in edges:
        a, b = int(a), int(b)
        if not (1 <= a <= M and 1 <= b <= M):
            raise ValueError(f"edge ({a}, {b}) references an agent outside 1..{M}")
        clean.add((a, b))
    t = Topology(M, frozenset(clean))
    if M > 1:
        count, _ = connected_components(t.adjacency(), directed=True, connection="strong")
        if count > 1:
            raise NotStronglyConnected(
                f"topology has {count} strongly connected components", witness=_witness(t))
    return t


def _witness(t):
    succ = {v: t.out_neighbors(v) for v in range(1, t.M + 1)}
    pred = {v: t.in_neighbors(v) for v in range(1, t.M + 1)}
    forward = _reachable(t.M, succ, 1)
    for v in range(2, t.M + 1):
        if v not in forward:
            return (1, v)
    backward = _reachable(t.M, pred, 1)
    for v in range(2, t.M + 1):
        if v not in backward:
            return (v, 1)
    return None


def ring(M):
    """Directed cycle ``1 -> 2 -> ... -> M -> 1``."""
    return build_topology(M, [(v, v % M + 1) for v in range(1, M + 1)])


def complete(M):
    return build_topology(M, [(a, b) for a in range(1, M + 1) for b in range(1, M + 1) if a != b])


def diameter(t):
    """Longest shortest directed path over all ordered agent pairs."""
    if t.M == 1:
        return 0
    dist = shortest_path(t.adjacency(), method="D", directed=True, unweighted=True)
    if not np.all(np.isfinite(dist)):
        raise NotStronglyConnected("topology is not strongly connected", witness=_witness(t))
    return int(dist.max())


def parse_topology(text, M=None):
    """Parse ``from to`` edge lines (1-based ids); ``#`` starts a comment line.

    ``M`` defaults to the largest id mentioned.
    """
    edges = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'from to', got {line!r}")
        try:
            a, b = int(parts[0]), int(parts[1])
        except ValueError:
            raise ValueError(f"line {lineno}: agent ids must be integers, got {line!r}") from None
        edges.append((a, b))
    if M is None:
        M = max((max(e) for e in edges), default=1)
    return build_topology(M, edges)


def parse_topology_file(path, M=None):
    with open(path, encoding="utf-8") as fh:
        return parse_topology(fh.read(), M)


@dataclass
class Election:
    """Result of one flooding election.

    ``elected[v-1]`` is the ``(id, payload)`` agent ``v`` holds at the end;
    ``trace[k][v-1]`` is agent ``v``'s ``(norm, id)`` after ``k`` rounds.
    """
    elected: list
    rounds_used: int
    trace: list = field(default_factory=list)

    @property
    def unanimous(self):
        return len({eid for eid, _ in self.elected}) == 1


def elect_best_performer(t, local, rounds=None):
    """Flood ``local[v-1] = (norm, id, payload)`` tuples for ``rounds`` rounds (default: diameter)."""
    if len(local) != t.M:
        raise ValueError(f"need one tuple per agent, got {len(local)} for {t.M}")
    rounds = diameter(t) if rounds is None else rounds
    pred = [t.in_neighbors(v) for v in range(1, t.M + 1)]
    held = [(float(norm), int(aid), payload) for norm, aid, payload in local]
    trace = [[(h[0], h[1]) for h in held]]
    for _ in range(rounds):
        sent = list(held)
        nxt = []
        for v in range(t.M):
            best = sent[v]
            for w in pred[v]:
                cand = sent[w - 1]
                if (cand[0], cand[1]) < (best[0], best[1]):
                    best = cand
            nxt.append(best)
        held = nxt
        trace.append([(h[0], h[1]) for h in held])
    return Election([(h[1], h[2]) for h in held], rounds, trace)


class DistributedElector:
    """Drop-in elector for :func:`run_cilc` that elects by flooding over ``topology``.

    Every agent must end with the same elected id; the trace of each trial's
    election is kept in ``elections``.
    """

    def __init__(self, topology):
        self.topology = topology
        self.elections = []

    def __call__(self, records):
        if len(records) != self.topology.M:
            raise ValueError(f"topology has {self.topology.M} agents, collective has {len(records)}")
        local = [(rec.e_norm, m + 1, (rec.u, rec.e)) for m, rec in enumerate(records)]
        election = elect_best_performer(self.topology, local)
        if not election.unanimous:
            raise RuntimeError("flooding ended without agreement; topology diameter is wrong")
        self.elections.append(election)
        best, (u, e) = election.elected[0]
        return best, u, e


def distributed_cilc_round(t, collective, inputs, j, truth=None, hold_on_no_improvement=False,
                           lookahead=None):
    """One trial with the election run over ``t``; same return value as :func:`cilc_step`."""
    return cilc_step(collective, inputs, j, truth=truth, elect=DistributedElector(t),
                     hold_on_no_improvement=hold_on_no_improvement, lookahead=lookahead)


def run_distributed_cilc(t, collective, u0=None, trials=20, hold_on_no_improvement=False, truth=None):
    """Run CILC with flooding elections; returns ``(history, elector)``."""
    elector = DistributedElector(t)
    history = run_cilc(collective, u0=u0, trials=trials,
                       hold_on_no_improvement=hold_on_no_improvement, truth=truth, elect=elector)
    return history, elector
