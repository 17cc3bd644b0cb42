"""Channel dependency graphs and deadlock-freedom verification.

A CDG vertex is a (directed channel id, VL) pair; an edge u -> v means some
routed packet occupies channel u on its VL immediately before channel v on
its VL. A routing configuration is deadlock free iff its CDG is acyclic.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .routing import RoutingConfig, route_walk
from .topology import Topology

Vertex = tuple[int, int]  # (channel id, vl)


@dataclass
class ChannelDependencyGraph:
    """Dependencies induced by enumerating every source/destination route."""

    vertices: set[Vertex]
    succ: dict[Vertex, set[Vertex]]
    witness: dict[tuple[Vertex, Vertex], tuple[int, int]]

    @property
    def num_edges(self) -> int:
        return sum(len(s) for s in self.succ.values())

    def successors(self, v: Vertex):
        return self.succ.get(v, ())


@dataclass(frozen=True)
class DeadlockReport:
    """Outcome of cycle detection; the witness is empty when acyclic."""

    acyclic: bool
    cycle: tuple[Vertex, ...] = ()
    inducing_flows: tuple[tuple[int, int], ...] = ()

    def describe(self, topology: Topology) -> str:
        if self.acyclic:
            return "ACYCLIC"
        lines = ["CYCLE"]
        for i, (cid, vl) in enumerate(self.cycle):
            ch = topology.channels[cid]
            flow = self.inducing_flows[i] if i < len(self.inducing_flows) else None
            tail = f" flow h{flow[0]}->h{flow[1]}" if flow else ""
            lines.append(
                f"  {ch.src_name()}:{ch.src[2]} -> {ch.dst_name()}:{ch.dst[2]} "
                f"kind={ch.kind} vl={vl}{tail}"
            )
        return "\n".join(lines)


def build_cdg(topology: Topology, config: RoutingConfig) -> ChannelDependencyGraph:
    """Enumerate all N(N-1) routes and collect direct dependencies.

    Terminal channels are included as vertices; injection channels only source
    edges and delivery channels only sink them, so they never close a cycle.
    Propagates RoutingLoop (with the offending pair) from the route walker.
    """
    n = topology.num_endnodes
    vertices: set[Vertex] = set()
    succ: dict[Vertex, set[Vertex]] = {}
    witness: dict[tuple[Vertex, Vertex], tuple[int, int]] = {}
    for src in range(n):
        for dst in range(n):
            if dst == src:
                continue
            prev = None
            for ch, vl in route_walk(topology, config, src, dst):
                v = (ch.cid, vl)
                vertices.add(v)
                if prev is not None:
                    bucket = succ.get(prev)
                    if bucket is None:
                        bucket = succ[prev] = set()
                    if v not in bucket:
                        bucket.add(v)
                        witness[(prev, v)] = (src, dst)
                prev = v
    return ChannelDependencyGraph(vertices=vertices, succ=succ, witness=witness)


def _cyclic_sccs(cdg: ChannelDependencyGraph) -> list[list[Vertex]]:
    """Tarjan SCCs (iterative, deterministic order); only cycle-bearing ones."""
    adj = cdg.succ
    index: dict[Vertex, int] = {}
    lowlink: dict[Vertex, int] = {}
    onstack: set[Vertex] = set()
    stack: list[Vertex] = []
    counter = 0
    out: list[list[Vertex]] = []

    for root in sorted(cdg.vertices):
        if root in index:
            continue
        work = [(root, iter(sorted(adj.get(root, ()))))]
        index[root] = lowlink[root] = counter
        counter += 1
        stack.append(root)
        onstack.add(root)
        while work:
            v, it = work[-1]
            descended = False
            for w in it:
                if w not in index:
                    index[w] = lowlink[w] = counter
                    counter += 1
                    stack.append(w)
                    onstack.add(w)
                    work.append((w, iter(sorted(adj.get(w, ())))))
                    descended = True
                    break
                if w in onstack and index[w] < lowlink[v]:
                    lowlink[v] = index[w]
            if descended:
                continue
            work.pop()
            if work:
                u = work[-1][0]
                if lowlink[v] < lowlink[u]:
                    lowlink[u] = lowlink[v]
            if lowlink[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    onstack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                if len(comp) > 1 or v in adj.get(v, ()):
                    out.append(comp)
    return out


def check_deadlock_free(cdg: ChannelDependencyGraph) -> DeadlockReport:
    """Prove acyclicity or return a deterministic cycle witness.

    The witness starts at the lexicographically smallest vertex lying on any
    cycle and follows a shortest cycle through it (BFS inside its SCC with
    sorted neighbor order).
    """
    bad = _cyclic_sccs(cdg)
    if not bad:
        return DeadlockReport(acyclic=True)

    start = min(min(comp) for comp in bad)
    comp = next(set(c) for c in bad if start in c)
    # shortest path start -> start inside the SCC
    parent: dict[Vertex, Vertex] = {}
    dq = deque([start])
    closing_from = None
    while dq and closing_from is None:
        u = dq.popleft()
        for w in sorted(cdg.succ.get(u, ())):
            if w == start:
                closing_from = u
                break
            if w in comp and w not in parent:
                parent[w] = u
                dq.append(w)
    assert closing_from is not None, "SCC guaranteed a closing edge"
    path = [closing_from]
    while path[-1] != start:
        path.append(parent[path[-1]])
    cycle = tuple(reversed(path))
    flows = []
    for i, u in enumerate(cycle):
        v = cycle[(i + 1) % len(cycle)]
        flows.append(cdg.witness[(u, v)])
    return DeadlockReport(acyclic=False, cycle=cycle, inducing_flows=tuple(flows))
