"""Independent oracles used by the tests.

Each oracle recomputes an expected value from first principles (structure
walks, BFS, exhaustive enumeration) without touching the code paths under
test, so agreement is meaningful.
"""

from collections import Counter, deque

from dflysim.topology import Topology


def canonical_route_channels(topo: Topology, src: int, dst: int) -> list[int]:
    """Channel ids of the canonical minimal Dragonfly route for one pair.

    Derived from the wiring alone: optional local hop to the switch owning
    the global channel toward the destination group (lowest switch id, lowest
    port), the global hop, optional local hop to the destination switch.
    """
    p = topo.params.p
    ss, sd = src // p, dst // p
    chans = [topo.channel_at("h", src, 0).cid]
    if ss != sd:
        gs, gd = topo.switch_group[ss], topo.switch_group[sd]
        if gs == gd:
            chans.append(topo.channel_at("s", ss, topo.local_port(ss, sd)).cid)
        else:
            a = topo.params.a
            gate = None
            # the source switch uses its own global channel when it has one;
            # otherwise the lowest (switch, port) owning a cable to the group
            candidates = [ss] + [s for s in range(gs * a, gs * a + a) if s != ss]
            for s in candidates:
                for port, peer_sw, peer_group in sorted(topo.global_ports(s)):
                    if peer_group == gd:
                        gate = (s, port, peer_sw)
                        break
                if gate:
                    break
            assert gate is not None, "fully-connected pattern guarantees a cable"
            s_gate, port, land = gate
            if s_gate != ss:
                chans.append(topo.channel_at("s", ss, topo.local_port(ss, s_gate)).cid)
            chans.append(topo.channel_at("s", s_gate, port).cid)
            if land != sd:
                chans.append(topo.channel_at("s", land, topo.local_port(land, sd)).cid)
    chans.append(topo.channel_at("s", sd, dst % p).cid)
    return chans


def brute_force_flow_counts(topo: Topology) -> Counter:
    """Traversal count per channel id over all N(N-1) canonical routes."""
    n = topo.num_endnodes
    counts: Counter = Counter()
    for src in range(n):
        for dst in range(n):
            if src != dst:
                counts.update(canonical_route_channels(topo, src, dst))
    return counts


def switch_adjacency_simple(topo: Topology) -> dict[int, set[int]]:
    return {s: set(nbrs) for s, nbrs in topo.switch_adjacency().items()}


def bfs_distances(adj: dict[int, set[int]], start: int) -> dict[int, int]:
    dist = {start: 0}
    dq = deque([start])
    while dq:
        v = dq.popleft()
        for u in sorted(adj[v]):
            if u not in dist:
                dist[u] = dist[v] + 1
                dq.append(u)
    return dist


def lft_switch_path(topo: Topology, config, src: int, dst: int) -> list[int]:
    """Switches visited between (and including) source and destination switch."""
    cur = topo.switch_of(src)
    path = [cur]
    sd = topo.switch_of(dst)
    for _ in range(topo.num_switches + 1):
        if cur == sd:
            return path
        op = config.lft[cur][dst]
        peer = topo.peer[cur][op]
        assert peer is not None and peer[0] == "s", "mid-route hop must be a switch"
        cur = peer[1]
        path.append(cur)
    raise AssertionError(f"no delivery for pair ({src}, {dst})")


def updn_rank_fn(topo: Topology):
    """(level, id) rank used by the up*/down* orientation, recomputed here."""
    adj = switch_adjacency_simple(topo)
    level = bfs_distances(adj, 0)

    def rank(v):
        return (level[v], v)

    return adj, rank


def legal_updn_distance(adj, rank, src_sw: int, dst_sw: int) -> float:
    """Shortest path among those shaped up*...down* (phase-graph BFS)."""
    if src_sw == dst_sw:
        return 0
    dist = {(src_sw, 0): 0}
    dq = deque([(src_sw, 0)])
    best = float("inf")
    while dq:
        v, ph = dq.popleft()
        d = dist[(v, ph)]
        for u in adj[v]:
            goes_down = rank(u) > rank(v)
            if not goes_down and ph == 1:
                continue
            state = (u, 1 if goes_down else 0)
            if state not in dist:
                dist[state] = d + 1
                if u == dst_sw:
                    best = min(best, d + 1)
                dq.append(state)
    return best


def all_simple_cycles_exist(vertices, succ) -> bool:
    """Exhaustive simple-cycle search (tiny graphs only): DFS with path set."""
    vertices = sorted(vertices)

    def dfs(start, v, on_path):
        for w in sorted(succ.get(v, ())):
            if w == start:
                return True
            if w > start and w not in on_path:  # canonical: cycle min vertex = start
                on_path.add(w)
                if dfs(start, w, on_path):
                    return True
                on_path.discard(w)
        return False

    for start in vertices:
        if dfs(start, start, {start}):
            return True
    return False
