"""Flit-level discrete-event simulation of a routed Dragonfly fabric.

Model highlights:

* Virtual cut-through with credit-based flow control at VL granularity.
  Buffer slots are whole packets (one flow-control unit per packet); a packet
  advances only when the downstream VL buffer has a free slot.
* Events move whole packets with flit-resolution timing: all times are integer
  picoseconds, the flit time must divide evenly into the link rate, and a
  packet occupies its link for packet_flits * flit_time.
* Input-queued switches. Without VOQ each (input port, VL) keeps one FIFO and
  only its head packet competes for an output (head-of-line blocking).
  With VOQ the FIFO is split per output port, sharing the same VL buffer
  space, so packets behind a blocked head can still be relayed.
* Each output port runs an independent round-robin arbiter over (input, VL)
  pairs; a grant occupies both the output and the input for one packet time.
* Open-loop injection: a Bernoulli draw per source per packet slot at the
  offered rate; source queues are unbounded and accepted throughput counts
  delivered tails inside the measurement window only.
"""

from __future__ import annotations

import hashlib
import heapq
import json
import random
from dataclasses import dataclass, replace

from .errors import DeadlockDetected, InvalidParams
from .routing import RoutingConfig
from .topology import GLOBAL, LOCAL, Topology
from .traffic import TrafficPattern

_PS = 10**12

# event codes
_E_SLOT = 0
_E_HCA_TRY = 1
_E_HCA_CREDIT = 2
_E_ENQ = 3
_E_ARB = 4
_E_CREDIT = 5
_E_INFREE = 6
_E_DELIVER = 7
_E_WATCHDOG = 8


@dataclass
class SimConfig:
    """Everything one run depends on. Identical config + seed => identical result."""

    topology: Topology
    routing: RoutingConfig
    pattern: TrafficPattern
    offered_load: float = 1.0
    voq: bool = True
    buffer_depth: int = 16          # packets per VL
    data_vls: int = 8
    link_rate: int = 32_000_000_000  # bits/s effective
    mtu: int = 4096                  # bytes
    flit_size: int = 64              # bytes
    warmup_s: float = 0.2e-3
    measure_s: float = 1.0e-3
    seed: int = 1
    link_latency_s: float = 40e-9
    pipeline_latency_s: float = 100e-9
    credit_latency_s: float = 40e-9
    stall_horizon_s: float | None = None  # None: 10x max warm-up delivery gap, min 1 ms

    def __post_init__(self):
        if self.buffer_depth < 1:
            raise InvalidParams("buffer_depth must hold at least one packet per VL")
        if not (0.0 <= self.offered_load <= 1.0):
            raise InvalidParams("offered_load must be within [0, 1]")
        if not (1 <= self.data_vls <= 15):
            raise InvalidParams("data_vls must be in 1..15")
        if self.mtu % self.flit_size != 0:
            raise InvalidParams("flit_size must divide mtu")
        self.link_rate = int(self.link_rate)
        if (self.flit_size * 8 * _PS) % self.link_rate != 0:
            raise InvalidParams("flit time must be an integer number of picoseconds")
        _, vls_needed = self.routing.resources
        if vls_needed > self.data_vls:
            raise InvalidParams(
                f"routing needs {vls_needed} VLs but only {self.data_vls} data VLs configured"
            )

    # -- derived timing (integer picoseconds) --

    @property
    def flit_ps(self) -> int:
        return self.flit_size * 8 * _PS // self.link_rate

    @property
    def packet_flits(self) -> int:
        return self.mtu // self.flit_size

    @property
    def packet_ps(self) -> int:
        return self.packet_flits * self.flit_ps

    @property
    def warmup_ps(self) -> int:
        return int(round(self.warmup_s * _PS))

    @property
    def measure_ps(self) -> int:
        return int(round(self.measure_s * _PS))

    def canonical(self) -> dict:
        """JSON-able identity of this run (hashed into every output file)."""
        p = self.topology.params
        return {
            "params": [p.a, p.h, p.p, p.g],
            "engine": self.routing.engine,
            "vl_shift_disabled": self.routing.vl_shift_disabled,
            "pattern": self.pattern.to_dict(),
            "offered_load": self.offered_load,
            "voq": self.voq,
            "buffer_depth": self.buffer_depth,
            "data_vls": self.data_vls,
            "link_rate": self.link_rate,
            "mtu": self.mtu,
            "flit_size": self.flit_size,
            "warmup_s": self.warmup_s,
            "measure_s": self.measure_s,
            "seed": self.seed,
            "link_latency_s": self.link_latency_s,
            "pipeline_latency_s": self.pipeline_latency_s,
            "credit_latency_s": self.credit_latency_s,
            "stall_horizon_s": self.stall_horizon_s,
        }

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class SimResult:
    """One load point: accepted throughput normalized to the link rate."""

    offered: float
    accepted: float
    per_endnode: tuple[float, ...]
    injected_packets: int
    delivered_packets: int
    measured_packets: int
    counted_endnodes: int
    engine: str
    voq: bool
    buffer_depth: int
    pattern: str
    seed: int
    config_hash: str

    def csv_row(self) -> str:
        return (
            f"{self.offered:.6g},{self.accepted:.6f},{self.engine},"
            f"{int(self.voq)},{self.buffer_depth},{self.seed}"
        )

    @property
    def result_hash(self) -> str:
        blob = repr((self.accepted, self.per_endnode, self.measured_packets)).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


class _Switch:
    __slots__ = (
        "fifos", "occ", "in_busy", "out_busy", "credits",
        "pending", "rr_last", "in_peer", "out_peer",
    )


def arbitrate_output(last_granted, candidates, eligible):
    """Round-robin pick over (input-port, vl) keys with per-output memory.

    `candidates` must be sorted; scanning starts after `last_granted` and
    wraps. Returns the first key for which eligible(key) is true (credits
    available, input idle), or None — never a creditless pick while an
    eligible candidate exists (work conserving).
    """
    n = len(candidates)
    if n == 0:
        return None
    if last_granted is None:
        start = 0
    else:
        lo, hi = 0, n
        while lo < hi:
            mid = (lo + hi) // 2
            if candidates[mid] <= last_granted:
                lo = mid + 1
            else:
                hi = mid
        start = lo
    for k in range(n):
        key = candidates[(start + k) % n]
        if eligible(key):
            return key
    return None


class _FabricSim:
    """Single-run engine. Deterministic: heap ties break on event sequence."""

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        topo = cfg.topology
        self.topo = topo
        self.lft = cfg.routing.lft
        self.vlmap = cfg.routing.sl2vl
        self.sl_for = cfg.routing.sl_policy.sl_for
        self.radix = topo.params.radix
        self.kind = [topo.port_kind(pt) for pt in range(self.radix)]
        self.check_dla_vl = cfg.routing.engine == "dla" and not cfg.routing.vl_shift_disabled

        self.pkt_ps = cfg.packet_ps
        self.link_ps = int(round(cfg.link_latency_s * _PS))
        self.pipe_ps = int(round(cfg.pipeline_latency_s * _PS))
        self.credit_ps = int(round(cfg.credit_latency_s * _PS))
        self.warm_ps = cfg.warmup_ps
        self.end_ps = cfg.warmup_ps + cfg.measure_ps

        self.depth = cfg.buffer_depth
        self.voq = cfg.voq
        nvl = cfg.data_vls
        self.nvl = nvl

        n = topo.num_endnodes
        self.n = n
        self.pattern = cfg.pattern
        self.src_load = [cfg.pattern.source_load(e, cfg.offered_load) for e in range(n)]
        self.rng = random.Random(cfg.seed)

        self.switches = []
        for s in range(topo.num_switches):
            sw = _Switch()
            if cfg.voq:
                sw.fifos = [[dict() for _ in range(nvl)] for _ in range(self.radix)]
            else:
                sw.fifos = [[[] for _ in range(nvl)] for _ in range(self.radix)]
            sw.occ = [[0] * nvl for _ in range(self.radix)]
            sw.in_busy = [0] * self.radix
            sw.out_busy = [0] * self.radix
            sw.credits = [[self.depth] * nvl for _ in range(self.radix)]
            sw.pending = [dict() for _ in range(self.radix)]
            sw.rr_last = [None] * self.radix
            sw.in_peer = [None] * self.radix
            sw.out_peer = [None] * self.radix
            for pt in range(self.radix):
                peer = topo.peer[s][pt]
                if peer is None:
                    continue
                if peer[0] == "h":
                    sw.in_peer[pt] = ("h", peer[1])
                    sw.out_peer[pt] = ("h", peer[1])
                else:
                    sw.in_peer[pt] = ("s", peer[1], peer[2])
                    sw.out_peer[pt] = ("s", peer[1], peer[2])
            self.switches.append(sw)

        # HCA (endnode) state
        self.hca_q = [[] for _ in range(n)]
        self.hca_qhead = [0] * n  # pop index (lists beat deques for bulk append)
        self.hca_busy = [0] * n
        self.hca_credit = [self.depth] * n

        # counters
        self.injected = 0
        self.delivered = 0
        self.in_fabric = 0
        self.measured_by_dst = [0] * n
        self.last_delivery = 0
        self.max_warm_gap = 0
        self.watch_count = -1

        self.heap: list = []
        self.seq = 0

    def push(self, t, code, a=0, b=0, c=0, d=None):
        self.seq += 1
        heapq.heappush(self.heap, (t, self.seq, code, a, b, c, d))

    # -- HCA side ---------------------------------------------------------

    def hca_try(self, e, t):
        q = self.hca_q[e]
        head = self.hca_qhead[e]
        if head >= len(q) or self.hca_busy[e] > t or self.hca_credit[e] <= 0:
            return
        pkt = q[head]
        self.hca_qhead[e] = head + 1
        if head > 4096:  # reclaim drained prefix
            del q[: head + 1]
            self.hca_qhead[e] = 0
        self.hca_credit[e] -= 1
        self.hca_busy[e] = t + self.pkt_ps
        self.in_fabric += 1
        sw = self.topo.switch_of(e)
        ip = self.topo.attach_port(e)
        self.push(t + self.link_ps + self.pipe_ps, _E_ENQ, sw, ip, 0, pkt)
        self.push(t + self.pkt_ps, _E_HCA_TRY, e)

    # -- switch side ------------------------------------------------------

    def enqueue(self, s, ip, vl, pkt, t):
        sw = self.switches[s]
        occ = sw.occ[ip]
        occ[vl] += 1
        assert occ[vl] <= self.depth, "VL buffer overflow: credit protocol broken"
        op = self.lft[s][pkt[1]]
        if self.voq:
            lane = sw.fifos[ip][vl]
            q = lane.get(op)
            if q is None:
                q = lane[op] = []
            q.append(pkt)
            if len(q) == 1:
                sw.pending[op][(ip, vl)] = pkt
                self.arb(s, op, t)
        else:
            q = sw.fifos[ip][vl]
            q.append(pkt)
            if len(q) == 1:
                sw.pending[op][(ip, vl)] = pkt
                self.arb(s, op, t)

    def arb(self, s, op, t):
        sw = self.switches[s]
        if sw.out_busy[op] > t:
            return
        pend = sw.pending[op]
        if not pend:
            return
        vrow = self.vlmap[s][op]
        credits = sw.credits[op]
        in_busy = sw.in_busy

        def eligible(key):
            ip, _vl = key
            if in_busy[ip] > t:
                return False
            pkt = pend[key]
            return credits[vrow[ip][pkt[2]]] > 0

        key = arbitrate_output(sw.rr_last[op], sorted(pend), eligible)
        if key is not None:
            ip, vl = key
            pkt = pend[key]
            self.grant(s, op, ip, vl, vrow[ip][pkt[2]], pkt, t)

    def grant(self, s, op, ip, vl, ovl, pkt, t):
        sw = self.switches[s]
        sw.credits[op][ovl] -= 1
        t_free = t + self.pkt_ps
        sw.out_busy[op] = t_free
        sw.in_busy[ip] = t_free
        sw.rr_last[op] = (ip, vl)
        del sw.pending[op][(ip, vl)]

        if self.voq:
            q = sw.fifos[ip][vl][op]
            q.pop(0)
            if q:
                sw.pending[op][(ip, vl)] = q[0]
        else:
            q = sw.fifos[ip][vl]
            q.pop(0)
            if q:
                nxt = q[0]
                op2 = self.lft[s][nxt[1]]
                sw.pending[op2][(ip, vl)] = nxt
                if op2 != op:
                    self.push(t, _E_ARB, s, op2)
        sw.occ[ip][vl] -= 1

        if self.check_dla_vl and ovl == 1:
            assert self.kind[op] == LOCAL and pkt[3] == GLOBAL, \
                "VL 1 is only legal on a local channel right after a global hop"

        # return the freed slot upstream once our tail has left
        up = sw.in_peer[ip]
        if up[0] == "h":
            self.push(t_free + self.credit_ps, _E_HCA_CREDIT, up[1])
        else:
            self.push(t_free + self.credit_ps, _E_CREDIT, up[1], up[2], vl)

        self.push(t_free, _E_ARB, s, op)
        self.push(t_free, _E_INFREE, s)

        pkt[3] = self.kind[op]
        down = sw.out_peer[op]
        if down[0] == "h":
            self.push(t + self.link_ps + self.pkt_ps, _E_DELIVER, down[1])
            self.push(t + self.link_ps + self.pkt_ps + self.credit_ps, _E_CREDIT, s, op, ovl)
        else:
            self.push(t + self.link_ps + self.pipe_ps, _E_ENQ, down[1], down[2], ovl, pkt)

    # -- main loop --------------------------------------------------------

    def run(self):
        cfg = self.cfg
        n = self.n
        rng = self.rng
        choose = self.pattern.choose
        sl_for = self.sl_for
        end = self.end_ps

        horizon_ps = None
        if cfg.stall_horizon_s is not None:
            horizon_ps = int(round(cfg.stall_horizon_s * _PS))
        self.push(0, _E_SLOT)
        self.push(self.warm_ps, _E_WATCHDOG)

        heap = self.heap
        pop = heapq.heappop
        while heap:
            t, _seq, code, a, b, c, d = pop(heap)
            if t >= end:
                break
            if code == _E_ENQ:
                self.enqueue(a, b, c, d, t)
            elif code == _E_ARB:
                self.arb(a, b, t)
            elif code == _E_CREDIT:
                sw = self.switches[a]
                sw.credits[b][c] += 1
                assert sw.credits[b][c] <= self.depth, "credit over-return"
                self.arb(a, b, t)
            elif code == _E_INFREE:
                sw = self.switches[a]
                busy = sw.out_busy
                for op in range(self.radix):
                    if sw.pending[op] and busy[op] <= t:
                        self.arb(a, op, t)
            elif code == _E_DELIVER:
                self.delivered += 1
                self.in_fabric -= 1
                if t >= self.warm_ps:
                    self.measured_by_dst[a] += 1
                else:
                    gap = t - self.last_delivery
                    if gap > self.max_warm_gap:
                        self.max_warm_gap = gap
                self.last_delivery = t
            elif code == _E_HCA_TRY:
                self.hca_try(a, t)
            elif code == _E_HCA_CREDIT:
                self.hca_credit[a] += 1
                assert self.hca_credit[a] <= self.depth
                self.hca_try(a, t)
            elif code == _E_SLOT:
                src_load = self.src_load
                for e in range(n):
                    ld = src_load[e]
                    if ld > 0.0 and rng.random() < ld:
                        dst = choose(e, rng)
                        self.injected += 1
                        self.hca_q[e].append([e, dst, sl_for(e, dst), "tc"])
                        self.hca_try(e, t)
                if t + self.pkt_ps < end:
                    self.push(t + self.pkt_ps, _E_SLOT)
            else:  # _E_WATCHDOG
                if horizon_ps is None:
                    horizon_ps = max(10 * self.max_warm_gap, _PS // 1000)  # >= 1 ms
                if self.watch_count == self.delivered and self.injected > self.delivered:
                    raise DeadlockDetected(
                        f"no delivery for {horizon_ps / _PS * 1e3:.3f} ms of simulated time "
                        f"with {self.injected - self.delivered} packets outstanding"
                    )
                self.watch_count = self.delivered
                self.push(t + horizon_ps, _E_WATCHDOG)

        # conservation audit: everything injected is delivered, queued, or in flight
        queued = sum(len(q) - h for q, h in zip(self.hca_q, self.hca_qhead))
        assert self.injected == self.delivered + queued + self.in_fabric, \
            "flit conservation violated"

    def result(self) -> SimResult:
        cfg = self.cfg
        counted = self.pattern.counted_endnodes()
        measured = sum(self.measured_by_dst[e] for e in counted)
        norm = self.pkt_ps / cfg.measure_ps
        accepted = measured * norm / len(counted) if counted else 0.0
        per_endnode = tuple(round(self.measured_by_dst[e] * norm, 9) for e in range(self.n))
        return SimResult(
            offered=cfg.offered_load,
            accepted=round(accepted, 9),
            per_endnode=per_endnode,
            injected_packets=self.injected,
            delivered_packets=self.delivered,
            measured_packets=measured,
            counted_endnodes=len(counted),
            engine=cfg.routing.engine,
            voq=cfg.voq,
            buffer_depth=cfg.buffer_depth,
            pattern=cfg.pattern.name,
            seed=cfg.seed,
            config_hash=cfg.config_hash,
        )


def run_sim(config: SimConfig) -> SimResult:
    """Run one load point. Deterministic for a fixed (config, seed).

    Raises DeadlockDetected when the fabric stops delivering while packets
    remain for the stall horizon (a routing-configuration bug, not a simulator
    error).
    """
    pattern = config.pattern.bind(config.topology.num_endnodes, config.seed)
    cfg = replace(config, pattern=pattern)
    sim = _FabricSim(cfg)
    sim.run()
    return sim.result()


def sweep(config: SimConfig, loads) -> list[SimResult]:
    """One independent run per load point; run i uses seed = base seed + i."""
    loads = list(loads)
    if any(l < 0 or l > 1 for l in loads):
        raise InvalidParams("loads must be within [0, 1]")
    if loads != sorted(loads):
        raise InvalidParams("loads must be sorted ascending")
    out = []
    for i, load in enumerate(loads):
        out.append(run_sim(replace(config, offered_load=load, seed=config.seed + i)))
    return out
