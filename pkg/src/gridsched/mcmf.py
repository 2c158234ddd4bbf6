"""Minimum-cost maximum-flow over the job/system bipartite network.

Node layout: 0 = source, 1 = sink, then one node per job, then one per
system. The solver is successive shortest paths with Johnson potentials
(Dijkstra on reduced costs), which is exact for integer data and leaves
every arc flow integral.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Sequence

SOURCE = 0
SINK = 1
INF = float("inf")


class NetworkError(ValueError):
    pass


@dataclass
class Arc:
    tail: int
    head: int
    capacity: int
    cost: int
    flow: int = 0


@dataclass
class FlowNetwork:
    n_jobs: int
    n_systems: int
    arcs: list[Arc] = field(default_factory=list)
    potentials: list[int] | None = None
    search_costs: list[int] | None = None
    solved: bool = False

    @property
    def n_nodes(self) -> int:
        return 2 + self.n_jobs + self.n_systems

    def job_node(self, i: int) -> int:
        return 2 + i

    def system_node(self, k: int) -> int:
        return 2 + self.n_jobs + k

    def add_arc(self, tail: int, head: int, capacity: int, cost: int) -> Arc:
        arc = Arc(tail, head, int(capacity), int(cost))
        self.arcs.append(arc)
        return arc

    def flow_value(self) -> int:
        return sum(a.flow for a in self.arcs if a.tail == SOURCE)

    def total_cost(self) -> int:
        return sum(a.flow * a.cost for a in self.arcs)


def build_network(costs: Sequence[Sequence[int | None]], max_q: int | None) -> FlowNetwork:
    """Network for a jobs x systems cost matrix; ``None`` marks incompatible pairs.

    ``max_q=None`` means unlimited, i.e. the number of jobs.
    """
    n_jobs = len(costs)
    n_sys = len(costs[0]) if n_jobs else 0
    net = FlowNetwork(n_jobs, n_sys)
    for i in range(n_jobs):
        net.add_arc(SOURCE, net.job_node(i), 1, 0)
    for i, row in enumerate(costs):
        if len(row) != n_sys:
            raise NetworkError("ragged cost matrix")
        for k, c in enumerate(row):
            if c is None:
                continue
            if c < 0 or int(c) != c:
                raise NetworkError(f"cost for job {i}, system {k} must be a non-negative integer, got {c}")
            net.add_arc(net.job_node(i), net.system_node(k), 1, int(c))
    cap = n_jobs if max_q is None else max_q
    for k in range(n_sys):
        net.add_arc(net.system_node(k), SINK, cap, 0)
    return net


def _search_costs(net: FlowNetwork) -> list[int]:
    n, m = net.n_jobs, net.n_systems
    base = m + 1
    first_sys = 2 + n
    w = [base ** (n - 1 - i) for i in range(n)]
    shift = m * w[0] if n else 0  # keeps every perturbed cost non-negative
    big = n * shift + base ** n + 1
    out = []
    for a in net.arcs:
        if 2 <= a.tail < first_sys and a.head >= first_sys:
            i, k = a.tail - 2, a.head - first_sys
            out.append(a.cost * big + shift + w[i] * (k - m))
        else:
            out.append(a.cost * big)
    return out


def solve_mcmf(net: FlowNetwork) -> FlowNetwork:
    """Augment along cheapest residual paths until the sink is unreachable.

    Among optimal flows the one whose per-job system vector (unassigned
    counting as past the last system) is lexicographically smallest wins.
    This is done by searching on perturbed integer costs
    ``cost * B + tie(job, system)`` where the tie terms are base-(m+1)
    digits weighted by job index and B exceeds any possible tie sum. The
    stored potentials refer to these perturbed costs (``net.search_costs``).
    """
    n = net.n_nodes
    arcs = net.arcs
    for a in arcs:
        a.flow = 0
    eff = _search_costs(net)
    net.search_costs = eff
    # residual edge e: forward 2*i, backward 2*i+1
    adj: list[list[int]] = [[] for _ in range(n)]
    for i, a in enumerate(arcs):
        adj[a.tail].append(2 * i)
        adj[a.head].append(2 * i + 1)

    def residual(e):
        a = arcs[e >> 1]
        if e & 1:
            return a.head, a.tail, a.flow, -eff[e >> 1]
        return a.tail, a.head, a.capacity - a.flow, eff[e >> 1]

    pot = [0] * n  # all costs are non-negative, so zero potentials are feasible
    while True:
        dist = [INF] * n
        pred = [-1] * n
        dist[SOURCE] = 0
        heap = [(0, SOURCE)]
        done = [False] * n
        while heap:
            du, u = heapq.heappop(heap)
            if done[u]:
                continue
            done[u] = True
            for e in adj[u]:
                _, v, rc, c = residual(e)
                if rc <= 0 or done[v]:
                    continue
                nd = du + c + pot[u] - pot[v]
                if nd < dist[v]:
                    dist[v] = nd
                    pred[v] = e
                    heapq.heappush(heap, (nd, v))
        # unreached nodes move by the largest finite label, which keeps every
        # residual reduced cost non-negative (complementary slackness at the end)
        far = max(d for d in dist if d < INF)
        for v in range(n):
            pot[v] += dist[v] if dist[v] < INF else far
        if dist[SINK] == INF:
            break
        # bottleneck
        push = INF
        v = SINK
        while v != SOURCE:
            u, _, rc, _ = residual(pred[v])
            push = min(push, rc)
            v = u
        v = SINK
        while v != SOURCE:
            e = pred[v]
            a = arcs[e >> 1]
            if e & 1:
                a.flow -= push
                v = a.head
            else:
                a.flow += push
                v = a.tail
    net.potentials = pot
    net.solved = True
    return net


def extract_assignments(net: FlowNetwork) -> list[tuple[int, int]]:
    """(job index, system index) pairs whose job->system arc carries flow."""
    out = []
    first_sys = 2 + net.n_jobs
    for a in net.arcs:
        if a.tail < 2 or a.tail >= first_sys or a.head == SINK:
            continue
        if a.flow not in (0, 1):
            raise NetworkError(f"non-integral flow {a.flow} on job arc {a.tail}->{a.head}")
        if a.flow:
            out.append((a.tail - 2, a.head - first_sys))
    out.sort()
    seen = [j for j, _ in out]
    if len(set(seen)) != len(seen):
        raise NetworkError("a job was assigned to more than one system")
    return out


def to_dimacs(net: FlowNetwork) -> str:
    """DIMACS min-cost-flow text; supply/demand set to the solved flow value (or job count)."""
    d = net.flow_value() if net.solved else net.n_jobs
    lines = ["c job/system scheduling network", f"p min {net.n_nodes} {len(net.arcs)}",
             f"n {SOURCE + 1} {d}", f"n {SINK + 1} {-d}"]
    lines += [f"a {a.tail + 1} {a.head + 1} 0 {a.capacity} {a.cost}" for a in net.arcs]
    return "\n".join(lines) + "\n"
