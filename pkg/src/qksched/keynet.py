"""Key supply side: TTL-bucketed node pools, integer pool accounting, and
trusted-relay key routing under link-yield and domain-transit caps.

Pool accounting is integer-exact: fractional expected consumption is carried
per node in a carry register and materialized as integer draws (banker's
rounding), so the global conservation identity

    initial + generated = consumed + expired + overflow + final

holds with exact integer equality over any episode (routed flows cancel
globally: every routed bit leaves one pool and enters another in the same
slot).

Routing solves a max-flow feasibility problem: a super-source feeds surplus
nodes, deficit nodes drain into a super-sink, and each QKD link's per-slot
yield caps the total relayed bits across both directions (two antiparallel
arcs with flow cancellation make that cap exact). When domain transit caps
bind, the LP relaxation is solved and rounded back to integer flows.
Infeasibility is reported as a min-cut node set plus per-node shortfalls,
the price-feedback signal consumed by the planner.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import TopologyError
from .model import DomainSpec, LinkSpec, NodeSpec


# ---------------------------------------------------------------------------
# pools
# ---------------------------------------------------------------------------

@dataclass
class KeyPool:
    """Per-node key stock as (birth_slot, bits) buckets, oldest first."""

    node_id: str
    cap: int
    buckets: list[list[int]] = field(default_factory=list)  # [birth_slot, bits]

    @property
    def total(self) -> int:
        return sum(b[1] for b in self.buckets)

    def copy(self) -> "KeyPool":
        return KeyPool(self.node_id, self.cap, [list(b) for b in self.buckets])


@dataclass(frozen=True)
class PoolStepResult:
    pool: KeyPool
    deficit: int
    overflow: int


def expire_keys(pool: KeyPool, now_slot: int, ttl_slots: int) -> tuple[KeyPool, int]:
    """Drop every bucket aged >= ttl; returns (new pool, expired bits)."""
    kept, expired = [], 0
    for birth, bits in pool.buckets:
        if now_slot - birth >= ttl_slots:
            expired += bits
        else:
            kept.append([birth, bits])
    return KeyPool(pool.node_id, pool.cap, kept), expired


def step_pool(pool: KeyPool, now_slot: int, generated_in: int, routed_in: int,
              routed_out: int, consumed: int, expired: int) -> PoolStepResult:
    """One slot of the pool state equation.

    new_total = min(cap, total + gen + in - out - consumed - expired),
    floored at 0 with the shortfall reported as deficit. Draining (expiry,
    then consumption and routed outflow) is oldest-first; inflows land in a
    fresh bucket stamped now_slot; the capacity clamp discards the newest
    bits and reports them as overflow.
    """
    assert min(generated_in, routed_in, routed_out, consumed, expired) >= 0
    buckets = deque([list(b) for b in pool.buckets])
    inflow = generated_in + routed_in
    if inflow > 0:
        buckets.append([now_slot, inflow])

    demand = expired + consumed + routed_out
    available = sum(b[1] for b in buckets)
    deficit = max(0, demand - available)
    drain = min(demand, available)
    while drain > 0:
        birth, bits = buckets[0]
        take = min(bits, drain)
        bits -= take
        drain -= take
        if bits == 0:
            buckets.popleft()
        else:
            buckets[0][1] = bits

    total = sum(b[1] for b in buckets)
    overflow = max(0, total - pool.cap)
    trim = overflow
    while trim > 0:
        birth, bits = buckets[-1]
        take = min(bits, trim)
        bits -= take
        trim -= take
        if bits == 0:
            buckets.pop()
        else:
            buckets[-1][1] = bits
    return PoolStepResult(KeyPool(pool.node_id, pool.cap, list(buckets)), deficit, overflow)


def round_with_carry(value: float, carry: float) -> tuple[int, float]:
    """Materialize a fractional quantity as an integer draw (banker's
    rounding), accumulating the residue in a carry register."""
    raw = value + carry
    drawn = int(np.round(raw))
    if drawn < 0:
        drawn = 0
    return drawn, raw - drawn


# ---------------------------------------------------------------------------
# routing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KeyFlows:
    """Directed routed key bits per node pair."""

    flows: dict[tuple[str, str], int]

    def inflow(self, node: str) -> int:
        return sum(v for (_, w), v in self.flows.items() if w == node)

    def outflow(self, node: str) -> int:
        return sum(v for (u, _), v in self.flows.items() if u == node)

    def total_bits(self) -> int:
        return sum(self.flows.values())


@dataclass(frozen=True)
class RoutingResult:
    feasible: bool
    flows: KeyFlows
    shortfall: dict[str, int]           # deficit node -> undelivered bits
    cut_nodes: frozenset[str]           # supply-side component of the min cut


class _MaxFlow:
    """Edmonds-Karp on integer capacities with parallel-arc support."""

    def __init__(self):
        self.adj: dict[str, list[int]] = {}
        self.to: list[str] = []
        self.cap: list[int] = []

    def add_node(self, u: str) -> None:
        self.adj.setdefault(u, [])

    def add_edge(self, u: str, v: str, cap: int) -> int:
        self.add_node(u)
        self.add_node(v)
        idx = len(self.to)
        self.to.append(v)
        self.cap.append(cap)
        self.adj[u].append(idx)
        self.to.append(u)
        self.cap.append(0)
        self.adj[v].append(idx + 1)
        return idx

    def _bfs_path(self, s: str, t: str) -> list[int] | None:
        parent_edge: dict[str, int] = {s: -1}
        queue = deque([s])
        while queue:
            u = queue.popleft()
            if u == t:
                break
            for ei in self.adj[u]:
                v = self.to[ei]
                if self.cap[ei] > 0 and v not in parent_edge:
                    parent_edge[v] = ei
                    queue.append(v)
        if t not in parent_edge:
            return None
        path = []
        v = t
        while parent_edge[v] != -1:
            ei = parent_edge[v]
            path.append(ei)
            v = self.to[ei ^ 1]
        return path

    def max_flow(self, s: str, t: str) -> int:
        total = 0
        while True:
            path = self._bfs_path(s, t)
            if path is None:
                return total
            bottleneck = min(self.cap[ei] for ei in path)
            for ei in path:
                self.cap[ei] -= bottleneck
                self.cap[ei ^ 1] += bottleneck
            total += bottleneck

    def reachable(self, s: str) -> set[str]:
        seen = {s}
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for ei in self.adj[u]:
                v = self.to[ei]
                if self.cap[ei] > 0 and v not in seen:
                    seen.add(v)
                    queue.append(v)
        return seen


def _link_domain(link: LinkSpec, node_domain: dict[str, str]) -> str | None:
    du, dv = node_domain[link.u], node_domain[link.v]
    return du if du == dv else None


def route_keys(nodes: list[NodeSpec], links: list[LinkSpec],
               yields_bits: dict[int, int], net_demands: dict[str, int],
               domain_caps: dict[str, int] | None = None) -> RoutingResult:
    """Route key bits from surplus to deficit nodes for one slot.

    net_demands is signed: positive = bits the node must receive, negative =
    bits the node can send. yields_bits maps link index -> per-slot routing
    capacity (the link's key yield this slot). Raises TopologyError when a
    deficit node has no path from any surplus node even with infinite
    capacities; capacity infeasibility instead returns an infeasible
    RoutingResult carrying the min-cut certificate.
    """
    deficits = {u: int(d) for u, d in net_demands.items() if d > 0}
    surpluses = {u: -int(d) for u, d in net_demands.items() if d < 0}
    if not deficits:
        return RoutingResult(True, KeyFlows({}), {}, frozenset())
    if not surpluses:
        return RoutingResult(False, KeyFlows({}), dict(deficits), frozenset())

    node_domain = {n.id: n.domain for n in nodes}
    adjacency: dict[str, set[str]] = {n.id: set() for n in nodes}
    for link in links:
        adjacency[link.u].add(link.v)
        adjacency[link.v].add(link.u)

    # Structural reachability (E_TOPOLOGY), distinct from capacity limits.
    reach: set[str] = set(surpluses)
    queue = deque(surpluses)
    while queue:
        u = queue.popleft()
        for v in adjacency[u]:
            if v not in reach:
                reach.add(v)
                queue.append(v)
    unreachable = [u for u in deficits if u not in reach]
    if unreachable:
        raise TopologyError(f"no surplus-to-deficit path for {unreachable}")

    solver = _MaxFlow()
    src, sink = "__source__", "__sink__"
    for n in nodes:
        solver.add_node(n.id)
    link_edges: list[tuple[int, int, int]] = []  # (link idx, fwd arc, rev arc)
    for li, link in enumerate(links):
        cap = int(yields_bits.get(li, 0))
        fwd = solver.add_edge(link.u, link.v, cap)
        rev = solver.add_edge(link.v, link.u, cap)
        link_edges.append((li, fwd, rev))
    for u, s in sorted(surpluses.items()):
        solver.add_edge(src, u, s)
    for u, d in sorted(deficits.items()):
        solver.add_edge(u, sink, d)

    total_demand = sum(deficits.values())
    shipped = solver.max_flow(src, sink)

    flows: dict[tuple[str, str], int] = {}
    for li, fwd, rev in link_edges:
        link = links[li]
        cap = int(yields_bits.get(li, 0))
        net = (cap - solver.cap[fwd]) - (cap - solver.cap[rev])
        if net > 0:
            flows[(link.u, link.v)] = net
        elif net < 0:
            flows[(link.v, link.u)] = -net

    caps = dict(domain_caps or {})

    def domain_usage(fl: dict[tuple[str, str], int]) -> dict[str, int]:
        usage: dict[str, int] = {}
        for link in links:
            d = _link_domain(link, node_domain)
            if d is None:
                continue
            usage[d] = usage.get(d, 0) + fl.get((link.u, link.v), 0) \
                + fl.get((link.v, link.u), 0)
        return usage

    caps_ok = all(used <= caps.get(d, used)
                  for d, used in domain_usage(flows).items())

    if caps and not caps_ok:
        flows, shipped = _route_lp(nodes, links, yields_bits, deficits,
                                   surpluses, caps, node_domain)

    if shipped == total_demand:
        return RoutingResult(True, KeyFlows(flows), {}, frozenset())

    delivered: dict[str, int] = {u: 0 for u in deficits}
    for (u, v), f in flows.items():
        if v in delivered:
            delivered[v] += f
        if u in delivered:
            delivered[u] -= f
    shortfall = {u: deficits[u] - delivered[u] for u in deficits
                 if deficits[u] - delivered[u] > 0}
    cut = frozenset(solver.reachable(src) - {src})
    return RoutingResult(False, KeyFlows(flows), shortfall, cut)


def _route_lp(nodes: list[NodeSpec], links: list[LinkSpec],
              yields_bits: dict[int, int], deficits: dict[str, int],
              surpluses: dict[str, int], caps: dict[str, int],
              node_domain: dict[str, str]) -> tuple[dict[tuple[str, str], int], int]:
    """LP relaxation with domain transit caps; flows floored to integers and
    repaired by capped unit augmentation. Returns (flows, delivered bits)."""
    from scipy.optimize import linprog

    n_links = len(links)
    deficit_ids = sorted(deficits)
    n_var = 2 * n_links + len(deficit_ids)  # f+_e, f-_e, delivery d_u

    c = np.zeros(n_var)
    c[2 * n_links:] = -1.0  # maximize total delivery

    a_ub: list[np.ndarray] = []
    b_ub: list[float] = []
    for li in range(n_links):
        row = np.zeros(n_var)
        row[2 * li] = 1.0
        row[2 * li + 1] = 1.0
        a_ub.append(row)
        b_ub.append(float(yields_bits.get(li, 0)))
    for d, cap in sorted(caps.items()):
        row = np.zeros(n_var)
        touched = False
        for li, link in enumerate(links):
            if _link_domain(link, node_domain) == d:
                row[2 * li] = 1.0
                row[2 * li + 1] = 1.0
                touched = True
        if touched:
            a_ub.append(row)
            b_ub.append(float(cap))

    a_eq: list[np.ndarray] = []
    b_eq: list[float] = []
    for n in nodes:
        row = np.zeros(n_var)
        for li, link in enumerate(links):
            if link.u == n.id:
                row[2 * li] -= 1.0       # f+ leaves u
                row[2 * li + 1] += 1.0   # f- enters u
            elif link.v == n.id:
                row[2 * li] += 1.0
                row[2 * li + 1] -= 1.0
        if n.id in deficits:
            row[2 * n_links + deficit_ids.index(n.id)] -= 1.0
            a_eq.append(row)
            b_eq.append(0.0)
        elif n.id in surpluses:
            # net inflow >= -surplus, i.e. node may emit at most its surplus
            a_ub.append(-row)
            b_ub.append(float(surpluses[n.id]))
        else:
            a_eq.append(row)
            b_eq.append(0.0)

    bounds = [(0, None)] * (2 * n_links) \
        + [(0, float(deficits[u])) for u in deficit_ids]
    res = linprog(c, A_ub=np.array(a_ub), b_ub=np.array(b_ub),
                  A_eq=np.array(a_eq) if a_eq else None,
                  b_eq=np.array(b_eq) if b_eq else None,
                  bounds=bounds, method="highs")
    if not res.success:
        return {}, 0

    f_int: dict[tuple[str, str], int] = {}
    for li, link in enumerate(links):
        fwd = int(np.floor(res.x[2 * li] + 1e-9))
        rev = int(np.floor(res.x[2 * li + 1] + 1e-9))
        net = fwd - rev
        if net > 0:
            f_int[(link.u, link.v)] = net
        elif net < 0:
            f_int[(link.v, link.u)] = -net

    delivered = {u: 0 for u in deficits}
    sent = {u: 0 for u in surpluses}
    for (u, v), f in f_int.items():
        if v in delivered:
            delivered[v] += f
        if u in delivered:
            delivered[u] -= f
        if u in sent:
            sent[u] += f
        if v in sent:
            sent[v] -= f

    def domain_headroom() -> dict[str, int]:
        usage: dict[str, int] = {d: 0 for d in caps}
        for link in links:
            d = _link_domain(link, node_domain)
            if d in usage:
                usage[d] += f_int.get((link.u, link.v), 0) \
                    + f_int.get((link.v, link.u), 0)
        return {d: caps[d] - usage[d] for d in caps}

    def augment_once() -> bool:
        headroom = domain_headroom()
        need = {u for u in deficit_ids if delivered[u] < deficits[u]}
        roots = [u for u in sorted(surpluses) if sent[u] < surpluses[u]]
        if not need or not roots:
            return False
        parents: dict[str, tuple[str, int]] = {}
        seen = set(roots)
        queue = deque(roots)
        target = None
        while queue:
            u = queue.popleft()
            if u in need:
                target = u
                break
            for li, link in enumerate(links):
                for a, b in ((link.u, link.v), (link.v, link.u)):
                    if a != u or b in seen:
                        continue
                    used = f_int.get((link.u, link.v), 0) \
                        + f_int.get((link.v, link.u), 0)
                    spare = int(yields_bits.get(li, 0)) - used
                    d = _link_domain(link, node_domain)
                    if spare >= 1 and (d is None or headroom.get(d, 1) >= 1):
                        seen.add(b)
                        parents[b] = (a, li)
                        queue.append(b)
        if target is None:
            return False
        v = target
        while v in parents:
            a, _ = parents[v]
            if f_int.get((v, a), 0) > 0:
                f_int[(v, a)] -= 1
                if f_int[(v, a)] == 0:
                    del f_int[(v, a)]
            else:
                f_int[(a, v)] = f_int.get((a, v), 0) + 1
            v = a
        delivered[target] += 1
        sent[v] += 1
        return True

    guard = 8 * (len(links) + len(deficit_ids)) + 8
    while guard > 0 and augment_once():
        guard -= 1

    return f_int, sum(delivered.values())


# ---------------------------------------------------------------------------
# episode-level key-network state
# ---------------------------------------------------------------------------

@dataclass
class ConservationLedger:
    initial: int = 0
    generated: int = 0
    consumed: int = 0
    expired: int = 0
    overflow: int = 0

    def check(self, final_total: int) -> bool:
        return self.initial + self.generated \
            == self.consumed + self.expired + self.overflow + final_total


class KeyNetState:
    """Per-node pools, carry registers and the conservation ledger for one
    episode runner. Slot order: expire_slot -> (decide, route) -> step_slot."""

    def __init__(self, nodes: list[NodeSpec], links: list[LinkSpec],
                 domains: list[DomainSpec]):
        self.nodes = list(nodes)
        self.links = list(links)
        self.domains = list(domains)
        self.pools: dict[str, KeyPool] = {}
        self.carry: dict[str, float] = {}
        for n in nodes:
            initial = int(n.pool_cap * n.init_fill)
            buckets = [[0, initial]] if initial > 0 else []
            self.pools[n.id] = KeyPool(n.id, n.pool_cap, buckets)
            self.carry[n.id] = 0.0
        self.ledger = ConservationLedger(initial=self.total_bits())
        self.node_ttl = {n.id: n.ttl_slots for n in nodes}
        self._incident: dict[str, list[int]] = {n.id: [] for n in nodes}
        for li, link in enumerate(links):
            self._incident[link.u].append(li)
            self._incident[link.v].append(li)

    def total_bits(self) -> int:
        return sum(p.total for p in self.pools.values())

    def pool_level(self, node_id: str) -> int:
        return self.pools[node_id].total

    def expire_slot(self, now_slot: int) -> int:
        """Purge aged buckets at slot start; returns total expired bits."""
        total = 0
        for nid, pool in self.pools.items():
            self.pools[nid], expired = expire_keys(pool, now_slot, self.node_ttl[nid])
            total += expired
        self.ledger.expired += total
        return total

    def generation_in(self, yields_bits: dict[int, int]) -> dict[str, int]:
        """Per-node key generation this slot: each link credits both endpoints."""
        return {nid: sum(int(yields_bits.get(li, 0)) for li in incident)
                for nid, incident in self._incident.items()}

    def materialize_consumption(self, demand_bits: dict[str, float]) -> dict[str, int]:
        """Integer per-node consumption draws from fractional demand."""
        out = {}
        for nid in self.pools:
            value = demand_bits.get(nid, 0.0)
            drawn, self.carry[nid] = round_with_carry(value, self.carry[nid])
            out[nid] = drawn
        return out

    def step_slot(self, now_slot: int, yields_bits: dict[int, int],
                  consumption: dict[str, int],
                  flows: KeyFlows) -> tuple[dict[str, int], int]:
        """Advance every pool one slot (expiry already applied).

        Returns (per-node deficits, total overflow). Routed flows cancel in
        the ledger; deficits reduce effective consumption.
        """
        gen = self.generation_in(yields_bits)
        routed_in: dict[str, int] = {nid: 0 for nid in self.pools}
        routed_out: dict[str, int] = {nid: 0 for nid in self.pools}
        for (u, v), f in flows.flows.items():
            routed_out[u] += f
            routed_in[v] += f

        deficits: dict[str, int] = {}
        total_overflow = 0
        for nid, pool in self.pools.items():
            result = step_pool(pool, now_slot, gen[nid], routed_in[nid],
                               routed_out[nid], consumption.get(nid, 0), 0)
            self.pools[nid] = result.pool
            if result.deficit > 0:
                deficits[nid] = result.deficit
            total_overflow += result.overflow
            self.ledger.generated += gen[nid]
            self.ledger.consumed += consumption.get(nid, 0) - result.deficit
        self.ledger.overflow += total_overflow
        return deficits, total_overflow

    def conservation_ok(self) -> bool:
        return self.ledger.check(self.total_bits())
