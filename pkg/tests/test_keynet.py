from __future__ import annotations

import numpy as np
import pytest

from oracle_lp import routing_feasible_lp
from qksched.errors import TopologyError
from qksched.keynet import (KeyFlows, KeyNetState, KeyPool, expire_keys,
                            route_keys, step_pool)
from qksched.model import DomainSpec, LinkSpec, NodeSpec


class TestExpireKeys:
    def test_noop_when_young(self):
        pool = KeyPool("n", 1000, [[5, 200]])
        p2, expired = expire_keys(pool, 10, 8)
        assert expired == 0
        assert p2.total == 200

    def test_hand_trace(self):
        pool = KeyPool("n", 1000, [[0, 100], [5, 200]])
        p2, expired = expire_keys(pool, 10, 8)
        assert expired == 100
        assert p2.total == 200

    def test_full_purge(self):
        pool = KeyPool("n", 1000, [[3, 50], [3, 70]])
        p2, expired = expire_keys(pool, 4, 1)
        assert expired == 120
        assert p2.total == 0

    def test_conservation(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            buckets = [[int(b), int(v)] for b, v in
                       zip(sorted(rng.integers(0, 20, 5)), rng.integers(0, 500, 5))]
            pool = KeyPool("n", 10**6, buckets)
            now, ttl = int(rng.integers(0, 30)), int(rng.integers(1, 15))
            p2, expired = expire_keys(pool, now, ttl)
            assert pool.total == p2.total + expired


class TestStepPool:
    def test_hand_arithmetic(self):
        pool = KeyPool("n", 2000, [[0, 1000]])
        res = step_pool(pool, 1, 200, 50, 100, 300, 50)
        assert res.pool.total == 800
        assert res.deficit == 0
        assert res.overflow == 0

    def test_cap_clamp_reports_overflow(self):
        pool = KeyPool("n", 2000, [[0, 1900]])
        res = step_pool(pool, 1, 400, 0, 0, 0, 0)
        assert res.pool.total == 2000
        assert res.overflow == 300

    def test_floor_rule_deficit(self):
        pool = KeyPool("n", 2000, [[0, 100]])
        res = step_pool(pool, 1, 0, 0, 0, 140, 0)
        assert res.pool.total == 0
        assert res.deficit == 40

    def test_fifo_consumption(self):
        pool = KeyPool("n", 10**6, [[0, 100], [4, 100]])
        res = step_pool(pool, 5, 0, 0, 0, 150, 0)
        # oldest bucket fully drained first
        assert res.pool.buckets == [[4, 50]]

    def test_scalar_identity_random(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            total = int(rng.integers(0, 3000))
            cap = int(rng.integers(500, 4000))
            pool = KeyPool("n", cap, [[0, total]] if total else [])
            gen, rin, rout, cons = (int(x) for x in rng.integers(0, 1500, 4))
            res = step_pool(pool, 1, gen, rin, rout, cons, 0)
            pre = total + gen + rin - rout - cons
            assert res.deficit == max(0, -pre)
            assert res.pool.total == min(cap, max(0, pre))
            assert res.overflow == max(0, max(0, pre) - cap)


def _nodes(ids, domain="d0"):
    return [NodeSpec(i, 10**6, 100, domain) for i in ids]


class TestRouteKeys:
    def test_line_feasible(self):
        nodes = _nodes("ABC")
        links = [LinkSpec("A", "B", 100), LinkSpec("B", "C", 50)]
        res = route_keys(nodes, links, {0: 100, 1: 50}, {"A": -40, "C": 40})
        assert res.feasible
        assert res.flows.flows == {("A", "B"): 40, ("B", "C"): 40}

    def test_line_min_cut(self):
        nodes = _nodes("ABC")
        links = [LinkSpec("A", "B", 100), LinkSpec("B", "C", 50)]
        res = route_keys(nodes, links, {0: 100, 1: 50}, {"A": -60, "C": 60})
        assert not res.feasible
        assert res.shortfall == {"C": 10}
        assert res.cut_nodes == frozenset({"A", "B"})

    def test_zero_demand(self):
        nodes = _nodes("ABC")
        links = [LinkSpec("A", "B", 100)]
        res = route_keys(nodes, links, {0: 100}, {})
        assert res.feasible and res.flows.flows == {}

    def test_topology_error_distinct_from_capacity(self):
        nodes = _nodes("ABCD")
        links = [LinkSpec("A", "B", 100)]  # C, D disconnected
        with pytest.raises(TopologyError):
            route_keys(nodes, links, {0: 100}, {"A": -50, "C": 50})
        # zero-capacity link is a capacity problem, not topology
        links = [LinkSpec("A", "B", 100), LinkSpec("B", "C", 0)]
        res = route_keys(nodes, links, {0: 100, 1: 0}, {"A": -50, "C": 50})
        assert not res.feasible
        assert res.shortfall == {"C": 50}

    def test_domain_cap_binds(self):
        nodes = _nodes("ABC")
        links = [LinkSpec("A", "B", 100), LinkSpec("B", "C", 50)]
        res = route_keys(nodes, links, {0: 100, 1: 50}, {"A": -40, "C": 40},
                         domain_caps={"d0": 60})
        assert not res.feasible
        assert res.shortfall == {"C": 10}
        res = route_keys(nodes, links, {0: 100, 1: 50}, {"A": -40, "C": 40},
                         domain_caps={"d0": 80})
        assert res.feasible

    def _random_instance(self, rng):
        n = int(rng.integers(3, 7))
        ids = [f"N{i}" for i in range(n)]
        domain_of = {i: ("d0" if i < n // 2 else "d1") for i in range(n)}
        nodes = [NodeSpec(ids[i], 10**6, 100, domain_of[i]) for i in range(n)]
        links, edges = [], []
        for u in range(n):
            for v in range(u + 1, n):
                if rng.random() < 0.6:
                    cap = int(rng.integers(0, 13)) * 8
                    links.append(LinkSpec(ids[u], ids[v], cap))
                    edges.append((u, v, cap))
        demands = {}
        for i in range(n):
            r = rng.random()
            if r < 0.35:
                demands[ids[i]] = int(rng.integers(1, 7)) * 8
            elif r < 0.7:
                demands[ids[i]] = -int(rng.integers(1, 7)) * 8
        int_demands = {i: demands.get(ids[i], 0) for i in range(n)}
        return nodes, links, edges, demands, int_demands

    def test_agrees_with_rational_lp_uncapped(self):
        rng = np.random.default_rng(21)
        checked = 0
        for _ in range(120):
            nodes, links, edges, demands, int_demands = self._random_instance(rng)
            yields = {i: l.yield_max for i, l in enumerate(links)}
            try:
                res = route_keys(nodes, links, yields, demands)
            except TopologyError:
                continue
            oracle = routing_feasible_lp(len(nodes), edges, int_demands)
            assert res.feasible == oracle
            checked += 1
        assert checked > 60

    def test_agrees_with_rational_lp_domain_capped(self):
        rng = np.random.default_rng(22)
        checked = 0
        for _ in range(120):
            nodes, links, edges, demands, int_demands = self._random_instance(rng)
            yields = {i: l.yield_max for i, l in enumerate(links)}
            node_domain = {n.id: n.domain for n in nodes}
            caps = {"d0": int(rng.integers(1, 8)) * 8, "d1": int(rng.integers(1, 8)) * 8}
            dom_of_edge = []
            for l in links:
                du, dv = node_domain[l.u], node_domain[l.v]
                dom_of_edge.append(du if du == dv else None)
            try:
                res = route_keys(nodes, links, yields, demands, domain_caps=caps)
            except TopologyError:
                continue
            oracle = routing_feasible_lp(len(nodes), edges, int_demands,
                                         dom_of_edge, caps)
            assert res.feasible == oracle
            checked += 1
        assert checked > 60

    def test_flows_never_violate_caps(self):
        rng = np.random.default_rng(23)
        for _ in range(80):
            nodes, links, edges, demands, _ = self._random_instance(rng)
            yields = {i: l.yield_max for i, l in enumerate(links)}
            caps = {"d0": int(rng.integers(2, 10)) * 8, "d1": int(rng.integers(2, 10)) * 8}
            try:
                res = route_keys(nodes, links, yields, demands, domain_caps=caps)
            except TopologyError:
                continue
            node_domain = {n.id: n.domain for n in nodes}
            per_link = {}
            for (u, v), f in res.flows.flows.items():
                assert f >= 0
                key = tuple(sorted((u, v)))
                per_link[key] = per_link.get(key, 0) + f
            for i, l in enumerate(links):
                key = tuple(sorted((l.u, l.v)))
                assert per_link.get(key, 0) <= yields[i] + sum(
                    yields[j] for j, l2 in enumerate(links)
                    if j != i and tuple(sorted((l2.u, l2.v))) == key)
            usage = {}
            for l in links:
                du, dv = node_domain[l.u], node_domain[l.v]
                if du == dv:
                    usage[du] = usage.get(du, 0) \
                        + res.flows.flows.get((l.u, l.v), 0) \
                        + res.flows.flows.get((l.v, l.u), 0)
            for d, used in usage.items():
                assert used <= caps[d]
            # surplus limits respected
            for nid, d in demands.items():
                if d < 0:
                    assert res.flows.outflow(nid) - res.flows.inflow(nid) <= -d


class TestKeyNetState:
    def _state(self):
        nodes = [NodeSpec("A", 1000, 4, "d0", init_fill=0.5),
                 NodeSpec("B", 1000, 4, "d0", init_fill=0.5)]
        links = [LinkSpec("A", "B", 100)]
        domains = [DomainSpec("d0", 10**6, 10**6)]
        return KeyNetState(nodes, links, domains)

    def test_episode_conservation_random(self):
        rng = np.random.default_rng(31)
        state = self._state()
        for slot in range(200):
            state.expire_slot(slot)
            yields = {0: int(rng.integers(0, 120))}
            demand = {"A": float(rng.uniform(0, 200)), "B": float(rng.uniform(0, 200))}
            consumption = state.materialize_consumption(demand)
            flow_bits = int(rng.integers(0, 40))
            flows = KeyFlows({("A", "B"): flow_bits}) if flow_bits else KeyFlows({})
            state.step_slot(slot, yields, consumption, flows)
            assert state.conservation_ok()

    def test_generation_credits_both_endpoints(self):
        state = self._state()
        gen = state.generation_in({0: 70})
        assert gen == {"A": 70, "B": 70}

    def test_carry_register_materializes_fractions(self):
        state = self._state()
        draws = [state.materialize_consumption({"A": 0.5, "B": 0.0})["A"]
                 for _ in range(10)]
        assert sum(draws) == 5  # half-bit demand materializes every other slot
