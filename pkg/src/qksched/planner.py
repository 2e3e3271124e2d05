"""Offline stage: scenario construction, the per-slot fractional master via
MSV-ordered greedy (fractional knapsack), column pricing with secant
refinement, and the dual-subgradient outer loop with routing feedback.

The master works on per-class *upgrade chains*: compliant candidate columns
are reduced to the concave envelope of (total key cost, risk reduction), so
the chained upgrade densities are nonincreasing and descending-density
greedy is exactly the LP optimum of the relaxation. Densities are per
key-bit of slot budget: value = p·Δρ·L·E[Θ] per class-slot, cost = λ·Δκ
bits. The endogenous threshold π̄ returned by the master is the density of
the marginal upgrade.

The dual loop updates per-node prices with projected subgradients of the
*price-driven* demand (the Lagrangian subproblem), plus shortfall bumps from
routing infeasibility; the budgeted master is solved at the converged prices
to emit domain quotas and warm-start columns.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import crypto, envgen, queueing
from .crypto import AttackContext
from .errors import InfeasibleBaseError, NoBaseFeasibleError
from .keynet import route_keys
from .model import (CryptoParams, MessageClassSpec, QueueParams, Strategy,
                    StrategyColumn, ValidatedModel)
from .queueing import NetSlotState


# ---------------------------------------------------------------------------
# candidate columns and upgrade chains
# ---------------------------------------------------------------------------

def compliant_columns(spec: MessageClassSpec, cp: CryptoParams) -> list[StrategyColumn]:
    """Grid columns satisfying the class's hard compliance constraints."""
    cols: list[StrategyColumn] = []
    for a in cp.a_grid:
        if crypto.mac_len(a, cp) < spec.min_tag_bits:
            continue
        cols.append(StrategyColumn(Strategy.S1_OTP_WC, a, 1))
        for r in cp.r_grid:
            cols.append(StrategyColumn(Strategy.S2_AES_WC, a, r))
    if not spec.forbid_s3 and cp.comp_tag_bits >= spec.min_tag_bits:
        for r in cp.r_grid:
            cols.append(StrategyColumn(Strategy.S3_AES_MAC, 0.0, r))
    return cols


def column_compliant(spec: MessageClassSpec, col: StrategyColumn, cp: CryptoParams,
                     ctx: AttackContext | None = None) -> bool:
    """Hard compliance check for a single column (optionally incl. QoSec)."""
    if col.strategy is Strategy.S3_AES_MAC:
        if spec.forbid_s3 or cp.comp_tag_bits < spec.min_tag_bits:
            return False
    elif crypto.mac_len(col.auth_knob, cp) < spec.min_tag_bits:
        return False
    if ctx is not None and spec.qosec_cap is not None:
        if crypto.residual_success(spec, col, ctx, cp) > spec.qosec_cap:
            return False
    return True


@dataclass(frozen=True)
class UpgradeStep:
    """One envelope rung: moving a class from one column to the next."""

    class_id: str
    to_col: StrategyColumn
    value: float        # risk reduction vs previous rung, currency/slot
    cost: float         # extra key bits vs previous rung (lambda-scaled)
    density: float      # value / cost, currency per key bit


@dataclass(frozen=True)
class ClassChain:
    class_id: str
    unit_loss: float
    base_col: StrategyColumn
    base_cost: float                       # lambda-scaled bits for the base
    steps: tuple[UpgradeStep, ...]         # densities nonincreasing


@dataclass(frozen=True)
class ClassSlotContext:
    spec: MessageClassSpec
    arrival_rate: float      # messages per slot
    ctx: AttackContext


def build_chain(cctx: ClassSlotContext, columns: list[StrategyColumn],
                cp: CryptoParams, enforce_qosec: bool = True) -> ClassChain:
    """Concave-envelope upgrade chain for one class at one slot context.

    Candidates failing the class QoSec cap at this context are excluded
    (falling back to the most protective candidate when nothing passes);
    dominated and non-envelope columns are dropped so densities are
    nonincreasing along the chain.
    """
    spec, lam, ctx = cctx.spec, cctx.arrival_rate, cctx.ctx
    evaluated = []
    for col in columns:
        rho = crypto.residual_success(spec, col, ctx, cp)
        cost = lam * crypto.key_cost(spec, col, cp)
        evaluated.append((col, rho, cost))
    if enforce_qosec and spec.qosec_cap is not None:
        passing = [e for e in evaluated if e[1] <= spec.qosec_cap]
        evaluated = passing if passing else [min(evaluated, key=lambda e: (e[1], e[2]))]

    base_col, base_rho, base_cost = min(evaluated, key=lambda e: (e[2], e[1]))
    scale = ctx.attempt_prob * spec.unit_loss * ctx.context_amp
    points = []
    for col, rho, cost in evaluated:
        points.append((cost - base_cost, scale * (base_rho - rho), col))
    points.sort(key=lambda p: (p[0], -p[1]))

    # dominance prune, then upper concave hull
    best = -math.inf
    pruned = []
    for cost, value, col in points:
        if value > best:
            pruned.append((cost, value, col))
            best = value
    hull: list[tuple[float, float, StrategyColumn]] = [(0.0, 0.0, base_col)]
    for cost, value, col in pruned:
        if cost <= 0.0:
            continue
        while len(hull) >= 2:
            c1, v1, _ = hull[-2]
            c2, v2, _ = hull[-1]
            # keep slopes nonincreasing: drop hull[-1] if it bends upward
            if (v2 - v1) * (cost - c2) < (value - v2) * (c2 - c1):
                hull.pop()
            else:
                break
        c2, v2, _ = hull[-1]
        if cost > c2 and value > v2:
            hull.append((cost, value, col))

    steps = []
    for (c1, v1, _), (c2, v2, col) in zip(hull, hull[1:]):
        steps.append(UpgradeStep(spec.id, col, v2 - v1, c2 - c1, (v2 - v1) / (c2 - c1)))
    return ClassChain(spec.id, spec.unit_loss, base_col, base_cost, tuple(steps))


# ---------------------------------------------------------------------------
# fractional master (knapsack kernel)
# ---------------------------------------------------------------------------

@dataclass
class FractionalSolution:
    fractions: dict[str, list[tuple[StrategyColumn, float]]]  # column mix per class
    applied: list[tuple[UpgradeStep, float]]
    rejected: list[UpgradeStep]
    threshold: float          # pi-bar: density of the marginal upgrade
    objective: float          # total risk reduction vs base
    spend: float              # upgrade bits spent (excl. base)
    base_spend: float


def allocate_fractional(chains: list[ClassChain], upgrade_budget: float,
                        price_floor: float = 0.0) -> FractionalSolution:
    """Descending-density greedy over all chains under a shared bit budget.

    Ties break to the higher-unit-loss class, then the lower class id, then
    chain order. At most one step ends up fractional; the returned threshold
    is its density (or the first rejected density when the budget lands on a
    boundary, 0 when everything fit).
    """
    order = {c.class_id: i for i, c in enumerate(chains)}
    pool: list[tuple[float, float, str, int, UpgradeStep]] = []
    for chain in chains:
        for k, step in enumerate(chain.steps):
            pool.append((-step.density, -chain.unit_loss, chain.class_id, k, step))
    pool.sort(key=lambda x: (x[0], x[1], x[2], x[3]))

    remaining = upgrade_budget
    applied: list[tuple[UpgradeStep, float]] = []
    rejected: list[UpgradeStep] = []
    applied_by_class: dict[str, dict[int, float]] = {}
    threshold = 0.0
    exhausted = False
    for _, _, cid, k, step in pool:
        if step.density <= price_floor or step.density <= 0.0:
            rejected.append(step)
            continue
        if exhausted:
            rejected.append(step)
            continue
        if step.cost <= remaining:
            applied.append((step, 1.0))
            applied_by_class.setdefault(cid, {})[k] = 1.0
            remaining -= step.cost
            if remaining <= 0.0:
                exhausted = True
        else:
            frac = remaining / step.cost if step.cost > 0 else 0.0
            if frac > 0.0:
                applied.append((step, frac))
                applied_by_class.setdefault(cid, {})[k] = frac
                threshold = step.density
            else:
                rejected.append(step)
                threshold = step.density
            remaining = 0.0
            exhausted = True

    if exhausted and threshold == 0.0:
        later = [s for s in rejected if s.density > price_floor]
        if later:
            threshold = max(s.density for s in later)

    fractions: dict[str, list[tuple[StrategyColumn, float]]] = {}
    for chain in chains:
        levels = applied_by_class.get(chain.class_id, {})
        full = 0
        partial = 0.0
        for k in range(len(chain.steps)):
            f = levels.get(k, 0.0)
            if f >= 1.0:
                full = k + 1
            elif f > 0.0:
                partial = f
                break
            else:
                break
        cols: list[tuple[StrategyColumn, float]] = []
        reached = chain.base_col if full == 0 else chain.steps[full - 1].to_col
        if partial > 0.0:
            cols.append((reached, 1.0 - partial))
            cols.append((chain.steps[full].to_col, partial))
        else:
            cols.append((reached, 1.0))
        fractions[chain.class_id] = cols

    objective = sum(step.value * frac for step, frac in applied)
    spend = sum(step.cost * frac for step, frac in applied)
    base_spend = sum(c.base_cost for c in chains)
    return FractionalSolution(fractions, applied, rejected, threshold,
                              objective, spend, base_spend)


@dataclass(frozen=True)
class SlotContext:
    """Everything the master needs for one (scenario, slot)."""

    classes: dict[str, ClassSlotContext]
    net: NetSlotState
    crypto: CryptoParams
    queue: QueueParams


def solve_slot_fractional(slot_ctx: SlotContext, columns: dict[str, list[StrategyColumn]],
                          price_floor: float, budget_bits: float) -> FractionalSolution:
    """Per-slot fractional master: base columns plus MSV-greedy upgrades.

    budget_bits is the total slot budget; the cheapest compliant assignment
    must fit (E_INFEASIBLE_BASE otherwise), upgrades consume the remainder.
    """
    chains = [build_chain(cctx, columns[cid], slot_ctx.crypto)
              for cid, cctx in sorted(slot_ctx.classes.items())]
    base_cost = sum(c.base_cost for c in chains)
    if base_cost > budget_bits:
        raise InfeasibleBaseError(
            f"base assignment needs {base_cost:.0f} bits > budget {budget_bits:.0f}")
    return allocate_fractional(chains, budget_bits - base_cost, price_floor)


# ---------------------------------------------------------------------------
# column pricing (generation)
# ---------------------------------------------------------------------------

def price_columns(duals: dict, slot_ctx: SlotContext,
                  columns: dict[str, list[StrategyColumn]],
                  tolerance: float = 1e-9) -> dict[str, list[StrategyColumn]]:
    """Search each class's grid for a positive-reduced-profit column.

    ΔΦ(col) = p·(ρ_base - ρ_col)·L·E[Θ] - π̄·λ·κ(col) - μ̄·(delay(col) - delay_base).
    The grid argmax is refined along the auth knob with at most 8 secant
    steps toward the first-order balance, then appended. Returns only
    genuinely new columns; empty means the column set is complete.
    """
    pi_bar = float(duals.get("pi_bar", 0.0))
    mu_bar = duals.get("mu_bar", {})
    cp, qp = slot_ctx.crypto, slot_ctx.queue
    new_cols: dict[str, list[StrategyColumn]] = {}
    for cid, cctx in sorted(slot_ctx.classes.items()):
        spec, lam, ctx = cctx.spec, cctx.arrival_rate, cctx.ctx
        mu_i = float(mu_bar.get(cid, 0.0))
        scale = ctx.attempt_prob * spec.unit_loss * ctx.context_amp
        cand = compliant_columns(spec, cp)
        base_col = min(cand, key=lambda c: crypto.key_cost(spec, c, cp))
        rho_base = crypto.residual_success(spec, base_col, ctx, cp)
        util = queueing.utilization(
            {cid: base_col}, {cid: spec}, slot_ctx.net, qp, cp)

        def reduced_profit(col: StrategyColumn) -> float:
            benefit = scale * (rho_base - crypto.residual_success(spec, col, ctx, cp))
            key_cost = pi_bar * lam * crypto.key_cost(spec, col, cp)
            latency = 0.0
            if mu_i > 0.0:
                d_col, _ = queueing.end_to_end_delay(spec, col, slot_ctx.net, qp, cp, util)
                d_base, _ = queueing.end_to_end_delay(spec, base_col, slot_ctx.net, qp, cp, util)
                latency = mu_i * (d_col - d_base)
            return benefit - key_cost - latency

        best = max(cand, key=lambda c: (reduced_profit(c),
                                        -crypto.key_cost(spec, c, cp)))
        best_profit = reduced_profit(best)
        if best_profit <= tolerance:
            continue
        refined = best
        if best.strategy in (Strategy.S1_OTP_WC, Strategy.S2_AES_WC):
            a = _secant_refine_a(spec, best, ctx, cp, qp, slot_ctx.net, util,
                                 scale, pi_bar * lam, mu_i)
            refined = StrategyColumn(best.strategy, a, best.refresh)
            if reduced_profit(refined) < best_profit:
                refined = best
        existing = columns.get(cid, [])
        if all(abs(refined.auth_knob - c.auth_knob) > 0.5
               or refined.strategy != c.strategy or refined.refresh != c.refresh
               for c in existing):
            new_cols.setdefault(cid, []).append(refined)
    return new_cols


def _secant_refine_a(spec: MessageClassSpec, col: StrategyColumn, ctx: AttackContext,
                     cp: CryptoParams, qp: QueueParams, net: NetSlotState,
                     util: float, risk_scale: float, key_price: float,
                     mu_i: float, iters: int = 8) -> float:
    """Secant steps on the stationarity balance in the auth knob.

    g(a) = -risk_scale·∂ρ/∂a - key_price·ℓ'(a) - μ̄·∂delay/∂a; g decreases in
    a, the balance point has g = 0. Clamped to the compliant box.
    """
    a_min = spec.min_tag_bits / cp.mac_len_slope if cp.mac_len_slope > 0 else 0.0
    a_lo, a_hi = a_min, cp.a_max

    def g(a: float) -> float:
        probe = StrategyColumn(col.strategy, a, col.refresh)
        marginal_gain = -risk_scale * crypto.residual_success_grad_a(probe, cp)
        marginal_cost = key_price * cp.mac_len_slope \
            + mu_i * queueing.delay_grad_a(spec, probe, net, qp, cp, util)
        return marginal_gain - marginal_cost

    x0, x1 = max(a_lo, min(a_hi, col.auth_knob)), min(a_hi, col.auth_knob + 8.0)
    if abs(x1 - x0) < 1e-9:
        x1 = max(a_lo, x0 - 8.0)
    g0, g1 = g(x0), g(x1)
    for _ in range(iters):
        if abs(g1 - g0) < 1e-18:
            break
        x2 = x1 - g1 * (x1 - x0) / (g1 - g0)
        x2 = max(a_lo, min(a_hi, x2))
        if abs(x2 - x1) < 1e-6:
            x1 = x2
            break
        x0, g0, x1 = x1, g1, x2
        g1 = g(x1)
    return max(a_lo, min(a_hi, x1))


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------

@dataclass
class Scenario:
    weight: float
    yields: np.ndarray        # [T, E]
    lam: np.ndarray           # [T, C]
    attack_p: np.ndarray      # [T, C]
    attack_q: np.ndarray      # [T, C]
    attack_tau: np.ndarray    # [T, C]
    theta: np.ndarray         # [T, C]
    has_shock: bool


def build_scenarios(model: ValidatedModel, count: int, seed: int,
                    horizon: int | None = None) -> list[Scenario]:
    """Sampled forecast scenarios; scenario 0 is the expected-value path.

    Deterministic per seed; when the weather model or the scripted windows
    produce shocks at all, at least one scenario contains a shock window.
    """
    assert count >= 1
    horizon = horizon or model.sim.horizon_slots
    scenarios: list[Scenario] = []
    for k in range(count):
        if k == 0:
            env = build_mean_env(model, horizon)
        else:
            env = envgen.build_env(model, horizon, episode_seed=seed * 1000 + k)
        scenarios.append(Scenario(
            weight=1.0 / count,
            yields=env.yields.astype(float),
            lam=env.lam_expected if k == 0 else env.arrivals.astype(float),
            attack_p=env.attack_p, attack_q=env.attack_q,
            attack_tau=env.attack_tau, theta=env.theta,
            has_shock=bool(env.shock_active.any()),
        ))
    shock_possible = model.sim.weather.shock_rate_per_day > 0 or model.sim.shock_windows
    if shock_possible and not any(s.has_shock for s in scenarios) and horizon > 0:
        scenarios[-1] = _inject_shock(model, scenarios[-1], horizon)
    return scenarios


def build_mean_env(model: ValidatedModel, horizon: int) -> envgen.EnvTrace:
    """Expected-value environment: intensities, expected yields, baseline
    attack levels, scripted shock windows only."""
    cids = model.class_ids
    n_c, n_e = len(cids), len(model.links)
    lam = np.zeros((horizon, n_c))
    theta = np.zeros((horizon, n_c))
    for t in range(horizon):
        for ci, cid in enumerate(cids):
            lam[t, ci] = envgen.expected_intensity(model, cid, t)
            theta[t, ci] = envgen.context_theta(model, cid, t)
    wm = model.sim.weather
    am = model.sim.attack
    yields = np.zeros((horizon, n_e))
    shock_active = np.zeros(horizon, dtype=bool)
    attack_p = np.zeros((horizon, n_c))
    attack_q = np.full((horizon, n_c), am.q_base)
    attack_tau = np.ones((horizon, n_c))
    base_p = np.array([am.base_prob.get(cid, 0.0) for cid in cids])
    for t in range(horizon):
        yf, amult = 1.0, 1.0
        for w in model.sim.shock_windows:
            if w.start_slot <= t < w.end_slot:
                yf = min(yf, w.yield_factor)
                amult = max(amult, w.attack_mult)
                shock_active[t] = True
        for li, link in enumerate(model.links):
            q = wm.qber_base + wm.qber_jitter * 0.8 * link.env_sensitivity
            yields[t, li] = link.yield_max * max(0.0, 1.0 - q / link.qber_threshold) * yf
        attack_p[t] = np.clip(base_p * amult, 0.0, 1.0)
        if amult > 1.0:
            attack_q[t] = np.minimum(am.q_cap, am.q_pulse * amult)
            attack_tau[t] = 10.0
    return envgen.EnvTrace(
        horizon=horizon, class_ids=cids,
        arrivals=np.round(lam).astype(np.int64), lam_expected=lam,
        yields=yields.astype(np.int64), yields_expected=yields,
        regime=np.zeros((horizon, n_e), dtype=np.int8),
        attack_p=attack_p, attack_q=attack_q, attack_tau=attack_tau,
        theta=theta, attempts=np.zeros((horizon, n_c), dtype=bool),
        success_draws=np.ones((horizon, n_c)), shock_active=shock_active,
    )


def _inject_shock(model: ValidatedModel, scenario: Scenario, horizon: int) -> Scenario:
    wm = model.sim.weather
    start = horizon // 2
    end = min(horizon, start + max(1, int(wm.shock_dur_scale)))
    yields = scenario.yields.copy()
    yields[start:end] *= wm.shock_yield_factor
    p = scenario.attack_p.copy()
    p[start:end] = np.clip(p[start:end] * wm.shock_attack_mult, 0.0, 1.0)
    return Scenario(scenario.weight, yields, scenario.lam, p, scenario.attack_q,
                    scenario.attack_tau, scenario.theta, True)


# ---------------------------------------------------------------------------
# offline plan
# ---------------------------------------------------------------------------

@dataclass
class OfflinePlan:
    quotas: dict[str, list[int]]             # domain -> per-slot quota bits
    warm_start: dict[str, StrategyColumn]
    node_duals: dict[str, float]
    pool_dual: float
    horizon_slots: int
    config_hash: str
    seed: int
    scenario_count: int
    iterations: int

    def to_json(self) -> str:
        doc = {
            "config_hash": self.config_hash,
            "seed": self.seed,
            "horizon_slots": self.horizon_slots,
            "scenario_count": self.scenario_count,
            "iterations": self.iterations,
            "quotas": self.quotas,
            "warm_start": {
                cid: {"strategy": col.strategy.code, "auth_knob": col.auth_knob,
                      "refresh": col.refresh}
                for cid, col in self.warm_start.items()
            },
            "node_duals": self.node_duals,
            "pool_dual": self.pool_dual,
        }
        return json.dumps(doc, sort_keys=True, indent=1)

    @staticmethod
    def from_json(text: str) -> "OfflinePlan":
        doc = json.loads(text)
        by_code = {s.code: s for s in Strategy}
        warm = {cid: StrategyColumn(by_code[c["strategy"]], float(c["auth_knob"]),
                                    int(c["refresh"]))
                for cid, c in doc["warm_start"].items()}
        return OfflinePlan(
            quotas={d: [int(x) for x in qs] for d, qs in doc["quotas"].items()},
            warm_start=warm,
            node_duals={k: float(v) for k, v in doc["node_duals"].items()},
            pool_dual=float(doc["pool_dual"]),
            horizon_slots=int(doc["horizon_slots"]),
            config_hash=doc["config_hash"],
            seed=int(doc["seed"]),
            scenario_count=int(doc["scenario_count"]),
            iterations=int(doc["iterations"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @staticmethod
    def load(path: str | Path) -> "OfflinePlan":
        return OfflinePlan.from_json(Path(path).read_text())


def _priced_selection(chains: list[ClassChain], pi_bar: float) -> tuple[float, dict[str, StrategyColumn]]:
    """Lagrangian subproblem: climb each chain while density exceeds the
    price. Returns (total bits demanded, chosen column per class)."""
    demand = 0.0
    cols: dict[str, StrategyColumn] = {}
    for chain in chains:
        spend = chain.base_cost
        col = chain.base_col
        for step in chain.steps:
            if step.density > pi_bar:
                spend += step.cost
                col = step.to_col
            else:
                break
        demand += spend
        cols[chain.class_id] = col
    return demand, cols


def offline_plan(model: ValidatedModel, scenarios: list[Scenario], iters: int,
                 block_slots: int = 15) -> OfflinePlan:
    """Dual-subgradient pre-allocation over a scenario set.

    Works on block_slots-sized time blocks for tractability; emits per-slot
    domain quotas (expected domain consumption times 1 + reserve_margin),
    modal warm-start columns, and the final node duals.
    """
    assert iters >= 1
    horizon = scenarios[0].yields.shape[0]
    if horizon == 0:
        return OfflinePlan({d.id: [] for d in model.domains}, {}, {n.id: 0.0 for n in model.nodes},
                           0.0, 0, model.config_hash, model.seed, len(scenarios), iters)
    n_blocks = (horizon + block_slots - 1) // block_slots
    cids = model.class_ids
    cp, qp, w = model.crypto, model.queue, model.weights
    specs = {c.id: c for c in model.classes}
    grid = {cid: compliant_columns(specs[cid], cp) for cid in cids}
    share = {n.id: model.traffic_share(n.id) for n in model.nodes}
    total_relax = sum(c.relax_cap for c in model.classes)

    # Per-(scenario, block) contexts averaged across the block.
    block_ctx: list[list[SlotContext]] = []
    avail_node: list[list[dict[str, float]]] = []  # per-slot available bits per node
    pool_amortized = {
        n.id: n.pool_cap * n.init_fill / horizon for n in model.nodes}
    incident: dict[str, list[int]] = {n.id: [] for n in model.nodes}
    for li, link in enumerate(model.links):
        incident[link.u].append(li)
        incident[link.v].append(li)

    for si, sc in enumerate(scenarios):
        row_ctx: list[SlotContext] = []
        row_avail: list[dict[str, float]] = []
        for b in range(n_blocks):
            lo, hi = b * block_slots, min(horizon, (b + 1) * block_slots)
            classes = {}
            for ci, cid in enumerate(cids):
                classes[cid] = ClassSlotContext(
                    specs[cid],
                    float(sc.lam[lo:hi, ci].mean()),
                    AttackContext(
                        float(np.clip(sc.attack_p[lo:hi, ci].mean(), 0.0, 1.0)),
                        float(sc.attack_q[lo:hi, ci].mean()),
                        float(sc.attack_tau[lo:hi, ci].mean()),
                        float(np.clip(sc.theta[lo:hi, ci].mean(), 0.0, 1.0))),
                )
            rates = {cid: classes[cid].arrival_rate for cid in cids}
            net = NetSlotState(qp.bandwidth_bits_per_slot, rates,
                               qp.net_propagation, model.sim.slot_seconds)
            row_ctx.append(SlotContext(classes, net, cp, qp))
            mean_yield = sc.yields[lo:hi].mean(axis=0)
            row_avail.append({
                nid: float(sum(mean_yield[li] for li in incident[nid]))
                + pool_amortized[nid] for nid in share})
        block_ctx.append(row_ctx)
        avail_node.append(row_avail)

    # duals per (node, block)
    pi = {nid: np.zeros(n_blocks) for nid in share}
    weights_s = np.array([sc.weight for sc in scenarios])

    chains_cache: dict[tuple[int, int], list[ClassChain]] = {}

    def chains_for(si: int, b: int) -> list[ClassChain]:
        key = (si, b)
        if key not in chains_cache:
            sctx = block_ctx[si][b]
            chains_cache[key] = [
                build_chain(sctx.classes[cid], grid[cid], cp) for cid in cids]
        return chains_cache[key]

    # base feasibility with recovery relief
    for si in range(len(scenarios)):
        for b in range(n_blocks):
            base = sum(c.base_cost for c in chains_for(si, b))
            avail = sum(avail_node[si][b].values())
            if base > avail + total_relax:
                raise NoBaseFeasibleError(si, b * block_slots,
                                          f"base {base:.0f} > supply {avail:.0f} + relief {total_relax:.0f}")

    for n in range(1, iters + 1):
        gamma = w.dual_gamma0 / n
        for si in range(len(scenarios)):
            wt = weights_s[si]
            for b in range(n_blocks):
                chains = chains_for(si, b)
                pi_bar = float(np.mean([pi[nid][b] for nid in share]))
                demand, _ = _priced_selection(chains, pi_bar)
                for nid in share:
                    excess = demand * share[nid] - avail_node[si][b][nid]
                    pi[nid][b] = max(0.0, pi[nid][b] + gamma * wt * excess)
                # routing feedback on famine blocks only
                if demand > sum(avail_node[si][b].values()):
                    net_demands = {}
                    lo = b * block_slots
                    yields_slot = {li: int(scenarios[si].yields[lo, li])
                                   for li in range(len(model.links))}
                    gen = {nid: sum(yields_slot[li] for li in incident[nid])
                           for nid in share}
                    for nid in share:
                        have = gen[nid] + pool_amortized[nid]
                        need = demand * share[nid]
                        net_demands[nid] = int(round(need - have))
                    try:
                        result = route_keys(list(model.nodes), list(model.links),
                                            yields_slot, net_demands)
                        for nid, short in result.shortfall.items():
                            pi[nid][b] += gamma * wt * short
                    except Exception:
                        pass

        # pricing pass every third iteration on the stressiest block
        if n % 3 == 0:
            for si in range(len(scenarios)):
                b = int(np.argmax([sum(c.base_cost for c in chains_for(si, bb))
                                   / max(1.0, sum(avail_node[si][bb].values()))
                                   for bb in range(n_blocks)]))
                pi_bar = float(np.mean([pi[nid][b] for nid in share]))
                fresh = price_columns({"pi_bar": pi_bar, "mu_bar": {}},
                                      block_ctx[si][b], grid)
                changed = False
                for cid, cols in fresh.items():
                    grid[cid] = grid[cid] + cols
                    changed = True
                if changed:
                    chains_cache.clear()

    # Final budgeted master per (scenario, block) at converged prices.
    quota_acc = {d.id: np.zeros(n_blocks) for d in model.domains}
    warm_votes: dict[str, dict[StrategyColumn, float]] = {cid: {} for cid in cids}
    domain_share = {d.id: sum(share[n.id] for n in model.nodes if n.domain == d.id)
                    for d in model.domains}
    for si, sc in enumerate(scenarios):
        wt = weights_s[si]
        for b in range(n_blocks):
            chains = chains_for(si, b)
            pi_bar = float(np.mean([pi[nid][b] for nid in share]))
            budget = sum(avail_node[si][b].values())
            base = sum(c.base_cost for c in chains)
            sol = allocate_fractional(chains, max(0.0, budget - base), pi_bar)
            spend = base + sol.spend
            for d in model.domains:
                quota_acc[d.id][b] += wt * spend * domain_share[d.id]
            for cid, mix in sol.fractions.items():
                col, _ = max(mix, key=lambda cw: cw[1])
                warm_votes[cid][col.canonical()] = \
                    warm_votes[cid].get(col.canonical(), 0.0) + wt

    reserve = 1.0 + w.reserve_margin
    quotas = {}
    for d in model.domains:
        per_slot = np.repeat(quota_acc[d.id] * reserve, block_slots)[:horizon]
        quotas[d.id] = [int(round(x)) for x in per_slot]
    warm = {cid: max(votes.items(), key=lambda kv: (kv[1], -kv[0].auth_knob))[0]
            for cid, votes in warm_votes.items() if votes}
    node_duals = {nid: float(pi[nid].mean()) for nid in share}
    return OfflinePlan(quotas, warm, node_duals, 0.0, horizon,
                       model.config_hash, model.seed, len(scenarios), iters)
