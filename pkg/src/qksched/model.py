"""Configuration model: domain types, validation, and the default scenario.

The config is a single JSON document with top-level keys ``classes``,
``nodes``, ``links``, ``domains``, ``crypto``, ``queue``, ``weights``,
``sim`` and ``seed``. Validation is strict: unknown keys are rejected, all
type invariants are checked with the offending field named, and
cross-references must resolve. The validated model is immutable and safe to
share across concurrent episode runners.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields
from enum import Enum
from pathlib import Path
from typing import Any

from .errors import DanglingRefError, InvariantError, ParseError

CLASS_IDS = ("M1", "M2", "M3", "M4", "M5")

# Compliance floor applied to M1/M4 in strict mode (minimum WC tag bits).
STRICT_MIN_TAG_BITS = 64


class Strategy(Enum):
    """The three mutually exclusive protection strategies."""

    S1_OTP_WC = "S1"
    S2_AES_WC = "S2"
    S3_AES_MAC = "S3"

    @property
    def code(self) -> str:
        return self.value


@dataclass(frozen=True)
class StrategyColumn:
    """One concrete (strategy, auth-strength, refresh) configuration.

    ``auth_knob`` is ignored under S3 (the computational-MAC bound has no
    WC-tag dependence) and ``refresh`` is ignored under S1 (no session key);
    ``canonical()`` zeroes the ignored knob so columns compare by effect.
    """

    strategy: Strategy
    auth_knob: float = 0.0
    refresh: int = 1

    def canonical(self) -> "StrategyColumn":
        if self.strategy is Strategy.S3_AES_MAC:
            return StrategyColumn(self.strategy, 0.0, self.refresh)
        if self.strategy is Strategy.S1_OTP_WC:
            return StrategyColumn(self.strategy, self.auth_knob, 1)
        return self

    def describe(self) -> str:
        return f"{self.strategy.code}(a={self.auth_knob:g},r={self.refresh})"


@dataclass(frozen=True)
class MessageClassSpec:
    """Per-class arrival, payload, SLA, loss and priority parameters."""

    id: str
    lambda_base: float          # messages per slot
    payload_bits: float
    sla_delay: float            # seconds
    unit_loss: float            # currency per successful attack
    sla_weight: float           # currency per second of SLA excess
    min_tag_bits: int = 0       # 0 = unconstrained
    forbid_s3: bool = False
    qosec_cap: float | None = None   # cap on residual success probability
    recovery_weight: float = 1.0
    relax_cap: float = 0.0      # max demand relief, bits/slot


@dataclass(frozen=True)
class CryptoParams:
    """Key-cost and residual-bound parameters shared by all classes."""

    iv_bits: int = 96
    session_key_bits: int = 256
    comp_tag_bits: int = 16
    impl_epsilon: float = 1e-9
    mac_len_slope: float = 1.0      # tag bits per unit of auth knob
    mac_len_cap: int = 128
    a_max: float = 128.0
    r_max: int = 32
    adv_scale_aes: float = 1.0
    adv_scale_mac: float = 4.0
    adv_sec_level: float = 40.0     # bits in the advantage denominator
    a_grid: tuple[float, ...] = (0.0, 64.0, 96.0, 128.0)
    r_grid: tuple[int, ...] = (1, 4, 16, 32)


@dataclass(frozen=True)
class NodeSpec:
    id: str
    pool_cap: int               # bits
    ttl_slots: int
    domain: str
    traffic_weight: float = 1.0
    init_fill: float = 0.5      # initial pool level as a fraction of cap


@dataclass(frozen=True)
class LinkSpec:
    u: str
    v: str
    yield_max: int              # bits/slot at ideal conditions
    qber_threshold: float = 0.11
    env_sensitivity: float = 1.0


@dataclass(frozen=True)
class DomainSpec:
    id: str
    transit_cap_per_slot: int   # cap on intra-domain routed key bits
    alloc_quota_per_slot: int   # cap on intra-domain business consumption


@dataclass(frozen=True)
class ObjectiveWeights:
    budget_hinge: float = 1e-4          # currency per deficit bit
    smooth_weight: float = 5.0
    smooth_a: float = 0.01
    smooth_r: float = 0.05
    smooth_x: float = 1.0
    prox_a: float = 0.02
    prox_r: float = 0.1
    a_step_size: float = 20.0           # projected proximal step on the auth knob
    dual_gamma0: float = 1e-11          # offline schedule gamma_n = gamma0/n
    dual_gamma_online: float = 3e-11    # constant online step
    terminal_key_value: float = 1e-5    # floor on the per-bit terminal potential
    delay_margin_mult: dict[str, float] = field(default_factory=dict)
    delay_margin_default: float = 1.0
    key_margin_mult: dict[str, float] = field(default_factory=dict)
    key_margin_default: float = 1.0
    explore_fraction: float = 0.1
    lcb_quantile: float = 0.2
    reserve_margin: float = 0.15

    def delay_margin(self, class_id: str) -> float:
        return self.delay_margin_mult.get(class_id, self.delay_margin_default)

    def key_margin(self, node_id: str) -> float:
        return self.key_margin_mult.get(node_id, self.key_margin_default)


@dataclass(frozen=True)
class QueueParams:
    bandwidth_bits_per_slot: float = 60_000_000.0
    ca2: float = 2.0
    cs2: float = 1.5
    enc_cost_per_bit: float = 4e-6      # seconds
    ver_cost_per_bit: float = 4e-6
    fixed_crypto_overhead: float = 0.002
    header_bits: int = 40
    net_propagation: float = 0.05       # fixed network time, seconds


@dataclass(frozen=True)
class PeakWindow:
    start_slot: int
    end_slot: int
    amp: float


@dataclass(frozen=True)
class TrafficModel:
    diurnal_amp: float = 0.1
    peak_windows: tuple[PeakWindow, ...] = ()


@dataclass(frozen=True)
class AttackModel:
    base_prob: dict[str, float] = field(default_factory=dict)
    pulse_rate_per_day: float = 3.0
    pulse_dur_shape: float = 1.5        # Pareto shape for pulse durations
    pulse_dur_scale: float = 8.0
    pulse_dur_cap: int = 120
    pulse_prob_boost: float = 10.0      # multiplies baseline p during a pulse
    q_base: float = 1e3
    q_pulse: float = 3e5
    q_sigma: float = 1.0                # lognormal spread of pulse magnitudes
    q_cap: float = 2e6
    peak_sync: float = 1.0              # extra pulse likelihood in peak windows


@dataclass(frozen=True)
class WeatherModel:
    qber_base: float = 0.04
    qber_jitter: float = 0.02
    qber_ar1: float = 0.95
    outage_rate_per_day: float = 1.0
    outage_dur_min: int = 30
    outage_dur_max: int = 90
    shock_rate_per_day: float = 1.0
    shock_yield_factor: float = 0.3
    shock_attack_mult: float = 8.0
    shock_dur_shape: float = 1.5
    shock_dur_scale: float = 30.0
    shock_dur_cap: int = 180


@dataclass(frozen=True)
class ShockWindow:
    """Scripted stress window: yields scale down, attack intensity scales up."""

    start_slot: int
    end_slot: int
    yield_factor: float = 1.0
    attack_mult: float = 1.0


@dataclass(frozen=True)
class SimParams:
    slot_seconds: float = 60.0
    horizon_slots: int = 1440
    lookahead_slots: int = 5
    strict_compliance: bool = True
    traffic: dict[str, TrafficModel] = field(default_factory=dict)
    context_amp: dict[str, float] = field(default_factory=dict)
    attack: AttackModel = field(default_factory=AttackModel)
    weather: WeatherModel = field(default_factory=WeatherModel)
    shock_windows: tuple[ShockWindow, ...] = ()


@dataclass(frozen=True)
class ValidatedModel:
    """Immutable bundle of all validated configuration."""

    classes: tuple[MessageClassSpec, ...]
    nodes: tuple[NodeSpec, ...]
    links: tuple[LinkSpec, ...]
    domains: tuple[DomainSpec, ...]
    crypto: CryptoParams
    queue: QueueParams
    weights: ObjectiveWeights
    sim: SimParams
    seed: int
    config_hash: str

    def class_by_id(self, cid: str) -> MessageClassSpec:
        for c in self.classes:
            if c.id == cid:
                return c
        raise KeyError(cid)

    def node_by_id(self, nid: str) -> NodeSpec:
        for n in self.nodes:
            if n.id == nid:
                return n
        raise KeyError(nid)

    @property
    def class_ids(self) -> tuple[str, ...]:
        return tuple(c.id for c in self.classes)

    @property
    def node_ids(self) -> tuple[str, ...]:
        return tuple(n.id for n in self.nodes)

    def traffic_share(self, node_id: str) -> float:
        total = sum(n.traffic_weight for n in self.nodes)
        return self.node_by_id(node_id).traffic_weight / total

    def serialize(self) -> dict[str, Any]:
        """Round-trippable config document (validate(serialize()) is identity)."""
        return {
            "seed": self.seed,
            "classes": [_class_to_doc(c) for c in self.classes],
            "nodes": [_node_to_doc(n) for n in self.nodes],
            "links": [_link_to_doc(l) for l in self.links],
            "domains": [_domain_to_doc(d) for d in self.domains],
            "crypto": _crypto_to_doc(self.crypto),
            "queue": _plain_to_doc(self.queue),
            "weights": _weights_to_doc(self.weights),
            "sim": _sim_to_doc(self.sim),
        }


# ---------------------------------------------------------------------------
# document <-> dataclass helpers
# ---------------------------------------------------------------------------

def _require(doc: dict, key: str, section: str) -> Any:
    if key not in doc:
        raise InvariantError(f"{section}.{key}", "missing required field")
    return doc[key]


def _check_known(doc: dict, allowed: set[str], section: str) -> None:
    for k in doc:
        if k not in allowed:
            raise InvariantError(f"{section}.{k}", "unknown key (strict mode)")


def _class_to_doc(c: MessageClassSpec) -> dict:
    d = {
        "id": c.id,
        "lambda_base": c.lambda_base,
        "payload_bits": c.payload_bits,
        "sla_delay": c.sla_delay,
        "unit_loss": c.unit_loss,
        "sla_weight": c.sla_weight,
        "min_tag_bits": c.min_tag_bits,
        "forbid_s3": c.forbid_s3,
        "recovery_weight": c.recovery_weight,
        "relax_cap": c.relax_cap,
    }
    if c.qosec_cap is not None:
        d["qosec_cap"] = c.qosec_cap
    return d


def _node_to_doc(n: NodeSpec) -> dict:
    return {
        "id": n.id, "pool_cap": n.pool_cap, "ttl_slots": n.ttl_slots,
        "domain": n.domain, "traffic_weight": n.traffic_weight,
        "init_fill": n.init_fill,
    }


def _link_to_doc(l: LinkSpec) -> dict:
    return {
        "u": l.u, "v": l.v, "yield_max": l.yield_max,
        "qber_threshold": l.qber_threshold, "env_sensitivity": l.env_sensitivity,
    }


def _domain_to_doc(d: DomainSpec) -> dict:
    return {
        "id": d.id, "transit_cap_per_slot": d.transit_cap_per_slot,
        "alloc_quota_per_slot": d.alloc_quota_per_slot,
    }


def _plain_to_doc(obj: Any) -> dict:
    return {f.name: getattr(obj, f.name) for f in fields(obj)}


def _crypto_to_doc(c: CryptoParams) -> dict:
    d = _plain_to_doc(c)
    d["a_grid"] = list(c.a_grid)
    d["r_grid"] = list(c.r_grid)
    return d


def _weights_to_doc(w: ObjectiveWeights) -> dict:
    d = _plain_to_doc(w)
    d["delay_margin_mult"] = dict(w.delay_margin_mult)
    d["key_margin_mult"] = dict(w.key_margin_mult)
    return d


def _sim_to_doc(s: SimParams) -> dict:
    return {
        "slot_seconds": s.slot_seconds,
        "horizon_slots": s.horizon_slots,
        "lookahead_slots": s.lookahead_slots,
        "strict_compliance": s.strict_compliance,
        "traffic": {
            cid: {
                "diurnal_amp": t.diurnal_amp,
                "peak_windows": [
                    {"start_slot": p.start_slot, "end_slot": p.end_slot, "amp": p.amp}
                    for p in t.peak_windows
                ],
            }
            for cid, t in s.traffic.items()
        },
        "context_amp": dict(s.context_amp),
        "attack": {**_plain_to_doc(s.attack), "base_prob": dict(s.attack.base_prob)},
        "weather": _plain_to_doc(s.weather),
        "shock_windows": [
            {"start_slot": w.start_slot, "end_slot": w.end_slot,
             "yield_factor": w.yield_factor, "attack_mult": w.attack_mult}
            for w in s.shock_windows
        ],
    }


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

_CLASS_KEYS = {"id", "lambda_base", "payload_bits", "sla_delay", "unit_loss",
               "sla_weight", "min_tag_bits", "forbid_s3", "qosec_cap",
               "recovery_weight", "relax_cap"}
_NODE_KEYS = {"id", "pool_cap", "ttl_slots", "domain", "traffic_weight", "init_fill"}
_LINK_KEYS = {"u", "v", "yield_max", "qber_threshold", "env_sensitivity"}
_DOMAIN_KEYS = {"id", "transit_cap_per_slot", "alloc_quota_per_slot"}
_TOP_KEYS = {"seed", "classes", "nodes", "links", "domains", "crypto", "queue",
             "weights", "sim"}


def _parse_class(doc: dict, strict: bool) -> MessageClassSpec:
    _check_known(doc, _CLASS_KEYS, "classes[]")
    cid = _require(doc, "id", "classes[]")
    if cid not in CLASS_IDS:
        raise InvariantError("classes[].id", f"{cid!r} not one of {CLASS_IDS}")
    c = MessageClassSpec(
        id=cid,
        lambda_base=float(_require(doc, "lambda_base", cid)),
        payload_bits=float(_require(doc, "payload_bits", cid)),
        sla_delay=float(_require(doc, "sla_delay", cid)),
        unit_loss=float(_require(doc, "unit_loss", cid)),
        sla_weight=float(doc.get("sla_weight", 0.0)),
        min_tag_bits=int(doc.get("min_tag_bits", 0)),
        forbid_s3=bool(doc.get("forbid_s3", False)),
        qosec_cap=(None if doc.get("qosec_cap") is None else float(doc["qosec_cap"])),
        recovery_weight=float(doc.get("recovery_weight", 1.0)),
        relax_cap=float(doc.get("relax_cap", 0.0)),
    )
    if c.lambda_base < 0:
        raise InvariantError("lambda_base", f"{cid}: must be >= 0")
    if c.payload_bits <= 0:
        raise InvariantError("payload_bits", f"{cid}: must be > 0")
    if c.sla_delay <= 0:
        raise InvariantError("sla_delay", f"{cid}: must be > 0")
    if c.unit_loss < 0:
        raise InvariantError("unit_loss", f"{cid}: must be >= 0")
    if c.sla_weight < 0:
        raise InvariantError("sla_weight", f"{cid}: must be >= 0")
    if c.min_tag_bits < 0:
        raise InvariantError("min_tag_bits", f"{cid}: must be >= 0")
    if c.qosec_cap is not None and not (0.0 < c.qosec_cap <= 1.0):
        raise InvariantError("qosec_cap", f"{cid}: must lie in (0, 1]")
    if c.recovery_weight < 0 or c.relax_cap < 0:
        raise InvariantError("recovery_weight", f"{cid}: recovery fields must be >= 0")
    if strict and cid in ("M1", "M4"):
        if not c.forbid_s3:
            raise InvariantError("forbid_s3", f"{cid}: S3 must be forbidden in strict mode")
        if c.min_tag_bits < STRICT_MIN_TAG_BITS:
            raise InvariantError(
                "min_tag_bits", f"{cid}: strict mode requires >= {STRICT_MIN_TAG_BITS}")
    return c


def _parse_node(doc: dict) -> NodeSpec:
    _check_known(doc, _NODE_KEYS, "nodes[]")
    n = NodeSpec(
        id=str(_require(doc, "id", "nodes[]")),
        pool_cap=int(_require(doc, "pool_cap", "nodes[]")),
        ttl_slots=int(_require(doc, "ttl_slots", "nodes[]")),
        domain=str(_require(doc, "domain", "nodes[]")),
        traffic_weight=float(doc.get("traffic_weight", 1.0)),
        init_fill=float(doc.get("init_fill", 0.5)),
    )
    if n.pool_cap <= 0:
        raise InvariantError("pool_cap", f"{n.id}: must be > 0")
    if n.ttl_slots < 1:
        raise InvariantError("ttl_slots", f"{n.id}: must be >= 1")
    if n.traffic_weight < 0:
        raise InvariantError("traffic_weight", f"{n.id}: must be >= 0")
    if not (0.0 <= n.init_fill <= 1.0):
        raise InvariantError("init_fill", f"{n.id}: must lie in [0, 1]")
    return n


def _parse_link(doc: dict) -> LinkSpec:
    _check_known(doc, _LINK_KEYS, "links[]")
    l = LinkSpec(
        u=str(_require(doc, "u", "links[]")),
        v=str(_require(doc, "v", "links[]")),
        yield_max=int(_require(doc, "yield_max", "links[]")),
        qber_threshold=float(doc.get("qber_threshold", 0.11)),
        env_sensitivity=float(doc.get("env_sensitivity", 1.0)),
    )
    if l.u == l.v:
        raise InvariantError("links[].u", "self-loop link")
    if l.yield_max < 0:
        raise InvariantError("yield_max", f"{l.u}-{l.v}: must be >= 0")
    if l.qber_threshold <= 0:
        raise InvariantError("qber_threshold", f"{l.u}-{l.v}: must be > 0")
    return l


def _parse_domain(doc: dict) -> DomainSpec:
    _check_known(doc, _DOMAIN_KEYS, "domains[]")
    d = DomainSpec(
        id=str(_require(doc, "id", "domains[]")),
        transit_cap_per_slot=int(_require(doc, "transit_cap_per_slot", "domains[]")),
        alloc_quota_per_slot=int(_require(doc, "alloc_quota_per_slot", "domains[]")),
    )
    if d.transit_cap_per_slot < 0 or d.alloc_quota_per_slot < 0:
        raise InvariantError("transit_cap_per_slot", f"{d.id}: caps must be >= 0")
    return d


def _parse_section(doc: dict, cls: type, section: str, special: dict | None = None) -> Any:
    allowed = {f.name for f in fields(cls)}
    _check_known(doc, allowed, section)
    kwargs = dict(doc)
    if special:
        for k, conv in special.items():
            if k in kwargs:
                kwargs[k] = conv(kwargs[k])
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise InvariantError(section, str(exc)) from exc


def _parse_sim(doc: dict) -> SimParams:
    allowed = {f.name for f in fields(SimParams)}
    _check_known(doc, allowed, "sim")
    traffic = {}
    for cid, tdoc in doc.get("traffic", {}).items():
        _check_known(tdoc, {"diurnal_amp", "peak_windows"}, f"sim.traffic.{cid}")
        windows = tuple(
            PeakWindow(int(w["start_slot"]), int(w["end_slot"]), float(w["amp"]))
            for w in tdoc.get("peak_windows", [])
        )
        for w in windows:
            if w.end_slot <= w.start_slot or w.amp < 0:
                raise InvariantError(f"sim.traffic.{cid}.peak_windows", "bad window")
        traffic[cid] = TrafficModel(float(tdoc.get("diurnal_amp", 0.0)), windows)
    attack_doc = dict(doc.get("attack", {}))
    base_prob = {k: float(v) for k, v in attack_doc.pop("attack_base", {}).items()} \
        if "attack_base" in attack_doc else \
        {k: float(v) for k, v in attack_doc.pop("base_prob", {}).items()}
    attack = _parse_section({**attack_doc, "base_prob": base_prob}, AttackModel, "sim.attack")
    for cid, p in attack.base_prob.items():
        if not (0.0 <= p <= 1.0):
            raise InvariantError("sim.attack.base_prob", f"{cid}: must lie in [0, 1]")
    weather = _parse_section(doc.get("weather", {}), WeatherModel, "sim.weather")
    shock_windows = tuple(
        ShockWindow(int(w["start_slot"]), int(w["end_slot"]),
                    float(w.get("yield_factor", 1.0)), float(w.get("attack_mult", 1.0)))
        for w in doc.get("shock_windows", [])
    )
    for w in shock_windows:
        if w.end_slot <= w.start_slot or w.yield_factor < 0 or w.attack_mult < 0:
            raise InvariantError("sim.shock_windows", "bad scripted window")
    context_amp = {k: float(v) for k, v in doc.get("context_amp", {}).items()}
    for cid, amp in context_amp.items():
        if amp < 0:
            raise InvariantError("sim.context_amp", f"{cid}: must be >= 0")
    sim = SimParams(
        slot_seconds=float(doc.get("slot_seconds", 60.0)),
        horizon_slots=int(doc.get("horizon_slots", 1440)),
        lookahead_slots=int(doc.get("lookahead_slots", 5)),
        strict_compliance=bool(doc.get("strict_compliance", True)),
        traffic=traffic,
        context_amp=context_amp,
        attack=attack,
        weather=weather,
        shock_windows=shock_windows,
    )
    if sim.slot_seconds <= 0:
        raise InvariantError("sim.slot_seconds", "must be > 0")
    if sim.horizon_slots < 0:
        raise InvariantError("sim.horizon_slots", "must be >= 0")
    if sim.lookahead_slots < 1:
        raise InvariantError("sim.lookahead_slots", "must be >= 1")
    return sim


def config_hash(doc: dict) -> str:
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def validate_config(raw: dict | str | Path) -> ValidatedModel:
    """Validate a config document and return an immutable model bundle.

    Accepts a parsed dict, a JSON string, or a path to a JSON file. Raises
    ParseError / InvariantError / DanglingRefError with the offending field.
    """
    if isinstance(raw, Path):
        try:
            raw = raw.read_text()
        except OSError as exc:
            raise ParseError(str(exc)) from exc
    if isinstance(raw, str):
        try:
            raw = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ParseError("config document must be a JSON object")

    _check_known(raw, _TOP_KEYS, "config")
    for key in ("classes", "nodes", "links", "domains"):
        if key not in raw:
            raise InvariantError(f"config.{key}", "missing required section")

    sim = _parse_sim(raw.get("sim", {}))
    strict = sim.strict_compliance

    classes = tuple(_parse_class(c, strict) for c in raw["classes"])
    if len({c.id for c in classes}) != len(classes):
        raise InvariantError("classes[].id", "duplicate class id")
    nodes = tuple(_parse_node(n) for n in raw["nodes"])
    if len({n.id for n in nodes}) != len(nodes):
        raise InvariantError("nodes[].id", "duplicate node id")
    links = tuple(_parse_link(l) for l in raw["links"])
    domains = tuple(_parse_domain(d) for d in raw["domains"])
    if len({d.id for d in domains}) != len(domains):
        raise InvariantError("domains[].id", "duplicate domain id")

    node_ids = {n.id for n in nodes}
    domain_ids = {d.id for d in domains}
    for n in nodes:
        if n.domain not in domain_ids:
            raise DanglingRefError(n.domain, f"node {n.id} references unknown domain")
    for l in links:
        for endpoint in (l.u, l.v):
            if endpoint not in node_ids:
                raise DanglingRefError(endpoint, "link references unknown node")

    crypto = _parse_section(
        raw.get("crypto", {}), CryptoParams, "crypto",
        special={"a_grid": lambda v: tuple(float(x) for x in v),
                 "r_grid": lambda v: tuple(int(x) for x in v)})
    if not (0.0 <= crypto.impl_epsilon < 1.0):
        raise InvariantError("crypto.impl_epsilon", "must lie in [0, 1)")
    if crypto.mac_len_cap > 256:
        raise InvariantError("crypto.mac_len_cap", "must be <= 256")
    for name in ("iv_bits", "session_key_bits", "comp_tag_bits", "mac_len_slope",
                 "mac_len_cap", "a_max", "adv_scale_aes", "adv_scale_mac",
                 "adv_sec_level"):
        if getattr(crypto, name) < 0:
            raise InvariantError(f"crypto.{name}", "must be >= 0")
    if crypto.r_max < 1:
        raise InvariantError("crypto.r_max", "must be >= 1")
    if any(a < 0 or a > crypto.a_max for a in crypto.a_grid):
        raise InvariantError("crypto.a_grid", "grid points must lie in [0, a_max]")
    if any(r < 1 or r > crypto.r_max for r in crypto.r_grid):
        raise InvariantError("crypto.r_grid", "grid points must lie in [1, r_max]")

    queue = _parse_section(raw.get("queue", {}), QueueParams, "queue")
    if queue.bandwidth_bits_per_slot <= 0:
        raise InvariantError("queue.bandwidth_bits_per_slot", "must be > 0")
    for name in ("ca2", "cs2", "enc_cost_per_bit", "ver_cost_per_bit",
                 "fixed_crypto_overhead", "header_bits", "net_propagation"):
        if getattr(queue, name) < 0:
            raise InvariantError(f"queue.{name}", "must be >= 0")

    weights = _parse_section(
        raw.get("weights", {}), ObjectiveWeights, "weights",
        special={"delay_margin_mult": dict, "key_margin_mult": dict})
    for f_ in fields(ObjectiveWeights):
        v = getattr(weights, f_.name)
        if isinstance(v, (int, float)) and v < 0:
            raise InvariantError(f"weights.{f_.name}", "must be >= 0")
    if not (0.0 <= weights.explore_fraction < 1.0):
        raise InvariantError("weights.explore_fraction", "must lie in [0, 1)")
    if not (0.0 < weights.lcb_quantile < 1.0):
        raise InvariantError("weights.lcb_quantile", "must lie in (0, 1)")

    for cid in sim.traffic:
        if cid not in {c.id for c in classes}:
            raise DanglingRefError(cid, "sim.traffic references unknown class")
    for cid in sim.attack.base_prob:
        if cid not in {c.id for c in classes}:
            raise DanglingRefError(cid, "sim.attack.base_prob references unknown class")

    seed = int(raw.get("seed", 0))
    model = ValidatedModel(
        classes=classes, nodes=nodes, links=links, domains=domains,
        crypto=crypto, queue=queue, weights=weights, sim=sim, seed=seed,
        config_hash="",
    )
    # Hash the canonical serialized form so hand-written and round-tripped
    # documents with identical content agree.
    object.__setattr__(model, "config_hash", config_hash(model.serialize()))
    return model


# ---------------------------------------------------------------------------
# default scenario
# ---------------------------------------------------------------------------

def _default_links() -> list[dict]:
    ring = [(f"n{i:02d}", f"n{(i + 1) % 16:02d}") for i in range(16)]
    chords = [
        ("n00", "n08"), ("n02", "n13"), ("n04", "n10"), ("n00", "n04"),
        ("n05", "n09"), ("n07", "n12"), ("n01", "n06"), ("n03", "n11"),
        ("n08", "n14"), ("n06", "n11"), ("n02", "n07"), ("n09", "n15"),
    ]
    links = []
    for u, v in ring:
        links.append({"u": u, "v": v, "yield_max": 45_000,
                      "qber_threshold": 0.11, "env_sensitivity": 1.0})
    for u, v in chords:
        links.append({"u": u, "v": v, "yield_max": 30_000,
                      "qber_threshold": 0.11, "env_sensitivity": 1.2})
    return links


def default_config() -> dict[str, Any]:
    """Canonical default scenario: 5 classes, 16 nodes, 28 links, 3 domains.

    A metropolitan overlay with one aggregator-heavy domain and two DER
    domains; 60 s slots over a 24 h horizon. Market and settlement windows
    shape traffic peaks; attack pulses synchronize with them; weather shocks
    depress yields and raise threat intensity in the same windows.
    """
    domains = [
        {"id": "d0", "transit_cap_per_slot": 300_000, "alloc_quota_per_slot": 900_000},
        {"id": "d1", "transit_cap_per_slot": 250_000, "alloc_quota_per_slot": 700_000},
        {"id": "d2", "transit_cap_per_slot": 250_000, "alloc_quota_per_slot": 700_000},
    ]
    nodes = []
    for i in range(16):
        domain = "d0" if i < 6 else ("d1" if i < 11 else "d2")
        nodes.append({
            "id": f"n{i:02d}", "pool_cap": 400_000, "ttl_slots": 240,
            "domain": domain, "traffic_weight": 3.0 if i == 0 else 1.0,
            "init_fill": 0.5,
        })
    classes = [
        {"id": "M1", "lambda_base": 600.0, "payload_bits": 256, "sla_delay": 0.12,
         "unit_loss": 2.0e5, "sla_weight": 2500.0, "min_tag_bits": 64,
         "forbid_s3": True, "qosec_cap": 5e-6, "recovery_weight": 50.0,
         "relax_cap": 40_000.0},
        {"id": "M2", "lambda_base": 600.0, "payload_bits": 512, "sla_delay": 0.20,
         "unit_loss": 3.0e5, "sla_weight": 4000.0, "min_tag_bits": 0,
         "forbid_s3": False, "recovery_weight": 20.0, "relax_cap": 30_000.0},
        {"id": "M3", "lambda_base": 900.0, "payload_bits": 1200, "sla_delay": 0.25,
         "unit_loss": 1.5e5, "sla_weight": 3000.0, "min_tag_bits": 0,
         "forbid_s3": False, "recovery_weight": 10.0, "relax_cap": 60_000.0},
        {"id": "M4", "lambda_base": 300.0, "payload_bits": 1600, "sla_delay": 0.15,
         "unit_loss": 5.0e5, "sla_weight": 3000.0, "min_tag_bits": 64,
         "forbid_s3": True, "qosec_cap": 2e-5, "recovery_weight": 80.0,
         "relax_cap": 15_000.0},
        {"id": "M5", "lambda_base": 120.0, "payload_bits": 4000, "sla_delay": 1.0,
         "unit_loss": 2.0e4, "sla_weight": 200.0, "min_tag_bits": 0,
         "forbid_s3": False, "recovery_weight": 1.0, "relax_cap": 25_000.0},
    ]
    # Market open/close and settlement windows (slot = minute of day).
    market = [{"start_slot": 480, "end_slot": 560, "amp": 0.5},
              {"start_slot": 950, "end_slot": 1040, "amp": 0.55}]
    settle = [{"start_slot": 540, "end_slot": 620, "amp": 0.45},
              {"start_slot": 1320, "end_slot": 1430, "amp": 0.5}]
    dispatch = [{"start_slot": 430, "end_slot": 500, "amp": 0.3},
                {"start_slot": 1010, "end_slot": 1090, "amp": 0.35}]
    sim = {
        "slot_seconds": 60.0,
        "horizon_slots": 1440,
        "lookahead_slots": 5,
        "strict_compliance": True,
        "traffic": {
            "M1": {"diurnal_amp": 0.10, "peak_windows": settle},
            "M2": {"diurnal_amp": 0.25, "peak_windows": market},
            "M3": {"diurnal_amp": 0.20, "peak_windows": dispatch},
            "M4": {"diurnal_amp": 0.15, "peak_windows": market + settle},
            "M5": {"diurnal_amp": 0.05, "peak_windows": []},
        },
        "context_amp": {"M1": 0.5, "M2": 1.0, "M3": 0.3, "M4": 1.0, "M5": 0.2},
        "attack": {
            "base_prob": {"M1": 0.02, "M2": 0.04, "M3": 0.01, "M4": 0.03, "M5": 0.01},
            "pulse_rate_per_day": 3.0,
            "pulse_dur_shape": 1.5, "pulse_dur_scale": 8.0, "pulse_dur_cap": 120,
            "pulse_prob_boost": 10.0,
            "q_base": 1e3, "q_pulse": 3e5, "q_sigma": 1.0, "q_cap": 2e6,
            "peak_sync": 1.0,
        },
        "weather": {
            "qber_base": 0.04, "qber_jitter": 0.02, "qber_ar1": 0.95,
            "outage_rate_per_day": 1.0, "outage_dur_min": 30, "outage_dur_max": 90,
            "shock_rate_per_day": 1.0, "shock_yield_factor": 0.3,
            "shock_attack_mult": 8.0,
            "shock_dur_shape": 1.5, "shock_dur_scale": 30.0, "shock_dur_cap": 180,
        },
        "shock_windows": [],
    }
    return {
        "seed": 20260810,
        "classes": classes,
        "nodes": nodes,
        "links": _default_links(),
        "domains": domains,
        "crypto": {
            "iv_bits": 96, "session_key_bits": 256, "comp_tag_bits": 16,
            "impl_epsilon": 1e-9, "mac_len_slope": 1.0, "mac_len_cap": 128,
            "a_max": 128.0, "r_max": 32,
            "adv_scale_aes": 1.0, "adv_scale_mac": 4.0, "adv_sec_level": 40.0,
            "a_grid": [0.0, 64.0, 96.0, 128.0], "r_grid": [1, 4, 16, 32],
        },
        "queue": {
            "bandwidth_bits_per_slot": 60_000_000.0, "ca2": 2.0, "cs2": 1.5,
            "enc_cost_per_bit": 4e-6, "ver_cost_per_bit": 4e-6,
            "fixed_crypto_overhead": 0.002, "header_bits": 40,
            "net_propagation": 0.05,
        },
        "weights": {
            "budget_hinge": 1e-4, "smooth_weight": 5.0,
            "smooth_a": 0.01, "smooth_r": 0.05, "smooth_x": 1.0,
            "prox_a": 0.02, "prox_r": 0.1, "a_step_size": 20.0,
            "dual_gamma0": 1e-11, "dual_gamma_online": 3e-11,
            "terminal_key_value": 1e-5,
            "delay_margin_mult": {}, "delay_margin_default": 1.0,
            "key_margin_mult": {}, "key_margin_default": 1.0,
            "explore_fraction": 0.1, "lcb_quantile": 0.2, "reserve_margin": 0.15,
        },
        "sim": sim,
    }


def default_model() -> ValidatedModel:
    return validate_config(default_config())
