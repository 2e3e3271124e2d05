"""End-to-end delay model: security-inflated serialization, Kingman GI/G/1
waiting time, crypto compute overheads, and SLA saturation handling.

All classes share one bottleneck server per slot (single-queue abstraction).
The per-message service time absorbs serialization at the effective
bandwidth, per-bit encrypt/verify costs and a fixed crypto overhead; the
end-to-end composition is then

    delay = W_kingman + fixed_crypto_overhead + net_propagation.

Per-bit crypto is counted once, inside the service rate. When offered load
reaches capacity the wait is undefined; callers treat that as an automatic
SLA violation with saturating delay 10 * D_max (flagged).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import RangeError, UnstableQueueError
from .model import CryptoParams, MessageClassSpec, QueueParams, Strategy, StrategyColumn
from . import crypto

SATURATION_SLA_MULT = 10.0


@dataclass(frozen=True)
class NetSlotState:
    """Per-slot network state: bandwidth, arrival rates, fixed net time."""

    bandwidth_bits_per_slot: float
    arrival_rates: dict[str, float] = field(default_factory=dict)  # msgs/slot
    net_propagation: float = 0.0        # seconds
    slot_seconds: float = 1.0

    def __post_init__(self):
        if self.bandwidth_bits_per_slot <= 0:
            raise RangeError("bandwidth must be > 0")
        if self.slot_seconds <= 0:
            raise RangeError("slot_seconds must be > 0")


def overhead_bits(cls: MessageClassSpec, col: StrategyColumn, qp: QueueParams,
                  cp: CryptoParams) -> int:
    """Wire overhead ΔL: header + tag, plus IV for the AES strategies.

    S1 pads to payload length, so it adds the WC tag only.
    """
    if col.strategy is Strategy.S1_OTP_WC:
        return qp.header_bits + crypto.mac_len(col.auth_knob, cp)
    if col.strategy is Strategy.S2_AES_WC:
        return qp.header_bits + crypto.mac_len(col.auth_knob, cp) + cp.iv_bits
    return qp.header_bits + cp.comp_tag_bits + cp.iv_bits


def service_time(cls: MessageClassSpec, col: StrategyColumn, state: NetSlotState,
                 qp: QueueParams, cp: CryptoParams) -> float:
    """Mean service time 1/μ in seconds for one message of a class."""
    bits = cls.payload_bits + overhead_bits(cls, col, qp, cp)
    bandwidth_per_sec = state.bandwidth_bits_per_slot / state.slot_seconds
    return bits / bandwidth_per_sec \
        + (qp.enc_cost_per_bit + qp.ver_cost_per_bit) * bits \
        + qp.fixed_crypto_overhead


def service_rate(cls: MessageClassSpec, col: StrategyColumn, state: NetSlotState,
                 qp: QueueParams, cp: CryptoParams) -> float:
    """Service rate μ in messages/second."""
    return 1.0 / service_time(cls, col, state, qp, cp)


def utilization(assignment: dict[str, StrategyColumn],
                classes: dict[str, MessageClassSpec], state: NetSlotState,
                qp: QueueParams, cp: CryptoParams) -> float:
    """Total offered load ρ = Σ_i λ_i / μ_i across the shared server."""
    rho = 0.0
    for cid, col in assignment.items():
        lam_per_sec = state.arrival_rates.get(cid, 0.0) / state.slot_seconds
        if lam_per_sec > 0.0:
            rho += lam_per_sec * service_time(classes[cid], col, state, qp, cp)
    return rho


def kingman_wait(total_util: float, ca2: float, cs2: float, mu: float) -> float:
    """Kingman GI/G/1 mean wait: (ρ/(1-ρ)) · ((ca²+cs²)/2) · (1/μ)."""
    if mu <= 0.0:
        raise RangeError("mu must be > 0")
    if total_util < 0.0:
        raise RangeError("utilization must be >= 0")
    if total_util >= 1.0:
        raise UnstableQueueError(f"utilization {total_util:.4f} >= 1")
    return (total_util / (1.0 - total_util)) * 0.5 * (ca2 + cs2) / mu


def end_to_end_delay(cls: MessageClassSpec, col: StrategyColumn, state: NetSlotState,
                     qp: QueueParams, cp: CryptoParams,
                     total_util: float) -> tuple[float, bool]:
    """(delay seconds, saturated flag) for one class under a given total load.

    Saturated queues return the declared 10 * D_max cap with the flag set so
    the hinge penalty stays finite.
    """
    mu = service_rate(cls, col, state, qp, cp)
    try:
        wait = kingman_wait(total_util, qp.ca2, qp.cs2, mu)
    except UnstableQueueError:
        return SATURATION_SLA_MULT * cls.sla_delay, True
    return wait + qp.fixed_crypto_overhead + state.net_propagation, False


def delay_grad_a(cls: MessageClassSpec, col: StrategyColumn, state: NetSlotState,
                 qp: QueueParams, cp: CryptoParams, total_util: float) -> float:
    """Approximate d(delay)/d(auth_knob), holding total utilization fixed.

    Larger knobs lengthen the tag, inflating service time by
    (1/B + enc + ver) · slope bits/unit; the wait scales with 1/μ.
    """
    if col.strategy is Strategy.S3_AES_MAC:
        return 0.0
    if crypto.mac_len_smooth(col.auth_knob, cp) >= cp.mac_len_cap:
        return 0.0
    if total_util >= 1.0:
        return 0.0
    bandwidth_per_sec = state.bandwidth_bits_per_slot / state.slot_seconds
    dserv_da = (1.0 / bandwidth_per_sec + qp.enc_cost_per_bit
                + qp.ver_cost_per_bit) * cp.mac_len_slope
    return (total_util / (1.0 - total_util)) * 0.5 * (qp.ca2 + qp.cs2) * dserv_da
