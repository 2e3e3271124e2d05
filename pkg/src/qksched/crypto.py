"""Per-message key costs, residual attack-success bounds, risk and MSV.

All functions here are pure. Key costs keep fractional bits (expectation
semantics, e.g. the amortized session-key term ℓ_key/r); integer rounding
happens only at pool accounting in keynet.

Cost and bound shapes per strategy:

    κ_S1(a)    = L + ℓ_mac(a)                  ρ_S1(a)   = 2^-ℓ_mac(a) + ε_impl
    κ_S2(a, r) = ℓ_iv + ℓ_mac(a) + ℓ_key/r     ρ_S2(a,r) = 2^-ℓ_mac(a) + Adv_AES(q,τ;r)
    κ_S3(r)    = ℓ_iv + ℓ_tag + ℓ_key/r        ρ_S3(r)   = Adv_MAC(q,τ) + 2^-ℓ_tag

with ℓ_mac(a) = min(cap, ceil(slope·a)) and single-constant advantage fits

    Adv_AES(q, τ; r) = min(1, c_aes · q·τ / (r · 2^level))
    Adv_MAC(q, τ)    = min(1, c_mac · q·τ / 2^level).

ρ values are clamped to [0, 1] after summation: the bounds can exceed 1 at
degenerate parameters (e.g. a zero-length tag).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import NonPositiveDeltaCostError, RangeError, WrongStrategyError
from .model import CryptoParams, MessageClassSpec, Strategy, StrategyColumn


@dataclass(frozen=True)
class AttackContext:
    """Exogenous adversary state for one (class, slot).

    attempt_prob is the attack-attempt probability p; query_budget and
    duration_slots bound the computational adversary; context_amp is the
    realized E[Θ] loss-amplification factor in [0, 1].
    """

    attempt_prob: float
    query_budget: float = 0.0
    duration_slots: float = 0.0
    context_amp: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.attempt_prob <= 1.0):
            raise RangeError(f"attempt_prob {self.attempt_prob} outside [0, 1]")
        if not (0.0 <= self.context_amp <= 1.0):
            raise RangeError(f"context_amp {self.context_amp} outside [0, 1]")
        if self.query_budget < 0 or self.duration_slots < 0:
            raise RangeError("query_budget and duration_slots must be >= 0")


def mac_len(auth_knob: float, params: CryptoParams) -> int:
    """WC tag length in bits for a given auth-strength knob (ceil-linear)."""
    if not (0.0 <= auth_knob <= params.a_max):
        raise RangeError(f"auth_knob {auth_knob} outside [0, {params.a_max}]")
    return min(params.mac_len_cap, math.ceil(params.mac_len_slope * auth_knob))


def mac_len_smooth(auth_knob: float, params: CryptoParams) -> float:
    """Differentiable surrogate of mac_len used by gradient steps."""
    return min(float(params.mac_len_cap), params.mac_len_slope * auth_knob)


def key_cost(cls: MessageClassSpec, col: StrategyColumn, params: CryptoParams) -> float:
    """Expected QKD key bits consumed per message under a column."""
    s = col.strategy
    if s is Strategy.S1_OTP_WC:
        return cls.payload_bits + mac_len(col.auth_knob, params)
    if s is Strategy.S2_AES_WC:
        return params.iv_bits + mac_len(col.auth_knob, params) \
            + params.session_key_bits / col.refresh
    return params.iv_bits + params.comp_tag_bits + params.session_key_bits / col.refresh


def adv_aes(query_budget: float, duration_slots: float, refresh: int,
            params: CryptoParams) -> float:
    return min(1.0, params.adv_scale_aes * query_budget * duration_slots
               / (refresh * 2.0 ** params.adv_sec_level))


def adv_mac(query_budget: float, duration_slots: float, params: CryptoParams) -> float:
    return min(1.0, params.adv_scale_mac * query_budget * duration_slots
               / 2.0 ** params.adv_sec_level)


def residual_success(cls: MessageClassSpec, col: StrategyColumn, ctx: AttackContext,
                     params: CryptoParams) -> float:
    """Upper bound on attacker success given an attempt, clamped to [0, 1]."""
    s = col.strategy
    if s is Strategy.S1_OTP_WC:
        rho = 2.0 ** -mac_len(col.auth_knob, params) + params.impl_epsilon
    elif s is Strategy.S2_AES_WC:
        rho = 2.0 ** -mac_len(col.auth_knob, params) \
            + adv_aes(ctx.query_budget, ctx.duration_slots, col.refresh, params)
    else:
        rho = adv_mac(ctx.query_budget, ctx.duration_slots, params) \
            + 2.0 ** -params.comp_tag_bits
    return min(1.0, max(0.0, rho))


def residual_success_grad_a(col: StrategyColumn, params: CryptoParams) -> float:
    """d ρ / d a for S1/S2 with the smooth tag-length surrogate.

    dρ/da = -(ln 2) · 2^-ℓ_mac(a) · ℓ'_mac(a); zero beyond the tag cap.
    """
    if col.strategy is Strategy.S3_AES_MAC:
        raise WrongStrategyError("S3 has no auth-knob dependence")
    tag = mac_len_smooth(col.auth_knob, params)
    if tag >= params.mac_len_cap:
        return 0.0
    return -math.log(2.0) * 2.0 ** -tag * params.mac_len_slope


def expected_class_risk(cls: MessageClassSpec, col: StrategyColumn, ctx: AttackContext,
                        params: CryptoParams) -> float:
    """Expected residual economic risk p · ρ · L · E[Θ] for one class-slot."""
    if ctx.attempt_prob == 0.0:
        return 0.0
    return ctx.attempt_prob * residual_success(cls, col, ctx, params) \
        * cls.unit_loss * ctx.context_amp


def msv(cls: MessageClassSpec, from_col: StrategyColumn, to_col: StrategyColumn,
        ctx: AttackContext, params: CryptoParams) -> float:
    """Marginal security value of an upgrade, in currency per key bit.

    msv = p · (ρ(from) - ρ(to)) · L · E[Θ] / (κ(to) - κ(from)). Upgrades must
    be oriented by increasing cost; a negative value means the costlier
    column actually has a worse bound.
    """
    delta_cost = key_cost(cls, to_col, params) - key_cost(cls, from_col, params)
    if delta_cost <= 0.0:
        raise NonPositiveDeltaCostError(
            f"upgrade {from_col.describe()} -> {to_col.describe()} has dk={delta_cost}")
    delta_rho = residual_success(cls, from_col, ctx, params) \
        - residual_success(cls, to_col, ctx, params)
    return ctx.attempt_prob * delta_rho * cls.unit_loss * ctx.context_amp / delta_cost
