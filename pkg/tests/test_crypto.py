from __future__ import annotations

import dataclasses
from decimal import Decimal

import numpy as np
import pytest

from qksched import crypto
from qksched.crypto import AttackContext
from qksched.errors import NonPositiveDeltaCostError, RangeError
from qksched.model import MessageClassSpec, Strategy, StrategyColumn


def _cls(payload=800.0, loss=1e5):
    return MessageClassSpec(id="M2", lambda_base=1.0, payload_bits=payload,
                            sla_delay=1.0, unit_loss=loss, sla_weight=1.0)


def s1(a):
    return StrategyColumn(Strategy.S1_OTP_WC, a, 1)


def s2(a, r):
    return StrategyColumn(Strategy.S2_AES_WC, a, r)


def s3(r):
    return StrategyColumn(Strategy.S3_AES_MAC, 0.0, r)


class TestMacLen:
    def test_zero(self, crypto_params):
        assert crypto.mac_len(0.0, crypto_params) == 0

    def test_ceil_linear(self, crypto_params):
        assert crypto.mac_len(64.2, crypto_params) == 65

    def test_cap(self, crypto_params):
        assert crypto.mac_len(128.0, crypto_params) == 128

    def test_out_of_box(self, crypto_params):
        with pytest.raises(RangeError):
            crypto.mac_len(300.0, crypto_params)
        with pytest.raises(RangeError):
            crypto.mac_len(-1.0, crypto_params)

    def test_nondecreasing(self, crypto_params):
        grid = np.linspace(0, crypto_params.a_max, 97)
        tags = [crypto.mac_len(a, crypto_params) for a in grid]
        assert all(t1 <= t2 for t1, t2 in zip(tags, tags[1:]))


class TestKeyCost:
    def test_s1_zero_tag_reduces_to_payload(self, crypto_params):
        assert crypto.key_cost(_cls(800.0), s1(0.0), crypto_params) == 800.0

    def test_s2_hand_value(self, crypto_params):
        # iv 96 + tag 64 + 256/4 = 224
        assert crypto.key_cost(_cls(), s2(64.0, 4), crypto_params) == 224.0

    def test_s3_hand_value(self, crypto_params):
        cp = dataclasses.replace(crypto_params, comp_tag_bits=128)
        # iv 96 + tag 128 + 256/1 = 480
        assert crypto.key_cost(_cls(), s3(1), cp) == 480.0


class TestResidualSuccess:
    def test_s1_pure_tag(self, crypto_params):
        cp = dataclasses.replace(crypto_params, impl_epsilon=0.0)
        rho = crypto.residual_success(_cls(), s1(32.0), AttackContext(0.5), cp)
        assert rho == pytest.approx(float(Decimal(2) ** -32), rel=0, abs=0)

    def test_s1_clamped_at_one(self, crypto_params):
        cp = dataclasses.replace(crypto_params, impl_epsilon=0.01)
        rho = crypto.residual_success(_cls(), s1(0.0), AttackContext(1.0), cp)
        assert rho == 1.0

    def test_s3_advantage_curve(self, crypto_params):
        # q=2^20, tau=1, unit scale, level 128, tag 128 -> 2^-108 + 2^-128
        cp = dataclasses.replace(crypto_params, adv_scale_mac=1.0,
                                 adv_sec_level=128.0, comp_tag_bits=128)
        ctx = AttackContext(0.5, query_budget=2.0 ** 20, duration_slots=1.0)
        rho = crypto.residual_success(_cls(), s3(4), ctx, cp)
        assert rho == pytest.approx(2.0 ** -108 + 2.0 ** -128, rel=1e-15)

    def test_monotone_grids(self, crypto_params):
        rng = np.random.default_rng(11)
        ctx = AttackContext(0.3, query_budget=1e6, duration_slots=8.0)
        for _ in range(200):
            a1, a2 = sorted(rng.uniform(0, crypto_params.a_max, 2))
            r1, r2 = sorted(rng.integers(1, crypto_params.r_max + 1, 2))
            # rho nonincreasing in a for S1/S2, in r for S2; kappa monotone per shape
            assert crypto.residual_success(_cls(), s1(a1), ctx, crypto_params) \
                >= crypto.residual_success(_cls(), s1(a2), ctx, crypto_params)
            assert crypto.residual_success(_cls(), s2(a1, int(r1)), ctx, crypto_params) \
                >= crypto.residual_success(_cls(), s2(a2, int(r1)), ctx, crypto_params)
            assert crypto.residual_success(_cls(), s2(a1, int(r1)), ctx, crypto_params) \
                >= crypto.residual_success(_cls(), s2(a1, int(r2)), ctx, crypto_params)
            assert crypto.key_cost(_cls(), s1(a1), crypto_params) \
                <= crypto.key_cost(_cls(), s1(a2), crypto_params)
            assert crypto.key_cost(_cls(), s2(a1, int(r1)), crypto_params) \
                >= crypto.key_cost(_cls(), s2(a1, int(r2)), crypto_params)

    def test_monotone_in_attack_pressure(self, crypto_params):
        rng = np.random.default_rng(12)
        for _ in range(100):
            q1, q2 = sorted(rng.uniform(0, 1e8, 2))
            t1, t2 = sorted(rng.uniform(0, 50, 2))
            c_small = AttackContext(0.5, q1, t1)
            c_big = AttackContext(0.5, q2, t2)
            for col in (s2(32.0, 4), s3(4)):
                assert crypto.residual_success(_cls(), col, c_small, crypto_params) \
                    <= crypto.residual_success(_cls(), col, c_big, crypto_params)

    def test_always_in_unit_interval(self, crypto_params):
        rng = np.random.default_rng(13)
        for _ in range(300):
            col = [s1(rng.uniform(0, 128)), s2(rng.uniform(0, 128), int(rng.integers(1, 33))),
                   s3(int(rng.integers(1, 33)))][rng.integers(0, 3)]
            ctx = AttackContext(rng.uniform(0, 1), rng.uniform(0, 1e12),
                                rng.uniform(0, 1e3), rng.uniform(0, 1))
            rho = crypto.residual_success(_cls(), col, ctx, crypto_params)
            assert 0.0 <= rho <= 1.0


class TestExpectedRisk:
    def test_zero_attempt_prob(self, crypto_params):
        ctx = AttackContext(0.0, 1e6, 10.0, 1.0)
        assert crypto.expected_class_risk(_cls(), s3(1), ctx, crypto_params) == 0.0

    def test_hand_value(self, crypto_params):
        # force rho = 1e-4 via a tag: pick tag bits so 2^-t = 1e-4 -> not exact;
        # instead check p * rho * loss * theta with computed rho
        ctx = AttackContext(0.1, 0.0, 0.0, 1.0)
        cp = dataclasses.replace(crypto_params, impl_epsilon=0.0)
        col = s1(16.0)
        rho = crypto.residual_success(_cls(), col, ctx, cp)
        risk = crypto.expected_class_risk(_cls(loss=1e5), col, ctx, cp)
        assert risk == pytest.approx(0.1 * rho * 1e5, rel=1e-15)

    def test_multilinear_in_p_loss_theta(self, crypto_params):
        col = s2(64.0, 8)
        base = crypto.expected_class_risk(
            _cls(loss=1e5), col, AttackContext(0.1, 1e6, 4.0, 1.0), crypto_params)
        halved_theta = crypto.expected_class_risk(
            _cls(loss=1e5), col, AttackContext(0.1, 1e6, 4.0, 0.5), crypto_params)
        doubled_p = crypto.expected_class_risk(
            _cls(loss=1e5), col, AttackContext(0.2, 1e6, 4.0, 1.0), crypto_params)
        doubled_loss = crypto.expected_class_risk(
            _cls(loss=2e5), col, AttackContext(0.1, 1e6, 4.0, 1.0), crypto_params)
        assert halved_theta == pytest.approx(base / 2, rel=1e-12)
        assert doubled_p == pytest.approx(base * 2, rel=1e-12)
        assert doubled_loss == pytest.approx(base * 2, rel=1e-12)


class TestMsv:
    def test_zero_delta_rho(self, crypto_params):
        # same bound, higher cost: upgrade S2 r=4 -> r=2 at a fixed in a
        # context with no computational pressure changes only kappa
        ctx = AttackContext(0.1, 0.0, 0.0, 1.0)
        v = crypto.msv(_cls(), s2(64.0, 4), s2(64.0, 2), ctx, crypto_params)
        assert v == 0.0

    def test_hand_value(self, crypto_params):
        # engineer dk=100 and drho=1e-4 exactly is awkward with real curves;
        # verify the formula against its own parts instead
        cls = _cls(loss=1e5)
        ctx = AttackContext(0.1, 5e7, 2.0, 1.0)
        frm, to = s3(32), s2(64.0, 32)
        dk = crypto.key_cost(cls, to, crypto_params) - crypto.key_cost(cls, frm, crypto_params)
        drho = crypto.residual_success(cls, frm, ctx, crypto_params) \
            - crypto.residual_success(cls, to, ctx, crypto_params)
        expect = 0.1 * drho * 1e5 / dk
        assert crypto.msv(cls, frm, to, ctx, crypto_params) == pytest.approx(expect, rel=1e-14)

    def test_halving_with_doubled_cost(self, crypto_params):
        cls = _cls(loss=1e5)
        ctx = AttackContext(0.1, 5e7, 2.0, 1.0)
        base = crypto.msv(cls, s3(32), s2(64.0, 32), ctx, crypto_params)
        # doubling dk at equal drho must halve msv: emulate by comparing parts
        dk = crypto.key_cost(cls, s2(64.0, 32), crypto_params) \
            - crypto.key_cost(cls, s3(32), crypto_params)
        drho = crypto.residual_success(cls, s3(32), ctx, crypto_params) \
            - crypto.residual_success(cls, s2(64.0, 32), ctx, crypto_params)
        assert base * dk == pytest.approx(0.1 * drho * 1e5, rel=1e-12)

    def test_nonpositive_delta_cost_rejected(self, crypto_params):
        ctx = AttackContext(0.1, 1e6, 2.0, 1.0)
        with pytest.raises(NonPositiveDeltaCostError):
            crypto.msv(_cls(), s2(64.0, 4), s2(64.0, 8), ctx, crypto_params)

    def test_sign_matches_delta_rho(self, crypto_params):
        rng = np.random.default_rng(17)
        cls = _cls(loss=1e5)
        for _ in range(100):
            ctx = AttackContext(0.5, rng.uniform(0, 1e8), rng.uniform(0, 20), 1.0)
            a1, a2 = sorted(rng.uniform(0, 100, 2))
            frm, to = s2(a1, 8), s2(a2 + 1e-6, 8)
            dk = crypto.key_cost(cls, to, crypto_params) - crypto.key_cost(cls, frm, crypto_params)
            if dk <= 0:
                continue
            drho = crypto.residual_success(cls, frm, ctx, crypto_params) \
                - crypto.residual_success(cls, to, ctx, crypto_params)
            v = crypto.msv(cls, frm, to, ctx, crypto_params)
            assert (v > 0) == (drho > 0) or drho == 0
