from __future__ import annotations

import dataclasses

import numpy as np
import pytest

from qksched import queueing
from qksched.errors import UnstableQueueError
from qksched.model import MessageClassSpec, QueueParams, Strategy, StrategyColumn
from qksched.queueing import NetSlotState


def _cls(payload=1e6, sla=1.0):
    return MessageClassSpec(id="M3", lambda_base=1.0, payload_bits=payload,
                            sla_delay=sla, unit_loss=1.0, sla_weight=1.0)


def _qp(**kw):
    defaults = dict(bandwidth_bits_per_slot=1e7, ca2=1.0, cs2=1.0,
                    enc_cost_per_bit=0.0, ver_cost_per_bit=0.0,
                    fixed_crypto_overhead=0.0, header_bits=0, net_propagation=0.0)
    defaults.update(kw)
    return QueueParams(**defaults)


def s1(a):
    return StrategyColumn(Strategy.S1_OTP_WC, a, 1)


def s3(r=1):
    return StrategyColumn(Strategy.S3_AES_MAC, 0.0, r)


class TestOverheadBits:
    def test_s1_tag_only(self, crypto_params):
        qp = _qp()
        assert queueing.overhead_bits(_cls(), s1(64.0), qp, crypto_params) == 64

    def test_s3_header_tag_iv(self, crypto_params):
        cp = dataclasses.replace(crypto_params, comp_tag_bits=128)
        qp = _qp(header_bits=40)
        assert queueing.overhead_bits(_cls(), s3(), qp, cp) == 40 + 128 + 96

    def test_zero_overhead(self, crypto_params):
        qp = _qp()
        assert queueing.overhead_bits(_cls(), s1(0.0), qp, crypto_params) == 0


class TestServiceRate:
    def test_pure_serialization_unit(self, crypto_params):
        # L + dL = B * 1s -> mu = 1/s
        qp = _qp(bandwidth_bits_per_slot=1e7)
        state = NetSlotState(1e7, {}, 0.0, 1.0)
        mu = queueing.service_rate(_cls(1e7), s1(0.0), state, qp, crypto_params)
        assert mu == pytest.approx(1.0, rel=1e-12)

    def test_hand_value(self, crypto_params):
        qp = _qp()
        state = NetSlotState(1e7, {}, 0.0, 1.0)
        mu = queueing.service_rate(_cls(1e6), s1(0.0), state, qp, crypto_params)
        assert mu == pytest.approx(10.0, rel=1e-12)

    def test_fixed_overhead_adds(self, crypto_params):
        qp = _qp(fixed_crypto_overhead=0.05)
        state = NetSlotState(1e7, {}, 0.0, 1.0)
        mu = queueing.service_rate(_cls(1e6), s1(0.0), state, qp, crypto_params)
        assert mu == pytest.approx(1.0 / 0.15, rel=1e-12)


class TestKingman:
    def test_empty_queue(self):
        assert queueing.kingman_wait(0.0, 1.0, 1.0, 1.0) == 0.0

    def test_mm1_closed_form_point(self):
        assert queueing.kingman_wait(0.5, 1.0, 1.0, 1.0) == pytest.approx(1.0, abs=1e-15)

    def test_unstable(self):
        with pytest.raises(UnstableQueueError):
            queueing.kingman_wait(1.0, 1.0, 1.0, 1.0)

    def test_mm1_grid(self):
        # with ca2 = cs2 = 1 Kingman must equal M/M/1 Wq = rho/(mu(1-rho))
        rng = np.random.default_rng(5)
        rhos = rng.uniform(0.0, 0.999, 100)
        mus = rng.uniform(0.01, 50.0, 100)
        for rho, mu in zip(rhos, mus):
            w = queueing.kingman_wait(rho, 1.0, 1.0, mu)
            assert abs(w - rho / (mu * (1.0 - rho))) < 1e-12


class TestEndToEnd:
    def test_additive_identity(self, crypto_params):
        qp = _qp()
        state = NetSlotState(1e7, {}, 0.01, 1.0)
        delay, sat = queueing.end_to_end_delay(
            _cls(), s1(0.0), state, qp, crypto_params, total_util=0.0)
        assert not sat
        assert delay == pytest.approx(0.01, abs=1e-15)

    def test_mm1_plus_propagation(self, crypto_params):
        qp = _qp(bandwidth_bits_per_slot=1e7)
        state = NetSlotState(1e7, {}, 0.02, 1.0)
        delay, sat = queueing.end_to_end_delay(
            _cls(1e7), s1(0.0), state, qp, crypto_params, total_util=0.5)
        assert not sat
        assert delay == pytest.approx(1.02, rel=1e-12)

    def test_saturation_rule(self, crypto_params):
        qp = _qp()
        state = NetSlotState(1e7, {}, 0.02, 1.0)
        delay, sat = queueing.end_to_end_delay(
            _cls(sla=0.25), s1(0.0), state, qp, crypto_params, total_util=1.0)
        assert sat
        assert delay == pytest.approx(2.5, rel=1e-12)

    def test_nondecreasing_in_auth_knob(self, crypto_params):
        qp = _qp(bandwidth_bits_per_slot=6e7, enc_cost_per_bit=4e-6,
                 ver_cost_per_bit=4e-6, header_bits=40)
        state = NetSlotState(6e7, {}, 0.01, 60.0)
        rng = np.random.default_rng(6)
        for _ in range(50):
            util = rng.uniform(0.0, 0.95)
            a1, a2 = sorted(rng.uniform(0, 128, 2))
            d1, _ = queueing.end_to_end_delay(
                _cls(800), s1(a1), state, qp, crypto_params, util)
            d2, _ = queueing.end_to_end_delay(
                _cls(800), s1(a2), state, qp, crypto_params, util)
            assert d1 <= d2 + 1e-15

    def test_piecewise_constant_between_tag_boundaries(self, crypto_params):
        # tags are ceil-linear, so delay is a step function of the knob:
        # constant within a quantization cell, small jump at cell boundaries
        qp = _qp(bandwidth_bits_per_slot=6e7, enc_cost_per_bit=4e-6,
                 ver_cost_per_bit=4e-6)
        state = NetSlotState(6e7, {}, 0.01, 60.0)
        d1, _ = queueing.end_to_end_delay(_cls(800), s1(64.2), state, qp,
                                          crypto_params, 0.9)
        d2, _ = queueing.end_to_end_delay(_cls(800), s1(64.9), state, qp,
                                          crypto_params, 0.9)
        assert d1 == d2
        before, _ = queueing.end_to_end_delay(_cls(800), s1(64.0), state, qp,
                                              crypto_params, 0.9)
        after, _ = queueing.end_to_end_delay(_cls(800), s1(65.0), state, qp,
                                             crypto_params, 0.9)
        one_bit = 9.0 * 0.5 * (qp.ca2 + qp.cs2) * (1.0 / 1e6 + 8e-6)
        assert 0.0 <= after - before <= 2 * one_bit


def test_utilization_sums_class_loads(model, crypto_params):
    qp = model.queue
    classes = {c.id: c for c in model.classes}
    rates = {c.id: c.lambda_base for c in model.classes}
    state = NetSlotState(qp.bandwidth_bits_per_slot, rates,
                         qp.net_propagation, model.sim.slot_seconds)
    assignment = {c.id: StrategyColumn(Strategy.S2_AES_WC, 64.0, 32)
                  for c in model.classes}
    rho = queueing.utilization(assignment, classes, state, qp, crypto_params)
    manual = 0.0
    for cid, col in assignment.items():
        lam = rates[cid] / model.sim.slot_seconds
        manual += lam * queueing.service_time(classes[cid], col, state, qp, crypto_params)
    assert rho == pytest.approx(manual, rel=1e-12)
    assert 0.0 < rho < 1.0
