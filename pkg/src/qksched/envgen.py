"""Environment generation: traffic, attack and weather processes.

One EnvTrace holds the full realized episode environment as arrays, drawn
up-front from four independent RNG streams (traffic / attack / weather /
decision) spawned from the (config seed, episode seed) pair. Stream
separation means toggling one generator never perturbs the others' draws,
and traces are a pure function of (config, seed).

Process shapes:
  traffic  λ_i(t) = base · (1 + diurnal·sin) · (1 + Σ peak amps); Poisson counts
  attack   baseline drift + Poisson pulse onsets (peak-synchronized), Pareto
           durations, lognormal query magnitudes; p clamped to [0,1]
  weather  per-link AR(1) QBER surrogate, maintenance outages, yield shocks
           that also raise attack intensity (synchronized stress)
  yield    g = floor(yield_max · max(0, 1 - Q/Q_th) · snr · availability)
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ShockWindow, ValidatedModel

DAY_SLOTS = 1440

STREAM_TRAFFIC, STREAM_ATTACK, STREAM_WEATHER, STREAM_DECISION = 0, 1, 2, 3

REGIME_NORMAL, REGIME_DEGRADED, REGIME_OUTAGE = 0, 1, 2


def stream_rng(config_seed: int, episode_seed: int, stream: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=(config_seed & 0xFFFFFFFF),
                                spawn_key=(episode_seed, stream))
    return np.random.default_rng(ss)


@dataclass
class EnvTrace:
    """Realized environment for one episode, slot-major arrays."""

    horizon: int
    class_ids: tuple[str, ...]
    arrivals: np.ndarray          # [T, C] int, realized Poisson counts
    lam_expected: np.ndarray      # [T, C] float, intensities
    yields: np.ndarray            # [T, E] int, realized per-link key yield
    yields_expected: np.ndarray   # [T, E] float, model-expected yields
    regime: np.ndarray            # [T, E] int8
    attack_p: np.ndarray          # [T, C] float, true attempt probability
    attack_q: np.ndarray          # [T, C] float, query budgets
    attack_tau: np.ndarray        # [T, C] float, durations in slots
    theta: np.ndarray             # [T, C] float, context amplification
    attempts: np.ndarray          # [T, C] bool, realized attack attempts
    success_draws: np.ndarray     # [T, C] float, uniforms vs deployed rho
    shock_active: np.ndarray      # [T] bool


def _peak_factor(model: ValidatedModel, cid: str, slot: int) -> float:
    tm = model.sim.traffic.get(cid)
    if tm is None:
        return 1.0
    factor = 1.0 + tm.diurnal_amp * math.sin(2.0 * math.pi * (slot / DAY_SLOTS - 0.25))
    for w in tm.peak_windows:
        if w.start_slot <= slot % DAY_SLOTS < w.end_slot:
            factor *= 1.0 + w.amp
    return max(0.0, factor)


def _in_peak(model: ValidatedModel, cid: str, slot: int) -> bool:
    tm = model.sim.traffic.get(cid)
    if tm is None:
        return False
    return any(w.start_slot <= slot % DAY_SLOTS < w.end_slot for w in tm.peak_windows)


def expected_intensity(model: ValidatedModel, cid: str, slot: int) -> float:
    return model.class_by_id(cid).lambda_base * _peak_factor(model, cid, slot)


def context_theta(model: ValidatedModel, cid: str, slot: int) -> float:
    amp = model.sim.context_amp.get(cid, 0.0)
    indicator = 1.0 if _in_peak(model, cid, slot) else 0.0
    return (1.0 + amp * indicator) / (1.0 + amp)


@dataclass(frozen=True)
class _Pulse:
    start: int
    duration: int
    magnitude: float
    boost: float


def _draw_pulses(model: ValidatedModel, horizon: int,
                 rng: np.random.Generator) -> list[_Pulse]:
    am = model.sim.attack
    expected = am.pulse_rate_per_day * horizon / DAY_SLOTS
    count = int(rng.poisson(expected)) if expected > 0 else 0
    pulses = []
    for _ in range(count):
        onset = int(rng.integers(0, max(1, horizon)))
        # peak synchronization by thinning off-peak onsets
        in_peak = any(_in_peak(model, c.id, onset) for c in model.classes)
        if not in_peak and am.peak_sync > 0:
            if rng.random() > 1.0 / (1.0 + am.peak_sync):
                onset = int(rng.integers(0, max(1, horizon)))
        dur = min(am.pulse_dur_cap,
                  int(math.ceil(am.pulse_dur_scale * rng.pareto(am.pulse_dur_shape) + 1)))
        magnitude = min(am.q_cap, am.q_pulse * float(rng.lognormal(0.0, am.q_sigma)))
        pulses.append(_Pulse(onset, dur, magnitude, am.pulse_prob_boost))
    return pulses


@dataclass(frozen=True)
class _Window:
    start: int
    end: int
    yield_factor: float
    attack_mult: float


def _draw_weather_windows(model: ValidatedModel, horizon: int,
                          rng: np.random.Generator) -> tuple[list[_Window], list[tuple[int, int, int]]]:
    wm = model.sim.weather
    shocks: list[_Window] = []
    expected = wm.shock_rate_per_day * horizon / DAY_SLOTS
    for _ in range(int(rng.poisson(expected)) if expected > 0 else 0):
        start = int(rng.integers(0, max(1, horizon)))
        dur = min(wm.shock_dur_cap,
                  int(math.ceil(wm.shock_dur_scale * rng.pareto(wm.shock_dur_shape) + 1)))
        shocks.append(_Window(start, start + dur, wm.shock_yield_factor,
                              wm.shock_attack_mult))
    outages: list[tuple[int, int, int]] = []  # (link, start, end)
    expected = wm.outage_rate_per_day * horizon / DAY_SLOTS
    for _ in range(int(rng.poisson(expected)) if expected > 0 else 0):
        link = int(rng.integers(0, len(model.links)))
        start = int(rng.integers(0, max(1, horizon)))
        dur = int(rng.integers(wm.outage_dur_min, wm.outage_dur_max + 1))
        outages.append((link, start, start + dur))
    return shocks, outages


def build_env(model: ValidatedModel, horizon: int, episode_seed: int) -> EnvTrace:
    """Draw the full realized environment for one episode."""
    cids = model.class_ids
    n_c, n_e = len(cids), len(model.links)
    t_rng = stream_rng(model.seed, episode_seed, STREAM_TRAFFIC)
    a_rng = stream_rng(model.seed, episode_seed, STREAM_ATTACK)
    w_rng = stream_rng(model.seed, episode_seed, STREAM_WEATHER)

    lam = np.zeros((horizon, n_c))
    theta = np.zeros((horizon, n_c))
    for t in range(horizon):
        for ci, cid in enumerate(cids):
            lam[t, ci] = expected_intensity(model, cid, t)
            theta[t, ci] = context_theta(model, cid, t)
    arrivals = t_rng.poisson(lam) if horizon else np.zeros((0, n_c), dtype=np.int64)

    pulses = _draw_pulses(model, horizon, a_rng)
    shocks, outages = _draw_weather_windows(model, horizon, w_rng)
    scripted = [_Window(w.start_slot, w.end_slot, w.yield_factor, w.attack_mult)
                for w in model.sim.shock_windows]
    all_shocks = shocks + scripted

    wm = model.sim.weather
    am = model.sim.attack
    qber_state = np.zeros(n_e)
    yields = np.zeros((horizon, n_e), dtype=np.int64)
    yields_exp = np.zeros((horizon, n_e))
    regime = np.zeros((horizon, n_e), dtype=np.int8)
    shock_active = np.zeros(horizon, dtype=bool)

    attack_p = np.zeros((horizon, n_c))
    attack_q = np.zeros((horizon, n_c))
    attack_tau = np.zeros((horizon, n_c))

    base_p = np.array([am.base_prob.get(cid, 0.0) for cid in cids])

    for t in range(horizon):
        yield_factor = 1.0
        attack_mult = 1.0
        for w in all_shocks:
            if w.start <= t < w.end:
                yield_factor = min(yield_factor, w.yield_factor)
                attack_mult = max(attack_mult, w.attack_mult)
                shock_active[t] = True

        qber_state = wm.qber_ar1 * qber_state \
            + math.sqrt(max(0.0, 1.0 - wm.qber_ar1 ** 2)) * w_rng.standard_normal(n_e)
        for li, link in enumerate(model.links):
            q = wm.qber_base + wm.qber_jitter * abs(qber_state[li]) * link.env_sensitivity
            q = min(q, 0.25)
            avail = 1.0
            for (ol, os, oe) in outages:
                if ol == li and os <= t < oe:
                    avail = 0.0
            quality = max(0.0, 1.0 - q / link.qber_threshold)
            yields[t, li] = int(link.yield_max * quality * avail * yield_factor)
            exp_quality = max(0.0, 1.0 - (wm.qber_base + wm.qber_jitter * 0.8
                                          * link.env_sensitivity) / link.qber_threshold)
            yields_exp[t, li] = link.yield_max * exp_quality
            if avail == 0.0:
                regime[t, li] = REGIME_OUTAGE
            elif yield_factor < 1.0 or q > 0.7 * link.qber_threshold:
                regime[t, li] = REGIME_DEGRADED

        pulse_boost = 0.0
        pulse_q = 0.0
        pulse_tau = 0.0
        for p in pulses:
            if p.start <= t < p.start + p.duration:
                pulse_boost += p.boost
                pulse_q += p.magnitude
                pulse_tau = max(pulse_tau, float(p.start + p.duration - t))
        attack_p[t] = np.clip(base_p * (1.0 + pulse_boost) * attack_mult, 0.0, 1.0)
        attack_q[t] = min(am.q_cap, am.q_base + pulse_q * attack_mult)
        attack_tau[t] = max(1.0, pulse_tau)

    attempts = a_rng.random((horizon, n_c)) < attack_p if horizon \
        else np.zeros((0, n_c), dtype=bool)
    success_draws = a_rng.random((horizon, n_c)) if horizon \
        else np.zeros((0, n_c))

    return EnvTrace(
        horizon=horizon, class_ids=cids, arrivals=arrivals, lam_expected=lam,
        yields=yields, yields_expected=yields_exp, regime=regime,
        attack_p=attack_p, attack_q=attack_q, attack_tau=attack_tau,
        theta=theta, attempts=attempts, success_draws=success_draws,
        shock_active=shock_active,
    )


def gen_traffic(env: EnvTrace, slot: int) -> dict[str, int]:
    """Realized per-class arrival counts for a slot."""
    return {cid: int(env.arrivals[slot, ci]) for ci, cid in enumerate(env.class_ids)}


def gen_yields(env: EnvTrace, slot: int) -> dict[int, int]:
    """Realized per-link key yield (bits) for a slot."""
    return {li: int(env.yields[slot, li]) for li in range(env.yields.shape[1])}


def gen_attacks(env: EnvTrace, slot: int) -> dict[str, dict]:
    """Realized attack context and attempt indicator per class."""
    out = {}
    for ci, cid in enumerate(env.class_ids):
        out[cid] = {
            "p": float(env.attack_p[slot, ci]),
            "q": float(env.attack_q[slot, ci]),
            "tau": float(env.attack_tau[slot, ci]),
            "theta": float(env.theta[slot, ci]),
            "attempt": bool(env.attempts[slot, ci]),
        }
    return out
