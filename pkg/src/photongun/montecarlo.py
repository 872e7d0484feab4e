"""Stochastic jump-process oracle for the pulsed three-level emitter.

Exact simulation: within each constant-rate segment of a period the waiting
time at the current level is exponential in the level's total outflow rate,
clipped at the segment boundary; the jump target is chosen proportionally to
the individual rates.  Every 2->1 jump emits a photon, which is thinned
(kept with probability eta) independently at emission time.

Randomness is a Philox4x32-10 counter-based generator keyed by the 64-bit
seed, with the cycle index baked into the counter words.  Each cycle
therefore owns a private substream addressed by (seed, cycle): results are
bit-identical regardless of how the cycle loop is executed or sharded, and
paired experiments (e.g. the duty-factor ratio) can reuse per-cycle
randomness across parameter variants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ParameterError
from .rates import Collection, DipoleParams, LevelState, PulseTrain

_PHILOX_M0 = np.uint64(0xD2511F53)
_PHILOX_M1 = np.uint64(0xCD9E8D57)
_PHILOX_W0 = np.uint32(0x9E3779B9)
_PHILOX_W1 = np.uint32(0xBB67AE85)
# fixed fourth counter word, reserving the other 96 bits for (block, cycle)
_PHILOX_C3 = np.uint32(0x70686F74)
_INV_2_53 = 1.1102230246251565e-16  # 2**-53


@njit(cache=True)
def _philox4x32(c0, c1, c2, c3, k0, k1):
    """One Philox4x32-10 block; all arguments and results are uint32.

    Explicit uint32 casts after every operation: numba promotes integer
    arithmetic to 64 bits, while the algorithm needs mod-2**32 wrapping.
    """
    for i in range(10):
        if i > 0:
            k0 = np.uint32(k0 + _PHILOX_W0)
            k1 = np.uint32(k1 + _PHILOX_W1)
        p0 = _PHILOX_M0 * np.uint64(c0)
        p1 = _PHILOX_M1 * np.uint64(c2)
        hi0 = np.uint32(p0 >> np.uint64(32))
        lo0 = np.uint32(p0)
        hi1 = np.uint32(p1 >> np.uint64(32))
        lo1 = np.uint32(p1)
        c0 = np.uint32(hi1 ^ c1 ^ k0)
        c1 = lo1
        c2 = np.uint32(hi0 ^ c3 ^ k1)
        c3 = lo0
    return c0, c1, c2, c3


@njit(cache=True)
def _unit_pair(block, cyc_lo, cyc_hi, k0, k1):
    """Two doubles in [0, 1) from one Philox block."""
    x0, x1, x2, x3 = _philox4x32(block, cyc_lo, cyc_hi, _PHILOX_C3, k0, k1)
    a = (np.uint64(x0) << np.uint64(32)) | np.uint64(x1)
    b = (np.uint64(x2) << np.uint64(32)) | np.uint64(x3)
    u0 = np.float64(a >> np.uint64(11)) * _INV_2_53
    u1 = np.float64(b >> np.uint64(11)) * _INV_2_53
    return u0, u1


@njit(cache=True)
def _next_u(block, spare, has_spare, cyc_lo, cyc_hi, k0, k1):
    if has_spare:
        return spare, block, 0.0, False
    u0, u1 = _unit_pair(block, cyc_lo, cyc_hi, k0, k1)
    return u0, block + np.uint32(1), u1, True


@njit(cache=True)
def _cycle_kernel(
    start,
    r_pump,
    gamma,
    beta,
    gamma_m,
    rd_on,
    rd_off,
    delta_t,
    period,
    eta,
    cyc_lo,
    cyc_hi,
    k0,
    k1,
):
    """One period of the jump process; levels are 0=ground 1=excited 2=shelf."""
    state = start
    emitted = 0
    collected = 0
    shelved = state == 2
    block = np.uint32(0)
    spare = 0.0
    has_spare = False
    for seg in range(2):
        if seg == 0:
            t_left = delta_t
            pump = r_pump
            rd = rd_on
        else:
            t_left = period - delta_t
            pump = 0.0
            rd = rd_off
        while True:
            if state == 0:
                total = pump
            elif state == 1:
                total = (1.0 + beta) * gamma
            else:
                total = gamma_m + rd
            if total <= 0.0:
                break
            u, block, spare, has_spare = _next_u(
                block, spare, has_spare, cyc_lo, cyc_hi, k0, k1
            )
            dt = -math.log(1.0 - u) / total
            if dt >= t_left:
                break
            t_left -= dt
            u, block, spare, has_spare = _next_u(
                block, spare, has_spare, cyc_lo, cyc_hi, k0, k1
            )
            v = u * total
            if state == 0:
                state = 1
            elif state == 1:
                if v < gamma:
                    state = 0
                    emitted += 1
                    u, block, spare, has_spare = _next_u(
                        block, spare, has_spare, cyc_lo, cyc_hi, k0, k1
                    )
                    if u < eta:
                        collected += 1
                else:
                    state = 2
                    shelved = True
            else:
                if v < gamma_m:
                    state = 0
                else:
                    state = 1
    return emitted, collected, state, shelved


@njit(cache=True)
def _chain_kernel(
    n_cycles,
    seed,
    start,
    r_pump,
    gamma,
    beta,
    gamma_m,
    rd_on,
    rd_off,
    delta_t,
    period,
    eta,
    emitted,
    collected,
    end_level,
    shelved,
):
    k0 = np.uint32(seed & np.uint64(0xFFFFFFFF))
    k1 = np.uint32(seed >> np.uint64(32))
    state = start
    for i in range(n_cycles):
        cyc_lo = np.uint32(i & 0xFFFFFFFF)
        cyc_hi = np.uint32(i >> 32)
        e, c, s, sh = _cycle_kernel(
            state,
            r_pump,
            gamma,
            beta,
            gamma_m,
            rd_on,
            rd_off,
            delta_t,
            period,
            eta,
            cyc_lo,
            cyc_hi,
            k0,
            k1,
        )
        emitted[i] = e
        collected[i] = c
        end_level[i] = s
        shelved[i] = sh
        state = s


# ---------------------------------------------------------------------------
# public API


@dataclass(frozen=True)
class Substream:
    """Address of one cycle's private random substream."""

    seed: int
    cycle: int = 0


@dataclass(frozen=True)
class McConfig:
    n_cycles: int
    seed: int
    thinning: Collection
    burn_in: int = 0

    def __post_init__(self):
        if self.n_cycles < 1:
            raise ParameterError("n_cycles", "must be >= 1")
        if self.burn_in < 0 or self.burn_in >= self.n_cycles:
            raise ParameterError("burn_in", "must be in [0, n_cycles)")


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n: int
    degenerate: bool = False


@dataclass(frozen=True)
class CycleOutcome:
    emitted: int
    collected: int
    end_level: LevelState
    shelved: bool


@dataclass(frozen=True)
class McStats:
    """Per-period detection statistics estimated from a cycle chain."""

    pi_0: McEstimate
    pi_1: McEstimate
    pi_ge2: McEstimate
    f_il: McEstimate
    p_e_emitted: McEstimate


def _run_chain(
    dipole: DipoleParams,
    pulses: PulseTrain,
    mc: McConfig,
    start: LevelState = LevelState.GROUND,
    deshelve_always: bool = True,
    beta_override: float | None = None,
):
    n = mc.n_cycles
    emitted = np.empty(n, dtype=np.uint32)
    collected = np.empty(n, dtype=np.uint32)
    end_level = np.empty(n, dtype=np.uint8)
    shelved = np.empty(n, dtype=np.bool_)
    beta = dipole.beta if beta_override is None else beta_override
    _chain_kernel(
        n,
        np.uint64(mc.seed & 0xFFFFFFFFFFFFFFFF),
        start.index,
        pulses.r,
        dipole.gamma,
        beta,
        dipole.gamma_m,
        dipole.r_d,
        dipole.r_d if deshelve_always else 0.0,
        pulses.delta_t,
        pulses.period,
        mc.thinning.eta,
        emitted,
        collected,
        end_level,
        shelved,
    )
    return emitted, collected, end_level, shelved


def simulate_cycle(
    dipole: DipoleParams,
    pulses: PulseTrain,
    start: LevelState,
    stream: Substream,
    collection: Collection = Collection(1.0),
    deshelve_always: bool = True,
) -> CycleOutcome:
    """Simulate a single period on the substream addressed by ``stream``."""
    seed = np.uint64(stream.seed & 0xFFFFFFFFFFFFFFFF)
    k0 = np.uint32(int(seed) & 0xFFFFFFFF)
    k1 = np.uint32(int(seed) >> 32)
    e, c, s, sh = _cycle_kernel(
        start.index,
        pulses.r,
        dipole.gamma,
        dipole.beta,
        dipole.gamma_m,
        dipole.r_d,
        dipole.r_d if deshelve_always else 0.0,
        pulses.delta_t,
        pulses.period,
        collection.eta,
        np.uint32(stream.cycle & 0xFFFFFFFF),
        np.uint32((stream.cycle >> 32) & 0xFFFFFFFF),
        k0,
        k1,
    )
    return CycleOutcome(int(e), int(c), LevelState(int(s) + 1), bool(sh))


def _binomial_estimate(hits: np.ndarray) -> McEstimate:
    n = hits.size
    p = float(hits.mean())
    se = math.sqrt(max(p * (1.0 - p), 0.0) / n)
    return McEstimate(p, se, n, degenerate=(se == 0.0))


def estimate_stats(
    dipole: DipoleParams,
    pulses: PulseTrain,
    mc: McConfig,
    deshelve_always: bool = True,
) -> McStats:
    """Estimate the per-period detection statistics over a chained run.

    Each period starts in the end state of the previous one, so shelving
    excursions across periods are captured.  ``f_il`` is the ratio
    pi_ge2 / pi_e with a delta-method standard error.
    """
    emitted, collected, _, _ = _run_chain(
        dipole, pulses, mc, deshelve_always=deshelve_always
    )
    emitted = emitted[mc.burn_in :]
    collected = collected[mc.burn_in :]
    n = emitted.size

    det = (collected >= 1).astype(np.float64)
    one = (collected == 1).astype(np.float64)
    multi = (collected >= 2).astype(np.float64)

    pi_0 = _binomial_estimate(1.0 - det)
    pi_1 = _binomial_estimate(one)
    pi_ge2 = _binomial_estimate(multi)
    p_e_emitted = _binomial_estimate((emitted >= 1).astype(np.float64))

    a = float(det.mean())
    b = float(multi.mean())
    if a == 0.0:
        f_il = McEstimate(0.0, 0.0, n, degenerate=True)
    else:
        f = b / a
        # delta method for the indicator ratio; Cov(det, multi) = b (1 - a)
        var = (b * (1 - b) + f * f * a * (1 - a) - 2 * f * b * (1 - a)) / (n * a * a)
        f_il = McEstimate(f, math.sqrt(max(var, 0.0)), n, degenerate=(b == 0.0))
    return McStats(pi_0, pi_1, pi_ge2, f_il, p_e_emitted)


def estimate_duty_factor(
    dipole: DipoleParams,
    pulses: PulseTrain,
    mc: McConfig,
    deshelve_always: bool = True,
) -> McEstimate:
    """Long-run emitted-photon rate relative to the same emitter with the
    shelving channel switched off, under identical per-cycle substreams."""
    if dipole.beta == 0.0:
        return McEstimate(1.0, 0.0, mc.n_cycles - mc.burn_in, degenerate=True)
    em_beta, _, _, _ = _run_chain(dipole, pulses, mc, deshelve_always=deshelve_always)
    em_zero, _, _, _ = _run_chain(
        dipole, pulses, mc, deshelve_always=deshelve_always, beta_override=0.0
    )
    y = em_beta[mc.burn_in :].astype(np.float64)
    x = em_zero[mc.burn_in :].astype(np.float64)
    n = y.size
    xbar = float(x.mean())
    if xbar == 0.0:
        return McEstimate(0.0, 0.0, n, degenerate=True)
    ratio = float(y.mean()) / xbar
    # paired delta method on the ratio of means
    s_yy = float(np.var(y))
    s_xx = float(np.var(x))
    s_xy = float(np.mean((x - xbar) * (y - y.mean())))
    var = (s_yy - 2.0 * ratio * s_xy + ratio * ratio * s_xx) / (n * xbar * xbar)
    return McEstimate(ratio, math.sqrt(max(var, 0.0)), n)
