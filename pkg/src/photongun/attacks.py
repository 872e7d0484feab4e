"""Eavesdropping calculators over per-period photon statistics.

Each attack is a pure function of a :class:`~photongun.propagator.PhotonStats`
(it does not care whether the stats came from the closed forms, the
propagator, or the Monte Carlo run) and reports the fraction of the
receiver's useful bits that leak to the eavesdropper, the receiver's
remaining bit rate, and what the attack would be detectable by.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ParameterError
from .propagator import PhotonStats
from .analytics import poisson_f_il

LOSS_ANOMALY = "loss_anomaly"
STATISTICS_ANOMALY = "statistics_anomaly"
NO_ANOMALY = "none"


@dataclass(frozen=True)
class AttackReport:
    eve_fraction: float
    bob_rate: float
    detectable_by: frozenset
    degenerate: bool = False
    tail_warning: bool = False


def _p2(stats: PhotonStats) -> float:
    return float(stats.p_n[2]) if stats.p_n.size > 2 else 0.0


def _tail_beyond_two(stats: PhotonStats) -> float:
    extra = float(stats.p_n[3:].sum()) if stats.p_n.size > 3 else 0.0
    return extra + stats.tail


def beamsplitter_attack(stats: PhotonStats, tap: float) -> AttackReport:
    """Tap a fraction of the beam and store the siphoned photons.

    Eve learns a bit whenever a two-photon pulse splits one photon to each
    arm; valid in the regime where three or more photons per pulse are
    negligible (a warning flag is set otherwise).  The tap shows up as plain
    transmission loss.
    """
    if not 0.0 <= tap <= 1.0:
        raise ParameterError("tap", "must be in [0, 1]")
    p2 = _p2(stats)
    warn = p2 > 0.0 and _tail_beyond_two(stats) >= 0.01 * p2
    if stats.p_e <= 0.0:
        return AttackReport(0.0, 0.0, frozenset({LOSS_ANOMALY}), degenerate=True)
    eve = 2.0 * tap * (1.0 - tap) * p2 / stats.p_e
    bob_rate = (1.0 - tap) * stats.p_e
    return AttackReport(eve, bob_rate, frozenset({LOSS_ANOMALY}), tail_warning=warn)


def qnd_attack(stats: PhotonStats) -> AttackReport:
    """Nondestructive photon-number measurement, deflecting surplus photons.

    Eve's fraction equals the leakage f_il exactly; there is no extra loss,
    but the receiver can notice the altered photon statistics.
    """
    if stats.p_e <= 0.0:
        return AttackReport(0.0, 0.0, frozenset({STATISTICS_ANOMALY}), degenerate=True)
    return AttackReport(stats.f_il, stats.p_e, frozenset({STATISTICS_ANOMALY}))


def lossy_line_attack(stats: PhotonStats, line_efficiency: float) -> AttackReport:
    """Eve replaces a lossy line with her own lossless one.

    She keeps one photon of every multiphoton pulse and forwards the rest,
    throttling singles to mimic the original line efficiency.  Below the
    threshold line_efficiency < f_il she gets essentially everything while
    remaining undetected; above it, the reported fraction interpolates as
    f_il / line_efficiency (a labeled modeling extension, not exact).
    """
    if not 0.0 < line_efficiency <= 1.0:
        raise ParameterError("line_efficiency", "must be in (0, 1]")
    if stats.p_e <= 0.0:
        return AttackReport(0.0, 0.0, frozenset({NO_ANOMALY}), degenerate=True)
    bob_rate = line_efficiency * stats.p_e
    if line_efficiency < stats.f_il:
        return AttackReport(1.0, bob_rate, frozenset({NO_ANOMALY}))
    eve = min(1.0, stats.f_il / line_efficiency)
    return AttackReport(eve, bob_rate, frozenset({NO_ANOMALY}))


@dataclass(frozen=True)
class SourceComparison:
    dipole_f_il: float
    poisson_f_il: float
    improvement_ratio: float
    infinite: bool = False


def compare_sources(dipole_stats: PhotonStats, p_e_match: float) -> SourceComparison:
    """Leakage of the dipole source against a Poissonian source attenuated to
    the matched per-period click probability ``p_e_match``."""
    baseline = poisson_f_il(p_e_match)
    if dipole_stats.f_il <= 0.0:
        return SourceComparison(0.0, baseline, math.inf, infinite=True)
    return SourceComparison(
        dipole_stats.f_il, baseline, baseline / dipole_stats.f_il
    )
