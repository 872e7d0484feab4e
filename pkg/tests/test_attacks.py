import math

import numpy as np
import pytest

from photongun.analytics import collection_stats, poisson_f_il
from photongun.attacks import (
    LOSS_ANOMALY,
    NO_ANOMALY,
    STATISTICS_ANOMALY,
    beamsplitter_attack,
    compare_sources,
    lossy_line_attack,
    qnd_attack,
)
from photongun.errors import ParameterError
from photongun.propagator import PhotonStats, count_resolved_cycle, stats_from_counts
from photongun.rates import Collection, DipoleParams, PulseTrain


def _stats(p_n, tail=0.0):
    return PhotonStats.from_pn(np.array(p_n, dtype=float), tail)


@pytest.fixture(scope="module")
def op_stats():
    d = DipoleParams(1.0)
    p = PulseTrain(1000.0, 0.01, 50.0)
    return stats_from_counts(
        count_resolved_cycle(d, p, "collected", collection=Collection(0.2))
    )


class TestBeamsplitter:
    def test_zero_tap(self):
        rep = beamsplitter_attack(_stats([0.8, 0.18, 0.02]), tap=0.0)
        assert rep.eve_fraction == 0.0
        assert rep.detectable_by == frozenset({LOSS_ANOMALY})

    def test_half_tap_formula(self):
        stats = _stats([0.8, 0.18, 0.02])
        rep = beamsplitter_attack(stats, tap=0.5)
        assert rep.eve_fraction == pytest.approx(0.02 / (2 * 0.2), abs=1e-15)
        assert rep.eve_fraction == pytest.approx(0.05, abs=1e-15)
        assert rep.bob_rate == pytest.approx(0.1, abs=1e-15)

    def test_concave_with_maximum_at_half(self):
        stats = _stats([0.8, 0.18, 0.02])
        taps = np.linspace(0.0, 1.0, 101)
        evs = [beamsplitter_attack(stats, float(t)).eve_fraction for t in taps]
        assert int(np.argmax(evs)) == 50
        second = np.diff(evs, 2)
        assert np.all(second <= 1e-12)

    def test_tail_warning(self):
        heavy = _stats([0.5, 0.2, 0.2, 0.1])
        assert beamsplitter_attack(heavy, 0.5).tail_warning
        light = _stats([0.8, 0.18, 0.02])
        assert not beamsplitter_attack(light, 0.5).tail_warning

    def test_degenerate_and_validation(self):
        rep = beamsplitter_attack(_stats([1.0, 0.0, 0.0]), 0.5)
        assert rep.degenerate and rep.eve_fraction == 0.0
        with pytest.raises(ParameterError):
            beamsplitter_attack(_stats([0.8, 0.2]), tap=1.5)


class TestQnd:
    def test_perfect_source_leaks_nothing(self):
        rep = qnd_attack(_stats([0.8, 0.2]))
        assert rep.eve_fraction == 0.0
        assert rep.detectable_by == frozenset({STATISTICS_ANOMALY})

    def test_equals_f_il_exactly(self, rng):
        for _ in range(50):
            p0 = rng.uniform(0.1, 0.9)
            p1 = (1 - p0) * rng.uniform(0.2, 1.0)
            p2 = 1 - p0 - p1
            stats = _stats([p0, p1, p2])
            assert qnd_attack(stats).eve_fraction == stats.f_il

    def test_operating_point(self, op_stats):
        rep = qnd_attack(op_stats)
        assert rep.eve_fraction == op_stats.f_il
        assert 0.0013 < rep.eve_fraction < 0.0025


class TestLossyLine:
    def test_below_threshold_total_leak(self):
        stats = _stats([0.8, 0.18, 0.02])  # f_il = 0.1
        rep = lossy_line_attack(stats, line_efficiency=0.05)
        assert rep.eve_fraction == 1.0
        assert rep.detectable_by == frozenset({NO_ANOMALY})

    def test_reference_point_numbers(self, op_stats):
        # f_il ~ 2e-3: a 1e-3 line hands Eve everything
        rep = lossy_line_attack(op_stats, 0.001)
        assert rep.eve_fraction == 1.0
        rep = lossy_line_attack(op_stats, 0.01)
        assert rep.eve_fraction == pytest.approx(op_stats.f_il / 0.01, rel=1e-12)

    def test_zero_leakage_source(self):
        rep = lossy_line_attack(_stats([0.8, 0.2]), 0.5)
        assert rep.eve_fraction == 0.0

    def test_ratio_interpolation_example(self):
        stats = _stats([0.8, 0.18 + 0.02 - 0.0004, 0.0004])  # f_il = 0.002
        rep = lossy_line_attack(stats, 0.01)
        assert rep.eve_fraction == pytest.approx(0.2, rel=1e-10)

    def test_validation(self):
        with pytest.raises(ParameterError):
            lossy_line_attack(_stats([0.8, 0.2]), 0.0)


class TestCompareSources:
    def test_poissonian_stats_give_ratio_one(self):
        p_e = 0.3
        fil = poisson_f_il(p_e)
        stats = _stats([1 - p_e, p_e * (1 - fil), p_e * fil])
        cmp = compare_sources(stats, p_e)
        assert cmp.improvement_ratio == pytest.approx(1.0, rel=1e-12)

    def test_zero_leakage_flags_infinite(self):
        cmp = compare_sources(_stats([0.8, 0.2]), 0.2)
        assert cmp.infinite
        assert math.isinf(cmp.improvement_ratio)

    def test_improvement_everywhere_in_short_pulse_regime(self):
        # the single emitter beats the Poissonian baseline on the whole grid
        for gdt in np.geomspace(0.01, 0.1, 5):
            for rdt in np.geomspace(0.1, 10.0, 7):
                cs = collection_stats(rdt / gdt, 1.0, gdt, 0.2)
                stats = _stats([cs.pi_0, cs.pi_1, cs.pi_e - cs.pi_1])
                cmp = compare_sources(stats, cs.pi_e)
                assert cmp.improvement_ratio > 1.0, (gdt, rdt)
