"""Photon-number statistics of a pulsed single-dipole photon source.

Core model: a three-level emitter (ground, excited, metastable shelf) driven
by rectangular pump pulses.  The package computes the per-period photon
count distribution three independent ways -- closed forms, exact
photon-number-resolved matrix-exponential propagation, and a stochastic
jump-process Monte Carlo -- and derives quantum-cryptography leakage figures
from it.
"""

__version__ = "0.1.0"

from .analytics import (
    CollectionStats,
    EffectiveRates,
    ShelvingFigures,
    TwoLevelClosedForm,
    collection_stats,
    collection_stats_two_photon_approx,
    effective_rates,
    poisson_f_il,
    shelving_figures,
    two_level_emission,
)
from .attacks import (
    AttackReport,
    SourceComparison,
    beamsplitter_attack,
    compare_sources,
    lossy_line_attack,
    qnd_attack,
)
from .errors import (
    ConvergenceError,
    NumericalDomainError,
    ParameterError,
    PhotongunError,
)
from .montecarlo import (
    CycleOutcome,
    McConfig,
    McEstimate,
    McStats,
    Substream,
    estimate_duty_factor,
    estimate_stats,
    simulate_cycle,
)
from .propagator import (
    CountResolvedState,
    LevelDistribution,
    PhotonStats,
    count_resolved_cycle,
    expm_propagate,
    propagate_cycle,
    stats_from_counts,
    steady_cycle_distribution,
)
from .rates import (
    Collection,
    DipoleParams,
    EmitTag,
    LevelState,
    PulseTrain,
    RateGenerator,
    build_conditional_generator,
    build_population_generator,
    build_tilde_generator,
)
