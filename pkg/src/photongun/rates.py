"""Physical parameters and transition-rate generators of the three-level emitter.

The emitter is modeled as a ground state |1>, an excited state |2> whose
radiative decay 2->1 at rate ``gamma`` emits the photons of interest, and a
metastable shelf |3>.  The excited state also leaks into the shelf at rate
``beta * gamma``; the shelf empties to ground at ``gamma_m`` and can be
deshelved back to the excited state at ``r_d``.  A rectangular pump pulse
drives 1->2 at rate ``r`` during the pulse window.

All generators are 3x3 real matrices in column convention: entry (b, c) is
the rate of probability flow into level b from level c, the diagonal holds
the negative total outflow of each level, and the matrix acts on column
vectors of level occupations, dp/dt = G p.  Matrix indices 0, 1, 2
correspond to levels 1, 2, 3.

Three generators are built from the same rates:

* population: the unconditional occupations; columns sum to zero.
* conditional: occupations given that no photon has been emitted yet; the
  ground-refill entry (1,2) is dropped, so column 2 leaks at ``-gamma``.
* tilde: generating-function weights for uncollected emissions; the refill
  entry is ``(1 - eta) * gamma``, so column 2 leaks at ``-eta * gamma``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError


class LevelState(enum.IntEnum):
    """The three emitter levels; values match the 1-based level numbering."""

    GROUND = 1
    EXCITED = 2
    METASTABLE = 3

    @property
    def index(self) -> int:
        """0-based matrix/vector index of the level."""
        return self.value - 1


def _require_finite_nonneg(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise ParameterError(name, "must be finite")
    if value < 0:
        raise ParameterError(name, "must be >= 0")


@dataclass(frozen=True)
class DipoleParams:
    """Rates of the three-level emitter, all in units 1/time.

    ``gamma`` sets the time scale; the other rates are usually quoted
    relative to it.
    """

    gamma: float
    beta: float = 0.0
    gamma_m: float = 0.0
    r_d: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.gamma) or self.gamma <= 0:
            raise ParameterError("gamma", "must be finite and > 0")
        _require_finite_nonneg("beta", self.beta)
        _require_finite_nonneg("gamma_m", self.gamma_m)
        _require_finite_nonneg("r_d", self.r_d)


@dataclass(frozen=True)
class PulseTrain:
    """Rectangular excitation pulses: pump rate ``r`` for ``delta_t``, then
    dark until the period ``period`` ends."""

    r: float
    delta_t: float
    period: float

    def __post_init__(self):
        _require_finite_nonneg("r", self.r)
        if not math.isfinite(self.delta_t) or self.delta_t <= 0:
            raise ParameterError("delta_t", "must be finite and > 0")
        if not math.isfinite(self.period) or self.period < self.delta_t:
            raise ParameterError("period", "must be finite and >= delta_t")


@dataclass(frozen=True)
class Collection:
    """Collection/detection efficiency eta; eta_bar = 1 - eta is derived."""

    eta: float

    def __post_init__(self):
        if not math.isfinite(self.eta) or not 0.0 <= self.eta <= 1.0:
            raise ParameterError("eta", "must be in [0, 1]")

    @property
    def eta_bar(self) -> float:
        return 1.0 - self.eta


@dataclass(frozen=True)
class EmitTag:
    """Identifies the photon-emitting transition and the refill rate that the
    constructing operation kept in the generator's (1,2) entry."""

    source: LevelState
    target: LevelState
    refill_rate: float


@dataclass(frozen=True)
class RateGenerator:
    """A 3x3 transition-rate matrix with the emitting transition tagged."""

    matrix: np.ndarray
    emit_tag: EmitTag
    kind: str = field(default="population")

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (3, 3):
            raise ParameterError("matrix", "must be 3x3")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    def column_sums(self) -> np.ndarray:
        return self.matrix.sum(axis=0)


def _base_matrix(dipole: DipoleParams, pump: float, refill: float) -> np.ndarray:
    """Common skeleton; ``refill`` is the (1,2) ground-refill rate."""
    g, b = dipole.gamma, dipole.beta
    gm, rd = dipole.gamma_m, dipole.r_d
    return np.array(
        [
            [-pump, refill, gm],
            [pump, -(1.0 + b) * g, rd],
            [0.0, b * g, -(gm + rd)],
        ]
    )


def _check_pump(pump: float) -> None:
    if not math.isfinite(pump) or pump < 0:
        raise ParameterError("pump", "must be finite and >= 0")


def build_population_generator(dipole: DipoleParams, pump: float) -> RateGenerator:
    """Generator of the unconditional level populations.

    The radiative decay refills the ground state at the full rate ``gamma``,
    so every column sums to zero exactly (probability conservation).
    """
    _check_pump(pump)
    tag = EmitTag(LevelState.EXCITED, LevelState.GROUND, dipole.gamma)
    return RateGenerator(_base_matrix(dipole, pump, dipole.gamma), tag, "population")


def build_conditional_generator(dipole: DipoleParams, pump: float) -> RateGenerator:
    """Generator of the no-emission-yet occupations.

    Identical to the population generator except that the ground state is not
    refilled after a radiative decay; column 2 therefore sums to ``-gamma``,
    the leaked probability being exactly the emission probability density.
    """
    _check_pump(pump)
    tag = EmitTag(LevelState.EXCITED, LevelState.GROUND, 0.0)
    return RateGenerator(_base_matrix(dipole, pump, 0.0), tag, "conditional")


def build_tilde_generator(
    dipole: DipoleParams, pump: float, collection: Collection
) -> RateGenerator:
    """Generator of the no-collection generating-function weights.

    The ground state is refilled at ``(1 - eta) * gamma``, the rate of
    emitting a photon that escapes detection.  At eta = 0 this equals the
    population generator; at eta = 1 it equals the conditional generator.
    """
    _check_pump(pump)
    refill = collection.eta_bar * dipole.gamma
    tag = EmitTag(LevelState.EXCITED, LevelState.GROUND, refill)
    return RateGenerator(_base_matrix(dipole, pump, refill), tag, "tilde")
