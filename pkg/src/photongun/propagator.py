"""Exact propagation of the piecewise-constant rate systems.

Each pulse period is two constant-coefficient segments (pump on for
``delta_t``, pump off for the rest), so the flow is an exact matrix
exponential per segment -- no ODE stepping anywhere.

The photon-number-resolved extension stacks N+1 copies of the three-level
system into a block-lower-bidiagonal generator: the diagonal blocks evolve
the no-further-count occupations and the subdiagonal blocks feed each
counted photon from (block n, excited) into (block n+1, ground).  Two
variants exist:

* ``emitted``   -- diagonal blocks are the conditional generator, coupling
  ``gamma``; block n holds the probability of exactly n emitted photons.
* ``collected`` -- diagonal blocks are the tilde generator, coupling
  ``eta * gamma`` (the uncollected fraction ``(1-eta) * gamma`` stays in
  the same block); block n holds the probability of exactly n detected
  photons.  Block 0 of this variant is exactly the tilde-generator solution.

The matrix exponential itself is eigendecomposition when the matrix is
comfortably diagonalizable, else scaling-and-squaring of a truncated Taylor
series.  Rate generators are column-substochastic, which makes repeated
squaring stable (the exponential has 1-norm <= 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, NumericalDomainError, ParameterError
from .rates import (
    Collection,
    DipoleParams,
    PulseTrain,
    RateGenerator,
    build_conditional_generator,
    build_population_generator,
    build_tilde_generator,
)

# Above this condition number of the eigenvector matrix the spectral path
# can no longer guarantee the 1e-12 conservation/semigroup tolerances
# (error scales like eps * cond), so we fall back to scaling-and-squaring.
_EIG_COND_LIMIT = 1e4
# Eigendecomposition is pointless on the big block systems: their spectrum
# is the diagonal block's repeated N+1 times, i.e. always defective.
_EIG_DIM_LIMIT = 24

_DEFAULT_CUTOFF = 16
_CUTOFF_CAP = 1024
_TAIL_TARGET = 1e-10


@dataclass(frozen=True)
class LevelDistribution:
    """Occupation (sub-)probabilities of the three levels."""

    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.shape != (3,):
            raise ParameterError("p", "must have length 3")
        if not np.all(np.isfinite(p)):
            raise NumericalDomainError("level occupations must be finite")
        if np.any(p < -1e-12) or np.any(p > 1.0 + 1e-12):
            raise ParameterError("p", f"entries must lie in [0, 1], got {p}")
        if p.sum() > 1.0 + 1e-12:
            raise ParameterError("p", f"total occupation exceeds 1: {p.sum()!r}")
        p = p.copy()
        p.flags.writeable = False
        object.__setattr__(self, "p", p)

    @classmethod
    def ground(cls) -> "LevelDistribution":
        return cls(np.array([1.0, 0.0, 0.0]))

    def total(self) -> float:
        return float(self.p.sum())


@dataclass(frozen=True)
class CountResolvedState:
    """Level occupations resolved by the number of counted photons.

    ``blocks[n]`` is the sub-probability of sitting in each level having
    counted exactly n photons; ``tail_mass`` is the probability truncated
    beyond the cutoff.
    """

    blocks: np.ndarray  # shape (N+1, 3)
    tail_mass: float
    variant: str

    def __post_init__(self):
        blocks = np.asarray(self.blocks, dtype=float)
        if blocks.ndim != 2 or blocks.shape[1] != 3 or blocks.shape[0] < 1:
            raise ParameterError("blocks", "must have shape (N+1, 3) with N >= 0")
        if self.tail_mass < 0:
            raise ParameterError("tail_mass", "must be >= 0")
        blocks = blocks.copy()
        blocks.flags.writeable = False
        object.__setattr__(self, "blocks", blocks)

    @property
    def cutoff(self) -> int:
        return self.blocks.shape[0] - 1

    def block_totals(self) -> np.ndarray:
        return self.blocks.sum(axis=1)


@dataclass(frozen=True)
class PhotonStats:
    """Per-period count distribution and the scalars derived from it."""

    p_n: np.ndarray
    tail: float
    p_e: float
    p_1_exact: float
    f_il: float
    degenerate: bool = False

    def __post_init__(self):
        p_n = np.asarray(self.p_n, dtype=float)
        p_n = p_n.copy()
        p_n.flags.writeable = False
        object.__setattr__(self, "p_n", p_n)

    @classmethod
    def from_pn(cls, p_n, tail: float = 0.0) -> "PhotonStats":
        p_n = np.asarray(p_n, dtype=float)
        p_e = 1.0 - p_n[0]
        p_1 = p_n[1] if len(p_n) > 1 else 0.0
        if p_e <= 0.0:
            return cls(p_n, tail, max(p_e, 0.0), p_1, 0.0, degenerate=True)
        f_il = min(max((p_e - p_1) / p_e, 0.0), 1.0)
        return cls(p_n, tail, p_e, p_1, f_il)

    def p_ge2(self) -> float:
        return max(self.p_e - self.p_1_exact, 0.0)


# ---------------------------------------------------------------------------
# matrix exponential


def _expm_eig(a: np.ndarray) -> np.ndarray | None:
    """exp(a) through the eigendecomposition, or None if too ill-conditioned."""
    try:
        w, v = np.linalg.eig(a)
    except np.linalg.LinAlgError:
        return None
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(v))):
        return None
    cond = np.linalg.cond(v)
    if not np.isfinite(cond) or cond >= _EIG_COND_LIMIT:
        return None
    e = (v * np.exp(w)) @ np.linalg.inv(v)
    return np.ascontiguousarray(e.real)


def _expm_taylor(a: np.ndarray) -> np.ndarray:
    """Scaling-and-squaring with a truncated Taylor series."""
    n = a.shape[0]
    norm = np.linalg.norm(a, 1)
    s = 0
    if norm > 0.5:
        s = int(math.ceil(math.log2(norm / 0.5)))
    b = a / (2.0**s)
    eye = np.eye(n)
    term = eye.copy()
    out = eye.copy()
    for k in range(1, 40):
        term = term @ b / k
        out += term
        if np.linalg.norm(term, 1) < 1e-18:
            break
    for _ in range(s):
        out = out @ out
    return out


def _expm(a: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise NumericalDomainError("generator matrix contains non-finite entries")
    if a.shape[0] <= _EIG_DIM_LIMIT:
        e = _expm_eig(a)
        if e is not None:
            return e
    return _expm_taylor(a)


def expm_propagate(
    gen: RateGenerator, state: LevelDistribution, dt: float
) -> LevelDistribution:
    """Evolve ``state`` under ``gen`` for a time ``dt``: exp(G dt) @ p."""
    if not math.isfinite(dt) or dt < 0:
        raise ParameterError("dt", "must be finite and >= 0")
    if dt == 0.0:
        return LevelDistribution(state.p.copy())
    return LevelDistribution(_expm(gen.matrix * dt) @ state.p)


# ---------------------------------------------------------------------------
# one-period propagation


def _segment_generators(
    dipole: DipoleParams,
    pulses: PulseTrain,
    kind: str,
    collection: Collection | None,
    deshelve_always: bool,
):
    """(pulse-on, pulse-off) generators of the requested kind."""
    dipole_off = dipole
    if not deshelve_always and dipole.r_d != 0.0:
        dipole_off = DipoleParams(dipole.gamma, dipole.beta, dipole.gamma_m, 0.0)
    if kind == "population":
        return (
            build_population_generator(dipole, pulses.r),
            build_population_generator(dipole_off, 0.0),
        )
    if kind == "conditional":
        return (
            build_conditional_generator(dipole, pulses.r),
            build_conditional_generator(dipole_off, 0.0),
        )
    if kind == "tilde":
        if collection is None:
            raise ParameterError("collection", "required for the tilde generator")
        return (
            build_tilde_generator(dipole, pulses.r, collection),
            build_tilde_generator(dipole_off, 0.0, collection),
        )
    raise ParameterError("kind", f"unknown generator kind {kind!r}")


def propagate_cycle(
    dipole: DipoleParams,
    pulses: PulseTrain,
    kind: str,
    initial: LevelDistribution,
    collection: Collection | None = None,
    deshelve_always: bool = True,
) -> LevelDistribution:
    """Propagate one full period: pump on for delta_t, then off until period."""
    gen_on, gen_off = _segment_generators(
        dipole, pulses, kind, collection, deshelve_always
    )
    mid = expm_propagate(gen_on, initial, pulses.delta_t)
    return expm_propagate(gen_off, mid, pulses.period - pulses.delta_t)


# ---------------------------------------------------------------------------
# photon-number-resolved propagation


def _block_generator(diag: np.ndarray, coupling_rate: float, n_blocks: int) -> np.ndarray:
    """Block-lower-bidiagonal generator: diag blocks + counted-photon feed."""
    dim = 3 * n_blocks
    big = np.zeros((dim, dim))
    feed = np.zeros((3, 3))
    feed[0, 1] = coupling_rate  # excited in block n decays to ground in n+1
    for n in range(n_blocks):
        big[3 * n : 3 * n + 3, 3 * n : 3 * n + 3] = diag
        if n + 1 < n_blocks:
            big[3 * (n + 1) : 3 * (n + 1) + 3, 3 * n : 3 * n + 3] = feed
    return big


def _count_resolved_once(
    dipole: DipoleParams,
    pulses: PulseTrain,
    variant: str,
    cutoff: int,
    initial: LevelDistribution,
    collection: Collection | None,
    deshelve_always: bool,
) -> CountResolvedState:
    if variant == "emitted":
        kind = "conditional"
        coupling = dipole.gamma
    elif variant == "collected":
        if collection is None:
            raise ParameterError("collection", "required for the collected variant")
        kind = "tilde"
        coupling = collection.eta * dipole.gamma
    else:
        raise ParameterError("variant", f"unknown variant {variant!r}")

    gen_on, gen_off = _segment_generators(
        dipole, pulses, kind, collection, deshelve_always
    )
    n_blocks = cutoff + 1
    big_on = _block_generator(gen_on.matrix, coupling, n_blocks)
    big_off = _block_generator(gen_off.matrix, coupling, n_blocks)

    vec = np.zeros(3 * n_blocks)
    vec[:3] = initial.p
    vec = _expm(big_on * pulses.delta_t) @ vec
    vec = _expm(big_off * (pulses.period - pulses.delta_t)) @ vec

    blocks = vec.reshape(n_blocks, 3)
    tail = max(0.0, initial.total() - float(blocks.sum()))
    return CountResolvedState(blocks, tail, variant)


def count_resolved_cycle(
    dipole: DipoleParams,
    pulses: PulseTrain,
    variant: str,
    cutoff: int | None = None,
    initial: LevelDistribution | None = None,
    collection: Collection | None = None,
    deshelve_always: bool = True,
) -> CountResolvedState:
    """One-period propagation resolved by emitted or collected photon number.

    With ``cutoff=None`` the cutoff starts at 16 and doubles (up to 1024)
    until the truncated tail is below 1e-10.  An explicit cutoff is used
    as given; a too-small cutoff is reported honestly through ``tail_mass``.
    """
    if initial is None:
        initial = LevelDistribution.ground()
    if cutoff is not None:
        if cutoff < 1:
            raise ParameterError("cutoff", "must be >= 1")
        return _count_resolved_once(
            dipole, pulses, variant, cutoff, initial, collection, deshelve_always
        )
    n = _DEFAULT_CUTOFF
    while True:
        state = _count_resolved_once(
            dipole, pulses, variant, n, initial, collection, deshelve_always
        )
        if state.tail_mass < _TAIL_TARGET or n >= _CUTOFF_CAP:
            return state
        n = min(2 * n, _CUTOFF_CAP)


def stats_from_counts(state: CountResolvedState) -> PhotonStats:
    """Collapse a count-resolved state to the per-period count distribution."""
    p_n = state.block_totals()
    return PhotonStats.from_pn(p_n, state.tail_mass)


# ---------------------------------------------------------------------------
# long-run initial state


def steady_cycle_distribution(
    dipole: DipoleParams,
    pulses: PulseTrain,
    deshelve_always: bool = True,
    tol: float = 1e-12,
    max_iter: int = 10**6,
) -> LevelDistribution:
    """Fixed point of the one-period population map.

    Iterates the period map from the ground state until successive
    distributions differ by less than ``tol`` in max-norm.
    """
    gen_on, gen_off = _segment_generators(
        dipole, pulses, "population", None, deshelve_always
    )
    cycle = _expm(gen_off.matrix * (pulses.period - pulses.delta_t)) @ _expm(
        gen_on.matrix * pulses.delta_t
    )
    p = np.array([1.0, 0.0, 0.0])
    residual = math.inf
    for _ in range(max_iter):
        q = cycle @ p
        residual = float(np.max(np.abs(q - p)))
        p = q
        if residual < tol:
            # clip the harmless negative roundoff before validation
            p = np.clip(p, 0.0, None)
            return LevelDistribution(p / p.sum())
    raise ConvergenceError("steady cycle distribution did not converge", residual)
