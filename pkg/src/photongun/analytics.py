"""Closed-form photon statistics of the pulse-driven two-level reduction.

Everything here is expressed through two numerically benign primitives,

    psi(x) = (1 - exp(-x)) / x
    h2(x)  = (1 - exp(-x) - x exp(-x)) / x**2,

which stay accurate through x -> 0 (psi via expm1, h2 via a short Taylor
series below |x| < 0.1).  This removes every removable singularity of the
closed forms, in particular the pump-equals-decay degeneracy r = gamma.

Main quantities, all for a rectangular pulse of duration ``delta_t`` and a
dark interval long enough that the excited state fully relaxes between
pulses (the long-period limit; the exact finite-period emission probability
is also provided):

* ``two_level_emission``  -- P_e (>=1 photon emitted) and P_1 (exactly one).
* ``collection_stats``    -- Pi_0 / Pi_e / Pi_1 for detection efficiency eta,
  via the generating-function (tilde) solution and its analytic
  eta-derivative.
* ``poisson_f_il``        -- the attenuated-Poissonian baseline leakage.
* ``shelving_figures``    -- metastable-shelf survival and duty factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import NumericalDomainError, ParameterError
from .rates import Collection, DipoleParams, PulseTrain

_H2_SERIES_CUTOFF = 0.1
# h2 Taylor coefficients: sum_m (-1)^m (m+1)/(m+2)! x^m
_H2_COEFFS = [
    (-1.0) ** m * (m + 1) / math.factorial(m + 2) for m in range(16)
]


def _psi(x: float) -> float:
    """(1 - exp(-x)) / x, continuous value 1 at x = 0."""
    if x == 0.0:
        return 1.0
    return -math.expm1(-x) / x


def _h2_series(x: float) -> float:
    acc = 0.0
    for c in reversed(_H2_COEFFS):
        acc = acc * x + c
    return acc


def _h2_direct(x: float) -> float:
    return (-math.expm1(-x) - x * math.exp(-x)) / (x * x)


def _h2(x: float) -> float:
    """(1 - exp(-x) - x exp(-x)) / x**2, continuous value 1/2 at x = 0."""
    if abs(x) < _H2_SERIES_CUTOFF:
        return _h2_series(x)
    return _h2_direct(x)


def _check_rates(r: float, gamma: float, delta_t: float, period: float | None = None):
    if not math.isfinite(r) or r < 0:
        raise ParameterError("r", "must be finite and >= 0")
    if not math.isfinite(gamma) or gamma <= 0:
        raise ParameterError("gamma", "must be finite and > 0")
    if not math.isfinite(delta_t) or delta_t <= 0:
        raise ParameterError("delta_t", "must be finite and > 0")
    if period is not None and (not math.isfinite(period) or period < delta_t):
        raise ParameterError("period", "must be finite and >= delta_t")


@dataclass(frozen=True)
class TwoLevelClosedForm:
    """Emission probabilities of the two-level reduction.

    ``valid_flags`` records, per field, whether the infinite-period limit
    exp(-gamma*period) -> 0 was used in its evaluation.  ``p1`` is only a
    per-period probability in that limit, so ``p1 <= pe_exact`` is guaranteed
    only when gamma*period is large.
    """

    pe_exact: float
    pe_approx: float
    p1: float
    valid_flags: dict

    def f_il_emitted(self) -> float:
        """Leakage of the emitted (pre-collection) photon stream."""
        if self.pe_exact <= 0.0:
            return 0.0
        return (self.pe_exact - self.p1) / self.pe_exact


def two_level_emission(
    r: float, gamma: float, delta_t: float, period: float
) -> TwoLevelClosedForm:
    """Probabilities to emit at least one / exactly one photon per period.

    ``pe_exact`` keeps the finite-period correction; ``pe_approx`` and ``p1``
    take the long-period limit.  All branches are continuous through
    r = gamma.
    """
    _check_rates(r, gamma, delta_t, period)
    a = gamma * delta_t
    b = r * delta_t
    d = b - a
    pe_approx = -math.expm1(-b)
    pe_exact = pe_approx - b * math.exp(-gamma * period) * _psi(d)
    p1 = math.exp(-a) * b * (a * _h2(d) + _psi(d))
    flags = {"pe_exact": False, "pe_approx": True, "p1": True}
    return TwoLevelClosedForm(pe_exact, pe_approx, p1, flags)


@dataclass(frozen=True)
class EffectiveRates:
    """Roots r', gamma' of the collection-modified two-level system.

    They satisfy r' + gamma' = r + gamma and r' * gamma' = eta * r * gamma.
    """

    r_prime: float
    gamma_prime: float


def effective_rates(r: float, gamma: float, eta: float) -> EffectiveRates:
    """Decay constants of the no-collection generating-function solution."""
    if not math.isfinite(r) or r < 0:
        raise ParameterError("r", "must be finite and >= 0")
    if not math.isfinite(gamma) or gamma <= 0:
        raise ParameterError("gamma", "must be finite and > 0")
    collection = Collection(eta)  # validates eta
    if eta == 0.0:
        return EffectiveRates(r + gamma, 0.0)
    if eta == 1.0:
        return EffectiveRates(max(r, gamma), min(r, gamma))
    s = math.sqrt((r - gamma) ** 2 + 4.0 * collection.eta_bar * r * gamma)
    r_prime = 0.5 * ((r + gamma) + s)
    # product form avoids the cancellation in ((r+gamma) - s)/2 at small eta
    gamma_prime = eta * r * gamma / r_prime if r_prime > 0 else 0.0
    return EffectiveRates(r_prime, gamma_prime)


@dataclass(frozen=True)
class CollectionStats:
    """Detected-photon statistics per period in the long-period limit."""

    pi_0: float
    pi_e: float
    pi_1: float
    f_il: float
    degenerate: bool = False


def _rp_minus_r(r: float, gamma: float, eta_bar: float, s: float) -> float:
    """r' - r, evaluated without cancellation for eta_bar -> 0, r > gamma."""
    if r >= gamma:
        return 2.0 * eta_bar * r * gamma / (s + (r - gamma))
    return 0.5 * ((gamma - r) + s)


def collection_stats(
    r: float, gamma: float, delta_t: float, eta: float
) -> CollectionStats:
    """Probabilities to collect zero / at least one / exactly one photon.

    Uses the closed-form solution of the tilde (no-collection weight) system;
    Pi_1 is the analytic eta_bar-derivative of Pi_0.  The long-period limit
    is applied by definition.
    """
    _check_rates(r, gamma, delta_t)
    collection = Collection(eta)
    if eta == 0.0 or r == 0.0:
        return CollectionStats(1.0, 0.0, 0.0, 0.0, degenerate=True)
    if eta == 1.0:
        # perfect collection: detected statistics are the emitted statistics
        b = r * delta_t
        a = gamma * delta_t
        pi_e = -math.expm1(-b)
        pi_1 = math.exp(-a) * b * (a * _h2(b - a) + _psi(b - a))
        pi_1 = min(pi_1, pi_e)
        return CollectionStats(1.0 - pi_e, pi_e, pi_1, (pi_e - pi_1) / pi_e)

    a = gamma * delta_t
    b = r * delta_t
    eta_bar = collection.eta_bar
    s = math.sqrt((r - gamma) ** 2 + 4.0 * eta_bar * r * gamma)
    u = (0.5 * ((r + gamma) + s)) * delta_t
    v = (eta * r * gamma / (0.5 * ((r + gamma) + s))) * delta_t
    w = s * delta_t
    # m = (r' - eta r) dt, grouped as (r'-r) dt + eta_bar * b: all nonnegative
    m = _rp_minus_r(r, gamma, eta_bar, s) * delta_t + eta_bar * b

    psi_w = _psi(w)
    h2_w = _h2(w)
    e_v = math.exp(-v)
    pi_0 = math.exp(-u) + m * e_v * psi_w
    # d(pi_0)/d(eta_bar), from the chain rule through u, v, w and m
    dpi0 = a * b * e_v * h2_w + b * e_v * psi_w
    dpi0 += a * b * (m / w) * e_v * (psi_w - 2.0 * h2_w)
    pi_1 = eta * dpi0

    pi_0 = min(max(pi_0, 0.0), 1.0)
    pi_e = 1.0 - pi_0
    if pi_e <= 0.0:
        return CollectionStats(pi_0, 0.0, 0.0, 0.0, degenerate=True)
    pi_1 = min(max(pi_1, 0.0), pi_e)
    f_il = (pi_e - pi_1) / pi_e
    return CollectionStats(pi_0, pi_e, pi_1, f_il)


def collection_stats_two_photon_approx(
    r: float, gamma: float, delta_t: float, eta: float
) -> CollectionStats:
    """Same statistics under the at-most-two-emissions approximation."""
    _check_rates(r, gamma, delta_t)
    collection = Collection(eta)
    eta_bar = collection.eta_bar
    a = gamma * delta_t
    b = r * delta_t
    pe = -math.expm1(-b)
    p1 = math.exp(-a) * b * (a * _h2(b - a) + _psi(b - a))
    p2 = max(pe - p1, 0.0)
    pi_0 = 1.0 - pe + eta_bar * p1 + eta_bar**2 * p2
    pi_1 = eta * (p1 + 2.0 * eta_bar * p2)
    pi_0 = min(max(pi_0, 0.0), 1.0)
    pi_e = 1.0 - pi_0
    if pi_e <= 0.0:
        return CollectionStats(pi_0, 0.0, 0.0, 0.0, degenerate=True)
    pi_1 = min(max(pi_1, 0.0), pi_e)
    return CollectionStats(pi_0, pi_e, pi_1, (pi_e - pi_1) / pi_e)


def poisson_f_il(p_e: float) -> float:
    """Leakage of a Poissonian source with per-period emission probability p_e.

    f_il = 1 - (1 - 1/p_e) ln(1 - p_e), evaluated through the
    cancellation-free form mu * h2(mu) / psi(mu) with mu = -ln(1 - p_e); a
    direct series in p_e takes over below 1e-6.
    """
    if not math.isfinite(p_e) or p_e < 0.0 or p_e >= 1.0:
        raise NumericalDomainError(f"p_e must be in [0, 1), got {p_e!r}")
    if p_e == 0.0:
        return 0.0
    if p_e < 1e-6:
        return 0.5 * p_e * (1.0 + p_e / 3.0 + p_e * p_e / 6.0)
    mu = -math.log1p(-p_e)
    return mu * _h2(mu) / _psi(mu)


@dataclass(frozen=True)
class ShelvingFigures:
    """Metastable-shelf bookkeeping: survival over q periods and the factor
    by which shelving reduces the long-run photon flux."""

    duty_factor: float
    shelf_rate: float
    period: float

    def survival(self, q: float) -> float:
        """Probability to remain shelved for q consecutive periods."""
        if q < 0:
            raise ParameterError("q", "must be >= 0")
        return math.exp(-self.shelf_rate * q * self.period)


def shelving_figures(
    dipole: DipoleParams, pulses: PulseTrain, p_e: float
) -> ShelvingFigures:
    """Mean-value shelving model: the shelf is entered roughly once every
    1/(beta * p_e) pulses and is left at rate gamma_m + r_d."""
    if not 0.0 <= p_e <= 1.0:
        raise ParameterError("p_e", "must be in [0, 1]")
    shelf_rate = dipole.gamma_m + dipole.r_d
    enter = dipole.beta * p_e
    x = shelf_rate * pulses.period
    if enter == 0.0:
        m = 1.0
    else:
        m = x / (enter + x)
    return ShelvingFigures(m, shelf_rate, pulses.period)
