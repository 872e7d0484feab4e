"""Execution of the five batch modes over a validated RunConfig.

This sits between the service/CLI layer and the computational core.  Sweep
grid points are evaluated concurrently (``PHOTONGUN_THREADS`` caps the pool)
but rows are always assembled in grid order, and nothing here draws
randomness outside the seeded Monte Carlo module, so byte-identical inputs
give byte-identical outputs.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import analytics, attacks, montecarlo, propagator
from .config import (
    PRESET_ETA,
    PRESET_FIG3_PUMP,
    RunConfig,
    SweepAxis,
    preset_blocks,
)
from .errors import ConvergenceError, ParameterError
from .rates import (
    Collection,
    DipoleParams,
    PulseTrain,
    build_conditional_generator,
    build_population_generator,
    build_tilde_generator,
)

CSV_HEADER = "x,pe,pi_e,pi_1,fil,fil_poisson"


def _thread_count() -> int:
    raw = os.environ.get("PHOTONGUN_THREADS", "")
    if raw.strip():
        return max(1, int(raw))
    return min(8, os.cpu_count() or 1)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# analyze


def run_analyze(cfg: RunConfig) -> dict:
    dipole = cfg.dipole.build()
    pulses = cfg.pulses.build()
    collection = cfg.collection.build()

    tl = analytics.two_level_emission(
        pulses.r, dipole.gamma, pulses.delta_t, pulses.period
    )
    cs = analytics.collection_stats(
        pulses.r, dipole.gamma, pulses.delta_t, collection.eta
    )
    baseline = analytics.poisson_f_il(min(cs.pi_e, 1.0 - 1e-15))

    emitted = propagator.stats_from_counts(
        propagator.count_resolved_cycle(
            dipole, pulses, "emitted", deshelve_always=cfg.deshelve_always
        )
    )
    collected_state = propagator.count_resolved_cycle(
        dipole,
        pulses,
        "collected",
        collection=collection,
        deshelve_always=cfg.deshelve_always,
    )
    collected = propagator.stats_from_counts(collected_state)

    shelf = analytics.shelving_figures(dipole, pulses, tl.pe_exact)
    try:
        steady = propagator.steady_cycle_distribution(
            dipole, pulses, deshelve_always=cfg.deshelve_always
        )
        steady_metastable = float(steady.p[2])
    except ConvergenceError as exc:
        steady_metastable = None
        steady_note = f"steady-state iteration did not converge: {exc}"

    notes = []
    if steady_metastable is None:
        notes.append(steady_note)
    if dipole.beta > 0:
        notes.append(
            "closed forms are the two-level reduction; the propagator block "
            "includes the metastable shelf"
        )
    if cs.degenerate or collected.degenerate:
        notes.append("degenerate statistics: no detected events at this point")

    return {
        "analytic": {
            "pe_exact": tl.pe_exact,
            "pe_approx": tl.pe_approx,
            "p1": tl.p1,
            "pi_0": cs.pi_0,
            "pi_e": cs.pi_e,
            "pi_1": cs.pi_1,
            "f_il": cs.f_il,
            "f_il_poisson": baseline,
        },
        "propagator": {
            "pe": emitted.p_e,
            "p1_emitted": emitted.p_1_exact,
            "pi_0": 1.0 - collected.p_e,
            "pi_e": collected.p_e,
            "pi_1": collected.p_1_exact,
            "f_il": collected.f_il,
            "cutoff": collected_state.cutoff,
            "tail": collected_state.tail_mass,
        },
        "shelving": {
            "duty_factor": shelf.duty_factor,
            "survival_one_period": shelf.survival(1),
            "steady_metastable": steady_metastable,
        },
        "notes": notes,
    }


# ---------------------------------------------------------------------------
# sweep


def _axis_values(axis: SweepAxis) -> np.ndarray:
    if axis.scale == "log":
        return np.geomspace(axis.start, axis.stop, axis.points)
    return np.linspace(axis.start, axis.stop, axis.points)


def _sweep_row(
    x: float,
    r: float,
    gamma: float,
    delta_t: float,
    period: float,
    eta: float,
) -> str:
    tl = analytics.two_level_emission(r, gamma, delta_t, period)
    cs = analytics.collection_stats(r, gamma, delta_t, eta)
    pe = tl.pe_exact
    fil_poisson = 1.0 if pe >= 1.0 else analytics.poisson_f_il(pe)
    cells = [x, pe, cs.pi_e, cs.pi_1, cs.f_il, fil_poisson]
    return ",".join(_fmt(c) for c in cells)


def _sweep_blocks(cfg: RunConfig) -> list[tuple[float, float, SweepAxis]]:
    """(pump r, delta_t, axis) per row block; NaN marks the swept member."""
    gamma = cfg.dipole.gamma
    if cfg.preset is not None:
        blocks = []
        for fixed_dt, axis in preset_blocks(cfg.preset):
            # preset values are in gamma-normalized units
            axis = SweepAxis(
                variable=axis.variable,
                start=axis.start * gamma if axis.variable == "r" else axis.start / gamma,
                stop=axis.stop * gamma if axis.variable == "r" else axis.stop / gamma,
                points=axis.points,
                scale=axis.scale,
            )
            if axis.variable == "delta_t":
                blocks.append((PRESET_FIG3_PUMP * gamma, math.nan, axis))
            else:
                blocks.append((math.nan, fixed_dt / gamma, axis))
        return blocks
    axis = cfg.sweep
    if axis is None:
        raise ParameterError("sweep", "sweep mode requires a sweep axis or a preset")
    r = math.nan if axis.variable == "r" else cfg.pulses.r
    dt = math.nan if axis.variable == "delta_t" else cfg.pulses.delta_t
    return [(r, dt, axis)]


def run_sweep(cfg: RunConfig) -> tuple[str, int]:
    """Evaluate the sweep grid; returns (csv text, number of data rows)."""
    gamma = cfg.dipole.gamma
    period = cfg.pulses.period
    eta = PRESET_ETA if cfg.preset is not None else cfg.collection.eta

    tasks = []
    for r_fixed, dt_fixed, axis in _sweep_blocks(cfg):
        for x in _axis_values(axis):
            r = x if axis.variable == "r" else r_fixed
            dt = x if axis.variable == "delta_t" else dt_fixed
            point_eta = x if axis.variable == "eta" else eta
            tasks.append((float(x), float(r), gamma, float(dt), period, point_eta))

    threads = _thread_count()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda t: _sweep_row(*t), tasks))
    else:
        rows = [_sweep_row(*t) for t in tasks]
    csv = CSV_HEADER + "\n" + "\n".join(rows) + "\n"
    return csv, len(rows)


# ---------------------------------------------------------------------------
# monte carlo


def _estimate_dict(est: montecarlo.McEstimate) -> dict:
    return {
        "mean": est.mean,
        "std_error": est.std_error,
        "n": est.n,
        "degenerate": est.degenerate,
    }


def run_mc(cfg: RunConfig) -> dict:
    dipole = cfg.dipole.build()
    pulses = cfg.pulses.build()
    mc = montecarlo.McConfig(
        n_cycles=cfg.mc.n_cycles,
        seed=cfg.mc_seed(),
        thinning=cfg.collection.build(),
        burn_in=cfg.mc.burn_in,
    )
    stats = montecarlo.estimate_stats(
        dipole, pulses, mc, deshelve_always=cfg.deshelve_always
    )
    out = {
        "pi_0": _estimate_dict(stats.pi_0),
        "pi_1": _estimate_dict(stats.pi_1),
        "pi_ge2": _estimate_dict(stats.pi_ge2),
        "f_il": _estimate_dict(stats.f_il),
        "p_e_emitted": _estimate_dict(stats.p_e_emitted),
    }
    if dipole.beta > 0:
        duty = montecarlo.estimate_duty_factor(
            dipole, pulses, mc, deshelve_always=cfg.deshelve_always
        )
        out["duty_factor"] = _estimate_dict(duty)
    return {"estimates": out, "n_cycles": cfg.mc.n_cycles, "seed": mc.seed}


# ---------------------------------------------------------------------------
# attacks


def _report_dict(rep: attacks.AttackReport) -> dict:
    return {
        "eve_fraction": rep.eve_fraction,
        "bob_rate": rep.bob_rate,
        "detectable_by": sorted(rep.detectable_by),
        "degenerate": rep.degenerate,
        "tail_warning": rep.tail_warning,
    }


def run_attack(cfg: RunConfig) -> dict:
    dipole = cfg.dipole.build()
    pulses = cfg.pulses.build()
    collection = cfg.collection.build()

    if cfg.attack.stats_source == "propagator":
        stats = propagator.stats_from_counts(
            propagator.count_resolved_cycle(
                dipole,
                pulses,
                "collected",
                collection=collection,
                deshelve_always=cfg.deshelve_always,
            )
        )
    else:
        cs = analytics.collection_stats(
            pulses.r, dipole.gamma, pulses.delta_t, collection.eta
        )
        ap = analytics.collection_stats_two_photon_approx(
            pulses.r, dipole.gamma, pulses.delta_t, collection.eta
        )
        p2 = max(ap.pi_e - ap.pi_1, 0.0)  # at-most-two approximation
        stats = propagator.PhotonStats.from_pn(
            np.array([cs.pi_0, cs.pi_1, p2]), tail=max(cs.pi_e - cs.pi_1 - p2, 0.0)
        )

    comparison = attacks.compare_sources(stats, min(stats.p_e, 1.0 - 1e-15))
    result = {
        "stats": {
            "pi_e": stats.p_e,
            "pi_1": stats.p_1_exact,
            "pi_ge2": stats.p_ge2(),
            "f_il": stats.f_il,
        },
        "beamsplitter": _report_dict(
            attacks.beamsplitter_attack(stats, cfg.attack.tap)
        ),
        "qnd": _report_dict(attacks.qnd_attack(stats)),
        "lossy_line": _report_dict(
            attacks.lossy_line_attack(stats, cfg.attack.line_efficiency)
        ),
        "comparison": {
            "dipole_f_il": comparison.dipole_f_il,
            "poisson_f_il": comparison.poisson_f_il,
            "improvement_ratio": None
            if comparison.infinite
            else comparison.improvement_ratio,
            "infinite": comparison.infinite,
        },
    }
    return result


# ---------------------------------------------------------------------------
# validate


def _check(name: str, measured: float, tolerance: float) -> dict:
    return {
        "name": name,
        "passed": bool(measured <= tolerance),
        "measured": float(measured),
        "tolerance": float(tolerance),
    }


def _draw_point(rng: np.random.Generator) -> tuple[float, float, float]:
    """Random (r, delta_t, eta) in the physically sensible two-level regime."""
    delta_t = float(np.exp(rng.uniform(np.log(2e-3), np.log(0.3))))
    rdt = float(np.exp(rng.uniform(np.log(0.05), np.log(15.0))))
    eta = float(rng.uniform(0.05, 1.0))
    return rdt / delta_t, delta_t, eta


def run_validate(cfg: RunConfig) -> dict:
    dipole = cfg.dipole.build()
    pulses = cfg.pulses.build()
    collection = cfg.collection.build()
    vs = cfg.validation
    rng = np.random.default_rng(cfg.seed)
    checks: list[dict] = []

    # generator structure at the configured operating point
    scale = max(1.0, pulses.r, dipole.gamma * (1 + dipole.beta))
    worst = 0.0
    for pump in (pulses.r, 0.0):
        pop = build_population_generator(dipole, pump)
        cond = build_conditional_generator(dipole, pump)
        tild = build_tilde_generator(dipole, pump, collection)
        worst = max(worst, float(np.max(np.abs(pop.column_sums()))))
        target = np.array([0.0, -dipole.gamma, 0.0])
        worst = max(worst, float(np.max(np.abs(cond.column_sums() - target))))
        target = np.array([0.0, -collection.eta * dipole.gamma, 0.0])
        worst = max(worst, float(np.max(np.abs(tild.column_sums() - target))))
    checks.append(_check("generator_column_sums", worst / scale, 1e-14))

    worst = 0.0
    for pump in (pulses.r, 0.0):
        pop = build_population_generator(dipole, pump)
        cond = build_conditional_generator(dipole, pump)
        t0 = build_tilde_generator(dipole, pump, Collection(0.0))
        t1 = build_tilde_generator(dipole, pump, Collection(1.0))
        worst = max(worst, float(np.max(np.abs(t0.matrix - pop.matrix))))
        worst = max(worst, float(np.max(np.abs(t1.matrix - cond.matrix))))
    checks.append(_check("tilde_degeneracies_exact", worst, 0.0))

    # effective-rate algebraic identities over random draws
    worst = 0.0
    for _ in range(10_000):
        r = float(np.exp(rng.uniform(np.log(1e-3), np.log(1e4))))
        eta = float(rng.uniform(0.0, 1.0))
        er = analytics.effective_rates(r, 1.0, eta)
        s = er.r_prime + er.gamma_prime
        p = er.r_prime * er.gamma_prime
        worst = max(worst, abs(s - (r + 1.0)) / (r + 1.0))
        if eta * r > 0:
            worst = max(worst, abs(p - eta * r) / (eta * r))
    checks.append(_check("effective_rate_identities", worst, 1e-12))

    # semigroup property of the exact propagation
    gen = build_population_generator(dipole, pulses.r)
    state = propagator.LevelDistribution.ground()
    t1, t2 = 0.37 * pulses.delta_t, 0.63 * pulses.delta_t
    full = propagator.expm_propagate(gen, state, t1 + t2)
    split = propagator.expm_propagate(
        gen, propagator.expm_propagate(gen, state, t1), t2
    )
    checks.append(
        _check("semigroup_property", float(np.max(np.abs(full.p - split.p))), 1e-12)
    )

    # probability conservation of population propagation, random draws
    worst = 0.0
    for _ in range(200):
        r, dt, _ = _draw_point(rng)
        d = DipoleParams(1.0, float(rng.uniform(0, 0.3)), float(rng.uniform(0, 0.01)), float(rng.uniform(0, 1.0)))
        g = build_population_generator(d, r)
        out = propagator.expm_propagate(g, state, dt)
        worst = max(worst, abs(out.total() - 1.0))
    checks.append(_check("population_mass_conservation", worst, 1e-12))

    # count-resolved normalization at the configured point
    crs = propagator.count_resolved_cycle(
        dipole, pulses, "emitted", deshelve_always=cfg.deshelve_always
    )
    measured = abs(float(crs.blocks.sum()) + crs.tail_mass - 1.0)
    checks.append(_check("count_resolved_mass", measured, 1e-9))

    # closed forms against the block propagator (two-level reduction)
    worst_pi = 0.0
    worst_gf = 0.0
    d0 = DipoleParams(dipole.gamma)
    for _ in range(vs.draws):
        r, dt, eta = _draw_point(rng)
        r, dt = r * dipole.gamma, dt / dipole.gamma
        p = PulseTrain(r, dt, 50.0 / dipole.gamma)
        cs = analytics.collection_stats(r, dipole.gamma, dt, eta)
        st = propagator.count_resolved_cycle(
            d0, p, "collected", collection=Collection(eta)
        )
        totals = st.block_totals()
        worst_pi = max(worst_pi, abs(totals[0] - cs.pi_0), abs(totals[1] - cs.pi_1))
        # generating-function identity: etabar-weighted emitted blocks = Pi_0
        em = propagator.count_resolved_cycle(d0, p, "emitted")
        weights = (1.0 - eta) ** np.arange(em.cutoff + 1)
        gf = float(weights @ em.block_totals())
        worst_gf = max(worst_gf, abs(gf - cs.pi_0) - em.tail_mass)
    checks.append(_check("analytic_vs_propagator_pi", worst_pi, vs.pi_tolerance))
    checks.append(_check("generating_function_identity", worst_gf, 1e-10))

    # continuity of P_1 through the pump-equals-decay degeneracy
    g = dipole.gamma
    grid = g * (1.0 + np.linspace(-2e-6, 2e-6, 201))
    vals = [
        analytics.two_level_emission(r, g, pulses.delta_t, pulses.period).p1
        for r in grid
    ]
    measured = float(np.max(np.abs(np.diff(vals))))
    checks.append(_check("p1_seam_continuity", measured, 1e-9))
    mism = abs(
        analytics._h2_series(analytics._H2_SERIES_CUTOFF)
        - analytics._h2_direct(analytics._H2_SERIES_CUTOFF)
    )
    checks.append(_check("h2_branch_mismatch", mism, 1e-12))

    # Monte Carlo against the closed forms (two-level reduction of the config)
    mc = montecarlo.McConfig(
        n_cycles=vs.mc_cycles, seed=cfg.mc_seed(), thinning=collection
    )
    cs = analytics.collection_stats(
        pulses.r, dipole.gamma, pulses.delta_t, collection.eta
    )
    st = montecarlo.estimate_stats(d0, pulses, mc)
    z_pi0 = (
        abs(st.pi_0.mean - cs.pi_0) / st.pi_0.std_error
        if st.pi_0.std_error > 0
        else 0.0
    )
    z_fil = (
        abs(st.f_il.mean - cs.f_il) / st.f_il.std_error
        if st.f_il.std_error > 0
        else 0.0
    )
    checks.append(_check("mc_vs_analytic_pi0_sigma", z_pi0, vs.mc_sigma))
    checks.append(_check("mc_vs_analytic_fil_sigma", z_fil, vs.mc_sigma))

    st2 = montecarlo.estimate_stats(d0, pulses, mc)
    measured = max(
        abs(st.pi_0.mean - st2.pi_0.mean),
        abs(st.f_il.mean - st2.f_il.mean),
        abs(st.pi_1.mean - st2.pi_1.mean),
    )
    checks.append(_check("mc_determinism", measured, 0.0))

    # shelving duty factor against the mean-value model
    if dipole.beta > 0:
        tl = analytics.two_level_emission(
            pulses.r, dipole.gamma, pulses.delta_t, pulses.period
        )
        m = analytics.shelving_figures(dipole, pulses, tl.pe_exact).duty_factor
        duty = montecarlo.estimate_duty_factor(
            dipole, pulses, mc, deshelve_always=cfg.deshelve_always
        )
        checks.append(_check("duty_factor_vs_model", abs(duty.mean - m), 0.05))

    return {"passed": all(c["passed"] for c in checks), "checks": checks}
