"""Run configuration: a single JSON document validated by pydantic.

Rates are expressed in units of gamma and times in units of 1/gamma;
``dipole.gamma`` itself defaults to 1 (the model is scale invariant).
Unknown keys are rejected so typos surface as configuration errors.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .rates import Collection, DipoleParams, PulseTrain

Mode = Literal["analyze", "sweep", "mc", "attack", "validate"]
PresetName = Literal["fig2", "fig3", "fig4"]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class DipoleConfig(_Strict):
    gamma: float = Field(1.0, gt=0)
    beta: float = Field(0.0, ge=0)
    gamma_m: float = Field(0.0, ge=0)
    r_d: float = Field(0.0, ge=0)

    def build(self) -> DipoleParams:
        return DipoleParams(self.gamma, self.beta, self.gamma_m, self.r_d)


class PulseConfig(_Strict):
    r: float = Field(..., ge=0)
    delta_t: float = Field(..., gt=0)
    period: float = Field(..., gt=0)

    @model_validator(mode="after")
    def _check_window(self):
        if self.delta_t > self.period:
            raise ValueError("delta_t must not exceed period")
        return self

    def build(self) -> PulseTrain:
        return PulseTrain(self.r, self.delta_t, self.period)


class CollectionConfig(_Strict):
    eta: float = Field(0.2, ge=0, le=1)

    def build(self) -> Collection:
        return Collection(self.eta)


class SweepAxis(_Strict):
    variable: Literal["r", "delta_t", "eta"]
    start: float
    stop: float
    points: int = Field(..., ge=2)
    scale: Literal["log", "linear"] = "log"

    @model_validator(mode="after")
    def _check_bounds(self):
        if not self.start < self.stop:
            raise ValueError("start must be < stop")
        if self.scale == "log" and self.start <= 0:
            raise ValueError("log scale requires start > 0")
        return self


class McSettings(_Strict):
    n_cycles: int = Field(100_000, ge=1)
    burn_in: int = Field(0, ge=0)
    seed: Optional[int] = None  # falls back to the top-level seed


class AttackSettings(_Strict):
    tap: float = Field(0.5, ge=0, le=1)
    line_efficiency: float = Field(0.01, gt=0, le=1)
    stats_source: Literal["analytic", "propagator"] = "propagator"


class ValidateSettings(_Strict):
    draws: int = Field(25, ge=1)
    mc_cycles: int = Field(100_000, ge=1)
    mc_sigma: float = Field(3.0, ge=0)
    pi_tolerance: float = Field(1e-6, ge=0)


class RunConfig(_Strict):
    pulses: PulseConfig
    mode: Optional[Mode] = None  # implied by the CLI subcommand / endpoint
    dipole: DipoleConfig = DipoleConfig()
    collection: CollectionConfig = CollectionConfig()
    deshelving: Literal["always", "pulse_only"] = "always"
    seed: int = 1
    preset: Optional[PresetName] = None
    sweep: Optional[SweepAxis] = None
    mc: McSettings = McSettings()
    attack: AttackSettings = AttackSettings()
    validation: ValidateSettings = Field(default_factory=ValidateSettings, alias="validate")
    output: Optional[str] = None  # default output path, used by the CLI client

    @model_validator(mode="after")
    def _check_mode_requirements(self):
        if self.mode == "sweep" and self.sweep is None and self.preset is None:
            raise ValueError("sweep mode requires a sweep axis or a preset")
        return self

    @property
    def deshelve_always(self) -> bool:
        return self.deshelving == "always"

    def mc_seed(self) -> int:
        return self.seed if self.mc.seed is None else self.mc.seed


# ---------------------------------------------------------------------------
# figure presets: the parameter grids behind the published sweep plots.
# All presets run at eta = 0.2.  fig2 and fig4 emit two row blocks, one per
# pulse duration (the x column restarts at the block boundary).


def preset_blocks(name: PresetName) -> list[tuple[float | None, SweepAxis]]:
    """(fixed delta_t, axis) pairs for a preset; delta_t None means swept."""
    if name == "fig2":
        return [
            (0.1, SweepAxis(variable="r", start=1e-2, stop=60.0, points=61)),
            (0.01, SweepAxis(variable="r", start=1e-1, stop=600.0, points=61)),
        ]
    if name == "fig3":
        return [
            (None, SweepAxis(variable="delta_t", start=1e-3, stop=10.0, points=81)),
        ]
    if name == "fig4":
        return [
            (0.01, SweepAxis(variable="r", start=1.0, stop=3000.0, points=61)),
            (0.1, SweepAxis(variable="r", start=0.1, stop=300.0, points=61)),
        ]
    raise ValueError(f"unknown preset {name!r}")


PRESET_ETA = 0.2
PRESET_FIG3_PUMP = 100.0
