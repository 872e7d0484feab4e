import numpy as np
import pytest

from photongun.rates import Collection, DipoleParams, PulseTrain

# reference operating point: short strong pulse, long dark interval,
# realistic passive collection
OP_R = 1000.0
OP_DELTA_T = 0.01
OP_PERIOD = 50.0
OP_ETA = 0.2

# high-precision reference values at the operating point (frozen from a
# 50-digit evaluation of the closed forms; see tests/oracles.py)
OP_PE_EXACT = 0.99995460007023751515
OP_P1 = 0.99198696221156816626
OP_PI0 = 0.79873094268646506248
OP_PI1 = 0.20094869298724211719
OP_FIL = 0.0015917217011344171129


@pytest.fixture
def dipole():
    return DipoleParams(gamma=1.0)


@pytest.fixture
def pulses():
    return PulseTrain(r=OP_R, delta_t=OP_DELTA_T, period=OP_PERIOD)


@pytest.fixture
def collection():
    return Collection(OP_ETA)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def base_config(mode: str, **overrides) -> dict:
    cfg = {
        "mode": mode,
        "pulses": {"r": OP_R, "delta_t": OP_DELTA_T, "period": OP_PERIOD},
        "collection": {"eta": OP_ETA},
    }
    cfg.update(overrides)
    return cfg
