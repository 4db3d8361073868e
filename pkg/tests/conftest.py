import numpy as np
import pytest

from sudsid.swimmers import PRESETS, preset_system

VARIANTS = tuple(PRESETS)


@pytest.fixture(params=VARIANTS)
def system(request):
    return preset_system(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def purcell3_quiet():
    from sudsid.simulate import PRESET_GAITS, NoiseSpec, simulate_trial
    return simulate_trial(preset_system("purcell3"), PRESET_GAITS["purcell3"], NoiseSpec(5.0, (0.0,)), 30)


@pytest.fixture(scope="session")
def purcell3_pair():
    """Noisy train and test trials on independent random streams."""
    from sudsid.simulate import PRESET_GAITS, default_noise, simulate_trial
    gait = PRESET_GAITS["purcell3"]
    streams = np.random.SeedSequence(11).spawn(2)
    return tuple(simulate_trial(preset_system("purcell3"), gait, default_noise(gait), 30,
                                rng=np.random.default_rng(ss)) for ss in streams)
