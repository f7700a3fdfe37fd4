import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("ci", derandomize=True, deadline=None)
settings.load_profile("ci")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_scene():
    """Shared 2-frame two-plane scene for end-to-end style unit tests."""
    from stereobench.harness import DisparityProfile, make_synthetic_scene

    return make_synthetic_scene(
        seed=7, width=192, height=128, n_frames=2,
        profile=DisparityProfile("two_plane", (0, 8)),
    )
