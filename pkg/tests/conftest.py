import numpy as np
import pytest

import blindunmix as bu


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture
def small_scene(rng):
    """Noise-free 2-endmember scene: 4 bands, 6 pixels, pure pixels first."""
    spectra = rng.uniform(0.1, 1.0, (4, 2))
    mixed = bu.generate_abundances(2, 4, seed=5)
    abundances = np.hstack([np.eye(2), mixed])
    return bu.SpectralScene(spectra @ abundances), spectra, abundances
