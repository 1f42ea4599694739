import itertools

import numpy as np
import pytest

from nmrpops.spin_system import SpinSystemError, build_system, example_system


@pytest.fixture(scope="session")
def system():
    return example_system()


def random_system(n, rng, species=("1H", "19F")):
    """Random resolved first-order system; offsets far apart so spins never overlap."""
    names = [chr(ord("A") + i) for i in range(n)]
    while True:
        spins = [
            {"name": nm, "species": species[i % len(species)], "offset_hz": 5000.0 * i,
             "t2star_s": float(rng.uniform(0.08, 0.15))}
            for i, nm in enumerate(names)
        ]
        couplings = [
            [names[i], names[j], float(rng.integers(-60, 61) * 5)]
            for i, j in itertools.combinations(range(n), 2)
        ]
        try:
            return build_system({"spins": spins, "couplings_hz": couplings})
        except SpinSystemError:
            continue


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
