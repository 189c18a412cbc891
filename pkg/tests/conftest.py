import numpy as np
import pytest

from hps.synth import build_object, builtin_specs


@pytest.fixture(scope="session")
def specs():
    return builtin_specs()


@pytest.fixture(scope="session")
def dumbbell(specs):
    return build_object(specs["dumbbell3"], n_points=4000, seed=0)


@pytest.fixture(scope="session")
def cube_obj(specs):
    return build_object(specs["cube"], n_points=3000, seed=0)


def random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    return q


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
