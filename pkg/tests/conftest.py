import numpy as np
import pytest

from cilc import two_sample
from cilc.lifted import AgentLaw, make_lifted_plant

# acceptance results, printed at the end of the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")


def lower_plant(rng, N):
    """Random lower-triangular plant, diagonal magnitude in [0.5, 1.5]."""
    P = np.tril(rng.normal(scale=0.5, size=(N, N)), -1)
    P[np.diag_indices(N)] = rng.uniform(0.5, 1.5, N) * rng.choice([-1.0, 1.0], N)
    return make_lifted_plant(P, rng.normal(size=N))


def dense_plant(rng, N):
    """Random full plant kept well conditioned by a dominant diagonal."""
    P = rng.normal(size=(N, N)) + 2.0 * N ** 0.5 * np.eye(N)
    return make_lifted_plant(P, rng.normal(size=N))


def perturbed_inverse_law(rng, plant, id, q_noise, l_noise, gain=None):
    N = plant.N
    gain = rng.uniform(0.3, 1.0) if gain is None else gain
    Q = np.eye(N) + rng.normal(scale=q_noise, size=(N, N))
    L = gain * np.linalg.inv(plant.P) + rng.normal(scale=l_noise, size=(N, N))
    return AgentLaw(id, Q, L)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def ex_plant():
    return two_sample.plant()


@pytest.fixture
def ex_laws():
    return two_sample.laws()


@pytest.fixture
def ex_collective():
    return two_sample.collective()


@pytest.fixture(scope="session")
def twipr_pipeline():
    from cilc.twipr import twipr_setup
    return twipr_setup()
