"""Random plants and learning laws for property sweeps and the consensus demo."""
import numpy as np

from .lifted import AgentLaw, make_lifted_plant


def random_plant(rng, N, with_disturbance=True):
    """Lower-triangular plant with diagonal bounded away from zero (always invertible)."""
    P = np.tril(rng.normal(scale=0.5, size=(N, N)), -1)
    P[np.diag_indices(N)] = rng.uniform(0.5, 1.5, N) * rng.choice([-1.0, 1.0], N)
    d = rng.normal(size=N) if with_disturbance else np.zeros(N)
    return make_lifted_plant(P, d)


def random_law(rng, plant, id=1, scale=0.4):
    """A law near a damped inverse: ``Q ~ I``, ``L ~ a P^-1`` plus noise."""
    N = plant.N
    Q = np.eye(N) + rng.normal(scale=scale * 0.5, size=(N, N))
    a = rng.uniform(0.2, 1.2)
    L = a * plant.solve(np.eye(N)) + rng.normal(scale=scale, size=(N, N))
    return AgentLaw(id, Q, L)


def random_laws(rng, plant, M, scale=0.4):
    return [random_law(rng, plant, id=m, scale=scale) for m in range(1, M + 1)]
