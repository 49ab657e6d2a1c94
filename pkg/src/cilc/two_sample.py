"""The two-agent, two-sample example system (plant, Q-filters and learning gains)."""
import numpy as np

from .lifted import AgentLaw, make_lifted_plant

P = np.array([[1.0, 0.0], [0.25, 1.0]])
Q1 = np.array([[1.0, 0.0], [0.1, 0.2]])
Q2 = np.array([[0.25, 0.0], [-0.1, 1.15]])
L1 = np.array([[-0.3, 0.0], [0.0, -0.3]])
L2 = np.array([[-0.07, 0.0], [0.02, -0.07]])

#: reference minus disturbance used for the trial-progression runs
R_MINUS_D = np.array([1.0, 0.0])


def plant():
    return make_lifted_plant(P, np.zeros(2))


def laws():
    return [AgentLaw(1, Q1, L1, name="agent 1"), AgentLaw(2, Q2, L2, name="agent 2")]


def collective(r=R_MINUS_D):
    from .collective import Collective
    return Collective(plant(), laws(), np.asarray(r, dtype=float))
