"""Norm-optimal learning laws.

Minimising the model-predicted next-trial cost

    J(u+) = |e - P (u+ - u)|^2 + s |u+ - u|^2 + r |u+|^2

over ``u+`` gives ``u+ = Q (u + L e)`` with

    Q = (P'P + (s + r) I)^-1 (P'P + s I),    L = (P'P + s I)^-1 P'.
"""
from dataclasses import dataclass
import logging

import numpy as np
from scipy import linalg

from .errors import IllPosed
from .lifted import AgentLaw, _vector

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NoilcWeights:
    s: float
    r: float

    def __post_init__(self):
        if not (self.s >= 0 and self.r >= 0):
            raise ValueError(f"weights must be non-negative, got s={self.s}, r={self.r}")


#: weights used in the robot experiments, keyed by experiment and agent
EXPERIMENT_WEIGHTS = {
    1: (NoilcWeights(5.0, 0.1), NoilcWeights(0.05, 1.0)),
    2: (NoilcWeights(5.0, 0.1), NoilcWeights(0.005, 0.001)),
    3: (NoilcWeights(5.0, 0.1), NoilcWeights(0.5, 0.01)),
}


def _spd_solve(A, B):
    try:
        return linalg.cho_solve(linalg.cho_factor(A), B)
    except linalg.LinAlgError:
        log.warning("Cholesky factorisation failed, falling back to pivoted LU")
        return linalg.lu_solve(linalg.lu_factor(A), B)


def design_noilc(plant, w, id=1, name=""):
    P = plant.P
    n = plant.N
    G = P.T @ P
    if w.s + w.r == 0:
        sv = linalg.svdvals(P)
        if sv[-1] <= 1e-12 * sv[0]:
            raise IllPosed("s = r = 0 needs a nonsingular plant")
    eye = np.eye(n)
    Gs = G + w.s * eye
    # (G + sI)^-1 (G + sI) is the identity; skip the solve so Q is exact
    Q = eye if w.r == 0 else _spd_solve(G + (w.s + w.r) * eye, Gs)
    L = _spd_solve(Gs, P.T)
    return AgentLaw(id, Q, L, name=name or f"NO-ILC s={w.s:g} r={w.r:g}")


def next_trial_cost(plant, u_prev, u_next, e_prev, w):
    n = plant.N
    u_prev = _vector(u_prev, n, "u_prev")
    u_next = _vector(u_next, n, "u_next")
    e_prev = _vector(e_prev, n, "e_prev")
    du = u_next - u_prev
    e_next = e_prev - plant.P @ du
    return float(e_next @ e_next + w.s * (du @ du) + w.r * (u_next @ u_next))


def next_trial_cost_gradient(plant, u_prev, u_next, e_prev, w):
    """Analytic gradient of :func:`next_trial_cost` with respect to ``u_next``."""
    P = plant.P
    G = P.T @ P
    u_prev = np.asarray(u_prev, dtype=float)
    u_next = np.asarray(u_next, dtype=float)
    return (2 * (G @ u_next + (w.s + w.r) * u_next)
            - 2 * (G @ u_prev + w.s * u_prev) - 2 * P.T @ np.asarray(e_prev, dtype=float))
