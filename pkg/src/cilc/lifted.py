"""Lifted-form plants, the single-agent learning update and its convergence certificates.

A trial of length N is a single matrix equation ``y = P u + d``.  The learning
law ``u+ = Q (u + L e)`` then induces the trial-to-trial error map

    e+ = Omega e + Psi (r - d),   Omega = P Q (I - L P) P^-1,   Psi = I - P Q P^-1.

``P^-1`` is never formed explicitly; products with it go through an LU solve.
"""
from dataclasses import dataclass, field
from functools import cached_property
import math

import numpy as np
from scipy import linalg

from .errors import DimensionMismatch, NumericalBlowup, SingularPlant

#: relative singular-value floor below which a plant matrix counts as singular
INVERTIBILITY_RTOL = 1e-12


def _vector(x, n, name):
    v = np.asarray(x, dtype=float)
    if v.ndim != 1 or v.shape[0] != n:
        raise DimensionMismatch(f"{name} must have length {n}, got shape {v.shape}")
    return v


def _square(x, n, name):
    m = np.asarray(x, dtype=float)
    if m.shape != (n, n):
        raise DimensionMismatch(f"{name} must be {n}x{n}, got shape {m.shape}")
    return m


@dataclass(frozen=True, eq=False)
class LiftedPlant:
    P: np.ndarray
    d: np.ndarray

    @property
    def N(self):
        return self.P.shape[0]

    @cached_property
    def _lu(self):
        return linalg.lu_factor(self.P)

    def solve(self, b):
        """Return ``P^-1 b``."""
        return linalg.lu_solve(self._lu, b)

    def right_solve(self, X):
        """Return ``X P^-1`` without forming the inverse."""
        return linalg.lu_solve(self._lu, np.asarray(X).T, trans=1).T

    def simulate(self, u):
        return simulate_trial(self, u)


def make_lifted_plant(P, d=None, rtol=INVERTIBILITY_RTOL):
    P = np.array(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise DimensionMismatch(f"plant matrix must be square, got shape {P.shape}")
    n = P.shape[0]
    if n == 0:
        raise DimensionMismatch("plant horizon must be positive")
    d = np.zeros(n) if d is None else np.array(_vector(d, n, "d"))
    sv = linalg.svdvals(P)
    if not np.all(np.isfinite(sv)) or sv[-1] <= rtol * sv[0]:
        raise SingularPlant(
            f"plant matrix is singular to tolerance: sigma_min={sv[-1]:.3e}, sigma_max={sv[0]:.3e}")
    P.setflags(write=False)
    d.setflags(write=False)
    return LiftedPlant(P, d)


@dataclass(frozen=True, eq=False)
class AgentLaw:
    """One agent's learning law ``u+ = Q (u + L e)``."""
    id: int
    Q: np.ndarray
    L: np.ndarray
    name: str = ""

    def __post_init__(self):
        if int(self.id) < 1:
            raise ValueError(f"agent ids start at 1, got {self.id}")
        Q = np.asarray(self.Q, dtype=float)
        L = np.asarray(self.L, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or L.shape != Q.shape:
            raise DimensionMismatch(f"Q {Q.shape} and L {L.shape} must be equal square matrices")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "L", L)

    @property
    def N(self):
        return self.Q.shape[0]

    @property
    def label(self):
        return self.name or f"agent {self.id}"


def deadbeat_law(plant, id=1):
    """``Q = I, L = P^-1``: the error vanishes after a single update."""
    n = plant.N
    return AgentLaw(id, np.eye(n), plant.solve(np.eye(n)), name="deadbeat")


@dataclass(frozen=True, eq=False)
class TrialRecord:
    j: int
    u: np.ndarray
    y: np.ndarray
    e: np.ndarray
    e_norm: float


@dataclass(frozen=True, eq=False)
class ConvergenceReport:
    rho: float
    gamma: float
    kappa: float
    residual_error: np.ndarray | None = field(default=None)

    @property
    def asymptotically_stable(self):
        return self.rho < 1.0

    @property
    def monotone_above_threshold(self):
        return self.gamma < 1.0


def _check_law(plant, law):
    if law.N != plant.N:
        raise DimensionMismatch(f"law for horizon {law.N} paired with plant of horizon {plant.N}")


def simulate_trial(plant, u):
    u = _vector(u, plant.N, "u")
    return plant.P @ u + plant.d


def tracking_error(r, y):
    return np.asarray(r, dtype=float) - y


def ilc_update(law, u, e):
    u = _vector(u, law.N, "u")
    e = _vector(e, law.N, "e")
    return law.Q @ (u + law.L @ e)


def contraction_matrix(plant, law):
    _check_law(plant, law)
    n = plant.N
    inner = law.Q @ (np.eye(n) - law.L @ plant.P)
    return plant.right_solve(plant.P @ inner)


def filter_matrix(plant, law):
    _check_law(plant, law)
    # written as P (I - Q) P^-1 so that Q = I gives an exactly zero matrix
    return plant.right_solve(plant.P @ (np.eye(plant.N) - law.Q))


def spectral_radius(A):
    return float(np.max(np.abs(linalg.eigvals(A)))) if A.size else 0.0


def induced_norm(A):
    """Induced Euclidean norm (largest singular value)."""
    return float(linalg.svdvals(A)[0]) if A.size else 0.0


def analyze_agent(plant, law, r):
    _check_law(plant, law)
    n = plant.N
    rd = _vector(r, n, "r") - plant.d
    omega = contraction_matrix(plant, law)
    psi = filter_matrix(plant, law)
    rho = spectral_radius(law.Q @ (np.eye(n) - law.L @ plant.P))
    gamma = induced_norm(omega)
    bias = psi @ rd
    kappa = float(np.linalg.norm(bias)) / (1.0 - gamma) if gamma < 1.0 else math.inf
    residual = None
    if rho < 1.0:
        residual = linalg.solve(np.eye(n) - omega, bias)
    return ConvergenceReport(rho=rho, gamma=gamma, kappa=kappa, residual_error=residual)


def run_isolated_ilc(plant, law, r, u0=None, trials=20, truth=None):
    """Run ``trials`` trials of single-agent ILC and return one record per trial.

    ``truth`` simulates the real system (anything with ``simulate(u)``); it
    defaults to ``plant`` itself.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    _check_law(plant, law)
    truth = plant if truth is None else truth
    r = _vector(r, plant.N, "r")
    u = np.zeros(plant.N) if u0 is None else _vector(u0, plant.N, "u0").copy()
    records = []
    for j in range(trials):
        y = _simulate_or_tag(truth, u, j)
        e = r - y
        records.append(TrialRecord(j, u, y, e, float(np.linalg.norm(e))))
        u = ilc_update(law, u, e)
    return records


def _simulate_or_tag(truth, u, j):
    try:
        return truth.simulate(u)
    except NumericalBlowup as exc:
        exc.trial = j
        raise
