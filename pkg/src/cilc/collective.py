"""Collective ILC: best-performer election, the shared update and the collective certificates.

Every trial all agents run, the agent with the smallest Euclidean error norm is
elected, and every agent computes its next input from the elected agent's
``(u, e)`` pair with its own ``(Q, L)``.
"""
from dataclasses import dataclass, field
import math
from typing import NamedTuple

import numpy as np

from .errors import DimensionMismatch, EmptyCollective, UnsupportedDimension
from .lifted import (
    TrialRecord, _simulate_or_tag, _vector, analyze_agent, contraction_matrix,
    filter_matrix, ilc_update, induced_norm,
)

CERTIFIED = "certified"
REFUTED = "refuted"
INCONCLUSIVE = "inconclusive"

#: relative size below which a residual error counts as zero
ZERO_RESIDUAL_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class Collective:
    plant: object
    laws: list
    r: np.ndarray

    def __post_init__(self):
        laws = list(self.laws)
        if not laws:
            raise EmptyCollective("a collective needs at least one agent")
        ids = [law.id for law in laws]
        if ids != list(range(1, len(laws) + 1)):
            raise ValueError(f"agent ids must be 1..M in order, got {ids}")
        for law in laws:
            if law.N != self.plant.N:
                raise DimensionMismatch(
                    f"{law.label} has horizon {law.N}, plant has {self.plant.N}")
        object.__setattr__(self, "laws", laws)
        object.__setattr__(self, "r", _vector(self.r, self.plant.N, "r"))

    @property
    def M(self):
        return len(self.laws)

    @property
    def N(self):
        return self.plant.N

    @property
    def rd(self):
        return self.r - self.plant.d

    def omegas(self):
        return [contraction_matrix(self.plant, law) for law in self.laws]

    def psis(self):
        return [filter_matrix(self.plant, law) for law in self.laws]


@dataclass(frozen=True, eq=False)
class TrialStep:
    """One CILC trial: every agent's record plus the elected pair."""
    j: int
    records: list
    best_performer: int
    u_bar: np.ndarray
    e_bar: np.ndarray
    held: bool = False

    @property
    def e_bar_norm(self):
        return self.records[self.best_performer - 1].e_norm


@dataclass(eq=False)
class CilcHistory:
    steps: list = field(default_factory=list)

    def __len__(self):
        return len(self.steps)

    def __getitem__(self, j):
        return self.steps[j]

    @property
    def e_bar_norms(self):
        return np.array([s.e_bar_norm for s in self.steps])

    @property
    def best_performers(self):
        return [s.best_performer for s in self.steps]

    def agent_norms(self, agent_id):
        return np.array([s.records[agent_id - 1].e_norm for s in self.steps])


def select_best_performer(errors):
    """Return the 1-based id of the error with the smallest Euclidean norm (ties: lowest id)."""
    if len(errors) == 0:
        raise EmptyCollective("no errors to compare")
    n = len(errors[0])
    norms = []
    for e in errors:
        if len(e) != n:
            raise DimensionMismatch("error trajectories differ in length")
        norms.append(float(np.linalg.norm(e)))
    return _argmin_lowest_id(norms)


def _argmin_lowest_id(norms):
    best = 0
    for m in range(1, len(norms)):
        if norms[m] < norms[best]:
            best = m
    return best + 1


def centralized_election(records):
    """Elector used by :func:`run_cilc` when no network is involved."""
    best = _argmin_lowest_id([rec.e_norm for rec in records])
    rec = records[best - 1]
    return best, rec.u, rec.e


def collective_update(collective, u_bar, e_bar):
    n = collective.N
    u_bar = _vector(u_bar, n, "u_bar")
    e_bar = _vector(e_bar, n, "e_bar")
    return [ilc_update(law, u_bar, e_bar) for law in collective.laws]


def _per_agent_truths(collective, truth):
    if truth is None:
        return [collective.plant] * collective.M
    if isinstance(truth, (list, tuple)):
        if len(truth) != collective.M:
            raise ValueError(f"need one simulated system per agent, got {len(truth)} for {collective.M}")
        return list(truth)
    return [truth] * collective.M


def cilc_step(collective, inputs, j, truth=None, elect=centralized_election,
              hold_on_no_improvement=False, lookahead=None):
    """Execute trial ``j`` from per-agent ``inputs``.

    Returns ``(step, next_inputs, next_records)``.  ``next_records`` carries the
    lookahead simulation of the next trial when the hold variant already ran it
    and the inputs were not held, else ``None``.
    """
    truths = _per_agent_truths(collective, truth)
    r = collective.r
    if lookahead is not None:
        records = lookahead
    else:
        records = []
        for sys_m, u in zip(truths, inputs):
            y = _simulate_or_tag(sys_m, u, j)
            e = r - y
            records.append(TrialRecord(j, u, y, e, float(np.linalg.norm(e))))
    best, u_bar, e_bar = elect(records)
    next_inputs = collective_update(collective, u_bar, e_bar)
    held = False
    next_records = None
    if hold_on_no_improvement:
        candidates = []
        for sys_m, u in zip(truths, next_inputs):
            y = _simulate_or_tag(sys_m, u, j + 1)
            e = r - y
            candidates.append(TrialRecord(j + 1, u, y, e, float(np.linalg.norm(e))))
        current = records[best - 1].e_norm
        if min(c.e_norm for c in candidates) < current:
            next_records = candidates
        else:
            held = True
            next_inputs = [u_bar.copy() for _ in collective.laws]
    step = TrialStep(j, records, best, u_bar, e_bar, held)
    return step, next_inputs, next_records


def run_cilc(collective, u0=None, trials=20, hold_on_no_improvement=False, truth=None,
             elect=centralized_election):
    """Run the collective for ``trials`` trials; all agents start from ``u0`` (default zero).

    ``truth`` is the simulated system, either one shared by all agents or a
    list with one per agent (the model in ``collective.plant`` stays shared).

    With ``hold_on_no_improvement`` a one-step lookahead of every agent's
    candidate input is simulated; when none would reduce the elected error norm
    all agents replay the elected input instead and the step is marked ``held``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    n = collective.N
    u0 = np.zeros(n) if u0 is None else _vector(u0, n, "u0")
    inputs = [u0.copy() for _ in collective.laws]
    history = CilcHistory()
    lookahead = None
    for j in range(trials):
        step, inputs, lookahead = cilc_step(
            collective, inputs, j, truth=truth, elect=elect,
            hold_on_no_improvement=hold_on_no_improvement, lookahead=lookahead)
        history.steps.append(step)
    return history


class GammaBar(NamedTuple):
    lower: float
    upper: float
    certified: float | None


def _min_gain(omegas, V):
    gains = np.stack([np.linalg.norm(om @ V, axis=0) for om in omegas])
    return gains.min(axis=0)


def gamma_bar(omegas, sampling_budget=2000, seed=0, grid_spacing=1e-4):
    """Bracket the collective rate ``max_{|v|=1} min_m |Omega_m v|``.

    ``lower`` maximises over random unit vectors plus every right singular
    vector of every ``Omega_m``; ``upper`` is ``min_m |Omega_m|``.  For two
    samples per trial ``certified`` is a rigorous upper bound from an angular
    grid of spacing ``grid_spacing`` padded by ``max_m |Omega_m| * spacing * pi``.
    """
    if sampling_budget < 1:
        raise ValueError("sampling_budget must be >= 1")
    omegas = [np.asarray(om, dtype=float) for om in omegas]
    if not omegas:
        raise EmptyCollective("no contraction matrices given")
    n = omegas[0].shape[0]
    for om in omegas:
        if om.shape != (n, n):
            raise DimensionMismatch("all contraction matrices must share one square shape")
    norms = [induced_norm(om) for om in omegas]
    upper = min(norms)

    rng = np.random.default_rng(seed)
    V = rng.standard_normal((n, sampling_budget))
    V /= np.linalg.norm(V, axis=0)
    seeds = [np.linalg.svd(om)[2].T for om in omegas]
    V = np.hstack([V] + seeds)
    lower = min(float(_min_gain(omegas, V).max()), upper)

    certified = None
    if n == 2:
        count = int(math.ceil(math.pi / grid_spacing))
        theta = np.arange(count) * (math.pi / count)
        grid = np.vstack([np.cos(theta), np.sin(theta)])
        grid_max = float(_min_gain(omegas, grid).max())
        certified = grid_max + max(norms) * grid_spacing * math.pi
        lower = max(lower, min(grid_max, upper))
    return GammaBar(lower, upper, certified)


def kappa_bar(collective, gamma_bar_value):
    """Collective threshold ``max_m |Psi_m (r - d)| / (1 - gamma_bar)``; ``inf`` when gamma_bar >= 1."""
    if gamma_bar_value >= 1.0:
        return math.inf
    rd = collective.rd
    worst = max(float(np.linalg.norm(psi @ rd)) for psi in collective.psis())
    return worst / (1.0 - gamma_bar_value)


@dataclass(frozen=True, eq=False)
class CollectiveReport:
    """Collective certificates, each one of ``certified`` / ``refuted`` / ``inconclusive``.

    ``rate_certificate``: the collective rate is rigorously below one, so the
    elected error norm cannot grow while it is above ``kappa_bar``.
    ``monotone_certificate``: some agent is monotone on its own, which makes the
    collective monotone above the smallest individual threshold.
    ``stability_certificate``: such an agent also has zero residual error, so
    the elected error converges to zero at that agent's rate.
    """
    agents: list
    gamma_bar_lower: float
    gamma_bar_upper: float
    gamma_bar_certified: float | None
    kappa_bar: float
    kappa_bar_source: str
    rate_certificate: str
    monotone_certificate: str
    stability_certificate: str


def certify_collective(collective, sampling_budget=2000, seed=0, grid_spacing=1e-4):
    reports = [analyze_agent(collective.plant, law, collective.r) for law in collective.laws]
    gb = gamma_bar(collective.omegas(), sampling_budget, seed=seed, grid_spacing=grid_spacing)
    rigorous = gb.upper if gb.certified is None else min(gb.upper, gb.certified)

    if rigorous < 1.0:
        rate = CERTIFIED
    elif gb.lower >= 1.0:
        rate = REFUTED
    else:
        rate = INCONCLUSIVE

    monotone = [rep for rep in reports if rep.gamma < 1.0]
    monotone_cert = CERTIFIED if monotone else REFUTED

    scale = float(np.linalg.norm(collective.rd))
    stability = REFUTED
    for rep in monotone:
        res = rep.residual_error
        if res is not None and float(np.linalg.norm(res)) <= ZERO_RESIDUAL_RTOL * scale:
            stability = CERTIFIED
            break

    if monotone:
        kb, source = min(rep.kappa for rep in monotone), "individual"
    elif rate == CERTIFIED:
        kb, source = kappa_bar(collective, rigorous), "certified"
    elif gb.lower < 1.0:
        kb, source = kappa_bar(collective, gb.lower), "heuristic"
    else:
        kb, source = math.inf, "none"

    return CollectiveReport(
        agents=reports,
        gamma_bar_lower=gb.lower,
        gamma_bar_upper=gb.upper,
        gamma_bar_certified=gb.certified,
        kappa_bar=kb,
        kappa_bar_source=source,
        rate_certificate=rate,
        monotone_certificate=monotone_cert,
        stability_certificate=stability,
    )


def contraction_locus(omegas, directions=720):
    """Points ``|Omega_m v| v`` for evenly spaced unit vectors ``v`` (two-sample trials only).

    Returns ``(agents, collective)`` where ``agents[m]`` and ``collective`` are
    ``(directions, 2)`` arrays; the collective locus uses ``min_m |Omega_m v|``.
    """
    omegas = [np.asarray(om, dtype=float) for om in omegas]
    if any(om.shape != (2, 2) for om in omegas):
        raise UnsupportedDimension("contraction loci are only defined for 2x2 maps")
    theta = np.arange(directions) * (2 * math.pi / directions)
    V = np.vstack([np.cos(theta), np.sin(theta)])
    gains = [np.linalg.norm(om @ V, axis=0) for om in omegas]
    agents = [(g * V).T for g in gains]
    collective = (np.min(gains, axis=0) * V).T
    return agents, collective
