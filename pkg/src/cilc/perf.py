"""Closed-form trial propagation and well-performing checks.

With every agent starting from the same ``e0`` and ``f_j`` the agent elected at
trial ``j``, the elected error obeys

    e_bar_j = A_bar^j e0 + B_bar^j (r - d),
    A_bar^0 = I,  B_bar^0 = 0,
    A_bar^j = Omega_{f_j} A_bar^{j-1},  B_bar^j = Omega_{f_j} B_bar^{j-1} + Psi_{f_j},

and agent ``m`` running on its own obeys the same recursion with ``f_j = m``.
The score ``F_j^m = |e_bar_j|^2 - |e_iso_j^m|^2`` is non-positive for every
``j`` and ``m`` exactly when the collective never does worse than any agent
would have done alone.
"""
from dataclasses import dataclass
import logging

import numpy as np

from .errors import DimensionMismatch, SequenceTooShort

log = logging.getLogger(__name__)

#: squared-norm gap (relative) under which two predicted candidates count as tied
NEAR_TIE_RTOL = 1e-12
#: tolerance on F_j^m relative to |e0|^2 when certifying
WELL_PERFORMING_RTOL = 1e-12

CERTIFIED_UP_TO_HORIZON = "certified-up-to-horizon"
REFUTED = "refuted"


def _mats(omega, psi):
    omega = np.asarray(omega, dtype=float)
    psi = np.asarray(psi, dtype=float)
    n = omega.shape[0]
    if omega.shape != (n, n) or psi.shape != (n, n):
        raise DimensionMismatch(f"Omega {omega.shape} and Psi {psi.shape} must be equal square matrices")
    return omega, psi


def _vec(x, n, name):
    v = np.asarray(x, dtype=float)
    if v.shape != (n,):
        raise DimensionMismatch(f"{name} must have length {n}, got shape {v.shape}")
    return v


def isolated_propagators(omega, psi, j):
    """``(Omega^j, sum_{p=1}^{j} Omega^(j-p) Psi)`` built by repeated multiplication."""
    if j < 0:
        raise ValueError("trial index must be non-negative")
    omega, psi = _mats(omega, psi)
    A = np.eye(omega.shape[0])
    B = np.zeros_like(omega)
    for _ in range(j):
        A = omega @ A
        B = omega @ B + psi
    return A, B


def isolated_error_closed_form(omega, psi, e0, rd, j):
    A, B = isolated_propagators(omega, psi, j)
    n = A.shape[0]
    return A @ _vec(e0, n, "e0") + B @ _vec(rd, n, "r - d")


def collective_propagators(omegas, psis, f, j):
    """``(A_bar^j, B_bar^j)`` for the best-performer sequence ``f`` (1-based ids, ``f[0]`` unused)."""
    if j < 0:
        raise ValueError("trial index must be non-negative")
    if len(f) < j + 1:
        raise SequenceTooShort(f"need best performers f_0..f_{j}, got {len(f)}")
    pairs = [_mats(om, ps) for om, ps in zip(omegas, psis)]
    n = pairs[0][0].shape[0]
    A = np.eye(n)
    B = np.zeros((n, n))
    for i in range(1, j + 1):
        om, ps = pairs[f[i] - 1]
        A = om @ A
        B = om @ B + ps
    return A, B


def literal_collective_propagators(omegas, psis, f, j):
    """Explicit products ``A_bar^j = Omega_{f_j} ... Omega_{f_1}`` and
    ``B_bar^j = sum_p (prod_{l=0}^{j-1-p} Omega_{f_{j-l}}) Psi_{f_p}``.

    Kept as a cross-check of :func:`collective_propagators` at small ``j``.
    """
    if len(f) < j + 1:
        raise SequenceTooShort(f"need best performers f_0..f_{j}, got {len(f)}")
    omegas = [np.asarray(om, dtype=float) for om in omegas]
    psis = [np.asarray(ps, dtype=float) for ps in psis]
    n = omegas[0].shape[0]
    A = np.eye(n)
    for i in range(j):
        A = A @ omegas[f[j - i] - 1]
    B = np.zeros((n, n))
    for p in range(1, j + 1):
        prod = np.eye(n)
        for l in range(j - p):
            prod = prod @ omegas[f[j - l] - 1]
        B = B + prod @ psis[f[p] - 1]
    return A, B


def cilc_error_closed_form(omegas, psis, f, e0, rd, j):
    A, B = collective_propagators(omegas, psis, f, j)
    n = A.shape[0]
    return A @ _vec(e0, n, "e0") + B @ _vec(rd, n, "r - d")


def collaborative_error_closed_form(omega_m, psi_m, A_bar_prev, B_bar_prev, e0, rd):
    """Error of agent ``m`` at trial ``j`` given the collective propagators of trial ``j - 1``."""
    omega_m, psi_m = _mats(omega_m, psi_m)
    n = omega_m.shape[0]
    A_prev = np.asarray(A_bar_prev, dtype=float)
    B_prev = np.asarray(B_bar_prev, dtype=float)
    if A_prev.shape != (n, n) or B_prev.shape != (n, n):
        raise DimensionMismatch("propagators must match the agent's matrices")
    return omega_m @ A_prev @ _vec(e0, n, "e0") + (psi_m + omega_m @ B_prev) @ _vec(rd, n, "r - d")


def _predicted_sq_norm(omega_m, psi_m, A_prev, B_prev, e0, rd):
    # the expanded quadratic form; equal to |collaborative error|^2
    X = omega_m @ A_prev
    Y = psi_m + omega_m @ B_prev
    Xe = X @ e0
    Yr = Y @ rd
    return float(Xe @ Xe + Yr @ Yr + 2.0 * Xe @ Yr)


@dataclass(frozen=True)
class Prediction:
    f: list
    near_ties: list


def predict_best_performers(omegas, psis, e0, rd, horizon):
    """Predict the elected agent at trials ``0..horizon-1`` without simulating.

    Trial 0 goes to agent 1 (every agent starts from ``e0``).  Trials whose two
    smallest predicted squared norms are within :data:`NEAR_TIE_RTOL` of each
    other are listed in ``near_ties`` and logged.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    pairs = [_mats(om, ps) for om, ps in zip(omegas, psis)]
    n = pairs[0][0].shape[0]
    e0 = _vec(e0, n, "e0")
    rd = _vec(rd, n, "r - d")
    f = [1]
    near = []
    A = np.eye(n)
    B = np.zeros((n, n))
    for j in range(1, horizon):
        scores = [_predicted_sq_norm(om, ps, A, B, e0, rd) for om, ps in pairs]
        best = 0
        for m in range(1, len(scores)):
            if scores[m] < scores[best]:
                best = m
        ranked = sorted(scores)
        if len(ranked) > 1 and ranked[1] - ranked[0] <= NEAR_TIE_RTOL * max(ranked[1], 1e-300):
            near.append(j)
            log.info("trial %d: near tie between predicted squared norms %.17g and %.17g",
                     j, ranked[0], ranked[1])
        f.append(best + 1)
        om, ps = pairs[best]
        A = om @ A
        B = om @ B + ps
    return Prediction(f, near)


def _score_general(Ab, Bb, At, Bt, e0, rd):
    return float(e0 @ (Ab.T @ Ab - At.T @ At) @ e0
                 + rd @ (Bb.T @ Bb - Bt.T @ Bt) @ rd
                 + 2.0 * rd @ (Bb.T @ Ab - Bt.T @ At) @ e0)


def _score_zero_input(Ab, Bb, At, Bt, rd):
    S = (Ab.T @ Ab - At.T @ At + Bb.T @ Bb - Bt.T @ Bt
         + 2.0 * Bb.T @ Ab - 2.0 * Bt.T @ At)
    return float(rd @ S @ rd)


def well_performing_scores(omegas, psis, e0, rd, horizon, f=None, zero_input=None):
    """Matrix ``F`` of shape ``(horizon + 1, M)`` with ``F[j, m-1] = F_j^m``.

    ``f`` defaults to the predicted best performers.  When ``e0 == r - d`` (all
    agents start from zero input) the single-quadratic-form expression is used
    unless ``zero_input`` says otherwise.
    """
    if horizon < 0:
        raise ValueError("horizon must be non-negative")
    pairs = [_mats(om, ps) for om, ps in zip(omegas, psis)]
    n = pairs[0][0].shape[0]
    e0 = _vec(e0, n, "e0")
    rd = _vec(rd, n, "r - d")
    if f is None:
        f = predict_best_performers(omegas, psis, e0, rd, horizon + 1).f
    if zero_input is None:
        zero_input = bool(np.array_equal(e0, rd))
    M = len(pairs)
    F = np.zeros((horizon + 1, M))
    Ab = np.eye(n)
    Bb = np.zeros((n, n))
    iso = [(np.eye(n), np.zeros((n, n))) for _ in pairs]
    for j in range(horizon + 1):
        if j > 0:
            om, ps = pairs[f[j] - 1]
            Ab = om @ Ab
            Bb = om @ Bb + ps
            iso = [(om_m @ At, om_m @ Bt + ps_m) for (om_m, ps_m), (At, Bt) in zip(pairs, iso)]
        for m, (At, Bt) in enumerate(iso):
            if zero_input:
                F[j, m] = _score_zero_input(Ab, Bb, At, Bt, rd)
            else:
                F[j, m] = _score_general(Ab, Bb, At, Bt, e0, rd)
    return F


@dataclass(frozen=True)
class WellPerformingReport:
    verdict: str
    horizon: int
    violation: tuple | None
    worst_score: float
    scores: np.ndarray


def certify_well_performing(omegas, psis, e0, rd, horizon):
    """Check ``F_j^m <= 0`` for ``j = 0..horizon``; the verdict never claims beyond ``horizon``."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    F = well_performing_scores(omegas, psis, e0, rd, horizon)
    scale = float(np.dot(e0, e0))
    tol = WELL_PERFORMING_RTOL * (scale if scale > 0 else 1.0)
    bad = np.argwhere(F > tol)
    if len(bad):
        j, m = (int(x) for x in bad[0])
        return WellPerformingReport(REFUTED, horizon, (j, m + 1), float(F.max()), F)
    return WellPerformingReport(CERTIFIED_UP_TO_HORIZON, horizon, None, float(F.max()), F)


def collective_matrices(collective):
    """``(omegas, psis)`` of a collective, in agent order."""
    return collective.omegas(), collective.psis()
