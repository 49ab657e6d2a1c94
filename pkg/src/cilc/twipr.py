"""Two-wheeled inverted pendulum robot: planar dynamics and the lifted ILC plant.

State ``z = (theta, theta_dot, s, s_dot)`` with pitch ``theta`` (rad, positive
leaning forward) and wheel-axle position ``s`` (m).  The input is the motor
torque ``u`` (N m) acting between body and wheels.

Equations of motion (Lagrangian, rolling without slip)::

    J_b th'' + m_b l cos(th) s''             - m_b g l sin(th) = -u + c (s'/R - th')
    m_b l cos(th) th'' + M_s s'' - m_b l sin(th) th'^2      =  u/R - c (s'/R - th')/R

with ``M_s = m_b + m_w + I_w / R^2`` and ``J_b`` the body inertia about the
wheel axle.  ``m_w``, ``I_w`` and ``c`` are totals over both wheels/motors.
"""
from dataclasses import asdict, dataclass, fields, replace
import json
import math

import numpy as np
from scipy import linalg

from .errors import BadPoleSet, ConfigError, NumericalBlowup, Uncontrollable
from .lifted import make_lifted_plant

SCHEMA_VERSION = 1
RAD2DEG = 180.0 / math.pi

#: closed-loop discrete poles; slow, well damped and real
DEFAULT_POLES = (0.70, 0.85, 0.90, 0.95)


@dataclass(frozen=True)
class TwiprParams:
    body_mass: float = 2.5            # kg
    wheel_mass: float = 1.272         # kg, both wheels
    body_inertia: float = 0.01817     # kg m^2 about the wheel axle
    wheel_inertia: float = 1.035e-3   # kg m^2, both wheels about their axle
    com_distance: float = 0.026       # m, axle to body centre of mass
    wheel_radius: float = 0.055       # m
    gravity: float = 9.81             # m/s^2
    friction: float = 9.26e-4         # N m s, viscous, body/wheel relative motion
    T: float = 0.02                   # s
    inertia_scale: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ConfigError(f.name, f"must be a positive finite number, got {value!r}")

    @property
    def J_b(self):
        return self.inertia_scale * self.body_inertia

    @property
    def I_w(self):
        return self.inertia_scale * self.wheel_inertia

    @property
    def M_s(self):
        return self.body_mass + self.wheel_mass + self.I_w / self.wheel_radius ** 2

    def scaled(self, inertia_scale):
        return replace(self, inertia_scale=inertia_scale)


def params_to_json(params, poles=DEFAULT_POLES):
    doc = {"schema_version": SCHEMA_VERSION, "params": asdict(params),
           "poles": [[float(np.real(p)), float(np.imag(p))] for p in poles]}
    return json.dumps(doc, indent=2, sort_keys=True)


def params_from_dict(doc):
    """Parse a parameter document; returns ``(params, poles)``."""
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"unsupported version {version}")
    raw = doc.get("params", {})
    known = {f.name for f in fields(TwiprParams)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError("params", f"unknown fields {sorted(unknown)}")
    params = TwiprParams(**raw)
    poles = DEFAULT_POLES
    if "poles" in doc:
        try:
            poles = tuple(complex(*p) if isinstance(p, (list, tuple)) else complex(p)
                          for p in doc["poles"])
        except (TypeError, ValueError) as exc:
            raise ConfigError("poles", str(exc)) from None
    return params, poles


def params_from_json(text):
    return params_from_dict(json.loads(text))


def twipr_dynamics(z, u, p):
    theta, theta_dot, _, s_dot = z
    m, l, R, c = p.body_mass, p.com_distance, p.wheel_radius, p.friction
    slip = s_dot / R - theta_dot
    ct, st = math.cos(theta), math.sin(theta)
    a11, a12, a22 = p.J_b, m * l * ct, p.M_s
    b1 = m * p.gravity * l * st - u + c * slip
    b2 = m * l * st * theta_dot ** 2 + u / R - c * slip / R
    det = a11 * a22 - a12 * a12
    theta_dd = (a22 * b1 - a12 * b2) / det
    s_dd = (a11 * b2 - a12 * b1) / det
    return np.array([theta_dot, theta_dd, s_dot, s_dd])


def linearize_upright(p):
    """Analytic Jacobians ``(A_c, B_c)`` of :func:`twipr_dynamics` at ``z = 0, u = 0``."""
    m, l, R, c = p.body_mass, p.com_distance, p.wheel_radius, p.friction
    M0 = np.array([[p.J_b, m * l], [m * l, p.M_s]])
    # generalised-force Jacobians in z = (theta, theta_dot, s, s_dot) and u
    G = np.array([[m * p.gravity * l, -c, 0.0, c / R],
                  [0.0, c / R, 0.0, -c / R ** 2]])
    H = np.array([-1.0, 1.0 / R])
    acc_z = linalg.solve(M0, G)
    acc_u = linalg.solve(M0, H)
    A = np.zeros((4, 4))
    A[0, 1] = 1.0
    A[2, 3] = 1.0
    A[1], A[3] = acc_z
    B = np.array([[0.0], [acc_u[0]], [0.0], [acc_u[1]]])
    return A, B


def discretize_zoh(A_c, B_c, T):
    """Exact zero-order-hold discretisation via the augmented matrix exponential."""
    if T <= 0:
        raise ValueError("sampling period must be positive")
    A_c = np.atleast_2d(np.asarray(A_c, dtype=float))
    B_c = np.asarray(B_c, dtype=float).reshape(A_c.shape[0], -1)
    n, k = B_c.shape
    aug = np.zeros((n + k, n + k))
    aug[:n, :n] = A_c
    aug[:n, n:] = B_c
    E = linalg.expm(aug * T)
    return E[:n, :n], E[:n, n:]


def _controllability(A, B):
    n = A.shape[0]
    cols = [B]
    for _ in range(n - 1):
        cols.append(A @ cols[-1])
    return np.hstack(cols)


def design_feedback(A, B, poles=DEFAULT_POLES, rank_tol=1e-10):
    """Single-input pole placement by Ackermann's formula; returns ``K`` (1 x n) for ``A - B K``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float).reshape(A.shape[0], 1)
    n = A.shape[0]
    poles = np.asarray(poles, dtype=complex)
    if poles.shape != (n,):
        raise BadPoleSet(f"need exactly {n} poles, got {poles.shape[0]}")
    if not np.allclose(np.sort_complex(poles), np.sort_complex(poles.conj()), rtol=0, atol=1e-12):
        raise BadPoleSet("pole set is not closed under complex conjugation")
    ctrb = _controllability(A, B)
    sv = linalg.svdvals(ctrb)
    if sv[0] == 0 or sv[-1] <= rank_tol * sv[0]:
        raise Uncontrollable(f"controllability matrix is rank deficient (sigma ratio {sv[-1] / max(sv[0], 1e-300):.2e})")
    coeffs = np.real(np.poly(poles))
    phi = np.zeros_like(A)
    for c in coeffs:
        phi = phi @ A + c * np.eye(n)
    last = np.zeros(n)
    last[-1] = 1.0
    K = linalg.solve(ctrb.T, last) @ phi
    return K.reshape(1, n)


@dataclass(frozen=True, eq=False)
class DiscreteClosedLoop:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    K: np.ndarray
    T: float

    def __post_init__(self):
        rho = float(np.max(np.abs(linalg.eigvals(self.A_cl))))
        if rho >= 1.0:
            raise ValueError(f"feedback does not stabilise the loop (spectral radius {rho:.4f})")

    @property
    def A_cl(self):
        return self.A - self.B @ self.K


#: pitch output in degrees
PITCH_DEG = np.array([[RAD2DEG, 0.0, 0.0, 0.0]])


def build_closed_loop(p, poles=DEFAULT_POLES, C=PITCH_DEG):
    A_c, B_c = linearize_upright(p)
    A, B = discretize_zoh(A_c, B_c, p.T)
    K = design_feedback(A, B, poles)
    return DiscreteClosedLoop(A, B, np.asarray(C, dtype=float), K, p.T)


def markov_parameters(loop, N):
    """``p_i = C (A - B K)^(i-1) B`` for ``i = 1..N``."""
    out = np.empty(N)
    x = loop.B
    for i in range(N):
        out[i] = (loop.C @ x).item()
        x = loop.A_cl @ x
    return out


def markov_lifted_plant(loop, N, z0=None, disturbance=0.0):
    """Lower-triangular Toeplitz plant; ``d`` is the free response from ``z0`` plus a constant offset."""
    p = markov_parameters(loop, N)
    P = linalg.toeplitz(p, np.zeros(N))
    d = np.full(N, float(disturbance))
    if z0 is not None:
        z = np.asarray(z0, dtype=float).reshape(-1, 1)
        for n in range(N):
            z = loop.A_cl @ z
            d[n] += (loop.C @ z).item()
    return make_lifted_plant(P, d)


def impulse_response(loop, N):
    """Simulate ``z+ = (A - BK) z + B u_ilc`` for a unit pulse at ``n = 0``; returns outputs at ``n = 1..N``."""
    z = np.zeros((loop.A.shape[0], 1))
    y = np.empty(N)
    for n in range(N):
        u = 1.0 if n == 0 else 0.0
        z = loop.A_cl @ z + loop.B * u
        y[n] = (loop.C @ z).item()
    return y


def reference_maneuver(N=100, T=0.02, amplitude=30.0):
    """Pitch reference ``amplitude * sin(pi T n)`` in degrees for ``n = 0..N-1``."""
    if N < 1:
        raise ValueError("horizon must be positive")
    n = np.arange(N)
    return amplitude * np.sin(np.pi * T * n)


def _rk4(f, z, u, h):
    k1 = f(z, u)
    k2 = f(z + 0.5 * h * k1, u)
    k3 = f(z + 0.5 * h * k2, u)
    k4 = f(z + h * k3, u)
    return z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def simulate_nonlinear_trial(p, K, u_ilc, T=None, N=None, substeps=10, guard_deg=90.0):
    """Simulate one trial of the stabilised robot from rest.

    Torque ``-K z(n) + u_ilc(n)`` is held over each sample and the dynamics are
    integrated with fixed-step RK4.  Returns the pitch in degrees at samples
    ``1..N``; raises :class:`NumericalBlowup` once ``|theta|`` exceeds the guard.
    """
    T = p.T if T is None else T
    u_ilc = np.asarray(u_ilc, dtype=float)
    N = len(u_ilc) if N is None else N
    K = np.asarray(K, dtype=float).reshape(-1)
    guard = math.radians(guard_deg)
    h = T / substeps
    f = lambda z, u: twipr_dynamics(z, u, p)
    z = np.zeros(4)
    y = np.empty(N)
    for n in range(N):
        u = u_ilc[n] - K @ z
        for _ in range(substeps):
            z = _rk4(f, z, u, h)
        if not np.all(np.isfinite(z)) or abs(z[0]) > guard:
            raise NumericalBlowup(f"pitch left +-{guard_deg:g} deg at sample {n + 1}", sample=n + 1)
        y[n] = z[0] * RAD2DEG
    return y


@dataclass(frozen=True, eq=False)
class NonlinearTwipr:
    """Nonlinear robot with fixed feedback, usable as the ``truth`` of a trial loop."""
    params: TwiprParams
    K: np.ndarray
    N: int
    guard_deg: float = 90.0

    def simulate(self, u):
        return simulate_nonlinear_trial(self.params, self.K, u, self.params.T, self.N,
                                        guard_deg=self.guard_deg)


def twipr_setup(params=None, poles=DEFAULT_POLES, N=100, truth_inertia_scale=1.4):
    """Design on the nominal model, simulate on a robot with scaled inertias.

    Returns ``(loop, plant, truth)``: the nominal closed loop, its lifted plant,
    and the nonlinear robot whose inertias are ``truth_inertia_scale`` times
    the nominal ones (feedback gain unchanged).
    """
    params = TwiprParams() if params is None else params
    loop = build_closed_loop(params, poles)
    plant = markov_lifted_plant(loop, N)
    truth = NonlinearTwipr(params.scaled(params.inertia_scale * truth_inertia_scale), loop.K, N)
    return loop, plant, truth
