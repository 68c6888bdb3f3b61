"""Time-domain simulation with energy and passivity accounting.

Scenarios integrate with classical fixed-step RK4.  The supplied power
``qdot . tau_e + phidot . tau_u`` is integrated jointly with the state so
that the dissipation inequality

    H(t) - H(0) - integral of supply  <=  0

can be audited at integration-order accuracy; ``H`` is the shaped storage
when a controller is active, the plant energy otherwise, and the total
stored energy (including the environment and the outer-loop spring) for
coupled runs.

The step size is capped at 1 / (20 w_max), where w_max is the largest
undamped natural frequency of the elastic stiffness/mass pencils involved
in the scenario.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .control import (
    ImpedanceGains,
    OuterLoop,
    ShapedParams,
    check_gain_consistency,
    outer_loop_torque,
    recover_shaped,
    synthesize_gains,
)
from .errors import DivergenceError, ValidationError
from .linalg import as_matrix, as_vector, pencil_max_frequency
from .lti import EnvironmentImpedance
from .model import (
    LinearRobotParams,
    NonlinearRobotModel,
    OpenLoopState,
    RobotModel,
    as_model,
)
from .transform import ClosedLoopState, from_closed, to_closed

STABILITY_MARGIN = 20.0


@dataclass(frozen=True)
class InputSignal:
    """External torque profile applied at one joint."""

    kind: str = "zero"              # zero | step | sinusoid
    amplitude: float = 0.0
    joint: int = 0                  # 0-based joint index
    start: float = 0.0              # step onset [s]
    frequency: float = 0.0          # sinusoid angular frequency [rad/s]

    def __post_init__(self):
        if self.kind not in ("zero", "step", "sinusoid"):
            raise ValidationError(f"unknown input kind {self.kind!r}")
        if self.joint < 0:
            raise ValidationError("joint index must be nonnegative")

    @classmethod
    def zero(cls) -> "InputSignal":
        return cls()

    @classmethod
    def step(cls, amplitude: float, joint: int = 0, start: float = 0.0) -> "InputSignal":
        return cls("step", float(amplitude), joint, float(start))

    @classmethod
    def sinusoid(cls, amplitude: float, frequency: float, joint: int = 0) -> "InputSignal":
        return cls("sinusoid", float(amplitude), joint, 0.0, float(frequency))

    def scalar(self, t: float) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "step":
            return self.amplitude if t >= self.start else 0.0
        return self.amplitude * math.sin(self.frequency * t)

    def torque(self, t: float, n: int) -> np.ndarray:
        out = np.zeros(n)
        if self.kind != "zero":
            out[self.joint] = self.scalar(t)
        return out

    def torque_series(self, times: np.ndarray, n: int) -> np.ndarray:
        out = np.zeros((times.shape[0], n))
        if self.kind == "step":
            out[times >= self.start, self.joint] = self.amplitude
        elif self.kind == "sinusoid":
            out[:, self.joint] = self.amplitude * np.sin(self.frequency * times)
        return out


@dataclass(frozen=True)
class Scenario:
    """Simulation configuration.

    ``controller`` accepts either parametrization (gains or shaped
    parameters) or ``None`` for the bare plant; ``law`` selects the
    control law and defaults to the plant kind (the two laws coincide on
    constant-mass plants).  ``dt=None`` picks a deterministic default
    below the stability cap.
    """

    plant: RobotModel
    controller: ImpedanceGains | ShapedParams | None = None
    law: str = "auto"               # auto | linear | nonlinear
    outer: OuterLoop | None = None
    environment: EnvironmentImpedance | None = None
    input: InputSignal = InputSignal()
    T: float = 1.0
    dt: float | None = None
    x0: OpenLoopState | None = None

    def __post_init__(self):
        if self.law not in ("auto", "linear", "nonlinear"):
            raise ValidationError(f"unknown control law {self.law!r}")
        if self.T <= 0.0:
            raise ValidationError("horizon T must be positive")


@dataclass
class SimResult:
    """Trajectory plus controller and energy accounting series.

    Series not defined for a chart are ``None`` (the bare plant has no
    shaped coordinates; coupled runs have no motor state).  The passivity
    residual is ``H - H[0] - supply``, nonpositive up to integration error
    whenever the scenario is passive.
    """

    t: np.ndarray
    q: np.ndarray
    p: np.ndarray
    theta: np.ndarray | None
    s: np.ndarray | None
    phi: np.ndarray | None
    z: np.ndarray | None
    tau: np.ndarray | None
    tau_e: np.ndarray
    tau_u: np.ndarray | None
    H: np.ndarray
    supply: np.ndarray
    chart: str
    dt: float

    @property
    def passivity_residual(self) -> np.ndarray:
        return self.H - self.H[0] - self.supply


@dataclass(frozen=True)
class TargetResult:
    """Reference trajectory of the tracking target dynamics."""

    t: np.ndarray
    q: np.ndarray
    qdot: np.ndarray


def _rk4_loop(field, x0: np.ndarray, dt: float, nsteps: int, t0: float = 0.0) -> np.ndarray:
    dim = x0.shape[0]
    out = np.empty((nsteps + 1, dim))
    out[0] = x0
    x = x0.copy()
    sixth = dt / 6.0
    half = 0.5 * dt
    for k in range(nsteps):
        t = t0 + k * dt
        k1 = field(t, x)
        k2 = field(t + half, x + half * k1)
        k3 = field(t + half, x + half * k2)
        k4 = field(t + dt, x + dt * k3)
        x = x + sixth * (k1 + 2.0 * (k2 + k3) + k4)
        if not np.all(np.isfinite(x)):
            raise DivergenceError(f"state became non-finite at t={t0 + (k + 1) * dt:.6g} s",
                                  time=t0 + (k + 1) * dt)
        out[k + 1] = x
    return out


def integrate(field, x0, dt: float, T: float, t0: float = 0.0):
    """Classical fixed-step RK4 over [t0, t0 + T].

    ``field(t, x)`` returns the state derivative.  The horizon is rounded
    to a whole number of steps.  Returns ``(t, X)`` with states in rows.

    Raises
    ------
    DivergenceError
        When the state becomes non-finite, reporting the offending time.
    """
    x0 = np.asarray(x0, dtype=float)
    if dt <= 0.0:
        raise ValidationError("dt must be positive")
    if T < dt:
        raise ValidationError("horizon T must be at least one step")
    nsteps = int(round(T / dt))
    X = _rk4_loop(field, x0, dt, nsteps, t0)
    t = t0 + dt * np.arange(nsteps + 1)
    return t, X


@dataclass(frozen=True)
class _Resolved:
    model: NonlinearRobotModel
    n: int
    x0: OpenLoopState
    shaped: ShapedParams | None
    gains: ImpedanceGains | None
    law: str
    dt: float
    nsteps: int
    linear_fast: bool


def _resolve(sc: Scenario, need_controller: bool = False) -> _Resolved:
    model = as_model(sc.plant)
    n = model.n
    x0 = sc.x0 if sc.x0 is not None else OpenLoopState.zero(n)
    if x0.n != n:
        raise ValidationError(f"initial state is {x0.n}-joint, plant is {n}-joint")
    if sc.input.kind != "zero" and sc.input.joint >= n:
        raise ValidationError(f"input joint {sc.input.joint} out of range for n={n}")

    law = sc.law
    if law == "auto":
        law = "linear" if model.constant_mass else "nonlinear"
    if law == "linear" and not model.constant_mass:
        raise ValidationError("the constant-mass control law requires a constant mass matrix")

    shaped = gains = None
    if sc.controller is not None:
        if isinstance(sc.controller, ShapedParams):
            shaped = sc.controller
            gains, _ = synthesize_gains(model, shaped.J_e, shaped.K_e, q_ref=x0.q)
        elif isinstance(sc.controller, ImpedanceGains):
            gains = sc.controller
            shaped = recover_shaped(model, gains.K_F, gains.K_G, q_ref=x0.q)
            check_gain_consistency(gains, shaped, model)
        else:
            raise ValidationError(f"unsupported controller type {type(sc.controller).__name__}")
        if shaped.n != n:
            raise ValidationError(f"controller is {shaped.n}-joint, plant is {n}-joint")
    elif need_controller:
        raise ValidationError("this simulation requires a controller")
    if sc.outer is not None:
        if shaped is None:
            raise ValidationError("an outer loop requires a controller")
        if sc.outer.n != n:
            raise ValidationError(f"outer loop is {sc.outer.n}-joint, plant is {n}-joint")
    if sc.environment is not None and sc.environment.n != n:
        raise ValidationError(f"environment is {sc.environment.n}-joint, plant is {n}-joint")

    cap = stability_dt_cap(sc)
    dt = sc.dt if sc.dt is not None else _default_dt(cap)
    if dt <= 0.0:
        raise ValidationError("dt must be positive")
    if dt > cap * (1.0 + 1e-9):
        raise ValidationError(
            f"dt={dt:g} exceeds the stability cap {cap:.3g} s "
            f"(margin {STABILITY_MARGIN:g} over the fastest elastic mode)")
    if sc.T < dt:
        raise ValidationError("horizon T must be at least one step")
    nsteps = int(round(sc.T / dt))
    linear_fast = isinstance(sc.plant, LinearRobotParams)
    return _Resolved(model, n, x0, shaped, gains, law, dt, nsteps, linear_fast)


def _default_dt(cap: float) -> float:
    if not np.isfinite(cap):
        return 1e-3
    x = 0.5 * cap
    exp = math.floor(math.log10(x)) - 1
    scale = 10.0 ** exp
    return math.floor(x / scale) * scale


def stability_dt_cap(sc: Scenario) -> float:
    """Largest admissible step, 1/(20 w_max) over the scenario's pencils."""
    model = as_model(sc.plant)
    n = model.n
    q0 = sc.x0.q if sc.x0 is not None else np.zeros(n)
    Mq = model.mass_of(q0)
    Z = np.zeros((n, n))
    wmax = 0.0

    def pencil(mass_blocks, stiff):
        mass = np.block([[mass_blocks[0], Z], [Z, mass_blocks[1]]])
        return pencil_max_frequency(stiff, mass)

    stiff_open = np.block([[model.K, -model.K], [-model.K, model.K]])
    wmax = max(wmax, pencil((Mq, model.J), stiff_open))

    controller = sc.controller
    if controller is not None:
        if isinstance(controller, ShapedParams):
            shaped = controller
        else:
            shaped = recover_shaped(model, controller.K_F, controller.K_G, q_ref=q0)
        Kq = shaped.K_e + (sc.environment.K_h if sc.environment is not None else Z)
        Kp = shaped.K_e + (sc.outer.K_phi if sc.outer is not None else Z)
        Mlink = Mq + (sc.environment.M_h if sc.environment is not None else Z)
        stiff_shaped = np.block([[Kq, -shaped.K_e], [-shaped.K_e, Kp]])
        wmax = max(wmax, pencil((Mlink, shaped.J_e), stiff_shaped))

    return float("inf") if wmax == 0.0 else 1.0 / (STABILITY_MARGIN * wmax)


# ---------------------------------------------------------------------------
# plant chart
# ---------------------------------------------------------------------------

def simulate_plant_with_controller(sc: Scenario) -> SimResult:
    """Integrate the plant under the impedance control law.

    The control torque is evaluated at every integrator stage; on
    varying-mass plants the force-feedback gain follows the instantaneous
    mass matrix.  Runs the bare plant when ``controller`` is ``None``.
    """
    if sc.environment is not None:
        raise ValidationError("environment coupling is handled by simulate_coupled")
    r = _resolve(sc)
    if r.linear_fast:
        return _simulate_plant_linear(sc, r)
    return _simulate_plant_generic(sc, r)


def _simulate_plant_linear(sc: Scenario, r: _Resolved) -> SimResult:
    model, n = r.model, r.n
    Minv = np.linalg.inv(model.mass_of(np.zeros(n)))
    Jinv = np.linalg.inv(model.J)
    Z = np.zeros((n, n))
    Zr = np.zeros((n, 4 * n))

    Ta = np.hstack([-model.K, model.K, -model.D @ Minv, model.D @ Jinv])
    A = np.vstack([
        np.hstack([Z, Z, Minv, Z]),
        np.hstack([Z, Z, Z, Jinv]),
        Ta,
        -Ta,
    ])
    if r.shaped is not None:
        Keinv = np.linalg.inv(r.shaped.K_e)
        KeK = Keinv @ (r.shaped.K_e - model.K)
        KeKth = Keinv @ model.K
        Phi = np.hstack([KeK, KeKth, Z, Z])
        Phid = np.hstack([Z, Z, KeK @ Minv, KeKth @ Jinv])
        if sc.outer is not None:
            Tu = -sc.outer.K_phi @ Phi - sc.outer.D_phi @ Phid
            tu_const = sc.outer.K_phi @ sc.outer.phi_d
        else:
            Tu = Zr.copy()
            tu_const = np.zeros(n)
        tau_row = -r.gains.K_G @ Ta + r.gains.K_H @ Tu
        tau_const = r.gains.K_H @ tu_const
        A[3 * n:] += tau_row
        Bcol = np.vstack([Z, Z, np.eye(n), r.gains.K_F])
        const = np.concatenate([np.zeros(3 * n), tau_const])
    else:
        Phi = Phid = Tu = None
        tu_const = np.zeros(n)
        Bcol = np.vstack([Z, Z, np.eye(n), Z])
        const = np.zeros(4 * n)

    signal = sc.input

    def field(t, xa):
        x = xa[:4 * n]
        u = signal.torque(t, n)
        dx = A @ x + Bcol @ u + const
        qdot = dx[:n]
        if Phid is not None:
            tau_u = Tu @ x + tu_const
            rate = qdot @ u + (Phid @ x) @ tau_u
        else:
            rate = qdot @ u
        out = np.empty(4 * n + 1)
        out[:4 * n] = dx
        out[4 * n] = rate
        return out

    xa0 = np.concatenate([r.x0.pack(), [0.0]])
    X = _rk4_loop(field, xa0, r.dt, r.nsteps)
    t = r.dt * np.arange(r.nsteps + 1)
    states = X[:, :4 * n]
    supply = X[:, 4 * n]
    q, theta, p, s = (states[:, i * n:(i + 1) * n] for i in range(4))
    tau_e = signal.torque_series(t, n)

    if r.shaped is not None:
        phi = states @ Phi.T
        Zrow = np.hstack([Z, Z, r.shaped.J_e @ KeK @ Minv, r.shaped.J_e @ KeKth @ Jinv])
        z = states @ Zrow.T
        tau_u = states @ Tu.T + tu_const
        tau_a = states @ Ta.T
        tau = tau_e @ r.gains.K_F.T - tau_a @ r.gains.K_G.T + tau_u @ r.gains.K_H.T
        H = _closed_energy_series(q, phi, p, z, r.shaped, Minv)
    else:
        phi = z = tau_u = None
        tau = np.zeros_like(q)
        defl = theta - q
        H = (0.5 * np.einsum("ij,jk,ik->i", p, Minv, p)
             + 0.5 * np.einsum("ij,jk,ik->i", s, Jinv, s)
             + 0.5 * np.einsum("ij,jk,ik->i", defl, model.K, defl))
    return SimResult(t, q, p, theta, s, phi, z, tau, tau_e, tau_u, H, supply,
                     chart="open", dt=r.dt)


def _closed_energy_series(q, phi, p, z, sp: ShapedParams, Minv) -> np.ndarray:
    Jeinv = np.linalg.inv(sp.J_e)
    defl = phi - q
    return (0.5 * np.einsum("ij,jk,ik->i", p, Minv, p)
            + 0.5 * np.einsum("ij,jk,ik->i", z, Jeinv, z)
            + 0.5 * np.einsum("ij,jk,ik->i", defl, sp.K_e, defl))


def _simulate_plant_generic(sc: Scenario, r: _Resolved) -> SimResult:
    model, n = r.model, r.n
    Jinv = np.linalg.inv(model.J)
    K, D = model.K, model.D
    signal = sc.input
    outer = sc.outer
    shaped, gains = r.shaped, r.gains

    if shaped is not None:
        Keinv = np.linalg.inv(shaped.K_e)
        KeK = Keinv @ (shaped.K_e - K)      # phi = KeK q + KeKth theta
        KeKth = Keinv @ K
        A_ = model.J @ np.linalg.solve(K, shaped.K_e - K)   # K_F(q) v = -A_ M(q)^-1 v
        K_H = gains.K_H

    def field(t, xa):
        q = xa[:n]
        theta = xa[n:2 * n]
        p = xa[2 * n:3 * n]
        s = xa[3 * n:4 * n]
        u = signal.torque(t, n)
        Mq = model.mass_of(q)
        qdot = np.linalg.solve(Mq, p)
        thdot = Jinv @ s
        tau_a = K @ (theta - q) + D @ (thdot - qdot)
        grad_v = model.gravity_grad_of(q)
        kin = model.kinetic_grad(q, p)
        if shaped is not None:
            phi = KeK @ q + KeKth @ theta
            phidot = KeK @ qdot + KeKth @ thdot
            if outer is not None:
                tau_u = -outer.K_phi @ (phi - outer.phi_d) - outer.D_phi @ phidot
                if outer.gravity_comp:
                    tau_u = tau_u + model.gravity_grad_of(phi)
            else:
                tau_u = np.zeros(n)
            cor = model.coriolis_of(q, qdot) @ qdot
            tau = (-A_ @ np.linalg.solve(Mq, u + tau_a - cor - grad_v)
                   + tau_a + K_H @ (tau_u - tau_a))
            rate = qdot @ u + phidot @ tau_u
        else:
            tau = np.zeros(n)
            rate = qdot @ u
        out = np.empty(4 * n + 1)
        out[:n] = qdot
        out[n:2 * n] = thdot
        out[2 * n:3 * n] = -grad_v - kin + tau_a + u
        out[3 * n:4 * n] = -tau_a + tau
        out[4 * n] = rate
        return out

    xa0 = np.concatenate([r.x0.pack(), [0.0]])
    X = _rk4_loop(field, xa0, r.dt, r.nsteps)
    t = r.dt * np.arange(r.nsteps + 1)
    states = X[:, :4 * n]
    supply = X[:, 4 * n]
    q, theta, p, s = (states[:, i * n:(i + 1) * n] for i in range(4))
    tau_e = signal.torque_series(t, n)

    npts = t.shape[0]
    H = np.empty(npts)
    if shaped is not None:
        phi = np.empty((npts, n))
        z = np.empty((npts, n))
        tau_u = np.empty((npts, n))
        tau = np.empty((npts, n))
        Jeinv = np.linalg.inv(shaped.J_e)
        for k in range(npts):
            qk, thk, pk, sk = q[k], theta[k], p[k], s[k]
            Mq = model.mass_of(qk)
            qdot = np.linalg.solve(Mq, pk)
            thdot = Jinv @ sk
            phi[k] = KeK @ qk + KeKth @ thk
            phidot = KeK @ qdot + KeKth @ thdot
            z[k] = shaped.J_e @ phidot
            tau_a = K @ (thk - qk) + D @ (thdot - qdot)
            if outer is not None:
                tu = -outer.K_phi @ (phi[k] - outer.phi_d) - outer.D_phi @ phidot
                if outer.gravity_comp:
                    tu = tu + model.gravity_grad_of(phi[k])
            else:
                tu = np.zeros(n)
            tau_u[k] = tu
            cor = model.coriolis_of(qk, qdot) @ qdot
            tau[k] = (-A_ @ np.linalg.solve(Mq, tau_e[k] + tau_a - cor
                                            - model.gravity_grad_of(qk))
                      + tau_a + K_H @ (tu - tau_a))
            defl = phi[k] - qk
            H[k] = (0.5 * pk @ qdot + 0.5 * z[k] @ (Jeinv @ z[k])
                    + 0.5 * defl @ shaped.K_e @ defl + model.potential_of(qk))
    else:
        phi = z = tau_u = None
        tau = np.zeros_like(q)
        for k in range(npts):
            qk, thk, pk, sk = q[k], theta[k], p[k], s[k]
            qdot = np.linalg.solve(model.mass_of(qk), pk)
            defl = thk - qk
            H[k] = (0.5 * pk @ qdot + 0.5 * sk @ (Jinv @ sk)
                    + 0.5 * defl @ K @ defl + model.potential_of(qk))
    return SimResult(t, q, p, theta, s, phi, z, tau, tau_e, tau_u, H, supply,
                     chart="open", dt=r.dt)


# ---------------------------------------------------------------------------
# shaped chart
# ---------------------------------------------------------------------------

def simulate_closed_form(sc: Scenario, sp: ShapedParams | None = None) -> SimResult:
    """Integrate the shaped dynamics directly in (q, phi, p, z)."""
    if sc.environment is not None:
        raise ValidationError("environment coupling is handled by simulate_coupled")
    if sp is not None:
        sc = replace(sc, controller=sp)
    r = _resolve(sc, need_controller=True)
    if r.linear_fast:
        return _simulate_closed_linear(sc, r)
    return _simulate_closed_generic(sc, r)


def _closed_linear_matrices(model, shaped, outer, n):
    Minv = np.linalg.inv(model.mass_of(np.zeros(n)))
    Jeinv = np.linalg.inv(shaped.J_e)
    Z = np.zeros((n, n))
    Ke, De = shaped.K_e, shaped.D_e
    A = np.block([
        [Z, Z, Minv, Z],
        [Z, Z, Z, Jeinv],
        [-Ke, Ke, -De @ Minv, De @ Jeinv],
        [Ke, -Ke, De @ Minv, -De @ Jeinv],
    ])
    const = np.zeros(4 * n)
    if outer is not None:
        A[3 * n:, n:2 * n] -= outer.K_phi
        A[3 * n:, 3 * n:] -= outer.D_phi @ Jeinv
        const[3 * n:] = outer.K_phi @ outer.phi_d
        Tu = np.hstack([Z, -outer.K_phi, Z, -outer.D_phi @ Jeinv])
    else:
        Tu = np.zeros((n, 4 * n))
    return A, const, Tu, Minv, Jeinv


def _simulate_closed_linear(sc: Scenario, r: _Resolved) -> SimResult:
    model, n, shaped = r.model, r.n, r.shaped
    A, const, Tu, Minv, Jeinv = _closed_linear_matrices(model, shaped, sc.outer, n)
    tu_const = sc.outer.K_phi @ sc.outer.phi_d if sc.outer is not None else np.zeros(n)
    B = np.vstack([np.zeros((2 * n, n)), np.eye(n), np.zeros((n, n))])
    signal = sc.input

    def field(t, xa):
        x = xa[:4 * n]
        u = signal.torque(t, n)
        dx = A @ x + B @ u + const
        tau_u = Tu @ x + tu_const
        rate = dx[:n] @ u + dx[n:2 * n] @ tau_u
        out = np.empty(4 * n + 1)
        out[:4 * n] = dx
        out[4 * n] = rate
        return out

    y0 = to_closed(r.x0, shaped, model)
    xa0 = np.concatenate([y0.pack(), [0.0]])
    X = _rk4_loop(field, xa0, r.dt, r.nsteps)
    t = r.dt * np.arange(r.nsteps + 1)
    states = X[:, :4 * n]
    supply = X[:, 4 * n]
    q, phi, p, z = (states[:, i * n:(i + 1) * n] for i in range(4))
    tau_e = signal.torque_series(t, n)
    tau_u = states @ Tu.T + tu_const
    H = _closed_energy_series(q, phi, p, z, shaped, Minv)

    # reconstruct the motor-side view and the equivalent applied torque
    K = model.K
    Kinv = np.linalg.inv(K)
    theta = (phi @ shaped.K_e.T - q @ (shaped.K_e - K).T) @ Kinv.T
    s = z @ r.gains.K_H.T + p @ r.gains.K_F.T
    qdot = p @ Minv.T
    phidot = z @ Jeinv.T
    thdot = phidot @ (Kinv @ shaped.K_e).T - qdot @ (Kinv @ (shaped.K_e - K)).T
    tau_a = (theta - q) @ K.T + (thdot - qdot) @ model.D.T
    tau = tau_e @ r.gains.K_F.T - tau_a @ r.gains.K_G.T + tau_u @ r.gains.K_H.T
    return SimResult(t, q, p, theta, s, phi, z, tau, tau_e, tau_u, H, supply,
                     chart="closed", dt=r.dt)


def _simulate_closed_generic(sc: Scenario, r: _Resolved) -> SimResult:
    model, n, shaped = r.model, r.n, r.shaped
    Jeinv = np.linalg.inv(shaped.J_e)
    Ke, De = shaped.K_e, shaped.D_e
    outer = sc.outer
    signal = sc.input

    def field(t, xa):
        q = xa[:n]
        phi = xa[n:2 * n]
        p = xa[2 * n:3 * n]
        z = xa[3 * n:4 * n]
        u = signal.torque(t, n)
        qdot = np.linalg.solve(model.mass_of(q), p)
        phidot = Jeinv @ z
        elastic = Ke @ (phi - q) + De @ (phidot - qdot)
        if outer is not None:
            tau_u = -outer.K_phi @ (phi - outer.phi_d) - outer.D_phi @ phidot
            if outer.gravity_comp:
                tau_u = tau_u + model.gravity_grad_of(phi)
        else:
            tau_u = np.zeros(n)
        out = np.empty(4 * n + 1)
        out[:n] = qdot
        out[n:2 * n] = phidot
        out[2 * n:3 * n] = (-model.gravity_grad_of(q) - model.kinetic_grad(q, p)
                            + elastic + u)
        out[3 * n:4 * n] = -elastic + tau_u
        out[4 * n] = qdot @ u + phidot @ tau_u
        return out

    y0 = to_closed(r.x0, shaped, model)
    xa0 = np.concatenate([y0.pack(), [0.0]])
    X = _rk4_loop(field, xa0, r.dt, r.nsteps)
    t = r.dt * np.arange(r.nsteps + 1)
    states = X[:, :4 * n]
    supply = X[:, 4 * n]
    q, phi, p, z = (states[:, i * n:(i + 1) * n] for i in range(4))
    tau_e = signal.torque_series(t, n)

    npts = t.shape[0]
    theta = np.empty((npts, n))
    s = np.empty((npts, n))
    tau_u = np.empty((npts, n))
    tau = np.empty((npts, n))
    H = np.empty(npts)
    Jinv = np.linalg.inv(model.J)
    A_ = model.J @ np.linalg.solve(model.K, Ke - model.K)
    for k in range(npts):
        y = ClosedLoopState(q[k], phi[k], p[k], z[k])
        x = from_closed(y, shaped, model)
        theta[k] = x.theta
        s[k] = x.s
        Mq = model.mass_of(q[k])
        qdot = np.linalg.solve(Mq, p[k])
        phidot = Jeinv @ z[k]
        if outer is not None:
            tau_u[k] = outer_loop_torque(phi[k], phidot, outer, model)
        else:
            tau_u[k] = 0.0
        thdot = Jinv @ x.s
        tau_a = model.K @ (x.theta - q[k]) + model.D @ (thdot - qdot)
        cor = model.coriolis_of(q[k], qdot) @ qdot
        tau[k] = (-A_ @ np.linalg.solve(Mq, tau_e[k] + tau_a - cor
                                        - model.gravity_grad_of(q[k]))
                  + tau_a + r.gains.K_H @ (tau_u[k] - tau_a))
        defl = phi[k] - q[k]
        H[k] = (0.5 * p[k] @ qdot + 0.5 * z[k] @ phidot
                + 0.5 * defl @ Ke @ defl + model.potential_of(q[k]))
    return SimResult(t, q, p, theta, s, phi, z, tau, tau_e, tau_u, H, supply,
                     chart="closed", dt=r.dt)


# ---------------------------------------------------------------------------
# coupled chart
# ---------------------------------------------------------------------------

def simulate_coupled(sc: Scenario) -> SimResult:
    """Integrate the shaped loop coupled to the environment.

    The environment mass is merged into the link mass block, which
    resolves the acceleration feedback without an algebraic loop.  The
    input signal, if any, acts as an extra external link torque on top of
    the environment reaction; the recorded ``tau_e`` is the total torque
    seen at the interaction port.  Constant-mass plants only.
    """
    if sc.environment is None:
        raise ValidationError("simulate_coupled requires an environment")
    if not isinstance(sc.plant, LinearRobotParams):
        raise ValidationError("environment coupling is implemented for constant-mass plants")
    r = _resolve(sc, need_controller=True)
    model, n, shaped, env = r.model, r.n, r.shaped, sc.environment
    M = model.mass_of(np.zeros(n))
    Mt = M + env.M_h
    Mtinv = np.linalg.inv(Mt)
    Jeinv = np.linalg.inv(shaped.J_e)
    Z = np.zeros((n, n))
    Ke, De = shaped.K_e, shaped.D_e
    A = np.block([
        [Z, Z, Mtinv, Z],
        [Z, Z, Z, Jeinv],
        [-Ke - env.K_h, Ke, -(De + env.D_h) @ Mtinv, De @ Jeinv],
        [Ke, -Ke, De @ Mtinv, -De @ Jeinv],
    ])
    const = np.zeros(4 * n)
    if sc.outer is not None:
        A[3 * n:, n:2 * n] -= sc.outer.K_phi
        A[3 * n:, 3 * n:] -= sc.outer.D_phi @ Jeinv
        const[3 * n:] = sc.outer.K_phi @ sc.outer.phi_d
        Tu = np.hstack([Z, -sc.outer.K_phi, Z, -sc.outer.D_phi @ Jeinv])
        tu_const = sc.outer.K_phi @ sc.outer.phi_d
    else:
        Tu = np.zeros((n, 4 * n))
        tu_const = np.zeros(n)
    B = np.vstack([np.zeros((2 * n, n)), np.eye(n), np.zeros((n, n))])
    signal = sc.input

    def field(t, xa):
        x = xa[:4 * n]
        u = signal.torque(t, n)
        dx = A @ x + B @ u + const
        out = np.empty(4 * n + 1)
        out[:4 * n] = dx
        out[4 * n] = dx[:n] @ u      # exogenous port power only
        return out

    # initial condition: velocities carry over, momenta use the merged mass
    qdot0 = np.linalg.solve(M, r.x0.p)
    y0 = to_closed(r.x0, shaped, model)
    xa0 = np.concatenate([y0.q, y0.phi, Mt @ qdot0, y0.z, [0.0]])
    X = _rk4_loop(field, xa0, r.dt, r.nsteps)
    t = r.dt * np.arange(r.nsteps + 1)
    states = X[:, :4 * n]
    supply = X[:, 4 * n]
    q, phi, pm, z = (states[:, i * n:(i + 1) * n] for i in range(4))
    tau_ext = signal.torque_series(t, n)

    qdot = pm @ Mtinv.T
    phidot = z @ Jeinv.T
    elastic = (phi - q) @ Ke.T + (phidot - qdot) @ De.T
    tau_u = states @ Tu.T + tu_const
    qddot = (elastic - qdot @ env.D_h.T - q @ env.K_h.T + tau_ext) @ Mtinv.T
    tau_e = qddot @ M.T - elastic          # total torque at the interaction port
    p_robot = qdot @ M.T
    tau = tau_e @ r.gains.K_F.T - elastic @ r.gains.K_G.T + tau_u @ r.gains.K_H.T

    defl = phi - q
    H = (0.5 * np.einsum("ij,jk,ik->i", pm, Mtinv, pm)
         + 0.5 * np.einsum("ij,jk,ik->i", z, Jeinv, z)
         + 0.5 * np.einsum("ij,jk,ik->i", defl, Ke, defl)
         + 0.5 * np.einsum("ij,jk,ik->i", q, env.K_h, q))
    if sc.outer is not None:
        offs = phi - sc.outer.phi_d
        H = H + 0.5 * np.einsum("ij,jk,ik->i", offs, sc.outer.K_phi, offs)
    return SimResult(t, q, p_robot, None, None, phi, z, tau, tau_e, tau_u, H, supply,
                     chart="coupled", dt=r.dt)


# ---------------------------------------------------------------------------
# tracking target and audits
# ---------------------------------------------------------------------------

def simulate_target_dynamics(m: RobotModel, K_theta, D_theta, q_d, signal: InputSignal,
                             T: float, dt: float, q0=None, qdot0=None) -> TargetResult:
    """Reference trajectory of M(q) q'' + (C + D_theta) q' + K_theta (q - q_d) = tau_e."""
    model = as_model(m)
    n = model.n
    K_theta = as_matrix(K_theta, n, "K_theta")
    D_theta = as_matrix(D_theta, n, "D_theta")
    q_d = as_vector(q_d, n, "q_d")
    q0 = as_vector(q0, n, "q0") if q0 is not None else np.zeros(n)
    qdot0 = as_vector(qdot0, n, "qdot0") if qdot0 is not None else np.zeros(n)

    def field(t, x):
        q, qd = x[:n], x[n:]
        tau_e = signal.torque(t, n)
        rhs = tau_e - (model.coriolis_of(q, qd) + D_theta) @ qd - K_theta @ (q - q_d) \
            - model.gravity_grad_of(q)
        qdd = np.linalg.solve(model.mass_of(q), rhs)
        return np.concatenate([qd, qdd])

    t, X = integrate(field, np.concatenate([q0, qdot0]), dt, T)
    return TargetResult(t, X[:, :n], X[:, n:])


def passivity_audit(result: SimResult) -> float:
    """Worst violation of the dissipation inequality over the run (J).

    Nonpositive (or below the integration tolerance) means the inequality
    held: stored energy never exceeded the initial energy plus the
    supplied work.
    """
    return float(np.max(result.passivity_residual))


def l2_distance(t: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    """Trapezoidal L2 distance between two sampled signals on grid ``t``."""
    diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return float(np.sqrt(np.trapezoid(diff * diff, t)))
