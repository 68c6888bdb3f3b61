"""Coordinate change between the plant chart and the shaped chart.

The controller of this package turns the plant state (q, theta, p, s) into
a shaped mechanical system in coordinates (q, phi, p, z):

    phi = K_e^-1 (K_e - K) q + K_e^-1 K theta
    z   = J_e K_e^-1 (K_e - K) M(q)^-1 p + J_e K_e^-1 K J^-1 s

with closed-loop energy

    H = 1/2 p^T M(q)^-1 p + 1/2 z^T J_e^-1 z
        + 1/2 (phi - q)^T K_e (phi - q) + V(q)

and closed-loop dynamics of the same structure as the plant, with
(J_e, K_e, D_e) in place of (J, K, D).  ``equivalence_residual`` checks
numerically, state by state, that the controlled plant pushed through this
transform reproduces the shaped dynamics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .control import (
    ImpedanceGains,
    ShapedParams,
    check_gain_consistency,
    gains_at,
    linear_control,
    nonlinear_control,
)
from .errors import TransformSingularError, ValidationError
from .linalg import as_vector, solve
from .model import (
    OpenLoopState,
    RobotModel,
    as_model,
    open_loop_field,
)

# Absolute floor applied when normalizing residuals near equilibria.
RESIDUAL_FLOOR = 1e-12


@dataclass(frozen=True)
class ClosedLoopState:
    """Shaped state (q, phi, p, z): link coordinates pass through unchanged."""

    q: np.ndarray
    phi: np.ndarray
    p: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.q, dtype=float).shape[0] if np.ndim(self.q) else 1
        for name in ("q", "phi", "p", "z"):
            vec = as_vector(getattr(self, name), n, name)
            vec.setflags(write=False)
            object.__setattr__(self, name, vec)

    @property
    def n(self) -> int:
        return self.q.shape[0]

    def pack(self) -> np.ndarray:
        return np.concatenate([self.q, self.phi, self.p, self.z])

    @classmethod
    def unpack(cls, vec: np.ndarray, n: int) -> "ClosedLoopState":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (4 * n,):
            raise ValidationError(f"state vector: expected shape ({4 * n},), got {vec.shape}")
        return cls(vec[:n], vec[n:2 * n], vec[2 * n:3 * n], vec[3 * n:])


def to_closed(x: OpenLoopState, sp: ShapedParams, m: RobotModel) -> ClosedLoopState:
    """Map the plant state into the shaped chart; M(q) at the state's q."""
    model = as_model(m)
    K, J = model.K, model.J
    qdot = solve(model.mass_of(x.q), x.p, "mass matrix")
    thdot = solve(J, x.s, "J")
    phi = solve(sp.K_e, (sp.K_e - K) @ x.q + K @ x.theta, "K_e", TransformSingularError)
    z = sp.J_e @ solve(sp.K_e, (sp.K_e - K) @ qdot + K @ thdot, "K_e", TransformSingularError)
    return ClosedLoopState(x.q, phi, x.p, z)


def from_closed(y: ClosedLoopState, sp: ShapedParams, m: RobotModel) -> OpenLoopState:
    """Exact inverse of ``to_closed``."""
    model = as_model(m)
    K, J = model.K, model.J
    theta = solve(K, sp.K_e @ y.phi - (sp.K_e - K) @ y.q, "K", TransformSingularError)
    qdot = solve(model.mass_of(y.q), y.p, "mass matrix")
    phidot = solve(sp.J_e, y.z, "J_e", TransformSingularError)
    thdot = solve(K, sp.K_e @ phidot - (sp.K_e - K) @ qdot, "K", TransformSingularError)
    return OpenLoopState(y.q, theta, y.p, J @ thdot)


def closed_loop_energy(y: ClosedLoopState, sp: ShapedParams, m: RobotModel) -> float:
    """Shaped total energy; the storage function of the closed loop."""
    model = as_model(m)
    qdot = solve(model.mass_of(y.q), y.p, "mass matrix")
    phidot = solve(sp.J_e, y.z, "J_e", TransformSingularError)
    defl = y.phi - y.q
    return float(0.5 * y.p @ qdot + 0.5 * y.z @ phidot
                 + 0.5 * defl @ sp.K_e @ defl + model.potential_of(y.q))


def closed_loop_field(y: ClosedLoopState, tau_e, tau_u, sp: ShapedParams,
                      m: RobotModel) -> ClosedLoopState:
    """Shaped vector field; the returned container holds time derivatives.

    Same interconnection-plus-damping structure as the plant, acting on the
    gradient of ``closed_loop_energy``; for a varying mass matrix the
    kinetic gradient term enters the p equation.
    """
    model = as_model(m)
    n = model.n
    tau_e = as_vector(tau_e, n, "tau_e")
    tau_u = as_vector(tau_u, n, "tau_u")
    qdot = solve(model.mass_of(y.q), y.p, "mass matrix")
    phidot = solve(sp.J_e, y.z, "J_e", TransformSingularError)
    elastic = sp.K_e @ (y.phi - y.q) + sp.D_e @ (phidot - qdot)
    dp = -model.gravity_grad_of(y.q) - model.kinetic_grad(y.q, y.p) + elastic + tau_e
    dz = -elastic + tau_u
    return ClosedLoopState(qdot, phidot, dp, dz)


def equivalence_residual(x: OpenLoopState, tau_e, tau_u, g: ImpedanceGains,
                         sp: ShapedParams, m: RobotModel) -> float:
    """Pointwise mismatch between the controlled plant and the shaped dynamics.

    Evaluates the plant field under the control law at ``x``, pushes it
    through the Jacobian of the coordinate change (a five-point directional
    stencil, exact for the constant-mass case where the transform is
    linear), and subtracts the shaped field at the transformed state.

    Returns
    -------
    float
        Max-norm residual relative to the shaped field magnitude, floored
        at ``RESIDUAL_FLOOR`` near equilibria.

    Raises
    ------
    ConfigurationError
        If the gain triple is inconsistent with the shaped parameters.
    """
    model = as_model(m)
    n = model.n
    tau_e = as_vector(tau_e, n, "tau_e")
    tau_u = as_vector(tau_u, n, "tau_u")
    check_gain_consistency(g, sp, model)

    def controlled_field(vec: np.ndarray) -> np.ndarray:
        xs = OpenLoopState.unpack(vec, n)
        if model.constant_mass:
            tau = linear_control(xs, tau_e, tau_u, g, model)
        else:
            tau = nonlinear_control(xs, tau_e, tau_u, gains_at(model, sp, xs.q), model)
        return open_loop_field(xs, tau_e, tau, model).pack()

    def transform(vec: np.ndarray) -> np.ndarray:
        return to_closed(OpenLoopState.unpack(vec, n), sp, model).pack()

    xv = x.pack()
    dx = controlled_field(xv)
    # directional derivative of the transform along the flow
    h = 1e-3 * max(float(np.linalg.norm(xv)), 1.0) / max(float(np.linalg.norm(dx)), 1e-9)
    dy_pushed = (transform(xv - 2 * h * dx) - 8.0 * transform(xv - h * dx)
                 + 8.0 * transform(xv + h * dx) - transform(xv + 2 * h * dx)) / (12.0 * h)
    dy_shaped = closed_loop_field(to_closed(x, sp, model), tau_e, tau_u, sp, model).pack()
    scale = max(float(np.max(np.abs(dy_shaped))), RESIDUAL_FLOOR)
    return float(np.max(np.abs(dy_pushed - dy_shaped))) / scale
