"""Impedance controller synthesis and control-law evaluation.

The controller feeds back the external torque, the elastic joint torque,
and an auxiliary input:

    tau = K_F tau_e - K_G tau_a - K_F grad V(q) + K_H tau_u,
    tau_a = K (theta - q) + D (theta' - q')

and shapes the closed loop into a mechanical system with motor-side
inertia ``J_e``, joint stiffness ``K_e``, and damping ``D_e = D K^-1 K_e``.
Gains and shaped parameters are two parametrizations of the same
controller:

    K_F = -J K^-1 (K_e - K) M^-1
    K_H = J K^-1 K_e J_e^-1
    K_G = K_H - K_F - I

with the inverse map

    J_e = (K_F + K_G + I)^-1 (J - K_F M)
    K_e = K J^-1 (J - K_F M)
    D_e = D J^-1 (J - K_F M).

On a configuration-dependent plant the same formulas hold with ``M(q)``
evaluated at the instantaneous configuration; ``gains_at`` provides that
evaluation, and the extra Coriolis compensation lives in
``nonlinear_control``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    NotApplicableError,
    ParametrizationSingularError,
    ShapingInfeasibleError,
)
from .linalg import (
    as_matrix,
    as_vector,
    min_eigenvalue_sym,
    require_psd,
    require_spd,
    solve,
    symmetry_error,
)
from .model import NonlinearRobotModel, OpenLoopState, RobotModel, as_model

# Relative symmetry tolerance on D_e; beyond it the shaping is rejected.
DE_SYMMETRY_RTOL = 1e-9


@dataclass(frozen=True)
class ShapedParams:
    """Closed-loop inertia, stiffness, and damping (J_e, K_e, D_e)."""

    J_e: np.ndarray
    K_e: np.ndarray
    D_e: np.ndarray

    def __post_init__(self):
        n = np.atleast_2d(np.asarray(self.J_e, dtype=float)).shape[0]
        for name in ("J_e", "K_e", "D_e"):
            mat = as_matrix(getattr(self, name), n, name)
            mat.setflags(write=False)
            object.__setattr__(self, name, mat)
        require_spd(self.J_e, "J_e", ShapingInfeasibleError)
        require_spd(self.K_e, "K_e", ShapingInfeasibleError)
        if symmetry_error(self.D_e) > DE_SYMMETRY_RTOL * max(float(np.max(np.abs(self.D_e))), 1.0):
            raise ShapingInfeasibleError(
                f"D_e is not symmetric (asymmetry {symmetry_error(self.D_e):.3e})", "D_e")
        require_psd(self.D_e, "D_e", ShapingInfeasibleError)

    @property
    def n(self) -> int:
        return self.J_e.shape[0]

    @property
    def lossless(self) -> bool:
        """True when D_e is only semidefinite (no strict damping)."""
        scale = max(float(np.max(np.abs(self.D_e))), 1.0)
        return min_eigenvalue_sym(self.D_e) <= 1e-10 * scale


@dataclass(frozen=True)
class ImpedanceGains:
    """Force-feedback, joint-torque, and auxiliary-input gains."""

    K_F: np.ndarray
    K_G: np.ndarray
    K_H: np.ndarray

    def __post_init__(self):
        n = np.atleast_2d(np.asarray(self.K_F, dtype=float)).shape[0]
        for name in ("K_F", "K_G", "K_H"):
            mat = as_matrix(getattr(self, name), n, name)
            mat.setflags(write=False)
            object.__setattr__(self, name, mat)

    @property
    def n(self) -> int:
        return self.K_F.shape[0]


@dataclass(frozen=True)
class OuterLoop:
    """Outer position loop tau_u = -K_phi (phi - phi_d) - D_phi phi' + gbar(phi)."""

    K_phi: np.ndarray
    D_phi: np.ndarray
    phi_d: np.ndarray = 0.0
    gravity_comp: bool = False

    def __post_init__(self):
        n = np.atleast_2d(np.asarray(self.K_phi, dtype=float)).shape[0]
        for name in ("K_phi", "D_phi"):
            mat = as_matrix(getattr(self, name), n, name)
            mat.setflags(write=False)
            object.__setattr__(self, name, mat)
        require_psd(self.K_phi, "K_phi")
        require_psd(self.D_phi, "D_phi")
        vec = as_vector(self.phi_d, n, "phi_d")
        vec.setflags(write=False)
        object.__setattr__(self, "phi_d", vec)

    @property
    def n(self) -> int:
        return self.K_phi.shape[0]


def _reference_mass(m: RobotModel, q_ref=None) -> np.ndarray:
    model = as_model(m)
    if q_ref is None:
        q_ref = np.zeros(model.n)
    return model.mass_of(as_vector(q_ref, model.n, "q_ref"))


def synthesize_gains(m: RobotModel, J_e, K_e, q_ref=None):
    """Controller gains realizing the shaping (J_e, K_e).

    Parameters
    ----------
    m : LinearRobotParams or NonlinearRobotModel
        Plant; for a configuration-dependent mass matrix the gains are
        evaluated at ``q_ref`` (default: the zero configuration).
    J_e, K_e : array_like
        Desired shaped inertia and stiffness, symmetric positive definite.

    Returns
    -------
    (ImpedanceGains, ShapedParams)
        The gain triple and the validated shaped parameters, including
        ``D_e = D K^-1 K_e``.

    Raises
    ------
    ShapingInfeasibleError
        If D_e fails to be symmetric positive semidefinite, or J_e / K_e
        are not admissible.
    """
    model = as_model(m)
    n = model.n
    J_e = as_matrix(J_e, n, "J_e")
    K_e = as_matrix(K_e, n, "K_e")
    require_spd(J_e, "J_e", ShapingInfeasibleError)
    require_spd(K_e, "K_e", ShapingInfeasibleError)
    M = _reference_mass(m, q_ref)

    D_e = model.D @ solve(model.K, K_e, "K")
    shaped = ShapedParams(J_e, K_e, D_e)

    JKinv = model.J @ np.linalg.inv(model.K)
    K_F = -JKinv @ (K_e - model.K) @ np.linalg.inv(M)
    K_H = JKinv @ K_e @ np.linalg.inv(J_e)
    K_G = K_H - K_F - np.eye(n)
    return ImpedanceGains(K_F, K_G, K_H), shaped


def gains_at(m: RobotModel, sp: ShapedParams, q) -> ImpedanceGains:
    """Gains consistent with the instantaneous mass matrix M(q).

    On a constant-mass plant this is independent of ``q`` and equals the
    ``synthesize_gains`` result; on a varying-mass plant the force-feedback
    gain follows the configuration, which is what makes the shaped closed
    loop exact along trajectories.
    """
    return synthesize_gains(m, sp.J_e, sp.K_e, q_ref=q)[0]


def recover_shaped(m: RobotModel, K_F, K_G, q_ref=None) -> ShapedParams:
    """Shaped parameters (J_e, K_e, D_e) realized by the gain pair (K_F, K_G).

    Raises
    ------
    ParametrizationSingularError
        If ``K_F + K_G + I`` is singular.
    ShapingInfeasibleError
        If any recovered matrix fails its definiteness requirement; the
        offending matrix is named in the error.
    """
    model = as_model(m)
    n = model.n
    K_F = as_matrix(K_F, n, "K_F")
    K_G = as_matrix(K_G, n, "K_G")
    M = _reference_mass(m, q_ref)

    core = model.J - K_F @ M
    denom = K_F + K_G + np.eye(n)
    if abs(np.linalg.det(denom)) < 1e-12 * max(float(np.max(np.abs(denom))), 1.0) ** n:
        raise ParametrizationSingularError("K_F + K_G + I is singular")
    J_e = solve(denom, core, "K_F + K_G + I", ParametrizationSingularError)
    K_e = model.K @ solve(model.J, core, "J")
    D_e = model.D @ solve(model.J, core, "J")

    for name, mat, check in (("J_e", J_e, require_spd), ("K_e", K_e, require_spd),
                             ("D_e", D_e, require_psd)):
        try:
            check(mat, name, ShapingInfeasibleError)
        except ShapingInfeasibleError as exc:
            raise ShapingInfeasibleError(str(exc), name) from None
    return ShapedParams(J_e, K_e, D_e)


def colgate_interval(m: RobotModel) -> tuple[float, float]:
    """Open interval of pure force-feedback gains K_F (with K_G = 0) that
    keep the single-joint closed loop passive: (-1, J/M)."""
    model = as_model(m)
    if model.n != 1:
        raise NotApplicableError(f"force-feedback interval is defined for n=1, got n={model.n}")
    M = float(_reference_mass(m)[0, 0])
    return (-1.0, float(model.J[0, 0]) / M)


def _joint_torque(x: OpenLoopState, model: NonlinearRobotModel) -> np.ndarray:
    Mq = model.mass_of(x.q)
    qdot = solve(Mq, x.p, "mass matrix")
    thdot = solve(model.J, x.s, "J")
    return model.K @ (x.theta - x.q) + model.D @ (thdot - qdot)


def linear_control(x: OpenLoopState, tau_e, tau_u, g: ImpedanceGains, m: RobotModel) -> np.ndarray:
    """Constant-mass control law tau = K_F tau_e - K_G tau_a - K_F grad V + K_H tau_u."""
    model = as_model(m)
    n = model.n
    tau_e = as_vector(tau_e, n, "tau_e")
    tau_u = as_vector(tau_u, n, "tau_u")
    tau_a = _joint_torque(x, model)
    return (g.K_F @ (tau_e - model.gravity_grad_of(x.q)) - g.K_G @ tau_a + g.K_H @ tau_u)


def nonlinear_control(x: OpenLoopState, tau_e, tau_u, g: ImpedanceGains,
                      m: RobotModel) -> np.ndarray:
    """Varying-mass control law; adds Coriolis compensation -K_F C(q, q') q'.

    Reduces exactly to ``linear_control`` when the mass matrix is constant.
    For exact shaping on a varying-mass plant, pass gains consistent with
    the instantaneous configuration (see ``gains_at``).
    """
    model = as_model(m)
    n = model.n
    tau_e = as_vector(tau_e, n, "tau_e")
    tau_u = as_vector(tau_u, n, "tau_u")
    tau_a = _joint_torque(x, model)
    qdot = solve(model.mass_of(x.q), x.p, "mass matrix")
    coriolis_force = model.coriolis_of(x.q, qdot) @ qdot
    return (g.K_F @ (tau_e - coriolis_force - model.gravity_grad_of(x.q))
            - g.K_G @ tau_a + g.K_H @ tau_u)


def outer_loop_torque(phi, phi_dot, o: OuterLoop, m: RobotModel) -> np.ndarray:
    """Outer-loop torque; gbar(phi) is the model gravity gradient at phi
    when gravity compensation is enabled, zero otherwise."""
    model = as_model(m)
    n = model.n
    phi = as_vector(phi, n, "phi")
    phi_dot = as_vector(phi_dot, n, "phi_dot")
    tau_u = -o.K_phi @ (phi - o.phi_d) - o.D_phi @ phi_dot
    if o.gravity_comp:
        tau_u = tau_u + model.gravity_grad_of(phi)
    return tau_u


def gain_consistency_error(g: ImpedanceGains) -> float:
    """Max-norm deviation of K_H - K_G - K_F from the identity."""
    return float(np.max(np.abs(g.K_H - g.K_G - g.K_F - np.eye(g.n))))


def check_gain_consistency(g: ImpedanceGains, sp: ShapedParams, m: RobotModel,
                           rtol: float = 1e-8) -> None:
    """Verify that a gain triple matches the shaped parametrization.

    Checks the identity K_H - K_G - K_F = I and K_H = J K^-1 K_e J_e^-1,
    both independent of the configuration.
    """
    from .errors import ConfigurationError

    model = as_model(m)
    scale = max(float(np.max(np.abs(g.K_H))), 1.0)
    if gain_consistency_error(g) > rtol * scale:
        raise ConfigurationError(
            f"gain triple violates K_H - K_G - K_F = I by {gain_consistency_error(g):.3e}")
    K_H_expected = model.J @ solve(model.K, sp.K_e @ np.linalg.inv(sp.J_e), "K")
    err = float(np.max(np.abs(g.K_H - K_H_expected)))
    if err > rtol * scale:
        raise ConfigurationError(
            f"K_H inconsistent with shaped parameters (deviation {err:.3e})")
