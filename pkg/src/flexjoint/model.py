"""Flexible-joint robot models.

A flexible joint couples each motor to its link through an elastic
transmission: motor inertia ``J`` drives the link through joint stiffness
``K`` and joint damping ``D``, so actuation and external forces act on
different coordinates.  This module holds the constant-mass parameter set,
the configuration-dependent model, the momentum-space state container, and
evaluators for the total energy and the open-loop vector field

    q'     = M(q)^-1 p
    theta' = J^-1 s
    p'     = -grad V(q) + K (theta - q) + D (J^-1 s - M^-1 p)
             - 1/2 grad_q (p^T M(q)^-1 p) + tau_e
    s'     = -K (theta - q) - D (J^-1 s - M^-1 p) + tau

with link momenta ``p = M(q) q'`` and motor momenta ``s = J theta'``.
For a constant mass matrix the quadratic gradient term vanishes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DegenerateModelError, ValidationError
from .linalg import as_matrix, as_vector, require_psd, require_spd, solve


@dataclass(frozen=True)
class LinearRobotParams:
    """Constant-mass flexible-joint plant.

    Parameters
    ----------
    n : int
        Joint count.
    M : array_like
        Link mass matrix, (n, n) symmetric positive definite.  Scalars and
        diagonal vectors are broadcast.
    J : array_like
        Motor inertia matrix, symmetric positive definite.
    K : array_like
        Joint stiffness matrix, symmetric positive definite.
    D : array_like
        Joint damping matrix, symmetric positive semidefinite.
    """

    n: int
    M: np.ndarray
    J: np.ndarray
    K: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError(f"joint count must be >= 1, got {self.n}")
        for name in ("M", "J", "K", "D"):
            mat = as_matrix(getattr(self, name), self.n, name)
            mat.setflags(write=False)
            object.__setattr__(self, name, mat)
        require_spd(self.M, "M")
        require_spd(self.J, "J")
        require_spd(self.K, "K")
        require_psd(self.D, "D")


@dataclass(frozen=True)
class NonlinearRobotModel:
    """Flexible-joint plant with configuration-dependent link dynamics.

    ``mass_of(q)`` returns the (n, n) link mass matrix, ``dmass_of(q)`` its
    configuration gradient stacked as (n, n, n) with ``dmass_of(q)[i]``
    equal to the partial derivative with respect to ``q[i]``.
    ``potential_of(q)`` is the gravity potential and ``gravity_grad_of(q)``
    its gradient.  The Coriolis matrix is derived from ``dmass_of`` through
    the Christoffel symbols, which makes ``Mdot - 2 C`` skew-symmetric.
    """

    n: int
    mass_of: Callable[[np.ndarray], np.ndarray]
    dmass_of: Callable[[np.ndarray], np.ndarray]
    potential_of: Callable[[np.ndarray], float]
    gravity_grad_of: Callable[[np.ndarray], np.ndarray]
    J: np.ndarray
    K: np.ndarray
    D: np.ndarray
    constant_mass: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError(f"joint count must be >= 1, got {self.n}")
        for name in ("J", "K", "D"):
            mat = as_matrix(getattr(self, name), self.n, name)
            mat.setflags(write=False)
            object.__setattr__(self, name, mat)
        require_spd(self.J, "J")
        require_spd(self.K, "K")
        require_psd(self.D, "D")

    @classmethod
    def from_linear(cls, params: LinearRobotParams,
                    potential_of=None, gravity_grad_of=None) -> "NonlinearRobotModel":
        """Wrap a constant-mass plant, optionally with a gravity potential."""
        n = params.n
        M = params.M
        zero_stack = np.zeros((n, n, n))
        zero_vec = np.zeros(n)
        if (potential_of is None) != (gravity_grad_of is None):
            raise ValidationError("provide both potential_of and gravity_grad_of, or neither")
        return cls(
            n=n,
            mass_of=lambda q: M,
            dmass_of=lambda q: zero_stack,
            potential_of=potential_of if potential_of is not None else (lambda q: 0.0),
            gravity_grad_of=gravity_grad_of if gravity_grad_of is not None else (lambda q: zero_vec),
            J=params.J,
            K=params.K,
            D=params.D,
            constant_mass=True,
        )

    def coriolis_of(self, q: np.ndarray, qdot: np.ndarray) -> np.ndarray:
        """Coriolis matrix from the Christoffel symbols of ``mass_of``."""
        if self.constant_mass:
            return np.zeros((self.n, self.n))
        dM = self.dmass_of(q)
        t1 = np.einsum("ikj,i->kj", dM, qdot)
        t2 = np.einsum("jki,i->kj", dM, qdot)
        t3 = np.einsum("kij,i->kj", dM, qdot)
        return 0.5 * (t1 + t2 - t3)

    def kinetic_grad(self, q: np.ndarray, p: np.ndarray) -> np.ndarray:
        """Gradient (1/2) d/dq [p^T M(q)^-1 p], zero for constant mass."""
        if self.constant_mass:
            return np.zeros(self.n)
        Mq = self.mass_of(q)
        qdot = solve(Mq, p, "mass matrix", DegenerateModelError)
        dM = self.dmass_of(q)
        return -0.5 * np.einsum("i,kij,j->k", qdot, dM, qdot)


RobotModel = LinearRobotParams | NonlinearRobotModel


def as_model(m: RobotModel) -> NonlinearRobotModel:
    """Promote plant parameters to the general model form."""
    if isinstance(m, NonlinearRobotModel):
        return m
    return NonlinearRobotModel.from_linear(m)


@dataclass(frozen=True)
class OpenLoopState:
    """Plant state (q, theta, p, s) in link/motor positions and momenta."""

    q: np.ndarray
    theta: np.ndarray
    p: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.q, dtype=float).shape[0] if np.ndim(self.q) else 1
        for name in ("q", "theta", "p", "s"):
            vec = as_vector(getattr(self, name), n, name)
            vec.setflags(write=False)
            object.__setattr__(self, name, vec)

    @property
    def n(self) -> int:
        return self.q.shape[0]

    def pack(self) -> np.ndarray:
        return np.concatenate([self.q, self.theta, self.p, self.s])

    @classmethod
    def unpack(cls, vec: np.ndarray, n: int) -> "OpenLoopState":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (4 * n,):
            raise ValidationError(f"state vector: expected shape ({4 * n},), got {vec.shape}")
        return cls(vec[:n], vec[n:2 * n], vec[2 * n:3 * n], vec[3 * n:])

    @classmethod
    def zero(cls, n: int) -> "OpenLoopState":
        return cls.unpack(np.zeros(4 * n), n)

    @classmethod
    def from_velocities(cls, q, theta, qdot, thetadot, m: RobotModel) -> "OpenLoopState":
        """Build the momentum state from velocities (p = M(q) q', s = J theta')."""
        model = as_model(m)
        q = as_vector(q, model.n, "q")
        return cls(q, theta, model.mass_of(q) @ as_vector(qdot, model.n, "qdot"),
                   model.J @ as_vector(thetadot, model.n, "thetadot"))


def open_loop_energy(x: OpenLoopState, m: RobotModel) -> float:
    """Total energy of the open-loop plant at state ``x``.

    Kinetic terms in both momenta, elastic energy of the joint deflection,
    plus the gravity potential.
    """
    model = as_model(m)
    Mq = model.mass_of(x.q)
    qdot = solve(Mq, x.p, "mass matrix", DegenerateModelError)
    thdot = solve(model.J, x.s, "J", DegenerateModelError)
    defl = x.theta - x.q
    return float(0.5 * x.p @ qdot + 0.5 * x.s @ thdot
                 + 0.5 * defl @ model.K @ defl + model.potential_of(x.q))


def open_loop_field(x: OpenLoopState, tau_e, tau, m: RobotModel) -> OpenLoopState:
    """Open-loop vector field; the returned container holds time derivatives."""
    model = as_model(m)
    n = model.n
    tau_e = as_vector(tau_e, n, "tau_e")
    tau = as_vector(tau, n, "tau")
    Mq = model.mass_of(x.q)
    qdot = solve(Mq, x.p, "mass matrix", DegenerateModelError)
    thdot = solve(model.J, x.s, "J", DegenerateModelError)
    tau_a = model.K @ (x.theta - x.q) + model.D @ (thdot - qdot)
    dp = -model.gravity_grad_of(x.q) - model.kinetic_grad(x.q, x.p) + tau_a + tau_e
    ds = -tau_a + tau
    return OpenLoopState(qdot, thdot, dp, ds)


def two_link_arm(link_lengths, link_masses, motor_inertias, joint_stiffness,
                 joint_damping, gravity: bool = False, com_offsets=None,
                 link_inertias=None, g: float = 9.81) -> NonlinearRobotModel:
    """Planar two-link arm with elastic joints.

    The link dynamics use the standard planar form: with shorthand
    ``b = m2 l1 lc2`` and ``c2 = cos(q2)``,

        M11 = m1 lc1^2 + m2 (l1^2 + lc2^2) + I1 + I2 + 2 b c2
        M12 = m2 lc2^2 + I2 + b c2
        M22 = m2 lc2^2 + I2

    Centers of mass default to mid-link and link inertias to the uniform
    rod value ``m l^2 / 12``.  With ``gravity`` off the arm moves in a
    horizontal plane and the potential is identically zero.

    Parameters
    ----------
    link_lengths, link_masses : sequence of 2 floats
        Geometry and inertia of the two links (m, kg).
    motor_inertias : sequence of 2 floats
        Rotor inertias reflected to the joint axes (kg m^2).
    joint_stiffness, joint_damping : array_like
        Transmission stiffness (SPD) and damping (PSD), scalar, per-joint,
        or full 2 x 2.
    gravity : bool
        Include gravity acting along -y of the link plane.
    """
    l1, l2 = (float(v) for v in link_lengths)
    m1, m2 = (float(v) for v in link_masses)
    if min(l1, l2, m1, m2) <= 0.0:
        raise ValidationError("link lengths and masses must be positive")
    if com_offsets is None:
        lc1, lc2 = 0.5 * l1, 0.5 * l2
    else:
        lc1, lc2 = (float(v) for v in com_offsets)
        if min(lc1, lc2) <= 0.0:
            raise ValidationError("center-of-mass offsets must be positive")
    if link_inertias is None:
        I1, I2 = m1 * l1 ** 2 / 12.0, m2 * l2 ** 2 / 12.0
    else:
        I1, I2 = (float(v) for v in link_inertias)
        if min(I1, I2) <= 0.0:
            raise ValidationError("link inertias must be positive")

    Jm = as_matrix(motor_inertias, 2, "motor_inertias")
    if np.any(np.diag(Jm) <= 0.0):
        raise ValidationError("motor inertias must be positive")

    a = I1 + I2 + m1 * lc1 ** 2 + m2 * (l1 ** 2 + lc2 ** 2)
    b = m2 * l1 * lc2
    d = I2 + m2 * lc2 ** 2

    def mass_of(q):
        c2 = np.cos(q[1])
        off = d + b * c2
        return np.array([[a + 2.0 * b * c2, off], [off, d]])

    def dmass_of(q):
        s2 = np.sin(q[1])
        out = np.zeros((2, 2, 2))
        out[1] = [[-2.0 * b * s2, -b * s2], [-b * s2, 0.0]]
        return out

    if gravity:
        g1 = (m1 * lc1 + m2 * l1) * g
        g2 = m2 * lc2 * g

        def potential_of(q):
            return g1 * np.sin(q[0]) + g2 * np.sin(q[0] + q[1])

        def gravity_grad_of(q):
            c12 = np.cos(q[0] + q[1])
            return np.array([g1 * np.cos(q[0]) + g2 * c12, g2 * c12])
    else:
        def potential_of(q):
            return 0.0

        def gravity_grad_of(q):
            return np.zeros(2)

    return NonlinearRobotModel(
        n=2,
        mass_of=mass_of,
        dmass_of=dmass_of,
        potential_of=potential_of,
        gravity_grad_of=gravity_grad_of,
        J=Jm,
        K=as_matrix(joint_stiffness, 2, "joint_stiffness"),
        D=as_matrix(joint_damping, 2, "joint_damping"),
    )
