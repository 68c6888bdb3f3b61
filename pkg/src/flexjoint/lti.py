"""LTI analysis of the shaped closed loop.

State-space assembly for the shaped loop and for its interconnection with
a mass-spring-damper environment, exact 1-DOF admittances, transfer
functions from state space via the Faddeev-LeVerrier recursion, frequency
responses, pole/zero extraction, and a grid-based positive-real check.

The closed-loop admittance from external torque to link velocity for one
joint is

    Y(s) = (J_e s^2 + D_e s + K_e)
           / ( s [ J_e M s^2 + D_e (J_e + M) s + K_e (J_e + M) ] )

and the target admittance of a desired mass-spring-damper port is

    Y_d(s) = s / (M_d s^2 + K_d s + D_d).

Note the role of the target coefficients: ``K_d`` multiplies the velocity
term and ``D_d`` the position term in ``TargetImpedance``; keep that
naming in mind when reading parameter tables.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .control import OuterLoop, ShapedParams
from .errors import (
    AssemblyError,
    NotApplicableError,
    ValidationError,
)
from .linalg import as_matrix, require_psd, require_spd
from .model import LinearRobotParams
from .poly import aberth_roots, poly_from_roots, polyadd, polyder, polyval, trim

MAX_TF_STATES = 20
_CANCEL_RTOL = 1e-8


@dataclass(frozen=True)
class StateSpace:
    """Dense state-space system (A, B, C, Dmat) with port labels."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    Dmat: np.ndarray
    state_labels: tuple = ()
    input_labels: tuple = ()
    output_labels: tuple = ()

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        Dm = np.atleast_2d(np.asarray(self.Dmat, dtype=float))
        if A.shape[0] != A.shape[1]:
            raise ValidationError(f"A must be square, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise ValidationError(f"B rows {B.shape[0]} != states {A.shape[0]}")
        if C.shape[1] != A.shape[0]:
            raise ValidationError(f"C cols {C.shape[1]} != states {A.shape[0]}")
        if Dm.shape != (C.shape[0], B.shape[1]):
            raise ValidationError(f"Dmat shape {Dm.shape} != ({C.shape[0]}, {B.shape[1]})")
        for name, mat in (("A", A), ("B", B), ("C", C), ("Dmat", Dm)):
            if not np.all(np.isfinite(mat)):
                raise ValidationError(f"{name} has non-finite entries")
            mat.setflags(write=False)
            object.__setattr__(self, name, mat)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.C.shape[0]


@dataclass(frozen=True)
class RationalTF:
    """Rational transfer function, ascending coefficients.

    ``cancelled`` records approximate common roots removed when the
    function was reduced from a state-space realization.
    """

    num: np.ndarray
    den: np.ndarray
    cancelled: tuple = ()

    def __post_init__(self):
        num = trim(self.num)
        den = trim(self.den)
        if float(np.max(np.abs(den))) == 0.0:
            raise ValidationError("denominator is identically zero")
        num.setflags(write=False)
        den.setflags(write=False)
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)
        object.__setattr__(self, "cancelled", tuple(self.cancelled))


@dataclass(frozen=True)
class EnvironmentImpedance:
    """Mass-spring-damper environment at the interaction port."""

    n: int
    M_h: np.ndarray
    D_h: np.ndarray
    K_h: np.ndarray

    def __post_init__(self):
        for name in ("M_h", "D_h", "K_h"):
            mat = as_matrix(getattr(self, name), self.n, name)
            mat.setflags(write=False)
            object.__setattr__(self, name, mat)
        require_psd(self.M_h, "M_h")
        require_psd(self.D_h, "D_h")
        require_psd(self.K_h, "K_h")


@dataclass(frozen=True)
class TargetImpedance:
    """Desired port behaviour: M_d on acceleration, K_d on velocity, D_d on position."""

    n: int
    M_d: np.ndarray
    K_d: np.ndarray
    D_d: np.ndarray

    def __post_init__(self):
        for name in ("M_d", "K_d", "D_d"):
            mat = as_matrix(getattr(self, name), self.n, name)
            mat.setflags(write=False)
            object.__setattr__(self, name, mat)
        require_spd(self.M_d, "M_d")
        require_spd(self.K_d, "K_d")
        require_spd(self.D_d, "D_d")


@dataclass(frozen=True)
class PassivityVerdict:
    """Outcome of ``positive_real_check``."""

    verdict: str                      # "passive" | "not-passive" | "inconclusive"
    condition: str | None = None      # first violated / doubtful condition
    witness: complex | float | None = None
    min_real: float | None = None     # minimum of Re tf(jw) over the grid


def _state_labels(n: int) -> tuple:
    return tuple(f"{name}{i + 1}" for name in ("q", "phi", "p", "z") for i in range(n))


def assemble_closed_loop(m: LinearRobotParams, sp: ShapedParams,
                         outer: OuterLoop | None = None) -> StateSpace:
    """Shaped closed loop as a state-space system.

    States (q, phi, p, z), input tau_e, output the link velocity
    ``M^-1 p``.  With an outer loop, ``tau_u = -K_phi phi - D_phi phi'``
    is folded into the dynamics (the set-point shifts the equilibrium but
    not the transfer function, so it is ignored here).  Assumes a constant
    mass matrix and zero gravity.
    """
    if not isinstance(m, LinearRobotParams):
        raise ValidationError("state-space assembly requires a constant-mass plant")
    n = m.n
    if sp.n != n:
        raise AssemblyError(f"shaped parameters are {sp.n}-joint, plant is {n}-joint")
    try:
        Minv = np.linalg.inv(m.M)
        Jeinv = np.linalg.inv(sp.J_e)
    except np.linalg.LinAlgError as exc:
        raise AssemblyError(f"singular inertia block: {exc}") from None

    Z = np.zeros((n, n))
    Ke, De = sp.K_e, sp.D_e
    A = np.block([
        [Z, Z, Minv, Z],
        [Z, Z, Z, Jeinv],
        [-Ke, Ke, -De @ Minv, De @ Jeinv],
        [Ke, -Ke, De @ Minv, -De @ Jeinv],
    ])
    if outer is not None:
        if outer.n != n:
            raise AssemblyError(f"outer loop is {outer.n}-joint, plant is {n}-joint")
        A[3 * n:, n:2 * n] -= outer.K_phi
        A[3 * n:, 3 * n:] -= outer.D_phi @ Jeinv
    B = np.vstack([Z, Z, np.eye(n), Z])
    C = np.hstack([Z, Z, Minv, Z])
    return StateSpace(A, B, C, np.zeros((n, n)),
                      state_labels=_state_labels(n),
                      input_labels=tuple(f"tau_e{i + 1}" for i in range(n)),
                      output_labels=tuple(f"qdot{i + 1}" for i in range(n)))


def assemble_coupled(m: LinearRobotParams, sp: ShapedParams, env: EnvironmentImpedance,
                     outer: OuterLoop | None = None) -> StateSpace:
    """Closed loop coupled to the environment through the interaction port.

    The environment reaction enters the link equation with the
    environment mass merged into the link mass block:

        (M + M_h) q'' = K_e (phi - q) + D_e (phi' - q') - D_h q' - K_h q
        J_e phi''     = -K_e (phi - q) - D_e (phi' - q') + tau_u

    The damping through the transmission keeps the sign it has in the
    standalone closed loop, which is the energy-consistent choice.  States
    are (q, phi, pm, z) with ``pm = (M + M_h) q'``; the inputs are an
    extra external link torque and an extra motor-side torque, so the
    system is autonomous when the outer loop supplies ``tau_u``.
    """
    if not isinstance(m, LinearRobotParams):
        raise ValidationError("state-space assembly requires a constant-mass plant")
    n = m.n
    if env.n != n:
        raise AssemblyError(f"environment is {env.n}-joint, plant is {n}-joint")
    Mt = m.M + env.M_h
    try:
        Mtinv = np.linalg.inv(Mt)
        Jeinv = np.linalg.inv(sp.J_e)
    except np.linalg.LinAlgError as exc:
        raise AssemblyError(f"singular inertia block: {exc}") from None

    Z = np.zeros((n, n))
    Ke, De = sp.K_e, sp.D_e
    A = np.block([
        [Z, Z, Mtinv, Z],
        [Z, Z, Z, Jeinv],
        [-Ke - env.K_h, Ke, -(De + env.D_h) @ Mtinv, De @ Jeinv],
        [Ke, -Ke, De @ Mtinv, -De @ Jeinv],
    ])
    if outer is not None:
        A[3 * n:, n:2 * n] -= outer.K_phi
        A[3 * n:, 3 * n:] -= outer.D_phi @ Jeinv
    B = np.block([[Z, Z], [Z, Z], [np.eye(n), Z], [Z, np.eye(n)]])
    C = np.hstack([Z, Z, Mtinv, Z])
    return StateSpace(A, B, C, np.zeros((n, 2 * n)),
                      state_labels=_state_labels(n),
                      input_labels=tuple(f"tau_e{i + 1}" for i in range(n))
                      + tuple(f"tau_u{i + 1}" for i in range(n)),
                      output_labels=tuple(f"qdot{i + 1}" for i in range(n)))


def admittance_1dof(sp: ShapedParams, M) -> RationalTF:
    """Exact single-joint admittance of the shaped loop (no outer loop)."""
    if sp.n != 1:
        raise NotApplicableError(f"closed-form admittance is defined for n=1, got n={sp.n}")
    M = float(np.atleast_2d(np.asarray(M, dtype=float))[0, 0])
    Je, Ke, De = float(sp.J_e[0, 0]), float(sp.K_e[0, 0]), float(sp.D_e[0, 0])
    num = np.array([Ke, De, Je])
    den = np.array([0.0, Ke * (Je + M), De * (Je + M), Je * M])
    return RationalTF(num, den)


def target_admittance(t: TargetImpedance) -> RationalTF:
    """Single-joint target admittance Y_d(s) = s / (M_d s^2 + K_d s + D_d)."""
    if t.n != 1:
        raise NotApplicableError(f"target admittance is defined for n=1, got n={t.n}")
    return RationalTF(np.array([0.0, 1.0]),
                      np.array([float(t.D_d[0, 0]), float(t.K_d[0, 0]), float(t.M_d[0, 0])]))


def env_impedance_tf(env: EnvironmentImpedance) -> RationalTF:
    """Single-joint environment impedance (M_h s^2 + D_h s + K_h) / s."""
    if env.n != 1:
        raise NotApplicableError(f"environment impedance TF is defined for n=1, got n={env.n}")
    return RationalTF(np.array([float(env.K_h[0, 0]), float(env.D_h[0, 0]),
                                float(env.M_h[0, 0])]),
                      np.array([0.0, 1.0]))


def _faddeev_leverrier(A: np.ndarray, B: np.ndarray, C: np.ndarray):
    """Characteristic polynomial and numerator coefficients of C (sI-A)^-1 B.

    Returns (den, num) in ascending order for the scalar selection; both
    come from the resolvent expansion  (sI - A)^-1 = sum_k T_k s^(m-1-k) / p(s).
    """
    mdim = A.shape[0]
    T = np.eye(mdim)
    den_desc = np.zeros(mdim + 1)
    den_desc[0] = 1.0
    num_desc = np.zeros(mdim)
    for k in range(mdim):
        num_desc[k] = float(C @ T @ B)
        AT = A @ T
        ck = -np.trace(AT) / (k + 1)
        den_desc[k + 1] = ck
        T = AT + ck * np.eye(mdim)
    return den_desc[::-1].copy(), num_desc[::-1].copy()


def _clean_coeffs(c: np.ndarray, rtol: float = 1e-9) -> np.ndarray:
    """Zero out coefficients that are negligible against the norm.

    The recursion leaves rounding residue where coefficients are exactly
    zero (e.g. rigid-body modes); without cleaning, a double root at the
    origin splits into a spurious pair of magnitude sqrt(noise).
    """
    out = c.copy()
    out[np.abs(out) <= rtol * float(np.max(np.abs(out)))] = 0.0
    return out


def _cancel_common_roots(num: np.ndarray, den: np.ndarray):
    """Approximate-GCD reduction by pairing nearby roots."""
    if trim(num).size <= 1:
        return num, den, ()
    num_roots = list(aberth_roots(num))
    den_roots = list(aberth_roots(den))
    lead_num = trim(num)[-1]
    lead_den = trim(den)[-1]
    cancelled = []
    for r in sorted(num_roots, key=lambda v: (v.real, v.imag)):
        if not den_roots:
            break
        dists = [abs(r - d) for d in den_roots]
        j = int(np.argmin(dists))
        if dists[j] <= _CANCEL_RTOL * max(1.0, abs(den_roots[j])):
            cancelled.append(den_roots.pop(j))
            num_roots.remove(r)
    if not cancelled:
        return num, den, ()
    new_num = poly_from_roots(num_roots, lead_num)
    new_den = poly_from_roots(den_roots, lead_den)
    return new_num, new_den, tuple(cancelled)


def ss_to_tf(ss: StateSpace, input_index: int = 0, output_index: int = 0) -> RationalTF:
    """Transfer function of one input/output pair of a state-space system.

    Uses the Faddeev-LeVerrier recursion for the characteristic polynomial
    and numerator, then removes approximate common factors (recorded in
    ``cancelled``).  Refused above ``MAX_TF_STATES`` states, where the
    polynomial route loses too much precision; evaluate the resolvent
    directly at frequencies of interest instead.
    """
    if ss.n_states > MAX_TF_STATES:
        raise AssemblyError(
            f"{ss.n_states} states exceed the {MAX_TF_STATES}-state limit for polynomial "
            "conversion; evaluate the frequency response from the state-space form instead")
    if not (0 <= input_index < ss.n_inputs and 0 <= output_index < ss.n_outputs):
        raise ValidationError("input or output index out of range")
    b = ss.B[:, input_index]
    c = ss.C[output_index, :]
    d = float(ss.Dmat[output_index, input_index])
    den, num = _faddeev_leverrier(ss.A, b, c)
    if d != 0.0:
        num = polyadd(num, d * den)
    num = _clean_coeffs(trim(num))
    den = _clean_coeffs(trim(den))
    num, den, cancelled = _cancel_common_roots(num, den)
    return RationalTF(num, den, cancelled)


def evaluate(sys, svals) -> np.ndarray:
    """Complex response of a RationalTF or StateSpace at points ``svals``.

    The state-space path solves (sI - A) x = B per point rather than going
    through polynomial coefficients.  Points landing exactly on a pole
    yield ``inf``.
    """
    svals = np.atleast_1d(np.asarray(svals, dtype=complex))
    if isinstance(sys, RationalTF):
        with np.errstate(divide="ignore", invalid="ignore"):
            numv = polyval(sys.num, svals)
            denv = polyval(sys.den, svals)
            out = np.where(denv == 0.0,
                           np.inf + 0.0j,
                           numv / np.where(denv == 0.0, 1.0, denv))
        return out
    if isinstance(sys, StateSpace):
        if sys.n_inputs != 1 or sys.n_outputs != 1:
            raise ValidationError("frequency evaluation expects a single input/output pair; "
                                  "select one with ss_to_tf or slice B and C")
        out = np.empty(svals.shape, dtype=complex)
        I = np.eye(sys.n_states)
        for i, s in enumerate(svals):
            try:
                x = np.linalg.solve(s * I - sys.A, sys.B[:, 0])
                out[i] = sys.C[0, :] @ x + sys.Dmat[0, 0]
            except np.linalg.LinAlgError:
                out[i] = np.inf
        return out
    raise ValidationError(f"unsupported system type {type(sys).__name__}")


def freq_response(sys, omegas):
    """Magnitude (dB) and phase (deg) at angular frequencies ``omegas``.

    Frequencies landing exactly on an imaginary-axis pole are flagged with
    an infinite magnitude.
    """
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    if np.any(omegas < 0.0) or not np.all(np.isfinite(omegas)):
        raise ValidationError("frequencies must be finite and nonnegative")
    H = evaluate(sys, 1j * omegas)
    with np.errstate(divide="ignore", invalid="ignore"):
        mag_db = 20.0 * np.log10(np.abs(H))
    phase_deg = np.where(np.isfinite(H), np.degrees(np.angle(H)), np.nan)
    return mag_db, phase_deg


def poles_zeros(tf: RationalTF):
    """Poles and zeros; conjugate symmetry is exact for real systems."""
    return aberth_roots(tf.den), aberth_roots(tf.num)


def _residue_at_simple_pole(tf: RationalTF, pole: complex) -> complex:
    dden = polyval(polyder(tf.den), pole)
    return complex(polyval(tf.num, pole) / dden)


def positive_real_check(tf: RationalTF, grid=None) -> PassivityVerdict:
    """Grid-based positive-real verdict for a real rational function.

    ``passive`` requires all poles in the closed left half-plane,
    imaginary-axis poles simple with nonnegative real residue, and
    Re tf(jw) >= -1e-9 on the grid.  Clear violations (pole real part or
    negative grid minimum beyond 1e-6) give ``not-passive`` with the first
    violated condition and its witness; the band between the two
    thresholds is reported as ``inconclusive`` since the grid cannot
    resolve it.
    """
    if grid is None:
        grid = np.logspace(-2, 3, 400)
    grid = np.atleast_1d(np.asarray(grid, dtype=float))

    poles, _ = poles_zeros(tf)
    tight, loose = 1e-9, 1e-6
    marginal = None
    for pole in sorted(poles, key=lambda v: (-v.real, abs(v.imag))):
        scale = max(1.0, abs(pole))
        if pole.real > loose * scale:
            return PassivityVerdict("not-passive", "pole in right half-plane", pole)
        if pole.real > tight * scale:
            marginal = PassivityVerdict("inconclusive", "pole real part within grid doubt band",
                                        pole)
    for i, pole in enumerate(poles):
        scale = max(1.0, abs(pole))
        if abs(pole.real) <= tight * scale:
            others = [p for j, p in enumerate(poles) if j != i]
            if others and min(abs(pole - p) for p in others) <= loose * scale:
                return PassivityVerdict("not-passive", "repeated imaginary-axis pole", pole)
            res = _residue_at_simple_pole(tf, pole)
            if res.real < -tight * max(1.0, abs(res)):
                return PassivityVerdict("not-passive", "negative residue at imaginary-axis pole",
                                        pole)

    re_vals = np.real(evaluate(tf, 1j * grid))
    finite = re_vals[np.isfinite(re_vals)]
    min_re = float(np.min(finite)) if finite.size else 0.0
    wmin = float(grid[int(np.argmin(re_vals))]) if finite.size == re_vals.size else None
    if min_re < -loose:
        return PassivityVerdict("not-passive", "negative real part on frequency grid",
                                wmin, min_re)
    if min_re < -tight:
        return PassivityVerdict("inconclusive", "grid real-part minimum within doubt band",
                                wmin, min_re)
    if marginal is not None:
        return PassivityVerdict(marginal.verdict, marginal.condition, marginal.witness, min_re)
    return PassivityVerdict("passive", None, None, min_re)
