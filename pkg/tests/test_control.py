import numpy as np
import pytest

from conftest import rand_admissible_shaping, rand_plant, rand_spd
from flexjoint import (
    ImpedanceGains,
    LinearRobotParams,
    NotApplicableError,
    OpenLoopState,
    OuterLoop,
    ParametrizationSingularError,
    ShapingInfeasibleError,
    colgate_interval,
    linear_control,
    nonlinear_control,
    outer_loop_torque,
    recover_shaped,
    synthesize_gains,
)
from flexjoint.control import gain_consistency_error, gains_at


class TestSynthesizeGains:
    def test_identity_shaping_leaves_plant_unchanged(self, paper_plant):
        g, sp = synthesize_gains(paper_plant, paper_plant.J, paper_plant.K)
        assert np.allclose(g.K_F, 0.0, atol=1e-12)
        assert np.allclose(g.K_G, 0.0, atol=1e-12)
        assert np.allclose(g.K_H, np.eye(1))
        assert np.allclose(sp.D_e, paper_plant.D)

    def test_hand_values(self, paper_plant):
        g, sp = synthesize_gains(paper_plant, 1.5, 5e5)
        assert g.K_F[0, 0] == pytest.approx(0.5, rel=1e-12)
        assert g.K_G[0, 0] == pytest.approx(-0.5, rel=1e-12)
        assert g.K_H[0, 0] == pytest.approx(1.0, rel=1e-12)
        assert sp.D_e[0, 0] == pytest.approx(0.5, rel=1e-12)

    def test_stiffening_reaches_feedback_boundary(self, paper_plant):
        # doubling the stiffness needs K_F = -1, the passivity boundary of
        # the pure force-feedback design
        g, _ = synthesize_gains(paper_plant, 3.0, 2e6)
        assert g.K_F[0, 0] == pytest.approx(-1.0, rel=1e-12)
        assert g.K_G[0, 0] == pytest.approx(g.K_H[0, 0], rel=1e-12)

    def test_gain_identity_holds(self, paper_plant):
        rng = np.random.default_rng(11)
        for _ in range(50):
            J_e, K_e = rand_admissible_shaping(rng, paper_plant)
            g, _ = synthesize_gains(paper_plant, J_e, K_e)
            assert gain_consistency_error(g) <= 1e-12 * max(np.max(np.abs(g.K_H)), 1.0)

    def test_asymmetric_damping_rejected(self):
        # generic SPD K_e makes D K^-1 K_e asymmetric when D and K do not commute
        rng = np.random.default_rng(5)
        plant = LinearRobotParams(n=2, M=np.eye(2), J=np.eye(2),
                                  K=np.diag([1.0, 4.0]),
                                  D=np.array([[1.0, 0.5], [0.5, 1.0]]))
        K_e = rand_spd(rng, 2, 0.5, 3.0)
        with pytest.raises(ShapingInfeasibleError):
            synthesize_gains(plant, np.eye(2), K_e)

    def test_lossless_flag_for_undamped_plant(self, demo_arm):
        _, sp = synthesize_gains(demo_arm, np.eye(2), 2.0 * demo_arm.K)
        assert sp.lossless

    def test_damped_shaping_not_lossless(self, paper_plant):
        _, sp = synthesize_gains(paper_plant, 1.5, 5e5)
        assert not sp.lossless


class TestRecoverShaped:
    def test_zero_gains_recover_plant(self, paper_plant):
        sp = recover_shaped(paper_plant, 0.0, 0.0)
        assert np.allclose(sp.J_e, paper_plant.J)
        assert np.allclose(sp.K_e, paper_plant.K)
        assert np.allclose(sp.D_e, paper_plant.D)

    def test_hand_values(self, paper_plant):
        sp = recover_shaped(paper_plant, 0.9, 0.0)
        assert sp.J_e[0, 0] == pytest.approx(0.3 / 1.9, rel=1e-10)
        assert sp.K_e[0, 0] == pytest.approx(1e5, rel=1e-10)
        assert sp.D_e[0, 0] == pytest.approx(0.1, rel=1e-10)

    def test_roundtrip_both_directions(self):
        rng = np.random.default_rng(42)
        for n in (1, 2, 3):
            plant = rand_plant(rng, n)
            for _ in range(30):
                J_e, K_e = rand_admissible_shaping(rng, plant)
                g, sp = synthesize_gains(plant, J_e, K_e)
                back = recover_shaped(plant, g.K_F, g.K_G)
                for a, b in ((back.J_e, sp.J_e), (back.K_e, sp.K_e), (back.D_e, sp.D_e)):
                    assert np.max(np.abs(a - b)) <= 1e-10 * max(np.max(np.abs(b)), 1e-30)
                g2, _ = synthesize_gains(plant, back.J_e, back.K_e)
                for a, b in ((g2.K_F, g.K_F), (g2.K_G, g.K_G), (g2.K_H, g.K_H)):
                    assert np.max(np.abs(a - b)) <= 1e-10 * max(np.max(np.abs(b)), 1.0)

    def test_singular_parametrization(self, paper_plant):
        with pytest.raises(ParametrizationSingularError):
            recover_shaped(paper_plant, 0.5, -1.5)

    def test_infeasible_names_offender(self, paper_plant):
        with pytest.raises(ShapingInfeasibleError) as exc:
            recover_shaped(paper_plant, 1.5, 0.0)   # J - K_F M < 0
        assert exc.value.matrix_name in ("J_e", "K_e", "D_e")


class TestColgateInterval:
    def test_paper_interval(self, paper_plant):
        assert colgate_interval(paper_plant) == (-1.0, 1.0)

    def test_multi_joint_not_applicable(self, demo_arm):
        with pytest.raises(NotApplicableError):
            colgate_interval(demo_arm)

    def test_positive_inside(self, paper_plant):
        sp = recover_shaped(paper_plant, 0.99, 0.0)
        assert sp.J_e[0, 0] > 0 and sp.K_e[0, 0] > 0 and sp.D_e[0, 0] > 0

    def test_boundary_collapses(self, paper_plant):
        with pytest.raises(ShapingInfeasibleError):
            recover_shaped(paper_plant, 1.0, 0.0)

    def test_outside_infeasible(self, paper_plant):
        for kf in (-1.01, 1.01):
            with pytest.raises(ShapingInfeasibleError):
                recover_shaped(paper_plant, kf, 0.0)


class TestControlLaws:
    def test_passthrough(self, paper_plant):
        g = ImpedanceGains(0.0, 0.0, 1.0)
        x = OpenLoopState(0.1, 0.4, 0.3, -0.2)
        tau = linear_control(x, 0.7, 2.5, g, paper_plant)
        # tau_a does not vanish, but with K_G = 0 only the feedthroughs remain
        assert tau[0] == pytest.approx(0.0 * 0.7 + 1.0 * 2.5, rel=1e-12)

    def test_zero_deflection_drops_joint_torque(self, paper_plant):
        g = ImpedanceGains(0.3, 7.0, 8.3)
        x = OpenLoopState(0.2, 0.2, 0.3 * 3.0, 0.3 * 3.0)   # equal velocities
        tau = linear_control(x, 2.0, -1.0, g, paper_plant)
        assert tau[0] == pytest.approx(0.3 * 2.0 + 8.3 * (-1.0), rel=1e-12)

    def test_hand_value(self, paper_plant):
        g = ImpedanceGains(0.9, 4.0, 5.9)
        x = OpenLoopState(0.0, 1e-3, 0.0, 0.0)
        tau = linear_control(x, 1.0, 0.0, g, paper_plant)
        assert tau[0] == pytest.approx(-3999.1, rel=1e-12)

    def test_nonlinear_equals_linear_at_rest(self, demo_arm):
        rng = np.random.default_rng(8)
        g = ImpedanceGains(0.2 * np.eye(2), 1.5 * np.eye(2), 2.7 * np.eye(2))
        for _ in range(10):
            x = OpenLoopState(rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2),
                              np.zeros(2), np.zeros(2))
            ta = nonlinear_control(x, np.ones(2), np.zeros(2), g, demo_arm)
            tb = linear_control(x, np.ones(2), np.zeros(2), g, demo_arm)
            assert np.allclose(ta, tb, rtol=0, atol=1e-12)

    def test_nonlinear_equals_linear_constant_mass(self, paper_plant):
        rng = np.random.default_rng(9)
        g = ImpedanceGains(0.5, 2.0, 3.5)
        for _ in range(20):
            x = OpenLoopState.unpack(rng.normal(0, 1, 4), 1)
            te, tu = rng.normal(size=2)
            ta = nonlinear_control(x, te, tu, g, paper_plant)
            tb = linear_control(x, te, tu, g, paper_plant)
            scale = max(abs(tb[0]), 1.0)
            assert abs(ta[0] - tb[0]) <= 1e-12 * scale

    def test_pure_coriolis_compensation_against_oracle(self, demo_arm):
        # K_F = I, K_G = K_H = 0 isolates tau = -C(q, qdot) qdot; the oracle
        # is the Lagrangian force Mdot qdot - 1/2 grad(qdot' M qdot) built
        # from finite differences of the mass matrix alone
        rng = np.random.default_rng(10)
        g = ImpedanceGains(np.eye(2), np.zeros((2, 2)), np.zeros((2, 2)))
        h = 1e-6
        for _ in range(20):
            q = rng.uniform(-np.pi, np.pi, 2)
            qd = rng.normal(0, 2, 2)
            x = OpenLoopState.from_velocities(q, q, qd, np.zeros(2), demo_arm)
            tau = nonlinear_control(x, np.zeros(2), np.zeros(2), g, demo_arm)
            Mdot = (demo_arm.mass_of(q + h * qd) - demo_arm.mass_of(q - h * qd)) / (2 * h)
            quad = np.empty(2)
            for i in range(2):
                e = np.zeros(2)
                e[i] = h
                quad[i] = (qd @ demo_arm.mass_of(q + e) @ qd
                           - qd @ demo_arm.mass_of(q - e) @ qd) / (2 * h)
            oracle = -(Mdot @ qd - 0.5 * quad)
            assert np.max(np.abs(tau - oracle)) <= 1e-6 * max(np.max(np.abs(oracle)), 1.0)


class TestOuterLoop:
    def test_at_setpoint_rest_is_zero(self, paper_plant):
        o = OuterLoop(100.0, 10.0, 0.25)
        assert outer_loop_torque(0.25, 0.0, o, paper_plant)[0] == 0.0

    def test_hand_value(self, paper_plant):
        o = OuterLoop(100.0, 10.0, 0.0)
        tau = outer_loop_torque(0.1, -0.2, o, paper_plant)
        assert tau[0] == pytest.approx(-8.0, rel=1e-12)

    def test_gravity_compensation_at_setpoint(self, gravity_arm):
        o = OuterLoop(100.0 * np.eye(2), 10.0 * np.eye(2),
                      np.array([0.3, -0.1]), gravity_comp=True)
        tau = outer_loop_torque(o.phi_d, np.zeros(2), o, gravity_arm)
        assert np.allclose(tau, gravity_arm.gravity_grad_of(o.phi_d))


class TestGainsAt:
    def test_constant_mass_is_configuration_independent(self, paper_plant):
        g, sp = synthesize_gains(paper_plant, 1.5, 5e5)
        g2 = gains_at(paper_plant, sp, np.array([0.7]))
        assert np.allclose(g.K_F, g2.K_F)

    def test_varying_mass_tracks_configuration(self, demo_arm):
        _, sp = synthesize_gains(demo_arm, np.eye(2), 2.0 * demo_arm.K)
        ga = gains_at(demo_arm, sp, np.zeros(2))
        gb = gains_at(demo_arm, sp, np.array([0.0, 2.0]))
        assert not np.allclose(ga.K_F, gb.K_F)
        assert np.allclose(ga.K_H, gb.K_H)   # K_H does not involve the mass
