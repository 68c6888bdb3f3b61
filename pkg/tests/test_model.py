import numpy as np
import pytest

from flexjoint import (
    DegenerateModelError,
    LinearRobotParams,
    NonlinearRobotModel,
    OpenLoopState,
    ValidationError,
    as_model,
    integrate,
    open_loop_energy,
    open_loop_field,
    two_link_arm,
)


def directional_mass_derivative(model, q, qdot):
    """Finite-difference oracle for Mdot = dM/dt along direction qdot.

    Five-point stencil with a direction-scaled step keeps the truncation
    error below 1e-10 even for fast joint rates.
    """
    h = 1e-4 / max(float(np.linalg.norm(qdot)), 1.0)
    g = lambda a: model.mass_of(q + a * qdot)
    return (g(-2 * h) - 8.0 * g(-h) + 8.0 * g(h) - g(2 * h)) / (12.0 * h)


class TestOpenLoopEnergy:
    def test_equilibrium_is_zero(self, paper_plant):
        x = OpenLoopState(0.3, 0.3, 0.0, 0.0)
        assert open_loop_energy(x, paper_plant) == pytest.approx(0.0, abs=1e-12)

    def test_elastic_term(self, paper_plant):
        x = OpenLoopState(0.0, 1e-3, 0.0, 0.0)
        assert open_loop_energy(x, paper_plant) == pytest.approx(0.5, rel=1e-12)

    def test_kinetic_term(self, paper_plant):
        x = OpenLoopState(0.0, 0.0, 3.0, 0.0)
        assert open_loop_energy(x, paper_plant) == pytest.approx(1.5, rel=1e-12)

    def test_singular_mass_raises(self):
        model = NonlinearRobotModel(
            n=1,
            mass_of=lambda q: np.array([[0.0]]),
            dmass_of=lambda q: np.zeros((1, 1, 1)),
            potential_of=lambda q: 0.0,
            gravity_grad_of=lambda q: np.zeros(1),
            J=1.0, K=1.0, D=0.0)
        with pytest.raises(DegenerateModelError):
            open_loop_energy(OpenLoopState(0.0, 0.0, 1.0, 0.0), model)


class TestOpenLoopField:
    def test_equilibrium_is_stationary(self, paper_plant):
        d = open_loop_field(OpenLoopState.zero(1), 0.0, 0.0, paper_plant)
        assert np.all(d.pack() == 0.0)

    def test_deflection_drives_momenta(self, paper_plant):
        x = OpenLoopState(0.0, 1e-3, 0.0, 0.0)
        d = open_loop_field(x, 0.0, 0.0, paper_plant)
        assert d.p[0] == pytest.approx(1e3, rel=1e-12)
        assert d.s[0] == pytest.approx(-1e3, rel=1e-12)
        assert d.q[0] == 0.0 and d.theta[0] == 0.0

    def test_constant_mass_model_matches_linear(self, paper_plant):
        rng = np.random.default_rng(7)
        model = as_model(paper_plant)
        assert model.constant_mass
        for _ in range(20):
            x = OpenLoopState.unpack(rng.normal(0, 1, 4), 1)
            te, tau = rng.normal(size=2)
            da = open_loop_field(x, te, tau, paper_plant).pack()
            db = open_loop_field(x, te, tau, model).pack()
            scale = max(np.max(np.abs(da)), 1.0)
            assert np.max(np.abs(da - db)) <= 1e-12 * scale


class TestTwoLinkArm:
    def test_coriolis_vanishes_at_rest(self, demo_arm):
        rng = np.random.default_rng(0)
        for _ in range(10):
            q = rng.uniform(-np.pi, np.pi, 2)
            force = demo_arm.coriolis_of(q, np.zeros(2)) @ np.zeros(2)
            assert np.all(force == 0.0)

    def test_mdot_minus_2c_skew(self, demo_arm):
        rng = np.random.default_rng(1)
        for _ in range(50):
            q = rng.uniform(-np.pi, np.pi, 2)
            qd = rng.normal(0, 2, 2)
            Mdot = directional_mass_derivative(demo_arm, q, qd)
            S = Mdot - 2.0 * demo_arm.coriolis_of(q, qd)
            assert np.max(np.abs(S + S.T)) <= 1e-10

    def test_gravity_off_means_zero_potential(self, demo_arm):
        rng = np.random.default_rng(2)
        for _ in range(5):
            q = rng.uniform(-np.pi, np.pi, 2)
            assert demo_arm.potential_of(q) == 0.0
            assert np.all(demo_arm.gravity_grad_of(q) == 0.0)

    def test_gravity_grad_matches_finite_differences(self, gravity_arm):
        rng = np.random.default_rng(3)
        h = 1e-6
        for _ in range(20):
            q = rng.uniform(-np.pi, np.pi, 2)
            grad = gravity_arm.gravity_grad_of(q)
            for i in range(2):
                e = np.zeros(2)
                e[i] = h
                fd = (gravity_arm.potential_of(q + e) - gravity_arm.potential_of(q - e)) / (2 * h)
                assert grad[i] == pytest.approx(fd, rel=1e-6, abs=1e-6)

    def test_mass_spd_on_grid(self, demo_arm):
        for q2 in np.linspace(-np.pi, np.pi, 25):
            M = demo_arm.mass_of(np.array([0.4, q2]))
            assert np.allclose(M, M.T)
            np.linalg.cholesky(M)

    def test_dmass_matches_finite_differences(self, demo_arm):
        rng = np.random.default_rng(4)
        h = 1e-6
        for _ in range(10):
            q = rng.uniform(-np.pi, np.pi, 2)
            dM = demo_arm.dmass_of(q)
            for i in range(2):
                e = np.zeros(2)
                e[i] = h
                fd = (demo_arm.mass_of(q + e) - demo_arm.mass_of(q - e)) / (2 * h)
                assert np.max(np.abs(dM[i] - fd)) <= 1e-6

    def test_rejects_nonpositive_parameters(self):
        with pytest.raises(ValidationError):
            two_link_arm([0.5, -0.4], [4.0, 2.5], [1.0, 1.0], 1e4, 0.0)
        with pytest.raises(ValidationError):
            two_link_arm([0.5, 0.4], [0.0, 2.5], [1.0, 1.0], 1e4, 0.0)
        with pytest.raises(ValidationError):
            two_link_arm([0.5, 0.4], [4.0, 2.5], [1.0, -1.0], 1e4, 0.0)


class TestEnergyConsistency:
    def test_free_swing_conserves_energy(self, gravity_arm):
        # undamped, unforced: the total energy is a first integral
        model = gravity_arm
        x0 = OpenLoopState(np.array([0.3, -0.2]), np.array([0.3, -0.2]),
                           np.zeros(2), np.array([0.5, -0.4]))

        def field(t, v):
            return open_loop_field(OpenLoopState.unpack(v, 2), np.zeros(2),
                                   np.zeros(2), model).pack()

        t, X = integrate(field, x0.pack(), 2e-5, 0.3)
        H0 = open_loop_energy(x0, model)
        H = [open_loop_energy(OpenLoopState.unpack(v, 2), model) for v in X[::500]]
        scale = max(abs(H0), 1.0)
        assert max(abs(h - H0) for h in H) <= 1e-8 * scale


class TestValidation:
    def test_rejects_asymmetric_mass(self):
        with pytest.raises(ValidationError):
            LinearRobotParams(n=2, M=np.array([[1.0, 0.5], [0.0, 1.0]]),
                              J=np.eye(2), K=np.eye(2), D=np.eye(2))

    def test_rejects_indefinite_stiffness(self):
        with pytest.raises(ValidationError):
            LinearRobotParams(n=1, M=1.0, J=1.0, K=-1.0, D=0.0)

    def test_rejects_negative_damping(self):
        with pytest.raises(ValidationError):
            LinearRobotParams(n=1, M=1.0, J=1.0, K=1.0, D=-0.1)

    def test_scalar_broadcast(self, paper_plant):
        assert paper_plant.M.shape == (1, 1)
        assert paper_plant.K[0, 0] == 1e6
