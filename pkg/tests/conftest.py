import numpy as np
import pytest

from flexjoint import LinearRobotParams, two_link_arm


def rand_spd(rng, n, lo=0.5, hi=2.0):
    """Random symmetric positive definite matrix with bounded spectrum."""
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    return q @ np.diag(rng.uniform(lo, hi, n)) @ q.T


def rand_plant(rng, n, k_scale=1e3):
    """Random admissible plant with stiffness around k_scale."""
    return LinearRobotParams(
        n=n,
        M=rand_spd(rng, n, 0.5, 4.0),
        J=rand_spd(rng, n, 0.5, 4.0),
        K=k_scale * rand_spd(rng, n, 0.5, 2.0),
        D=rand_spd(rng, n, 0.1, 1.0),
    )


def rand_admissible_shaping(rng, plant):
    """Random (J_e, K_e) for which D_e = D K^-1 K_e stays symmetric.

    Scalar multiples of K keep the damping admissible for any D, which is
    the generic way to satisfy the symmetry requirement.
    """
    J_e = rand_spd(rng, plant.n, 0.3, 3.0)
    K_e = float(rng.uniform(0.3, 3.0)) * plant.K
    return J_e, K_e


@pytest.fixture
def paper_plant():
    """Single-joint benchmark plant used throughout the studies."""
    return LinearRobotParams(n=1, M=3.0, J=3.0, K=1e6, D=1.0)


@pytest.fixture
def demo_arm():
    """Horizontal two-link arm with elastic joints and no transmission damping."""
    return two_link_arm(link_lengths=[0.5, 0.4], link_masses=[4.0, 2.5],
                        motor_inertias=[1.0, 1.0], joint_stiffness=1e4,
                        joint_damping=0.0)


@pytest.fixture
def gravity_arm():
    return two_link_arm(link_lengths=[0.5, 0.4], link_masses=[4.0, 2.5],
                        motor_inertias=[1.0, 1.0], joint_stiffness=1e4,
                        joint_damping=0.0, gravity=True)
