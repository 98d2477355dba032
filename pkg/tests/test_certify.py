from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import FLAT, REF_KERNEL, admissible_ensemble, random_ensemble, two_particles
from mtflock.certify import (
    admissible,
    check_flocking_envelope,
    check_kernel_lemmas,
    check_recursions,
    check_velocity_tail,
    frobenius_series,
    triple_delta_sum,
)
from mtflock.dynamics import SimParams, simulate
from mtflock.errors import PreconditionError
from mtflock.kernel import Kernel
from mtflock.state import Ensemble, delta_frobenius

BETA_SMALL = Kernel(0.1, 0.5, 0.01)


def brute_triple(x: np.ndarray, v: np.ndarray) -> float:
    n = len(x)
    total = 0.0
    for i in range(n):
        for j in range(n):
            for l in range(n):
                total += (
                    np.linalg.norm(v[l] - v[i]) * np.linalg.norm(v[i] - v[j]) * np.linalg.norm(x[i] - x[j])
                )
    return total


class TestAdmissible:
    def test_budget_example(self):
        m = REF_KERNEL.flocking_radius()
        x = np.array([[0.0], [0.01 / math.sqrt(2.0)]])
        ens = Ensemble(x, [[0.0], [0.0]])
        cert = admissible(ens, REF_KERNEL, 1.0)
        assert cert.dx0 == pytest.approx(0.01, rel=1e-14)
        assert REF_KERNEL.scaled_phi_lip() == pytest.approx(9.2376, rel=1e-5)
        assert cert.budget == pytest.approx(0.014142, abs=1e-6)
        k = REF_KERNEL.scaled_phi_lip()
        assert cert.budget == pytest.approx((m - 0.01) - k / 2 * (m * m - 1e-4), rel=1e-14)
        assert cert.admissible and cert.margins == (m - cert.dx0, cert.budget - cert.dv0)

    def test_budget_edge(self):
        m = REF_KERNEL.flocking_radius()
        below = Ensemble([[0.0], [0.01 / math.sqrt(2.0)]], [[0.0], [0.0140 / math.sqrt(2.0)]])
        above = Ensemble([[0.0], [0.01 / math.sqrt(2.0)]], [[0.0], [0.0142 / math.sqrt(2.0)]])
        assert admissible(below, REF_KERNEL, 1.0).admissible
        assert not admissible(above, REF_KERNEL, 1.0).admissible
        at_m = Ensemble([[0.0], [m / math.sqrt(2.0)]], [[0.0], [1e-9]])
        cert = admissible(at_m, REF_KERNEL, 1.0)
        assert not cert.admissible
        assert cert.budget == pytest.approx(0.0, abs=1e-15)

    def test_constant_kernel_always_admissible(self, rng):
        ens = Ensemble(rng.normal(size=(5, 2)) * 100, rng.normal(size=(5, 2)) * 100)
        cert = admissible(ens, FLAT, 1.0)
        assert cert.admissible and math.isinf(cert.m_bound) and cert.psi_at_m == 1.0


class TestRecursions:
    def test_constant_kernel_tight(self):
        traj = simulate(two_particles(), FLAT, SimParams(1.0, 0.1, 30))
        res = check_recursions(traj)
        assert res.passed
        dv = frobenius_series(traj.velocities)
        np.testing.assert_allclose(dv[1:] / dv[:-1], 0.9, rtol=1e-13)
        np.testing.assert_allclose(res.velocity_slack, 0.0, atol=1e-14)

    def test_equal_velocities(self, rng):
        v = np.tile([1.0, -2.0], (4, 1))
        traj = simulate(Ensemble(rng.normal(size=(4, 2)), v), REF_KERNEL, SimParams(1.0, 0.1, 20))
        res = check_recursions(traj)
        assert res.passed
        assert np.all(res.velocity_slack == 0.0)

    def test_inflated_step_is_flagged(self):
        traj = simulate(admissible_ensemble(0.01, seed=1), BETA_SMALL, SimParams(1.0, 0.01, 50))
        traj.velocities[17] *= 2.0
        res = check_recursions(traj)
        assert not res.passed and res.first_violation == 17

    def test_random_admissible_runs(self):
        for seed in range(10):
            traj = simulate(admissible_ensemble(0.005, n=8, d=3, seed=seed), Kernel(0.1, 0.5, 0.005), SimParams(1.0, 0.01, 300))
            assert check_recursions(traj).passed

    def test_inadmissible_runs_still_satisfy_one_step_bounds(self):
        # the one-step recursions do not need admissibility
        for seed in range(5):
            g = np.random.default_rng(seed)
            ens = Ensemble(g.normal(size=(6, 2)) * 3, g.normal(size=(6, 2)))
            traj = simulate(ens, REF_KERNEL, SimParams(1.0, 0.05, 200))
            assert check_recursions(traj).passed


class TestEnvelope:
    def test_constant_kernel_equality(self):
        traj = simulate(two_particles(), FLAT, SimParams(1.0, 0.1, 40))
        cert = admissible(traj.ensemble(0), FLAT, 1.0)
        res = check_flocking_envelope(traj, cert)
        assert res.passed
        assert abs(res.worst_velocity_margin) < 1e-12

    def test_equal_velocities(self, rng):
        ens = Ensemble(rng.normal(size=(4, 2)) * 1e-3, np.ones((4, 2)))
        traj = simulate(ens, REF_KERNEL, SimParams(1.0, 0.1, 30))
        assert check_flocking_envelope(traj, admissible(ens, REF_KERNEL, 1.0)).passed

    def test_admissible_run(self):
        ens = admissible_ensemble(0.01, n=20, d=4, seed=0)
        traj = simulate(ens, BETA_SMALL, SimParams(1.0, 0.01, 2000))
        res = check_flocking_envelope(traj, admissible(ens, BETA_SMALL, 1.0))
        assert res.passed and res.worst_position_margin > 0.0

    def test_inadmissible_is_precondition_error(self):
        ens = admissible_ensemble(0.01, seed=0, fx=1.05)
        traj = simulate(ens, BETA_SMALL, SimParams(1.0, 0.01, 5))
        with pytest.raises(PreconditionError):
            check_flocking_envelope(traj, admissible(ens, BETA_SMALL, 1.0))

    def test_violation_detected(self):
        ens = admissible_ensemble(0.01, seed=2)
        traj = simulate(ens, BETA_SMALL, SimParams(1.0, 0.01, 100))
        traj.velocities[60] = traj.velocities[0]
        res = check_flocking_envelope(traj, admissible(ens, BETA_SMALL, 1.0))
        assert not res.passed and res.first_violation == 60


class TestTail:
    def test_two_particle_closed_form(self):
        traj = simulate(two_particles(), FLAT, SimParams(1.0, 0.1, 300))
        cert = admissible(traj.ensemble(0), FLAT, 1.0)
        res = check_velocity_tail(traj, cert)
        assert res.passed
        bound = math.sqrt(2.0) * 2 * math.sqrt(2.0)
        assert bound == pytest.approx(4.0)
        assert res.worst_margin == pytest.approx(0.75, abs=1e-9)  # 0.9^n against 4 * 0.9^n

    def test_equal_velocities(self):
        ens = Ensemble([[0.0], [0.001]], [[1.0], [1.0]])
        traj = simulate(ens, REF_KERNEL, SimParams(1.0, 0.1, 3))
        assert check_velocity_tail(traj, admissible(ens, REF_KERNEL, 1.0)).passed

    def test_admissible_run(self):
        ens = admissible_ensemble(0.01, n=20, d=4, seed=0)
        traj = simulate(ens, BETA_SMALL, SimParams(1.0, 0.01, 3000))
        assert check_velocity_tail(traj, admissible(ens, BETA_SMALL, 1.0)).passed

    def test_not_converged(self):
        ens = admissible_ensemble(0.01, seed=0)
        traj = simulate(ens, BETA_SMALL, SimParams(1.0, 0.01, 100))
        with pytest.raises(PreconditionError):
            check_velocity_tail(traj, admissible(ens, BETA_SMALL, 1.0))


class TestKernelLemmas:
    def test_constant_kernel(self, rng):
        ens = random_ensemble(rng, n=5, d=2)
        res = check_kernel_lemmas(ens, FLAT)
        assert res.weight_lipschitz >= 0.0 and res.passed

    def test_two_particle_example(self):
        ens = Ensemble([[0.0], [1.0]], [[0.0], [1.0]])
        assert triple_delta_sum(ens.positions, ens.velocities) == pytest.approx(2.0)
        assert 2 * delta_frobenius(ens.positions) * delta_frobenius(ens.velocities) ** 2 == pytest.approx(4 * math.sqrt(2.0))
        assert check_kernel_lemmas(ens, REF_KERNEL).triple_sum == pytest.approx(4 * math.sqrt(2.0) - 2.0, abs=1e-12)

    def test_single_particle(self):
        res = check_kernel_lemmas(Ensemble([[1.0]], [[2.0]]), REF_KERNEL)
        assert res.triple_sum == 0.0 and res.passed

    def test_triple_sum_against_brute_force(self, rng):
        for _ in range(50):
            ens = random_ensemble(rng)
            assert triple_delta_sum(ens.positions, ens.velocities) == pytest.approx(
                brute_triple(ens.positions, ens.velocities), rel=1e-12, abs=1e-12
            )

    def test_random_ensembles(self, rng):
        for _ in range(300):
            ens = random_ensemble(rng, scale=float(rng.uniform(0.01, 5.0)))
            k = Kernel(0.1, 0.5, float(rng.uniform(0.0, 2.0)))
            assert check_kernel_lemmas(ens, k).passed
