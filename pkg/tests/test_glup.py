import numpy as np
import pytest

import blindunmix as bu
from blindunmix.glup import (
    GramSolver,
    glup_dual_step,
    glup_x_step,
    glup_z_step,
)


def materialize_constraints(n_prime, n):
    """Explicit stacked constraint matrices for the consensus + sum-to-one
    rows, used as the dense oracle against the structured code paths."""
    a = np.vstack([np.eye(n_prime), np.ones((1, n_prime))])
    b = np.vstack([-np.eye(n_prime), np.zeros((1, n_prime))])
    c = np.vstack([np.zeros((n_prime, n)), np.ones((1, n))])
    return a, b, c


def cvx_reference(s, s_omega, mu):
    """Independent convex-programming oracle for the full program."""
    import cvxpy as cp

    x = cp.Variable((s_omega.shape[1], s.shape[1]))
    objective = 0.5 * cp.sum_squares(s - s_omega @ x) + mu * cp.sum(
        cp.norm(x, 2, axis=1)
    )
    problem = cp.Problem(
        cp.Minimize(objective), [x >= 0, cp.sum(x, axis=0) == 1]
    )
    problem.solve(solver=cp.CLARABEL)
    assert problem.status == "optimal"
    return problem.value, x.value


def random_problem(rng, bands=6, pixels=8, n_prime=5):
    scene = bu.SpectralScene(rng.uniform(0.0, 1.0, (bands, pixels)))
    idx = np.sort(rng.choice(pixels, n_prime, replace=False))
    return scene, bu.restrict_columns(scene, idx)


class TestConfig:
    def test_defaults(self):
        config = bu.GlupConfig()
        assert config.mu == 10.0
        assert config.rho == 100.0
        assert config.eps_primal == 1e-5
        assert config.max_iterations == 5000

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"mu": -1.0},
            {"rho": 0.0},
            {"eps_primal": 0.0},
            {"eps_dual": -1e-9},
            {"max_iterations": 0},
        ],
    )
    def test_rejects_bad_parameters(self, kwargs):
        with pytest.raises(bu.InvalidParameter):
            bu.GlupConfig(**kwargs)


class TestXStep:
    def test_normal_equation_residual(self, rng):
        scene, cand = random_problem(rng)
        n_prime, n = cand.size, scene.pixel_count
        rho = 3.0
        z = rng.uniform(0, 1, (n_prime, n))
        lam = rng.normal(0, 1, (n_prime + 1, n))
        x = glup_x_step(GramSolver(cand.columns, rho), cand, scene, z, lam, rho)

        a, b, c = materialize_constraints(n_prime, n)
        lhs = (cand.columns.T @ cand.columns + rho * a.T @ a) @ x
        rhs = cand.columns.T @ scene.data - a.T @ (lam + rho * (b @ z - c))
        assert np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs) <= 1e-8

    def test_single_candidate_closed_form(self, rng):
        scene, _ = random_problem(rng, n_prime=1)
        cand = bu.restrict_columns(scene, [2])
        n = scene.pixel_count
        rho = 2.5
        z = rng.uniform(0, 1, (1, n))
        lam = rng.normal(0, 1, (2, n))
        x = glup_x_step(GramSolver(cand.columns, rho), cand, scene, z, lam, rho)

        col = cand.columns[:, 0]
        numerator = (col @ scene.data - lam[0] + rho * z[0] - lam[1] + rho)
        expected = numerator / (col @ col + 2.0 * rho)
        np.testing.assert_allclose(x[0], expected, rtol=1e-12)

    def test_large_rho_pushes_toward_consensus(self, rng):
        scene, cand = random_problem(rng)
        n_prime, n = cand.size, scene.pixel_count
        z = np.full((n_prime, n), 1.0 / n_prime)  # feasible Z
        lam = np.zeros((n_prime + 1, n))
        rho = 1e9
        x = glup_x_step(GramSolver(cand.columns, rho), cand, scene, z, lam, rho)
        np.testing.assert_allclose(x.sum(axis=0), 1.0, atol=1e-6)
        np.testing.assert_allclose(x, z, atol=1e-6)


class TestZStep:
    def test_mu_zero_is_projection(self, rng):
        x = rng.normal(0, 1, (4, 6))
        lam = rng.normal(0, 1, (5, 6))
        z = glup_z_step(x, lam, mu=0.0, rho=2.0)
        np.testing.assert_array_equal(z, np.maximum(x + lam[:-1] / 2.0, 0.0))

    def test_strongly_negative_rows_vanish(self):
        x = np.full((3, 4), -5.0)
        lam = np.zeros((4, 4))
        np.testing.assert_array_equal(
            glup_z_step(x, lam, mu=1.0, rho=1.0), np.zeros((3, 4))
        )

    def test_matches_prox_example(self):
        x = np.array([[3.0, 4.0]])
        lam = np.zeros((2, 2))
        z = glup_z_step(x, lam, mu=2.5, rho=1.0)
        np.testing.assert_allclose(z, [[1.5, 2.0]], atol=1e-12)


class TestDualStep:
    def test_feasible_consensus_leaves_multipliers(self, rng):
        n_prime, n = 4, 6
        z = rng.dirichlet(np.ones(n_prime), size=n).T  # columns sum to one
        lam = rng.normal(0, 1, (n_prime + 1, n))
        new_lam, primal, dual = glup_dual_step(lam, z, z, z, rho=2.0)
        assert primal <= 1e-12
        assert dual == 0.0
        np.testing.assert_allclose(new_lam, lam, atol=1e-12)

    def test_stationary_z_zero_dual(self, rng):
        x = rng.uniform(0, 1, (4, 6))
        z = rng.uniform(0, 1, (4, 6))
        lam = np.zeros((5, 6))
        _, _, dual = glup_dual_step(lam, x, z, z, rho=3.0)
        assert dual == 0.0

    def test_dense_materialization_oracle(self, rng):
        n_prime, n, rho = 5, 7, 1.7
        x = rng.normal(0, 1, (n_prime, n))
        z = rng.normal(0, 1, (n_prime, n))
        z_old = rng.normal(0, 1, (n_prime, n))
        lam = rng.normal(0, 1, (n_prime + 1, n))
        new_lam, primal, dual = glup_dual_step(lam, x, z, z_old, rho)

        a, b, c = materialize_constraints(n_prime, n)
        residual = a @ x + b @ z - c
        assert abs(primal - np.linalg.norm(residual)) <= 1e-12
        assert abs(dual - np.linalg.norm(rho * a.T @ b @ (z - z_old))) <= 1e-12
        np.testing.assert_allclose(new_lam, lam + rho * residual, atol=1e-12)


class TestSolve:
    def test_identity_recovery(self, rng):
        scene = bu.SpectralScene(rng.uniform(0, 1, (20, 10)))
        cand = bu.all_pixels(scene)
        config = bu.GlupConfig(mu=0.0, rho=50.0, eps_primal=1e-7,
                               eps_dual=1e-7, max_iterations=50000)
        report = bu.glup_solve(scene, cand, config)
        assert report.converged
        assert np.linalg.norm(report.abundance.x - np.eye(10)) / 10 <= 1e-3

    def test_objective_matches_convex_oracle(self, rng):
        cvxpy = pytest.importorskip("cvxpy")
        spectra = rng.uniform(0.1, 1.0, (4, 2))
        mixed = bu.generate_abundances(2, 4, seed=11)
        abundances = np.hstack([np.eye(2), mixed])
        scene = bu.SpectralScene(spectra @ abundances)
        cand = bu.all_pixels(scene)
        config = bu.GlupConfig(mu=0.1, rho=1.0, eps_primal=1e-9,
                               eps_dual=1e-9, max_iterations=200000)
        report = bu.glup_solve(scene, cand, config)
        reference, _ = cvx_reference(scene.data, cand.columns, 0.1)
        assert abs(report.objective_value - reference) / abs(reference) <= 1e-5

    def test_feasibility_at_convergence(self, rng):
        scene, cand = random_problem(rng, bands=12, pixels=9, n_prime=6)
        config = bu.GlupConfig(mu=0.5, rho=5.0, eps_primal=1e-6,
                               eps_dual=1e-6, max_iterations=100000)
        report = bu.glup_solve(scene, cand, config)
        assert report.converged
        z = report.abundance.x
        assert z.min() >= 0.0
        n = scene.pixel_count
        assert np.abs(z.sum(axis=0) - 1.0).max() <= 1e-6 * np.sqrt(n)
        assert report.final_primal_residual <= 1e-6

    def test_monotone_residual_trend(self, rng):
        spectra = rng.uniform(0.1, 1.0, (30, 3))
        mixed = bu.generate_abundances(3, 27, seed=3)
        abundances = np.hstack([np.eye(3), mixed])
        clean = spectra @ abundances
        noisy = clean + 0.001 * rng.standard_normal(clean.shape)
        scene = bu.SpectralScene(noisy)
        cand = bu.all_pixels(scene)
        config = bu.GlupConfig(mu=1.0, rho=10.0, eps_primal=1e-8,
                               eps_dual=1e-8, max_iterations=3000)
        report = bu.glup_solve(scene, cand, config)
        combined = report.residual_history.max(axis=1)
        assert combined.size > 100
        window = 50
        for k in range(combined.size - window):
            assert combined[k + window] < combined[k]

    def test_structured_matches_materialized_iteration(self, rng):
        scene, cand = random_problem(rng)
        n_prime, n = cand.size, scene.pixel_count
        rho, mu = 2.0, 0.3
        z = rng.uniform(0, 1, (n_prime, n))
        lam = rng.normal(0, 1, (n_prime + 1, n))

        x = glup_x_step(GramSolver(cand.columns, rho), cand, scene, z, lam, rho)
        z_new = glup_z_step(x, lam, mu, rho)
        lam_new, primal, dual = glup_dual_step(lam, x, z_new, z, rho)

        a, b, c = materialize_constraints(n_prime, n)
        x_ref = np.linalg.solve(
            cand.columns.T @ cand.columns + rho * a.T @ a,
            cand.columns.T @ scene.data - a.T @ (lam + rho * (b @ z - c)),
        )
        np.testing.assert_allclose(x, x_ref, atol=1e-12)
        v = x_ref + lam[:n_prime] / rho
        z_ref = np.vstack(
            [bu.prox_positive_misto(v[i], mu / rho) for i in range(n_prime)]
        )
        np.testing.assert_allclose(z_new, z_ref, atol=1e-12)
        residual_ref = a @ x_ref + b @ z_ref - c
        np.testing.assert_allclose(lam_new, lam + rho * residual_ref, atol=1e-12)
        assert abs(primal - np.linalg.norm(residual_ref)) <= 1e-12

    def test_group_sparsity_at_oracle_mu(self, rng):
        cvxpy = pytest.importorskip("cvxpy")
        spectra = rng.uniform(0.1, 1.0, (6, 2))
        mixed = bu.generate_abundances(2, 4, seed=21)
        abundances = np.hstack([np.eye(2), mixed])
        scene = bu.SpectralScene(spectra @ abundances)
        cand = bu.all_pixels(scene)

        mu_max = None
        for mu in (0.05, 0.1, 0.2, 0.4, 0.8, 1.6):
            _, x_ref = cvx_reference(scene.data, cand.columns, mu)
            support = set(np.where(np.linalg.norm(x_ref, axis=1) > 1e-5)[0])
            if support == {0, 1}:
                mu_max = mu
                break
        assert mu_max is not None, "oracle never reached the minimal support"

        config = bu.GlupConfig(mu=mu_max, rho=1.0, eps_primal=1e-8,
                               eps_dual=1e-8, max_iterations=200000)
        report = bu.glup_solve(scene, cand, config)
        norms = np.linalg.norm(report.abundance.x, axis=1)
        assert set(np.where(norms > 1e-5)[0]) == {0, 1}

    def test_deterministic(self, rng):
        scene, cand = random_problem(rng)
        config = bu.GlupConfig(mu=0.2, rho=2.0, max_iterations=500)
        first = bu.glup_solve(scene, cand, config)
        second = bu.glup_solve(scene, cand, config)
        np.testing.assert_array_equal(first.abundance.x, second.abundance.x)
        assert first.objective_value == second.objective_value

    def test_dimension_mismatch(self, rng):
        scene = bu.SpectralScene(rng.uniform(0, 1, (4, 6)))
        other = bu.SpectralScene(rng.uniform(0, 1, (5, 6)))
        cand = bu.all_pixels(other)
        with pytest.raises(bu.DimensionError):
            bu.glup_solve(scene, cand)

    def test_candidate_scene_mismatch(self, rng):
        scene = bu.SpectralScene(rng.uniform(0, 1, (4, 6)))
        other = bu.SpectralScene(rng.uniform(0, 1, (4, 6)))
        cand = bu.all_pixels(other)
        with pytest.raises(bu.InvalidInput):
            bu.glup_solve(scene, cand)

    def test_report_wraps_z_iterate(self, rng):
        scene, cand = random_problem(rng)
        report = bu.glup_solve(scene, cand, bu.GlupConfig(max_iterations=50))
        np.testing.assert_array_equal(report.abundance.x, report.state.z)
        assert report.residual_history.shape == (report.iterations, 2)
