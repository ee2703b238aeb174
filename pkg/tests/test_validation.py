import numpy as np
import pytest
from scipy import sparse

from conftest import dense_laplacian
from opguide.core import flatten
from opguide.guidance import GuidedWeights, GuidingOperator, KernelParams, build_guiding_operator
from opguide.sampling import SamplingOperator, downsample, upsample_adjoint
from opguide.synthetic import blocks_scene
from opguide.validation import (
    MAX_DENSE_DIM,
    DenseSystem,
    SingularSystemError,
    assemble_dense,
    schur_limit_check,
    solve_constrained,
    solve_tikhonov,
    symmetric_solve,
)


def small_system(size=8, factor=2, seed=5, kind="tv") -> tuple[DenseSystem, SamplingOperator]:
    target, guide = blocks_scene(size, size, seed=seed)
    samp = SamplingOperator(size, size, factor)
    guiding, _ = build_guiding_operator(guide, KernelParams(kind=kind))
    sample = upsample_adjoint(samp, downsample(samp, flatten(target)))
    return assemble_dense(guiding, samp, sample), samp


class TestAssembleDense:
    def test_matches_brute_force_laplacian(self, rng):
        _, guide = blocks_scene(6, 6, seed=1)
        samp = SamplingOperator(6, 6, 2)
        for degree in (1, 2):
            guiding, _ = build_guiding_operator(guide, KernelParams(kind="tv"), poly_degree=degree)
            system = assemble_dense(guiding, samp)
            expected = dense_laplacian(guiding.weights.matrix.toarray(), degree)
            assert np.allclose(system.laplacian, expected, rtol=0, atol=1e-12)

    def test_laplacian_symmetric_and_dc_free(self):
        system, _ = small_system()
        assert np.max(np.abs(system.laplacian - system.laplacian.T)) <= 1e-14
        assert np.max(np.abs(system.laplacian @ np.ones(system.n))) <= 1e-8

    def test_projector_rank(self):
        system, samp = small_system(size=4, factor=2)
        assert system.sample_mask.sum() == 4
        assert samp.lr_size == 4

    def test_sample_outside_mask_zeroed(self, rng):
        _, guide = blocks_scene(4, 4, seed=2)
        samp = SamplingOperator(4, 4, 2)
        guiding, _ = build_guiding_operator(guide, KernelParams(kind="tv"))
        dirty = rng.standard_normal(16)
        system = assemble_dense(guiding, samp, dirty)
        assert np.max(np.abs(system.sample[~system.sample_mask])) == 0.0
        assert np.array_equal(system.sample[system.sample_mask], dirty[samp.sample_mask])

    def test_size_cap(self):
        over = int(np.ceil(np.sqrt(MAX_DENSE_DIM))) + 1
        _, guide = blocks_scene(over, over, seed=0)
        samp = SamplingOperator(over, over, 2)
        guiding, _ = build_guiding_operator(guide, KernelParams(kind="tv"))
        with pytest.raises(ValueError, match="capped"):
            assemble_dense(guiding, samp)


class TestSymmetricSolve:
    def test_matches_numpy_on_spd(self, rng):
        for _ in range(10):
            m = rng.standard_normal((12, 12))
            a = m @ m.T + 12 * np.eye(12)
            b = rng.standard_normal(12)
            assert np.allclose(symmetric_solve(a, b), np.linalg.solve(a, b), rtol=1e-10, atol=1e-12)

    def test_matches_numpy_on_indefinite(self, rng):
        for _ in range(10):
            m = rng.standard_normal((10, 10))
            a = m + m.T  # symmetric, generally indefinite
            b = rng.standard_normal(10)
            assert np.allclose(symmetric_solve(a, b), np.linalg.solve(a, b), rtol=1e-8, atol=1e-10)

    def test_multiple_right_hand_sides(self, rng):
        m = rng.standard_normal((8, 8))
        a = m @ m.T + 8 * np.eye(8)
        b = rng.standard_normal((8, 3))
        assert np.allclose(symmetric_solve(a, b), np.linalg.solve(a, b), rtol=1e-10, atol=1e-12)

    def test_singular_matrix_raises(self):
        a = np.zeros((4, 4))
        with pytest.raises(SingularSystemError) as info:
            symmetric_solve(a, np.ones(4))
        assert info.value.min_pivot == 0.0

    def test_rank_deficient_raises(self):
        v = np.arange(1.0, 5.0)
        a = np.outer(v, v)
        with pytest.raises(SingularSystemError):
            symmetric_solve(a, v)


class TestSolveTikhonov:
    def test_matches_numpy_solve(self, rng):
        system, _ = small_system()
        for rho in (1e-1, 1e-3):
            a = np.diag(system.sample_mask.astype(float)) + rho * system.laplacian
            expected = np.linalg.solve(a, system.sample)
            assert np.allclose(solve_tikhonov(system, rho), expected, rtol=1e-9, atol=1e-12)

    def test_requires_positive_rho(self):
        system, _ = small_system()
        with pytest.raises(ValueError):
            solve_tikhonov(system, 0.0)

    def test_zero_laplacian_error_path(self):
        # identity weights make L = 0, so the off-sample block is singular
        samp = SamplingOperator(4, 4, 2)
        w = GuidedWeights(width=4, height=4, matrix=sparse.identity(16, format="csr"))
        guiding = GuidingOperator(weights=w)
        system = assemble_dense(guiding, samp, np.ones(16) * samp.sample_mask)
        with pytest.raises(SingularSystemError):
            solve_tikhonov(system, 1e-3)

    def test_larger_rho_damps_solution(self):
        system, _ = small_system()
        assert np.linalg.norm(solve_tikhonov(system, 10.0)) <= np.linalg.norm(
            solve_tikhonov(system, 0.1)
        )

    def test_linear_error_bound_from_measured_constant(self):
        system, _ = small_system()
        x_star = solve_constrained(system)
        c = np.linalg.norm(solve_tikhonov(system, 1e-2) - x_star) / 1e-2
        for rho in (1e-3, 1e-4):
            err = np.linalg.norm(solve_tikhonov(system, rho) - x_star)
            assert err <= 1.1 * c * rho


class TestSolveConstrained:
    def test_feasibility_exact(self):
        system, _ = small_system()
        x = solve_constrained(system)
        assert np.array_equal(x[system.sample_mask], system.sample[system.sample_mask])

    def test_stationarity(self):
        system, _ = small_system()
        x = solve_constrained(system)
        residual = (system.laplacian @ x)[~system.sample_mask]
        assert np.max(np.abs(residual)) <= 1e-10

    def test_minimizes_energy_over_feasible_perturbations(self, rng):
        system, _ = small_system()
        x = solve_constrained(system)
        base = x @ system.laplacian @ x
        free = ~system.sample_mask
        for _ in range(50):
            z = x.copy()
            z[free] += rng.standard_normal(free.sum())
            assert z @ system.laplacian @ z >= base - 1e-10


class TestSchurLimit:
    def test_slopes_and_limit_on_8x8(self):
        system, _ = small_system()
        report = schur_limit_check(system, rhos=(1e-2, 1e-3, 1e-4))
        assert 0.9 <= report.slope_error <= 1.1
        assert 1.8 <= report.slope_defect <= 2.2
        assert report.x1_limit_gap <= report.x1_limit_bound

    def test_errors_decrease_with_rho(self):
        system, _ = small_system(kind="bilateral")
        report = schur_limit_check(system)
        assert report.rhos == sorted(report.rhos, reverse=True)
        assert all(b < a for a, b in zip(report.errors, report.errors[1:]))
        assert all(b < a for a, b in zip(report.defects, report.defects[1:]))

    def test_tikhonov_family_is_linear_in_rho(self):
        # second difference of rho -> x(rho) vanishes to first order
        system, _ = small_system()
        rho, delta = 1e-3, 1e-4
        x0 = solve_tikhonov(system, rho)
        x1 = solve_tikhonov(system, rho + delta)
        x2 = solve_tikhonov(system, rho + 2 * delta)
        second = np.linalg.norm(x2 - 2 * x1 + x0)
        spread = np.linalg.norm(x2 - x0)
        assert second <= 0.01 * spread

    def test_csv_format(self):
        system, _ = small_system()
        report = schur_limit_check(system, rhos=(1e-2, 1e-3))
        lines = report.to_csv().splitlines()
        assert lines[0] == "kind,rho,value"
        assert len(lines) == 1 + 2 * 2 + 4
        for line in lines[1:]:
            kind, rho, value = line.split(",")
            float(value)
            if rho:
                float(rho)

    def test_singular_free_block_reports_singular_value(self):
        samp = SamplingOperator(4, 4, 2)
        w = GuidedWeights(width=4, height=4, matrix=sparse.identity(16, format="csr"))
        system = assemble_dense(GuidingOperator(weights=w), samp, np.ones(16) * samp.sample_mask)
        with pytest.raises(SingularSystemError, match="singular value"):
            schur_limit_check(system)
