import numpy as np
import pytest

from inhandpush.lcp import (
    LCPProblem,
    certification_residual,
    reduce_equalities,
    solve_enumerate,
    solve_lemke,
    solve_pgs,
    verify_solution,
)

ALL_SOLVERS = [solve_lemke, solve_pgs, solve_enumerate]


def random_pd_problem(rng, n, n_eq=0, scale=1.0):
    A = rng.standard_normal((n, n))
    M = A @ A.T + n * np.eye(n)
    q = scale * rng.standard_normal(n)
    return LCPProblem(M, q, n_eq)


class TestCertification:
    def test_exact_solution_residual_zero(self):
        p = LCPProblem([[2.0]], [-4.0])
        assert certification_residual(p, [2.0]) == 0.0

    def test_negative_z_flagged(self):
        p = LCPProblem([[1.0]], [1.0])
        ok, r = verify_solution(p, [-1e-3])
        assert not ok
        assert r >= 1e-3 / 2 * 0.9

    def test_scaling_tolerates_stiff_problems(self):
        # a solution good to machine precision on a 1e9-conditioned system
        # must certify even though absolute slack is ~1e-7
        big = 1e9
        p = LCPProblem([[big]], [-big])
        z = np.array([1.0 + 1e-16])
        ok, _ = verify_solution(p, z, tol=1e-9)
        assert ok

    def test_equality_rows_use_abs_w(self):
        p = LCPProblem([[1.0]], [-3.0], n_eq=1)
        assert verify_solution(p, [3.0])[0]
        assert not verify_solution(p, [2.0])[0]


class TestHandProblems:
    @pytest.mark.parametrize("solver", ALL_SOLVERS)
    def test_scalar(self, solver):
        sol = solver(LCPProblem([[2.0]], [-4.0]))
        assert sol.solved
        np.testing.assert_allclose(sol.z, [2.0], atol=1e-9)

    @pytest.mark.parametrize("solver", ALL_SOLVERS)
    def test_nonnegative_q_gives_zero(self, solver):
        sol = solver(LCPProblem(np.zeros((3, 3)), [0.5, 0.0, 2.0]))
        assert sol.solved
        np.testing.assert_array_equal(sol.z, 0.0)

    @pytest.mark.parametrize("solver", ALL_SOLVERS)
    def test_mixed_equality_row(self, solver):
        # row 0 is an equality: z0 + z1 = 2; row 1 complementarity
        # unique interior solution z = (1, 1)
        p = LCPProblem([[1.0, 1.0], [-1.0, 2.0]], [-2.0, -1.0], n_eq=1)
        sol = solver(p)
        assert sol.solved
        np.testing.assert_allclose(sol.z, [1.0, 1.0], atol=1e-8)

    def test_lemke_handles_known_degenerate_cycler(self):
        # classic small problem where non-lexicographic pivoting can cycle
        M = np.array([[1.0, 2.0, 0.0], [0.0, 1.0, 2.0], [2.0, 0.0, 1.0]])
        q = np.array([-1.0, -1.0, -1.0])
        sol = solve_lemke(LCPProblem(M, q))
        assert sol.solved
        assert sol.residual <= 1e-9

    def test_no_solution_reports_ray(self):
        # w = -z - 1 can never be nonnegative; must be reported, not patched
        sol = solve_lemke(LCPProblem([[-1.0]], [-1.0]))
        assert sol.status == "ray_termination"
        assert not sol.solved

    def test_enumerate_flags_continuum(self):
        # z = (1, t) solves for every t >= 0: zero row/column degeneracy
        p = LCPProblem([[1.0, 0.0], [0.0, 0.0]], [-1.0, 0.0])
        sol = solve_enumerate(p)
        assert sol.solved
        assert sol.multiple
        np.testing.assert_allclose(sol.z[0], 1.0, atol=1e-9)

    def test_enumerate_flags_distinct_vertices(self):
        # rank-1 M: solutions (1,0) and (0,1) are both complementary
        p = LCPProblem([[1.0, 1.0], [1.0, 1.0]], [-1.0, -1.0])
        sol = solve_enumerate(p)
        assert sol.solved
        assert sol.multiple

    def test_unique_solution_not_flagged(self):
        rng = np.random.default_rng(0)
        sol = solve_enumerate(random_pd_problem(rng, 4))
        assert sol.solved
        assert not sol.multiple

    def test_enumerate_refuses_large_problems(self):
        with pytest.raises(ValueError, match="enumeration"):
            solve_enumerate(LCPProblem(np.eye(25), np.ones(25)))


class TestSolverAgreement:
    def test_random_pd_all_solvers_match(self):
        rng = np.random.default_rng(42)
        for trial in range(25):
            n = int(rng.integers(1, 8))
            p = random_pd_problem(rng, n)
            ref = solve_enumerate(p)
            assert ref.solved
            for solver in (solve_lemke, solve_pgs):
                sol = solver(p)
                assert sol.solved, f"trial {trial}: {solver.__name__} {sol.status}"
                np.testing.assert_allclose(sol.z, ref.z, atol=1e-5,
                                           err_msg=f"trial {trial}")

    def test_random_mixed_problems(self):
        rng = np.random.default_rng(43)
        for _ in range(15):
            n = int(rng.integers(2, 8))
            n_eq = int(rng.integers(1, n))
            p = random_pd_problem(rng, n, n_eq=n_eq)
            ref = solve_enumerate(p)
            sol = solve_lemke(p)
            assert ref.solved and sol.solved
            np.testing.assert_allclose(sol.z, ref.z, atol=1e-5)

    def test_badly_scaled_problem_certifies(self):
        # entries spanning 8 orders of magnitude; equilibration earns its keep
        M = np.array([[1e8, 1e2], [1e2, 1.0]])
        z_true = np.array([1.0, 2.0])
        q = -M @ z_true
        sol = solve_lemke(LCPProblem(M, q))
        assert sol.solved
        np.testing.assert_allclose(sol.z, z_true, rtol=1e-6)


class TestReduction:
    def test_roundtrip_against_direct(self):
        rng = np.random.default_rng(5)
        p = random_pd_problem(rng, 6, n_eq=2)
        M_red, q_red, expand = reduce_equalities(p)
        assert M_red.shape == (4, 4)
        sol_red = solve_lemke(LCPProblem(M_red, q_red))
        assert sol_red.solved
        z = expand(sol_red.z)
        assert verify_solution(p, z)[0]

    def test_singular_equality_block_rejected(self):
        M = np.zeros((2, 2))
        M[0, 1] = 1.0
        with pytest.raises(ValueError, match="singular"):
            reduce_equalities(LCPProblem(M, np.ones(2), n_eq=1))


class TestPGS:
    def test_zero_diagonal_rejected_by_name(self):
        M = np.array([[1.0, 1.0], [1.0, 0.0]])
        with pytest.raises(ValueError, match=r"rows \[1\]"):
            solve_pgs(LCPProblem(M, -np.ones(2)))

    def test_reports_iteration_limit(self):
        p = LCPProblem([[-1.0]], [-1.0])
        sol = solve_pgs(p, max_iter=50)
        assert sol.status == "iteration_limit"


class TestDeterminism:
    def test_repeat_solves_bitwise_identical(self):
        rng = np.random.default_rng(9)
        p = random_pd_problem(rng, 7, n_eq=2)
        ref = solve_lemke(p)
        for _ in range(5):
            again = solve_lemke(LCPProblem(p.M.copy(), p.q.copy(), p.n_eq))
            assert np.array_equal(again.z, ref.z)
            assert again.iterations == ref.iterations


class TestValidation:
    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            LCPProblem(np.eye(3), np.ones(2))

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            LCPProblem([[np.nan]], [1.0])

    def test_n_eq_range(self):
        with pytest.raises(ValueError, match="n_eq"):
            LCPProblem(np.eye(2), np.ones(2), n_eq=3)
