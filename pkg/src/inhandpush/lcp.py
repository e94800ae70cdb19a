"""Mixed linear complementarity solvers.

Problem form: find z with

    w = M z + q
    w_i = 0                      for i < n_eq   (equality rows, z_i free)
    z_i >= 0, w_i >= 0, z_i w_i = 0   otherwise

Solvers:

* :func:`solve_lemke` -- complementary pivoting with lexicographic
  tie-breaking; the workhorse. Degenerate pivots and rays trigger a short
  diagonal-regularization ladder, then a PGS fallback; every candidate is
  certified against the ORIGINAL problem before being returned as solved.
  Ray termination that survives the ladder is reported as such, never
  silently converted into a solution.
* :func:`solve_pgs` -- projected Gauss-Seidel, cheap fallback and
  cross-check; needs nonzero diagonals.
* :func:`solve_enumerate` -- exhaustive basis enumeration, exponential,
  the ground-truth oracle for small problems. Flags solution multiplicity
  (distinct certified bases, or a consistent rank-deficient basis whose
  solution set is a continuum).

All tolerances are scaled by the problem norm: a residual r certifies at
tolerance t if r <= t after normalizing z-violations by 1 + |z|_inf and
w-violations by 1 + |q|_inf + |M|_inf |z|_inf. Unscaled tolerances would
spuriously reject well-solved systems whose entries span many orders of
magnitude, which contact problems with stiff regularization routinely do.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

DEFAULT_TOL = 1e-9


@dataclass
class LCPProblem:
    """M, q, and the number of leading equality rows (their z are free)."""

    M: np.ndarray
    q: np.ndarray
    n_eq: int = 0

    def __post_init__(self):
        self.M = np.asarray(self.M, dtype=float)
        self.q = np.asarray(self.q, dtype=float).reshape(-1)
        n = self.q.shape[0]
        if self.M.shape != (n, n):
            raise ValueError(f"M shape {self.M.shape} does not match q length {n}")
        if not (np.all(np.isfinite(self.M)) and np.all(np.isfinite(self.q))):
            raise ValueError("M and q must be finite")
        self.n_eq = int(self.n_eq)
        if not 0 <= self.n_eq <= n:
            raise ValueError(f"n_eq = {self.n_eq} out of range for n = {n}")

    @property
    def n(self) -> int:
        return self.q.shape[0]


@dataclass
class LCPSolution:
    z: np.ndarray
    w: np.ndarray
    status: str  # 'solved' | 'ray_termination' | 'iteration_limit' | 'failed' | 'rejected'
    iterations: int
    residual: float
    solver: str
    multiple: bool = False

    @property
    def solved(self) -> bool:
        return self.status == "solved"


def certification_residual(problem: LCPProblem, z: np.ndarray) -> float:
    """Scaled max violation of sign, feasibility and complementarity."""
    z = np.asarray(z, dtype=float).reshape(problem.n)
    w = problem.M @ z + problem.q
    s_z = 1.0 + np.max(np.abs(z), initial=0.0)
    m_inf = np.max(np.sum(np.abs(problem.M), axis=1), initial=0.0)
    s_w = 1.0 + np.max(np.abs(problem.q), initial=0.0) + m_inf * np.max(np.abs(z), initial=0.0)
    m = problem.n_eq
    r = 0.0
    if m:
        r = np.max(np.abs(w[:m]), initial=0.0) / s_w
    if m < problem.n:
        zc, wc = z[m:], w[m:]
        r = max(r, np.max(-zc, initial=0.0) / s_z)
        r = max(r, np.max(-wc, initial=0.0) / s_w)
        r = max(r, np.max(np.abs(zc * wc), initial=0.0) / (s_z * s_w))
    return float(r)


def verify_solution(problem: LCPProblem, z, tol: float = DEFAULT_TOL) -> tuple[bool, float]:
    r = certification_residual(problem, z)
    return r <= tol, r


def reduce_equalities(problem: LCPProblem) -> tuple[np.ndarray, np.ndarray, Callable]:
    """Eliminate the leading equality block by a Schur complement.

    Returns (M_red, q_red, expand) where expand maps a reduced z back to
    the full vector including the recovered free variables. Raises
    ValueError if the equality block is singular (the free variables
    would be underdetermined).
    """
    m, n = problem.n_eq, problem.n
    if m == 0:
        return problem.M, problem.q, lambda zc: np.asarray(zc, dtype=float).copy()
    A = problem.M[:m, :m]
    B = problem.M[:m, m:]
    C = problem.M[m:, :m]
    D = problem.M[m:, m:]
    a = problem.q[:m]
    b = problem.q[m:]
    try:
        AinvB = np.linalg.solve(A, B) if n > m else np.zeros((m, 0))
        Ainva = np.linalg.solve(A, a)
    except np.linalg.LinAlgError as e:
        raise ValueError("equality block of the mixed LCP is singular") from e
    M_red = D - C @ AinvB
    q_red = b - C @ Ainva

    def expand(zc):
        zc = np.asarray(zc, dtype=float).reshape(n - m)
        z = np.empty(n)
        z[:m] = -(AinvB @ zc + Ainva)
        z[m:] = zc
        return z

    return M_red, q_red, expand


def _ruiz_scale(M: np.ndarray, sweeps: int = 3) -> np.ndarray:
    """Symmetric equilibration factors d, for solving with D M D, D q."""
    n = M.shape[0]
    d = np.ones(n)
    if n == 0:
        return d
    Ms = M
    for _ in range(sweeps):
        rn = np.max(np.abs(Ms), axis=1)
        rn = np.where(rn > 0.0, np.sqrt(rn), 1.0)
        d = d / rn
        Ms = M * np.outer(d, d)
    return d


def _lex_argmin(T: np.ndarray, rows: np.ndarray, col: int, n: int) -> int:
    """Row index minimizing (rhs, B^-1 row)/pivot lexicographically.

    The w-columns of the tableau hold the current basis inverse, whose
    rows are independent, so the lexicographic minimum is unique and the
    pivot sequence is deterministic even under heavy degeneracy.
    """
    den = T[rows, col][:, None]
    num = np.hstack([T[rows, 2 * n + 1:2 * n + 2], T[rows, :n]])
    R = num / den
    order = np.lexsort(R.T[::-1])
    return int(rows[order[0]])


def _lemke_core(M: np.ndarray, q: np.ndarray, max_iter: int) -> tuple[np.ndarray | None, str, int]:
    """Plain lexicographic Lemke on a pure LCP. Returns (z, status, iters)."""
    n = q.shape[0]
    if n == 0:
        return np.zeros(0), "solved", 0
    if np.min(q) >= 0.0:
        return np.zeros(n), "solved", 0

    # tableau columns: w_0..w_{n-1} | z_0..z_{n-1} | z0 | rhs
    T = np.hstack([np.eye(n), -M, -np.ones((n, 1)), q[:, None]])
    basis = np.arange(n)  # column indices of basic variables (start: all w)
    Z0 = 2 * n

    # z0 enters; the leaving row is the lexicographic minimum of (q_i, B^-1
    # row), i.e. the most negative q with deterministic tie-breaking. No
    # ratio here: the z0 column is uniformly -1.
    rows_all = np.arange(n)
    ratios = np.hstack([T[rows_all, 2 * n + 1:2 * n + 2], T[rows_all, :n]])
    r = int(rows_all[np.lexsort(ratios.T[::-1])[0]])

    def pivot(row: int, col: int) -> None:
        T[row] /= T[row, col]
        colv = T[:, col].copy()
        colv[row] = 0.0
        np.subtract(T, np.outer(colv, T[row]), out=T)

    pivot(r, Z0)
    leaving = basis[r]
    basis[r] = Z0
    entering = leaving + n  # complement of the w that left

    for it in range(1, max_iter + 1):
        colvals = T[:, entering]
        scale = max(1.0, float(np.max(np.abs(colvals))))
        candidates = np.flatnonzero(colvals > 1e-11 * scale)
        if candidates.size == 0:
            return None, "ray_termination", it
        r = _lex_argmin(T, candidates, entering, n)
        pivot(r, entering)
        leaving = basis[r]
        basis[r] = entering
        if leaving == Z0:
            z = np.zeros(n)
            zbasic = basis >= n
            z[basis[zbasic] - n] = T[zbasic, 2 * n + 1]
            # basic values are nonnegative up to tableau roundoff; clamp and
            # let certification on the original problem be the judge
            np.maximum(z, 0.0, out=z)
            return z, "solved", it
        entering = leaving + n if leaving < n else leaving - n
    return None, "iteration_limit", max_iter


def solve_lemke(problem: LCPProblem, tol: float = DEFAULT_TOL,
                max_iter: int | None = None,
                extra_check: Callable[[np.ndarray], bool] | None = None) -> LCPSolution:
    """Lemke with equilibration, a regularization ladder, and certification.

    Attempt order: unmodified problem; then M + eps_k I with
    eps_k = 1e-10 |M|_inf 100^k, k = 0..2 (only reached after a degenerate
    failure, per the regularize-on-demand policy); then PGS. The first
    candidate that certifies on the original problem wins. If nothing
    certifies the first failure status is reported honestly.

    `extra_check`, when given, must also accept a certified candidate
    before it is returned; a rejected candidate sends the ladder on to
    its next rung. The hook exists because the scaled certificate is
    norm-relative: on a stiff problem it can pass a regularized solution
    whose absolute w-violations the caller knows to be unacceptable.
    """
    M_red, q_red, expand = reduce_equalities(problem)
    n = q_red.shape[0]
    if max_iter is None:
        max_iter = 50 * max(n, 1) + 100
    d = _ruiz_scale(M_red)
    Ms = M_red * np.outer(d, d)
    qs = d * q_red
    scale = max(1.0, float(np.max(np.abs(Ms), initial=0.0)))

    first_failure: tuple[str, int] | None = None
    total_iters = 0
    for k, reg in enumerate([0.0, 1e-10 * scale, 1e-8 * scale, 1e-6 * scale]):
        Mk = Ms if reg == 0.0 else Ms + reg * np.eye(n)
        z_red, status, iters = _lemke_core(Mk, qs, max_iter)
        total_iters += iters
        if status != "solved":
            if first_failure is None:
                first_failure = (status, iters)
            continue
        z = expand(d * z_red)
        ok, r = verify_solution(problem, z, tol)
        if ok and (extra_check is None or extra_check(z)):
            return LCPSolution(z, problem.M @ z + problem.q, "solved", total_iters, r,
                               solver="lemke" if reg == 0.0 else f"lemke+reg{k}")
        if first_failure is None:
            first_failure = ("failed" if not ok else "rejected", iters)

    try:
        fallback = solve_pgs(problem, tol=tol, max_iter=20000)
    except ValueError:
        fallback = None
    if fallback is not None and fallback.solved \
            and (extra_check is None or extra_check(fallback.z)):
        return LCPSolution(fallback.z, fallback.w, "solved",
                           total_iters + fallback.iterations,
                           fallback.residual, solver="pgs_fallback")

    status, _ = first_failure if first_failure is not None else ("failed", 0)
    z = np.zeros(problem.n)
    return LCPSolution(z, problem.M @ z + problem.q, status, total_iters,
                       certification_residual(problem, z), solver="lemke")


def solve_pgs(problem: LCPProblem, tol: float = DEFAULT_TOL, max_iter: int = 5000,
              relaxation: float = 1.0) -> LCPSolution:
    """Projected Gauss-Seidel. Equality rows update unprojected.

    Requires a nonzero diagonal on every row it sweeps; raises ValueError
    naming the offending rows otherwise (facet rows of an assembled
    contact problem have zero diagonal, so PGS only applies after
    regularization or to problems built with that in mind).
    """
    M, q, m = problem.M, problem.q, problem.n_eq
    n = problem.n
    z = np.zeros(n)
    ok, r = verify_solution(problem, z, tol)
    if ok:  # q >= 0 (and zero equality offsets): no sweep needed
        return LCPSolution(z, q.copy(), "solved", 0, r, solver="pgs")
    diag = np.diag(M).copy()
    bad = np.flatnonzero(np.abs(diag) < 1e-300)
    if bad.size:
        raise ValueError(f"PGS needs nonzero diagonals; zero at rows {bad.tolist()}")
    for it in range(1, max_iter + 1):
        for i in range(n):
            wi = M[i] @ z + q[i]
            zi = z[i] - relaxation * wi / diag[i]
            z[i] = zi if i < m else max(0.0, zi)
        ok, r = verify_solution(problem, z, tol)
        if ok:
            return LCPSolution(z, M @ z + q, "solved", it, r, solver="pgs")
    return LCPSolution(z, M @ z + q, "iteration_limit", max_iter,
                       certification_residual(problem, z), solver="pgs")


def solve_enumerate(problem: LCPProblem, tol: float = DEFAULT_TOL,
                    max_size: int = 20) -> LCPSolution:
    """Exhaustive complementary-basis search; ground truth for small n.

    Tries every support set of the constrained variables in binary
    counting order, solves the corresponding square system, and certifies
    against the full problem. `multiple` is set when distinct certified
    solutions exist or a certified support is rank-deficient but
    consistent (a continuum of solutions through that point).
    """
    m, n = problem.n_eq, problem.n
    nc = n - m
    if nc > max_size:
        raise ValueError(f"enumeration over {nc} constrained variables refused "
                         f"(max_size = {max_size})")
    M, q = problem.M, problem.q
    free = np.arange(m)
    found: list[np.ndarray] = []
    continuum = False
    best_r = np.inf
    for mask in range(1 << nc):
        support = free.tolist() + [m + j for j in range(nc) if (mask >> j) & 1]
        idx = np.asarray(support, dtype=int)
        A = M[np.ix_(idx, idx)]
        b = q[idx]
        deficient = False
        if idx.size:
            try:
                sol = np.linalg.solve(A, -b)
            except np.linalg.LinAlgError:
                sol, _, rank, _ = np.linalg.lstsq(A, -b, rcond=None)
                if not np.allclose(A @ sol, -b, atol=1e-9 * (1.0 + np.abs(b).max(initial=0.0))):
                    continue  # inconsistent support
                deficient = rank < idx.size
        else:
            sol = np.zeros(0)
        z = np.zeros(n)
        z[idx] = sol
        ok, r = verify_solution(problem, z, tol)
        best_r = min(best_r, r)
        if ok:
            found.append(z)
            continuum = continuum or deficient
    if not found:
        z = np.zeros(n)
        return LCPSolution(z, M @ z + q, "failed", 1 << nc,
                           best_r if np.isfinite(best_r) else certification_residual(problem, z),
                           solver="enumerate")
    distinct = [found[0]]
    for z in found[1:]:
        if all(np.max(np.abs(z - d)) > 1e-7 * (1.0 + np.max(np.abs(d))) for d in distinct):
            distinct.append(z)
    z = found[0]
    return LCPSolution(z, M @ z + q, "solved", 1 << nc,
                       certification_residual(problem, z), solver="enumerate",
                       multiple=continuum or len(distinct) > 1)
