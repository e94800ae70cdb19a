"""Time stepper: one complementarity solve per step.

Each step assembles impulse-level contact conditions at the velocity
level and solves them together with the object's (regularized) momentum
balance:

    M (v+ - v-) = h f_ext + Jn^T pn + Jd^T pf + B beta + preload impulses

* unilateral points (pusher, ridge, platform): normal impulse pn >= 0
  complementary to the separation rate;
* preload points (finger pads): normal impulse is commanded (grip force
  split over the patch points), only friction is solved for;
* pinch pairs: one free variable beta per finger pair, the differential
  normal impulse through the grasp, constrained so the relative normal
  velocity at the grasp center matches the gripper's (rigid pinch);
* friction: polygonal cone per point, facet impulses pf >= 0 coupled to
  a slack lambda equal to the slip speed at the solution, caps mu * pn
  (unilateral) or mu * N h (preload).

The solve is two-stage. Stage one is combinatorial: a moderately
regularized LCP (quasi-dynamic mode substitutes epsilon * I for M, plus
a small creep term on the friction diagonal) is solved by Lemke pivoting
to decide WHICH contacts separate, stick, or slide saturated. Stage two
takes that active pattern and solves the exact balance as a square
linear system: in quasi-dynamic mode the mass term is dropped entirely,
so the reported forces satisfy statics to machine precision rather than
to epsilon. The regularization therefore never appears in the output;
it only steers pattern selection near slip/separation thresholds.

Both knobs in stage one are there for numerical honesty, not tuning:
a tiny epsilon (1e-9 style) makes the LCP condition number ~1/epsilon
and lexicographic pivoting stops terminating in float arithmetic, and
with no creep term a rigid multi-contact step can carry arbitrary
self-stress (equal-and-opposite friction that cancels in the balance).
Creep means tangential force implies proportional micro-slip, which
makes such self-stressed patterns non-complementary and selects the
minimal-force pattern instead.

Dynamic mode keeps the true mass matrix (world-frame inertia, explicit
gyroscopic torque, semi-implicit update) in both stages.

The pinch equality block is eliminated analytically before the LCP is
formed (schur complement in velocity space), so the solver always sees a
pure LCP with a copositive matrix. `lcp.reduce_equalities` exists for
generic mixed problems; the stepper does not route beta through it.
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass, field, replace

import numpy as np

from .contacts import ContactPoint, linearize_cone
from .lcp import LCPProblem, solve_lemke
from scipy.optimize import nnls

from .spatial import MassProps, Pose, Twist, cross3, integrate_pose

GRAVITY = (0.0, 0.0, -9.81)

_MODES = ("quasi_dynamic", "dynamic")

# physical-unit guards applied to every accepted solution; these police the
# pattern shortcuts in units the scaled LCP certificate cannot see
_GUARD_PENETRATION_RATE = 1e-6   # m/s of allowed approach at a closed contact
_GUARD_CAP_OVERUSE = 1e-6        # relative friction-cap overshoot
_EXACT_BALANCE_TOL = 1e-8        # N of wrench imbalance in the exact stage


class SolverFailure(RuntimeError):
    """A step could not produce a certified contact solution."""


@dataclass
class SimConfig:
    """Step settings.

    `epsilon` regularizes only the quasi-dynamic pattern solve and
    `creep` is the micro-slip per unit friction impulse in that same
    solve ((m/s)/(N s)); neither appears in the reported forces, which
    come from the exact stage. Values far outside the defaults either
    destabilize the pivoting (smaller epsilon) or start distorting
    stick/slip classification near thresholds (larger creep).
    """

    dt: float = 0.004
    mode: str = "quasi_dynamic"
    gravity: tuple[float, float, float] = GRAVITY
    mu_overrides: dict[str, float] = field(default_factory=dict)
    num_facets: int | None = None
    epsilon: float = 1e-4
    creep: float = 1e-3
    solver_tol: float = 1e-9
    warm_start: bool = True

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}, got {self.mode!r}")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if self.creep < 0.0:
            raise ValueError("creep must be nonnegative")
        if self.num_facets is not None and (self.num_facets < 4 or self.num_facets % 2):
            raise ValueError("num_facets override must be even and >= 4")


@dataclass
class PinchPair:
    """Grasp coupling: rear/front patches sharing a line of action."""

    name: str
    normal: np.ndarray          # unit, from front side toward rear patch
    center: np.ndarray          # grasp center, on the line between the pads
    rate: float                 # commanded normal closing rate (gripper side)
    rear_patch: str             # patch whose outward normal equals `normal`
    front_patch: str

    def __post_init__(self):
        self.normal = np.asarray(self.normal, dtype=float).reshape(3)
        self.center = np.asarray(self.center, dtype=float).reshape(3)


@dataclass
class ContactSet:
    """Everything the stepper needs about the world at one instant."""

    points: list[ContactPoint]
    driven: np.ndarray | None = None     # (n, 3) velocity of the other body
    pairs: list[PinchPair] = field(default_factory=list)
    gaps: np.ndarray | None = None       # (n,) declared signed gaps

    def __post_init__(self):
        n = len(self.points)
        self.driven = (np.zeros((n, 3)) if self.driven is None
                       else np.asarray(self.driven, dtype=float).reshape(n, 3))
        self.gaps = (np.zeros(n) if self.gaps is None
                     else np.asarray(self.gaps, dtype=float).reshape(n))


@dataclass
class SimState:
    pose: Pose
    twist: Twist
    time: float = 0.0
    warm_pattern: np.ndarray | None = None   # active rows of the previous step
    warm_signature: tuple | None = None
    warm_anchor: tuple | None = None         # (z, twist, beta) of that step


@dataclass
class Assembly:
    """Assembled step: reduced LCP plus everything needed to interpret z."""

    problem: LCPProblem           # the pattern-stage LCP (regularized)
    points: list[ContactPoint]
    n_un: int
    un_index: np.ndarray          # point index of each pn variable
    facet_slices: list[slice]     # pf block per point, offsets into z
    facet_owner: np.ndarray       # point index of each facet row
    caps: np.ndarray              # impulse cap per point (nan for unilateral)
    G_stack: np.ndarray
    q_kin: np.ndarray             # gap / driven offsets of the velocity rows
    S: np.ndarray                 # constrained inverse-mass (6,6)
    v_free: np.ndarray
    imp0: np.ndarray              # h f_ext + preload impulse wrench
    mom: np.ndarray
    M_mass: np.ndarray            # exact-stage mass matrix (zero when quasi-static)
    W: np.ndarray
    B: np.ndarray
    BtWB: np.ndarray
    rate: np.ndarray
    h: float
    pair_shares: list[tuple[str, np.ndarray]]  # (pair name, normal) per pair
    preload_impulses: np.ndarray  # per point, nan for unilateral

    @property
    def n_points(self) -> int:
        return len(self.points)

    def velocity(self, z: np.ndarray) -> np.ndarray:
        imp = self.G_stack.T @ z[: self.G_stack.shape[0]]
        v = self.S @ (self.mom + self.imp0 + imp)
        if self.B.shape[1]:
            # particular term W B (B^T W B)^-1 rate keeps B^T v = rate exact
            v = v + self.W @ self.B @ np.linalg.solve(self.BtWB, self.rate)
        return v

    def beta(self, z: np.ndarray) -> np.ndarray:
        if not self.B.shape[1]:
            return np.zeros(0)
        rhs = self.rate - self.B.T @ self.W @ (
            self.mom + self.imp0 + self.G_stack.T @ z[: self.G_stack.shape[0]])
        return np.linalg.solve(self.BtWB, rhs)

    def point_forces(self, z: np.ndarray, beta: np.ndarray | None = None) -> np.ndarray:
        """World-frame force carried by each contact point, Newtons."""
        n_un = self.n_un
        if beta is None:
            beta = self.beta(z)
        forces = np.zeros((self.n_points, 3))
        for i, p in enumerate(self.points):
            f = np.zeros(3)
            if p.preload is not None:
                f += p.preload * self.h * p.normal
            pf = z[self.facet_slices[i]]
            f += pf @ p.pyramid.directions
            forces[i] = f
        for col, i in enumerate(self.un_index):
            forces[i] += z[col] * self.points[i].normal
        # beta: differential normal force, half to each side of the pair
        for b, (pair_name, n1) in zip(beta, self.pair_shares):
            rear_pts = [i for i, p in enumerate(self.points) if p.pair == pair_name
                        and p.normal @ n1 > 0.0]
            front_pts = [i for i, p in enumerate(self.points) if p.pair == pair_name
                         and p.normal @ n1 < 0.0]
            for i in rear_pts:
                forces[i] += 0.5 * b / len(rear_pts) * n1
            for i in front_pts:
                forces[i] += 0.5 * b / len(front_pts) * n1
        return forces / self.h


def _facet_rows(position, directions, origin) -> np.ndarray:
    r = position - origin
    out = np.empty((directions.shape[0], 6))
    out[:, :3] = directions
    # r x d per row, written out to skip the np.cross axis bookkeeping
    out[:, 3] = r[1] * directions[:, 2] - r[2] * directions[:, 1]
    out[:, 4] = r[2] * directions[:, 0] - r[0] * directions[:, 2]
    out[:, 5] = r[0] * directions[:, 1] - r[1] * directions[:, 0]
    return out


def _apply_overrides(cs: ContactSet, config: SimConfig) -> ContactSet:
    if not config.mu_overrides and config.num_facets is None:
        return cs
    points = []
    for p in cs.points:
        mu = config.mu_overrides.get(p.patch, p.mu)
        k = config.num_facets if config.num_facets is not None else p.pyramid.num_facets
        if mu != p.mu or k != p.pyramid.num_facets:
            pyr = linearize_cone(p.normal, mu, k,
                                 first_direction=p.pyramid.directions[0])
            p = replace(p, pyramid=pyr)
        points.append(p)
    return ContactSet(points, cs.driven, cs.pairs, cs.gaps)


def assemble_step(state: SimState, contacts: ContactSet, config: SimConfig,
                  mass_props: MassProps) -> Assembly:
    """Build the reduced LCP for one step at the current pose."""
    cs = _apply_overrides(contacts, config)
    pts = cs.points
    n_pts = len(pts)
    h = config.dt
    g = np.asarray(config.gravity, dtype=float)

    if n_pts == 0 and config.mode == "quasi_dynamic" and np.linalg.norm(g) > 0.0:
        raise SolverFailure(
            "empty contact set with nonzero gravity in quasi_dynamic mode: "
            "no force balance exists")

    pose = state.pose
    origin = pose.translation

    # mass matrix / its inverse; quasi-dynamic keeps the exact-stage mass at
    # zero (pure statics) and uses epsilon * I only inside the pattern LCP
    if config.mode == "quasi_dynamic":
        W = np.eye(6) / config.epsilon
        M_mass = np.zeros((6, 6))
        mom = np.zeros(6)
        f_ext = np.concatenate([mass_props.mass * g, np.zeros(3)])
        com_w = pose.transform_direction(mass_props.com)
        f_ext[3:] = cross3(com_w, mass_props.mass * g)
    else:
        I_w = mass_props.inertia_world(pose)
        M6 = np.zeros((6, 6))
        M6[:3, :3] = mass_props.mass * np.eye(3)
        M6[3:, 3:] = I_w
        W = np.linalg.inv(M6)
        M_mass = M6
        v_prev = state.twist.as_array()
        mom = M6 @ v_prev
        com_w = pose.transform_direction(mass_props.com)
        f_ext = np.concatenate([mass_props.mass * g,
                                cross3(com_w, mass_props.mass * g)
                                - cross3(v_prev[3:], I_w @ v_prev[3:])])

    # contact rows, built in bulk: per-point python work dominates the
    # step cost otherwise
    un_index = np.array([i for i, p in enumerate(pts) if p.preload is None], dtype=int)
    n_un = un_index.size
    positions = np.stack([p.position for p in pts]) if n_pts else np.zeros((0, 3))
    normals = np.stack([p.normal for p in pts]) if n_pts else np.zeros((0, 3))
    rs = positions - origin
    Jn_all = np.empty((n_pts, 6))
    Jn_all[:, :3] = normals
    Jn_all[:, 3] = rs[:, 1] * normals[:, 2] - rs[:, 2] * normals[:, 1]
    Jn_all[:, 4] = rs[:, 2] * normals[:, 0] - rs[:, 0] * normals[:, 2]
    Jn_all[:, 5] = rs[:, 0] * normals[:, 1] - rs[:, 1] * normals[:, 0]
    counts = np.array([p.pyramid.num_facets for p in pts], dtype=int)
    k_total = int(counts.sum())
    ends = n_un + np.cumsum(counts)
    facet_slices = [slice(int(e - k), int(e)) for e, k in zip(ends, counts)]
    alldirs = np.vstack([p.pyramid.directions for p in pts]) \
        if n_pts else np.zeros((0, 3))
    R = np.repeat(rs, counts, axis=0)
    Gd = np.empty((k_total, 6))
    Gd[:, :3] = alldirs
    Gd[:, 3] = R[:, 1] * alldirs[:, 2] - R[:, 2] * alldirs[:, 1]
    Gd[:, 4] = R[:, 2] * alldirs[:, 0] - R[:, 0] * alldirs[:, 2]
    Gd[:, 5] = R[:, 0] * alldirs[:, 1] - R[:, 1] * alldirs[:, 0]
    Jn_un = Jn_all[un_index] if n_un else np.zeros((0, 6))
    G_stack = np.vstack([Jn_un, Gd])

    # preload impulses enter as a fixed applied wrench
    preload_imp = np.array([np.nan if p.preload is None else p.preload * h for p in pts])
    loaded = ~np.isnan(preload_imp)
    imp0 = h * f_ext
    if loaded.any():
        imp0 = imp0 + preload_imp[loaded] @ Jn_all[loaded]

    # pinch pairs: B columns and commanded rates
    pairs = cs.pairs
    B = np.zeros((6, len(pairs)))
    rate = np.zeros(len(pairs))
    pair_shares = []
    for j, pr in enumerate(pairs):
        rc = pr.center - origin
        B[:, j] = np.concatenate([pr.normal, cross3(rc, pr.normal)])
        rate[j] = pr.rate
        pair_shares.append((pr.name, pr.normal.copy()))

    if B.shape[1]:
        BtWB = B.T @ W @ B
        try:
            WBs = np.linalg.solve(BtWB, B.T @ W)
        except np.linalg.LinAlgError as e:
            raise SolverFailure("pinch constraint block is singular") from e
        S = W - W @ B @ WBs
        v_free = S @ (mom + imp0) + W @ B @ np.linalg.solve(BtWB, rate)
    else:
        BtWB = np.zeros((0, 0))
        S = W
        v_free = S @ (mom + imp0)

    core = G_stack @ S @ G_stack.T
    core = 0.5 * (core + core.T)

    # z = [pn (n_un) | pf (k_total) | lambda (n_pts)]
    N = n_un + k_total + n_pts
    M = np.zeros((N, N))
    M[: n_un + k_total, : n_un + k_total] = core
    # creep: tangential impulse costs proportional micro-slip in the pattern
    # stage, which bars self-stressed friction patterns (see module docstring)
    M[n_un: n_un + k_total, n_un: n_un + k_total] += config.creep * np.eye(k_total)
    facet_owner = np.repeat(np.arange(n_pts), counts)
    E = np.zeros((k_total, n_pts))
    E[np.arange(k_total), facet_owner] = 1.0
    M[n_un: n_un + k_total, n_un + k_total:] = E
    for col, i in enumerate(un_index):
        M[n_un + k_total + i, col] = pts[i].mu
    M[n_un + k_total:, n_un: n_un + k_total] = -E.T

    q = np.empty(N)
    q_kin = np.empty(n_un + k_total)
    vd_n = np.einsum("ij,ij->i", cs.driven, normals) if n_pts else np.zeros(0)
    q_kin[:n_un] = cs.gaps[un_index] / h - vd_n[un_index]
    q[:n_un] = Jn_un @ v_free + q_kin[:n_un]
    q_kin[n_un:] = -np.einsum("ij,ij->i", alldirs, cs.driven[facet_owner])
    q[n_un: n_un + k_total] = Gd @ v_free + q_kin[n_un:]
    caps = np.where(np.isnan(preload_imp), np.nan,
                    np.array([p.mu for p in pts]) * preload_imp)
    q[n_un + k_total:] = np.where(np.isnan(caps), 0.0, caps)

    return Assembly(
        problem=LCPProblem(M, q, n_eq=0),
        points=pts, n_un=n_un, un_index=un_index, facet_slices=facet_slices,
        facet_owner=facet_owner, caps=caps, G_stack=G_stack, q_kin=q_kin,
        S=S, v_free=v_free, imp0=imp0, mom=mom, M_mass=M_mass,
        W=W, B=B, BtWB=BtWB, rate=rate, h=h, pair_shares=pair_shares,
        preload_impulses=preload_imp,
    )


@dataclass
class StepResult:
    """Solved step: kinematics, per-point forces, per-patch wrench channels."""

    time: float
    pose: Pose
    twist: np.ndarray
    z: np.ndarray
    beta: np.ndarray
    points: list[ContactPoint]
    point_forces: np.ndarray          # (n, 3) N, world axes
    patch_wrenches: dict[str, np.ndarray]   # (6,) N / N m about patch center
    patch_centers: dict[str, np.ndarray]
    slip_speeds: np.ndarray           # (n,) m/s, the lambda block
    net_wrench: np.ndarray            # (6,) total on the object incl gravity
    net_residual: float               # norm of the force part of net_wrench
    min_separation_rate: float
    solver: str
    iterations: int
    lcp_residual: float   # balance defect (N) for exact-stage solutions,
                          # scaled LCP certificate otherwise


def _signature(asm: Assembly) -> tuple:
    return (
        asm.n_un,
        tuple(p.pyramid.num_facets for p in asm.points),
        tuple(p.patch for p in asm.points),
        asm.B.shape[1],
    )


def _physical_ok(asm: Assembly, z: np.ndarray) -> bool:
    """Unit-aware sanity of a pattern-stage candidate.

    The LCP certificate is norm-relative, so on a stiff assembly it can
    pass solutions with mm/s-scale penetration; this screen rejects them
    in physical units so the solve ladder moves on.
    """
    w = asm.problem.M @ z + asm.problem.q
    n_vel = asm.G_stack.shape[0]  # normal + facet rows are in velocity units
    # complementarity slack rides on the driven speed, so the guard gets a
    # kinematic-scale term; genuine scale-blind garbage sits at the row
    # scale itself and still trips it
    tol_vel = _GUARD_PENETRATION_RATE + 1e-3 * np.max(np.abs(asm.q_kin), initial=0.0)
    if n_vel and np.min(w[:n_vel]) < -tol_vel:
        return False
    zmax = np.max(np.abs(z), initial=0.0)
    if np.min(z, initial=0.0) < -1e-10 * (1.0 + zmax):
        return False
    un_col = {i: c for c, i in enumerate(asm.un_index)}
    cap_slack = 1e-8 * (1.0 + zmax)   # impulse dust on unloaded contacts
    for i, p in enumerate(asm.points):
        cap = asm.caps[i] if p.preload is not None else p.mu * z[un_col[i]]
        used = float(np.sum(z[asm.facet_slices[i]]))
        if used > cap * (1.0 + _GUARD_CAP_OVERUSE) + cap_slack:
            return False
    return True


def _pattern_of(asm: Assembly, z: np.ndarray) -> np.ndarray:
    """Boolean active set of a solution, sanitized for the exact stage."""
    act = z > 1e-10 * (1.0 + np.max(z, initial=0.0))
    n_imp = asm.G_stack.shape[0]
    un_col = {i: c for c, i in enumerate(asm.un_index)}
    for i, p in enumerate(asm.points):
        sl = asm.facet_slices[i]
        if p.preload is None and not act[un_col[i]]:
            act[sl] = False            # open contact transmits nothing
            act[n_imp + i] = False
        if act[n_imp + i] and not act[sl].any():
            act[n_imp + i] = False     # cap cannot saturate with no load
    return act


def _exact_solve(asm: Assembly, pattern: np.ndarray, anchor=None):
    """Solve the step exactly for a fixed active pattern.

    Unknowns are the twist, the pinch impulses and the active z entries;
    equations are the wrench balance (with the exact-stage mass matrix,
    zero in quasi-static mode), the pinch rate constraints, the closed
    velocity rows and the saturated cap rows. Returns (z, xi, beta) or
    None when the system is inconsistent or demands negative impulses,
    both signs that the pattern does not admit an exact solution.

    Sticking multi-contact is statically indeterminate, so the system can
    be rank-deficient with a whole affine family of valid force mixes.
    `anchor` (a prior (z, twist, beta), from the pattern stage or the
    previous step) selects the family member nearest the creep-selected
    distribution instead of the minimum-norm one, which loves to shuffle
    load between redundant paths (e.g. holding an object up by finger
    shear instead of the platform).
    """
    n_imp = asm.G_stack.shape[0]
    n_un = asm.n_un
    p_pairs = asm.B.shape[1]
    act_rows = np.flatnonzero(pattern)
    dim = 6 + p_pairs + act_rows.size
    col_of = {int(r): 6 + p_pairs + k for k, r in enumerate(act_rows)}
    un_col = {i: c for c, i in enumerate(asm.un_index)}
    A = np.zeros((dim, dim))
    b = np.zeros(dim)
    A[:6, :6] = asm.M_mass
    b[:6] = asm.mom + asm.imp0
    if p_pairs:
        A[:6, 6:6 + p_pairs] = -asm.B
        A[6:6 + p_pairs, :6] = asm.B.T
        b[6:6 + p_pairs] = asm.rate
    for k, r in enumerate(act_rows):
        r = int(r)
        out = 6 + p_pairs + k
        if r < n_imp:
            # closed velocity row; its impulse enters the wrench balance
            A[:6, col_of[r]] = -asm.G_stack[r]
            A[out, :6] = asm.G_stack[r]
            b[out] = -asm.q_kin[r]
            if r >= n_un:
                lam_row = n_imp + int(asm.facet_owner[r - n_un])
                if pattern[lam_row]:
                    A[out, col_of[lam_row]] = 1.0
        else:
            # saturated friction cap of point i
            i = r - n_imp
            sl = asm.facet_slices[i]
            for j in range(sl.start, sl.stop):
                if pattern[j]:
                    A[out, col_of[j]] = 1.0
            if asm.points[i].preload is not None:
                b[out] = asm.caps[i]
            else:
                A[out, col_of[un_col[i]]] = -asm.points[i].mu
    bnorm = 1.0 + float(np.linalg.norm(b, np.inf))
    n_free = 6 + p_pairs
    try:
        x = np.linalg.solve(A, b)
        ok = bool(np.all(np.isfinite(x))) \
            and float(np.linalg.norm(A @ x - b, np.inf)) <= 1e-9 * bnorm
    except np.linalg.LinAlgError:
        ok = False
    if not ok:
        x0 = np.zeros(dim)
        if anchor is not None and anchor[0].shape[0] == asm.problem.n:
            x0[:6] = anchor[1]
            x0[6:6 + p_pairs] = anchor[2]
            x0[n_free:] = anchor[0][act_rows]
        dx, *_ = np.linalg.lstsq(A, b - A @ x0, rcond=None)
        x = x0 + dx
        if not (np.all(np.isfinite(x))
                and float(np.linalg.norm(A @ x - b, np.inf)) <= 1e-9 * bnorm):
            return None
        zl = x[n_free:]
        if np.min(zl, initial=0.0) < -1e-9 * (1.0 + np.max(np.abs(zl), initial=0.0)):
            # consistent but statically indeterminate (sticking multi-
            # contact): the minimum-norm impulse mix can go negative even
            # though nonnegative mixes exist on the same affine set, so
            # eliminate the free twist/pinch block and pick a nonnegative
            # vertex instead
            free_pinv = np.linalg.pinv(A[:, :n_free])
            proj = np.eye(dim) - A[:, :n_free] @ free_pinv
            u, _ = nnls(proj @ A[:, n_free:], proj @ b)
            x = np.concatenate([free_pinv @ (b - A[:, n_free:] @ u), u])
            if not (np.all(np.isfinite(x))
                    and float(np.linalg.norm(A @ x - b, np.inf)) <= 1e-9 * bnorm):
                return None
    xi = x[:6]
    beta = x[6:6 + p_pairs]
    z = np.zeros(asm.problem.n)
    z[act_rows] = x[6 + p_pairs:]
    if np.min(z, initial=0.0) < -1e-9 * (1.0 + np.max(np.abs(z), initial=0.0)):
        return None
    np.maximum(z, 0.0, out=z)
    return z, xi, beta


def _verify_exact(asm: Assembly, z: np.ndarray, xi: np.ndarray,
                  beta: np.ndarray) -> tuple[bool, float]:
    """Complementarity, cap and balance checks in physical units.

    Returns (ok, residual) with the residual being the static balance
    defect in Newtons; the kinematic checks are pass/fail against the
    module guards.
    """
    n_imp = asm.G_stack.shape[0]
    n_un = asm.n_un
    lam = z[n_imp:]
    vmax = 1.0 + float(np.max(np.abs(xi), initial=0.0))
    zmax = 1.0 + float(np.max(z, initial=0.0))
    un_col = {i: c for c, i in enumerate(asm.un_index)}
    w_vel = asm.G_stack @ xi + asm.q_kin
    w_vel[n_un:] += lam[asm.facet_owner]
    # facet rows of a force-free open contact constrain nothing: the point
    # may move tangentially, and the full LCP covers that with its slack
    # variable, which the sanitized pattern drops; its normal row still
    # guards penetration
    checked = np.ones(n_imp, dtype=bool)
    for i, p in enumerate(asm.points):
        if p.preload is None and z[un_col[i]] <= 1e-12 * zmax \
                and float(np.sum(z[asm.facet_slices[i]])) <= 1e-12 * zmax:
            checked[asm.facet_slices[i]] = False
    if checked.any() and float(np.min(w_vel[checked])) < -_GUARD_PENETRATION_RATE:
        return False, np.inf
    loaded = z[:n_imp] > 1e-9 * zmax
    if loaded.any() and float(np.max(np.abs(w_vel[loaded]))) > 1e-7 * vmax:
        return False, np.inf
    for i, p in enumerate(asm.points):
        cap = asm.caps[i] if p.preload is not None else p.mu * z[un_col[i]]
        used = float(np.sum(z[asm.facet_slices[i]]))
        if used > cap * (1.0 + _GUARD_CAP_OVERUSE) + 1e-15:
            return False, np.inf
        if lam[i] > 1e-12 * zmax and used < cap - 1e-7 * (1.0 + cap):
            return False, np.inf   # slipping needs a saturated cap
    res = asm.M_mass @ xi - asm.mom - asm.imp0 - asm.G_stack.T @ z[:n_imp]
    if beta.size:
        res = res - asm.B @ beta
        if float(np.max(np.abs(asm.B.T @ xi - asm.rate))) > 1e-9 * vmax:
            return False, np.inf
    residual = float(np.max(np.abs(res))) / asm.h
    return residual <= _EXACT_BALANCE_TOL, residual


def _dissipation(asm: Assembly, z: np.ndarray) -> float:
    """Friction work rate of a solution, sum of slip speed times impulse."""
    n_imp = asm.G_stack.shape[0]
    lam = z[n_imp:]
    return float(sum(lam[i] * np.sum(z[asm.facet_slices[i]])
                     for i in range(len(asm.points)) if lam[i] > 0.0))


def _refine_pattern(asm: Assembly, zc: np.ndarray, anchor):
    """Retry the exact stage with slipping patches pinned to stick.

    The pattern stage runs with a small pseudo-mass, so a quasi-static
    torque imbalance can leak into creep: two patches come back labelled
    slipping with speeds proportional to the leak, and the exact stage
    rightly rejects the mixture. The rigid problem then has one branch
    per choice of which patch actually sticks, and more than one can be
    statically consistent. Pin each slipping patch in turn (then all at
    once), keep the variants that pass verification, and return the one
    dissipating the most: that is the branch the regularization tends to
    as the pseudo-mass vanishes, because the sticking patch's friction
    demand is what caps the others' work. The verifier still enforces
    the cone, so a pin that would need more than mu*N drops out and
    genuine sliding survives.
    """
    n_imp = asm.G_stack.shape[0]
    base = _pattern_of(asm, zc)
    slip: dict[str, float] = {}
    for i, p in enumerate(asm.points):
        if base[n_imp + i]:
            slip[p.patch] = slip.get(p.patch, 0.0) + float(zc[n_imp + i])
    if not slip:
        return None
    order = sorted(slip)
    groups = [(name,) for name in order]
    if len(order) > 1:
        groups.append(tuple(order))
    best = None
    best_rate = -1.0
    for group in groups:
        pat = base.copy()
        for i, p in enumerate(asm.points):
            if p.patch in group:
                pat[n_imp + i] = False
        sol = _exact_solve(asm, pat, anchor=anchor)
        if sol is None:
            continue
        ok, r = _verify_exact(asm, *sol)
        if not ok:
            continue
        rate = _dissipation(asm, sol[0])
        if rate > best_rate * (1.0 + 1e-9):
            best, best_rate = (*sol, r), rate
    return best


def _solve_assembly(asm: Assembly, state: SimState, config: SimConfig
                    ) -> tuple[np.ndarray, np.ndarray, np.ndarray, str, int, float]:
    """Returns (z, twist, beta, solver label, pivot count, residual).

    The residual is the exact-stage balance defect in Newtons when the
    exact stage produced the answer, else the pattern LCP's scaled
    certification residual.
    """
    if asm.problem.n == 0:   # no contacts: the balance alone is the step
        sol = _exact_solve(asm, np.zeros(0, dtype=bool))
        if sol is not None:
            ok, r = _verify_exact(asm, *sol)
            if ok:
                return (*sol, "exact", 0, r)
        raise SolverFailure("contact-free step has no consistent balance")
    sig = _signature(asm)
    if (config.warm_start and state.warm_pattern is not None
            and state.warm_signature == sig
            and state.warm_pattern.shape[0] == asm.problem.n):
        sol = _exact_solve(asm, state.warm_pattern, anchor=state.warm_anchor)
        if sol is not None:
            ok, r = _verify_exact(asm, *sol)
            if ok:
                return (*sol, "warm_pattern", 0, r)
    lcp_sol = solve_lemke(asm.problem, tol=config.solver_tol,
                          extra_check=lambda zc: _physical_ok(asm, zc))
    if not lcp_sol.solved:
        raise SolverFailure(f"contact LCP unsolved: {lcp_sol.status} "
                            f"after {lcp_sol.iterations} pivots, "
                            f"residual {lcp_sol.residual:.2e}")
    zc = lcp_sol.z
    anchor = (zc, asm.velocity(zc), asm.beta(zc))
    sol = _exact_solve(asm, _pattern_of(asm, zc), anchor=anchor)
    if sol is not None:
        ok, r = _verify_exact(asm, *sol)
        if ok:
            return (*sol, lcp_sol.solver + "+exact", lcp_sol.iterations, r)
    refined = _refine_pattern(asm, zc, anchor)
    if refined is not None:
        z, xi, beta, r = refined
        return (z, xi, beta, lcp_sol.solver + "+pinned", lcp_sol.iterations, r)
    # the exact stage can reject a tied or rank-deficient pattern; the
    # certified pattern-stage solution is then the honest answer
    z = lcp_sol.z
    return (z, asm.velocity(z), asm.beta(z), lcp_sol.solver,
            lcp_sol.iterations, lcp_sol.residual)


def step(state: SimState, contacts: ContactSet, config: SimConfig,
         mass_props: MassProps) -> tuple[SimState, StepResult]:
    """Advance one dt; raises SolverFailure when no certified solution exists."""
    asm = assemble_step(state, contacts, config, mass_props)
    z, xi, beta, solver, iters, resid = _solve_assembly(asm, state, config)
    h = config.dt
    twist = Twist(xi[:3], xi[3:], state.pose.frame)
    new_pose = integrate_pose(state.pose, twist, h)

    forces = asm.point_forces(z, beta)
    n_imp = asm.G_stack.shape[0]
    net6 = (asm.imp0 + asm.G_stack.T @ z[:n_imp]
            + (asm.B @ beta if beta.size else 0.0)) / h

    patch_wrenches: dict[str, np.ndarray] = {}
    patch_centers: dict[str, np.ndarray] = {}
    order: list[str] = []
    for p in asm.points:
        if p.patch not in order:
            order.append(p.patch)
    for name in order:
        idx = [i for i, p in enumerate(asm.points) if p.patch == name]
        pos = np.stack([asm.points[i].position for i in idx])
        center = pos.mean(axis=0)
        f = forces[idx].sum(axis=0)
        tau = np.cross(pos - center, forces[idx]).sum(axis=0)
        patch_wrenches[name] = np.concatenate([f, tau])
        patch_centers[name] = center

    n_un = asm.n_un
    w_n = asm.G_stack[:n_un] @ xi + asm.q_kin[:n_un]
    result = StepResult(
        time=state.time + h,
        pose=new_pose,
        twist=xi,
        z=z,
        beta=beta,
        points=asm.points,
        point_forces=forces,
        patch_wrenches=patch_wrenches,
        patch_centers=patch_centers,
        slip_speeds=z[n_imp:].copy(),
        net_wrench=net6,
        net_residual=float(np.linalg.norm(net6[:3])),
        min_separation_rate=float(np.min(w_n, initial=np.inf)),
        solver=solver,
        iterations=iters,
        lcp_residual=resid,
    )
    new_state = SimState(
        pose=new_pose,
        twist=twist,
        time=state.time + h,
        warm_pattern=_pattern_of(asm, z) if config.warm_start else None,
        warm_signature=_signature(asm) if config.warm_start else None,
        warm_anchor=(z, xi, beta) if config.warm_start else None,
    )
    return new_state, result


@dataclass
class Trajectory:
    results: list[StepResult]
    initial_pose: Pose
    final_state: SimState
    config: SimConfig
    scenario: object = None
    failed: bool = False
    failure: str = ""
    wall_time: float = 0.0

    @property
    def times(self) -> np.ndarray:
        return np.array([r.time for r in self.results])

    def positions(self) -> np.ndarray:
        return np.stack([r.pose.translation for r in self.results])

    def quaternions(self) -> np.ndarray:
        return np.stack([r.pose.quaternion for r in self.results])

    def patch_wrench_series(self, name: str) -> np.ndarray:
        return np.stack([r.patch_wrenches[name] for r in self.results])

    def max_net_residual(self) -> float:
        return max((r.net_residual for r in self.results), default=0.0)


def simulate(scenario, config: SimConfig | None = None) -> Trajectory:
    """Run a scenario to its duration; a solver failure aborts and is flagged."""
    config = config if config is not None else SimConfig()
    t0 = _time.perf_counter()
    state = SimState(pose=scenario.initial_pose(), twist=Twist.zero(), time=0.0)
    n_steps = max(1, int(round(scenario.duration / config.dt)))
    results: list[StepResult] = []
    initial = state.pose
    for k in range(n_steps):
        cs = scenario.contact_set(state.pose, state.time)
        try:
            state, res = step(state, cs, config, scenario.mass_props)
        except SolverFailure as e:
            return Trajectory(results, initial, state, config, scenario,
                              failed=True, failure=str(e),
                              wall_time=_time.perf_counter() - t0)
        results.append(res)
    return Trajectory(results, initial, state, config, scenario,
                      wall_time=_time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# force-resolution bounds
# ---------------------------------------------------------------------------

@dataclass
class BoundsReport:
    """Extreme contact-force redistributions consistent with one solved step.

    All equally valid force assignments: same total wrench on the object
    (that is an equality constraint, so the net wrench has zero spread by
    construction), same commanded preloads, friction inside every cone,
    sliding points keep their maximal-dissipation facet set saturated.
    Intervals are in Newtons (torques N m), rows per point ordered
    [world x, world y, world z, normal, tangent1, tangent2].
    """

    point_patches: list[str]
    point_positions: np.ndarray
    nominal_forces: np.ndarray
    point_intervals: np.ndarray          # (n, 6, 2)
    patch_intervals: dict[str, np.ndarray]  # (6, 2) about patch center
    net_wrench_interval: np.ndarray      # (6, 2)
    nominal_net: np.ndarray

    def tangential_width(self, i: int) -> float:
        t1 = self.point_intervals[i, 4]
        t2 = self.point_intervals[i, 5]
        return float(max(t1[1] - t1[0], t2[1] - t2[0]))

    def tangential_widths(self) -> np.ndarray:
        return np.array([self.tangential_width(i) for i in range(len(self.point_patches))])


def force_resolution_bounds(state: SimState, contacts: ContactSet,
                            config: SimConfig, mass_props: MassProps) -> BoundsReport:
    """Solve the instant cold, then min/max every reported force component
    over the polytope of statically equivalent contact force assignments."""
    from scipy.optimize import linprog
    from .contacts import tangent_basis

    asm = assemble_step(state, contacts, config, mass_props)
    cold = SimState(pose=state.pose, twist=state.twist, time=state.time)
    z, xi, beta, _, _, _ = _solve_assembly(asm, cold, config)
    h = asm.h
    pts = asm.points
    n_pts = len(pts)
    n_un = asm.n_un
    n_imp = asm.G_stack.shape[0]
    lam = z[n_imp:]
    # separation / facet activity in exact kinematic terms
    w = asm.G_stack @ xi + asm.q_kin
    w[n_un:] += lam[asm.facet_owner]
    un_col = {i: c for c, i in enumerate(asm.un_index)}

    n_pairs = asm.B.shape[1]
    nvar = n_imp + n_pairs

    # beta attribution shares: force on point i is share[i, j] * n1_j * beta_j
    shares = np.zeros((n_pts, n_pairs))
    for j, (pair_name, n1) in enumerate(asm.pair_shares):
        rear = [i for i, p in enumerate(pts) if p.pair == pair_name and p.normal @ n1 > 0]
        front = [i for i, p in enumerate(pts) if p.pair == pair_name and p.normal @ n1 < 0]
        for i in rear:
            shares[i, j] = 0.5 / len(rear)
        for i in front:
            shares[i, j] = 0.5 / len(front)

    # equality: the variable part of the object wrench is pinned
    K = asm.G_stack.T @ z[:n_imp] + (asm.B @ beta if n_pairs else np.zeros(6))
    A_eq = np.zeros((6, nvar))
    A_eq[:, :n_imp] = asm.G_stack.T
    if n_pairs:
        A_eq[:, n_imp:] = asm.B
    b_eq = K

    bounds: list[tuple[float | None, float | None]] = [(0.0, None)] * n_imp \
        + [(None, None)] * n_pairs
    rows_ub: list[np.ndarray] = []
    rhs_ub: list[float] = []
    rows_eq_extra: list[np.ndarray] = []
    rhs_eq_extra: list[float] = []

    sliding_tol = 1e-6          # m/s of slip that counts as sliding
    sep_tol = 1e-6              # m/s of separation that counts as open

    for i, p in enumerate(pts):
        sl = asm.facet_slices[i]
        if p.preload is None:
            c = un_col[i]
            if w[c] > sep_tol:        # open contact: nothing transmitted
                bounds[c] = (0.0, 0.0)
                for jj in range(sl.start, sl.stop):
                    bounds[jj] = (0.0, 0.0)
                continue
            cap_coeff = np.zeros(nvar)
            cap_coeff[c] = -p.mu
            cap_rhs = 0.0
        else:
            cap_coeff = np.zeros(nvar)
            cap_rhs = asm.caps[i]
        if lam[i] > sliding_tol:
            # sliding: inactive facets stay off, active set stays saturated
            active_tol = 1e-7 * (1.0 + lam[i])
            row = cap_coeff.copy()
            for jj in range(sl.start, sl.stop):
                if w[jj] > active_tol:
                    bounds[jj] = (0.0, 0.0)
                else:
                    row[jj] = 1.0
            rows_eq_extra.append(row)
            rhs_eq_extra.append(cap_rhs)
        else:
            row = cap_coeff.copy()
            row[sl] = 1.0
            rows_ub.append(row)
            rhs_ub.append(cap_rhs)

    A_ub = np.vstack(rows_ub) if rows_ub else None
    b_ub = np.array(rhs_ub) if rows_ub else None
    if rows_eq_extra:
        A_eq = np.vstack([A_eq] + [r[None, :] for r in rows_eq_extra])
        b_eq = np.concatenate([b_eq, np.array(rhs_eq_extra)])

    def extremize(c: np.ndarray, const: float) -> tuple[float, float]:
        out = []
        for sgn in (1.0, -1.0):
            res = linprog(sgn * c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                          bounds=bounds, method="highs")
            if not res.success:
                raise SolverFailure(f"bounds LP failed: {res.message}")
            out.append(sgn * res.fun + const)
        lo, hi = min(out), max(out)
        return lo / h, hi / h

    def point_objective(i: int, e: np.ndarray) -> tuple[np.ndarray, float]:
        p = pts[i]
        c = np.zeros(nvar)
        sl = asm.facet_slices[i]
        c[sl] = p.pyramid.directions @ e
        const = 0.0
        if p.preload is None:
            c[un_col[i]] = p.normal @ e
        else:
            const = asm.preload_impulses[i] * (p.normal @ e)
        for j, (_, n1) in enumerate(asm.pair_shares):
            if shares[i, j]:
                c[n_imp + j] = shares[i, j] * (n1 @ e)
        return c, const

    point_intervals = np.zeros((n_pts, 6, 2))
    for i, p in enumerate(pts):
        t1, t2 = tangent_basis(p.normal)
        axes = [np.eye(3)[0], np.eye(3)[1], np.eye(3)[2], p.normal, t1, t2]
        for a, e in enumerate(axes):
            c, const = point_objective(i, e)
            point_intervals[i, a] = extremize(c, const)

    # patch wrenches about patch centers
    patch_names: list[str] = []
    for p in pts:
        if p.patch not in patch_names:
            patch_names.append(p.patch)
    patch_intervals: dict[str, np.ndarray] = {}
    for name in patch_names:
        idx = [i for i, p in enumerate(pts) if p.patch == name]
        center = np.stack([pts[i].position for i in idx]).mean(axis=0)
        iv = np.zeros((6, 2))
        for a in range(3):
            e = np.eye(3)[a]
            c = np.zeros(nvar)
            const = 0.0
            for i in idx:
                ci, ki = point_objective(i, e)
                c += ci
                const += ki
            iv[a] = extremize(c, const)
        for a in range(3):
            e = np.eye(3)[a]
            c = np.zeros(nvar)
            const = 0.0
            for i in idx:
                p = pts[i]
                arm = p.position - center
                sl = asm.facet_slices[i]
                c[sl] += np.cross(arm, p.pyramid.directions) @ e
                if p.preload is None:
                    c[un_col[i]] += np.cross(arm, p.normal) @ e
                else:
                    const += asm.preload_impulses[i] * (np.cross(arm, p.normal) @ e)
                for j, (_, n1) in enumerate(asm.pair_shares):
                    if shares[i, j]:
                        c[n_imp + j] += shares[i, j] * (np.cross(arm, n1) @ e)
            iv[3 + a] = extremize(c, const)
        patch_intervals[name] = iv

    # net wrench on the object: pinned by the equality block
    net_interval = np.zeros((6, 2))
    for a in range(6):
        c = np.zeros(nvar)
        c[:n_imp] = asm.G_stack.T[a]
        if n_pairs:
            c[n_imp:] = asm.B[a]
        net_interval[a] = extremize(c, asm.imp0[a])

    forces = asm.point_forces(z, beta)
    net_nominal = (asm.imp0 + K) / h
    return BoundsReport(
        point_patches=[p.patch for p in pts],
        point_positions=np.stack([p.position for p in pts]),
        nominal_forces=forces,
        point_intervals=point_intervals,
        patch_intervals=patch_intervals,
        net_wrench_interval=net_interval,
        nominal_net=net_nominal,
    )
