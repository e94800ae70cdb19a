import numpy as np
import pytest

from inhandpush.contacts import ContactPatch, discretize_patch
from inhandpush.lcp import LCPProblem
from inhandpush.spatial import MassProps, Pose, Twist
from inhandpush.stepper import (
    ContactSet,
    PinchPair,
    SimConfig,
    SimState,
    SolverFailure,
    assemble_step,
    force_resolution_bounds,
    step,
)

G_ACC = 9.81


def make_state():
    return SimState(pose=Pose.identity(), twist=Twist.zero())


def point_below(mu=0.0, z=-0.01, driven=(0.0, 0.0, 0.0)):
    patch = ContactPatch("ground", "point", [0, 0, z], [0, 0, 1], mu=mu)
    pts = discretize_patch(patch)
    return ContactSet(pts, driven=np.tile(np.asarray(driven, dtype=float), (1, 1)))


def grasp_line_patches(grip=5.0, mu=0.45, half_len=0.01, width=0.0125, mass=0.1):
    """Two-finger pinch on +-y faces, line patches along x, static gripper."""
    f1 = ContactPatch("f1", "line", [0, width, 0], [0, -1, 0], mu=mu,
                      size=2 * half_len, axis=[1, 0, 0], preload=grip, pair="grasp")
    f2 = ContactPatch("f2", "line", [0, -width, 0], [0, 1, 0], mu=mu,
                      size=2 * half_len, axis=[1, 0, 0], preload=grip, pair="grasp")
    pts = discretize_patch(f1) + discretize_patch(f2)
    pair = PinchPair("grasp", normal=[0, 1, 0], center=[0, 0, 0], rate=0.0,
                     rear_patch="f2", front_patch="f1")
    cs = ContactSet(pts, pairs=[pair])
    mp = MassProps(mass, inertia=1e-4 * np.eye(3))
    return cs, mp


class TestSinglePointBalance:
    def test_frictionless_rest(self):
        # support point straight below the center: normal impulse carries the
        # weight exactly and the object does not move
        cfg = SimConfig()
        mp = MassProps(0.5, inertia=1e-4 * np.eye(3))
        state, res = step(make_state(), point_below(), cfg, mp)
        pn = res.z[0] / cfg.dt
        np.testing.assert_allclose(pn, 0.5 * G_ACC, rtol=1e-9)
        assert res.net_residual < 1e-6
        assert np.linalg.norm(state.pose.translation) < 1e-9
        assert np.all(res.slip_speeds >= 0)

    def test_belt_carries_massless_object(self):
        # quasi-dynamic object on a moving plane: it rides along with the
        # plane through vanishing friction, no residual slip
        cfg = SimConfig()
        mp = MassProps(0.5, inertia=1e-4 * np.eye(3))
        belt_v = np.array([-0.01, 0.0, 0.0])
        cs = point_below(mu=0.4, driven=belt_v)
        state, res = step(make_state(), cs, cfg, mp)
        # the fully tied facet set is a degenerate vertex; the regularization
        # ladder resolves it with ~1e-6 m/s slack, far below physical scales
        np.testing.assert_allclose(res.twist[:3], belt_v, atol=5e-6)
        assert res.slip_speeds.max() < 1e-5
        # friction force needed to drag a massless object is epsilon-small
        tangential = res.point_forces[0].copy()
        tangential[2] -= res.point_forces[0][2]
        assert np.linalg.norm(tangential[:2]) < 1e-4

    def test_empty_contacts_with_gravity_rejected(self):
        cfg = SimConfig()
        mp = MassProps(1.0)
        with pytest.raises(SolverFailure, match="empty contact set"):
            assemble_step(make_state(), ContactSet([]), cfg, mp)


class TestStaticGrasp:
    def test_holds_weight_through_finger_friction(self):
        cfg = SimConfig()
        cs, mp = grasp_line_patches(grip=5.0, mass=0.1)
        mg = 0.1 * G_ACC
        state, res = step(make_state(), cs, cfg, mp)
        # each finger patch carries half the weight in shear, net residual tiny
        np.testing.assert_allclose(res.patch_wrenches["f1"][2], mg / 2, rtol=1e-6)
        np.testing.assert_allclose(res.patch_wrenches["f2"][2], mg / 2, rtol=1e-6)
        assert res.net_residual < 1e-6
        assert res.slip_speeds.max() < 1e-9
        assert np.linalg.norm(state.pose.translation) < 1e-9
        # symmetric pinch at rest: no differential normal force
        assert abs(res.beta[0]) / cfg.dt < 1e-6

    def test_reported_normal_forces_include_preload(self):
        cfg = SimConfig()
        cs, mp = grasp_line_patches(grip=5.0, mass=0.1)
        _, res = step(make_state(), cs, cfg, mp)
        # f1 pushes -y with 5 N total, f2 pushes +y with 5 N total
        np.testing.assert_allclose(res.patch_wrenches["f1"][1], -5.0, atol=1e-6)
        np.testing.assert_allclose(res.patch_wrenches["f2"][1], 5.0, atol=1e-6)

    def test_insufficient_grip_reports_unbalanced_wrench(self):
        # weight above the friction capacity: the quasi-static model cannot
        # balance it; the step solves (kinetic slide) and the honest signal
        # is a net wrench residual equal to the force deficit
        cfg = SimConfig()
        cs, mp = grasp_line_patches(grip=5.0, mass=1.0, mu=0.45)
        mg = 1.0 * G_ACC
        capacity = 2 * 0.45 * 5.0
        _, res = step(make_state(), cs, cfg, mp)
        assert res.slip_speeds.max() > 0.0
        np.testing.assert_allclose(res.net_residual, mg - capacity, rtol=1e-6)


class TestPinchTransmission:
    def test_driven_pinch_drags_object_against_ground_friction(self):
        # gripper translates along +x at v; a sticky ground line resists.
        # the pinch equality forces the object to follow, and the needed
        # drag shows up as differential normal force: rear - front = |f_drag|.
        # the ground line runs along x so fore/aft normal redistribution can
        # balance the pitch torque of the drag force acting at the bottom face
        # (a ground contact with no x extent would need finger shear for that).
        cfg = SimConfig()
        grip, mu_f, mu_g, mass = 5.0, 0.45, 0.3, 0.2
        v = 0.01
        r = 0.0125
        f1 = ContactPatch("rear", "line", [-r, 0, 0], [1, 0, 0], mu=mu_f,
                          size=0.02, axis=[0, 1, 0], preload=grip, pair="pinch")
        f2 = ContactPatch("front", "line", [r, 0, 0], [-1, 0, 0], mu=mu_f,
                          size=0.02, axis=[0, 1, 0], preload=grip, pair="pinch")
        ground = ContactPatch("ground", "line", [0, 0, -r], [0, 0, 1], mu=mu_g,
                              size=0.04, axis=[1, 0, 0])
        pts = discretize_patch(f1) + discretize_patch(f2) + discretize_patch(ground)
        driven = np.zeros((6, 3))
        driven[:4, 0] = v  # finger points ride the gripper
        pair = PinchPair("pinch", normal=[1, 0, 0], center=[0, 0, 0], rate=v,
                         rear_patch="rear", front_patch="front")
        cs = ContactSet(pts, driven=driven, pairs=[pair])
        mp = MassProps(mass, inertia=1e-4 * np.eye(3))
        _, res = step(make_state(), cs, cfg, mp)

        drag = mu_g * mass * G_ACC
        np.testing.assert_allclose(res.twist[0], v, rtol=1e-6)
        np.testing.assert_allclose(res.beta[0] / cfg.dt, drag, rtol=1e-6)
        # ground normals stay mg in total; no spurious finger shear
        ground_n = res.patch_wrenches["ground"][2]
        np.testing.assert_allclose(ground_n, mass * G_ACC, rtol=1e-6)
        rear_n = res.patch_wrenches["rear"][0]     # +x force from rear pad
        front_n = res.patch_wrenches["front"][0]   # -x force from front pad
        np.testing.assert_allclose(rear_n + front_n, drag, rtol=1e-6)
        np.testing.assert_allclose(rear_n, grip + drag / 2, rtol=1e-6)
        np.testing.assert_allclose(front_n, -(grip - drag / 2), rtol=1e-6)


class TestDynamicMode:
    def test_free_fall_velocity(self):
        cfg = SimConfig(mode="dynamic")
        mp = MassProps(1.0)
        state = make_state()
        for _ in range(100):
            state, res = step(state, ContactSet([]), cfg, mp)
        np.testing.assert_allclose(state.twist.linear[2], -G_ACC * 100 * cfg.dt,
                                   rtol=1e-12)

    def test_principal_axis_spin_preserved(self):
        cfg = SimConfig(mode="dynamic", gravity=(0, 0, 0))
        mp = MassProps(1.0, inertia=np.diag([1e-3, 2e-3, 3e-3]))
        state = SimState(pose=Pose.identity(), twist=Twist([0, 0, 0], [0, 0, 10.0]))
        for _ in range(50):
            state, _ = step(state, ContactSet([]), cfg, mp)
        np.testing.assert_allclose(state.twist.angular, [0, 0, 10.0], atol=1e-9)

    def test_resting_contact_matches_quasi_dynamic(self):
        mp = MassProps(0.5, inertia=1e-4 * np.eye(3))
        _, res_d = step(make_state(), point_below(mu=0.3), SimConfig(mode="dynamic"), mp)
        _, res_q = step(make_state(), point_below(mu=0.3), SimConfig(), mp)
        np.testing.assert_allclose(res_d.z[0], res_q.z[0], rtol=1e-6)


class TestWarmStarting:
    def run_n(self, cfg, n=25):
        cs, mp = grasp_line_patches(grip=5.0, mass=0.1)
        state = make_state()
        results = []
        for _ in range(n):
            state, res = step(state, cs, cfg, mp)
            results.append(res)
        return results

    def test_warm_agrees_with_cold(self):
        warm = self.run_n(SimConfig(warm_start=True))
        cold = self.run_n(SimConfig(warm_start=False))
        for rw, rc in zip(warm, cold):
            np.testing.assert_allclose(rw.pose.translation, rc.pose.translation,
                                       atol=1e-9)
            np.testing.assert_allclose(rw.patch_wrenches["f1"],
                                       rc.patch_wrenches["f1"], atol=1e-7)

    def test_warm_path_is_taken(self):
        results = self.run_n(SimConfig(warm_start=True))
        assert results[0].solver != "warm_pattern"
        assert all(r.solver == "warm_pattern" for r in results[2:])

    def test_repeat_runs_bitwise_identical(self):
        a = self.run_n(SimConfig())
        b = self.run_n(SimConfig())
        for ra, rb in zip(a, b):
            assert np.array_equal(ra.z, rb.z)
            assert np.array_equal(ra.pose.translation, rb.pose.translation)


class TestConfig:
    def test_rejects_unknown_mode(self):
        with pytest.raises(ValueError, match="mode"):
            SimConfig(mode="static")

    def test_rejects_bad_dt(self):
        with pytest.raises(ValueError, match="dt"):
            SimConfig(dt=0.0)

    def test_mu_override_changes_capacity(self):
        # halving finger friction halves the supportable shear
        cs, mp = grasp_line_patches(grip=5.0, mass=0.1, mu=0.45)
        cfg = SimConfig(mu_overrides={"f1": 0.05, "f2": 0.05})
        _, res = step(make_state(), cs, cfg, mp)
        mg = 0.1 * G_ACC
        capacity = 2 * 0.05 * 5.0
        np.testing.assert_allclose(res.net_residual, mg - capacity, rtol=1e-5)


class TestForceBounds:
    def test_static_grasp_indeterminacy_structure(self):
        # the classic structure: every point force is individually
        # indeterminate, while patch net forces and the object wrench are
        # pinned; the slack shows up as compensating patch torques
        cfg = SimConfig()
        cs, mp = grasp_line_patches(grip=5.0, mass=0.1)
        rep = force_resolution_bounds(make_state(), cs, cfg, mp)

        n_pts = len(rep.point_patches)
        assert n_pts == 4
        for i in range(n_pts):
            assert rep.tangential_width(i) > 0.05, f"point {i} unexpectedly pinned"
        for name in ("f1", "f2"):
            iv = rep.patch_intervals[name]
            force_widths = iv[:3, 1] - iv[:3, 0]
            assert np.max(force_widths) < 1e-6
            torque_widths = iv[3:, 1] - iv[3:, 0]
            assert np.max(torque_widths) > 1e-5
        net_width = rep.net_wrench_interval[:, 1] - rep.net_wrench_interval[:, 0]
        assert np.max(net_width) < 1e-6

    def test_nominal_inside_intervals(self):
        cfg = SimConfig()
        cs, mp = grasp_line_patches(grip=5.0, mass=0.1)
        rep = force_resolution_bounds(make_state(), cs, cfg, mp)
        for i, p in enumerate(rep.point_patches):
            f = rep.nominal_forces[i]
            for a in range(3):
                lo, hi = rep.point_intervals[i, a]
                assert lo - 1e-8 <= f[a] <= hi + 1e-8
