import numpy as np
import pytest

from inhandpush.contacts import (
    ContactPatch,
    FrictionPyramid,
    discretize_patch,
    linearize_cone,
    patch_force_torque,
    tangent_basis,
)


class TestTangentBasis:
    def test_right_handed_orthonormal(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            n = rng.standard_normal(3)
            n /= np.linalg.norm(n)
            t1, t2 = tangent_basis(n)
            B = np.stack([n, t1, t2])
            np.testing.assert_allclose(B @ B.T, np.eye(3), atol=1e-12)
            assert np.linalg.det(B) > 0.99

    def test_axis_aligned_cases(self):
        # +-y normal (finger) anchors t1 on x; +x normal (pusher) anchors t1 on y
        t1, _ = tangent_basis([0, 1, 0])
        np.testing.assert_allclose(t1, [1, 0, 0], atol=1e-15)
        t1, t2 = tangent_basis([1, 0, 0])
        np.testing.assert_allclose(t1, [0, 1, 0], atol=1e-15)
        np.testing.assert_allclose(t2, [0, 0, 1], atol=1e-15)

    def test_rejects_unnormalized(self):
        with pytest.raises(ValueError, match="unit length"):
            tangent_basis([0, 0, 2.0])


class TestFrictionPyramid:
    def test_even_spacing_contains_negations(self):
        pyr = linearize_cone([0, 0, 1], 0.5, num_facets=8)
        D = pyr.directions
        for d in D:
            assert np.min(np.linalg.norm(D + d, axis=1)) < 1e-12

    def test_polygon_approximation_bounds(self):
        # support of the weight simplex {sum w_j <= mu*N} in any tangent
        # direction lies in [mu*N*cos(pi/k), mu*N]
        mu, N, k = 0.4, 10.0, 8
        pyr = linearize_cone([0, 0, 1], mu, num_facets=k)
        rng = np.random.default_rng(2)
        for _ in range(200):
            ang = rng.uniform(0, 2 * np.pi)
            u = np.array([np.cos(ang), np.sin(ang), 0.0])
            support = mu * N * np.max(pyr.directions @ u)
            assert support <= mu * N + 1e-12
            assert support >= mu * N * np.cos(np.pi / k) - 1e-12

    def test_anchor_aligns_first_facet(self):
        pyr = linearize_cone([1, 0, 0], 0.3, num_facets=4, first_direction=[0, 0, -1])
        np.testing.assert_allclose(pyr.directions[0], [0, 0, -1], atol=1e-12)

    def test_rejects_odd_facet_count(self):
        with pytest.raises(ValueError, match="even"):
            linearize_cone([0, 0, 1], 0.5, num_facets=5)

    def test_rejects_non_tangent_directions(self):
        with pytest.raises(ValueError, match="tangent"):
            FrictionPyramid([0, 0, 1], 0.5, np.array([[0, 0, 1.0], [0, 0, -1.0],
                                                      [1, 0, 0], [-1, 0, 0]]))


class TestDiscretization:
    def test_point_patch(self):
        p = ContactPatch("tip", "point", [1, 2, 3], [0, 0, 1], mu=0.3)
        pts = discretize_patch(p)
        assert len(pts) == 1
        np.testing.assert_allclose(pts[0].position, [1, 2, 3])

    def test_disc_ring_radius(self):
        patch = ContactPatch("pad", "disc", [0, 0, 0], [0, 0, 1], size=0.020)
        pts = discretize_patch(patch)
        assert len(pts) == 4
        radii = [np.linalg.norm(p.position) for p in pts]
        np.testing.assert_allclose(radii, 2.0 / 3.0 * 0.010, atol=1e-15)

    def test_disc_ring_matches_continuum_torsion(self):
        # oracle: numerically integrate mu*p*r over a uniform-pressure disc and
        # compare with the discretized ring spinning about the patch normal
        mu, N, R = 0.45, 20.0, 0.010
        nr = 4000
        r = (np.arange(nr) + 0.5) * R / nr
        # moment = mu * (N / area) * integral of r * (r dr dtheta)
        moment_exact = mu * (N / (np.pi * R * R)) * 2 * np.pi * np.sum(r * r) * (R / nr)
        assert abs(moment_exact - (2.0 / 3.0) * mu * N * R) < 1e-6 * moment_exact

        patch = ContactPatch("pad", "disc", [0, 0, 0], [0, 0, 1],
                             mu=mu, size=2 * R, preload=N)
        pts = discretize_patch(patch)
        # each ring point saturated tangentially, perpendicular to its radius
        moment_ring = 0.0
        for p in pts:
            arm = p.position
            f = mu * p.preload * np.cross([0, 0, 1.0], arm / np.linalg.norm(arm))
            moment_ring += np.cross(arm, f)[2]
        np.testing.assert_allclose(moment_ring, moment_exact, rtol=1e-6)

    def test_line_endpoints_carry_half_preload(self):
        patch = ContactPatch("ridge", "line", [0, 0, 0], [0, 0, 1],
                             size=0.028, axis=[0, 1, 0], preload=8.0)
        pts = discretize_patch(patch)
        assert len(pts) == 2
        np.testing.assert_allclose(sorted(p.position[1] for p in pts), [-0.014, 0.014])
        assert all(p.preload == 4.0 for p in pts)

    def test_line_requires_axis(self):
        with pytest.raises(ValueError, match="axis"):
            ContactPatch("ridge", "line", [0, 0, 0], [0, 0, 1], size=0.028)

    def test_preload_must_be_positive(self):
        with pytest.raises(ValueError, match="preload"):
            ContactPatch("pad", "disc", [0, 0, 0], [0, 0, 1], size=0.02, preload=-1.0)


class TestPatchWrench:
    def test_pure_couple(self):
        patch = ContactPatch("pad", "disc", [0, 0, 0], [0, 0, 1], size=0.020)
        pts = discretize_patch(patch)
        forces = []
        for p in pts:
            arm = p.position / np.linalg.norm(p.position)
            forces.append(np.cross([0, 0, 1.0], arm))
        f, tau = patch_force_torque(pts, np.array(forces))
        np.testing.assert_allclose(f, 0, atol=1e-12)
        assert tau[2] > 0
        np.testing.assert_allclose(tau[:2], 0, atol=1e-12)

    def test_reference_point_shift(self):
        patch = ContactPatch("pad", "disc", [0.1, 0, 0], [0, 0, 1], size=0.020)
        pts = discretize_patch(patch)
        forces = np.tile([[0, 0, 1.0]], (4, 1))
        f, tau0 = patch_force_torque(pts, forces, about=[0.1, 0, 0])
        _, tau1 = patch_force_torque(pts, forces, about=[0, 0, 0])
        np.testing.assert_allclose(f, [0, 0, 4.0], atol=1e-12)
        np.testing.assert_allclose(tau0, 0, atol=1e-12)
        np.testing.assert_allclose(tau1, [0, -0.4, 0], atol=1e-12)
