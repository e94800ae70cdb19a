"""Contact geometry and linearized friction.

A *patch* is what touches: a fingertip pad, the pusher face, a support
ridge. Patches are discretized into a small set of *points*; each point
gets a friction pyramid (polygonal cone) whose facet directions live in
the point's tangent plane. The discretizations are chosen so the patch
reproduces the continuous pressure distribution's force AND torsional
moment, not just the force:

* disc of radius R, uniform pressure: a ring of points at radius 2R/3
  matches the exact torsional friction moment (2/3)*mu*N*R;
* line segment: its two endpoints reproduce force and the moment about
  the segment midpoint for any linear pressure profile;
* point: trivially itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spatial import _vec3, cross3

_AXES = np.eye(3)

DEFAULT_MU_FINGER = 0.45
DEFAULT_MU_PUSHER = 0.25

PATCH_KINDS = ("point", "disc", "line")


def tangent_basis(normal) -> np.ndarray:
    """Deterministic right-handed (t1, t2) completion of a unit normal.

    t1 is built from the first world axis that is not nearly parallel to
    the normal (|axis . n| < 0.9), projected into the tangent plane and
    normalized; t2 = n x t1. Deterministic so facet directions, and with
    them tie-breaking inside the solver, never depend on call order.
    """
    n = _vec3(normal)
    nn = np.linalg.norm(n)
    if abs(nn - 1.0) > 1e-9:
        raise ValueError(f"normal must be unit length, |n| = {nn}")
    for a in _AXES:
        if abs(a @ n) < 0.9:
            t1 = a - (a @ n) * n
            t1 /= np.linalg.norm(t1)
            return np.stack([t1, cross3(n, t1)])
    raise RuntimeError("unreachable: some axis satisfies |a.n| < 0.9")


@dataclass
class FrictionPyramid:
    """Polygonal friction cone: force in the span of `directions`, weights
    summing to at most mu * normal_force.

    `directions` is (k, 3), unit rows in the tangent plane. Even k with
    antipodal pairs keeps the polygon symmetric, so sticking has no
    preferred direction. Interior approximation: along a facet the full
    mu*N is available, between facets only mu*N*cos(pi/k).
    """

    normal: np.ndarray
    mu: float
    directions: np.ndarray

    def __post_init__(self):
        self.normal = _vec3(self.normal)
        self.mu = float(self.mu)
        if self.mu < 0.0:
            raise ValueError("mu must be nonnegative")
        self.directions = np.asarray(self.directions, dtype=float).reshape(-1, 3).copy()
        k = self.directions.shape[0]
        if k < 4 or k % 2:
            raise ValueError(f"facet count must be even and >= 4, got {k}")
        norms = np.linalg.norm(self.directions, axis=1)
        if not np.allclose(norms, 1.0, atol=1e-9):
            raise ValueError("facet directions must be unit length")
        if np.max(np.abs(self.directions @ self.normal)) > 1e-9:
            raise ValueError("facet directions must be tangent to the normal")

    @property
    def num_facets(self) -> int:
        return self.directions.shape[0]


_CONE_CACHE: dict[tuple, FrictionPyramid] = {}


def linearize_cone(normal, mu: float, num_facets: int = 8,
                   first_direction=None) -> FrictionPyramid:
    """Evenly spaced facet directions in the tangent plane.

    `first_direction` anchors facet 0 (projected onto the tangent plane);
    default is the deterministic tangent basis t1. Scenarios use the
    anchor to align a facet with the expected slip direction, which makes
    the polygonal cone exact along it.

    Pyramids are immutable, and steppers rebuild the same handful every
    step, so results are memoized on the exact input bits.
    """
    key = (np.asarray(normal, dtype=float).tobytes(), float(mu), int(num_facets),
           None if first_direction is None
           else np.asarray(first_direction, dtype=float).tobytes())
    hit = _CONE_CACHE.get(key)
    if hit is not None:
        return hit
    n = _vec3(normal)
    t1, t2 = tangent_basis(n)
    if first_direction is not None:
        d0 = _vec3(first_direction)
        d0 = d0 - (d0 @ n) * n
        nd = np.linalg.norm(d0)
        if nd < 1e-9:
            raise ValueError("first_direction is parallel to the normal")
        t1 = d0 / nd
        t2 = cross3(n, t1)
    ang = 2.0 * np.pi * np.arange(num_facets) / num_facets
    dirs = np.outer(np.cos(ang), t1) + np.outer(np.sin(ang), t2)
    pyr = FrictionPyramid(n, mu, dirs)
    if len(_CONE_CACHE) > 256:
        _CONE_CACHE.clear()
    _CONE_CACHE[key] = pyr
    return pyr


@dataclass
class ContactPatch:
    """A contacting feature on the gripper or environment.

    kind 'point' | 'disc' | 'line'; `size` is the disc diameter or line
    length (m, ignored for points). `axis` orients line patches (unit,
    tangent); discs take their orientation from the deterministic tangent
    basis. `preload` (N) marks a grasp patch whose total normal force is
    commanded rather than solved for; `pair` tags the two patches of a
    pinch so the stepper can couple their normal force difference.
    """

    name: str
    kind: str
    center: np.ndarray
    normal: np.ndarray
    mu: float = DEFAULT_MU_FINGER
    size: float = 0.0
    axis: np.ndarray | None = None
    num_facets: int = 8
    facet_anchor: np.ndarray | None = None
    preload: float | None = None
    pair: str | None = None

    def __post_init__(self):
        if self.kind not in PATCH_KINDS:
            raise ValueError(f"unknown patch kind {self.kind!r}, expected one of {PATCH_KINDS}")
        self.center = _vec3(self.center)
        self.normal = _vec3(self.normal)
        nn = np.linalg.norm(self.normal)
        if abs(nn - 1.0) > 1e-9:
            raise ValueError("patch normal must be unit length")
        self.mu = float(self.mu)
        self.size = float(self.size)
        if self.kind != "point" and self.size <= 0.0:
            raise ValueError(f"{self.kind} patch needs a positive size")
        if self.axis is not None:
            self.axis = _vec3(self.axis)
            if abs(np.linalg.norm(self.axis) - 1.0) > 1e-9:
                raise ValueError("patch axis must be unit length")
            if abs(self.axis @ self.normal) > 1e-9:
                raise ValueError("patch axis must be tangent to the normal")
        if self.kind == "line" and self.axis is None:
            raise ValueError("line patch needs an axis")
        if self.preload is not None and self.preload <= 0.0:
            raise ValueError("preload must be positive")


@dataclass
class ContactPoint:
    """One discretization point of a patch, with its share of the preload."""

    patch: str
    position: np.ndarray
    normal: np.ndarray
    pyramid: FrictionPyramid
    preload: float | None = None
    pair: str | None = None

    def __post_init__(self):
        self.position = _vec3(self.position)
        self.normal = _vec3(self.normal)

    @property
    def mu(self) -> float:
        return self.pyramid.mu


# ring radius reproducing a uniform disc's torsional friction moment:
# moment = mu*p * int r dA = (2/3) mu N R, so points sit at 2R/3
_DISC_RING_FRACTION = 2.0 / 3.0
_DISC_POINTS = 4
_LINE_POINTS = 2


_OFFSET_CACHE: dict[tuple, np.ndarray] = {}


def _patch_offsets(patch: ContactPatch) -> np.ndarray:
    key = (patch.kind, patch.normal.tobytes(), float(patch.size),
           None if patch.axis is None else patch.axis.tobytes())
    hit = _OFFSET_CACHE.get(key)
    if hit is not None:
        return hit
    if patch.kind == "point":
        offsets = np.zeros((1, 3))
    elif patch.kind == "disc":
        t1, t2 = tangent_basis(patch.normal)
        r = _DISC_RING_FRACTION * 0.5 * patch.size
        ang = 2.0 * np.pi * np.arange(_DISC_POINTS) / _DISC_POINTS
        offsets = r * (np.outer(np.cos(ang), t1) + np.outer(np.sin(ang), t2))
    else:  # line
        half = 0.5 * patch.size
        offsets = np.outer([-half, half], patch.axis)
    if len(_OFFSET_CACHE) > 256:
        _OFFSET_CACHE.clear()
    _OFFSET_CACHE[key] = offsets
    return offsets


def discretize_patch(patch: ContactPatch) -> list[ContactPoint]:
    """Fixed, deterministic point sets per patch kind (1 / 4 / 2 points)."""
    pyr = linearize_cone(patch.normal, patch.mu, patch.num_facets,
                         first_direction=patch.facet_anchor)
    offsets = _patch_offsets(patch)
    share = None if patch.preload is None else patch.preload / len(offsets)
    return [
        ContactPoint(patch.name, patch.center + off, patch.normal, pyr,
                     preload=share, pair=patch.pair)
        for off in offsets
    ]


def patch_force_torque(points: list[ContactPoint], forces: np.ndarray,
                       about=None) -> tuple[np.ndarray, np.ndarray]:
    """Sum point forces (rows of `forces`, world axes) into a patch wrench
    about `about` (default: mean point position)."""
    forces = np.asarray(forces, dtype=float).reshape(len(points), 3)
    positions = np.stack([p.position for p in points])
    if about is None:
        about = positions.mean(axis=0)
    about = _vec3(about)
    f = forces.sum(axis=0)
    tau = np.cross(positions - about, forces).sum(axis=0)
    return f, tau
