"""Experiment scenes: object catalog, grasp geometry, and sweep runner.

Three primitives, all with a two-finger pinch on a prismatic or
cylindrical object and one external feature:

* linear push: the object's end face is pressed against a fixed flat
  wall while the gripper translates toward it; the object slides inside
  the grasp (back along the push axis, down under gravity);
* pivot: the gripper rotates about the grasp axis while a fixed support
  ridge under the object blocks co-rotation at nonzero offsets;
* roll: a grasped cylinder is dragged across a high-friction platform;
  the platform sticks and the cylinder rolls between the fingertips.

World frame: x is the push direction and z is up. Builders fix push
DISTANCE, not duration (15 mm linear, 1 rad pivot, 12.5 mm = 1 rad of
rolling), so outcomes are comparable across speeds.

Contact modeling choices that the mechanics force:

* fingertip pads are preloaded discs (the grip force is commanded, not
  solved for) discretized as a 4-point ring that preserves the pad's
  torsional friction moment;
* the wall contact uses support points on the boundary of the end face
  (prism corners / disc rim). During slide-down the wall friction's
  pitch torque needs the full half-face lever arm; an interior ring
  cannot balance it and the object would pitch;
* the pivot ridge is re-declared every step at the fixed world line
  with the world support normal (+z) and zero gap. With the
  instantaneous face normal the velocity constraint itself forbids
  co-rotation at finite angle (the face sweeps into the fixed edge at
  second order), which contradicts the observed stationary pivot.

Sensor sites for the exported force channels are the patch centers
(mean contact point), with wrenches in world axes; `sensor_positions`
reproduces them so net-wrench checks can transport all channels to a
common frame.
"""

from __future__ import annotations

import math
import time as _time
from dataclasses import dataclass

import numpy as np

from .contacts import ContactPatch, ContactPoint, discretize_patch, linearize_cone, tangent_basis
from .spatial import MassProps, Pose, cross3, quat_from_axis_angle
from .stepper import ContactSet, PinchPair, SimConfig, Trajectory, simulate

_X = np.array([1.0, 0.0, 0.0])
_Y = np.array([0.0, 1.0, 0.0])
_Z = np.array([0.0, 0.0, 1.0])

PAD_DIAMETER = 0.020          # circular fingertip pads
RIDGE_LENGTH = 0.028          # pivot support line
LINEAR_PUSH_DISTANCE = 0.015  # m of gripper travel
ROLL_PUSH_DISTANCE = 0.0125   # m, one radian of rolling for a 25 mm cylinder
PIVOT_ANGLE = 1.0             # rad of commanded gripper rotation
MAX_SLOPE_DEG = 20.0

# fitted friction defaults per primitive (finger, external); the finger
# value for linear pushing sits below the nominal pad range on purpose,
# see README for the calibration argument
LINEAR_MU = (0.15, 0.25)
PIVOT_MU = (0.45, 0.25)
ROLL_MU = (0.35, 2.5)

# facet counts (finger, external): the linear push needs a fine finger
# cone because the slide-down rate is the facet tie angle of the cone;
# external contacts get a coarse cone anchored on the expected slip
LINEAR_FACETS = (32, 4)
PIVOT_FACETS = (8, 4)
ROLL_FACETS = (8, 4)

_DISC_RING_FRACTION = 2.0 / 3.0
_RING_COUNT = 4

PRIMITIVES = ("linear_push", "pivot", "roll")


@dataclass(frozen=True)
class ObjectSpec:
    """Catalog entry: nominal geometry and mass of one test object."""

    id: str
    shape: str        # 'cylinder' | 'cylinder_flat_faces' | 'square_prism'
    length: float     # m, long axis
    width: float      # m, side or diameter
    mass: float       # kg
    material: str

    def mass_props(self) -> MassProps:
        m, length, w = self.mass, self.length, self.width
        if self.shape == "square_prism":
            ixx = m * (w * w + w * w) / 12.0
            iyy = izz = m * (length * length + w * w) / 12.0
        else:
            # both cylinders; the machined flats are ignored for inertia
            r = w / 2.0
            ixx = m * r * r / 2.0
            iyy = izz = m * (3.0 * r * r + length * length) / 12.0
        return MassProps(m, inertia=np.diag([ixx, iyy, izz]))

    def end_face_points(self) -> np.ndarray:
        """Support points on the boundary of the -x end face (body frame)."""
        h = self.width / 2.0
        x = -self.length / 2.0
        if self.shape == "square_prism":
            return np.array([[x, sy * h, sz * h] for sy in (-1.0, 1.0) for sz in (-1.0, 1.0)])
        return np.array([[x, h, 0.0], [x, -h, 0.0], [x, 0.0, h], [x, 0.0, -h]])

    @property
    def has_flat_grasp_faces(self) -> bool:
        return self.shape in ("square_prism", "cylinder_flat_faces")


OBJECTS = {
    "obj1": ObjectSpec("obj1", "cylinder", 0.100, 0.025, 0.158, "aluminum 6061"),
    "obj2": ObjectSpec("obj2", "cylinder", 0.100, 0.025, 0.0725, "ABS"),
    "obj3": ObjectSpec("obj3", "cylinder_flat_faces", 0.100, 0.025, 0.145, "aluminum 6061"),
    "obj4": ObjectSpec("obj4", "square_prism", 0.100, 0.025, 0.2005, "aluminum 6061"),
    "obj5": ObjectSpec("obj5", "square_prism", 0.100, 0.025, 0.0938, "ABS"),
}


def _lookup(object_id: str) -> ObjectSpec:
    if object_id not in OBJECTS:
        raise ValueError(f"unknown object {object_id!r}, expected one of {sorted(OBJECTS)}")
    return OBJECTS[object_id]


def _ring_offsets(normal: np.ndarray) -> np.ndarray:
    t1, t2 = tangent_basis(normal)
    r = _DISC_RING_FRACTION * 0.5 * PAD_DIAMETER
    ang = 2.0 * np.pi * np.arange(_RING_COUNT) / _RING_COUNT
    return r * (np.outer(np.cos(ang), t1) + np.outer(np.sin(ang), t2))


@dataclass
class Scenario:
    """One parameterized trial, consumable by `stepper.simulate`.

    `speed` is mm/s for linear push and roll, deg/s for pivot.
    `geometry_param` is the slope in degrees (linear), the pusher offset
    in mm (pivot), and unused (roll). Patch names are fixed: 'f1' and
    'f2' for the fingers, 'p' for the external contact; for the roll
    'f1' is the rear (pushing) finger, otherwise the +y finger.
    """

    name: str
    primitive: str
    obj: ObjectSpec
    grip: float
    speed: float
    geometry_param: float
    duration: float
    mu_finger: float
    mu_pusher: float
    finger_facets: int
    pusher_facets: int
    mass_props: MassProps

    @property
    def sensor_patches(self) -> dict[str, str]:
        return {"f1": "f1", "f2": "f2", "p": "p"}

    @property
    def pair_normal(self) -> np.ndarray:
        """Pinch normal: points from the front finger toward the rear one."""
        return _X.copy() if self.primitive == "roll" else -_Y

    def initial_pose(self) -> Pose:
        if self.primitive == "linear_push":
            s = math.radians(self.geometry_param)
            push = np.array([math.cos(s), 0.0, math.sin(s)])
            return Pose((self.obj.length / 2.0) * push,
                        quat_from_axis_angle(_Y, -s))
        if self.primitive == "pivot":
            return Pose.identity()
        return Pose(np.array([0.0, 0.0, self.obj.width / 2.0]),
                    quat_from_axis_angle(_Z, np.pi / 2.0))

    def contact_set(self, pose: Pose, t: float) -> ContactSet:
        if self.primitive == "linear_push":
            return self._linear_contacts(pose, t)
        if self.primitive == "pivot":
            return self._pivot_contacts(pose, t)
        return self._roll_contacts(pose, t)

    # -- linear push ------------------------------------------------------

    def _linear_frame(self, t: float):
        s = math.radians(self.geometry_param)
        push = np.array([math.cos(s), 0.0, math.sin(s)])
        down = np.array([math.sin(s), 0.0, -math.cos(s)])   # in-wall gravity direction
        v = self.speed * 1e-3
        grasp = (self.obj.length / 2.0 - v * t) * push
        return push, down, v, grasp

    def _linear_contacts(self, pose: Pose, t: float) -> ContactSet:
        push, down, v, grasp = self._linear_frame(t)
        half_w = self.obj.width / 2.0
        pts: list[ContactPoint] = []
        driven: list[np.ndarray] = []
        gaps: list[float] = []
        for name, side in (("f1", 1.0), ("f2", -1.0)):
            pad = ContactPatch(name, "disc", grasp + side * half_w * _Y, -side * _Y,
                               mu=self.mu_finger, size=PAD_DIAMETER,
                               num_facets=self.finger_facets, facet_anchor=push,
                               preload=self.grip, pair="grasp")
            for p in discretize_patch(pad):
                pts.append(p)
                driven.append(-v * push)
                gaps.append(0.0)
        pyr = linearize_cone(push, self.mu_pusher, self.pusher_facets,
                             first_direction=down)
        for body_pt in self.obj.end_face_points():
            w = pose.transform_point(body_pt)
            pts.append(ContactPoint("p", w, push, pyr))
            driven.append(np.zeros(3))
            gaps.append(float(w @ push))   # wall plane passes through the origin
        pair = PinchPair("grasp", normal=-_Y, center=grasp, rate=0.0,
                         rear_patch="f1", front_patch="f2")
        return ContactSet(pts, driven=np.array(driven), pairs=[pair],
                          gaps=np.array(gaps))

    # -- pivot ------------------------------------------------------------

    def _pivot_contacts(self, pose: Pose, t: float) -> ContactSet:
        omega = math.radians(self.speed)
        phi = omega * t
        c, s = math.cos(phi), math.sin(phi)
        rot = np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
        half_w = self.obj.width / 2.0
        d = self.geometry_param * 1e-3
        pts: list[ContactPoint] = []
        driven: list[np.ndarray] = []
        gaps: list[float] = []
        anchor = rot @ _X   # pad material frame rotates with the gripper
        for name, side in (("f1", 1.0), ("f2", -1.0)):
            n = -side * _Y
            pyr = linearize_cone(n, self.mu_finger, self.finger_facets,
                                 first_direction=anchor)
            center = side * half_w * _Y
            for off in _ring_offsets(n):
                p = center + rot @ off
                pts.append(ContactPoint(name, p, n, pyr,
                                        preload=self.grip / _RING_COUNT, pair="grasp"))
                driven.append(omega * cross3(_Y, p))
                gaps.append(0.0)
        # support ridge: fixed world line, world-vertical normal, zero
        # declared gap; see the module docstring for why not the face normal
        pyr_r = linearize_cone(_Z, self.mu_pusher, self.pusher_facets,
                               first_direction=_X)
        for e in (1.0, -1.0):
            pos = np.array([d, e * RIDGE_LENGTH / 2.0, -half_w])
            pts.append(ContactPoint("p", pos, _Z, pyr_r))
            driven.append(np.zeros(3))
            gaps.append(0.0)
        pair = PinchPair("grasp", normal=-_Y, center=np.zeros(3), rate=0.0,
                         rear_patch="f1", front_patch="f2")
        return ContactSet(pts, driven=np.array(driven), pairs=[pair],
                          gaps=np.array(gaps))

    # -- roll -------------------------------------------------------------

    def _roll_contacts(self, pose: Pose, t: float) -> ContactSet:
        v = self.speed * 1e-3
        radius = self.obj.width / 2.0
        grasp = np.array([v * t, 0.0, radius])
        pts: list[ContactPoint] = []
        driven: list[np.ndarray] = []
        gaps: list[float] = []
        for name, side in (("f1", -1.0), ("f2", 1.0)):
            pad = ContactPatch(name, "line", grasp + side * radius * _X, -side * _X,
                               mu=self.mu_finger, size=PAD_DIAMETER, axis=_Y,
                               num_facets=self.finger_facets, facet_anchor=_Z,
                               preload=self.grip, pair="grasp")
            for p in discretize_patch(pad):
                pts.append(p)
                driven.append(v * _X)
                gaps.append(0.0)
        axis_w = pose.transform_direction(_X)   # cylinder axis in world, nominally +y
        pyr_p = linearize_cone(_Z, self.mu_pusher, self.pusher_facets,
                               first_direction=_X)
        for e in (1.0, -1.0):
            pos = pose.translation + e * (self.obj.length / 2.0) * axis_w - radius * _Z
            pts.append(ContactPoint("p", pos, _Z, pyr_p))
            driven.append(np.zeros(3))
            gaps.append(float(pos[2]))          # platform plane is z = 0
        # the grasp line of action lies along the travel here, so the
        # commanded rate is the carry velocity, not zero as in the other
        # primitives where the gripper moves perpendicular to the pinch
        pair = PinchPair("grasp", normal=_X, center=grasp, rate=v,
                         rear_patch="f1", front_patch="f2")
        return ContactSet(pts, driven=np.array(driven), pairs=[pair],
                          gaps=np.array(gaps))

    # -- reporting helpers ------------------------------------------------

    def sensor_positions(self, pose: Pose, t: float) -> dict[str, np.ndarray]:
        """Patch centers at time t, matching the exported wrench channels."""
        half_w = self.obj.width / 2.0
        if self.primitive == "linear_push":
            _, _, _, grasp = self._linear_frame(t)
            return {
                "f1": grasp + half_w * _Y,
                "f2": grasp - half_w * _Y,
                "p": pose.transform_point([-self.obj.length / 2.0, 0.0, 0.0]),
            }
        if self.primitive == "pivot":
            return {
                "f1": half_w * _Y.copy(),
                "f2": -half_w * _Y,
                "p": np.array([self.geometry_param * 1e-3, 0.0, -half_w]),
            }
        grasp = np.array([self.speed * 1e-3 * t, 0.0, half_w])
        return {
            "f1": grasp - half_w * _X,
            "f2": grasp + half_w * _X,
            "p": pose.translation - half_w * _Z,
        }

    def metadata(self) -> dict:
        return {
            "primitive": self.primitive,
            "object": self.obj.id,
            "grip_N": self.grip,
            "speed": self.speed,
            "geometry_param": self.geometry_param,
        }


def _check_positive(grip: float, speed: float) -> None:
    if grip <= 0.0:
        raise ValueError("grip force must be positive; zero grip is no grasp")
    if speed <= 0.0:
        raise ValueError("speed must be positive")


def build_linear_push(object_id: str, grip: float, velocity: float, slope: float = 0.0,
                      *, mu_finger: float | None = None, mu_pusher: float | None = None,
                      finger_facets: int | None = None, pusher_facets: int | None = None,
                      distance: float | None = None) -> Scenario:
    """Straight push of a prismatic object against a flat wall.

    `velocity` in mm/s, `slope` in degrees from horizontal (limited to
    +-20). The push covers `distance` (default 15 mm) regardless of
    speed, so duration scales as distance/velocity.
    """
    obj = _lookup(object_id)
    if not obj.has_flat_grasp_faces:
        raise ValueError(f"{object_id} has no flat grasp faces for a linear push")
    _check_positive(grip, velocity)
    if abs(slope) > MAX_SLOPE_DEG:
        raise ValueError(f"slope {slope} deg outside the supported +-{MAX_SLOPE_DEG:g} deg")
    distance = LINEAR_PUSH_DISTANCE if distance is None else float(distance)
    if distance <= 0.0:
        raise ValueError("push distance must be positive")
    return Scenario(
        name=f"linear_push-{object_id}-g{grip:g}-v{velocity:g}-s{slope:g}",
        primitive="linear_push", obj=obj, grip=float(grip), speed=float(velocity),
        geometry_param=float(slope), duration=distance / (velocity * 1e-3),
        mu_finger=LINEAR_MU[0] if mu_finger is None else float(mu_finger),
        mu_pusher=LINEAR_MU[1] if mu_pusher is None else float(mu_pusher),
        finger_facets=LINEAR_FACETS[0] if finger_facets is None else int(finger_facets),
        pusher_facets=LINEAR_FACETS[1] if pusher_facets is None else int(pusher_facets),
        mass_props=obj.mass_props(),
    )


def build_pivot(object_id: str, grip: float, angular_velocity: float,
                pusher_offset: float = 0.0,
                *, mu_finger: float | None = None, mu_pusher: float | None = None,
                finger_facets: int | None = None, pusher_facets: int | None = None,
                angle: float | None = None) -> Scenario:
    """Gripper rotation about the grasp axis against a support ridge.

    `angular_velocity` in deg/s, `pusher_offset` in mm from the object
    center along the long axis. Commanded rotation is `angle` rad
    (default 1). At zero offset the object co-rotates with the gripper;
    at positive offsets the ridge blocks co-rotation and the fingertips
    slip, so the ridge load grows with the grip force.
    """
    obj = _lookup(object_id)
    if obj.shape != "square_prism":
        raise ValueError(f"{object_id} is not a square prism; pivoting needs flat faces "
                         "on a prismatic object")
    _check_positive(grip, angular_velocity)
    if abs(pusher_offset) * 1e-3 > obj.length / 2.0:
        raise ValueError(f"pusher offset {pusher_offset} mm beyond half the object length")
    angle = PIVOT_ANGLE if angle is None else float(angle)
    if angle <= 0.0:
        raise ValueError("pivot angle must be positive")
    return Scenario(
        name=f"pivot-{object_id}-g{grip:g}-w{angular_velocity:g}-o{pusher_offset:g}",
        primitive="pivot", obj=obj, grip=float(grip), speed=float(angular_velocity),
        geometry_param=float(pusher_offset),
        duration=angle / math.radians(angular_velocity),
        mu_finger=PIVOT_MU[0] if mu_finger is None else float(mu_finger),
        mu_pusher=PIVOT_MU[1] if mu_pusher is None else float(mu_pusher),
        finger_facets=PIVOT_FACETS[0] if finger_facets is None else int(finger_facets),
        pusher_facets=PIVOT_FACETS[1] if pusher_facets is None else int(pusher_facets),
        mass_props=obj.mass_props(),
    )


def build_roll(object_id: str, grip: float, velocity: float,
               *, mu_finger: float | None = None, mu_platform: float | None = None,
               finger_facets: int | None = None, pusher_facets: int | None = None,
               distance: float | None = None) -> Scenario:
    """Drag a pinched cylinder across a high-friction platform.

    `velocity` in mm/s. Default travel is 12.5 mm, one radian of rolling
    for the 25 mm cylinders. Below the grip threshold the platform
    sticks and the object rolls between the fingertips; above it the
    fingertips hold and the object skids on the platform.
    """
    obj = _lookup(object_id)
    if obj.shape != "cylinder":
        raise ValueError(f"{object_id} is not a plain cylinder; rolling needs one")
    _check_positive(grip, velocity)
    distance = ROLL_PUSH_DISTANCE if distance is None else float(distance)
    if distance <= 0.0:
        raise ValueError("push distance must be positive")
    return Scenario(
        name=f"roll-{object_id}-g{grip:g}-v{velocity:g}",
        primitive="roll", obj=obj, grip=float(grip), speed=float(velocity),
        geometry_param=0.0, duration=distance / (velocity * 1e-3),
        mu_finger=ROLL_MU[0] if mu_finger is None else float(mu_finger),
        mu_pusher=ROLL_MU[1] if mu_platform is None else float(mu_platform),
        finger_facets=ROLL_FACETS[0] if finger_facets is None else int(finger_facets),
        pusher_facets=ROLL_FACETS[1] if pusher_facets is None else int(pusher_facets),
        mass_props=obj.mass_props(),
    )


_BUILDERS = {
    "linear_push": build_linear_push,
    "pivot": build_pivot,
    "roll": build_roll,
}


def build_scenario(primitive: str, object_id: str, grip: float, speed: float,
                   param: float = 0.0, **overrides) -> Scenario:
    """Dispatch to the primitive's builder; `param` is its geometry knob."""
    if primitive not in _BUILDERS:
        raise ValueError(f"unknown primitive {primitive!r}, expected one of {PRIMITIVES}")
    if primitive == "roll":
        if param:
            raise ValueError("roll takes no geometry parameter")
        return build_roll(object_id, grip, speed, **overrides)
    return _BUILDERS[primitive](object_id, grip, speed, param, **overrides)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

GRIP_GRID = (20.0, 22.0, 25.0, 27.0, 30.0, 32.0, 35.0)
LINEAR_SPEED_GRID = (10.0, 15.0, 20.0, 25.0)
SLOPE_GRID = (-20.0, -10.0, 0.0, 10.0, 20.0)
PIVOT_SPEED_GRID = (2.5, 5.0, 10.0, 15.0, 20.0)
OFFSET_GRID = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0)
ROLL_GRIP_GRID = (3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0)
ROLL_SPEED_GRID = (5.0, 10.0, 15.0, 20.0, 25.0)


@dataclass(frozen=True)
class SweepGrid:
    """Cartesian parameter grid for one object and primitive.

    `runs` records how many times each cell was repeated on hardware;
    the simulator is deterministic, so a sweep executes each cell once
    and keeps the count as metadata.
    """

    primitive: str
    object_id: str
    grips: tuple
    speeds: tuple
    params: tuple
    runs: int = 3

    def cells(self) -> list[tuple[float, float, float]]:
        return [(g, s, p) for g in self.grips for s in self.speeds for p in self.params]

    @property
    def size(self) -> int:
        return len(self.grips) * len(self.speeds) * len(self.params)


def builtin_grid(primitive: str, object_id: str) -> SweepGrid:
    """The standard experiment grid of a primitive, applied to one object."""
    obj = _lookup(object_id)
    if primitive == "linear_push":
        if not obj.has_flat_grasp_faces:
            raise ValueError(f"{object_id} is not in the linear-push set")
        return SweepGrid(primitive, object_id, GRIP_GRID, LINEAR_SPEED_GRID, SLOPE_GRID)
    if primitive == "pivot":
        if obj.shape != "square_prism":
            raise ValueError(f"{object_id} is not in the pivot set")
        return SweepGrid(primitive, object_id, GRIP_GRID, PIVOT_SPEED_GRID, OFFSET_GRID)
    if primitive == "roll":
        if obj.shape != "cylinder":
            raise ValueError(f"{object_id} is not in the roll set")
        return SweepGrid(primitive, object_id, ROLL_GRIP_GRID, ROLL_SPEED_GRID, (0.0,))
    raise ValueError(f"unknown primitive {primitive!r}")


@dataclass
class SweepRow:
    """Summary metrics of one grid cell."""

    index: int
    object_id: str
    grip: float
    speed: float
    param: float
    ok: bool
    failure: str
    steps: int
    peak_pusher_force: float
    slide_down_mm: float
    rotation_deg: float
    finger_asymmetry: float
    max_net_residual: float
    wall_time: float


def summarize(traj: Trajectory) -> dict:
    """Trajectory metrics shared by sweep rows and the CLI summary."""
    sc = traj.scenario
    out = {
        "steps": len(traj.results),
        "failed": traj.failed,
        "failure": traj.failure,
        "wall_time": traj.wall_time,
    }
    if not traj.results:
        out.update(peak_pusher_force=math.nan, slide_down_mm=math.nan,
                   rotation_deg=math.nan, finger_asymmetry=math.nan,
                   max_net_residual=math.nan)
        return out
    pw = traj.patch_wrench_series("p")
    out["peak_pusher_force"] = float(np.max(np.linalg.norm(pw[:, :3], axis=1)))
    first = traj.initial_pose.translation
    last = traj.results[-1].pose.translation
    out["slide_down_mm"] = float((first[2] - last[2]) * 1e3)
    q0, q1 = traj.initial_pose.quaternion, traj.results[-1].pose.quaternion
    out["rotation_deg"] = math.degrees(2.0 * math.acos(min(1.0, abs(float(q0 @ q1)))))
    tail = max(1, len(traj.results) // 4)
    n1 = sc.pair_normal if sc is not None else _X
    asym = [((r.patch_wrenches["f1"][:3] + r.patch_wrenches["f2"][:3]) @ n1)
            for r in traj.results[-tail:]]
    out["finger_asymmetry"] = float(np.mean(asym))
    out["max_net_residual"] = traj.max_net_residual()
    return out


def run_sweep(grid: SweepGrid, config: SimConfig | None = None,
              **overrides) -> list[SweepRow]:
    """Simulate every cell in grid order; failures are recorded, not raised.

    Cells run sequentially and the report order is the deterministic
    grid order (grips outermost, geometry parameter innermost).
    """
    config = config if config is not None else SimConfig()
    rows: list[SweepRow] = []
    for idx, (grip, speed, param) in enumerate(grid.cells()):
        t0 = _time.perf_counter()
        try:
            scenario = build_scenario(grid.primitive, grid.object_id, grip, speed,
                                      param, **overrides)
            traj = simulate(scenario, config)
            m = summarize(traj)
            rows.append(SweepRow(
                index=idx, object_id=grid.object_id, grip=grip, speed=speed,
                param=param, ok=not traj.failed, failure=traj.failure,
                steps=m["steps"], peak_pusher_force=m["peak_pusher_force"],
                slide_down_mm=m["slide_down_mm"], rotation_deg=m["rotation_deg"],
                finger_asymmetry=m["finger_asymmetry"],
                max_net_residual=m["max_net_residual"], wall_time=m["wall_time"],
            ))
        except Exception as e:  # a bad cell must not kill the sweep
            rows.append(SweepRow(
                index=idx, object_id=grid.object_id, grip=grip, speed=speed,
                param=param, ok=False, failure=f"{type(e).__name__}: {e}",
                steps=0, peak_pusher_force=math.nan, slide_down_mm=math.nan,
                rotation_deg=math.nan, finger_asymmetry=math.nan,
                max_net_residual=math.nan,
                wall_time=_time.perf_counter() - t0,
            ))
    return rows
