"""Rigid-body simulator for in-hand pushing: a grasped object driven
against external contacts, with frictional contact resolved as a
complementarity problem each step."""

__version__ = "0.1.0"

from .spatial import (  # noqa: F401
    Pose,
    Twist,
    Wrench,
    MassProps,
    compose,
    integrate_pose,
    contact_jacobian,
    transform_wrench,
)
from .contacts import ContactPatch, ContactPoint, FrictionPyramid, discretize_patch  # noqa: F401
from .lcp import LCPProblem, LCPSolution, solve_lemke, solve_pgs, solve_enumerate  # noqa: F401
from .stepper import (  # noqa: F401
    BoundsReport,
    ContactSet,
    PinchPair,
    SimConfig,
    SimState,
    StepResult,
    Trajectory,
    force_resolution_bounds,
    simulate,
    step,
)
from .scenarios import (  # noqa: F401
    OBJECTS,
    ObjectSpec,
    Scenario,
    SweepGrid,
    SweepRow,
    build_linear_push,
    build_pivot,
    build_roll,
    build_scenario,
    builtin_grid,
    run_sweep,
    summarize,
)
from .triallog import (  # noqa: F401
    SENSOR_UNCERTAINTY,
    ComparisonReport,
    FrameRecord,
    TrialLog,
    TrialLogError,
    compare,
    detect_stick_slip,
    load_log,
    net_wrench,
    parse_log,
    remove_offsets,
    serialize_log,
    trajectory_to_log,
    variability_stats,
    write_log,
)
