"""Trial logs: 250 Hz pose + three force/torque channels.

One trial = one primitive execution, recorded as a UTF-8 CSV with LF
endings and a fixed 26-column header: time, object position, scalar-first
quaternion, then a 6-component wrench for each of the two finger channels
(f1, f2) and the environment channel (p).  Floats are serialized with
Python repr (shortest round-trip form), so a canonical file survives
parse -> serialize byte for byte.  NaN marks an invalid sample on a
channel.  A JSON sidecar next to the CSV carries the trial parameters.

Wrench channels are world-axis, moments taken about the reporting
sensor's site at that instant.  The sites themselves are not in the log;
reconstruction (net_wrench) takes them from the scenario geometry implied
by the metadata, or accepts them explicitly for synthetic logs.  The
assumed sites are the contact patch centers, which is where the paired
fingertip sensors and the table-mounted sensor effectively measure.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .spatial import Pose
from .stepper import GRAVITY

SENSOR_CHANNELS = ("f1", "f2", "p")
SENSOR_UNCERTAINTY = {"f1": 0.25, "f2": 0.25, "p": 0.75}   # N, rated

_WRENCH_PARTS = ("fx", "fy", "fz", "tx", "ty", "tz")
COLUMNS = ("t", "px", "py", "pz", "qw", "qx", "qy", "qz") + tuple(
    f"{s}_{p}" for s in SENSOR_CHANNELS for p in _WRENCH_PARTS)
_HEADER = ",".join(COLUMNS)
_WRENCH_COLS = {s: slice(8 + 6 * k, 14 + 6 * k)
                for k, s in enumerate(SENSOR_CHANNELS)}

NOMINAL_DT = 0.004
_DT_TOL = 0.001          # accepted spacing jitter around the nominal 4 ms
_META_KEYS = ("primitive", "object", "grip_N", "speed", "geometry_param",
              "run")
_PARAM_KEYS = _META_KEYS[:-1]   # run index may differ between repeats


class TrialLogError(ValueError):
    """Malformed or inconsistent trial log; `line` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


@dataclass
class FrameRecord:
    """One sample: pose plus the three wrench channels."""

    t: float
    position: np.ndarray          # (3,)
    quaternion: np.ndarray        # (4,) scalar-first
    wrenches: dict[str, np.ndarray]
    valid: dict[str, bool]        # per channel, False when any NaN


@dataclass
class TrialLog:
    """A parsed trial: an (n, 26) array plus the sidecar metadata."""

    data: np.ndarray
    meta: dict = field(default_factory=dict)
    uncertainty: dict = field(default_factory=lambda: dict(SENSOR_UNCERTAINTY))

    def __post_init__(self):
        self.data = np.atleast_2d(np.asarray(self.data, dtype=float))
        if self.data.shape[1] != len(COLUMNS):
            raise TrialLogError(
                f"expected {len(COLUMNS)} columns, got {self.data.shape[1]}")

    def __len__(self) -> int:
        return self.data.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.data[:, 0]

    @property
    def positions(self) -> np.ndarray:
        return self.data[:, 1:4]

    @property
    def quaternions(self) -> np.ndarray:
        return self.data[:, 4:8]

    def wrench(self, channel: str) -> np.ndarray:
        return self.data[:, _WRENCH_COLS[channel]]

    def forces(self, channel: str) -> np.ndarray:
        return self.data[:, _WRENCH_COLS[channel]][:, :3]

    def channel_valid(self, channel: str) -> np.ndarray:
        return ~np.isnan(self.data[:, _WRENCH_COLS[channel]]).any(axis=1)

    def frame(self, index: int) -> FrameRecord:
        row = self.data[index]
        wr = {s: row[_WRENCH_COLS[s]].copy() for s in SENSOR_CHANNELS}
        return FrameRecord(
            t=float(row[0]), position=row[1:4].copy(),
            quaternion=row[4:8].copy(), wrenches=wr,
            valid={s: not np.isnan(w).any() for s, w in wr.items()})

    @property
    def frames(self) -> list[FrameRecord]:
        return [self.frame(i) for i in range(len(self))]


def parse_log(document: str, meta: dict | None = None) -> TrialLog:
    """Parse the canonical CSV text; strict, errors carry line numbers."""
    lines = document.split("\n")
    if lines and lines[-1] == "":
        lines.pop()                 # canonical files end with a newline
    if not lines or lines[0] != _HEADER:
        raise TrialLogError("header mismatch, expected exactly "
                            f"{_HEADER!r}", line=1)
    rows = []
    for k, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != len(COLUMNS):
            raise TrialLogError(
                f"expected {len(COLUMNS)} fields, got {len(parts)}", line=k)
        try:
            row = [float(p) for p in parts]
        except ValueError:
            bad = next(p for p in parts if not _is_float(p))
            raise TrialLogError(f"non-numeric field {bad!r}", line=k) from None
        if not math.isfinite(row[0]):
            raise TrialLogError("non-finite timestamp", line=k)
        if rows:
            dt = row[0] - rows[-1][0]
            if dt <= 0.0:
                raise TrialLogError(
                    f"timestamp not increasing ({row[0]!r} after "
                    f"{rows[-1][0]!r})", line=k)
            if abs(dt - NOMINAL_DT) > _DT_TOL:
                raise TrialLogError(
                    f"frame spacing {dt * 1e3:.3f} ms outside "
                    f"{NOMINAL_DT * 1e3:.0f} +- {_DT_TOL * 1e3:.0f} ms", line=k)
        rows.append(row)
    if not rows:
        raise TrialLogError("no data rows", line=1)
    return TrialLog(np.array(rows), meta=dict(meta or {}))


def _is_float(tok: str) -> bool:
    try:
        float(tok)
        return True
    except ValueError:
        return False


def serialize_log(log: TrialLog) -> str:
    out = [_HEADER]
    for row in log.data:
        out.append(",".join(repr(float(v)) for v in row))
    return "\n".join(out) + "\n"


def write_log(log: TrialLog, path) -> Path:
    """Write the CSV and its JSON sidecar; returns the CSV path."""
    path = Path(path)
    path.write_text(serialize_log(log), encoding="utf-8", newline="\n")
    side = {k: log.meta[k] for k in _META_KEYS if k in log.meta}
    path.with_suffix(".json").write_text(
        json.dumps(side, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_log(path) -> TrialLog:
    path = Path(path)
    meta = {}
    side = path.with_suffix(".json")
    if side.exists():
        meta = json.loads(side.read_text(encoding="utf-8"))
    return parse_log(path.read_text(encoding="utf-8"), meta=meta)


def trajectory_to_log(traj, run: int = 0) -> TrialLog:
    """Export a simulated trajectory in the trial-log schema.

    Row i carries the pre-step pose at t_i and the wrenches transmitted
    over [t_i, t_i + dt], taken about the patch centers at t_i, so the
    sensor sites reconstructed from (pose, t) stay consistent with the
    moments (net_wrench closes to machine precision on these logs).
    """
    sc = traj.scenario
    channels = sc.sensor_patches if sc is not None else {
        s: s for s in SENSOR_CHANNELS}
    h = traj.config.dt
    rows = np.empty((len(traj.results), len(COLUMNS)))
    pose = traj.initial_pose
    for i, r in enumerate(traj.results):
        rows[i, 0] = r.time - h
        rows[i, 1:4] = pose.translation
        rows[i, 4:8] = pose.quaternion
        for s in SENSOR_CHANNELS:
            rows[i, _WRENCH_COLS[s]] = r.patch_wrenches[channels[s]]
        pose = r.pose
    meta = dict(sc.metadata()) if sc is not None else {}
    meta["run"] = run
    return TrialLog(rows, meta=meta)


def remove_offsets(log: TrialLog, window: float = 0.1) -> TrialLog:
    """Subtract per-channel means over the leading baseline window.

    The window is in seconds from the first frame and must hold at least
    25 frames but not the whole log.  Idempotent: a second application
    changes nothing (the baseline mean is already zero).
    """
    t = log.times
    span = t[-1] - t[0]
    if window >= span:
        raise TrialLogError(
            f"baseline window {window} s covers the whole {span:.3f} s log")
    mask = t - t[0] <= window + 1e-12
    n = int(mask.sum())
    if n < 25:
        raise TrialLogError(f"baseline window holds {n} frames, need >= 25")
    data = log.data.copy()
    data[:, 8:] -= data[mask, 8:].mean(axis=0)
    return replace(log, data=data)


def net_wrench(log: TrialLog, index: int, sensor_sites=None,
               mass: float | None = None, gravity=GRAVITY) -> np.ndarray:
    """Total wrench on the object at one frame, about the world origin.

    Sums the three measured contact wrenches (moments transported from
    their sensor sites) and the object's weight at the logged pose.  For
    quasi-static trials this closes to zero.  Sites and mass default to
    the scenario geometry reconstructed from the metadata; pass them
    explicitly for synthetic logs.
    """
    fr = log.frame(index)
    for s in SENSOR_CHANNELS:
        if not fr.valid[s]:
            raise TrialLogError(f"channel {s} invalid at frame {index}")
    if sensor_sites is None or mass is None:
        from .scenarios import OBJECTS, build_scenario

        if mass is None:
            mass = OBJECTS[log.meta["object"]].mass
        if sensor_sites is None:
            sc = build_scenario(
                log.meta["primitive"], log.meta["object"],
                log.meta["grip_N"], log.meta["speed"],
                log.meta.get("geometry_param", 0.0))
            pose = Pose(fr.position, fr.quaternion)
            sensor_sites = sc.sensor_positions(pose, fr.t)
    force = mass * np.asarray(gravity, dtype=float)
    torque = np.cross(fr.position, force)
    for s in SENSOR_CHANNELS:
        f, tau = fr.wrenches[s][:3], fr.wrenches[s][3:]
        force = force + f
        torque = torque + tau + np.cross(np.asarray(sensor_sites[s], float), f)
    return np.concatenate([force, torque])


def variability_stats(logs: list[TrialLog]) -> dict:
    """Pointwise spread across repeated runs of the same trial.

    Logs are truncated to the shortest and compared frame by frame.  The
    headline number per channel is the peak (max - min) band expressed as
    a fraction of the peak mean absolute value; identical runs score 0.
    """
    if len(logs) < 2:
        raise TrialLogError("need at least 2 logs")
    ref = logs[0].meta
    for lg in logs[1:]:
        for k in _PARAM_KEYS:
            if k in ref and k in lg.meta and lg.meta[k] != ref[k]:
                raise TrialLogError(
                    f"mismatched metadata {k!r}: {lg.meta[k]!r} vs {ref[k]!r}")
    n = min(len(lg) for lg in logs)
    stack = np.stack([lg.data[:n, 8:] for lg in logs])   # (runs, n, 18)
    lo, hi = stack.min(axis=0), stack.max(axis=0)
    std = stack.std(axis=0)
    mean = stack.mean(axis=0)
    names = COLUMNS[8:]
    spread = {}
    for j, name in enumerate(names):
        peak = float(np.max(np.abs(mean[:, j])))
        band = float(np.max(hi[:, j] - lo[:, j]))
        spread[name] = band / peak if peak > 0.0 else 0.0
    return {
        "n_runs": len(logs),
        "n_frames": n,
        "min": {name: lo[:, j] for j, name in enumerate(names)},
        "max": {name: hi[:, j] for j, name in enumerate(names)},
        "std": {name: std[:, j] for j, name in enumerate(names)},
        "peak_spread_fraction": spread,
    }


def detect_stick_slip(log: TrialLog, enter_speed: float = 5e-4,
                      exit_speed: float = 2e-4, window: int = 5
                      ) -> list[tuple[tuple[float, float], str]]:
    """Segment the trial into stick/slip intervals by object speed.

    Speed is the centered moving average (over `window` frames) of the
    frame-to-frame position rate.  Hysteresis: slip starts above
    `enter_speed`, ends below `exit_speed`; in between the previous label
    holds, which suppresses chatter from micro-motion near threshold.
    Returns [((t_start, t_end), label), ...] covering the whole log.
    """
    if len(log) < window + 1:
        raise TrialLogError(
            f"log of {len(log)} frames shorter than the {window}-frame "
            "speed filter")
    t = log.times
    step = np.diff(log.positions, axis=0)
    speed = np.linalg.norm(step, axis=1) / np.diff(t)
    kernel = np.ones(window) / window
    smooth = np.convolve(speed, kernel, mode="same")
    slipping = smooth[0] >= enter_speed
    out = []
    start = t[0]
    for i in range(smooth.size):
        now = (smooth[i] >= enter_speed if not slipping
               else smooth[i] > exit_speed)
        if now != slipping:
            out.append(((float(start), float(t[i])),
                        "slip" if slipping else "stick"))
            start = t[i]
            slipping = now
    out.append(((float(start), float(t[-1])), "slip" if slipping else "stick"))
    return out


@dataclass
class ComparisonReport:
    """Per-channel errors of one log against another, after alignment."""

    timing_offset_s: float        # how much `exp` lags `sim`
    n_overlap: int
    rms: dict[str, float]
    peak: dict[str, float]
    slide_down_delta_mm: float
    rotation_delta_deg: float
    worst_channel: str
    worst_rms: float


def compare(sim: TrialLog, exp: TrialLog,
            max_shift: float = 0.5) -> ComparisonReport:
    """Align two trials in time and report per-channel errors.

    Alignment cross-correlates the pusher-force x channels with the shift
    bounded to +-`max_shift` seconds; errors are computed only over the
    overlapping frames after the shift.
    """
    for k in _PARAM_KEYS:
        if k in sim.meta and k in exp.meta and sim.meta[k] != exp.meta[k]:
            raise TrialLogError(
                f"incompatible metadata {k!r}: {sim.meta[k]!r} vs "
                f"{exp.meta[k]!r}")
    dt = float(np.median(np.diff(sim.times)))
    a = sim.data[:, _WRENCH_COLS["p"]][:, 0]
    b = exp.data[:, _WRENCH_COLS["p"]][:, 0]
    a = a - a.mean()
    b = b - b.mean()
    max_lag = min(int(round(max_shift / dt)), len(a) - 1, len(b) - 1)
    best_lag, best = 0, -np.inf
    for lag in range(-max_lag, max_lag + 1):
        ia, ib = max(0, -lag), max(0, lag)
        n = min(len(a) - ia, len(b) - ib)
        if n < 2:
            continue
        score = float(a[ia:ia + n] @ b[ib:ib + n]) / n
        if score > best:
            best, best_lag = score, lag
    ia, ib = max(0, -best_lag), max(0, best_lag)
    n = min(len(sim) - ia, len(exp) - ib)
    sa = sim.data[ia:ia + n, 8:]
    sb = exp.data[ib:ib + n, 8:]
    diff = sa - sb
    names = COLUMNS[8:]
    rms = {name: float(np.sqrt(np.mean(diff[:, j] ** 2)))
           for j, name in enumerate(names)}
    peak = {name: float(np.max(np.abs(diff[:, j])))
            for j, name in enumerate(names)}
    worst = max(rms, key=rms.get)
    return ComparisonReport(
        timing_offset_s=best_lag * dt,
        n_overlap=n,
        rms=rms,
        peak=peak,
        slide_down_delta_mm=(_drop_mm(sim, ia, n) - _drop_mm(exp, ib, n)),
        rotation_delta_deg=(_turn_deg(sim, ia, n) - _turn_deg(exp, ib, n)),
        worst_channel=worst,
        worst_rms=rms[worst],
    )


def _drop_mm(log: TrialLog, i0: int, n: int) -> float:
    z = log.data[i0:i0 + n, 3]
    return float((z[0] - z[-1]) * 1e3)


def _turn_deg(log: TrialLog, i0: int, n: int) -> float:
    q = log.data[i0:i0 + n, 4:8]
    dot = abs(float(np.dot(q[0], q[-1])))
    return math.degrees(2.0 * math.acos(min(1.0, dot)))
