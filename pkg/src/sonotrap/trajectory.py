"""Particle-movement experiments: step/refresh kinematics, linear sweeps,
circular orbits, and the maximum-stable-speed search.

The kinematic contract throughout is speed = step_size * refresh_rate: a
faster controller can realize the same speed with a smaller step, which is
what keeps the trap error small. The published speed table is encoded here
with refresh rates back-computed per row from speed/step.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, UnstablePlanError
from .field_sim import (
    GorkovParams,
    ParticleState,
    calibrate_source_amplitude,
    find_trap_equilibrium,
    simulate_particle,
)
from .geometry import ArrayLayout
from .medium import MediumState, wavelength
from .phase_engine import (
    ControllerTiming,
    FocalCommand,
    QuantizationConfig,
    focal_width,
    multiplex,
)


@dataclass(frozen=True)
class TrajectorySpec:
    """A commanded path: linear back-and-forth or closed circular orbit.

    size_mm is the path length (linear) or orbit radius (circular); height
    is the trap height the focus is steered at. The kinematic identity
    speed = step_size * refresh_rate is asserted at plan time within 0.5%
    (the published table rounds to that level).
    """

    shape: str  # "linear" | "circular"
    size_mm: float
    speed: float  # mm/s
    step_size: float  # mm
    height: float  # mm

    def __post_init__(self):
        if self.shape not in ("linear", "circular"):
            raise InvalidArgumentError("shape must be 'linear' or 'circular'")
        if self.size_mm < 0 or self.speed < 0 or self.step_size <= 0:
            raise InvalidArgumentError("size must be >= 0, speed >= 0, step_size > 0")


@dataclass(frozen=True)
class ExperimentResult:
    """Outcome of one tracking experiment."""

    completed: bool
    achieved_speed: float  # mm/s, commanded-trap speed realized by the plan
    rms_tracking_error: float  # mm, RMS 3-D distance to the commanded trap center
    escape_frame: int | None = None
    rms_radial_error: float | None = None  # mm, orbit-blur spread (circular runs)

    def __post_init__(self):
        if self.rms_tracking_error < 0:
            raise InvalidArgumentError("rms_tracking_error must be >= 0")


def plan_steps(
    spec: TrajectorySpec,
    timing: ControllerTiming,
    focal_width_mm: float | None = None,
) -> list[FocalCommand]:
    """Waypoint sequence realizing the spec at the controller's refresh rate.

    Consecutive waypoints are step_size apart (final step may be partial).
    Linear specs yield one seamless forward-then-back cycle; circular specs
    one closed orbit. A step larger than half the focal width is rejected:
    the trap cannot drag a particle it has already jumped past.
    """
    if spec.speed > 0:
        implied = spec.step_size * timing.refresh_rate
        if abs(implied - spec.speed) / spec.speed > 0.005:
            raise InvalidArgumentError(
                f"speed {spec.speed} != step*refresh {implied:.1f} beyond 0.5%"
            )
    if focal_width_mm is not None and spec.step_size > focal_width_mm / 2.0:
        raise UnstablePlanError(
            f"step {spec.step_size} mm exceeds half the focal width {focal_width_mm:.2f} mm"
        )
    h = spec.height
    if spec.size_mm == 0:
        return [FocalCommand((0.0, 0.0, h))]
    if spec.shape == "linear":
        length, s = spec.size_mm, spec.step_size
        n = math.ceil(length / s)
        x0 = -length / 2.0
        fwd = [x0 + min(k * s, length) for k in range(1, n + 1)]
        xs = [x0] + fwd + fwd[-2::-1]
        return [FocalCommand((x, 0.0, h)) for x in xs]
    radius, s = spec.size_mm, spec.step_size
    n = math.ceil(2.0 * math.pi * radius / s)
    angles = np.arange(n) * (s / radius)
    return [
        FocalCommand((radius * math.cos(a), radius * math.sin(a), h)) for a in angles
    ]


def waypoints_per_leg(spec: TrajectorySpec) -> int:
    """Waypoints needed to traverse one leg (linear) or orbit (circular)."""
    path = spec.size_mm if spec.shape == "linear" else 2.0 * math.pi * spec.size_mm
    return math.ceil(path / spec.step_size)


def run_experiment(
    layout: ArrayLayout,
    medium: MediumState,
    spec: TrajectorySpec,
    timing: ControllerTiming,
    particle: ParticleState | None = None,
    iterations: int = 1,
    warmup_cycles: int = 0,
    source_amplitude: float | None = None,
    dt: float | None = None,
    escape_frames: int = 20,
) -> ExperimentResult:
    """Drive the trap along the spec and track the particle.

    The particle starts at the trap equilibrium of the first waypoint with
    the commanded tangential velocity (speeds are ramped in practice, not
    stepped from rest). completed means the particle never strayed more
    than one focal width from the commanded trap center for more than
    escape_frames consecutive frames over `iterations` plan cycles;
    warmup_cycles are simulated first and excluded from the statistics.
    """
    if iterations < 1:
        raise InvalidArgumentError("iterations must be >= 1")
    carrier = layout.emitter_carrier()
    lam = wavelength(carrier, medium)
    width = focal_width(lam, spec.height, layout.side_length_D)
    plan = plan_steps(spec, timing, focal_width_mm=width)
    quant = QuantizationConfig(carrier_hz=carrier)
    schedule = multiplex(layout, plan, medium, quant, timing)
    amplitude = calibrate_source_amplitude(medium=medium) if source_amplitude is None else source_amplitude
    dt = timing.latency / 10.0 if dt is None else dt

    if particle is None:
        particle = ParticleState.eps_sphere(plan[0].target)
    params = GorkovParams(particle.radius, particle.density, 900.0, medium)
    w0 = plan[0].target
    eq = find_trap_equilibrium(
        layout, schedule.frames[0], medium, params, amplitude, xy=(w0[0], w0[1])
    )
    if spec.speed > 0 and len(plan) > 1:
        direction = plan[1].target - plan[0].target
        direction = direction / np.linalg.norm(direction)
    else:
        direction = np.zeros(3)
    start = ParticleState(eq, direction * spec.speed, particle.radius, particle.density)

    cycle_time = len(plan) * schedule.dwell
    duration = (warmup_cycles + iterations) * cycle_time
    traj = simulate_particle(
        layout, schedule, medium, start, dt, duration, amplitude, params=params
    )

    # commanded trap center: waypoint xy at the settled trap height
    times = traj.times[1:]
    pos = traj.positions[1:]
    idx = (times / schedule.dwell).astype(int) % len(plan)
    cmd = np.array([p.target for p in plan])[idx]
    centers = np.column_stack([cmd[:, 0], cmd[:, 1], np.full(len(idx), eq[2])])
    dist = np.linalg.norm(pos - centers, axis=1)

    threshold_steps = max(1, escape_frames * max(1, round(schedule.dwell / dt)))
    over = dist > width
    escape_frame = None
    run = 0
    for i, flag in enumerate(over):
        run = run + 1 if flag else 0
        if run >= threshold_steps:
            escape_frame = int(idx[i])
            break
    if traj.escaped and escape_frame is None:
        escape_frame = int(idx[-1]) if len(idx) else 0
    completed = escape_frame is None and not traj.escaped

    measure = times > warmup_cycles * cycle_time - 1e-12
    measured_dist = dist[measure] if measure.any() else dist
    rms = float(np.sqrt(np.mean(measured_dist**2))) if len(measured_dist) else 0.0
    rms_radial = None
    if spec.shape == "circular" and measure.any():
        rho = np.linalg.norm(pos[measure, :2], axis=1)
        rms_radial = float(np.std(rho))
    achieved = spec.step_size * timing.refresh_rate if spec.speed > 0 else 0.0
    return ExperimentResult(
        completed=completed,
        achieved_speed=achieved,
        rms_tracking_error=rms,
        escape_frame=escape_frame,
        rms_radial_error=rms_radial,
    )


def max_stable_speed(
    layout: ArrayLayout,
    medium: MediumState,
    shape: str,
    timing: ControllerTiming,
    particle: ParticleState | None = None,
    size_mm: float | None = None,
    height: float = 100.0,
    resolution: float = 10.0,
    iterations: int = 1,
    source_amplitude: float | None = None,
) -> float:
    """Largest speed (mm/s) whose experiment completes, by bisection.

    Speed maps to step size at the fixed refresh rate, so the search is
    bounded above by the plan-stability guard (step <= focal width / 2).
    Returns 0 when even the slowest ramp fails.
    """
    if size_mm is None:
        size_mm = 10.0 if shape == "linear" else 30.0
    lam = wavelength(layout.emitter_carrier(), medium)
    width = focal_width(lam, height, layout.side_length_D)
    upper = (width / 2.0) * timing.refresh_rate
    lower = 0.0

    def completes(speed: float) -> bool:
        step = speed / timing.refresh_rate
        spec = TrajectorySpec(shape, size_mm, speed, step, height)
        try:
            result = run_experiment(
                layout, medium, spec, timing, particle,
                iterations=iterations, source_amplitude=source_amplitude,
            )
        except UnstablePlanError:
            return False
        return result.completed

    if not completes(min(resolution, upper)):
        return 0.0
    if completes(upper):
        return upper
    lower = min(resolution, upper)
    hi = upper
    while hi - lower > resolution:
        mid = (lower + hi) / 2.0
        if completes(mid):
            lower = mid
        else:
            hi = mid
    return lower


# -- published particle-speed table -------------------------------------------

@dataclass(frozen=True)
class SpeedTableRow:
    name: str
    shape: str  # linear | circular
    implementation: str  # software | hardware
    speed: float  # mm/s
    step_size: float  # mm
    normalized_speed: float  # mm/s, at the fixed (hardware) step size
    fixed_step_size: float  # mm

    def back_computed_refresh(self) -> float:
        """Refresh rate implied by this row's speed and step, Hz."""
        return self.speed / self.step_size


SPEED_TABLE = (
    SpeedTableRow("linear software", "linear", "software", 385.0, 0.05929, 168.0, 0.026),
    SpeedTableRow("linear hardware", "linear", "hardware", 392.0, 0.026, 392.0, 0.026),
    SpeedTableRow("circular software", "circular", "software", 450.0, 0.0709, 197.0, 0.0304),
    SpeedTableRow("circular hardware", "circular", "hardware", 460.0, 0.0304, 460.0, 0.0304),
)


def software_refresh_rate() -> float:
    """The software pipeline's refresh rate, Hz, back-computed from the
    linear software row (equivalently 1 / 154 us)."""
    return SPEED_TABLE[0].back_computed_refresh()


def normalized_speed(row: SpeedTableRow) -> float:
    """Speed at the fixed hardware step size.

    Software rows are re-rated at the software pipeline refresh; hardware
    rows already run at their own rate with the fixed step.
    """
    rate = software_refresh_rate() if row.implementation == "software" else row.back_computed_refresh()
    return row.fixed_step_size * rate


def speed_table_csv(rows=SPEED_TABLE) -> str:
    """CSV mirroring the published table's columns."""
    buf = io.StringIO()
    buf.write("name,speed_mm_s,step_size_mm,normalized_speed_mm_s,fixed_step_size_mm,refresh_hz\n")
    for row in rows:
        buf.write(
            f"{row.name},{row.speed},{row.step_size},{row.normalized_speed},"
            f"{row.fixed_step_size},{row.back_computed_refresh():.1f}\n"
        )
    return buf.getvalue()
