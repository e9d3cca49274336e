"""Continuous-wave acoustic field, radiation forces and particle motion.

The field is a superposition of baffled-piston sources at the common
carrier; a rigid reflector plate is modelled by image sources mirrored
about the plane with unchanged phase. Geometry is handled in millimetres
at the API surface and converted to SI internally; pressures are phasor
peak amplitudes in pascals.

Radiation forces on small spheres come from the standard small-particle
potential built from the time-averaged pressure and velocity fields, with
the velocity phasor obtained from central-difference pressure gradients.
The square-wave drive radiates through its fundamental only (the
transducers attenuate everything else), which is folded into the
calibrated source amplitude.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import j1

from .errors import InvalidArgumentError, SingularityError, SliceTooSmallError
from .geometry import ArrayLayout, flat_8x8
from .medium import MediumState, wavelength
from .phase_engine import (
    FocalCommand,
    MultiplexSchedule,
    PhaseFrame,
    QuantizationConfig,
    compute_frame,
)

P_REF = 20e-6  # Pa, SPL reference
GRAVITY = 9.81  # m/s^2
AIR_VISCOSITY = 1.81e-5  # Pa s
EPS_DENSITY = 29.63  # kg/m^3, expanded polystyrene test spheres
EPS_SOUND_SPEED = 900.0  # m/s, foamed polystyrene longitudinal speed
REFERENCE_SPL_DB = 172.0  # measured on-focus SPL used for calibration
REFERENCE_FOCUS_MM = (0.0, 0.0, 100.0)
#: Lab temperature implied by the reference wavelength (c=340 m/s -> 8.5 mm at 40 kHz)
REFERENCE_TEMPERATURE_C = 43.0 / 3.0


@dataclass(frozen=True)
class FieldSample:
    """Complex pressure phasor (Pa, peak) at one point (mm)."""

    point: np.ndarray
    pressure: complex

    def __post_init__(self):
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float).reshape(3))
        if not np.isfinite(self.pressure):
            raise InvalidArgumentError("pressure must be finite")


@dataclass(frozen=True, eq=False)
class FieldSlice:
    """Complex pressure sampled on an axis-aligned plane.

    plane is one of 'xy', 'xz', 'yz'; offset fixes the remaining axis.
    pressure[i, j] corresponds to (u_coords[i], v_coords[j]).
    """

    plane: str
    offset: float
    u_coords: np.ndarray
    v_coords: np.ndarray
    pressure: np.ndarray
    pitch: float

    def __post_init__(self):
        object.__setattr__(self, "u_coords", np.asarray(self.u_coords, dtype=float))
        object.__setattr__(self, "v_coords", np.asarray(self.v_coords, dtype=float))
        object.__setattr__(self, "pressure", np.asarray(self.pressure, dtype=complex))

    def header_dict(self) -> dict:
        return {
            "plane": self.plane,
            "offset_mm": self.offset,
            "pitch_mm": self.pitch,
            "shape": list(self.pressure.shape),
            "u_axis": self.plane[0],
            "v_axis": self.plane[1],
        }

    def to_csv(self) -> str:
        """Grid as CSV rows x,y,|p|,spl (in-plane coordinates)."""
        buf = io.StringIO()
        buf.write("x,y,abs_p,spl_db\n")
        for i, u in enumerate(self.u_coords):
            for jdx, v in enumerate(self.v_coords):
                mag = abs(self.pressure[i, jdx])
                buf.write(f"{u:.6g},{v:.6g},{mag:.9g},{spl(mag):.6g}\n")
        return buf.getvalue()


@dataclass(frozen=True)
class GorkovParams:
    """Particle / medium contrast for the small-sphere potential."""

    particle_radius: float  # mm
    particle_density: float  # kg/m^3
    particle_sound_speed: float  # m/s
    medium: MediumState

    def __post_init__(self):
        if self.particle_radius <= 0 or self.particle_density <= 0 or self.particle_sound_speed <= 0:
            raise InvalidArgumentError("particle radius, density and sound speed must be positive")

    @classmethod
    def eps_sphere(cls, medium: MediumState, radius_mm: float = 0.5) -> "GorkovParams":
        """The 1 mm diameter EPS test sphere."""
        return cls(radius_mm, EPS_DENSITY, EPS_SOUND_SPEED, medium)

    def monopole_factor(self) -> float:
        """f1 = 1 - rho*c^2 / (rho_p*c_p^2)."""
        rho, c = self.medium.density_air, self.medium.speed_of_sound
        return 1.0 - rho * c**2 / (self.particle_density * self.particle_sound_speed**2)

    def dipole_factor(self) -> float:
        """f2 = 2(rho_p - rho) / (2 rho_p + rho)."""
        rho = self.medium.density_air
        return 2.0 * (self.particle_density - rho) / (2.0 * self.particle_density + rho)

    def mass_kg(self) -> float:
        return self.particle_density * 4.0 / 3.0 * math.pi * (self.particle_radius * 1e-3) ** 3


@dataclass(frozen=True)
class ParticleState:
    """Levitated sphere state: position mm, velocity mm/s."""

    position: np.ndarray
    velocity: np.ndarray
    radius: float  # mm
    density: float  # kg/m^3

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=float).reshape(3))
        if self.radius <= 0 or self.density <= 0:
            raise InvalidArgumentError("radius and density must be positive")

    @classmethod
    def eps_sphere(cls, position, velocity=(0.0, 0.0, 0.0), radius_mm: float = 0.5) -> "ParticleState":
        return cls(position, velocity, radius_mm, EPS_DENSITY)

    def mass_kg(self) -> float:
        return self.density * 4.0 / 3.0 * math.pi * (self.radius * 1e-3) ** 3


class SourceSet:
    """Geometry arrays (SI) for one layout, image sources included.

    Building this once and reusing it across frames keeps the per-step cost
    of particle simulation down; only the phase vector changes per frame.
    """

    def __init__(self, layout: ArrayLayout):
        pos = layout.emitter_positions * 1e-3
        nrm = layout.emitter_normals.copy()
        rad = np.array([t.radius for t in layout.emitters]) * 1e-3
        self.mirrored = layout.reflector_z is not None
        if self.mirrored:
            z_r = layout.reflector_z * 1e-3
            ipos = pos.copy()
            ipos[:, 2] = 2.0 * z_r - ipos[:, 2]
            inrm = nrm.copy()
            inrm[:, 2] = -inrm[:, 2]
            pos = np.vstack([pos, ipos])
            nrm = np.vstack([nrm, inrm])
            rad = np.concatenate([rad, rad])
        self.positions = pos
        self.normals = nrm
        self.radii = rad

    def full_phases(self, phases: np.ndarray) -> np.ndarray:
        # rigid wall: image sources share the source phase
        return np.concatenate([phases, phases]) if self.mirrored else phases

    def min_distance_m(self, points_m: np.ndarray) -> float:
        diff = points_m[:, None, :] - self.positions[None, :, :]
        return float(np.sqrt(np.einsum("nmk,nmk->nm", diff, diff)).min())

    def pressure(self, points_m: np.ndarray, phases: np.ndarray, k: float, amp_pa_m: float) -> np.ndarray:
        """Summed piston pressure phasors at points (m), shape (N,)."""
        ph = self.full_phases(phases)
        diff = points_m[:, None, :] - self.positions[None, :, :]
        d = np.sqrt(np.einsum("nmk,nmk->nm", diff, diff))
        cos = np.einsum("nmk,mk->nm", diff, self.normals) / d
        sin = np.sqrt(np.clip(1.0 - cos * cos, 0.0, 1.0))
        x = k * self.radii[None, :] * sin
        small = x < 1e-8
        xs = np.where(small, 1.0, x)
        dire = np.where(small, 1.0 - x * x / 8.0, 2.0 * j1(xs) / xs)
        dire = np.where(cos >= 0.0, dire, 0.0)  # baffled piston: forward half-space
        return np.einsum("nm->n", amp_pa_m / d * dire * np.exp(1j * (k * d - ph[None, :])))


_SOURCE_CACHE: dict[int, tuple[ArrayLayout, SourceSet]] = {}


def _sources(layout: ArrayLayout) -> SourceSet:
    entry = _SOURCE_CACHE.get(id(layout))
    if entry is None or entry[0] is not layout:
        entry = (layout, SourceSet(layout))
        _SOURCE_CACHE[id(layout)] = entry
        if len(_SOURCE_CACHE) > 32:
            _SOURCE_CACHE.pop(next(iter(_SOURCE_CACHE)))
    return entry[1]


def pressure_field(
    layout: ArrayLayout,
    frame: PhaseFrame,
    medium: MediumState,
    points_mm,
    source_amplitude: float,
) -> np.ndarray:
    """Complex pressure (Pa, peak) at many points (mm), shape (N,).

    source_amplitude is in Pa*mm: the on-axis phasor amplitude of a single
    emitter at 1 mm.
    """
    pts = np.atleast_2d(np.asarray(points_mm, dtype=float)) * 1e-3
    lam_m = wavelength(layout.emitter_carrier(), medium) * 1e-3
    src = _sources(layout)
    return src.pressure(pts, frame.phases, 2.0 * math.pi / lam_m, source_amplitude * 1e-3)


def pressure_at(
    layout: ArrayLayout,
    frame: PhaseFrame,
    medium: MediumState,
    point_mm,
    source_amplitude: float,
) -> complex:
    """Complex pressure at one point; rejects evaluation at a source center."""
    pts = np.asarray(point_mm, dtype=float).reshape(1, 3)
    if _sources(layout).min_distance_m(pts * 1e-3) < 1e-9:
        raise SingularityError("field evaluated at a transducer center")
    return complex(pressure_field(layout, frame, medium, pts, source_amplitude)[0])


def spl(pressure) -> float:
    """Sound pressure level, dB: 20*log10(|p|/sqrt(2) / 20 uPa).

    |p| is the phasor peak amplitude; zero pressure maps to -inf.
    """
    mag = abs(pressure)
    if mag == 0.0:
        return float("-inf")
    return 20.0 * math.log10(mag / math.sqrt(2.0) / P_REF)


def pressure_for_spl(spl_db: float) -> float:
    """Peak phasor amplitude (Pa) corresponding to an SPL in dB."""
    return math.sqrt(2.0) * P_REF * 10.0 ** (spl_db / 20.0)


def calibrate_source_amplitude(
    layout: ArrayLayout | None = None,
    medium: MediumState | None = None,
    target_mm=REFERENCE_FOCUS_MM,
    spl_db: float = REFERENCE_SPL_DB,
    quant: QuantizationConfig | None = None,
) -> float:
    """Source amplitude (Pa*mm) reproducing the measured on-focus SPL.

    Defaults to the 8x8 / 40 kHz array focused at (0,0,100) mm, where the
    reference measurement reported 172 dB. All force and trap results
    inherit this calibration.
    """
    medium = MediumState.from_temperature(REFERENCE_TEMPERATURE_C) if medium is None else medium
    layout = flat_8x8() if layout is None else layout
    quant = QuantizationConfig(carrier_hz=layout.emitter_carrier()) if quant is None else quant
    frame = compute_frame(layout, FocalCommand(target_mm), medium, quant)
    unit = abs(pressure_at(layout, frame, medium, target_mm, 1.0))
    return pressure_for_spl(spl_db) / unit


def sample_slice(
    layout: ArrayLayout,
    frame: PhaseFrame,
    medium: MediumState,
    plane: str,
    offset: float,
    u_range: tuple[float, float],
    v_range: tuple[float, float],
    pitch: float,
    source_amplitude: float,
) -> FieldSlice:
    """Pressure on a regular grid over an axis-aligned plane."""
    if plane not in ("xy", "xz", "yz"):
        raise InvalidArgumentError("plane must be one of xy, xz, yz")
    us = np.arange(u_range[0], u_range[1] + pitch / 2, pitch)
    vs = np.arange(v_range[0], v_range[1] + pitch / 2, pitch)
    uu, vv = np.meshgrid(us, vs, indexing="ij")
    fixed_axis = {"xy": 2, "xz": 1, "yz": 0}[plane]
    axes = [a for a in range(3) if a != fixed_axis]
    pts = np.empty((uu.size, 3))
    pts[:, axes[0]] = uu.ravel()
    pts[:, axes[1]] = vv.ravel()
    pts[:, fixed_axis] = offset
    p = pressure_field(layout, frame, medium, pts, source_amplitude).reshape(uu.shape)
    return FieldSlice(plane=plane, offset=offset, u_coords=us, v_coords=vs, pressure=p, pitch=pitch)


def _line_width_at_level(xs: np.ndarray, mags: np.ndarray, level_db: float):
    """Full width where the profile crosses level_db below its peak."""
    ipk = int(np.argmax(mags))
    thr = mags[ipk] * 10.0 ** (level_db / 20.0)
    left = right = None
    for i in range(ipk, 0, -1):
        if mags[i] < thr:
            f = (thr - mags[i]) / (mags[i + 1] - mags[i])
            left = xs[i] + f * (xs[i + 1] - xs[i])
            break
    for i in range(ipk, len(xs)):
        if mags[i] < thr:
            f = (thr - mags[i - 1]) / (mags[i] - mags[i - 1])
            right = xs[i - 1] + f * (xs[i] - xs[i - 1])
            break
    if left is None or right is None:
        raise SliceTooSmallError(f"no {level_db} dB crossing inside the scan window")
    return right - left, xs[ipk]


def measure_focal_width(
    layout: ArrayLayout,
    frame: PhaseFrame,
    medium: MediumState,
    source_amplitude: float = 1.0,
    plane_z: float | None = None,
    level_db: float = -6.0,
    half_extent: float = 45.0,
    pitch: float | None = None,
) -> float:
    """Focal width (mm): full width at level_db below on-focus SPL, along
    the x line through the commanded focus at z = plane_z.

    The scan pitch defaults to lambda/8 (the lambda/4 sampling guard is
    enforced). Raises SliceTooSmallError when the crossing lies outside
    the scan window.
    """
    lam = wavelength(layout.emitter_carrier(), medium)
    pitch = lam / 8.0 if pitch is None else pitch
    if pitch > lam / 4.0:
        raise InvalidArgumentError("scan pitch must be <= lambda/4 for width measurements")
    cx, cy, cz = frame.command.target
    z = cz if plane_z is None else _plane_through_focus(plane_z, cz)
    xs = np.arange(cx - half_extent, cx + half_extent + pitch / 2, pitch)
    pts = np.column_stack([xs, np.full_like(xs, cy), np.full_like(xs, z)])
    mags = np.abs(pressure_field(layout, frame, medium, pts, source_amplitude))
    width, _ = _line_width_at_level(xs, mags, level_db)
    return float(width)


def _plane_through_focus(plane_z: float, command_z: float) -> float:
    if abs(plane_z - command_z) > 1e-9:
        raise InvalidArgumentError("width is measured in the plane through the focus")
    return plane_z


def gorkov_potential_many(
    layout: ArrayLayout,
    frame: PhaseFrame,
    medium: MediumState,
    params: GorkovParams,
    points_mm,
    source_amplitude: float,
    h_mm: float | None = None,
) -> np.ndarray:
    """Small-sphere acoustic potential (J) at many points (mm).

    U = 2*pi*a^3 [ f1 <p^2> / (3 rho c^2) - f2 rho <v^2> / 2 ], with the
    velocity phasor from central-difference pressure gradients (step h,
    default lambda/100).
    """
    lam_mm = wavelength(layout.emitter_carrier(), medium)
    if params.particle_radius > lam_mm / 4.0:
        raise InvalidArgumentError(
            f"particle radius {params.particle_radius} mm exceeds the lambda/4 validity bound"
        )
    h_mm = lam_mm / 100.0 if h_mm is None else h_mm
    pts = np.atleast_2d(np.asarray(points_mm, dtype=float))
    src = _sources(layout)
    if src.min_distance_m(pts * 1e-3) < 2.0 * h_mm * 1e-3:
        raise SingularityError("potential evaluated within 2h of a source center")
    offs = np.array(
        [[0, 0, 0], [h_mm, 0, 0], [-h_mm, 0, 0], [0, h_mm, 0], [0, -h_mm, 0], [0, 0, h_mm], [0, 0, -h_mm]],
        dtype=float,
    )
    stencil = (pts[:, None, :] + offs[None, :, :]).reshape(-1, 3)
    p = pressure_field(layout, frame, medium, stencil, source_amplitude).reshape(len(pts), 7)
    h_m = h_mm * 1e-3
    grad = np.stack([p[:, 1] - p[:, 2], p[:, 3] - p[:, 4], p[:, 5] - p[:, 6]], axis=1) / (2.0 * h_m)
    rho = medium.density_air
    c = medium.speed_of_sound
    omega = 2.0 * math.pi * layout.emitter_carrier()
    v2_avg = np.sum(np.abs(grad) ** 2, axis=1) / (omega * rho) ** 2 / 2.0
    p2_avg = np.abs(p[:, 0]) ** 2 / 2.0
    a_m = params.particle_radius * 1e-3
    return 2.0 * math.pi * a_m**3 * (
        params.monopole_factor() * p2_avg / (3.0 * rho * c**2)
        - params.dipole_factor() * rho * v2_avg / 2.0
    )


def gorkov_potential(layout, frame, medium, params, point_mm, source_amplitude, h_mm=None) -> float:
    """Small-sphere acoustic potential (J) at one point (mm)."""
    return float(
        gorkov_potential_many(layout, frame, medium, params, np.reshape(point_mm, (1, 3)), source_amplitude, h_mm)[0]
    )


def radiation_force_many(
    layout: ArrayLayout,
    frame: PhaseFrame,
    medium: MediumState,
    params: GorkovParams,
    points_mm,
    source_amplitude: float,
    h_mm: float | None = None,
) -> np.ndarray:
    """Radiation force (N), F = -grad U by central differences, step lambda/100."""
    lam_mm = wavelength(layout.emitter_carrier(), medium)
    h_mm = lam_mm / 100.0 if h_mm is None else h_mm
    pts = np.atleast_2d(np.asarray(points_mm, dtype=float))
    offs = np.array(
        [[h_mm, 0, 0], [-h_mm, 0, 0], [0, h_mm, 0], [0, -h_mm, 0], [0, 0, h_mm], [0, 0, -h_mm]],
        dtype=float,
    )
    stencil = (pts[:, None, :] + offs[None, :, :]).reshape(-1, 3)
    u = gorkov_potential_many(layout, frame, medium, params, stencil, source_amplitude, h_mm).reshape(len(pts), 6)
    h_m = h_mm * 1e-3
    return -np.stack([u[:, 0] - u[:, 1], u[:, 2] - u[:, 3], u[:, 4] - u[:, 5]], axis=1) / (2.0 * h_m)


def radiation_force(layout, frame, medium, params, point_mm, source_amplitude, h_mm=None) -> np.ndarray:
    """Radiation force (N) on the small sphere at one point (mm)."""
    return radiation_force_many(layout, frame, medium, params, np.reshape(point_mm, (1, 3)), source_amplitude, h_mm)[0]


def find_pressure_nodes(
    layout: ArrayLayout,
    frame: PhaseFrame,
    medium: MediumState,
    source_amplitude: float,
    z_range: tuple[float, float],
    xy=(0.0, 0.0),
    scan_step: float | None = None,
) -> np.ndarray:
    """z positions (mm) of |p| minima along a vertical line, refined by a
    parabolic fit of |p|^2 around each discrete minimum."""
    lam = wavelength(layout.emitter_carrier(), medium)
    step = lam / 200.0 if scan_step is None else scan_step
    zs = np.arange(z_range[0], z_range[1], step)
    pts = np.column_stack([np.full_like(zs, xy[0]), np.full_like(zs, xy[1]), zs])
    mag2 = np.abs(pressure_field(layout, frame, medium, pts, source_amplitude)) ** 2
    nodes = []
    for i in range(1, len(zs) - 1):
        if mag2[i] < mag2[i - 1] and mag2[i] < mag2[i + 1]:
            y0, y1, y2 = mag2[i - 1], mag2[i], mag2[i + 1]
            denom = y0 - 2.0 * y1 + y2
            dz = 0.0 if denom == 0 else 0.5 * (y0 - y2) / denom * step
            nodes.append(zs[i] + dz)
    return np.array(nodes)


def find_trap_equilibrium(
    layout: ArrayLayout,
    frame: PhaseFrame,
    medium: MediumState,
    params: GorkovParams,
    source_amplitude: float,
    xy=(0.0, 0.0),
    z_window: tuple[float, float] | None = None,
    gravity: float = GRAVITY,
) -> np.ndarray:
    """Stable levitation point (mm) on the vertical line through xy.

    Finds the highest z where the vertical force balance
    F_z(z) - m g = 0 crosses from + to - (a restoring trap) inside the
    window. Raises SliceTooSmallError when no trap exists there.
    """
    weight = params.mass_kg() * gravity
    if z_window is None:
        z_hi = layout.reflector_z if layout.reflector_z is not None else float(frame.command.target[2])
        z_window = (z_hi - 15.0, z_hi - 0.5)

    def fz(z):
        return radiation_force(layout, frame, medium, params, (xy[0], xy[1], z), source_amplitude)[2] - weight

    zs = np.arange(z_window[0], z_window[1], wavelength(layout.emitter_carrier(), medium) / 40.0)
    vals = np.array([fz(z) for z in zs])
    crossings = np.flatnonzero((vals[:-1] > 0) & (vals[1:] <= 0))
    if len(crossings) == 0:
        raise SliceTooSmallError("no stable vertical equilibrium in the window")
    i = crossings[-1]
    z_eq = brentq(fz, zs[i], zs[i + 1], xtol=1e-9)
    return np.array([xy[0], xy[1], z_eq])


@dataclass(eq=False)
class Trajectory:
    """Recorded particle motion; positions mm, velocities mm/s."""

    times: np.ndarray
    positions: np.ndarray  # (N, 3)
    velocities: np.ndarray  # (N, 3)
    escaped: bool = False
    escape_index: int | None = None
    radius: float = 0.5
    density: float = EPS_DENSITY

    @property
    def states(self) -> list[ParticleState]:
        return [
            ParticleState(self.positions[i], self.velocities[i], self.radius, self.density)
            for i in range(len(self.times))
        ]

    def final_state(self) -> ParticleState:
        return ParticleState(self.positions[-1], self.velocities[-1], self.radius, self.density)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("t,x,y,z,vx,vy,vz\n")
        for i, t in enumerate(self.times):
            x, y, z = self.positions[i]
            vx, vy, vz = self.velocities[i]
            buf.write(f"{t:.9g},{x:.9g},{y:.9g},{z:.9g},{vx:.9g},{vy:.9g},{vz:.9g}\n")
        return buf.getvalue()


def simulate_particle(
    layout: ArrayLayout,
    drive: PhaseFrame | MultiplexSchedule,
    medium: MediumState,
    particle: ParticleState,
    dt: float,
    duration: float,
    source_amplitude: float,
    params: GorkovParams | None = None,
    gravity: float = GRAVITY,
    air_viscosity: float = AIR_VISCOSITY,
    record_every: int = 1,
    stop_when_outside=None,
) -> Trajectory:
    """Integrate m a = F_rad + m g + F_drag with semi-implicit Euler.

    Stokes drag 6*pi*mu*a*v. Under a schedule the active frame switches per
    dwell and dt must not exceed dwell/10. Integration stops early (escape
    recorded) when the particle leaves the working volume, or the
    stop_when_outside box if given.
    """
    if params is None:
        params = GorkovParams(particle.radius, particle.density, EPS_SOUND_SPEED, medium)
    schedule = drive if isinstance(drive, MultiplexSchedule) else None
    static_frame = drive if schedule is None else None
    if schedule is None and static_frame is None and source_amplitude != 0.0:
        raise InvalidArgumentError("a drive frame or schedule is required unless the amplitude is 0")
    if schedule is not None and dt > schedule.dwell / 10.0 + 1e-15:
        raise InvalidArgumentError("dt must be <= dwell/10 when following a schedule")
    volume = layout.working_volume() if stop_when_outside is None else stop_when_outside

    mass = particle.mass_kg()
    drag = 6.0 * math.pi * air_viscosity * (particle.radius * 1e-3)  # N s/m
    g_vec = np.array([0.0, 0.0, -gravity])

    x = particle.position * 1e-3
    v = particle.velocity * 1e-3
    n_steps = int(round(duration / dt))
    times, positions, velocities = [0.0], [x * 1e3], [v * 1e3]
    escaped = False
    escape_index = None
    hold_zero_force = source_amplitude == 0.0
    t = 0.0
    for step in range(n_steps):
        frame = schedule.frame_at(t) if schedule is not None else static_frame
        if hold_zero_force:
            f_rad = np.zeros(3)
        else:
            f_rad = radiation_force(layout, frame, medium, params, x * 1e3, source_amplitude)
        a = f_rad / mass + g_vec - (drag / mass) * v
        v = v + dt * a
        x = x + dt * v
        t += dt
        if (step + 1) % record_every == 0 or step == n_steps - 1:
            times.append(t)
            positions.append(x * 1e3)
            velocities.append(v * 1e3)
        if not volume.contains(x * 1e3):
            escaped = True
            escape_index = step
            break
    return Trajectory(
        times=np.array(times),
        positions=np.array(positions),
        velocities=np.array(velocities),
        escaped=escaped,
        escape_index=escape_index,
        radius=particle.radius,
        density=particle.density,
    )


def slice_header_json(sl: FieldSlice) -> str:
    return json.dumps(sl.header_dict(), indent=2)
