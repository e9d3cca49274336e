"""Transducer array layouts: flat grids, reflector rigs, spherical caps.

All positions are in millimetres, frequencies in hertz. The coordinate
frame puts the flat array center at the origin with +z up; spherical caps
are centered on their center of curvature at the origin.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .errors import AdcChannelLimitError, InvalidArgumentError, LayoutInfeasibleError

#: Effective radiating radius per shipped carrier, mm. The 40 kHz and
#: 25 kHz units are different physical devices (16/18 mm housings); the
#: radiating aperture is smaller than the housing and is calibrated so the
#: simulated beam reproduces the measured focal-width behaviour.
DEFAULT_RADIATING_RADIUS = {40_000.0: 6.5, 25_000.0: 9.0}

GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))


class Role(enum.Enum):
    EMITTER = "emitter"
    RECEIVER = "receiver"


class ArrayKind(enum.Enum):
    FLAT = "flat"
    FLAT_WITH_REFLECTOR = "flat_with_reflector"
    SPHERICAL_CAP = "spherical_cap"
    DOUBLE_SIDED = "double_sided"


def default_radiating_radius(carrier_hz: float) -> float:
    """Effective piston radius (mm) for a carrier, from the shipped device table."""
    for f, r in DEFAULT_RADIATING_RADIUS.items():
        if abs(carrier_hz - f) < 1e-6:
            return r
    return 6.5


@dataclass(frozen=True, eq=False)
class Transducer:
    """One array element.

    Parameters
    ----------
    id : int
        Channel index, unique and contiguous from 0 within a layout.
    position : array_like, shape (3,)
        Center position, mm.
    normal : array_like, shape (3,)
        Unit emission axis.
    radius : float
        Radiating aperture radius, mm.
    carrier_frequency : float
        Operating frequency, Hz.
    role : Role
        Emitter (default) or receiver.
    """

    id: int
    position: np.ndarray
    normal: np.ndarray
    radius: float
    carrier_frequency: float
    role: Role = Role.EMITTER

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float).reshape(3)
        nrm = np.asarray(self.normal, dtype=float).reshape(3)
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "normal", nrm)
        if abs(np.linalg.norm(nrm) - 1.0) > 1e-9:
            raise InvalidArgumentError(f"normal must be unit length, got |n|={np.linalg.norm(nrm)!r}")
        if self.radius <= 0:
            raise InvalidArgumentError("radius must be positive")
        if self.carrier_frequency <= 0:
            raise InvalidArgumentError("carrier_frequency must be positive")


@dataclass(frozen=True)
class WorkingVolume:
    """Axis-aligned command validation box, mm intervals."""

    x_range: tuple[float, float]
    y_range: tuple[float, float]
    z_range: tuple[float, float]

    def __post_init__(self):
        for lo, hi in (self.x_range, self.y_range, self.z_range):
            if not hi > lo:
                raise InvalidArgumentError("working volume ranges must be non-empty")

    def contains(self, point) -> bool:
        p = np.asarray(point, dtype=float).reshape(3)
        return bool(
            self.x_range[0] <= p[0] <= self.x_range[1]
            and self.y_range[0] <= p[1] <= self.y_range[1]
            and self.z_range[0] <= p[2] <= self.z_range[1]
        )

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """n uniform points inside the box, shape (n, 3)."""
        lows = np.array([self.x_range[0], self.y_range[0], self.z_range[0]])
        highs = np.array([self.x_range[1], self.y_range[1], self.z_range[1]])
        return rng.uniform(lows, highs, size=(n, 3))


@dataclass(frozen=True, eq=False)
class ArrayLayout:
    """Immutable transducer arrangement plus optional reflector plane."""

    transducers: tuple[Transducer, ...]
    kind: ArrayKind
    side_length_D: float
    reflector_z: float | None = None
    cap_radius: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "transducers", tuple(self.transducers))
        ids = [t.id for t in self.transducers]
        if sorted(ids) != list(range(len(ids))):
            raise InvalidArgumentError("channel ids must be unique and contiguous from 0")

    @property
    def emitters(self) -> tuple[Transducer, ...]:
        return tuple(t for t in self.transducers if t.role is Role.EMITTER)

    @property
    def receivers(self) -> tuple[Transducer, ...]:
        return tuple(t for t in self.transducers if t.role is Role.RECEIVER)

    @cached_property
    def emitter_positions(self) -> np.ndarray:
        """(N, 3) emitter centers, mm; rows follow emitter channel order."""
        return np.array([t.position for t in self.emitters], dtype=float).reshape(-1, 3)

    @cached_property
    def emitter_normals(self) -> np.ndarray:
        return np.array([t.normal for t in self.emitters], dtype=float).reshape(-1, 3)

    @cached_property
    def emitter_ids(self) -> np.ndarray:
        return np.array([t.id for t in self.emitters], dtype=int)

    def emitter_carrier(self) -> float:
        """Common emitter carrier, Hz. Raises if emitters are mixed."""
        carriers = {t.carrier_frequency for t in self.emitters}
        if len(carriers) != 1:
            raise InvalidArgumentError(f"emitters use mixed carriers: {sorted(carriers)}")
        return carriers.pop()

    def working_volume(self) -> WorkingVolume:
        """Default command box for this layout."""
        if self.kind in (ArrayKind.FLAT, ArrayKind.FLAT_WITH_REFLECTOR):
            half = self.side_length_D / 2.0
            z_hi = self.reflector_z if self.reflector_z is not None else 250.0
            return WorkingVolume((-half, half), (-half, half), (20.0, z_hi))
        r = self.cap_radius if self.cap_radius is not None else 100.0
        half = r / 2.0
        return WorkingVolume((-half, half), (-half, half), (-half, half))

    def to_json_dict(self) -> dict:
        doc = {
            "kind": self.kind.value,
            "side_length_d": self.side_length_D,
            "transducers": [
                {
                    "id": t.id,
                    "pos": t.position.tolist(),
                    "normal": t.normal.tolist(),
                    "radius": t.radius,
                    "freq": t.carrier_frequency,
                    "role": t.role.value,
                }
                for t in self.transducers
            ],
        }
        if self.reflector_z is not None:
            doc["reflector_z"] = self.reflector_z
        if self.cap_radius is not None:
            doc["cap_radius"] = self.cap_radius
        return doc

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ArrayLayout":
        transducers = tuple(
            Transducer(
                id=int(t["id"]),
                position=t["pos"],
                normal=t["normal"],
                radius=float(t["radius"]),
                carrier_frequency=float(t["freq"]),
                role=Role(t["role"]),
            )
            for t in doc["transducers"]
        )
        return cls(
            transducers=transducers,
            kind=ArrayKind(doc["kind"]),
            side_length_D=float(doc["side_length_d"]),
            reflector_z=doc.get("reflector_z"),
            cap_radius=doc.get("cap_radius"),
        )

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_json_dict(), indent=2)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        return text

    @classmethod
    def from_json(cls, source) -> "ArrayLayout":
        if hasattr(source, "read"):
            doc = json.load(source)
        else:
            try:
                doc = json.loads(source)
            except (json.JSONDecodeError, TypeError):
                with open(source, encoding="utf-8") as fh:
                    doc = json.load(fh)
        return cls.from_json_dict(doc)


def build_flat_array(nx: int, ny: int, pitch: float, carrier: float, radius: float | None = None) -> ArrayLayout:
    """Centered nx-by-ny emitter grid at z=0, all normals +z.

    Parameters
    ----------
    nx, ny : int
        Grid extent, >= 1.
    pitch : float
        Center-to-center spacing, mm.
    carrier : float
        Operating frequency, Hz.
    radius : float, optional
        Radiating radius override, mm.

    The bounding side length D is max(nx, ny) * pitch, which reproduces
    D = 132 mm for the 8x8 grid at 16.5 mm pitch.
    """
    if nx < 1 or ny < 1:
        raise InvalidArgumentError("nx and ny must be >= 1")
    if pitch <= 0:
        raise InvalidArgumentError("pitch must be positive")
    r = default_radiating_radius(carrier) if radius is None else radius
    xs = (np.arange(nx) - (nx - 1) / 2.0) * pitch
    ys = (np.arange(ny) - (ny - 1) / 2.0) * pitch
    transducers = []
    cid = 0
    for ix in range(nx):
        for iy in range(ny):
            transducers.append(
                Transducer(cid, (xs[ix], ys[iy], 0.0), (0.0, 0.0, 1.0), r, carrier)
            )
            cid += 1
    return ArrayLayout(
        transducers=tuple(transducers),
        kind=ArrayKind.FLAT,
        side_length_D=max(nx, ny) * pitch,
    )


def _cap_points(cap_radius: float, count: int, half_angle_rad: float) -> np.ndarray:
    """Golden-angle spiral on the upper spherical cap around the +z pole."""
    if count == 1:
        return np.array([[0.0, 0.0, cap_radius]])
    k = np.arange(count)
    cos_t = 1.0 - (1.0 - np.cos(half_angle_rad)) * (k + 0.5) / count
    sin_t = np.sqrt(1.0 - cos_t**2)
    phi = k * GOLDEN_ANGLE
    return cap_radius * np.column_stack([sin_t * np.cos(phi), sin_t * np.sin(phi), cos_t])


def build_spherical_cap(
    cap_radius: float,
    count: int,
    carrier: float,
    double_sided: bool = False,
    half_angle_deg: float = 60.0,
    radius: float | None = None,
) -> ArrayLayout:
    """Transducers on a spherical cap, all aimed at the center of curvature.

    The center of curvature sits at the origin. Single-sided caps occupy
    the upper pole (a single transducer lands on the +z axis with normal
    -z); double-sided caps mirror half the elements about the focal plane
    z=0 so the two shells face each other.
    """
    if cap_radius <= 0:
        raise InvalidArgumentError("cap_radius must be positive")
    if count < 1:
        raise InvalidArgumentError("count must be >= 1")
    if double_sided and count % 2 != 0:
        raise InvalidArgumentError("double-sided caps need an even count")
    r = default_radiating_radius(carrier) if radius is None else radius

    if double_sided:
        top = _cap_points(cap_radius, count // 2, np.deg2rad(half_angle_deg))
        bottom = top * np.array([1.0, 1.0, -1.0])
        points = np.vstack([top, bottom])
    else:
        points = _cap_points(cap_radius, count, np.deg2rad(half_angle_deg))

    if count > 1:
        diff = points[:, None, :] - points[None, :, :]
        dist = np.linalg.norm(diff, axis=2)
        np.fill_diagonal(dist, np.inf)
        min_spacing = dist.min()
        if min_spacing < 2.0 * r:
            raise LayoutInfeasibleError(
                f"transducer apertures overlap: min center spacing {min_spacing:.2f} mm "
                f"< {2 * r:.2f} mm; reduce count or widen half_angle_deg"
            )

    transducers = tuple(
        Transducer(i, p, -p / np.linalg.norm(p), r, carrier) for i, p in enumerate(points)
    )
    return ArrayLayout(
        transducers=transducers,
        kind=ArrayKind.DOUBLE_SIDED if double_sided else ArrayKind.SPHERICAL_CAP,
        side_length_D=2.0 * cap_radius * np.sin(np.deg2rad(half_angle_deg)),
        cap_radius=cap_radius,
    )


def add_reflector(layout: ArrayLayout, z: float) -> ArrayLayout:
    """Rigid reflector plane z = const above a flat array."""
    if layout.kind is not ArrayKind.FLAT:
        raise InvalidArgumentError("reflector plates attach to flat arrays only")
    z_max = max(t.position[2] for t in layout.transducers)
    if z <= z_max:
        raise InvalidArgumentError(f"reflector z={z} must be above all emitters (z_max={z_max})")
    return replace(layout, kind=ArrayKind.FLAT_WITH_REFLECTOR, reflector_z=z)


def mark_receivers(layout: ArrayLayout, ids, receiver_carrier: float) -> ArrayLayout:
    """Re-role the named channels as receivers at the given carrier.

    The ADC on the controller has two channels; marking more than two
    receivers in total is rejected.
    """
    ids = list(ids)
    if not ids:
        return layout
    known = {t.id for t in layout.transducers}
    missing = [i for i in ids if i not in known]
    if missing:
        raise InvalidArgumentError(f"unknown channel ids: {missing}")
    n_after = len(layout.receivers) + len(set(ids) - {t.id for t in layout.receivers})
    if n_after > 2:
        raise AdcChannelLimitError(f"ADC supports 2 receive channels, requested {n_after}")
    idset = set(ids)
    transducers = tuple(
        replace(t, role=Role.RECEIVER, carrier_frequency=receiver_carrier) if t.id in idset else t
        for t in layout.transducers
    )
    return replace(layout, transducers=transducers)


# -- shipped presets ---------------------------------------------------------

def flat_8x8(carrier: float = 40_000.0) -> ArrayLayout:
    """The 64-channel 8x8 grid, 16.5 mm pitch (D = 132 mm)."""
    return build_flat_array(8, 8, 16.5, carrier)


def reflector_rig(reflector_z: float = 100.0, carrier: float = 40_000.0) -> ArrayLayout:
    """Flat 8x8 plus rigid reflector (default at the 100 mm levitation height)."""
    return add_reflector(flat_8x8(carrier), reflector_z)


def spherical_cap_64(cap_radius: float = 100.0, carrier: float = 25_000.0, double_sided: bool = False) -> ArrayLayout:
    """64-element spherical cap; double_sided splits 32 top / 32 bottom."""
    return build_spherical_cap(cap_radius, 64, carrier, double_sided=double_sided)


def flat_echo_rig(carrier: float = 25_000.0, receiver_carrier: float = 40_000.0) -> ArrayLayout:
    """Flat 8x8 levitation array with the two x-extreme mid-row channels
    re-roled as detection receivers (west id 3, east id 59)."""
    return mark_receivers(flat_8x8(carrier), [3, 59], receiver_carrier)


def cap_echo_rig(
    cap_radius: float = 100.0,
    carrier: float = 25_000.0,
    receiver_carrier: float = 40_000.0,
) -> ArrayLayout:
    """Double-sided 64-element cap plus two added detection transducers.

    The receivers sit on the equatorial plane at +-x (outside both shells),
    aimed at the trap center: 66 channels in total, 64 emitting."""
    base = build_spherical_cap(cap_radius, 64, carrier, double_sided=True)
    rx_radius = default_radiating_radius(receiver_carrier)
    extra = (
        Transducer(64, (-cap_radius, 0.0, 0.0), (1.0, 0.0, 0.0), rx_radius,
                   receiver_carrier, Role.RECEIVER),
        Transducer(65, (cap_radius, 0.0, 0.0), (-1.0, 0.0, 0.0), rx_radius,
                   receiver_carrier, Role.RECEIVER),
    )
    return ArrayLayout(
        transducers=base.transducers + extra,
        kind=base.kind,
        side_length_D=base.side_length_D,
        cap_radius=cap_radius,
    )
