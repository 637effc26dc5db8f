"""Planar domains, damping profiles, and boundary phase-space classification.

Two concrete domains are supported: an axis-aligned rectangle [0,W]x[0,H]
and a disk of radius R centered at the origin.  Both are convex, so a
straight segment with endpoints in the closed domain stays inside it.

Boundary phase space is classified by r0 = 1 - |xi'|^2 (tangential energy
of a unit-speed ray) and its normal derivative r1: r0 > 0 is hyperbolic
(transversal crossing), r0 < 0 elliptic, r0 = 0 glancing.  On the disk a
glancing point always glides (r1 = -2|xi'|^2/R < 0); on a flat rectangle
side r1 = 0 and the point is flagged flat.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ClassificationError, ConfigurationError, DomainError

# |r0| below this counts as glancing; exact tangency never survives rounding.
R0_TOL = 1e-9
# Points closer than this to a rectangle corner are treated as the corner.
CORNER_TOL = 1e-9

_SIDES = ("bottom", "right", "top", "left")


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned rectangle [0, width] x [0, height]."""

    width: float
    height: float

    kind = "rectangle"

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ConfigurationError("non-positive rectangle dimension")

    @property
    def boundary_length(self) -> float:
        return 2.0 * (self.width + self.height)

    @property
    def corners(self) -> np.ndarray:
        w, h = self.width, self.height
        return np.array([[0.0, 0.0], [w, 0.0], [w, h], [0.0, h]])

    def contains(self, x, tol: float = 1e-12) -> bool:
        return (-tol <= x[0] <= self.width + tol) and (-tol <= x[1] <= self.height + tol)

    def distance_to_boundary(self, x) -> float:
        """Distance from an interior point to the boundary (>= 0 inside)."""
        return min(x[0], self.width - x[0], x[1], self.height - x[1])

    def boundary_point(self, s: float) -> np.ndarray:
        """Arclength parametrization, counterclockwise from (0, 0)."""
        w, h = self.width, self.height
        s = s % self.boundary_length
        if s < w:
            return np.array([s, 0.0])
        s -= w
        if s < h:
            return np.array([w, s])
        s -= h
        if s < w:
            return np.array([w - s, h])
        s -= w
        return np.array([0.0, h - s])

    def boundary_tangent(self, s: float) -> np.ndarray:
        w, h = self.width, self.height
        s = s % self.boundary_length
        if s < w:
            return np.array([1.0, 0.0])
        if s < w + h:
            return np.array([0.0, 1.0])
        if s < 2 * w + h:
            return np.array([-1.0, 0.0])
        return np.array([0.0, -1.0])

    def side_of(self, x, tol: float = 1e-9) -> str:
        """Which side a boundary point lies on; 'corner' near a corner."""
        on = [abs(x[1]) <= tol, abs(x[0] - self.width) <= tol,
              abs(x[1] - self.height) <= tol, abs(x[0]) <= tol]
        hits = [name for name, flag in zip(_SIDES, on) if flag]
        if not hits:
            raise DomainError(f"point {tuple(x)} is not on the boundary")
        if len(hits) > 1 or self._near_corner(x):
            return "corner"
        return hits[0]

    def _near_corner(self, x, tol: float = CORNER_TOL) -> bool:
        return bool(np.any(np.all(np.abs(self.corners - np.asarray(x)) <= tol, axis=1)))

    def outward_normal(self, x) -> np.ndarray:
        side = self.side_of(x)
        if side == "corner":
            raise ClassificationError(f"outward normal undefined at corner {tuple(x)}")
        return {"bottom": np.array([0.0, -1.0]), "right": np.array([1.0, 0.0]),
                "top": np.array([0.0, 1.0]), "left": np.array([-1.0, 0.0])}[side]


@dataclass(frozen=True)
class Disk:
    """Disk of given radius centered at the origin."""

    radius: float

    kind = "disk"

    def __post_init__(self):
        if not self.radius > 0:
            raise ConfigurationError("non-positive radius")

    @property
    def boundary_length(self) -> float:
        return 2.0 * math.pi * self.radius

    def contains(self, x, tol: float = 1e-12) -> bool:
        return math.hypot(x[0], x[1]) <= self.radius + tol

    def distance_to_boundary(self, x) -> float:
        return self.radius - math.hypot(x[0], x[1])

    def boundary_point(self, s: float) -> np.ndarray:
        th = s / self.radius
        return self.radius * np.array([math.cos(th), math.sin(th)])

    def boundary_tangent(self, s: float) -> np.ndarray:
        th = s / self.radius
        return np.array([-math.sin(th), math.cos(th)])

    def outward_normal(self, x) -> np.ndarray:
        r = math.hypot(x[0], x[1])
        if abs(r - self.radius) > 1e-9 * max(1.0, self.radius):
            raise DomainError(f"point {tuple(x)} is not on the boundary")
        return np.asarray(x, dtype=float) / r


Domain = Union[Rectangle, Disk]


def make_domain(spec) -> Domain:
    """Build a domain from a spec mapping like {'kind': 'disk', 'radius': 1.0}."""
    if isinstance(spec, (Rectangle, Disk)):
        return spec
    kind = spec.get("kind")
    if kind == "rectangle":
        _require_keys(spec, {"kind", "width", "height"}, "domain")
        return Rectangle(float(spec["width"]), float(spec["height"]))
    if kind == "disk":
        _require_keys(spec, {"kind", "radius"}, "domain")
        return Disk(float(spec["radius"]))
    raise ConfigurationError(f"domain.kind must be 'rectangle' or 'disk', got {kind!r}")


def _require_keys(spec, allowed, where):
    unknown = set(spec) - allowed
    if unknown:
        raise ConfigurationError(f"unknown key(s) in {where}: {sorted(unknown)}")


# ---------------------------------------------------------------------------
# Damping profiles


@dataclass(frozen=True)
class BoundaryCollar:
    """Plateau within `width` of the boundary, ramping to zero further inside."""
    width: float


@dataclass(frozen=True)
class DiskPatch:
    """Plateau on the ball of given radius around `center`."""
    center: tuple
    radius: float


@dataclass(frozen=True)
class SideStrip:
    """Plateau within `depth` of one rectangle side ('left'/'right'/'bottom'/'top')."""
    side: str
    depth: float


@dataclass(frozen=True)
class DampingProfile:
    """Continuous nonnegative damping coefficient a(x) on a domain.

    a = amplitude on the nominal support of `shape`, ramps linearly to zero
    over `smoothing_width` outside it, and vanishes beyond the ramp.  With
    smoothing_width = 0 the profile is the plain indicator plateau.
    """

    domain: Domain
    shape: Union[BoundaryCollar, DiskPatch, SideStrip]
    amplitude: float
    smoothing_width: float = 0.0

    def __post_init__(self):
        if self.amplitude < 0:
            raise ConfigurationError("damping amplitude must be nonnegative")
        if self.smoothing_width < 0:
            raise ConfigurationError("smoothing_width must be nonnegative")
        sh = self.shape
        if isinstance(sh, BoundaryCollar) and sh.width <= 0:
            raise ConfigurationError("collar width must be positive")
        if isinstance(sh, DiskPatch) and sh.radius <= 0:
            raise ConfigurationError("patch radius must be positive")
        if isinstance(sh, SideStrip):
            if sh.side not in _SIDES:
                raise ConfigurationError(f"strip side must be one of {_SIDES}")
            if sh.depth <= 0:
                raise ConfigurationError("strip depth must be positive")
            if not isinstance(self.domain, Rectangle):
                raise ConfigurationError("side_strip requires a rectangle domain")

    def support_distance(self, pts: np.ndarray) -> np.ndarray:
        """Signed distance to the nominal support (<= 0 on the plateau)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        sh = self.shape
        if isinstance(sh, BoundaryCollar):
            if isinstance(self.domain, Rectangle):
                w, h = self.domain.width, self.domain.height
                d2b = np.minimum.reduce([pts[:, 0], w - pts[:, 0], pts[:, 1], h - pts[:, 1]])
            else:
                d2b = self.domain.radius - np.hypot(pts[:, 0], pts[:, 1])
            return d2b - sh.width
        if isinstance(sh, DiskPatch):
            c = np.asarray(sh.center, dtype=float)
            return np.hypot(pts[:, 0] - c[0], pts[:, 1] - c[1]) - sh.radius
        w, h = self.domain.width, self.domain.height
        coord = {"left": pts[:, 0], "right": w - pts[:, 0],
                 "bottom": pts[:, 1], "top": h - pts[:, 1]}[sh.side]
        return coord - sh.depth

    def values(self, pts: np.ndarray) -> np.ndarray:
        """Vectorized a(x) over an (n, 2) array of points (no domain check)."""
        d = self.support_distance(pts)
        if self.smoothing_width == 0.0:
            return np.where(d <= 0.0, self.amplitude, 0.0)
        ramp = np.clip(1.0 - d / self.smoothing_width, 0.0, 1.0)
        return self.amplitude * ramp


def make_damping(domain: Domain, spec) -> DampingProfile:
    """Build a DampingProfile from a spec mapping (see the CLI config schema)."""
    if isinstance(spec, DampingProfile):
        return spec
    shape_name = spec.get("shape")
    common = {"shape", "amplitude", "smoothing_width"}
    amplitude = float(spec.get("amplitude", 1.0))
    smoothing = float(spec.get("smoothing_width", 0.0))
    if shape_name == "boundary_collar":
        _require_keys(spec, common | {"width"}, "damping")
        shape = BoundaryCollar(float(spec["width"]))
    elif shape_name == "disk_patch":
        _require_keys(spec, common | {"center", "radius"}, "damping")
        shape = DiskPatch(tuple(float(c) for c in spec["center"]), float(spec["radius"]))
    elif shape_name == "side_strip":
        _require_keys(spec, common | {"side", "depth"}, "damping")
        shape = SideStrip(str(spec["side"]), float(spec["depth"]))
    else:
        raise ConfigurationError(
            f"damping.shape must be 'boundary_collar', 'disk_patch' or 'side_strip', got {shape_name!r}")
    return DampingProfile(domain, shape, amplitude, smoothing)


def eval_damping(profile: DampingProfile, x) -> float:
    """a(x) at a single point of the closed domain."""
    if not profile.domain.contains(x):
        raise DomainError(f"point {tuple(np.asarray(x))} is outside the closed domain")
    return float(profile.values(np.asarray(x, dtype=float))[0])


# ---------------------------------------------------------------------------
# Boundary classification


@dataclass(frozen=True)
class BoundaryRegime:
    """Classification of a boundary phase point by (r0, r1).

    glancing_sign is set only when tag == 'glancing': 'gliding' (r1 < 0,
    ray hugs the boundary), 'transversal' (r1 > 0, ray passes through),
    'flat' (r1 = 0 on a straight side), 'higher_order' otherwise.
    """

    tag: str
    r0: float
    r1: float
    glancing_sign: str | None = None


def classify_boundary_point(domain: Domain, x_boundary, xi_tangential: float) -> BoundaryRegime:
    """Classify a boundary point with tangential momentum xi' of a unit-speed ray."""
    xt2 = float(xi_tangential) ** 2
    r0 = 1.0 - xt2
    if isinstance(domain, Rectangle):
        if domain.side_of(x_boundary) == "corner":
            raise ClassificationError(f"corner point {tuple(x_boundary)} cannot be classified")
        r1 = 0.0
        sign = "flat"
    else:
        r = math.hypot(x_boundary[0], x_boundary[1])
        if abs(r - domain.radius) > 1e-9 * max(1.0, domain.radius):
            raise DomainError(f"point {tuple(x_boundary)} is not on the boundary")
        r1 = -2.0 * xt2 / domain.radius
        sign = "gliding" if r1 < 0 else ("transversal" if r1 > 0 else "higher_order")
    if r0 > R0_TOL:
        return BoundaryRegime("hyperbolic", r0, r1)
    if r0 < -R0_TOL:
        return BoundaryRegime("elliptic", r0, r1)
    return BoundaryRegime("glancing", r0, r1, glancing_sign=sign)
