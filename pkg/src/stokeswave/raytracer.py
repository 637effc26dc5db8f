"""Generalized ray flow on rectangle and disk domains, and coverage checking.

Rays move at unit speed along straight lines in the interior, reflect
specularly at transversal boundary hits, and glide along the boundary at
tangential (glancing) hits: on the disk they follow the circle forever
(the boundary is strictly convex), on a flat rectangle side they run
straight until the corner.  Rectangle corners terminate a ray: no
reflection law is invented for them, they are simply counted.

The coverage checker samples phase points, traces each ray up to a time
horizon, and records the first time it meets the damped set {a > 0}.
First entry is detected by probing the damping profile along each segment
or arc with a step small enough not to jump over the support ramp, then
refined by bisection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Union

import numpy as np

from .errors import ConfigurationError, NumericsError, PreconditionError
from .geometry import (CORNER_TOL, BoundaryCollar, BoundaryRegime, DampingProfile, Disk,
                       DiskPatch, Domain, Rectangle, SideStrip, classify_boundary_point)

# |xi . normal| at or below this routes a boundary hit to glide handling.
GLANCING_TOL = 1e-9

_MAX_EVENTS = 200_000


@dataclass(frozen=True)
class PhasePoint:
    """Unit-speed ray state: position, direction, elapsed flow time.

    boundary is None for interior states and a BoundaryRegime for states
    attached to the boundary (post-reflection or gliding).
    """

    x: np.ndarray
    xi: np.ndarray
    s: float = 0.0
    boundary: Optional[BoundaryRegime] = None

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "xi", np.asarray(self.xi, dtype=float))


@dataclass(frozen=True)
class FreeSegment:
    start: np.ndarray
    end: np.ndarray
    duration: float
    kind = "free_segment"


@dataclass(frozen=True)
class Reflection:
    point: np.ndarray
    xi_in: np.ndarray
    xi_out: np.ndarray
    kind = "reflection"


@dataclass(frozen=True)
class GlideArc:
    start: np.ndarray
    end: np.ndarray
    duration: float
    kind = "glide_arc"


@dataclass(frozen=True)
class CornerStop:
    point: np.ndarray
    kind = "corner_stop"


@dataclass(frozen=True)
class DampedEntry:
    point: np.ndarray
    time: float
    kind = "damped_entry"


RayEvent = Union[FreeSegment, Reflection, GlideArc, CornerStop, DampedEntry]


@dataclass
class RayPath:
    """Chronological event list of one traced ray.

    terminated is 'horizon', 'corner' or 'error'; tracing with
    stop_at_entry=True may additionally end with 'entry'.
    """

    events: List[RayEvent]
    total_time: float
    terminated: str
    final: PhasePoint

    @property
    def first_entry_time(self) -> float:
        for ev in self.events:
            if isinstance(ev, DampedEntry):
                return ev.time
        return math.inf


# ---------------------------------------------------------------------------
# Elementary moves


def advance_free(domain: Domain, p: PhasePoint, s: float) -> PhasePoint:
    """Straight flight x -> x + s*xi; the segment must stay in the closed domain."""
    if s < 0:
        raise PreconditionError("flight time must be nonnegative")
    end = p.x + s * p.xi
    # both domains are convex: endpoint membership implies segment membership
    if not domain.contains(end):
        raise PreconditionError(
            f"segment exits the domain (endpoint {tuple(end)}); compute the boundary hit first")
    return PhasePoint(end, p.xi.copy(), p.s + s)


def boundary_hit(domain: Domain, p: PhasePoint) -> tuple[float, np.ndarray]:
    """Smallest s > 0 with x + s*xi on the boundary, by closed-form intersection."""
    s, hit = _hit_raw(domain, p.x, p.xi)
    return s, hit


def _hit_raw(domain: Domain, x: np.ndarray, xi: np.ndarray) -> tuple[float, np.ndarray]:
    if isinstance(domain, Rectangle):
        w, h = domain.width, domain.height
        sx = math.inf
        if xi[0] > 1e-15:
            sx = (w - x[0]) / xi[0]
        elif xi[0] < -1e-15:
            sx = -x[0] / xi[0]
        sy = math.inf
        if xi[1] > 1e-15:
            sy = (h - x[1]) / xi[1]
        elif xi[1] < -1e-15:
            sy = -x[1] / xi[1]
        s = min(sx, sy)
        if not (0 < s < math.inf):
            raise NumericsError("no forward boundary intersection (outward or degenerate ray)")
        hit = x + s * xi
        # snap the struck coordinate(s) exactly onto the wall
        if sx <= sy + 1e-15:
            hit[0] = w if xi[0] > 0 else 0.0
        if sy <= sx + 1e-15:
            hit[1] = h if xi[1] > 0 else 0.0
        hit[0] = min(max(hit[0], 0.0), w)
        hit[1] = min(max(hit[1], 0.0), h)
        return s, hit
    r2 = domain.radius ** 2
    b = float(x @ xi)
    c = float(x @ x) - r2
    disc = b * b - c
    s = -b + math.sqrt(max(disc, 0.0))
    if s <= 1e-12:
        raise NumericsError("no forward boundary intersection (ray leaves the disk)")
    hit = x + s * xi
    hit *= domain.radius / math.hypot(hit[0], hit[1])
    return s, hit


def reflect(domain: Domain, p: PhasePoint) -> PhasePoint:
    """Specular reflection at a hyperbolic boundary point."""
    nu = domain.outward_normal(p.x)
    d = float(p.xi @ nu)
    if abs(d) <= GLANCING_TOL:
        raise PreconditionError("glancing incidence; route to glide handling")
    xi_out = p.xi - 2.0 * d * nu
    regime = classify_boundary_point(domain, p.x, _tangential_momentum(xi_out, nu))
    return PhasePoint(p.x.copy(), xi_out, p.s, boundary=regime)


def _tangential_momentum(xi: np.ndarray, nu: np.ndarray) -> float:
    tau = np.array([-nu[1], nu[0]])
    return float(xi @ tau)


def glide(domain: Domain, p: PhasePoint, s: float) -> PhasePoint:
    """Boundary glide of duration s from a gliding or flat glancing point."""
    if p.boundary is not None and p.boundary.glancing_sign == "transversal":
        raise PreconditionError("transversal glancing rays pass into the interior; glide undefined")
    if s == 0.0:
        return p
    if s < 0:
        raise PreconditionError("glide duration must be nonnegative")
    if isinstance(domain, Disk):
        r = domain.radius
        th0 = math.atan2(p.x[1], p.x[0])
        tau = np.array([-math.sin(th0), math.cos(th0)])
        orient = 1.0 if float(p.xi @ tau) >= 0 else -1.0
        th1 = th0 + orient * s / r
        x1 = r * np.array([math.cos(th1), math.sin(th1)])
        xi1 = orient * np.array([-math.sin(th1), math.cos(th1)])
        regime = classify_boundary_point(domain, x1, 1.0)
        return PhasePoint(x1, xi1, p.s + s, boundary=regime)
    end = p.x + s * p.xi
    if not domain.contains(end):
        raise PreconditionError("flat glide runs past the corner")
    regime = p.boundary or BoundaryRegime("glancing", 0.0, 0.0, glancing_sign="flat")
    return PhasePoint(end, p.xi.copy(), p.s + s, boundary=regime)


# ---------------------------------------------------------------------------
# First-entry probing


def _probe_step(damping: Optional[DampingProfile]) -> float:
    """Sampling step that cannot jump over the damping support or its ramp."""
    if damping is None:
        return math.inf
    if damping.smoothing_width > 0:
        return damping.smoothing_width / 4.0
    sh = damping.shape
    feature = sh.width if isinstance(sh, BoundaryCollar) else (
        sh.radius if isinstance(sh, DiskPatch) else sh.depth)
    return feature / 8.0


def _first_positive(damping: DampingProfile, points_at, duration: float, step: float):
    """First tau in [0, duration] with a(x(tau)) > 0, refined by bisection."""
    if duration <= 0:
        taus = np.array([0.0])
    else:
        n = max(2, int(math.ceil(duration / step)) + 1)
        taus = np.linspace(0.0, duration, n)
    vals = damping.values(points_at(taus))
    nz = np.nonzero(vals > 0.0)[0]
    if nz.size == 0:
        return None
    i = int(nz[0])
    if i == 0:
        return 0.0
    lo, hi = float(taus[i - 1]), float(taus[i])
    while hi - lo > 1e-13:
        mid = 0.5 * (lo + hi)
        if damping.values(points_at(np.array([mid])))[0] > 0.0:
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# Full trace


def trace(domain: Domain, damping: Optional[DampingProfile], rho0: PhasePoint, T: float,
          entry_step: Optional[float] = None, stop_at_entry: bool = False) -> RayPath:
    """Trace a generalized ray for time T, recording the first damped entry.

    With stop_at_entry=True the path is truncated at the first entry event
    (used by the coverage checker); such paths report terminated='entry'.
    """
    if T <= 0:
        raise ConfigurationError("horizon T must be positive")
    x = np.array(rho0.x, dtype=float)
    xi = np.array(rho0.xi, dtype=float)
    if abs(math.hypot(xi[0], xi[1]) - 1.0) > 1e-12:
        raise PreconditionError("ray direction must be unit length")
    if not domain.contains(x):
        raise PreconditionError("ray start must lie in the closed domain")

    probing = damping is not None and damping.amplitude > 0
    step = entry_step if entry_step is not None else _probe_step(damping)
    events: List[RayEvent] = []
    t = 0.0
    entered = False
    terminated = "horizon"

    if probing and damping.values(x)[0] > 0.0:
        events.append(DampedEntry(x.copy(), 0.0))
        entered = True
        if stop_at_entry:
            return RayPath(events, 0.0, "entry", PhasePoint(x, xi, rho0.s))

    gliding = False
    on_bnd = _on_boundary(domain, x)
    if on_bnd:
        nu = domain.outward_normal(x) if not _at_corner(domain, x) else None
        if nu is None:
            return RayPath([CornerStop(x.copy())], 0.0, "corner", PhasePoint(x, xi, rho0.s))
        d = float(xi @ nu)
        if d > GLANCING_TOL:
            raise PreconditionError("ray on the boundary must not point outward")
        gliding = abs(d) <= GLANCING_TOL

    def line_points(x0, xi0):
        return lambda taus: x0[None, :] + taus[:, None] * xi0[None, :]

    while t < T - 1e-15 and len(events) < _MAX_EVENTS:
        if gliding and isinstance(domain, Disk):
            dur = T - t
            t0 = t
            t, entered, stop = _emit_arc(domain, damping if probing and not entered else None,
                                         events, x, xi, t, dur, step, stop_at_entry, entered)
            if stop:
                xe, xie = _glide_endpoint(domain, x, xi, t - t0)
                return RayPath(events, t, "entry", PhasePoint(xe, xie, rho0.s + t))
            x, xi = _glide_endpoint(domain, x, xi, dur)
            continue

        if gliding:
            # flat side: straight glide until the corner or the horizon
            s_corner = _distance_to_corner_along(domain, x, xi)
            reaches_corner = s_corner <= T - t + 1e-15
            dur = min(T - t, s_corner)
            entry_tau = None
            if probing and not entered:
                entry_tau = _first_positive(damping, line_points(x, xi), dur, step)
            t, entered, stop = _emit_segment(events, GlideArc, x, xi, t, dur, entry_tau,
                                             stop_at_entry, entered)
            if stop:
                return RayPath(events, t, "entry", PhasePoint(events[-1].point, xi, rho0.s + t))
            x = x + dur * xi
            if reaches_corner:
                events.append(CornerStop(x.copy()))
                terminated = "corner"
                break
            continue

        s_hit, hit = _hit_raw(domain, x, xi)
        dur = min(s_hit, T - t)
        entry_tau = None
        if probing and not entered:
            entry_tau = _first_positive(damping, line_points(x, xi), dur, step)
        t, entered, stop = _emit_segment(events, FreeSegment, x, xi, t, dur, entry_tau,
                                         stop_at_entry, entered)
        if stop:
            return RayPath(events, t, "entry", PhasePoint(events[-1].point, xi, rho0.s + t))
        if dur < s_hit:          # horizon reached mid-flight
            x = x + dur * xi
            break
        x = hit
        if _at_corner(domain, x):
            events.append(CornerStop(x.copy()))
            terminated = "corner"
            break
        nu = domain.outward_normal(x)
        d = float(xi @ nu)
        if abs(d) <= GLANCING_TOL:
            gliding = True
            continue
        xi_out = xi - 2.0 * d * nu
        events.append(Reflection(x.copy(), xi.copy(), xi_out.copy()))
        xi = xi_out

    if len(events) >= _MAX_EVENTS:
        terminated = "error"
    return RayPath(events, t, terminated, PhasePoint(x, xi, rho0.s + t))


def _emit_segment(events, seg_cls, x, xi, t, dur, entry_tau, stop_at_entry, entered):
    """Append a straight segment, split at the entry point when one occurs."""
    if entry_tau is None:
        if dur > 0:
            events.append(seg_cls(x.copy(), x + dur * xi, dur))
        return t + dur, entered, False
    pt = x + entry_tau * xi
    if entry_tau > 0:
        events.append(seg_cls(x.copy(), pt.copy(), entry_tau))
    events.append(DampedEntry(pt.copy(), t + entry_tau))
    if stop_at_entry:
        return t + entry_tau, True, True
    if dur - entry_tau > 0:
        events.append(seg_cls(pt.copy(), x + dur * xi, dur - entry_tau))
    return t + dur, True, False


def _emit_arc(domain, damping, events, x, xi, t, dur, step, stop_at_entry, entered):
    """Append a circular glide arc on the disk, split at the entry point."""
    r = domain.radius
    th0 = math.atan2(x[1], x[0])
    tau_vec = np.array([-math.sin(th0), math.cos(th0)])
    orient = 1.0 if float(xi @ tau_vec) >= 0 else -1.0

    def arc_points(taus):
        th = th0 + orient * taus / r
        return r * np.stack([np.cos(th), np.sin(th)], axis=1)

    entry_tau = None
    if damping is not None:
        entry_tau = _first_positive(damping, arc_points, dur, step)
    if entry_tau is None:
        if dur > 0:
            events.append(GlideArc(x.copy(), arc_points(np.array([dur]))[0], dur))
        return t + dur, entered, False
    pt = arc_points(np.array([entry_tau]))[0]
    if entry_tau > 0:
        events.append(GlideArc(x.copy(), pt.copy(), entry_tau))
    events.append(DampedEntry(pt.copy(), t + entry_tau))
    if stop_at_entry:
        return t + entry_tau, True, True
    if dur - entry_tau > 0:
        events.append(GlideArc(pt.copy(), arc_points(np.array([dur]))[0], dur - entry_tau))
    return t + dur, True, False


def _glide_endpoint(domain, x, xi, dur):
    r = domain.radius
    th0 = math.atan2(x[1], x[0])
    tau_vec = np.array([-math.sin(th0), math.cos(th0)])
    orient = 1.0 if float(xi @ tau_vec) >= 0 else -1.0
    th1 = th0 + orient * dur / r
    return (r * np.array([math.cos(th1), math.sin(th1)]),
            orient * np.array([-math.sin(th1), math.cos(th1)]))


def _on_boundary(domain: Domain, x, tol: float = 1e-12) -> bool:
    if isinstance(domain, Rectangle):
        return (min(x[0], domain.width - x[0], x[1], domain.height - x[1]) <= tol)
    return abs(math.hypot(x[0], x[1]) - domain.radius) <= tol * max(1.0, domain.radius)


def _at_corner(domain: Domain, x) -> bool:
    return isinstance(domain, Rectangle) and domain._near_corner(x, CORNER_TOL)


def _distance_to_corner_along(domain: Rectangle, x, xi) -> float:
    """Distance to the end of the current flat side in the direction xi."""
    if abs(xi[0]) > abs(xi[1]):
        return (domain.width - x[0]) / xi[0] if xi[0] > 0 else -x[0] / xi[0]
    return (domain.height - x[1]) / xi[1] if xi[1] > 0 else -x[1] / xi[1]


# ---------------------------------------------------------------------------
# Coverage checking


@dataclass(frozen=True)
class GridSampler:
    """Uniform interior position grid x uniform direction grid.

    On the disk, nx boundary starts per orientation (gliding rays) are
    appended: the coverage definition quantifies over those too.
    """

    nx: int
    ndir: int

    def samples(self, domain: Domain) -> tuple[np.ndarray, np.ndarray]:
        if self.nx < 1 or self.ndir < 1:
            raise ConfigurationError("sampler needs nx >= 1 and ndir >= 1")
        angles = 2.0 * math.pi * np.arange(self.ndir) / self.ndir
        dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
        if isinstance(domain, Rectangle):
            xs = (np.arange(self.nx) + 0.5) * domain.width / self.nx
            ys = (np.arange(self.nx) + 0.5) * domain.height / self.nx
            px, py = np.meshgrid(xs, ys, indexing="ij")
            pos = np.stack([px.ravel(), py.ravel()], axis=1)
            positions = np.repeat(pos, self.ndir, axis=0)
            directions = np.tile(dirs, (pos.shape[0], 1))
            return positions, directions
        r = domain.radius
        xs = (np.arange(self.nx) + 0.5) * (2 * r) / self.nx - r
        px, py = np.meshgrid(xs, xs, indexing="ij")
        pos = np.stack([px.ravel(), py.ravel()], axis=1)
        pos = pos[np.hypot(pos[:, 0], pos[:, 1]) < r * (1 - 1e-9)]
        positions = np.repeat(pos, self.ndir, axis=0)
        directions = np.tile(dirs, (pos.shape[0], 1))
        th = 2.0 * math.pi * np.arange(self.nx) / self.nx
        bpos = r * np.stack([np.cos(th), np.sin(th)], axis=1)
        tang = np.stack([-np.sin(th), np.cos(th)], axis=1)
        positions = np.concatenate([positions, bpos, bpos], axis=0)
        directions = np.concatenate([directions, tang, -tang], axis=0)
        return positions, directions


@dataclass(frozen=True)
class RandomSampler:
    """Seeded uniform samples of interior positions and directions."""

    n: int
    seed: int = 0

    def samples(self, domain: Domain) -> tuple[np.ndarray, np.ndarray]:
        if self.n < 1:
            raise ConfigurationError("sampler needs n >= 1")
        rng = np.random.default_rng(self.seed)
        if isinstance(domain, Rectangle):
            pos = rng.random((self.n, 2)) * np.array([domain.width, domain.height])
        else:
            pos = np.empty((self.n, 2))
            filled = 0
            while filled < self.n:
                cand = (rng.random((2 * self.n, 2)) * 2 - 1) * domain.radius
                keep = cand[np.hypot(cand[:, 0], cand[:, 1]) < domain.radius * (1 - 1e-9)]
                take = min(self.n - filled, keep.shape[0])
                pos[filled:filled + take] = keep[:take]
                filled += take
        angles = rng.random(self.n) * 2 * math.pi
        dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
        return pos, dirs


Sampler = Union[GridSampler, RandomSampler]


@dataclass
class GccReport:
    """Coverage statistics of the damped set over a sampled ray ensemble."""

    horizon: float
    n_samples: int
    covered_fraction: float
    max_first_entry_time: float
    worst_rays: List[PhasePoint]
    worst_entry_times: List[float]
    corner_terminated: int
    sampler: Sampler
    first_entry_times: np.ndarray = field(repr=False, default=None)


def check_gcc(domain: Domain, damping: DampingProfile, T: float, sampler: Sampler,
              entry_step: Optional[float] = None, n_worst: int = 5) -> GccReport:
    """Trace each sampled ray and report how much of phase space is covered.

    corner_terminated counts rays that reached a rectangle corner before
    entering the damped set (tracing stops at the first entry).
    """
    if T <= 0:
        raise ConfigurationError("horizon T must be positive")
    positions, directions = sampler.samples(domain)
    n = positions.shape[0]
    entry = np.full(n, math.inf)
    corners = 0
    for i in range(n):
        path = trace(domain, damping, PhasePoint(positions[i], directions[i]), T,
                     entry_step=entry_step, stop_at_entry=True)
        entry[i] = path.first_entry_time
        if path.terminated == "corner":
            corners += 1
    covered = float(np.count_nonzero(entry < T)) / n
    max_entry = math.inf if np.any(np.isinf(entry)) else float(entry.max())
    order = np.argsort(-np.where(np.isinf(entry), np.finfo(float).max, entry), kind="stable")
    worst = [PhasePoint(positions[int(i)], directions[int(i)]) for i in order[:n_worst]]
    worst_times = [float(entry[int(i)]) for i in order[:n_worst]]
    return GccReport(T, n, covered, max_entry, worst, worst_times, corners, sampler, entry)
