"""Plane domains with two conjugation corners, boundary-to-interior maps, cutoffs.

The canonical domain family is bounded by two curves ``gamma1`` (upper) and
``gamma2`` (lower) joining the corners ``g1=(0,0)`` and ``g2=(scale,0)``.
Within distance ``eps`` of each corner both curves are exactly straight rays
at angles +/- ``omega0`` about the corner bisector, so the domain coincides
there with a plane angle of opening ``2*omega0``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GeometryError",
    "CornerConfig",
    "DomainSpec",
    "DiffeoMap",
    "CutoffXi",
    "build_canonical_domain",
    "build_corner_rotation_map",
    "build_interior_contraction_map",
    "build_cutoff",
    "rho",
    "domain_to_dict",
    "domain_from_dict",
    "spec_document",
    "domain_hash",
]

TWO_PI = 2.0 * math.pi


class GeometryError(ValueError):
    """Invalid geometric configuration or construction failure."""


def _as_points(pts) -> np.ndarray:
    a = np.asarray(pts, dtype=float)
    if a.ndim == 1:
        a = a[None, :]
    return a


def smoothstep_quintic(x):
    """C^2 ramp: 0 for x<=0, 1 for x>=1, quintic polynomial in between."""
    x = np.clip(x, 0.0, 1.0)
    return x ** 3 * (10.0 - 15.0 * x + 6.0 * x ** 2)


def _wrap_angle(a):
    """Wrap to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(a), TWO_PI)


# ---------------------------------------------------------------------------
# boundary pieces

@dataclass(frozen=True)
class Segment:
    a: tuple
    b: tuple

    @property
    def length(self) -> float:
        return float(np.hypot(self.b[0] - self.a[0], self.b[1] - self.a[1]))

    def point(self, s):
        s = np.asarray(s, dtype=float)
        ax, ay = self.a
        bx, by = self.b
        return np.stack([ax + s * (bx - ax), ay + s * (by - ay)], axis=-1)

    def tangent(self, s):
        d = np.array([self.b[0] - self.a[0], self.b[1] - self.a[1]])
        d = d / np.linalg.norm(d)
        s = np.asarray(s, dtype=float)
        return np.broadcast_to(d, s.shape + (2,)).copy()

    def distance(self, pts):
        p = _as_points(pts)
        a = np.array(self.a)
        d = np.array(self.b) - a
        t = np.clip(((p - a) @ d) / (d @ d), 0.0, 1.0)
        proj = a + t[:, None] * d
        return np.linalg.norm(p - proj, axis=1)

    def ray_hits(self, origin, direction):
        """Positive ray parameters where origin + t*direction meets the segment."""
        a = np.array(self.a)
        d = np.array(self.b) - a
        o = np.asarray(origin, dtype=float)
        r = np.asarray(direction, dtype=float)
        denom = r[0] * (-d[1]) - r[1] * (-d[0])
        if abs(denom) < 1e-14:
            return []
        rhs = a - o
        t = (rhs[0] * (-d[1]) - rhs[1] * (-d[0])) / denom
        s = (r[0] * rhs[1] - r[1] * rhs[0]) / denom
        if t > 1e-12 and -1e-12 <= s <= 1 + 1e-12:
            return [float(t)]
        return []

    def to_dict(self):
        return {"kind": "segment", "a": list(self.a), "b": list(self.b)}


@dataclass(frozen=True)
class Arc:
    """Circular arc from angle ``ang0`` through signed sweep ``sweep``."""

    center: tuple
    radius: float
    ang0: float
    sweep: float

    @property
    def length(self) -> float:
        return abs(self.sweep) * self.radius

    def point(self, s):
        s = np.asarray(s, dtype=float)
        ang = self.ang0 + s * self.sweep
        cx, cy = self.center
        return np.stack([cx + self.radius * np.cos(ang),
                         cy + self.radius * np.sin(ang)], axis=-1)

    def tangent(self, s):
        s = np.asarray(s, dtype=float)
        ang = self.ang0 + s * self.sweep
        sgn = np.sign(self.sweep)
        return np.stack([-np.sin(ang) * sgn, np.cos(ang) * sgn], axis=-1)

    def _in_span(self, ang):
        if self.sweep >= 0:
            off = np.mod(ang - self.ang0, TWO_PI)
            return off <= self.sweep + 1e-12
        off = np.mod(self.ang0 - ang, TWO_PI)
        return off <= -self.sweep + 1e-12

    def distance(self, pts):
        p = _as_points(pts)
        c = np.array(self.center)
        v = p - c
        rad = np.linalg.norm(v, axis=1)
        ang = np.arctan2(v[:, 1], v[:, 0])
        d_arc = np.abs(rad - self.radius)
        inside = self._in_span(ang)
        d_ends = np.minimum(np.linalg.norm(p - self.point(0.0), axis=1),
                            np.linalg.norm(p - self.point(1.0), axis=1))
        return np.where(inside, d_arc, d_ends)

    def ray_hits(self, origin, direction):
        o = np.asarray(origin, dtype=float) - np.array(self.center)
        r = np.asarray(direction, dtype=float)
        a = r @ r
        b = 2.0 * (o @ r)
        c = o @ o - self.radius ** 2
        disc = b * b - 4 * a * c
        if disc < 0:
            return []
        sq = math.sqrt(disc)
        out = []
        for t in ((-b - sq) / (2 * a), (-b + sq) / (2 * a)):
            if t > 1e-12:
                hit = o + t * r
                ang = math.atan2(hit[1], hit[0])
                if self._in_span(np.array([ang]))[0]:
                    out.append(float(t))
        return out

    def to_dict(self):
        return {"kind": "arc", "center": list(self.center), "radius": self.radius,
                "ang0": self.ang0, "sweep": self.sweep}


def _piece_from_dict(d):
    if d["kind"] == "segment":
        return Segment(tuple(d["a"]), tuple(d["b"]))
    if d["kind"] == "arc":
        return Arc(tuple(d["center"]), d["radius"], d["ang0"], d["sweep"])
    raise GeometryError(f"unknown boundary piece kind {d['kind']!r}")


class Curve:
    """Piecewise boundary curve parametrized by arclength fraction in [0,1]."""

    def __init__(self, pieces):
        self.pieces = list(pieces)
        lens = np.array([p.length for p in self.pieces])
        self.length = float(lens.sum())
        self._cum = np.concatenate([[0.0], np.cumsum(lens)]) / self.length

    def point(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.empty(s.shape + (2,))
        idx = np.clip(np.searchsorted(self._cum, s, side="right") - 1,
                      0, len(self.pieces) - 1)
        for k, piece in enumerate(self.pieces):
            m = idx == k
            if m.any():
                lo, hi = self._cum[k], self._cum[k + 1]
                out[m] = piece.point((s[m] - lo) / (hi - lo))
        return out

    def tangent(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.empty(s.shape + (2,))
        idx = np.clip(np.searchsorted(self._cum, s, side="right") - 1,
                      0, len(self.pieces) - 1)
        for k, piece in enumerate(self.pieces):
            m = idx == k
            if m.any():
                lo, hi = self._cum[k], self._cum[k + 1]
                out[m] = piece.tangent((s[m] - lo) / (hi - lo))
        return out

    def distance(self, pts):
        p = _as_points(pts)
        return np.min(np.stack([piece.distance(p) for piece in self.pieces]), axis=0)

    def param_at_arclength(self, ell):
        return float(np.clip(ell / self.length, 0.0, 1.0))

    def to_dict(self):
        return [p.to_dict() for p in self.pieces]


# ---------------------------------------------------------------------------
# domain types

@dataclass(frozen=True)
class CornerConfig:
    """Corner data: half-opening angle, corner points, straight-ray radius."""

    omega0: float
    g1: tuple
    g2: tuple
    eps: float

    def __post_init__(self):
        if not 0.0 < self.omega0 < math.pi:
            raise GeometryError(f"omega0 must lie in (0, pi), got {self.omega0}")
        gap = math.dist(self.g1, self.g2)
        if not (self.eps > 0 and self.eps < gap / 2):
            raise GeometryError(
                f"eps must satisfy 0 < eps < |g1-g2|/2 = {gap / 2}, got {self.eps}")

    @property
    def corner_points(self) -> np.ndarray:
        return np.array([self.g1, self.g2])

    @property
    def gap(self) -> float:
        return math.dist(self.g1, self.g2)


@dataclass(frozen=True)
class DomainSpec:
    """Star-shaped domain bounded by gamma1 (upper) and gamma2 (lower)."""

    corners: CornerConfig
    gamma1: Curve
    gamma2: Curve
    star_center: tuple
    shape: str
    scale: float
    ccw: bool = True
    _poly: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self._poly is None:
            object.__setattr__(self, "_poly", self._boundary_polyline(2048))

    # -- boundary access -----------------------------------------------
    def curve(self, name: str) -> Curve:
        if name == "gamma1":
            return self.gamma1
        if name == "gamma2":
            return self.gamma2
        raise GeometryError(f"unknown curve {name!r}")

    def _boundary_polyline(self, n: int) -> np.ndarray:
        """Closed CCW polygon: gamma2 from g1 to g2, then gamma1 reversed."""
        s = np.linspace(0.0, 1.0, n)
        lower = self.gamma2.point(s)
        upper = self.gamma1.point(s[::-1])
        return np.vstack([lower, upper[1:-1]])

    def boundary_distance(self, pts) -> np.ndarray:
        p = _as_points(pts)
        return np.minimum(self.gamma1.distance(p), self.gamma2.distance(p))

    # -- membership ----------------------------------------------------
    def contains(self, pts) -> np.ndarray:
        """Winding-number test against a dense boundary polyline."""
        p = _as_points(pts)
        poly = self._poly
        x0, y0 = poly[:, 0], poly[:, 1]
        x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
        px = p[:, 0][:, None]
        py = p[:, 1][:, None]
        cond = (y0[None, :] <= py) != (y1[None, :] <= py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xin = x0[None, :] + (py - y0[None, :]) * (x1 - x0)[None, :] / (y1 - y0)[None, :]
        crossings = np.sum(cond & (xin > px), axis=1)
        return crossings % 2 == 1

    def star_radius(self, direction) -> float:
        """Distance from the star center to the boundary along a direction."""
        hits = []
        for curve in (self.gamma1, self.gamma2):
            for piece in curve.pieces:
                hits.extend(piece.ray_hits(self.star_center, direction))
        if not hits:
            raise GeometryError("star ray misses the boundary; domain invalid")
        return min(hits)

    def contains_star(self, pts, tol: float = 0.0) -> np.ndarray:
        p = _as_points(pts)
        c = np.array(self.star_center)
        out = np.empty(len(p), dtype=bool)
        for i, q in enumerate(p):
            v = q - c
            r = np.linalg.norm(v)
            if r < 1e-14:
                out[i] = True
                continue
            out[i] = r <= self.star_radius(v / r) + tol
        return out

    # -- corner frames ---------------------------------------------------
    def model_polar(self, corner_index: int, pts):
        """Polar coordinates (r, w) about a corner in the model convention.

        The angular coordinate w runs over [-omega0, omega0] with gamma1 at
        w = -omega0 and gamma2 at w = +omega0; w = 0 is the interior bisector.
        """
        p = _as_points(pts)
        g = self.corners.corner_points[corner_index]
        v = p - g
        r = np.linalg.norm(v, axis=1)
        theta = np.arctan2(v[:, 1], v[:, 0])
        if corner_index == 0:
            w = -theta
        else:
            w = _wrap_angle(theta - math.pi)
        return r, w

    def from_model_polar(self, corner_index: int, r, w):
        r = np.asarray(r, dtype=float)
        w = np.asarray(w, dtype=float)
        g = self.corners.corner_points[corner_index]
        theta = -w if corner_index == 0 else w + math.pi
        return np.stack([g[0] + r * np.cos(theta), g[1] + r * np.sin(theta)], axis=-1)


def rho(domain: DomainSpec, pts) -> np.ndarray:
    """Distance to the corner set {g1, g2}."""
    p = _as_points(pts)
    g = domain.corners.corner_points
    d = np.linalg.norm(p[:, None, :] - g[None, :, :], axis=2)
    return d.min(axis=1)


# ---------------------------------------------------------------------------
# canonical domains

def _lens_upper_pieces(omega0, scale, eps):
    r0 = 1.5 * eps
    p1 = np.array([r0 * math.cos(omega0), r0 * math.sin(omega0)])
    p2 = np.array([scale - r0 * math.cos(omega0), r0 * math.sin(omega0)])
    e = np.array([math.cos(omega0), math.sin(omega0)])
    n = np.array([-e[1], e[0]])
    # circle through p1 tangent to e whose center sits on the symmetry line
    rho_signed = (scale / 2 - p1[0]) / n[0]
    center = p1 + rho_signed * n
    radius = abs(rho_signed)
    a0 = math.atan2(p1[1] - center[1], p1[0] - center[0])
    a1 = math.atan2(p2[1] - center[1], p2[0] - center[0])
    sweep = -np.mod(a0 - a1, TWO_PI)  # clockwise: center lies right of travel
    return [Segment((0.0, 0.0), tuple(p1)),
            Arc(tuple(center), radius, a0, float(sweep)),
            Segment(tuple(p2), (scale, 0.0))]


def _mirror_piece(piece):
    if isinstance(piece, Segment):
        return Segment((piece.a[0], -piece.a[1]), (piece.b[0], -piece.b[1]))
    return Arc((piece.center[0], -piece.center[1]), piece.radius,
               -piece.ang0, -piece.sweep)


def build_canonical_domain(omega0: float, scale: float = 1.0,
                           shape: str = "polyline-kite",
                           eps: float = None) -> DomainSpec:
    """Construct a canonical two-corner domain.

    ``polyline-kite``: two straight edges per side meeting at an apex;
    requires omega0 < pi/2.  ``lens``: straight rays of length 1.5*eps at the
    corners joined by a tangent circular arc; valid for all omega0 in (0, pi).
    """
    if not 0.0 < omega0 < math.pi:
        raise GeometryError(f"omega0 must lie in (0, pi), got {omega0}")
    if scale <= 0:
        raise GeometryError("scale must be positive")
    if eps is None:
        eps = 0.15 * scale
    corners = CornerConfig(omega0=omega0, g1=(0.0, 0.0), g2=(scale, 0.0), eps=eps)

    if shape == "polyline-kite":
        if omega0 >= math.pi / 2:
            raise GeometryError(
                "polyline-kite needs omega0 < pi/2 (corner rays never meet); "
                "use shape='lens'")
        apex = (scale / 2, scale / 2 * math.tan(omega0))
        if math.dist((0.0, 0.0), apex) <= eps:
            raise GeometryError("kite too flat: apex inside the corner zone")
        upper = [Segment((0.0, 0.0), apex), Segment(apex, (scale, 0.0))]
    elif shape in ("lens", "lens-like-spline"):
        upper = _lens_upper_pieces(omega0, scale, eps)
        shape = "lens"
    else:
        raise GeometryError(f"unknown shape {shape!r}")

    gamma1 = Curve(upper)
    gamma2 = Curve([_mirror_piece(p) for p in upper])
    return DomainSpec(corners=corners, gamma1=gamma1, gamma2=gamma2,
                      star_center=(scale / 2, 0.0), shape=shape, scale=scale)


# ---------------------------------------------------------------------------
# boundary-to-interior maps

class DiffeoMap:
    """Smooth map taking a boundary curve into the closed domain.

    ``corner_rotation``: exact rotation by omega0 about each corner within the
    straight-ray zone, blended (partition of unity in the corner distance)
    with a push toward the star center on the middle of the curve.
    ``contraction``: y -> center + ratio*(y - center).
    """

    def __init__(self, domain: DomainSpec, kind: str, source: str = None,
                 ratio: float = None, push_frac: float = 0.25):
        self.domain = domain
        self.kind = kind
        self.source = source
        self.ratio = ratio
        self.push_frac = push_frac
        om = domain.corners.omega0
        eps = domain.corners.eps
        self._eps = eps
        self._blend_outer = min(2.0 * eps, 0.49 * domain.corners.gap)
        if kind == "corner_rotation":
            if source not in ("gamma1", "gamma2"):
                raise GeometryError("corner_rotation needs source gamma1 or gamma2")
            sgn = -1.0 if source == "gamma1" else 1.0
            self._angles = (sgn * om, -sgn * om)  # rotation at g1, at g2
        elif kind == "contraction":
            if not 0.0 < ratio < 1.0:
                raise GeometryError(f"contraction ratio must lie in (0,1), got {ratio}")
        else:
            raise GeometryError(f"unknown map kind {kind!r}")
        self.margin = None  # filled by the build_* helpers

    def _rotate_about(self, corner_index, pts):
        g = self.domain.corners.corner_points[corner_index]
        a = self._angles[corner_index]
        ca, sa = math.cos(a), math.sin(a)
        v = pts - g
        return np.stack([g[0] + ca * v[:, 0] - sa * v[:, 1],
                         g[1] + sa * v[:, 0] + ca * v[:, 1]], axis=-1)

    def _push(self, pts):
        c = np.array(self.domain.star_center)
        return pts + self.push_frac * (c - pts)

    def forward(self, pts) -> np.ndarray:
        p = _as_points(pts)
        if self.kind == "contraction":
            c = np.array(self.domain.star_center)
            return c + self.ratio * (p - c)
        g = self.domain.corners.corner_points
        d = np.linalg.norm(p[:, None, :] - g[None, :, :], axis=2)
        nearest = np.argmin(d, axis=1)
        dn = d[np.arange(len(p)), nearest]
        out = self._push(p)
        for j in (0, 1):
            m = (nearest == j) & (dn <= self._blend_outer)
            if not m.any():
                continue
            rot = self._rotate_about(j, p[m])
            w = smoothstep_quintic((dn[m] - self._eps)
                                   / (self._blend_outer - self._eps))
            out[m] = (1.0 - w)[:, None] * rot + w[:, None] * out[m]
        return out

    def jacobian(self, pts, step: float = 1e-6) -> np.ndarray:
        """Central finite-difference Jacobians, shape (n, 2, 2)."""
        p = _as_points(pts)
        J = np.empty((len(p), 2, 2))
        for k in range(2):
            dp = np.zeros(2)
            dp[k] = step
            J[:, :, k] = (self.forward(p + dp) - self.forward(p - dp)) / (2 * step)
        return J

    def to_dict(self):
        d = {"kind": self.kind}
        if self.kind == "corner_rotation":
            d.update(source=self.source, push_frac=self.push_frac)
        else:
            d.update(ratio=self.ratio)
        return d


def build_corner_rotation_map(domain: DomainSpec, source: str,
                              push_frac: float = 0.25,
                              n_check: int = 2001) -> DiffeoMap:
    """Map a boundary curve into the closed domain, rotating exactly near corners."""
    m = DiffeoMap(domain, "corner_rotation", source=source, push_frac=push_frac)
    s = np.linspace(0.0, 1.0, n_check)
    img = m.forward(domain.curve(source).point(s))
    ok = domain.contains_star(img, tol=1e-9)
    if not ok.all():
        bad = int(np.argmin(ok))
        raise GeometryError(
            f"blended image leaves the domain at parameter s={s[bad]:.6f} "
            f"(point {img[bad].tolist()})")
    r = rho(domain, img)
    mid = r > m._blend_outer * 0.999
    m.margin = float(domain.boundary_distance(img[mid]).min()) if mid.any() else 0.0
    return m


def build_interior_contraction_map(domain: DomainSpec, ratio: float,
                                   n_check: int = 2001) -> DiffeoMap:
    """Contraction about the star center; the image of gamma1 must clear the boundary."""
    m = DiffeoMap(domain, "contraction", ratio=ratio)
    s = np.linspace(0.0, 1.0, n_check)
    img = m.forward(domain.gamma1.point(s))
    margin = float(domain.boundary_distance(img).min())
    inside = domain.contains_star(img, tol=-1e-12)
    if margin <= 0 or not inside.all():
        raise GeometryError(
            f"contracted curve not strictly inside (margin {margin:.3e}); "
            "reduce the contraction ratio")
    m.margin = margin
    return m


# ---------------------------------------------------------------------------
# cutoff

@dataclass(frozen=True)
class CutoffXi:
    """Radial C^2 cutoff: 1 within ``plateau`` of a corner, 0 beyond ``delta``."""

    corners: CornerConfig
    delta: float
    plateau: float
    smoothness_order: int = 2

    def profile(self, r):
        r = np.asarray(r, dtype=float)
        x = (r - self.plateau) / (self.delta - self.plateau)
        return 1.0 - smoothstep_quintic(x)

    def value(self, pts):
        p = _as_points(pts)
        g = self.corners.corner_points
        d = np.linalg.norm(p[:, None, :] - g[None, :, :], axis=2).min(axis=1)
        return self.profile(d)

    def to_dict(self):
        return {"delta": self.delta, "plateau": self.plateau}


def build_cutoff(corners: CornerConfig, delta: float, plateau: float) -> CutoffXi:
    if not corners.eps <= plateau < delta < corners.gap / 2:
        raise GeometryError(
            f"need eps <= plateau < delta < |g1-g2|/2, got plateau={plateau}, "
            f"delta={delta}, eps={corners.eps}, gap/2={corners.gap / 2}")
    return CutoffXi(corners=corners, delta=delta, plateau=plateau)


# ---------------------------------------------------------------------------
# serialization

def domain_to_dict(domain: DomainSpec) -> dict:
    return {
        "version": 1,
        "corners": {"omega0": domain.corners.omega0,
                    "g1": list(domain.corners.g1),
                    "g2": list(domain.corners.g2),
                    "eps": domain.corners.eps},
        "curves": {"gamma1": domain.gamma1.to_dict(),
                   "gamma2": domain.gamma2.to_dict()},
        "star_center": list(domain.star_center),
        "shape": domain.shape,
        "scale": domain.scale,
    }


def domain_from_dict(doc: dict) -> DomainSpec:
    if doc.get("version") != 1:
        raise GeometryError(f"unsupported geometry document version {doc.get('version')}")
    c = doc["corners"]
    corners = CornerConfig(omega0=c["omega0"], g1=tuple(c["g1"]),
                           g2=tuple(c["g2"]), eps=c["eps"])
    gamma1 = Curve([_piece_from_dict(p) for p in doc["curves"]["gamma1"]])
    gamma2 = Curve([_piece_from_dict(p) for p in doc["curves"]["gamma2"]])
    return DomainSpec(corners=corners, gamma1=gamma1, gamma2=gamma2,
                      star_center=tuple(doc["star_center"]),
                      shape=doc["shape"], scale=doc["scale"])


def spec_document(domain: DomainSpec, maps: dict = None,
                  cutoff: CutoffXi = None) -> dict:
    """Full geometry document consumed by the FEM layer and the service."""
    doc = domain_to_dict(domain)
    if maps:
        doc["maps"] = {name: m.to_dict() for name, m in maps.items()}
    if cutoff is not None:
        doc["cutoff"] = cutoff.to_dict()
    return doc


def domain_hash(domain: DomainSpec) -> str:
    blob = json.dumps(domain_to_dict(domain), sort_keys=True,
                      separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
