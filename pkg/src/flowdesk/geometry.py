"""NACA 4-digit airfoil surfaces, B-spline reduction, and domain point sampling.

Conventions: chord length 1, chordwise stations sampled on a cosine-clustered
grid so points concentrate at the leading and trailing edges.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline

# Thickness polynomial coefficients (closed trailing edge NOT enforced).
A0, A1, A2, A3, A4 = 0.2969, -0.1260, -0.3516, 0.2843, -0.1015

# Design-space box: t fixed, (m, p) free.
DESIGN_T = 0.15
M_RANGE = (0.01, 0.09)
P_RANGE = (0.20, 0.50)

# Analysis box around a unit-chord airfoil, used for exterior sampling
# and flow-field queries.
ANALYSIS_BOX = (-0.5, 1.5, -1.0, 1.0)

DEFAULT_N_POINTS = 100
DEFAULT_N_CTRL = 30

UNIT_RIGHT_TRIANGLE = ((0.0, 0.0), (1.0, 0.0), (0.0, 1.0))


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class AirfoilParams:
    """Design point: max thickness t, max camber m, camber position p (chord fractions)."""

    t: float
    m: float
    p: float

    def __post_init__(self):
        if not self.t > 0:
            raise GeometryError(f"thickness must be positive, got t={self.t}")
        if not 0 < self.p < 1:
            raise GeometryError(f"camber position must lie in (0,1), got p={self.p}")
        if self.m < 0:
            raise GeometryError(f"camber must be nonnegative, got m={self.m}")

    def in_design_box(self) -> bool:
        return (
            abs(self.t - DESIGN_T) < 1e-12
            and M_RANGE[0] <= self.m <= M_RANGE[1]
            and P_RANGE[0] <= self.p <= P_RANGE[1]
        )


def design_sample(t: float, m: float, p: float) -> AirfoilParams:
    """AirfoilParams constructor that enforces the design-box bounds."""
    params = AirfoilParams(t=t, m=m, p=p)
    if not params.in_design_box():
        raise GeometryError(
            f"(t={t}, m={m}, p={p}) outside design box "
            f"t={DESIGN_T}, m in {M_RANGE}, p in {P_RANGE}"
        )
    return params


@dataclass
class AirfoilProfile:
    """Sampled upper/lower surfaces, each (n_points, 2) ordered along the station grid.

    The station grid x runs monotonically 0 -> 1; the rotated surface
    abscissae x_u/x_l follow it except in a tiny nose region for cambered
    sections where the thickness offset pulls points slightly upstream.
    """

    upper: np.ndarray
    lower: np.ndarray
    params: AirfoilParams
    stations: np.ndarray = field(repr=False, default=None)

    @property
    def n_points(self) -> int:
        return len(self.upper)

    def closed_polygon(self) -> np.ndarray:
        """Counterclockwise closed vertex loop: upper TE->LE, lower LE->TE.

        The shared leading-edge vertex is deduplicated; the trailing edge
        stays open (closing segment is implicit between last and first vertex).
        """
        return np.vstack([self.upper[::-1], self.lower[1:]])

    def to_json(self) -> str:
        return json.dumps(
            {
                "params": {"t": self.params.t, "m": self.params.m, "p": self.params.p},
                "upper": self.upper.tolist(),
                "lower": self.lower.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "AirfoilProfile":
        obj = json.loads(text)
        p = obj["params"]
        return cls(
            upper=np.asarray(obj["upper"], dtype=float),
            lower=np.asarray(obj["lower"], dtype=float),
            params=AirfoilParams(t=p["t"], m=p["m"], p=p["p"]),
        )

    def to_csv(self) -> str:
        """Closed loop as plain x,y lines for external plotting."""
        buf = io.StringIO()
        writer = csv.writer(buf)
        for x, y in self.closed_polygon():
            writer.writerow([f"{x:.12g}", f"{y:.12g}"])
        return buf.getvalue()


@dataclass
class BSplineCurve:
    degree: int
    control_points: np.ndarray  # (n_ctrl, 2)
    knots: np.ndarray

    def __post_init__(self):
        n, k = len(self.control_points), self.degree
        if len(self.knots) != n + k + 1:
            raise GeometryError(
                f"knot count {len(self.knots)} != control count {n} + degree {k} + 1"
            )
        if np.any(np.diff(self.knots) < 0):
            raise GeometryError("knot vector must be nondecreasing")

    def __call__(self, u) -> np.ndarray:
        spl = BSpline(self.knots, self.control_points, self.degree)
        return spl(np.asarray(u, dtype=float))

    @property
    def n_ctrl(self) -> int:
        return len(self.control_points)


@dataclass
class DomainSpec:
    """Point-sampling domain: unit square, right triangle, or airfoil exterior box."""

    kind: str  # unit_square | unit_right_triangle | airfoil_exterior_box
    profile: AirfoilProfile | None = None
    bounds: tuple = None
    triangle: tuple = UNIT_RIGHT_TRIANGLE

    def __post_init__(self):
        kinds = ("unit_square", "unit_right_triangle", "airfoil_exterior_box")
        if self.kind not in kinds:
            raise GeometryError(f"unknown domain kind {self.kind!r}, expected one of {kinds}")
        if self.kind == "airfoil_exterior_box":
            if self.profile is None:
                raise GeometryError("airfoil_exterior_box requires a profile")
            if self.bounds is None:
                self.bounds = ANALYSIS_BOX
        elif self.bounds is None:
            self.bounds = (0.0, 1.0, 0.0, 1.0)


def thickness(t: float, x) -> np.ndarray | float:
    """Half-thickness distribution y_t(x) of the 4-digit family, scaled by t/0.2."""
    if not t > 0:
        raise GeometryError(f"thickness must be positive, got t={t}")
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0) or np.any(xa > 1):
        raise GeometryError("x must lie in [0, 1]")
    yt = t / 0.2 * (A0 * np.sqrt(xa) + A1 * xa + A2 * xa**2 + A3 * xa**3 + A4 * xa**4)
    return yt if yt.ndim else float(yt)


def camber_line(m: float, p: float, x):
    """Mean camber line value and slope, piecewise quadratic about x = p.

    The two branches agree in value and slope at x = p; the fore branch is
    used for x <= p.
    """
    if not 0 < p < 1:
        raise GeometryError(f"camber position must lie in (0,1), got p={p}")
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0) or np.any(xa > 1):
        raise GeometryError("x must lie in [0, 1]")
    fore = xa <= p
    yc = np.where(
        fore,
        m / p**2 * (2 * p * xa - xa**2),
        m / (1 - p) ** 2 * (1 - 2 * p + 2 * p * xa - xa**2),
    )
    dyc = np.where(
        fore,
        2 * m / p**2 * (p - xa),
        2 * m / (1 - p) ** 2 * (p - xa),
    )
    if yc.ndim:
        return yc, dyc
    return float(yc), float(dyc)


def cosine_stations(n: int) -> np.ndarray:
    """x_i = (1 - cos(pi i/(n-1)))/2: clustered at both chord ends."""
    i = np.arange(n)
    return 0.5 * (1.0 - np.cos(np.pi * i / (n - 1)))


def naca_profile(params: AirfoilParams, n_points: int = DEFAULT_N_POINTS) -> AirfoilProfile:
    """Sample the upper/lower surfaces of a 4-digit section at n_points stations."""
    if n_points < 10:
        raise GeometryError(f"n_points must be >= 10, got {n_points}")
    x = cosine_stations(n_points)
    yt = thickness(params.t, x)
    yc, dyc = camber_line(params.m, params.p, x)
    theta = np.arctan(dyc)
    s, c = np.sin(theta), np.cos(theta)
    upper = np.column_stack([x - yt * s, yc + yt * c])
    lower = np.column_stack([x + yt * s, yc - yt * c])
    return AirfoilProfile(upper=upper, lower=lower, params=params, stations=x)


def clamped_knots(
    u: np.ndarray,
    n_ctrl: int,
    degree: int,
    points: np.ndarray | None = None,
    uniform_weight: float = 4.0,
) -> np.ndarray:
    """Clamped knot vector with curvature-adaptive interior knots.

    Interior knots sit at quantiles of a density combining the polyline's
    turning angle with a uniform background (weight ``uniform_weight``), so
    flexibility concentrates in high-curvature regions such as the leading
    edge while every span stays populated. Without ``points`` the density is
    plain data-parameter quantiles.
    """
    n_interior = n_ctrl - degree - 1
    q = np.linspace(0, 1, n_interior + 2)[1:-1]
    u = np.asarray(u, dtype=float)
    if points is None:
        interior = np.quantile(np.sort(u), q)
    else:
        d = np.diff(np.asarray(points, dtype=float), axis=0)
        ang = np.arctan2(d[:, 1], d[:, 0])
        turn = np.abs(np.diff(np.unwrap(ang)))
        w = np.concatenate([[0.0], turn, [0.0]])
        dens = np.cumsum(w + uniform_weight * np.gradient(u))
        dens = (dens - dens[0]) / (dens[-1] - dens[0])
        interior = np.interp(q, dens, u)
    return np.concatenate([np.zeros(degree + 1), interior, np.ones(degree + 1)])


def _chord_params(pts: np.ndarray) -> np.ndarray:
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    total = seg.sum()
    if total <= 0:
        raise GeometryError("degenerate point sequence (zero arc length)")
    return np.concatenate([[0.0], np.cumsum(seg)]) / total


def _bspline_design_matrix(u: np.ndarray, n_ctrl: int, degree: int, knots):
    # design_matrix rejects u exactly at the right end; nudge inside the span
    u = np.clip(u, 0.0, 1.0 - 1e-12)
    mat = BSpline.design_matrix(u, knots, degree).toarray()
    return mat, knots


def fit_bspline_points(
    points: np.ndarray,
    n_ctrl: int = DEFAULT_N_CTRL,
    degree: int = 3,
    u: np.ndarray | None = None,
    knots: np.ndarray | None = None,
) -> tuple[BSplineCurve, float]:
    """Least-squares clamped B-spline through a point sequence.

    Parameters default to normalized chord length of the polyline. Returns
    the curve and the max fit distance at the data parameters.
    """
    pts = np.asarray(points, dtype=float)
    if len(pts) < n_ctrl:
        raise GeometryError(f"need at least {n_ctrl} points, got {len(pts)}")
    if u is None:
        u = _chord_params(pts)
    u = np.asarray(u, dtype=float)
    if knots is None:
        knots = clamped_knots(u, n_ctrl, degree, points=pts)
    mat, knots = _bspline_design_matrix(u, n_ctrl, degree, knots)
    # Rank check guards against degenerate parameterizations before solving.
    if np.linalg.matrix_rank(mat) < n_ctrl:
        raise GeometryError("singular normal equations: degenerate profile or parameters")
    ctrl, *_ = np.linalg.lstsq(mat, pts, rcond=None)
    curve = BSplineCurve(degree=degree, control_points=ctrl, knots=knots)
    resid = float(np.max(np.linalg.norm(mat @ ctrl - pts, axis=1)))
    return curve, resid


def fit_bspline(
    profile: AirfoilProfile, n_ctrl: int = DEFAULT_N_CTRL, degree: int = 3
) -> tuple[BSplineCurve, float]:
    """Dimension reduction: fit the closed surface loop with n_ctrl control points."""
    loop = profile.closed_polygon()
    return fit_bspline_points(loop, n_ctrl=n_ctrl, degree=degree)


def branch_input(profile: AirfoilProfile, n_ctrl: int = DEFAULT_N_CTRL) -> np.ndarray:
    """Flattened control-point vector (2*n_ctrl scalars) encoding a geometry."""
    curve, _ = fit_bspline(profile, n_ctrl=n_ctrl)
    return curve.control_points.ravel().copy()


def point_in_polygon(points: np.ndarray, polygon: np.ndarray) -> np.ndarray:
    """Even-odd ray casting; points exactly on edges count as inside."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    poly = np.asarray(polygon, dtype=float)
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    x1, y1 = poly[:, 0], poly[:, 1]
    x2, y2 = np.roll(x1, -1), np.roll(y1, -1)
    for xa, ya, xb, yb in zip(x1, y1, x2, y2):
        crosses = ((ya > y) != (yb > y)) & (
            x < (xb - xa) * (y - ya) / (yb - ya + 1e-300) + xa
        )
        inside ^= crosses
    return inside


def sample_domain(spec: DomainSpec, n: int, seed: int) -> np.ndarray:
    """Seeded uniform points inside the domain; rejection for airfoil exteriors."""
    if n < 1:
        raise GeometryError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    if spec.kind == "unit_square":
        return rng.random((n, 2))
    if spec.kind == "unit_right_triangle":
        a, b, c = (np.asarray(v, dtype=float) for v in spec.triangle)
        u = rng.random((n, 2))
        flip = u.sum(axis=1) > 1.0
        u[flip] = 1.0 - u[flip]
        return a + u[:, :1] * (b - a) + u[:, 1:] * (c - a)
    # airfoil_exterior_box: rejection against the closed profile polygon
    xmin, xmax, ymin, ymax = spec.bounds
    poly = spec.profile.closed_polygon()
    out = np.empty((0, 2))
    attempts = 0
    while len(out) < n:
        if attempts > 200:
            raise GeometryError("rejection sampling failed: domain area too small")
        batch = rng.random((max(2 * n, 64), 2))
        batch[:, 0] = xmin + batch[:, 0] * (xmax - xmin)
        batch[:, 1] = ymin + batch[:, 1] * (ymax - ymin)
        keep = ~point_in_polygon(batch, poly)
        out = np.vstack([out, batch[keep]])
        attempts += 1
    return out[:n]


@dataclass
class SurfaceFrames:
    """Per-segment midpoints, outward unit normals, unit tangents, and lengths."""

    midpoints: np.ndarray
    normals: np.ndarray
    tangents: np.ndarray
    ds: np.ndarray
    theta: np.ndarray  # tangent inclination angle per segment

    def __len__(self) -> int:
        return len(self.ds)


def _is_simple_polygon(verts: np.ndarray) -> bool:
    """Pairwise proper-intersection test over all non-adjacent segment pairs."""
    n = len(verts)
    a = verts
    b = np.roll(verts, -1, axis=0)

    def cross(o, pa, pb):
        return (pa[..., 0] - o[..., 0]) * (pb[..., 1] - o[..., 1]) - (
            pa[..., 1] - o[..., 1]
        ) * (pb[..., 0] - o[..., 0])

    # orientation of each segment's endpoints w.r.t. every other segment
    a_i, b_i = a[:, None, :], b[:, None, :]
    a_j, b_j = a[None, :, :], b[None, :, :]
    d1 = cross(a_j, b_j, a_i)
    d2 = cross(a_j, b_j, b_i)
    d3 = cross(a_i, b_i, a_j)
    d4 = cross(a_i, b_i, b_j)
    crossing = ((d1 > 0) != (d2 > 0)) & ((d3 > 0) != (d4 > 0))
    idx = np.arange(n)
    adjacent = (np.abs(idx[:, None] - idx[None, :]) <= 1) | (
        np.abs(idx[:, None] - idx[None, :]) == n - 1
    )
    return not bool(np.any(crossing & ~adjacent))


def surface_frames(profile_or_polygon) -> SurfaceFrames:
    """Discrete frames along a closed counterclockwise contour.

    The closed-contour identity sum(n_hat * ds) = 0 holds exactly up to
    floating point because normals are built from vertex differences.
    """
    if isinstance(profile_or_polygon, AirfoilProfile):
        verts = profile_or_polygon.closed_polygon()
    else:
        verts = np.asarray(profile_or_polygon, dtype=float)
    if not _is_simple_polygon(verts):
        raise GeometryError("profile polygon is self-intersecting")
    nxt = np.roll(verts, -1, axis=0)
    d = nxt - verts
    ds = np.linalg.norm(d, axis=1)
    keep = ds > 0
    verts, nxt, d, ds = verts[keep], nxt[keep], d[keep], ds[keep]
    tangents = d / ds[:, None]
    # CCW traversal: outward normal is the tangent rotated -90 degrees.
    normals = np.column_stack([tangents[:, 1], -tangents[:, 0]])
    # Ensure outward orientation regardless of input winding.
    area2 = float(np.sum(verts[:, 0] * nxt[:, 1] - nxt[:, 0] * verts[:, 1]))
    if area2 < 0:
        normals = -normals
    mid = 0.5 * (verts + nxt)
    theta = np.arctan2(tangents[:, 1], tangents[:, 0])
    return SurfaceFrames(midpoints=mid, normals=normals, tangents=tangents, ds=ds, theta=theta)


def points_to_csv(points: np.ndarray) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    for x, y in np.asarray(points, dtype=float):
        writer.writerow([f"{x:.12g}", f"{y:.12g}"])
    return buf.getvalue()
