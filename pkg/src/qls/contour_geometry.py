"""Constant-expectation contours in the ``(a1, a2)`` chart of a three-level system.

With ``a3`` eliminated through normalization, the states of a fixed energy
expectation satisfy ``E'_1 a1^2 + E'_2 a2^2 = 1`` where
``E'_i = (E_i - E_3) / (<E> - E_3)``. The chart uses the upper hemisphere,
``a3 = +sqrt(1 - a1^2 - a2^2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ChartExitError, ContourError, IdenticalConicsError, QLSError
from .marching import marching_squares, polyline_distance
from .state_space import ObservableMatrix, Spectrum, StateVec

MEMBERSHIP_TOL = 1e-10
#: Vertices used for the dense polyline behind signed distances.
DENSE_SAMPLES = 4096
_CHART_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ConicLevelSet:
    """The conic ``a^T quad a = rhs`` in the ``(a1, a2)`` plane (``rhs`` is 1)."""

    quad: np.ndarray
    rhs: float = 1.0
    spectrum: Spectrum | None = None
    target: float | None = None

    def __post_init__(self):
        q = np.array(self.quad, dtype=float)
        if q.shape != (2, 2):
            raise QLSError(f"quad must be 2x2, got {q.shape}")
        if not np.array_equal(q, q.T):
            raise QLSError("quad must be symmetric")
        q.setflags(write=False)
        object.__setattr__(self, "quad", q)
        object.__setattr__(self, "rhs", float(self.rhs))

    @classmethod
    def diagonal(cls, d1, d2, **meta) -> "ConicLevelSet":
        return cls(np.diag([float(d1), float(d2)]), **meta)

    @property
    def is_diagonal(self) -> bool:
        return self.quad[0, 1] == 0.0

    @property
    def semi_axes(self) -> tuple[float, float]:
        """``(A, B)`` for a diagonal ellipse: ``A = 1/sqrt(E'_1)``, ``B = 1/sqrt(E'_2)``."""
        if not self.is_diagonal:
            raise QLSError("semi_axes only defined for axis-aligned conics")
        d = np.diag(self.quad) / self.rhs
        if np.any(d <= 0):
            raise ContourError("conic is not an ellipse")
        return float(1.0 / np.sqrt(d[0])), float(1.0 / np.sqrt(d[1]))

    def residual(self, a1, a2):
        q = self.quad
        return q[0, 0] * a1 * a1 + 2.0 * q[0, 1] * a1 * a2 + q[1, 1] * a2 * a2 - self.rhs

    def same_as(self, other: "ConicLevelSet", tol: float = 1e-12) -> bool:
        """True when both describe the same curve, i.e. are equal up to scale."""
        s1 = np.array([self.quad[0, 0], self.quad[0, 1], self.quad[1, 1], self.rhs])
        s2 = np.array([other.quad[0, 0], other.quad[0, 1], other.quad[1, 1], other.rhs])
        u1, u2 = s1 / np.linalg.norm(s1), s2 / np.linalg.norm(s2)
        return bool(min(np.abs(u1 - u2).max(), np.abs(u1 + u2).max()) <= tol)


@dataclass(frozen=True)
class ContourPoint:
    """A chart point with its reconstructed third coefficient.

    ``a3`` is NaN for plane points that lie outside the unit disk; such points
    carry no state. :func:`perturb_contour` can produce them because its
    first-order steps are taken in the plane.
    """

    a1: float
    a2: float
    a3: float

    @classmethod
    def from_plane(cls, a1, a2, strict: bool = True, sign: float = 1.0) -> "ContourPoint":
        rem = 1.0 - a1 * a1 - a2 * a2
        if rem < -_CHART_TOL:
            if strict:
                raise ChartExitError(f"plane point ({a1:.6g}, {a2:.6g}) lies outside the unit disk")
            return cls(float(a1), float(a2), float("nan"))
        a3 = np.sqrt(max(rem, 0.0))
        return cls(float(a1), float(a2), float(np.copysign(a3, sign)))

    @classmethod
    def from_state(cls, state) -> "ContourPoint":
        c = np.asarray(state, dtype=float)
        if c.size != 3:
            raise QLSError("the (a1, a2) chart needs three-level states")
        return cls(float(c[0]), float(c[1]), float(c[2]))

    @property
    def in_chart(self) -> bool:
        return not np.isnan(self.a3)

    @property
    def plane(self) -> np.ndarray:
        return np.array([self.a1, self.a2])

    def to_state(self) -> StateVec:
        if not self.in_chart:
            raise ChartExitError("point has no state above it")
        return StateVec(np.array([self.a1, self.a2, self.a3]))


@dataclass(frozen=True)
class ContourSample:
    """Points sampled on a contour, plus the parameter angles kept and dropped."""

    points: list
    theta: np.ndarray
    dropped: int = 0
    dropped_theta: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __getitem__(self, k):
        return self.points[k]


@dataclass(frozen=True)
class ThetaContours:
    polylines: list
    degenerate: bool = False

    def __len__(self):
        return len(self.polylines)

    def __iter__(self):
        return iter(self.polylines)


def _require_three_level(spectrum: Spectrum):
    if spectrum.n != 3:
        raise QLSError("energy contours in the (a1, a2) chart need a three-level spectrum")
    e1, e2, e3 = spectrum.values
    if not (e1 > e3 and e2 > e3):
        raise ContourError("need E_1 > E_3 and E_2 > E_3 for elliptical contours")
    return e1, e2, e3


def energy_contour(spectrum: Spectrum, target: float) -> ConicLevelSet:
    """Ellipse of states with ``<E> = target``, with ``E'_i = (E_i - E_3)/(target - E_3)``."""
    e1, e2, e3 = _require_three_level(spectrum)
    target = float(target)
    if not target > e3:
        raise ContourError(f"target {target} <= E_3 = {e3}: contour is empty or a single point")
    if target > max(e1, e2):
        raise ContourError(f"target {target} exceeds the attainable maximum {max(e1, e2)} in the chart")
    d = target - e3
    return ConicLevelSet(np.diag([(e1 - e3) / d, (e2 - e3) / d]), spectrum=spectrum, target=target)


def _param_points(c: ConicLevelSet, theta):
    A, B = c.semi_axes
    return A * np.cos(theta), B * np.sin(theta)


def sample_contour(c: ConicLevelSet, m: int) -> ContourSample:
    """``m`` points at uniform eccentric anomaly; chart exits are dropped and counted."""
    if m < 3:
        raise QLSError("need at least 3 samples")
    theta = 2.0 * np.pi * np.arange(m) / m
    a1, a2 = _param_points(c, theta)
    # cos/sin at quarter turns leave ~1e-17 residue; snap so axis points sit on the axes
    a1 = np.where(np.abs(a1) < 1e-15, 0.0, a1)
    a2 = np.where(np.abs(a2) < 1e-15, 0.0, a2)
    rem = 1.0 - a1 * a1 - a2 * a2
    ok = rem >= -_CHART_TOL
    pts = [ContourPoint.from_plane(x, y) for x, y in zip(a1[ok], a2[ok])]
    return ContourSample(pts, theta[ok], int(np.count_nonzero(~ok)), theta[~ok])


def contour_point_at(c: ConicLevelSet, theta: float) -> ContourPoint:
    a1, a2 = _param_points(c, theta)
    try:
        return ContourPoint.from_plane(float(a1), float(a2))
    except ChartExitError as exc:
        raise ChartExitError(str(exc), theta=theta) from None


def eccentric_anomaly(c: ConicLevelSet, a1: float, a2: float) -> float:
    A, B = c.semi_axes
    return float(np.arctan2(a2 / B, a1 / A))


def _plane(p):
    if isinstance(p, ContourPoint):
        return p.a1, p.a2
    arr = np.asarray(p, dtype=float)
    return float(arr[0]), float(arr[1])


def contour_residual(c: ConicLevelSet, p) -> float:
    """``a^T quad a - 1``; zero on the contour, negative inside."""
    a1, a2 = _plane(p)
    return float(c.residual(a1, a2))


def perturb_contour(c: ConicLevelSet, points, dE: float):
    """Move a contour and its points to ``<E> + dE`` to first order.

    The new conic is exact. Each point steps along the unit normal
    ``n = quad a / |quad a|`` by ``delta = -a^T dquad a / (2 a^T quad n)``, the
    solution of the linearised membership condition, where
    ``dquad = -(E_i - E_3)/(<E> - E_3)^2 dE`` on the diagonal. Moved points
    miss the new conic by O(dE^2).
    """
    if c.spectrum is None or c.target is None:
        raise QLSError("perturb_contour needs a contour built by energy_contour")
    e1, e2, e3 = _require_three_level(c.spectrum)
    dE = float(dE)
    if dE == 0.0:
        return c, list(points)
    new_target = c.target + dE
    if not new_target > e3:
        raise ContourError(f"dE = {dE} drives the target below E_3")
    new_c = energy_contour(c.spectrum, new_target)
    width = c.target - e3
    dquad = np.diag([-(e1 - e3), -(e2 - e3)]) / width**2 * dE

    moved = []
    for p in points:
        a = np.array(_plane(p))
        if abs(c.residual(*a)) > 1e-9:
            raise ContourError("point is not on the source contour")
        g = c.quad @ a
        gn = np.linalg.norm(g)
        if gn < 1e-14:
            raise ContourError("degenerate normal: quad @ a vanishes")
        n = g / gn
        delta = -(a @ dquad @ a) / (2.0 * (a @ c.quad @ n))
        b = a + delta * n
        sign = p.a3 if isinstance(p, ContourPoint) and p.in_chart else 1.0
        moved.append(ContourPoint.from_plane(b[0], b[1], strict=False, sign=1.0 if sign >= 0 else -1.0))
    return new_c, moved


def dense_polyline(c: ConicLevelSet, m: int = DENSE_SAMPLES) -> np.ndarray:
    """Closed polyline of ``m`` vertices on an ellipse (full plane, no chart clipping)."""
    w, V = np.linalg.eigh(c.quad / c.rhs)
    if np.any(w <= 0):
        raise ContourError("conic is not an ellipse")
    t = 2.0 * np.pi * np.arange(m) / m
    if c.is_diagonal:
        A, B = c.semi_axes
        return np.stack([A * np.cos(t), B * np.sin(t)], axis=1)
    local = np.stack([np.cos(t) / np.sqrt(w[0]), np.sin(t) / np.sqrt(w[1])], axis=1)
    return local @ V.T


def signed_distance_to_contour(c: ConicLevelSet, q, m: int = DENSE_SAMPLES):
    """Distance from ``q`` to the contour, negative inside.

    Uses an ``m``-vertex polyline; the error is bounded by the chord sagitta,
    roughly ``(2 pi A)^2 / (8 m^2 B)`` for semi-axes A >= B.
    """
    pts = np.atleast_2d(np.asarray(q, dtype=float))
    poly = dense_polyline(c, m)
    d = polyline_distance(pts, poly, closed=True, k=16)
    r = c.residual(pts[:, 0], pts[:, 1])
    out = np.where(r < 0, -d, d)
    return float(out[0]) if np.ndim(q) == 1 else out


def theta_field(obs: ObservableMatrix, resolution: int):
    """Grid over [-1, 1]^2 of ``<theta>`` lifted to the upper hemisphere (NaN off the disk)."""
    if obs.n != 3:
        raise QLSError("theta contours need a 3x3 observable")
    s = np.linspace(-1.0, 1.0, resolution)
    a1, a2 = np.meshgrid(s, s, indexing="ij")
    rem = 1.0 - a1 * a1 - a2 * a2
    a3 = np.sqrt(np.where(rem >= 0, rem, np.nan))
    a = np.stack([a1, a2, a3], axis=-1)
    f = np.einsum("...i,ij,...j->...", a, obs.entries, a)
    return s, f


def theta_contour(obs: ObservableMatrix, target: float, resolution: int) -> ThetaContours:
    """Polylines where ``<theta> = target`` over the unit disk.

    Cells crossing the disk boundary are skipped, so curves reaching the rim
    come back open.
    """
    if resolution < 16:
        raise QLSError("resolution must be at least 16")
    s, f = theta_field(obs, resolution)
    g = f - float(target)
    vals = g[np.isfinite(g)]
    scale = max(1.0, float(np.max(np.abs(f[np.isfinite(f)]))))
    if np.max(np.abs(vals)) <= 1e-12 * scale:
        return ThetaContours([], degenerate=True)
    if vals.min() > 0 or vals.max() < 0:
        return ThetaContours([])
    return ThetaContours(marching_squares(g, s, s, 0.0))


def theta_conic(obs: ObservableMatrix, target: float) -> ConicLevelSet:
    """The ``<theta> = target`` contour as a conic, when it is one.

    Works when ``Theta`` does not couple ``a3`` to ``a1``/``a2``; then
    eliminating ``a3^2`` leaves a quadratic form in the plane.
    """
    m = obs.entries
    if obs.n != 3:
        raise QLSError("need a 3x3 observable")
    if m[0, 2] != 0 or m[1, 2] != 0:
        raise QLSError("observable couples a3 to the plane; contour is not a conic in the chart")
    t33 = m[2, 2]
    rhs = float(target) - t33
    if rhs == 0:
        raise ContourError("target equals Theta_33: degenerate conic through the origin")
    quad = (m[:2, :2] - t33 * np.eye(2)) / rhs
    quad = (quad + quad.T) / 2
    return ConicLevelSet(quad)


def _diag_intersections(c1: ConicLevelSet, c2: ConicLevelSet):
    M = np.array([[c1.quad[0, 0], c1.quad[1, 1]], [c2.quad[0, 0], c2.quad[1, 1]]])
    rhs = np.array([c1.rhs, c2.rhs])
    det = np.linalg.det(M)
    if abs(det) <= 1e-14 * np.abs(M).max() ** 2:
        return []
    x, y = np.linalg.solve(M, rhs)
    tol = 1e-14
    if x < -tol or y < -tol:
        return []
    x, y = max(x, 0.0), max(y, 0.0)
    rx, ry = np.sqrt(x), np.sqrt(y)
    pts = []
    for sx in ((1, -1) if rx > 0 else (1,)):
        for sy in ((1, -1) if ry > 0 else (1,)):
            pts.append((sx * rx, sy * ry))
    return pts


def _ellipse_frame(c: ConicLevelSet):
    w, V = np.linalg.eigh(c.quad / c.rhs)
    if np.any(w <= 0):
        return None
    return V @ np.diag(1.0 / np.sqrt(w))


def _general_intersections(c1: ConicLevelSet, c2: ConicLevelSet):
    # parametrise whichever conic is an ellipse, a(t) = L (cos t, sin t),
    # and solve the trigonometric quadratic of the other one as a quartic in z = e^{it}
    L = _ellipse_frame(c1)
    other = c2
    if L is None:
        L = _ellipse_frame(c2)
        other = c1
    if L is None:
        raise QLSError("at least one conic must be an ellipse")
    Q = L.T @ other.quad @ L
    a, b, d = Q[0, 0], Q[0, 1], Q[1, 1]
    r = other.rhs
    # a cos^2 + 2b cos sin + d sin^2 - r = 0 with cos = (z+1/z)/2, sin = (z-1/z)/(2i)
    # multiply by 4 z^2
    c4 = a - d - 2j * b
    c2_ = 2 * (a + d) - 4 * r
    c0 = a - d + 2j * b
    coeffs = [c4, 0.0, c2_, 0.0, c0]
    while coeffs and abs(coeffs[0]) < 1e-15:
        coeffs = coeffs[1:]
    roots = np.roots(coeffs) if len(coeffs) > 1 else np.array([])
    pts = []
    for z in roots:
        if abs(abs(z) - 1.0) > 1e-6:
            continue
        t = float(np.angle(z))
        p = L @ np.array([np.cos(t), np.sin(t)])
        pts.append(_newton_refine(c1, c2, p))
    return pts


def _newton_refine(c1, c2, p, iters=8):
    p = np.array(p, dtype=float)
    for _ in range(iters):
        F = np.array([c1.residual(*p), c2.residual(*p)])
        J = 2.0 * np.array([c1.quad @ p, c2.quad @ p])
        if abs(np.linalg.det(J)) < 1e-300:
            break
        step = np.linalg.solve(J, F)
        p = p - step
        if np.max(np.abs(step)) < 1e-17:
            break
    return float(p[0]), float(p[1])


def _dedupe(pts, tol=1e-9):
    out = []
    for p in pts:
        if all(abs(p[0] - q[0]) > tol or abs(p[1] - q[1]) > tol for q in out):
            out.append(p)
    return out


def intersect_conics(c1: ConicLevelSet, c2: ConicLevelSet) -> list[tuple[float, float]]:
    """All real common points of two conics (at most four).

    Axis-aligned pairs are solved in closed form by eliminating to a linear
    system in ``(a1^2, a2^2)``; other pairs by parametrising an ellipse and
    solving the resulting quartic.
    """
    if c1.same_as(c2):
        raise IdenticalConicsError("conics coincide; the intersection is the whole curve")
    if c1.is_diagonal and c2.is_diagonal:
        pts = _diag_intersections(c1, c2)
    else:
        pts = _general_intersections(c1, c2)
    pts = _dedupe(pts)
    pts = [p for p in pts if abs(c1.residual(*p)) < 1e-9 and abs(c2.residual(*p)) < 1e-9]
    return sorted(pts)
