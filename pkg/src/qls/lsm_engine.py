"""Level-set machinery on a uniform 2D grid.

Fields are signed distances, negative inside. Evolution is normal flow
``phi_t + F |grad phi| = 0`` with Godunov upwinding, which selects the
entropy solution at kinks without explicit shock handling. Reinitialization
is fast sweeping on the eikonal equation; interface extraction is marching
squares.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import directed_hausdorff

from .contour_geometry import ConicLevelSet, dense_polyline
from .errors import DomainError, QLSError
from .marching import Polyline, marching_squares, polyline_distance

OUTSIDE, INTERFACE, INSIDE = 0, 1, 2


@dataclass(frozen=True)
class GridSpec:
    nx: int
    ny: int
    h: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise QLSError("grid needs nx, ny >= 3")
        if not self.h > 0:
            raise QLSError("grid spacing h must be positive")
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @classmethod
    def square(cls, n: int, lo: float, hi: float) -> "GridSpec":
        """``n`` x ``n`` nodes spanning ``[lo, hi]^2`` including both ends."""
        return cls(n, n, (hi - lo) / (n - 1), (lo, lo))

    @property
    def xs(self) -> np.ndarray:
        return self.origin[0] + self.h * np.arange(self.nx)

    @property
    def ys(self) -> np.ndarray:
        return self.origin[1] + self.h * np.arange(self.ny)

    def mesh(self):
        return np.meshgrid(self.xs, self.ys, indexing="ij")


@dataclass(frozen=True, eq=False)
class ScalarGridField:
    """Level-set function sampled at ``origin + h*(i, j)``; ``values[i, j]``."""

    nx: int
    ny: int
    h: float
    origin: tuple[float, float]
    values: np.ndarray

    def __post_init__(self):
        GridSpec(self.nx, self.ny, self.h, self.origin)
        v = np.array(self.values, dtype=float)
        if v.shape != (self.nx, self.ny):
            raise QLSError(f"values shape {v.shape} does not match grid ({self.nx}, {self.ny})")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @classmethod
    def on(cls, grid: GridSpec, values) -> "ScalarGridField":
        return cls(grid.nx, grid.ny, grid.h, grid.origin, values)

    @classmethod
    def from_function(cls, grid: GridSpec, fn) -> "ScalarGridField":
        X, Y = grid.mesh()
        return cls.on(grid, fn(X, Y))

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.nx, self.ny, self.h, self.origin)

    def with_values(self, values) -> "ScalarGridField":
        return ScalarGridField(self.nx, self.ny, self.h, self.origin, values)


@dataclass(frozen=True)
class ConstantSpeed:
    F: float


@dataclass(frozen=True, eq=False)
class PointSpeed:
    F: np.ndarray


@dataclass(frozen=True, eq=False)
class GridPartition:
    labels: np.ndarray  # OUTSIDE / INTERFACE / INSIDE per node

    @property
    def outside(self):
        return self.labels == OUTSIDE

    @property
    def interface(self):
        return self.labels == INTERFACE

    @property
    def inside(self):
        return self.labels == INSIDE

    def coords(self, field: ScalarGridField, label: int) -> np.ndarray:
        idx = np.argwhere(self.labels == label)
        return np.array(field.origin) + field.h * idx


# -- initialisation -----------------------------------------------------------


def _inside_polygon(pts, poly):
    """Even-odd rule, vectorised over query points."""
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    xa, ya = poly[:, 0], poly[:, 1]
    xb, yb = np.roll(xa, -1), np.roll(ya, -1)
    for x1, y1, x2, y2 in zip(xa, ya, xb, yb):
        crosses = (y1 > y) != (y2 > y)
        xint = x1 + (y - y1) * (x2 - x1) / np.where(y2 != y1, y2 - y1, 1.0)
        inside ^= crosses & (x < xint)
    return inside


def init_from_contour(contour, grid: GridSpec, center=(0.0, 0.0)) -> ScalarGridField:
    """Signed distance to a closed contour (an ellipse conic or a closed polyline).

    A conic is placed with its centre at ``center``.
    """
    center = np.asarray(center, dtype=float)
    if isinstance(contour, ConicLevelSet):
        poly = dense_polyline(contour) + center
    elif isinstance(contour, Polyline):
        if not contour.closed:
            raise QLSError("initialisation needs a closed polyline")
        poly = contour.points
    else:
        poly = np.asarray(contour, dtype=float)

    lo = np.array(grid.origin) + 2 * grid.h
    hi = np.array(grid.origin) + grid.h * (np.array([grid.nx, grid.ny]) - 1) - 2 * grid.h
    pmin, pmax = poly.min(axis=0), poly.max(axis=0)
    if np.any(pmin < lo) or np.any(pmax > hi):
        margin = float(min((pmin - lo + 2 * grid.h).min(), (hi + 2 * grid.h - pmax).min()))
        raise DomainError(
            f"contour bounding box [{pmin}, {pmax}] needs a 2h margin inside the grid "
            f"(closest approach to the edge: {margin:.6g}, required {2 * grid.h:.6g})"
        )

    X, Y = grid.mesh()
    pts = np.column_stack([X.ravel(), Y.ravel()])
    d = polyline_distance(pts, poly, closed=True, k=8)
    if isinstance(contour, ConicLevelSet):
        neg = contour.residual(pts[:, 0] - center[0], pts[:, 1] - center[1]) <= 0
    else:
        neg = _inside_polygon(pts, poly)
    return ScalarGridField.on(grid, np.where(neg, -d, d).reshape(grid.nx, grid.ny))


# -- evolution ----------------------------------------------------------------


def _one_sided_diffs(phi, h):
    # at grid edges the missing difference stays 0: the edge node then only uses its
    # interior difference when that one is upwind (copying it in would be downwind
    # at inflow edges and blows up)
    dxm = np.zeros_like(phi)
    dxp = np.zeros_like(phi)
    dym = np.zeros_like(phi)
    dyp = np.zeros_like(phi)
    fx = (phi[1:, :] - phi[:-1, :]) / h
    fy = (phi[:, 1:] - phi[:, :-1]) / h
    dxm[1:, :], dxp[:-1, :] = fx, fx
    dym[:, 1:], dyp[:, :-1] = fy, fy
    return dxm, dxp, dym, dyp


def godunov_gradient(phi, h, F):
    """``|grad phi|`` with Godunov upwinding for speed sign ``F``."""
    dxm, dxp, dym, dyp = _one_sided_diffs(phi, h)
    grad_p = np.sqrt(
        np.maximum(dxm, 0) ** 2 + np.minimum(dxp, 0) ** 2 + np.maximum(dym, 0) ** 2 + np.minimum(dyp, 0) ** 2
    )
    grad_m = np.sqrt(
        np.minimum(dxm, 0) ** 2 + np.maximum(dxp, 0) ** 2 + np.minimum(dym, 0) ** 2 + np.maximum(dyp, 0) ** 2
    )
    return np.where(F > 0, grad_p, grad_m)


def _speed_array(speed, shape):
    if isinstance(speed, ConstantSpeed):
        F = np.full(shape, float(speed.F))
    elif isinstance(speed, PointSpeed):
        F = np.asarray(speed.F, dtype=float)
    else:
        F = np.broadcast_to(np.asarray(speed, dtype=float), shape)
    if F.shape != shape:
        raise QLSError(f"speed shape {F.shape} does not match grid {shape}")
    if not np.all(np.isfinite(F)):
        raise QLSError("speed must be finite")
    return F


def evolve_steps(field: ScalarGridField, speed, t_final: float, cfl: float = 0.5):
    """Yield ``(t, field)`` after each explicit step of normal-flow evolution."""
    if t_final < 0:
        raise QLSError("t_final must be non-negative")
    F = _speed_array(speed, field.values.shape)
    fmax = float(np.max(np.abs(F))) if F.size else 0.0
    if fmax == 0.0 or t_final == 0.0:
        return
    dt_max = cfl * field.h / fmax
    n = int(np.ceil(t_final / dt_max - 1e-12))
    dt = t_final / n
    phi = field.values.copy()
    for k in range(1, n + 1):
        phi = phi - dt * F * godunov_gradient(phi, field.h, F)
        yield k * dt, field.with_values(phi)


def evolve(field: ScalarGridField, speed, t_final: float) -> ScalarGridField:
    """Advance ``phi_t + F |grad phi| = 0`` to ``t_final`` (first-order upwind, dt <= h / (2 max|F|))."""
    out = field
    for _, out in evolve_steps(field, speed, t_final):
        pass
    return out


# -- classification -------------------------------------------------------------


def classify_grid(field: ScalarGridField) -> GridPartition:
    """Split nodes into outside, interface and inside.

    A node is inside when ``phi <= 0`` (an exact zero counts as inside). The
    interface is the inside nodes that have at least one outside 4-neighbour;
    every other node is labelled by its sign.
    """
    phi = field.values
    inside = phi <= 0
    outside = ~inside
    touches_out = np.zeros_like(inside)
    touches_out[1:, :] |= outside[:-1, :]
    touches_out[:-1, :] |= outside[1:, :]
    touches_out[:, 1:] |= outside[:, :-1]
    touches_out[:, :-1] |= outside[:, 1:]
    labels = np.where(inside, INSIDE, OUTSIDE)
    labels[inside & touches_out] = INTERFACE
    return GridPartition(labels)


def interface_curvature(field: ScalarGridField) -> np.ndarray:
    """Mean curvature ``div(grad phi / |grad phi|)`` at the interface nodes."""
    gx, gy = np.gradient(field.values, field.h)
    norm = np.hypot(gx, gy)
    norm = np.where(norm > 1e-12, norm, 1e-12)
    kappa = np.gradient(gx / norm, field.h, axis=0) + np.gradient(gy / norm, field.h, axis=1)
    return kappa[classify_grid(field).interface]


# -- reinitialization ---------------------------------------------------------------


def _band_distances(phi, h):
    """Unsigned distance estimates at nodes next to a sign change, NaN elsewhere.

    Uses ``|phi| / |grad phi|`` (central differences), which leaves an exact
    distance field unchanged to O(h^2). Where the gradient nearly vanishes the
    estimate falls back to the linear-interpolation crossing distance.
    """
    neg = phi <= 0
    band = np.zeros(phi.shape, dtype=bool)
    cx = neg[1:, :] != neg[:-1, :]
    cy = neg[:, 1:] != neg[:, :-1]
    band[:-1, :] |= cx
    band[1:, :] |= cx
    band[:, :-1] |= cy
    band[:, 1:] |= cy

    gx, gy = np.gradient(phi, h)
    grad = np.hypot(gx, gy)

    big = np.inf
    cross = np.full(phi.shape, big)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = h * np.abs(phi[:-1, :]) / np.abs(phi[:-1, :] - phi[1:, :])
        cross[:-1, :] = np.minimum(cross[:-1, :], np.where(cx, t, big))
        t = h * np.abs(phi[1:, :]) / np.abs(phi[1:, :] - phi[:-1, :])
        cross[1:, :] = np.minimum(cross[1:, :], np.where(cx, t, big))
        t = h * np.abs(phi[:, :-1]) / np.abs(phi[:, :-1] - phi[:, 1:])
        cross[:, :-1] = np.minimum(cross[:, :-1], np.where(cy, t, big))
        t = h * np.abs(phi[:, 1:]) / np.abs(phi[:, 1:] - phi[:, :-1])
        cross[:, 1:] = np.minimum(cross[:, 1:], np.where(cy, t, big))
        est = np.where(grad > 0.5, np.abs(phi) / np.where(grad > 0, grad, 1.0), cross)
    # never place a node farther than its own crossing along a grid line
    d = np.minimum(est, cross)
    return np.where(band, d, np.nan)


def _sweep(u, fixed, h, flip_x, flip_y):
    """One Gauss-Seidel sweep in one diagonal ordering, vectorised along anti-diagonals.

    Every node on anti-diagonal ``k`` only depends on diagonal ``k - 1`` (already
    updated) and ``k + 1`` (not yet), so updating a whole diagonal at once is
    exactly the sequential sweep.
    """
    v = u[::-1] if flip_x else u
    v = v[:, ::-1] if flip_y else v
    fx = fixed[::-1] if flip_x else fixed
    fx = fx[:, ::-1] if flip_y else fx
    nx, ny = v.shape
    p = np.full((nx + 2, ny + 2), np.inf)
    p[1:-1, 1:-1] = v
    change = 0.0
    for k in range(nx + ny - 1):
        i = np.arange(max(0, k - ny + 1), min(k, nx - 1) + 1)
        j = k - i
        pi, pj = i + 1, j + 1
        a = np.minimum(p[pi - 1, pj], p[pi + 1, pj])
        b = np.minimum(p[pi, pj - 1], p[pi, pj + 1])
        with np.errstate(invalid="ignore"):
            diff = np.abs(a - b)
            far = ~(diff < h)
            c = np.where(far, np.minimum(a, b) + h, 0.5 * (a + b + np.sqrt(np.maximum(2 * h * h - diff * diff, 0.0))))
        old = p[pi, pj]
        new = np.where(fx[i, j], old, np.minimum(old, c))
        with np.errstate(invalid="ignore"):
            delta = np.where(np.isfinite(old), np.abs(new - old), np.where(np.isfinite(new), np.inf, 0.0))
        if delta.size:
            change = max(change, float(delta.max()))
        p[pi, pj] = new
    out = p[1:-1, 1:-1]
    out = out[::-1] if flip_x else out
    out = out[:, ::-1] if flip_y else out
    return out.copy(), change


def reinitialize(field: ScalarGridField, tol: float = 1e-6, max_rounds: int = 100) -> ScalarGridField:
    """Restore the signed-distance property by fast sweeping.

    Nodes next to the zero crossing keep interpolated distances; the rest are
    recomputed by Godunov sweeps in the four diagonal orderings until the
    largest update falls below ``tol * h``.
    """
    phi = field.values
    neg = phi <= 0
    if neg.all() or (~neg).all():
        raise QLSError("field has a single sign; nothing to anchor reinitialization")
    h = field.h
    band = _band_distances(phi, h)
    fixed = np.isfinite(band)
    u = np.where(fixed, band, np.inf)
    orders = ((False, False), (True, False), (True, True), (False, True))
    for _ in range(max_rounds):
        worst = 0.0
        for fx, fy in orders:
            u, ch = _sweep(u, fixed, h, fx, fy)
            worst = max(worst, ch)
        if worst < tol * h:
            break
    return field.with_values(np.where(neg, -u, u))


# -- extraction -------------------------------------------------------------------


def extract_interface(field: ScalarGridField) -> list[Polyline]:
    """Marching-squares polylines of ``phi = 0``; empty when there is no crossing."""
    return marching_squares(field.values, field.grid.xs, field.grid.ys, 0.0)


def hausdorff(a, b) -> float:
    """Symmetric Hausdorff distance between two point sets (vertex-based)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(max(directed_hausdorff(a, b)[0], directed_hausdorff(b, a)[0]))


def polyline_hausdorff(poly_a, poly_b, closed_a=True, closed_b=True) -> float:
    """Hausdorff distance between two polylines, measuring vertex-to-segment."""
    d1 = polyline_distance(poly_a, poly_b, closed=closed_b).max()
    d2 = polyline_distance(poly_b, poly_a, closed=closed_a).max()
    return float(max(d1, d2))


# -- CSV ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def field_to_csv(field: ScalarGridField) -> str:
    """Header ``nx,ny,h,origin_x,origin_y``, one line of those values, then one
    row per ``j`` (fixed y) holding the ``nx`` values along x."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["nx", "ny", "h", "origin_x", "origin_y"])
    w.writerow([field.nx, field.ny, _fmt(field.h), _fmt(field.origin[0]), _fmt(field.origin[1])])
    for j in range(field.ny):
        w.writerow([_fmt(v) for v in field.values[:, j]])
    return buf.getvalue()


def field_from_csv(text: str) -> ScalarGridField:
    rows = list(csv.reader(io.StringIO(text)))
    if rows[0] != ["nx", "ny", "h", "origin_x", "origin_y"]:
        raise QLSError("not a grid-field CSV")
    nx, ny = int(rows[1][0]), int(rows[1][1])
    h, ox, oy = (float(v) for v in rows[1][2:5])
    vals = np.array([[float(v) for v in r] for r in rows[2 : 2 + ny]]).T
    return ScalarGridField(nx, ny, h, (ox, oy), vals)
