"""Orthogonal maps that move states within and between expectation contours.

Real amplitudes make every control step an orthogonal matrix. A single
state pair ``p -> q`` only fixes one column of the map, so the canonical
choice here is the minimal rotation in the plane of ``p`` and ``q``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .contour_geometry import (
    ConicLevelSet,
    ContourPoint,
    contour_point_at,
    eccentric_anomaly,
)
from .errors import ChartExitError, ContourError, DimensionError, QLSError
from .state_space import PRECONDITION_TOL, StateVec

ORTHO_TOL = 1e-12
ON_CONTOUR_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class OrthogonalMap:
    matrix: np.ndarray

    def __post_init__(self):
        U = np.array(self.matrix, dtype=float)
        if U.ndim != 2 or U.shape[0] != U.shape[1]:
            raise DimensionError(f"map must be square, got {U.shape}")
        dev = orthogonality_error(U)
        if dev > ORTHO_TOL:
            raise QLSError(f"matrix is not orthogonal (max |U^T U - I| = {dev:.3e})")
        U.setflags(write=False)
        object.__setattr__(self, "matrix", U)

    @classmethod
    def identity(cls, n: int) -> "OrthogonalMap":
        return cls(np.eye(n))

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.matrix))

    def is_identity(self, tol: float = ORTHO_TOL) -> bool:
        return bool(np.max(np.abs(self.matrix - np.eye(self.n))) <= tol)

    def apply(self, state) -> StateVec:
        v = self.matrix @ np.asarray(state, dtype=float)
        # products of exact rotations drift by a few ulps; rescale before validating
        return StateVec(v / np.sqrt(v @ v))

    def __matmul__(self, other: "OrthogonalMap") -> np.ndarray:
        return self.matrix @ other.matrix

    def __call__(self, state) -> StateVec:
        return self.apply(state)


def orthogonality_error(U) -> float:
    U = np.asarray(U, dtype=float)
    return float(np.max(np.abs(U.T @ U - np.eye(U.shape[0]))))


@dataclass(frozen=True)
class Trajectory:
    """Waypoints and the maps between them: ``maps[k] @ waypoints[k] = waypoints[k+1]``."""

    waypoints: list
    maps: list
    labels: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.maps) != max(len(self.waypoints) - 1, 0):
            raise QLSError("need exactly one map per hop")

    def hop_residuals(self) -> list[float]:
        return [
            float(np.max(np.abs(U.matrix @ np.asarray(p) - np.asarray(q))))
            for U, p, q in zip(self.maps, self.waypoints, self.waypoints[1:])
        ]

    def composed(self) -> np.ndarray:
        n = self.waypoints[0].n
        out = np.eye(n)
        for U in self.maps:
            out = U.matrix @ out
        return out

    def compact(self) -> "Trajectory":
        """Drop identity hops (for example contraction of the anchor onto itself)."""
        wps = [self.waypoints[0]]
        maps, labels = [], []
        for k, U in enumerate(self.maps):
            if U.is_identity():
                continue
            maps.append(U)
            wps.append(self.waypoints[k + 1])
            if self.labels:
                labels.append(self.labels[k])
        return Trajectory(wps, maps, labels)


def _vec(state) -> np.ndarray:
    a = np.asarray(state, dtype=float)
    dev = abs(float(a @ a) - 1.0)
    if dev > PRECONDITION_TOL:
        raise QLSError(f"state is not normalized (norm^2 deviates by {dev:.3e})")
    return a


def _state(x) -> StateVec:
    a = _vec(x)
    return StateVec(a / np.sqrt(a @ a))


def rotation_between(p, q) -> OrthogonalMap:
    """Minimal rotation taking ``p`` to ``q``, acting as the identity off span{p, q}.

    With ``u = p`` and ``v`` the unit component of ``q`` orthogonal to ``p``,
    ``U = I + s (v u^T - u v^T) + (c - 1)(u u^T + v v^T)`` where ``c = p.q``,
    ``s = |q - c p|``. For ``q = -p`` the rotation plane uses the first basis
    vector not parallel to ``p``.
    """
    u, q = _vec(p), _vec(q)
    if u.size != q.size:
        raise DimensionError(f"dimension mismatch: {u.size} vs {q.size}")
    n = u.size
    c = float(u @ q)
    w = q - c * u
    w = w - (u @ w) * u
    s = float(np.linalg.norm(w))
    if s < 1e-15:
        if c > 0:
            return OrthogonalMap(np.eye(n))
        # antipodal: any plane through p works; pick a deterministic one
        for k in range(n):
            if abs(abs(u[k]) - 1.0) > 1e-12:
                break
        e = np.zeros(n)
        e[k] = 1.0
        v = e - (u @ e) * u
        v = v - (u @ v) * u
        v /= np.linalg.norm(v)
        c, s = -1.0, 0.0
    else:
        v = w / s
    U = np.eye(n) + s * (np.outer(v, u) - np.outer(u, v)) + (c - 1.0) * (np.outer(u, u) + np.outer(v, v))
    return OrthogonalMap(U)


def on_contour(state, contour: ConicLevelSet, tol: float = ON_CONTOUR_TOL) -> bool:
    a = np.asarray(state, dtype=float)
    if a.size != 3:
        raise DimensionError("contour membership needs three-level states")
    return abs(float(contour.residual(a[0], a[1]))) < tol


def _require_on(state, contour, what):
    if not on_contour(state, contour):
        a = np.asarray(state, dtype=float)
        raise ContourError(f"{what} is off its contour (residual {contour.residual(a[0], a[1]):.3e})")


def contract_level_set(points, anchor, contour: ConicLevelSet) -> list[OrthogonalMap]:
    """One map per contour state, each sending that state to the anchor."""
    _require_on(anchor, contour, "anchor")
    for k, p in enumerate(points):
        _require_on(p, contour, f"point {k}")
    return [rotation_between(p, anchor) for p in points]


def transfer_anchor(p_o, q_o, source: ConicLevelSet, target: ConicLevelSet) -> OrthogonalMap:
    """Map the source anchor onto the target anchor."""
    _require_on(p_o, source, "source anchor")
    _require_on(q_o, target, "target anchor")
    return rotation_between(p_o, q_o)


def expand_to_level_set(q_o, targets, contour: ConicLevelSet) -> list[OrthogonalMap]:
    """One map per target, each sending the anchor to that target."""
    _require_on(q_o, contour, "anchor")
    for k, q in enumerate(targets):
        _require_on(q, contour, f"target {k}")
    return [rotation_between(q_o, q) for q in targets]


def three_step_protocol(source_points, p_o, q_o, target_assignment, source: ConicLevelSet,
                        target: ConicLevelSet) -> list[Trajectory]:
    """Contract to ``p_o``, transfer to ``q_o``, expand to each assigned target.

    Every trajectory has waypoints ``[p_k, p_o, q_o, q_k]``. Assigning the
    same target to many sources is allowed, so a whole contour can be
    collapsed onto one state.
    """
    if len(source_points) != len(target_assignment):
        raise QLSError(
            f"assignment length {len(target_assignment)} != number of source points {len(source_points)}"
        )
    contract = contract_level_set(source_points, p_o, source)
    hop = transfer_anchor(p_o, q_o, source, target)
    expand = expand_to_level_set(q_o, target_assignment, target)
    p_o, q_o = _state(p_o), _state(q_o)
    out = []
    for p, q, Uc, Ue in zip(source_points, target_assignment, contract, expand):
        out.append(
            Trajectory(
                [_state(p), p_o, q_o, _state(q)],
                [Uc, hop, Ue],
                ["contract", "transfer", "expand"],
            )
        )
    return out


def direct_map(p, c1: ConicLevelSet, c2: ConicLevelSet) -> tuple[StateVec, OrthogonalMap]:
    """One-step transition to the point of ``c2`` with the same eccentric anomaly.

    Both contours come from one spectrum, so the correspondence rescales the
    semi-axes and is a bijection between the two ellipses. The sign of ``a3``
    is carried over from ``p``.
    """
    _require_on(p, c1, "source point")
    a = _vec(p)
    if c1.same_as(c2):
        return _state(a), OrthogonalMap.identity(a.size)
    theta = eccentric_anomaly(c1, a[0], a[1])
    try:
        cp = contour_point_at(c2, theta)
    except ChartExitError as exc:
        raise ChartExitError(f"direct map leaves the chart at theta = {theta:.17g}: {exc}", theta=theta) from None
    sign = -1.0 if a[2] < 0 else 1.0
    cp = ContourPoint.from_plane(cp.a1, cp.a2, sign=sign)
    q = cp.to_state()
    return q, rotation_between(a, q)


@dataclass(frozen=True)
class Witness:
    """Two states whose overlap differs from 1; no single orthogonal map can
    send both to one anchor because it would have to preserve that overlap."""

    i: int
    j: int
    overlap: float


def no_universal_unitary_witness(points, anchor=None) -> Witness | None:
    """Find a pair of distinct states, or ``None`` when all coincide."""
    if len(points) < 2:
        raise QLSError("need at least two points")
    vecs = [_vec(p) for p in points]
    if anchor is not None:
        _vec(anchor)
    first = vecs[0]
    for j in range(1, len(vecs)):
        ov = float(first @ vecs[j])
        if abs(ov - 1.0) > 1e-9:
            return Witness(0, j, ov)
    return None
