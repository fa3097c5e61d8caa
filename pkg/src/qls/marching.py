"""Marching squares on a uniform grid, with segments chained into polylines.

Values are indexed ``values[i, j]`` with ``i`` along x and ``j`` along y.
Cells touching a NaN vertex are skipped, which lets callers mask out part of
the domain. Traversal order is fixed, so output is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class Polyline:
    points: np.ndarray  # (k, 2)
    closed: bool

    def __len__(self):
        return len(self.points)

    def segments(self):
        p = self.points
        if self.closed:
            return p, np.roll(p, -1, axis=0)
        return p[:-1], p[1:]

    def length(self) -> float:
        a, b = self.segments()
        return float(np.sum(np.linalg.norm(b - a, axis=1)))


def _edge_point(key, values, xs, ys, level):
    kind, i, j = key
    if kind == "h":
        va, vb = values[i, j], values[i + 1, j]
        t = (level - va) / (vb - va)
        return xs[i] + t * (xs[i + 1] - xs[i]), ys[j]
    va, vb = values[i, j], values[i, j + 1]
    t = (level - va) / (vb - va)
    return xs[i], ys[j] + t * (ys[j + 1] - ys[j])


def _cell_segments(values, i, j, level):
    c = (values[i, j], values[i + 1, j], values[i + 1, j + 1], values[i, j + 1])
    up = [v >= level for v in c]
    edges = (("h", i, j), ("v", i + 1, j), ("h", i, j + 1), ("v", i, j))
    crossed = [k for k in range(4) if up[k] != up[(k + 1) % 4]]
    if len(crossed) == 2:
        return [(edges[crossed[0]], edges[crossed[1]])]
    if len(crossed) == 4:
        centre_up = (sum(c) / 4.0) >= level
        if centre_up == up[0]:
            # corners 0 and 2 joined through the centre; cut off corners 1 and 3
            return [(edges[0], edges[1]), (edges[2], edges[3])]
        return [(edges[3], edges[0]), (edges[1], edges[2])]
    return []


def marching_squares(values, xs, ys, level: float = 0.0) -> list[Polyline]:
    """Extract the ``level`` iso-lines of ``values`` sampled at ``xs`` x ``ys``."""
    values = np.asarray(values, dtype=float)
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if values.shape != (xs.size, ys.size):
        raise ValueError("values must have shape (len(xs), len(ys))")
    if values.shape[0] < 2 or values.shape[1] < 2:
        return []

    up = values >= level
    finite = np.isfinite(values)
    c0, c1, c2, c3 = up[:-1, :-1], up[1:, :-1], up[1:, 1:], up[:-1, 1:]
    mixed = ~((c0 == c1) & (c1 == c2) & (c2 == c3))
    ok = finite[:-1, :-1] & finite[1:, :-1] & finite[1:, 1:] & finite[:-1, 1:]
    cells = np.argwhere(mixed & ok)  # row-major order: fixed traversal

    adj: dict = {}
    for i, j in cells:
        for a, b in _cell_segments(values, int(i), int(j), level):
            adj.setdefault(a, []).append(b)
            adj.setdefault(b, []).append(a)

    polylines = []
    seen = set()

    def walk(start):
        chain = [start]
        seen.add(start)
        prev, cur = None, start
        while True:
            nxt = [n for n in adj[cur] if n != prev and n not in seen]
            if not nxt:
                closed = len(chain) > 2 and start in adj[cur] and prev is not None
                return chain, closed
            prev, cur = cur, nxt[0]
            chain.append(cur)
            seen.add(cur)

    ends = sorted(k for k, v in adj.items() if len(v) == 1)
    for key in ends:
        if key not in seen:
            chain, _ = walk(key)
            polylines.append((chain, False))
    for key in sorted(adj):
        if key not in seen:
            chain, closed = walk(key)
            polylines.append((chain, closed))

    out = []
    for chain, closed in polylines:
        pts = np.array([_edge_point(k, values, xs, ys, level) for k in chain])
        keep = np.ones(len(pts), dtype=bool)
        keep[1:] = np.any(pts[1:] != pts[:-1], axis=1)
        pts = pts[keep]
        if closed and len(pts) > 1 and np.array_equal(pts[0], pts[-1]):
            pts = pts[:-1]
        if len(pts) >= 2:
            out.append(Polyline(pts, closed and len(pts) > 2))
    return out


def point_segment_distance(q, a, b):
    """Distance from points ``q`` (..., 2) to segments ``a``-``b`` (..., 2), broadcast."""
    ab = b - a
    denom = np.sum(ab * ab, axis=-1)
    t = np.where(denom > 0, np.sum((q - a) * ab, axis=-1) / np.where(denom > 0, denom, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    foot = a + t[..., None] * ab
    return np.linalg.norm(q - foot, axis=-1)


def polyline_distance(query, vertices, closed=True, k=8):
    """Unsigned distance from each query point to a polyline.

    Candidate segments come from the ``k`` vertices nearest to each query
    (KD-tree), so cost stays near-linear in the number of queries.
    """
    from scipy.spatial import cKDTree

    q = np.atleast_2d(np.asarray(query, dtype=float))
    v = np.asarray(vertices, dtype=float)
    n = len(v)
    if n == 1:
        return np.linalg.norm(q - v[0], axis=1)
    k = min(k, n)
    _, idx = cKDTree(v).query(q, k=k)
    idx = idx.reshape(len(q), k)
    best = np.full(len(q), np.inf)
    for off in (-1, 0):
        ia = idx + off
        ib = ia + 1
        if closed:
            ia, ib = ia % n, ib % n
            valid = np.ones_like(ia, dtype=bool)
        else:
            valid = (ia >= 0) & (ib < n)
            ia, ib = np.clip(ia, 0, n - 1), np.clip(ib, 0, n - 1)
        d = point_segment_distance(q[:, None, :], v[ia], v[ib])
        d = np.where(valid, d, np.inf)
        best = np.minimum(best, d.min(axis=1))
    return best
