"""Energy level sets of the 2D harmonic oscillator on the occupation lattice.

``E = (n_x + 1/2) w_x + (n_y + 1/2) w_y``. Frequencies and energies are kept
as :class:`fractions.Fraction` so that degeneracies are found by exact
equality; an irrational frequency ratio can only be approximated by a
rational one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .errors import QLSError, UnreachableTargetError

HALF = Fraction(1, 2)


def as_rational(x) -> Fraction:
    """Coerce ints, Fractions and strings like ``"3/2"`` to a Fraction.

    Floats are accepted but converted from their exact binary value, so
    ``0.1`` does not become ``1/10``.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(x, (int, str)):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x)
    raise TypeError(f"cannot interpret {x!r} as a rational")


class LatticePoint(NamedTuple):
    n_x: int
    n_y: int

    def check(self) -> "LatticePoint":
        if self.n_x < 0 or self.n_y < 0:
            raise QLSError(f"occupation numbers must be non-negative, got {tuple(self)}")
        return self


@dataclass(frozen=True)
class PulseStep:
    """Resonant pulse changing one axis by ``delta`` quanta.

    ``frequency`` is the magnitude ``|delta| * w_axis``; ``energy_change``
    carries the sign.
    """

    axis: str
    delta: int
    frequency: Fraction

    def __post_init__(self):
        if self.axis not in ("x", "y"):
            raise QLSError(f"axis must be 'x' or 'y', got {self.axis!r}")
        if self.delta == 0:
            raise QLSError("a pulse must change the occupation")

    @classmethod
    def resonant(cls, axis: str, delta: int, omega_x, omega_y) -> "PulseStep":
        w = as_rational(omega_x if axis == "x" else omega_y)
        return cls(axis, int(delta), abs(delta) * w)

    @property
    def multiple(self) -> int:
        return abs(self.delta)

    @property
    def energy_change(self) -> Fraction:
        return self.frequency if self.delta > 0 else -self.frequency

    def label(self) -> str:
        return f"{self.multiple}w_{self.axis}"


@dataclass(frozen=True)
class PulsePlan:
    steps: tuple = ()

    def __len__(self):
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    def path(self, start: LatticePoint) -> list[LatticePoint]:
        pts = [LatticePoint(*start)]
        for step in self.steps:
            pts.append(apply_pulse(pts[-1], step))
        return pts

    def total_quanta(self) -> int:
        return sum(s.multiple for s in self.steps)

    def energy_change(self) -> Fraction:
        return sum((s.energy_change for s in self.steps), Fraction(0))


def frequencies_from_K(K) -> tuple[float, float]:
    """Normal-mode frequencies ``sqrt(k)`` of a unit-mass 2x2 stiffness matrix, descending."""
    K = np.asarray(K, dtype=float)
    if K.shape != (2, 2):
        raise QLSError("K must be 2x2")
    if K[0, 1] != K[1, 0]:
        raise QLSError("K must be symmetric")
    a, b, d = K[0, 0], K[0, 1], K[1, 1]
    mean = 0.5 * (a + d)
    rad = math.hypot(0.5 * (a - d), b)
    k1, k2 = mean + rad, mean - rad
    if not k2 > 0:
        raise QLSError(f"K is not positive definite (eigenvalues {k1:.6g}, {k2:.6g})")
    return math.sqrt(k1), math.sqrt(k2)


def energy_of(p, omega_x, omega_y, include_zero_point: bool = False) -> Fraction:
    n_x, n_y = LatticePoint(*p).check()
    wx, wy = as_rational(omega_x), as_rational(omega_y)
    if include_zero_point:
        return (n_x + HALF) * wx + (n_y + HALF) * wy
    return n_x * wx + n_y * wy


def level_set_points(E, omega_x, omega_y, n_max: int, include_zero_point: bool = False) -> list[LatticePoint]:
    """Every ``(n_x, n_y)`` in ``[0, n_max]^2`` with energy exactly ``E``, sorted by ``n_x``."""
    if n_max < 0:
        raise QLSError("n_max must be non-negative")
    E, wx, wy = as_rational(E), as_rational(omega_x), as_rational(omega_y)
    if wx <= 0 or wy <= 0:
        raise QLSError("frequencies must be positive")
    rest = E - ((wx + wy) / 2 if include_zero_point else 0)
    out = []
    for n_x in range(n_max + 1):
        r = rest - n_x * wx
        if r < 0:
            break
        n_y = r / wy
        if n_y.denominator == 1 and n_y <= n_max:
            out.append(LatticePoint(n_x, int(n_y)))
    return out


def degeneracy(E, omega_x, omega_y, n_max: int, include_zero_point: bool = False) -> int:
    return len(level_set_points(E, omega_x, omega_y, n_max, include_zero_point))


def apply_pulse(p, step: PulseStep) -> LatticePoint:
    n_x, n_y = LatticePoint(*p).check()
    if step.axis == "x":
        n_x += step.delta
    else:
        n_y += step.delta
    if n_x < 0 or n_y < 0:
        raise QLSError(f"pulse {step.axis}{step.delta:+d} from {tuple(p)} leaves a negative occupation")
    return LatticePoint(n_x, n_y)


def _search_bound(E, wx, wy, start, include_zero_point):
    floor_e = E - ((wx + wy) / 2 if include_zero_point else 0)
    reach = max(0, math.floor(floor_e / min(wx, wy)))
    return max(reach, start.n_x, start.n_y)


def plan_transition(start, target_E, omega_x, omega_y, include_zero_point: bool = False,
                    n_max: int | None = None) -> list[PulsePlan]:
    """Pulse plans from ``start`` to some point of the ``target_E`` level set.

    The target point is the one needing the fewest total quanta (ties go to
    the smallest ``n_x``). If it differs from ``start`` on both axes, two
    plans come back, y-pulse first then x-pulse first. If one axis already
    matches, the single-axis plan is returned. Single-axis plans to other
    target points follow. A start already on the level set yields one empty
    plan.
    """
    start = LatticePoint(*start).check()
    E, wx, wy = as_rational(target_E), as_rational(omega_x), as_rational(omega_y)
    if n_max is None:
        n_max = _search_bound(E, wx, wy, start, include_zero_point)
    targets = level_set_points(E, wx, wy, n_max, include_zero_point)
    if not targets:
        trace = [
            f"E = {E} with w = ({wx}, {wy}), zero point {'included' if include_zero_point else 'omitted'}",
            f"no lattice point with 0 <= n_x, n_y <= {n_max} has this energy",
        ]
        raise UnreachableTargetError(f"target level E = {E} is empty within the search box", trace)
    if start in targets:
        return [PulsePlan(())]

    def cost(t):
        return abs(t.n_x - start.n_x) + abs(t.n_y - start.n_y)

    best = min(targets, key=lambda t: (cost(t), t.n_x))
    dx, dy = best.n_x - start.n_x, best.n_y - start.n_y

    plans = []
    if dx != 0 and dy != 0:
        for order in (("y", "x"), ("x", "y")):
            steps = tuple(
                PulseStep.resonant(ax, dy if ax == "y" else dx, wx, wy) for ax in order
            )
            plans.append(PulsePlan(steps))
    else:
        ax, d = ("x", dx) if dx != 0 else ("y", dy)
        plans.append(PulsePlan((PulseStep.resonant(ax, d, wx, wy),)))

    for t in targets:
        if t == best:
            continue
        if t.n_x == start.n_x:
            plans.append(PulsePlan((PulseStep.resonant("y", t.n_y - start.n_y, wx, wy),)))
        elif t.n_y == start.n_y:
            plans.append(PulsePlan((PulseStep.resonant("x", t.n_x - start.n_x, wx, wy),)))

    feasible = []
    for plan in plans:
        try:
            plan.path(start)
        except QLSError:
            continue
        feasible.append(plan)
    if not feasible:
        raise UnreachableTargetError(
            "every candidate plan drives an occupation negative",
            [f"start {tuple(start)}", f"candidates {len(plans)}"],
        )
    return feasible
