"""Real-coefficient states over an energy eigenbasis and their expectation values.

A state is the unit vector ``a`` of expansion coefficients, ``|psi> = sum_i a_i |E_i>``.
Only real amplitudes are supported, so the state manifold is the unit sphere
and every control step is an orthogonal matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NormalizationError, QLSError

#: Tolerance on the norm of a freshly constructed state.
CONSTRUCTION_TOL = 1e-12
#: Looser tolerance on inputs to operations, allowing drift over composed maps.
PRECONDITION_TOL = 1e-9


def _frozen(values, ndim):
    arr = np.array(values, dtype=float)
    if arr.ndim != ndim:
        raise DimensionError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Eigenvalues ``E_1..E_n`` of the controlled observable.

    The last entry is the reference minimum (the role ``E_3`` plays for the
    three-level contours), so it must not exceed any other entry.
    """

    values: np.ndarray

    def __post_init__(self):
        vals = _frozen(self.values, 1)
        if vals.size < 2:
            raise DimensionError("a spectrum needs at least two eigenvalues")
        if not np.all(np.isfinite(vals)):
            raise QLSError("spectrum values must be finite")
        if np.any(vals[-1] > vals):
            raise QLSError("the last eigenvalue must be the minimum of the spectrum")
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def reference(self) -> float:
        return float(self.values[-1])

    def __len__(self):
        return self.n

    def __eq__(self, other):
        return isinstance(other, Spectrum) and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash(self.values.tobytes())


@dataclass(frozen=True, eq=False)
class StateVec:
    """Unit-norm real coefficient vector; a point ``|p>`` on the state sphere."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = _frozen(self.coeffs, 1)
        if c.size < 2:
            raise DimensionError("a state needs at least two coefficients")
        dev = abs(float(c @ c) - 1.0)
        if dev > CONSTRUCTION_TOL:
            raise NormalizationError(f"state norm deviates from 1 by {dev:.3e}")
        object.__setattr__(self, "coeffs", c)

    @property
    def n(self) -> int:
        return self.coeffs.size

    def __len__(self):
        return self.n

    def __iter__(self):
        return iter(self.coeffs.tolist())

    def __getitem__(self, k):
        return float(self.coeffs[k])

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coeffs, dtype=dtype)

    def __eq__(self, other):
        return isinstance(other, StateVec) and np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self):
        return hash(self.coeffs.tobytes())

    def inner(self, other: "StateVec") -> float:
        _check_dim(self.n, other.n)
        return float(self.coeffs @ other.coeffs)

    def isclose(self, other: "StateVec", atol: float = 1e-12) -> bool:
        return self.n == other.n and bool(np.max(np.abs(self.coeffs - other.coeffs)) <= atol)


@dataclass(frozen=True, eq=False)
class ObservableMatrix:
    """Real symmetric matrix of an observable written in the energy basis."""

    entries: np.ndarray

    def __post_init__(self):
        m = _frozen(self.entries, 2)
        if m.shape[0] != m.shape[1] or m.shape[0] < 2:
            raise DimensionError(f"observable must be square n x n (n >= 2), got {m.shape}")
        if not np.array_equal(m, m.T):
            raise QLSError("observable matrix must be symmetric")
        object.__setattr__(self, "entries", m)

    @classmethod
    def diagonal(cls, spectrum) -> "ObservableMatrix":
        vals = spectrum.values if isinstance(spectrum, Spectrum) else spectrum
        return cls(np.diag(np.asarray(vals, dtype=float)))

    @property
    def n(self) -> int:
        return self.entries.shape[0]


def _check_dim(n1, n2):
    if n1 != n2:
        raise DimensionError(f"dimension mismatch: {n1} vs {n2}")


def _coeffs_checked(state) -> np.ndarray:
    a = np.asarray(state.coeffs if isinstance(state, StateVec) else state, dtype=float)
    dev = abs(float(a @ a) - 1.0)
    if dev > PRECONDITION_TOL:
        raise NormalizationError(f"state is not normalized (norm^2 deviates by {dev:.3e})")
    return a


def normalize(raw) -> StateVec:
    """Scale ``raw`` to unit Euclidean norm."""
    v = np.asarray(raw, dtype=float)
    if v.ndim != 1 or v.size < 2:
        raise DimensionError("need a flat vector with at least two entries")
    norm = float(np.linalg.norm(v))
    if not norm > 1e-300:
        raise NormalizationError("cannot normalize the zero vector")
    out = v / norm
    # one extra rescale pulls the norm into the construction tolerance for
    # badly scaled inputs
    out = out / np.sqrt(out @ out)
    return StateVec(out)


def expectation_energy(state, spectrum: Spectrum) -> float:
    """Energy expectation ``sum_i a_i^2 E_i``."""
    a = _coeffs_checked(state)
    _check_dim(a.size, spectrum.n)
    return float(np.dot(a * a, spectrum.values))


def expectation_observable(state, obs: ObservableMatrix) -> float:
    """Quadratic-form expectation ``a^T Theta a``.

    For a diagonal ``Theta`` holding the spectrum this is the same sum as
    :func:`expectation_energy`, term by term.
    """
    a = _coeffs_checked(state)
    _check_dim(a.size, obs.n)
    m = obs.entries
    if np.count_nonzero(m - np.diag(np.diag(m))) == 0:
        return float(np.dot(a * a, np.diag(m)))
    return float(a @ m @ a)


def basis_state(k: int, n: int) -> StateVec:
    e = np.zeros(n)
    e[k] = 1.0
    return StateVec(e)
