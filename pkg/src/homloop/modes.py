"""Core value types for time-bin photon modes.

A single photon delocalized over a window of ``W`` time bins is described
by a complex amplitude vector (one entry per bin).  Subsets of bins select
which coincidences enter the local/global correlation sums.  All types are
immutable and safe to share between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import BinOutOfWindowError, DegenerateInputError, DimensionMismatchError

# Tolerances: pure algebra is checked at 1e-12; anything downstream of a
# loop evolution accumulates rounding and is compared at 1e-9.
ALGEBRA_TOL = 1e-12
EVOLUTION_TOL = 1e-9

DEFAULT_WINDOW = 8


class Polarization(Enum):
    """Polarization basis used inside the fiber loop."""

    H = "H"
    V = "V"

    @classmethod
    def parse(cls, value) -> "Polarization":
        if isinstance(value, Polarization):
            return value
        return cls(str(value).upper())


def _as_complex_array(amplitudes) -> np.ndarray:
    arr = np.asarray(amplitudes, dtype=np.complex128).reshape(-1)
    if arr.size < 1:
        raise DegenerateInputError("mode vector needs at least one time bin")
    if not np.all(np.isfinite(arr.view(np.float64))):
        raise DegenerateInputError("mode amplitudes must be finite")
    return arr


@dataclass(frozen=True)
class ModeVector:
    """Complex amplitudes of one photon over a window of time bins.

    The squared norm is at most 1: exactly 1 for a normalized photon,
    below 1 when loss or incomplete out-coupling removed amplitude.
    """

    amplitudes: np.ndarray
    label: str = ""

    def __post_init__(self):
        arr = _as_complex_array(self.amplitudes)
        norm2 = float(np.sum(np.abs(arr) ** 2))
        if norm2 > 1.0 + ALGEBRA_TOL:
            raise DegenerateInputError(
                f"squared norm {norm2!r} exceeds 1 (single-photon amplitudes)"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "amplitudes", arr)

    @property
    def window(self) -> int:
        return self.amplitudes.size

    def norm2(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def padded(self, window: int) -> "ModeVector":
        """Zero-pad to a wider window."""
        if window < self.window:
            raise DimensionMismatchError("cannot shrink a mode vector by padding")
        arr = np.zeros(window, dtype=np.complex128)
        arr[: self.window] = self.amplitudes
        return ModeVector(arr, self.label)

    def canonical(self) -> "ModeVector":
        """Rotate the global phase so the first nonzero amplitude is
        real-positive.  Display convention only; all computed quantities
        are phase invariant."""
        idx = np.flatnonzero(np.abs(self.amplitudes) > ALGEBRA_TOL)
        if idx.size == 0:
            return self
        phase = self.amplitudes[idx[0]] / abs(self.amplitudes[idx[0]])
        return ModeVector(self.amplitudes / phase, self.label)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ModeVector):
            return NotImplemented
        return self.window == other.window and bool(
            np.array_equal(self.amplitudes, other.amplitudes)
        )

    def __hash__(self):
        return hash((self.amplitudes.tobytes(), self.window))


@dataclass(frozen=True)
class ModeSubset:
    """Non-empty set of time-bin indices selecting modes for correlation
    sums."""

    bins: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        bins = frozenset(int(b) for b in self.bins)
        if not bins:
            raise DegenerateInputError("mode subset must be non-empty")
        if any(b < 0 for b in bins):
            raise BinOutOfWindowError("time-bin indices are non-negative")
        object.__setattr__(self, "bins", bins)

    @classmethod
    def of(cls, *bins: int) -> "ModeSubset":
        return cls(frozenset(bins))

    @classmethod
    def full(cls, window: int) -> "ModeSubset":
        return cls(frozenset(range(window)))

    def check_window(self, window: int) -> None:
        bad = [b for b in self.bins if b >= window]
        if bad:
            raise BinOutOfWindowError(
                f"bins {sorted(bad)} outside window of size {window}"
            )

    def indicator(self, window: int) -> np.ndarray:
        self.check_window(window)
        mask = np.zeros(window, dtype=bool)
        mask[sorted(self.bins)] = True
        return mask

    def __iter__(self):
        return iter(sorted(self.bins))

    def __len__(self):
        return len(self.bins)


def mode_vector(amplitudes: Sequence, label: str = "") -> ModeVector:
    """Convenience constructor accepting any sequence of complex numbers."""
    return ModeVector(_as_complex_array(amplitudes), label)


def inner_product(a: ModeVector, b: ModeVector) -> complex:
    """Hermitian inner product ``sum_tau conj(a_tau) * b_tau``."""
    if a.window != b.window:
        raise DimensionMismatchError(
            f"window mismatch: {a.window} vs {b.window}"
        )
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def restrict(v: ModeVector, s: ModeSubset) -> ModeVector:
    """Zero out all amplitudes outside the subset."""
    mask = s.indicator(v.window)
    return ModeVector(np.where(mask, v.amplitudes, 0.0), v.label)


def normalize(v) -> ModeVector:
    """Scale to unit norm, preserving direction.

    Accepts a :class:`ModeVector` or any amplitude sequence (which may
    exceed unit norm before scaling).
    """
    if isinstance(v, ModeVector):
        arr, label = v.amplitudes, v.label
    else:
        arr, label = _as_complex_array(v), ""
    norm = float(np.sqrt(np.sum(np.abs(arr) ** 2)))
    if norm <= ALGEBRA_TOL:
        raise DegenerateInputError("cannot normalize a near-zero vector")
    return ModeVector(arr / norm, label)


def equal_up_to_global_phase(a: ModeVector, b: ModeVector,
                             tol: float = EVOLUTION_TOL) -> bool:
    """True iff |<a,b>| = ||a||*||b|| within ``tol`` (vectors parallel up
    to a global phase)."""
    ip = abs(inner_product(a, b))
    return abs(ip - np.sqrt(a.norm2() * b.norm2())) <= tol
