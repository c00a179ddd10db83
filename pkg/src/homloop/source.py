"""Heralded PDC pair-source model and its four-fold HOM visibility.

Each pump pulse drives two identical down-conversion sources; the pair
number per source follows truncated thermal (two-mode-squeezed)
statistics with mean ``nbar``.  Idler detection heralds the signal
photons, which meet on a balanced splitter.  Higher pair numbers add
coincidences that survive even at perfect overlap, which is what pulls
the measured HOM visibility below the internal-overlap ceiling as nbar
grows.

The four-fold coincidence probability is computed by exact Fock-basis
expansion: signals are thinned by the per-photon efficiency (loss
commutes with the balanced splitter when both arms see the same
efficiency), the surviving photons are expanded over the four output
modes (two ports x two internal states), and threshold clicks on both
ports are scored.  The dip visibility is V = 1 - C(dip)/C(baseline),
the baseline being the fully distinguishable (I = 0) level at which the
normalized correlation sits at g = 1/2.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InfeasibleTargetError
from .interference import Indistinguishability

_TRUNCATION_WARN_TAIL = 1e-3


@dataclass(frozen=True)
class PdcSourceModel:
    """Parameters of one heralded-pair source (both sources identical)."""

    nbar: float = 0.0165
    floor_i0: float = 0.83
    herald_efficiency: float = 0.30
    n_max: int = 3

    def __post_init__(self):
        if self.nbar < 0.0:
            raise ValueError("nbar must be non-negative")
        if not 0.0 <= self.floor_i0 <= 1.0:
            raise ValueError("floor_i0 must lie in [0, 1]")
        if not 0.0 < self.herald_efficiency <= 1.0:
            raise ValueError("herald_efficiency must lie in (0, 1]")
        if self.n_max < 2:
            raise ValueError("n_max must be at least 2")


def pair_distribution(nbar: float, n_max: int) -> np.ndarray:
    """Truncated thermal distribution of pair numbers per pulse."""
    if nbar < 0.0:
        raise ValueError("nbar must be non-negative")
    lam = nbar / (1.0 + nbar)
    p = np.array([lam**n for n in range(n_max + 1)], dtype=float)
    p *= 1.0 - lam if lam < 1.0 else 1.0
    return p / p.sum()


def _apply_creation(state: dict, coeffs) -> dict:
    """Apply sum_i coeffs[i] * adag_i to a Fock-amplitude dict over four
    modes."""
    out: dict = {}
    for occ, amp in state.items():
        for i, c in enumerate(coeffs):
            if c == 0.0:
                continue
            new = list(occ)
            new[i] += 1
            key = tuple(new)
            out[key] = out.get(key, 0.0) + amp * c * math.sqrt(new[i])
    return out


@lru_cache(maxsize=4096)
def _coincidence_probability(k_a: int, k_b: int, overlap2: float) -> float:
    """P(both threshold detectors click) for k_a photons from source A
    and k_b from source B on a balanced splitter, with squared internal
    overlap ``overlap2`` between the two sources' photons.

    Modes: (+, int_parallel), (+, int_orthogonal), (-, int_parallel),
    (-, int_orthogonal).
    """
    if k_a == 0 or k_b == 0:
        if k_a == k_b == 0:
            return 0.0
        # Photons from one source only: identical bosons bunch pairwise,
        # but odd leftovers can still split between the ports.
        state = {(0, 0, 0, 0): 1.0}
        inv = 1.0 / math.sqrt(2.0)
        coeffs = (inv, 0.0, inv, 0.0) if k_b == 0 else (inv, 0.0, -inv, 0.0)
        for _ in range(max(k_a, k_b)):
            state = _apply_creation(state, coeffs)
        norm = math.factorial(max(k_a, k_b))
    else:
        s = math.sqrt(overlap2)
        c = math.sqrt(max(0.0, 1.0 - overlap2))
        inv = 1.0 / math.sqrt(2.0)
        a_coeffs = (inv, 0.0, inv, 0.0)
        b_coeffs = (s * inv, c * inv, -s * inv, -c * inv)
        state = {(0, 0, 0, 0): 1.0}
        for _ in range(k_a):
            state = _apply_creation(state, a_coeffs)
        for _ in range(k_b):
            state = _apply_creation(state, b_coeffs)
        norm = math.factorial(k_a) * math.factorial(k_b)
    prob = 0.0
    for (n1, n2, n3, n4), amp in state.items():
        if n1 + n2 >= 1 and n3 + n4 >= 1:
            prob += abs(amp) ** 2
    return prob / norm


def _binomial_pmf(n: int, eta: float) -> np.ndarray:
    return np.array(
        [math.comb(n, k) * eta**k * (1.0 - eta) ** (n - k) for k in range(n + 1)]
    )


def fourfold_coincidence(model: PdcSourceModel, overlap2: float) -> float:
    """Four-fold coincidence probability per trigger at a given squared
    internal overlap of the interfering photons."""
    p = pair_distribution(model.nbar, model.n_max)
    eta = model.herald_efficiency
    herald = np.array([1.0 - (1.0 - eta) ** n for n in range(model.n_max + 1)])
    total = 0.0
    for n_a in range(1, model.n_max + 1):
        thin_a = _binomial_pmf(n_a, eta)
        for n_b in range(1, model.n_max + 1):
            thin_b = _binomial_pmf(n_b, eta)
            weight = p[n_a] * p[n_b] * herald[n_a] * herald[n_b]
            if weight == 0.0:
                continue
            acc = 0.0
            for k_a in range(n_a + 1):
                for k_b in range(n_b + 1):
                    if k_a == 0 and k_b == 0:
                        continue
                    acc += (
                        thin_a[k_a]
                        * thin_b[k_b]
                        * _coincidence_probability(k_a, k_b, overlap2)
                    )
            total += weight * acc
    return float(total)


def fourfold_visibility(model: PdcSourceModel) -> float:
    """HOM dip visibility of the bare source at its mean photon number.

    Deterministic; the dip uses the internal-overlap ceiling
    ``floor_i0`` and the baseline fully distinguishable photons.
    """
    if model.nbar == 0.0:
        # Exact single-pair limit: no events occur, but the visibility
        # limit as nbar -> 0 is the internal-overlap ceiling itself.
        return float(model.floor_i0)
    lam = model.nbar / (1.0 + model.nbar)
    if lam ** (model.n_max + 1) > _TRUNCATION_WARN_TAIL:
        warnings.warn(
            f"pair-number truncation at n_max={model.n_max} leaves a "
            f"probability tail above {_TRUNCATION_WARN_TAIL:g}; increase "
            "n_max for this nbar",
            stacklevel=2,
        )
    baseline = fourfold_coincidence(model, 0.0)
    dip = fourfold_coincidence(model, model.floor_i0)
    return float(1.0 - dip / baseline)


def calibrate_floor(target_v: float, nbar: float,
                    herald_efficiency: float = 0.30, n_max: int = 3,
                    tol: float = 1e-6) -> Indistinguishability:
    """Invert the visibility model: find floor_i0 reproducing a measured
    source visibility at the given mean photon number."""
    if not 0.0 <= target_v <= 1.0:
        raise InfeasibleTargetError("target visibility must lie in [0, 1]")

    def vis(floor: float) -> float:
        return fourfold_visibility(
            PdcSourceModel(nbar, floor, herald_efficiency, n_max)
        )

    if target_v == 0.0:
        return Indistinguishability(0.0)
    top = vis(1.0)
    if target_v > top + tol:
        raise InfeasibleTargetError(
            f"target visibility {target_v} exceeds the multiphoton-limited "
            f"maximum {top:.6f} at nbar={nbar}"
        )
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if vis(mid) < target_v:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol * 1e-2:
            break
    floor = 0.5 * (lo + hi)
    return Indistinguishability(min(max(floor, 0.0), 1.0))


def visibility_curve(nbars, floor_i0: float = 0.83,
                     herald_efficiency: float = 0.30, n_max: int = 3):
    """Visibility as a function of mean photon number, as (nbar, V) rows."""
    rows = []
    for nbar in nbars:
        model = PdcSourceModel(float(nbar), floor_i0, herald_efficiency, n_max)
        rows.append((float(nbar), fourfold_visibility(model)))
    return rows
