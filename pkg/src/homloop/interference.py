"""Two-photon correlation quantities behind a balanced beam splitter.

Two heralded photons with time-bin envelopes ``alpha`` and ``beta`` meet
on a 50:50 splitter whose outputs ``(a_tau +/- b_tau)/sqrt(2)`` feed the
(+) and (-) detectors.  Per-bin singles rates and the bin-pair
cross-correlation follow from straightforward mode algebra:

    G1[+/-, tau]     = (|alpha_tau|^2 + |beta_tau|^2) / 2
    G11[tau, tau']   = ( |alpha_tau|^2 |beta_tau'|^2
                       + |alpha_tau'|^2 |beta_tau|^2
                       - 2 I Re(alpha_tau beta_tau' conj(alpha_tau' beta_tau))
                       ) / 4

``I`` is the squared overlap of the photons' internal (spectral/temporal)
states.  At ``I = 1`` the matrix reduces to the fully indistinguishable
form |alpha_tau beta_tau' - alpha_tau' beta_tau|^2 / 4, whose diagonal
vanishes (complete local HOM suppression) and whose full double sum has
the closed form [(a.a)(b.b) - |a.b|^2] / 2.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import DimensionMismatchError, UndefinedCorrelationError
from .modes import ModeSubset, ModeVector, inner_product, restrict


@dataclass(frozen=True)
class Indistinguishability:
    """Squared magnitude of the photons' internal-state overlap."""

    value: float

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"indistinguishability {self.value!r} not in [0, 1]")

    def __float__(self):
        return self.value


@dataclass(frozen=True)
class CorrelationMatrix:
    """Bin-pair coincidence matrix and per-bin singles rates."""

    g11: np.ndarray
    g1_plus: np.ndarray
    g1_minus: np.ndarray

    def __post_init__(self):
        g11 = np.asarray(self.g11, dtype=float)
        g11.setflags(write=False)
        object.__setattr__(self, "g11", g11)
        for name in ("g1_plus", "g1_minus"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def window(self) -> int:
        return self.g11.shape[0]

    def to_csv(self) -> str:
        """Rows indexed by tau, columns by tau'."""
        header = "tau," + ",".join(f"tau{j}" for j in range(self.window))
        lines = [header]
        for i in range(self.window):
            lines.append(
                f"{i}," + ",".join(repr(float(v)) for v in self.g11[i])
            )
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(
            {
                "g11": self.g11.tolist(),
                "g1_plus": self.g1_plus.tolist(),
                "g1_minus": self.g1_minus.tolist(),
            },
            sort_keys=True,
        )


def _check_windows(alpha: ModeVector, beta: ModeVector) -> None:
    if alpha.window != beta.window:
        raise DimensionMismatchError(
            f"window mismatch: {alpha.window} vs {beta.window}"
        )


def g1_counts(alpha: ModeVector, beta: ModeVector):
    """Per-bin singles rates of the two detectors (always equal)."""
    _check_windows(alpha, beta)
    g1 = (alpha.probabilities() + beta.probabilities()) / 2.0
    return g1, g1.copy()


def g11_matrix(alpha: ModeVector, beta: ModeVector,
               indist: Indistinguishability | float = 1.0) -> CorrelationMatrix:
    """Coincidence matrix for partially indistinguishable photons."""
    _check_windows(alpha, beta)
    i_val = float(indist)
    if not 0.0 <= i_val <= 1.0:
        raise ValueError("indistinguishability must lie in [0, 1]")
    a, b = alpha.amplitudes, beta.amplitudes
    pa, pb = np.abs(a) ** 2, np.abs(b) ** 2
    classical = np.outer(pa, pb)
    cross = np.outer(a * b.conjugate(), (a * b.conjugate()).conjugate())
    g11 = (classical + classical.T - 2.0 * i_val * cross.real) / 4.0
    g11 = np.maximum(g11, 0.0)  # clip -0.0/rounding dust on suppressed entries
    g1p, g1m = g1_counts(alpha, beta)
    return CorrelationMatrix(g11=g11, g1_plus=g1p, g1_minus=g1m)


def local_correlation(m: CorrelationMatrix, s: ModeSubset) -> float:
    """Sum of same-bin coincidences over the subset."""
    mask = s.indicator(m.window)
    return float(np.sum(np.diag(m.g11)[mask]))


def global_correlation(m: CorrelationMatrix, s: ModeSubset) -> float:
    """Full double sum of coincidences over all bin pairs in the subset."""
    mask = s.indicator(m.window)
    return float(np.sum(m.g11[np.ix_(mask, mask)]))


def global_correlation_closed_form(alpha: ModeVector, beta: ModeVector,
                                   indist: Indistinguishability | float = 1.0,
                                   s: ModeSubset | None = None) -> float:
    """The closed form [(a.a)(b.b) - I |a.b|^2] / 2 on the restricted
    vectors; equals the elementwise double sum."""
    if s is not None:
        alpha, beta = restrict(alpha, s), restrict(beta, s)
    overlap = inner_product(alpha, beta)
    return (alpha.norm2() * beta.norm2() - float(indist) * abs(overlap) ** 2) / 2.0


def normalized_g(corr: float, alpha: ModeVector, beta: ModeVector,
                 s: ModeSubset, mode: Literal["local", "global"]) -> float:
    """Normalize a correlation sum by the singles rates over the subset.

    Global mode divides by the product of the two detectors' total rates
    in the subset.  Local mode divides by the per-bin product sum, which
    is the denominator accumulated by same-bin coincidence counting; with
    it, identically shaped fully distinguishable photons give g = 1/2
    (zero visibility) and fully indistinguishable ones g = 0.
    """
    g1p, g1m = g1_counts(alpha, beta)
    mask = s.indicator(alpha.window)
    if mode == "global":
        denom = float(np.sum(g1p[mask]) * np.sum(g1m[mask]))
    elif mode == "local":
        denom = float(np.sum(g1p[mask] * g1m[mask]))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if denom <= 0.0:
        raise UndefinedCorrelationError(
            "both photons are absent from the selected subset"
        )
    return corr / denom


def visibility(g: float) -> float:
    """Dip visibility V = 1 - 2 g; values above 1/2 certify nonclassical
    two-photon interference.  Raw value, not clamped."""
    return 1.0 - 2.0 * g


def clamp_visibility(v: float) -> float:
    """Convenience clamp of a fitted visibility into the physical range."""
    return min(max(v, 0.0), 1.0)


def local_visibility(alpha: ModeVector, beta: ModeVector,
                     indist: Indistinguishability | float,
                     s: ModeSubset | None = None) -> float:
    """Visibility of same-bin coincidence suppression over a subset."""
    s = s if s is not None else ModeSubset.full(alpha.window)
    m = g11_matrix(alpha, beta, indist)
    return visibility(normalized_g(local_correlation(m, s), alpha, beta, s, "local"))


def global_visibility(alpha: ModeVector, beta: ModeVector,
                      indist: Indistinguishability | float,
                      s: ModeSubset | None = None) -> float:
    """Visibility of the bucket (all bin pairs) coincidence suppression.

    For unit-norm vectors over the full window this equals
    I * |<alpha, beta>|^2.
    """
    s = s if s is not None else ModeSubset.full(alpha.window)
    m = g11_matrix(alpha, beta, indist)
    return visibility(normalized_g(global_correlation(m, s), alpha, beta, s, "global"))
