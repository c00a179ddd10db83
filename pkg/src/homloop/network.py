"""Time-multiplexed loop network: single-photon evolution and synthesis.

The loop splits each polarization at a PBS, delays H by one bin spacing
relative to V per roundtrip, and recombines.  A fast polarization rotator
(EOM followed by a quarter-wave plate) acts as the "coin" at any selected
time bin.  Programmable in/out-coupling events move amplitude between the
loop and the outside world.

Conventions fixed here (unobservable global phases aside):

* H traverses the long arm, so every H amplitude moves from bin ``tau`` to
  ``tau + 1`` per roundtrip; V stays put.
* The Transmit coin is the exact identity.
* Common propagation phase per roundtrip is dropped; both photons of a
  pair see the same loop, so it cancels from every measured quantity.
* Within one roundtrip the order is: out-couple scheduled amplitudes,
  apply coins, shift H, apply the scalar loss factor.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import (
    BinOutOfWindowError,
    InfeasibleTargetError,
    PatternValidationError,
    WindowOverflowError,
)
from .modes import DEFAULT_WINDOW, ModeVector, Polarization

_SUPPORT_TOL = 1e-12


class CoinKind(Enum):
    TRANSMIT = "transmit"
    REFLECT = "reflect"
    BALANCED = "balanced"
    CUSTOM = "custom"


@dataclass(frozen=True)
class CoinSetting:
    """One polarization-rotation setting of the loop EOM + QWP pair.

    The three hardware voltage settings map to Transmit (theta=0),
    Balanced (theta=pi/4, the bare quarter-wave plate) and Reflect
    (theta=pi/2); Custom covers any intermediate rotation.
    """

    kind: CoinKind = CoinKind.TRANSMIT
    theta: Optional[float] = None

    _THETAS = {
        CoinKind.TRANSMIT: 0.0,
        CoinKind.REFLECT: math.pi / 2,
        CoinKind.BALANCED: math.pi / 4,
    }

    def __post_init__(self):
        if self.kind is CoinKind.CUSTOM:
            if self.theta is None or not (0.0 <= self.theta < math.pi):
                raise ValueError("custom coin needs theta in [0, pi)")
        elif self.theta is not None:
            raise ValueError("theta is only meaningful for custom coins")

    @property
    def effective_theta(self) -> float:
        if self.kind is CoinKind.CUSTOM:
            return float(self.theta)
        return self._THETAS[self.kind]

    @classmethod
    def custom(cls, theta: float) -> "CoinSetting":
        """Custom rotation, snapping exact named angles to their kinds."""
        theta = float(theta)
        if not 0.0 <= theta < math.pi:
            raise ValueError("custom coin needs theta in [0, pi)")
        for kind, value in cls._THETAS.items():
            if abs(theta - value) <= 1e-14:
                return cls(kind)
        return cls(CoinKind.CUSTOM, theta)


TRANSMIT = CoinSetting(CoinKind.TRANSMIT)
REFLECT = CoinSetting(CoinKind.REFLECT)
BALANCED = CoinSetting(CoinKind.BALANCED)


def jones_qwp() -> np.ndarray:
    """Jones matrix of a quarter-wave plate at 45 degrees to the H/V basis."""
    return np.array([[1.0, -1.0j], [-1.0j, 1.0]], dtype=np.complex128) / np.sqrt(2.0)


def jones_eom(phi: float) -> np.ndarray:
    """Jones matrix of the EOM at drive phase ``phi``."""
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, -1.0j * s], [-1.0j * s, c]], dtype=np.complex128)


def coin_matrix(setting: CoinSetting) -> np.ndarray:
    """Combined EOM+QWP rotation for one coin setting.

    Equals ``jones_eom(phi) @ jones_qwp()`` with ``theta = phi + pi/4``.
    Named kinds use exact entries so that Transmit is the exact identity
    and Reflect the exact (-i) polarization swap.
    """
    if setting.kind is CoinKind.TRANSMIT:
        return np.eye(2, dtype=np.complex128)
    if setting.kind is CoinKind.REFLECT:
        return np.array([[0.0, -1.0j], [-1.0j, 0.0]], dtype=np.complex128)
    if setting.kind is CoinKind.BALANCED:
        return jones_qwp()
    c, s = math.cos(setting.theta), math.sin(setting.theta)
    return np.array([[c, -1.0j * s], [-1.0j * s, c]], dtype=np.complex128)


def coin_from_eom_phase(phi: float) -> CoinSetting:
    """Coin setting realized by driving the EOM at phase ``phi``."""
    return CoinSetting.custom(phi + math.pi / 4)


@dataclass(frozen=True)
class LoopConfig:
    """Hardware parameters of the time-multiplexing loop."""

    bin_spacing: float = 105e-9
    roundtrip_time: float = 2.3e-6
    loop_efficiency: float = 0.80
    window: int = DEFAULT_WINDOW
    max_roundtrips: int = 20
    eom_switch_time: float = 10e-9

    def __post_init__(self):
        if not 0.0 < self.loop_efficiency <= 1.0:
            raise ValueError("loop efficiency must be in (0, 1]")
        if self.window < 1 or self.max_roundtrips < 0:
            raise ValueError("window >= 1 and max_roundtrips >= 0 required")
        if self.roundtrip_time <= self.window * self.bin_spacing:
            raise ValueError(
                "roundtrip time must exceed window * bin spacing "
                "(time bins would interlace)"
            )

    def lossless(self) -> "LoopConfig":
        return LoopConfig(
            self.bin_spacing,
            self.roundtrip_time,
            1.0,
            self.window,
            self.max_roundtrips,
            self.eom_switch_time,
        )


@dataclass(frozen=True)
class SwitchingPattern:
    """Per-roundtrip coin settings plus in/out-coupling events.

    ``coins`` maps ``(roundtrip, bin)`` to a :class:`CoinSetting`; bins
    without an entry default to Transmit.  ``incouple`` lists the
    ``(bin, polarization)`` entry points and ``outcouple`` the scheduled
    ``(roundtrip, bin, polarization)`` extraction events.
    """

    coins: Mapping = field(default_factory=dict)
    incouple: tuple = ()
    outcouple: tuple = ()

    def __post_init__(self):
        coins = {
            (int(r), int(b)): c for (r, b), c in dict(self.coins).items()
        }
        object.__setattr__(self, "coins", coins)
        object.__setattr__(
            self,
            "incouple",
            tuple((int(b), Polarization.parse(p)) for b, p in self.incouple),
        )
        object.__setattr__(
            self,
            "outcouple",
            tuple(
                (int(r), int(b), Polarization.parse(p))
                for r, b, p in self.outcouple
            ),
        )

    def depth(self) -> int:
        """Largest roundtrip index referenced by the pattern."""
        r_coins = max((r + 1 for r, _ in self.coins), default=0)
        r_events = max((r for r, _, _ in self.outcouple), default=0)
        return max(r_coins, r_events)

    def coins_for_roundtrip(self, roundtrip: int) -> dict:
        return {b: c for (r, b), c in self.coins.items() if r == roundtrip}

    def to_json_dict(self) -> dict:
        def coin_value(c: CoinSetting):
            if c.kind is CoinKind.CUSTOM:
                return {"custom": c.theta}
            return c.kind.value

        return {
            "coins": [
                {"roundtrip": r, "bin": b, "kind": coin_value(c)}
                for (r, b), c in sorted(self.coins.items())
            ],
            "incouple": [
                {"bin": b, "pol": p.value} for b, p in self.incouple
            ],
            "outcouple": [
                {"roundtrip": r, "bin": b, "pol": p.value}
                for r, b, p in self.outcouple
            ],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "SwitchingPattern":
        coins = {}
        for entry in data.get("coins", []):
            kind = entry["kind"]
            if isinstance(kind, dict):
                coin = CoinSetting(CoinKind.CUSTOM, float(kind["custom"]))
            else:
                coin = CoinSetting(CoinKind(kind))
            coins[(int(entry["roundtrip"]), int(entry["bin"]))] = coin
        incouple = [
            (int(e["bin"]), Polarization.parse(e["pol"]))
            for e in data.get("incouple", [])
        ]
        outcouple = [
            (int(e["roundtrip"]), int(e["bin"]), Polarization.parse(e["pol"]))
            for e in data.get("outcouple", [])
        ]
        return cls(coins=coins, incouple=tuple(incouple), outcouple=tuple(outcouple))

    def dumps(self, **kwargs) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, **kwargs)

    @classmethod
    def loads(cls, text: str) -> "SwitchingPattern":
        return cls.from_json_dict(json.loads(text))


@dataclass(frozen=True)
class LoopState:
    """Amplitudes over (time bin, polarization) inside the loop."""

    amplitudes: np.ndarray
    roundtrip: int = 0

    def __post_init__(self):
        arr = np.asarray(self.amplitudes, dtype=np.complex128)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError("loop state must have shape (window, 2)")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "amplitudes", arr)

    @classmethod
    def vacuum(cls, window: int) -> "LoopState":
        return cls(np.zeros((window, 2), dtype=np.complex128), 0)

    @classmethod
    def single(cls, window: int, bin_index: int, pol: Polarization) -> "LoopState":
        if not 0 <= bin_index < window:
            raise BinOutOfWindowError(f"bin {bin_index} outside window {window}")
        arr = np.zeros((window, 2), dtype=np.complex128)
        arr[bin_index, _pol_index(pol)] = 1.0
        return cls(arr, 0)

    def norm2(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))


def _pol_index(pol: Polarization) -> int:
    return 0 if pol is Polarization.H else 1


def step(state: LoopState, coins_for_roundtrip: Mapping[int, CoinSetting],
         cfg: LoopConfig) -> LoopState:
    """Advance the loop by one roundtrip: coins, H-shift, loss."""
    if state.roundtrip >= cfg.max_roundtrips:
        raise WindowOverflowError(
            f"roundtrip {state.roundtrip} reached the configured maximum"
        )
    amps = state.amplitudes.copy()
    for b, coin in coins_for_roundtrip.items():
        if not 0 <= b < cfg.window:
            raise BinOutOfWindowError(f"coin bin {b} outside window {cfg.window}")
        amps[b] = coin_matrix(coin) @ amps[b]
    # H (column 0) is delayed by one bin; V stays.
    if abs(amps[-1, 0]) > _SUPPORT_TOL:
        raise WindowOverflowError(
            f"H amplitude at bin {cfg.window - 1} would leave the window; "
            "increase the window size"
        )
    amps[1:, 0] = amps[:-1, 0]
    amps[0, 0] = 0.0
    amps *= math.sqrt(cfg.loop_efficiency)
    return LoopState(amps, state.roundtrip + 1)


def validate_pattern(pattern: SwitchingPattern, cfg: LoopConfig,
                     strict_settings: bool = False) -> list:
    """Check a pattern against the hardware constraints.

    Returns a list of human-readable diagnostics; an empty list means the
    pattern is realizable.  With ``strict_settings`` the coins must be
    limited to the three hardware voltage settings.
    """
    diags = []
    for (r, b), coin in sorted(pattern.coins.items()):
        if not 0 <= b < cfg.window:
            diags.append(f"coin at roundtrip {r}: bin {b} out of window")
        if not 0 <= r < cfg.max_roundtrips:
            diags.append(f"coin at bin {b}: roundtrip {r} exceeds maximum")
        if strict_settings and coin.kind is CoinKind.CUSTOM:
            diags.append(
                f"coin at roundtrip {r}, bin {b}: custom theta "
                f"{coin.theta:.6f} not among the hardware settings"
            )
    for b, _pol in pattern.incouple:
        if not 0 <= b < cfg.window:
            diags.append(f"in-coupling bin {b} out of window")
    seen = set()
    for r, b, p in pattern.outcouple:
        if not 0 <= b < cfg.window:
            diags.append(f"out-coupling at roundtrip {r}: bin {b} out of window")
        if not 0 <= r <= cfg.max_roundtrips:
            diags.append(
                f"out-coupling at bin {b}: roundtrip {r} exceeds maximum"
            )
        if (r, b, p) in seen:
            diags.append(
                f"duplicate extraction of roundtrip {r}, bin {b}, {p.value}"
            )
        seen.add((r, b, p))
    # Adjacent-bin setting changes must fit within the EOM switching time.
    if cfg.eom_switch_time >= cfg.bin_spacing:
        by_roundtrip = {}
        for (r, b), coin in pattern.coins.items():
            by_roundtrip.setdefault(r, {})[b] = coin
        for r, row in sorted(by_roundtrip.items()):
            for b, coin in sorted(row.items()):
                neighbour = row.get(b + 1, TRANSMIT)
                if neighbour != coin:
                    diags.append(
                        f"roundtrip {r}: coin change between bins {b} and "
                        f"{b + 1} is faster than the EOM switching time"
                    )
    return diags


def run_loop(entry, pattern: SwitchingPattern, cfg: LoopConfig,
             label: str = "") -> ModeVector:
    """Evolve one photon through the loop under a switching pattern.

    ``entry`` is the ``(bin, polarization)`` at which the photon is
    in-coupled; pass ``None`` to use the pattern's first in-coupling
    event.  Out-coupled amplitudes accumulate in the returned mode vector
    at their bin and bypass any further evolution.
    """
    diags = validate_pattern(pattern, cfg)
    if diags:
        raise PatternValidationError(diags)
    if entry is None:
        if not pattern.incouple:
            raise PatternValidationError(["pattern has no in-coupling event"])
        entry = pattern.incouple[0]
    bin_index, pol = int(entry[0]), Polarization.parse(entry[1])
    state = LoopState.single(cfg.window, bin_index, pol)

    events = {}
    for r, b, p in pattern.outcouple:
        events.setdefault(r, []).append((b, p))
    last = pattern.depth()
    out = np.zeros(cfg.window, dtype=np.complex128)
    amps = state.amplitudes.copy()
    for r in range(last + 1):
        for b, p in events.get(r, []):
            out[b] += amps[b, _pol_index(p)]
            amps[b, _pol_index(p)] = 0.0
        if r < last:
            state = step(LoopState(amps, r), pattern.coins_for_roundtrip(r), cfg)
            amps = state.amplitudes.copy()
    return ModeVector(out, label)


# ---------------------------------------------------------------------------
# Pattern synthesis (inverse of run_loop)
# ---------------------------------------------------------------------------

def _snap(values: np.ndarray, tol: float = _SUPPORT_TOL) -> np.ndarray:
    out = values.copy()
    out[np.abs(out) <= tol] = 0.0
    return out


def _native_reals(target: np.ndarray):
    """If the target is reachable by a single forward peel, return the
    signed real profile ``r`` with ``target ~ (-i r_0, ..., -i r_{n-2},
    r_{n-1})`` up to a global phase; otherwise None.
    """
    n = target.size
    w = target.copy()
    w[: n - 1] *= 1.0j
    ref = w[np.flatnonzero(np.abs(w) > _SUPPORT_TOL)[0]]
    phase = ref.conjugate() / abs(ref)
    rotated = _snap(w * phase)
    if np.max(np.abs(rotated.imag)) > 1e-11:
        return None
    reals = rotated.real
    if reals[0] < 0:  # first support entry defines the global sign
        reals = -reals
    return reals


def _sign_chain(pins: Sequence[Optional[int]], weights: np.ndarray) -> np.ndarray:
    """Signs of cos(theta_s) realizing required runner signs.

    ``pins[s]`` is the required sign of the runner amplitude before step
    ``s`` (None = unconstrained); sign flips can only be placed at bins
    carrying weight, which the peel guarantees to exist upstream of every
    pin.
    """
    n = len(pins)
    cos_signs = np.ones(n - 1, dtype=float) if n > 1 else np.zeros(0)
    for s in range(1, n):
        if pins[s] is None:
            continue
        prod = 1.0
        for j in range(s):
            prod *= cos_signs[j] if j < len(cos_signs) else 1.0
        if prod != pins[s]:
            flip_at = None
            for j in range(s - 1, -1, -1):
                if weights[j] > 0:
                    flip_at = j
                    break
            if flip_at is None:
                raise InfeasibleTargetError(
                    "no weight-carrying bin available for a sign flip"
                )
            cos_signs[flip_at] *= -1.0
    return cos_signs


def compile_pattern(target: ModeVector, cfg: LoopConfig) -> SwitchingPattern:
    """Build a switching pattern whose lossless evolution reproduces the
    target mode vector up to a global phase.

    Targets whose relative phases already match the natural (-i) factors
    of the coin compile to a single forward peel over ``n - 1``
    roundtrips (``n`` = support length).  Arbitrary complex targets take
    one extra roundtrip: every bin receives two amplitude pieces with
    quadrature phases, one parked as V and one reflected in as H, whose
    real combination realizes the required complex value exactly.
    """
    if abs(target.norm2() - 1.0) > 1e-9:
        raise InfeasibleTargetError("synthesis target must have unit norm")
    if target.window > cfg.window:
        raise InfeasibleTargetError(
            f"target window {target.window} exceeds loop window {cfg.window}"
        )
    support = np.flatnonzero(np.abs(target.amplitudes) > _SUPPORT_TOL)
    b0, bend = int(support[0]), int(support[-1])
    n = bend - b0 + 1
    u = target.amplitudes[b0 : bend + 1]

    def check_depth(depth: int) -> None:
        if depth > cfg.max_roundtrips:
            raise InfeasibleTargetError(
                f"target needs {depth} roundtrips, configuration allows "
                f"{cfg.max_roundtrips}",
                required_roundtrips=depth,
            )

    incouple = ((b0, Polarization.H),)
    if n == 1:
        return SwitchingPattern(
            coins={}, incouple=incouple,
            outcouple=((0, b0, Polarization.H),),
        )

    reals = _native_reals(u)
    if reals is not None:
        check_depth(n - 1)
        return _compile_native(reals, b0, incouple)
    check_depth(n)
    return _compile_general(u, b0, incouple)


def _compile_native(reals: np.ndarray, b0: int, incouple) -> SwitchingPattern:
    n = reals.size
    tails = np.sqrt(np.cumsum((reals**2)[::-1])[::-1])
    pins = [None] * n
    for k in range(n):
        if reals[k] != 0.0:
            pins[k] = 1 if reals[k] > 0 else -1
    cos_signs = _sign_chain(pins, reals**2)
    coins = {}
    for s in range(n - 1):
        sin_t = abs(reals[s]) / tails[s]
        cos_t = cos_signs[s] * tails[s + 1] / tails[s]
        theta = math.atan2(sin_t, cos_t)
        coin = CoinSetting.custom(theta)
        if coin != TRANSMIT:
            coins[(s, b0 + s)] = coin
    outcouple = [
        (n - 1, b0 + k, Polarization.V) for k in range(n - 1) if reals[k] != 0.0
    ]
    outcouple.append((n - 1, b0 + n - 1, Polarization.H))
    return SwitchingPattern(coins=coins, incouple=incouple,
                            outcouple=tuple(outcouple))


def _compile_general(u: np.ndarray, b0: int, incouple) -> SwitchingPattern:
    n = u.size
    # Global rotation putting the first amplitude on the -i axis; the
    # leftover pi ambiguity is spent on the first pinned runner sign.
    phase = 1.0j * u[0].conjugate() / abs(u[0])
    for candidate in (phase, -phase):
        t = _snap(u * candidate)
        x, y = t.real.copy(), t.imag.copy()
        x[np.abs(x) <= _SUPPORT_TOL] = 0.0
        y[np.abs(y) <= _SUPPORT_TOL] = 0.0
        pin0 = -_sgn(x[1]) if x[1] != 0.0 else -_sgn(y[0])
        if pin0 >= 0:
            break
    # Per-bin peel weights: the V piece carries -i*a_k (a_k = -y_k), the
    # reflected H piece carries the real part of the next bin.
    a = -y
    weights = np.empty(n)
    weights[: n - 1] = y[: n - 1] ** 2 + x[1:] ** 2
    weights[n - 1] = y[n - 1] ** 2
    tails = np.sqrt(np.cumsum(weights[::-1])[::-1])

    pins: list = [None] * n
    for s in range(n - 1):
        if x[s + 1] != 0.0:
            pins[s] = -_sgn(x[s + 1])
        elif y[s] != 0.0:
            pins[s] = _sgn(a[s])
    if y[n - 1] != 0.0:
        pins[n - 1] = _sgn(a[n - 1])
    cos_signs = _sign_chain(pins, weights)

    coins = {}
    outcouple = []
    runner = 1.0
    for s in range(n - 1):
        root = math.sqrt(weights[s])
        sin_t = root / tails[s]
        cos_t = cos_signs[s] * tails[s + 1] / tails[s]
        theta_coin = CoinSetting.custom(math.atan2(sin_t, cos_t))
        if theta_coin != TRANSMIT:
            coins[(s, b0 + s)] = theta_coin
        if root > 0.0:
            sin_p = abs(x[s + 1]) / root
            cos_p = a[s] / (sin_t * runner)
            phi_coin = CoinSetting.custom(math.atan2(sin_p, cos_p))
            if phi_coin != TRANSMIT:
                coins[(s + 1, b0 + s)] = phi_coin
            if x[s + 1] != 0.0:
                outcouple.append((s + 2, b0 + s + 1, Polarization.H))
            if a[s] != 0.0:
                outcouple.append((n, b0 + s, Polarization.V))
        runner *= cos_t
    if y[n - 1] != 0.0:
        coins[(n - 1, b0 + n - 1)] = REFLECT
        outcouple.append((n, b0 + n - 1, Polarization.V))
    return SwitchingPattern(coins=coins, incouple=incouple,
                            outcouple=tuple(outcouple))


def _sgn(value: float) -> int:
    return 1 if value >= 0 else -1
