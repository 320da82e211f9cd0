"""Device equations: memristor compact model, square-law MOSFET, sources.

All functions here are pure and operate on scalars.  The solver kernels carry
their own inlined copies of the same equations; ``tests/test_devices.py``
checks the two stay in agreement.
"""

from __future__ import annotations

import bisect
import math
import warnings
from dataclasses import dataclass, field, fields, replace
from typing import Sequence, Union

#: Exponent arguments above this are clamped before ``exp``.
EXP_LIMIT = 80.0

#: Largest state change allowed in one explicit integration sub-step.
MAX_STATE_STEP = 0.01


class ParameterDomainError(ValueError):
    """A model parameter or operand lies outside its legal domain."""

    def __init__(self, name: str, message: str):
        super().__init__(f"{name}: {message}")
        self.name = name


class NumericDomainError(ValueError):
    """A non-finite operand was passed to a device equation."""


class SaturationWarning(RuntimeWarning):
    """An exponent argument hit :data:`EXP_LIMIT` and was clamped."""


def _exp(x: float) -> float:
    if x > EXP_LIMIT:
        warnings.warn(
            f"exponent argument {x:.6g} clamped to {EXP_LIMIT}", SaturationWarning, stacklevel=3
        )
        x = EXP_LIMIT
    return math.exp(x)


# ---------------------------------------------------------------------------
# Memristor
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MemristorParams:
    """Memristor model constants (defaults are the published fit).

    ``time_scale`` multiplies the state-rate prefactor ``A_rate``.  ``w_min``
    and ``w_max`` optionally confine the state variable; the defaults (0 and
    1) leave the model exactly as published.  The window vanishes at 0 and 1,
    so a device driven onto either end can never leave it; circuits that must
    switch repeatedly need bounds inside the interval.
    """

    b1: float = 1.59e-3
    b2: float = -6.2e-4
    a1: float = 1.2
    a2: float = 0.3
    alpha1: float = 0.60
    alpha2: float = -0.68
    chi: float = 1e-11
    gamma: float = 1.0
    A_rate: float = 5e-4
    m: int = 5
    p: float = 2.0
    time_scale: float = 1.0
    w_min: float = 0.0
    w_max: float = 1.0

    def with_(self, **changes) -> "MemristorParams":
        return replace(self, **changes)


MEMRISTOR_KEYS = tuple(f.name for f in fields(MemristorParams))


def validate_params(params: MemristorParams) -> MemristorParams:
    """Check the structural constraints of the memristor model.

    Raises :class:`ParameterDomainError` naming the offending parameter.
    """
    for f in fields(params):
        value = getattr(params, f.name)
        if not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ParameterDomainError(f.name, f"must be a finite number, got {value!r}")
    if not (0.0 < params.p <= 10.0):
        raise ParameterDomainError(
            "p", f"window exponent must satisfy 0 < p <= 10 (plateau p*ln(1.1) = "
            f"{params.p * math.log(1.1):.4f})"
        )
    m = params.m
    if float(m) != int(m) or int(m) < 1 or int(m) % 2 == 0:
        raise ParameterDomainError("m", f"must be an odd integer >= 1, got {m!r}")
    if params.chi < 0:
        raise ParameterDomainError("chi", "must be >= 0")
    if params.gamma <= 0:
        raise ParameterDomainError("gamma", "must be > 0")
    if params.time_scale <= 0:
        raise ParameterDomainError("time_scale", "must be > 0")
    if not (0.0 <= params.w_min < 0.1):
        raise ParameterDomainError("w_min", "state floor must satisfy 0 <= w_min < 0.1")
    if not (0.5 < params.w_max <= 1.0):
        raise ParameterDomainError("w_max", "state ceiling must satisfy 0.5 < w_max <= 1")
    return params


def _check_state(w: float) -> None:
    if not math.isfinite(w):
        raise NumericDomainError(f"state w={w!r} is not finite")
    if not (0.0 <= w <= 1.0):
        raise ParameterDomainError("w", f"state must lie in [0, 1], got {w!r}")


def window(w: float, p: float) -> float:
    """Piecewise logarithmic window (natural log); vanishes at w = 0 and w = 1."""
    _check_state(w)
    if not (0.0 < p <= 10.0):
        raise ParameterDomainError("p", f"must satisfy 0 < p <= 10, got {p!r}")
    return _window(w, p)


def _window(w: float, p: float) -> float:
    if w <= 0.1:
        return p * math.log1p(w)
    if w <= 0.9:
        return p * math.log(1.1)
    return p * math.log(2.0 - w)


def memristor_current(w: float, v: float, params: MemristorParams) -> float:
    """Device current for state ``w`` and terminal voltage ``v`` = V(n+) - V(n-)."""
    _check_state(w)
    if not math.isfinite(v):
        raise NumericDomainError(f"voltage v={v!r} is not finite")
    diode = params.chi * (_exp(params.gamma * v) - 1.0)
    if v >= 0:
        return params.b1 * w**params.a1 * (_exp(params.alpha1 * v) - 1.0) + diode
    return params.b2 * w**params.a2 * (_exp(params.alpha2 * v) - 1.0) + diode


def memristor_conductance(w: float, v: float, params: MemristorParams) -> float:
    """Analytic dI/dV of the active branch of :func:`memristor_current`."""
    _check_state(w)
    if not math.isfinite(v):
        raise NumericDomainError(f"voltage v={v!r} is not finite")
    diode = params.chi * params.gamma * _exp(params.gamma * v)
    if v >= 0:
        return params.b1 * w**params.a1 * params.alpha1 * _exp(params.alpha1 * v) + diode
    return params.b2 * w**params.a2 * params.alpha2 * _exp(params.alpha2 * v) + diode


def state_rate(w: float, v: float, params: MemristorParams) -> float:
    """dw/dt = time_scale * A_rate * v**m * window(w)."""
    _check_state(w)
    if not math.isfinite(v):
        raise NumericDomainError(f"voltage v={v!r} is not finite")
    return params.time_scale * params.A_rate * v ** int(params.m) * _window(w, params.p)


def advance_state(w: float, v: float, dt: float, params: MemristorParams) -> float:
    """Advance ``w`` over ``dt`` seconds at constant terminal voltage ``v``.

    Explicit Euler with adaptive sub-steps: no sub-step moves ``w`` by more
    than :data:`MAX_STATE_STEP`, nor by more than half the remaining distance
    to an absorbing bound (0 or 1) it is heading for; an interior bound is
    landed on exactly.  The result never leaves ``[w_min, w_max]``.
    """
    _check_state(w)
    if not math.isfinite(v) or not math.isfinite(dt):
        raise NumericDomainError("voltage and dt must be finite")
    if dt <= 0:
        raise ParameterDomainError("dt", "must be > 0")
    return _advance(w, v, dt, params.time_scale * params.A_rate, int(params.m), params.p,
                    params.w_min, params.w_max)


def _advance(w: float, v: float, dt: float, k: float, m: int, p: float, w_min: float,
             w_max: float) -> float:
    drive = k * v**m
    if drive == 0.0:
        return w
    w = min(w_max, max(w_min, w))
    remaining = dt
    while remaining > 0.0:
        rate = drive * _window(w, p)
        if rate == 0.0:
            break
        if rate > 0:
            dist, bound, absorbing = w_max - w, w_max, w_max >= 1.0
        else:
            dist, bound, absorbing = w - w_min, w_min, w_min <= 0.0
        if dist <= 0.0:
            break
        arate = abs(rate)
        h = min(remaining, MAX_STATE_STEP / arate)
        if not absorbing and dist / arate <= h:
            w = bound
            break
        if absorbing:
            h = min(h, 0.5 * dist / arate)
        wn = w + rate * h
        if wn == w:  # within one ulp of the bound
            break
        w = wn
        remaining -= h
    return min(w_max, max(w_min, w))


def integrate_state(
    w0: float, voltages: Sequence[float], dt: float, params: MemristorParams
) -> list[float]:
    """State trajectory for a sequence of piecewise-constant voltages (one per ``dt``)."""
    _check_state(w0)
    k = params.time_scale * params.A_rate
    m, p = int(params.m), params.p
    out = [w0]
    w = w0
    for v in voltages:
        w = _advance(w, float(v), dt, k, m, p, params.w_min, params.w_max)
        out.append(w)
    return out


# ---------------------------------------------------------------------------
# MOSFET
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MosfetParams:
    """Level-1 square-law transistor; ``vth`` is |Vth| for P devices."""

    polarity: str = "N"
    vth: float = 0.25
    kprime: float = 300e-6
    lambda_: float = 0.1
    w_over_l: float = 10.0

    def __post_init__(self):
        if self.polarity not in ("N", "P"):
            raise ParameterDomainError("polarity", f"must be 'N' or 'P', got {self.polarity!r}")
        if self.kprime <= 0:
            raise ParameterDomainError("kprime", "must be > 0")
        if self.w_over_l <= 0:
            raise ParameterDomainError("w_over_l", "must be > 0")
        if self.vth <= 0:
            raise ParameterDomainError("vth", "must be > 0 (|Vth| for P devices)")
        if self.lambda_ < 0:
            raise ParameterDomainError("lambda", "must be >= 0")


NMOS_DEFAULT = MosfetParams("N", 0.25, 300e-6, 0.1, 10.0)
PMOS_DEFAULT = MosfetParams("P", 0.25, 120e-6, 0.1, 10.0)
MOSFET_KEYS = ("vth", "kprime", "lambda", "w_over_l")


def _square_law(beta: float, vth: float, lam: float, vgs: float, vds: float):
    """Forward-mode (vds >= 0) current and its partials (gm, gds)."""
    vov = vgs - vth
    if vov <= 0.0:
        return 0.0, 0.0, 0.0
    clm = 1.0 + lam * vds
    if vds < vov:
        core = vov * vds - 0.5 * vds * vds
        return beta * core * clm, beta * vds * clm, beta * ((vov - vds) * clm + lam * core)
    core = 0.5 * vov * vov
    return beta * core * clm, beta * vov * clm, beta * core * lam


def mosfet_eval(beta: float, vth: float, lam: float, pol: float, vgs: float, vds: float):
    """Drain current (into drain) and partials w.r.t. vgs and vds.

    Handles reverse operation (source/drain swap) and P polarity (``pol`` = -1)
    by mirroring terminal voltages.
    """
    vgs_n, vds_n = pol * vgs, pol * vds
    if vds_n >= 0.0:
        i, gm, gds = _square_law(beta, vth, lam, vgs_n, vds_n)
        return pol * i, gm, gds
    # drain and source exchange roles
    i, gm, gds = _square_law(beta, vth, lam, vgs_n - vds_n, -vds_n)
    return -pol * i, -gm, gm + gds


def mosfet_current(params: MosfetParams, vgs: float, vds: float) -> float:
    """Drain current of the square-law model (positive into the drain for N)."""
    if not (math.isfinite(vgs) and math.isfinite(vds)):
        raise NumericDomainError("terminal voltages must be finite")
    pol = 1.0 if params.polarity == "N" else -1.0
    beta = params.kprime * params.w_over_l
    return mosfet_eval(beta, params.vth, params.lambda_, pol, vgs, vds)[0]


# ---------------------------------------------------------------------------
# Sources
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DC:
    level: float

    def value(self, t: float) -> float:
        return self.level


@dataclass(frozen=True)
class Pulse:
    v_low: float
    v_high: float
    delay: float
    rise: float
    fall: float
    width: float
    period: float

    def __post_init__(self):
        if self.rise <= 0 or self.fall <= 0:
            raise ParameterDomainError("PULSE", "rise and fall times must be > 0")
        if self.width < 0 or self.delay < 0:
            raise ParameterDomainError("PULSE", "delay and width must be >= 0")
        if self.period < self.rise + self.width + self.fall:
            raise ParameterDomainError("PULSE", "period must be >= rise + width + fall")

    def value(self, t: float) -> float:
        if t < self.delay:
            return self.v_low
        tau = math.fmod(t - self.delay, self.period)
        if tau < self.rise:
            return self.v_low + (self.v_high - self.v_low) * tau / self.rise
        tau -= self.rise
        if tau < self.width:
            return self.v_high
        tau -= self.width
        if tau < self.fall:
            return self.v_high - (self.v_high - self.v_low) * tau / self.fall
        return self.v_low


@dataclass(frozen=True)
class PWL:
    points: tuple[tuple[float, float], ...]
    _times: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        pts = tuple((float(t), float(v)) for t, v in self.points)
        if not pts:
            raise ParameterDomainError("PWL", "needs at least one point")
        times = tuple(t for t, _ in pts)
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ParameterDomainError("PWL", "times must be strictly increasing")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "_times", times)

    def value(self, t: float) -> float:
        pts = self.points
        if t <= pts[0][0]:
            return pts[0][1]
        if t >= pts[-1][0]:
            return pts[-1][1]
        k = bisect.bisect_right(self._times, t)
        (t0, v0), (t1, v1) = pts[k - 1], pts[k]
        return v0 + (v1 - v0) * (t - t0) / (t1 - t0)


@dataclass(frozen=True)
class Sin:
    offset: float
    amplitude: float
    frequency: float

    def value(self, t: float) -> float:
        return self.offset + self.amplitude * math.sin(2.0 * math.pi * self.frequency * t)


SourceSpec = Union[DC, Pulse, PWL, Sin]


def source_value(spec: SourceSpec, t: float) -> float:
    """Source voltage at time ``t``; PULSE repeats with its period."""
    return spec.value(t)
