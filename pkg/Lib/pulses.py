"""
Kick-pulse envelopes f(τ) and the momentum-dependent kick strength they induce.

An atom moving with scaled momentum ρ sees the potential through
φ(τ) = φ_c + ρτ while the pulse is on, so the impulse of one kick is

    k ∫ f(τ) sin(φ_c + ρτ) dτ = k |F(ρ)| sin(φ_c + arg F(ρ)),

with F(ρ) = ∫ f(τ) e^{iρτ} dτ. For a symmetric pulse F is real and the signed
value k·F(ρ) is K_eff(ρ). The asymmetric case (phase carried into the map) is
an extension of the square-pulse result and follows from the same integral.

"""
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import trapezoid
from scipy.optimize import bisect, minimize_scalar
from typing_extensions import Literal, Optional, Self, Union

logger = logging.getLogger(__name__)

TWO_PI = 2 * math.pi

# interpolation table used in hot loops for sampled pulses
TABLE_INTERVALS = 4096
TABLE_SPAN = 4.0
# first-zero search
ZERO_SCAN_INTERVALS = 4096
ZERO_TOLERANCE = 1e-9
DELTA_SEARCH_LIMIT = 1e4
# transforms are evaluated in chunks of this many momenta
QUADRATURE_CHUNK = 256

PulseKind = Literal["delta", "square", "sampled"]
ArrayLike = Union[float, np.ndarray]


def sinpi(x: ArrayLike) -> np.ndarray:
    """
    sin(πx), exactly zero at integer x.

    """
    x = np.asarray(x, dtype=float)
    n = np.rint(x)
    value = np.sin(np.pi * (x - n))
    return np.where(np.remainder(n, 2) == 0, value, -value)


def keffSquare(rho: ArrayLike, K: float, rhoB: float) -> ArrayLike:
    """
    K_eff(ρ) = K·sin(πρ/ρ_b)/(πρ/ρ_b), the effective kick strength of a square
    pulse. Returns a float for scalar input.

    """
    if not rhoB > 0:
        raise ValueError(f"rhoB must be positive: {rhoB}")
    x = np.asarray(rho, dtype=float) / rhoB
    safe = np.where(x == 0, 1.0, x)
    value = np.where(x == 0, K, K * sinpi(safe) / (np.pi * safe))
    if value.ndim == 0:
        return float(value)
    return value


def keffSquareSlope(rho: ArrayLike, K: float, rhoB: float) -> np.ndarray:
    """
    dK_eff/dρ of the square-pulse profile.

    """
    x = np.asarray(rho, dtype=float) / rhoB
    safe = np.where(x == 0, 1.0, x)
    slope = (np.pi * safe * np.cos(np.pi * safe) - sinpi(safe)) / (np.pi * safe**2)
    return np.where(x == 0, 0.0, K * slope / rhoB)


@dataclass(frozen=True)
class PulseShape:
    """Envelope variant."""
    kind: PulseKind = "delta"

    """Duty cycle η of a square pulse."""
    duty: Optional[float] = None

    """Sample times τ of a sampled pulse, in kick periods, centred on the kick."""
    times: tuple = ()

    """Envelope values f(τ) at `times`."""
    amplitudes: tuple = ()

    _errors: list = field(default_factory=list, compare=False, repr=False)

    def __repr__(self) -> str:
        if self.kind == "square":
            return f"<PulseShape: square η={self.duty}>"
        if self.kind == "sampled":
            return f"<PulseShape: sampled {len(self.times)} points>"
        return "<PulseShape: delta>"

    # ================
    # = constructors =
    # ================

    @classmethod
    def delta(cls) -> Self:
        return cls(kind="delta")

    @classmethod
    def square(cls, duty: float) -> Self:
        return cls(kind="square", duty=float(duty))

    @classmethod
    def sampled(cls, times, amplitudes) -> Self:
        return cls(
            kind="sampled",
            times=tuple(float(t) for t in times),
            amplitudes=tuple(float(a) for a in amplitudes),
        )

    @classmethod
    def fromCSV(cls, path: Union[str, Path]) -> Self:
        """
        Reads a two-column (τ, f) CSV file; lines starting with `#` and a
        non-numeric header line are skipped.

        """
        path = Path(path)
        assert path.exists(), f"pulse file {path} does not exist"
        rows = []
        for lineNumber, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            cells = [c.strip() for c in line.split(",")]
            try:
                values = [float(c) for c in cells]
            except ValueError:
                if not rows:
                    continue
                raise ValueError(f"{path}:{lineNumber}: not a number: {line}")
            if len(values) != 2:
                raise ValueError(f"{path}:{lineNumber}: expected 2 columns, got {len(values)}")
            rows.append(values)
        if not rows:
            raise ValueError(f"{path}: no pulse samples found")
        times, amplitudes = zip(*rows)
        pulse = cls.sampled(times, amplitudes)
        if not pulse.validate():
            raise ValueError(f"{path}: {pulse.validationErrors()}")
        return pulse

    # ==============
    # = properties =
    # ==============

    @property
    def area(self) -> float:
        """∫ f(τ) dτ."""
        if self.kind == "delta":
            return 1.0
        if self.kind == "square":
            return float(self.duty)
        return float(trapezoid(self.amplitudes, self.times))

    @property
    def support(self) -> tuple[float, float]:
        """(τ_start, τ_end) of the pulse."""
        if self.kind == "delta":
            return (0.0, 0.0)
        if self.kind == "square":
            return (-self.duty / 2, self.duty / 2)
        return (self.times[0], self.times[-1])

    @property
    def width(self) -> float:
        start, end = self.support
        return end - start

    @property
    def isSymmetric(self) -> bool:
        if self.kind != "sampled":
            return True
        times = np.asarray(self.times)
        amplitudes = np.asarray(self.amplitudes)
        scale = max(np.abs(times).max(), 1e-300)
        return bool(
            np.allclose(times, -times[::-1], rtol=0, atol=1e-12 * scale)
            and np.allclose(amplitudes, amplitudes[::-1], rtol=1e-12, atol=0)
        )

    @property
    def equivalentDuty(self) -> float:
        """Area over peak height: the duty of a square pulse of equal area."""
        if self.kind == "delta":
            return 0.0
        if self.kind == "square":
            return float(self.duty)
        return abs(self.area) / max(abs(a) for a in self.amplitudes)

    def envelope(self, tau: ArrayLike) -> np.ndarray:
        """
        f(τ) on the pulse support, zero outside. Not defined for delta pulses.

        """
        assert self.kind != "delta", "a delta pulse has no envelope"
        tau = np.asarray(tau, dtype=float)
        if self.kind == "square":
            half = self.duty / 2
            return np.where(np.abs(tau) <= half, 1.0, 0.0)
        return np.interp(tau, self.times, self.amplitudes, left=0.0, right=0.0)

    def transform(self, rho: ArrayLike) -> np.ndarray:
        """
        F(ρ) = ∫ f(τ) e^{iρτ} dτ as a complex array. Sampled pulses use the
        trapezoid rule on their own sample grid.

        """
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        if self.kind == "delta":
            return np.ones(rho.shape, dtype=complex)
        if self.kind == "square":
            return keffSquare(rho, self.duty, TWO_PI / self.duty).astype(complex)
        times = np.asarray(self.times)
        amplitudes = np.asarray(self.amplitudes)
        flat = rho.ravel()
        result = np.empty(flat.shape, dtype=complex)
        for start in range(0, flat.size, QUADRATURE_CHUNK):
            chunk = flat[start:start + QUADRATURE_CHUNK, None] * times[None, :]
            real = trapezoid(amplitudes * np.cos(chunk), times, axis=-1)
            imag = trapezoid(amplitudes * np.sin(chunk), times, axis=-1)
            result[start:start + QUADRATURE_CHUNK] = real + 1j * imag
        return result.reshape(rho.shape)

    def transformSlope(self, rho: ArrayLike) -> np.ndarray:
        """
        dF/dρ = ∫ iτ f(τ) e^{iρτ} dτ.

        """
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        if self.kind == "delta":
            return np.zeros(rho.shape, dtype=complex)
        if self.kind == "square":
            return keffSquareSlope(rho, self.duty, TWO_PI / self.duty).astype(complex)
        times = np.asarray(self.times)
        weighted = np.asarray(self.amplitudes) * times
        flat = rho.ravel()
        result = np.empty(flat.shape, dtype=complex)
        for start in range(0, flat.size, QUADRATURE_CHUNK):
            chunk = flat[start:start + QUADRATURE_CHUNK, None] * times[None, :]
            real = -trapezoid(weighted * np.sin(chunk), times, axis=-1)
            imag = trapezoid(weighted * np.cos(chunk), times, axis=-1)
            result[start:start + QUADRATURE_CHUNK] = real + 1j * imag
        return result.reshape(rho.shape)

    # ==============
    # = validation =
    # ==============

    def validate(self) -> bool:
        """
        Validates the pulse data.

        """
        self._errors.clear()
        if self.kind not in ("delta", "square", "sampled"):
            self._errors.append(f"unknown pulse kind `{self.kind}`")
            return False
        if self.kind == "square":
            if not (isinstance(self.duty, float) and 0 < self.duty < 1):
                self._errors.append(f"square pulse duty must satisfy 0 < duty < 1: {self.duty}")
        elif self.kind == "sampled":
            times, amplitudes = self.times, self.amplitudes
            if len(times) != len(amplitudes):
                self._errors.append(
                    f"sampled pulse needs as many times as amplitudes: {len(times)} != {len(amplitudes)}"
                )
            if len(times) < 2:
                self._errors.append("sampled pulse needs at least 2 points")
            if any(not math.isfinite(a) for a in amplitudes):
                self._errors.append("sampled pulse amplitudes must be finite")
            if any(not math.isfinite(t) or abs(t) >= 0.5 for t in times):
                self._errors.append("sampled pulse times must satisfy |τ| < 0.5")
            if any(b <= a for a, b in zip(times, times[1:])):
                self._errors.append("sampled pulse times must be strictly increasing")
        return not bool(self._errors)

    def validationErrors(self) -> str:
        """
        Returns the validation errors as a string.

        """
        self.validate()
        return "\n".join(self._errors)


class KickProfile:
    """
    Momentum-dependent kick of a pulse with amplitude k: K_eff(ρ) and ψ(ρ).

    Immutable after construction. Square and delta pulses are evaluated in
    closed form; sampled pulses use a table built here (4097 nodes over
    ±4·first zero, linear interpolation, error below 1e-4·K for pulses
    resolved by their own sampling) and direct quadrature outside it.

    """

    def __init__(
        self,
        pulse: PulseShape,
        k: float,
        boundary: Optional[float] = None,
        peak: Optional[float] = None,
    ):
        if not pulse.validate():
            raise ValueError(pulse.validationErrors())
        if not math.isfinite(k):
            raise ValueError(f"kick amplitude must be finite: {k}")
        self.pulse = pulse
        self.k = float(k)
        self.symmetric = pulse.isSymmetric
        self._boundary = boundary
        if pulse.kind == "square" and boundary is None:
            self._boundary = TWO_PI / pulse.duty
        self.peak = self.k * pulse.area if peak is None else float(peak)
        self._table = None
        if pulse.kind == "delta":
            self.firstZero = math.inf
        elif pulse.kind == "square":
            self.firstZero = self._boundary
        else:
            self.firstZero = firstZero(self)
            span = self.firstZero if math.isfinite(self.firstZero) else defaultSearchLimit(pulse) / TABLE_SPAN
            self._tableScale = span
            nodes = np.linspace(-TABLE_SPAN, TABLE_SPAN, TABLE_INTERVALS + 1)
            self._table = (nodes, self.k * pulse.transform(nodes * span))
            self._slopeTable = self.k * pulse.transformSlope(nodes * span)
            logger.debug("built %d-node kick table over ±%g", nodes.size, TABLE_SPAN * span)

    def __repr__(self) -> str:
        return f"<KickProfile: {self.pulse!r} K={self.peak:g} ρ_b={self.firstZero:g}>"

    @property
    def stochasticity(self) -> float:
        return self.peak

    def transform(self, rho: ArrayLike) -> np.ndarray:
        """k·F(ρ), complex, evaluated exactly (no table)."""
        rho = np.asarray(rho, dtype=float)
        if self.pulse.kind == "square":
            return np.asarray(keffSquare(rho, self.peak, self._boundary), dtype=complex)
        return (self.k * self.pulse.transform(rho)).reshape(rho.shape)

    def amplitude(self, rho: ArrayLike) -> ArrayLike:
        """
        K_eff(ρ): signed for symmetric pulses, |k·F(ρ)| otherwise.

        """
        value = self.transform(rho)
        value = value.real if self.symmetric else np.abs(value)
        if np.ndim(value) == 0:
            return float(value)
        return value

    def phase(self, rho: ArrayLike) -> ArrayLike:
        """
        arg F(ρ); 0 or π for symmetric pulses.

        """
        value = self.transform(rho)
        if self.symmetric:
            value = np.where(value.real < 0, np.pi, 0.0)
        else:
            value = np.angle(value)
        if np.ndim(value) == 0:
            return float(value)
        return value

    def kick(self, rho: np.ndarray) -> tuple[np.ndarray, Optional[np.ndarray]]:
        """
        Amplitude and phase applied by the map, for an array of momenta.
        The phase is None for symmetric pulses, whose sign lives in the
        amplitude.

        """
        if self.pulse.kind == "delta":
            return np.full(rho.shape, self.peak), None
        if self.pulse.kind == "square":
            return keffSquare(rho, self.peak, self._boundary), None
        values = self._interpolate(rho)
        if self.symmetric:
            return values.real, None
        return np.abs(values), np.angle(values)

    def slope(self, rho: np.ndarray) -> np.ndarray:
        """
        k·dF/dρ for an array of momenta, complex. Zero for delta pulses.

        """
        rho = np.asarray(rho, dtype=float)
        if self.pulse.kind == "delta":
            return np.zeros(rho.shape, dtype=complex)
        if self.pulse.kind == "square":
            return keffSquareSlope(rho, self.peak, self._boundary).astype(complex)
        return self._interpolate(rho, self._slopeTable, self.pulse.transformSlope)

    def _interpolate(self, rho: np.ndarray, table=None, exact=None) -> np.ndarray:
        nodes, values = self._table
        if table is None:
            table, exact = values, self.pulse.transform
        x = rho / self._tableScale
        result = np.interp(x, nodes, table.real) + 1j * np.interp(x, nodes, table.imag)
        outside = np.abs(x) > TABLE_SPAN
        if outside.any():
            result[outside] = self.k * exact(rho[outside])
        return result


def keffGeneral(pulse: PulseShape, k: float) -> KickProfile:
    """
    Kick profile of an arbitrary pulse with kick amplitude k.

    """
    return KickProfile(pulse, k)


def squareProfile(stochasticity: float, rhoB: float) -> KickProfile:
    """
    Square-pulse profile with peak K and its first zero pinned at ρ_b.

    """
    if not rhoB > 0:
        raise ValueError(f"rhoB must be positive: {rhoB}")
    duty = TWO_PI / rhoB
    if not duty < 1:
        raise ValueError(f"rhoB must exceed 2π for a pulse shorter than the period: {rhoB}")
    return KickProfile(
        PulseShape.square(duty), stochasticity / duty, boundary=rhoB, peak=stochasticity
    )


def deltaProfile(stochasticity: float) -> KickProfile:
    return KickProfile(PulseShape.delta(), stochasticity)


def defaultSearchLimit(pulse: PulseShape) -> float:
    """
    ρ_max for the first-zero search: 10·2π/η with η the equivalent duty,
    1e4 for delta pulses.

    """
    duty = pulse.equivalentDuty
    if duty <= 0:
        return DELTA_SEARCH_LIMIT
    return 10 * TWO_PI / duty


def firstZero(profile: KickProfile, rhoMax: Optional[float] = None) -> float:
    """
    Smallest ρ > 0 where K_eff vanishes, bracketed on a scan and refined by
    bisection to 1e-9. Returns math.inf when there is none below ρ_max.

    """
    pulse = profile.pulse
    if pulse.kind == "delta":
        return math.inf
    if rhoMax is None:
        rhoMax = defaultSearchLimit(pulse)
    grid = np.linspace(0.0, rhoMax, ZERO_SCAN_INTERVALS + 1)
    values = profile.transform(grid)

    if profile.symmetric:
        signed = values.real
        exact = np.flatnonzero(signed[1:] == 0)
        crossings = np.flatnonzero(np.sign(signed[1:-1]) * np.sign(signed[2:]) < 0)
        candidates = []
        if exact.size:
            candidates.append(float(grid[exact[0] + 1]))
        if crossings.size:
            i = crossings[0] + 1
            candidates.append(
                bisect(lambda r: float(profile.transform(r).real), grid[i], grid[i + 1], xtol=ZERO_TOLERANCE)
            )
        if candidates:
            return min(candidates)

    # |F| touches zero without changing sign
    magnitude = np.abs(values)
    threshold = 1e-6 * abs(profile.peak)
    for i in range(1, magnitude.size - 1):
        if magnitude[i] <= magnitude[i - 1] and magnitude[i] <= magnitude[i + 1]:
            result = minimize_scalar(
                lambda r: float(np.abs(profile.transform(r))),
                bounds=(grid[i - 1], grid[i + 1]),
                method="bounded",
                options=dict(xatol=ZERO_TOLERANCE),
            )
            if result.fun <= threshold:
                return float(result.x)
    return math.inf


def localDiffusion(profile: KickProfile, rho: ArrayLike) -> ArrayLike:
    """
    Quasilinear momentum diffusion D(ρ) = K_eff(ρ)²/2 per kick.

    """
    amplitude = np.abs(profile.transform(rho))
    value = amplitude**2 / 2
    if np.ndim(value) == 0:
        return float(value)
    return value


def localBreakTime(profile: KickProfile, rho: ArrayLike, hbarEff: float) -> ArrayLike:
    """
    Break time t*(ρ) = (K_eff(ρ)/ħ_eff)²/2 of atoms near momentum ρ.

    """
    if not hbarEff > 0:
        raise ValueError(f"hbarEff must be positive: {hbarEff}")
    value = np.abs(profile.transform(rho)) ** 2 / (2 * hbarEff**2)
    if np.ndim(value) == 0:
        return float(value)
    return value
