"""
Quantum kicked rotor on a momentum grid ρ_m = (m + β)·ħ_eff,
m = −M/2 .. M/2−1, with finite-width pulses.

Amplitudes are stored in centred order (m = −M/2 first). The position
representation ψ(φ_j) = Σ_m c_m e^{imφ_j} on φ_j = 2πj/M is reached with
scipy.fft; the common factor e^{iβφ} never matters because the potential is
2π-periodic.

"""
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import fft
from tqdm import tqdm
from typing_extensions import Optional, Self

from .config import ConfigError
from .pulses import KickProfile, PulseShape

logger = logging.getLogger(__name__)

TWO_PI = 2 * math.pi

MIN_GRID_SIZE = 64
NORM_TOLERANCE = 1e-10
# grid momentum extent over the largest physical momentum scale
EXTENT_FACTOR = 4
EXTENT_COMFORT = 5
MIN_SUBSTEPS = 16


def isPowerOfTwo(n: int) -> bool:
    return isinstance(n, (int, np.integer)) and n > 0 and (n & (n - 1)) == 0


def gridPhases(gridSize: int) -> np.ndarray:
    """Position grid φ_j = 2πj/M."""
    return TWO_PI * np.arange(gridSize) / gridSize


def gridIndices(gridSize: int) -> np.ndarray:
    """m = −M/2 .. M/2−1."""
    return np.arange(-(gridSize // 2), gridSize // 2)


@dataclass(frozen=True)
class WaveState:
    """Momentum amplitudes, centred order."""
    amplitudes: np.ndarray

    """Quasimomentum β in [0, 1)."""
    beta: float

    """Effective Planck constant."""
    hbarEff: float

    _errors: list = field(default_factory=list, compare=False, repr=False)

    def __repr__(self) -> str:
        return f"<WaveState M={self.gridSize} β={self.beta:g} ħ={self.hbarEff:g}>"

    @classmethod
    def gaussian(
        cls,
        gridSize: int,
        hbarEff: float,
        center: float,
        width: float,
        beta: Optional[float] = None,
        position: float = 0.0,
    ) -> Self:
        """
        Wavepacket with |c_m|² ∝ exp(−(ρ_m − center)²/(2·width²)), centred
        at `position` in φ. β defaults to frac(center/ħ_eff).

        """
        if not hbarEff > 0:
            raise ValueError(f"hbarEff must be positive: {hbarEff}")
        if not width > 0:
            raise ValueError(f"packet width must be positive: {width}")
        if beta is None:
            beta = center / hbarEff - math.floor(center / hbarEff)
            if beta >= 1:
                beta = 0.0
        momenta = (gridIndices(gridSize) + beta) * hbarEff
        amplitudes = np.exp(-((momenta - center) ** 2) / (4 * width**2) - 1j * momenta * position / hbarEff)
        norm = math.sqrt(math.fsum(np.abs(amplitudes) ** 2))
        if norm == 0:
            raise ValueError(f"packet centred at {center} lies outside the momentum grid")
        return cls(amplitudes / norm, float(beta), float(hbarEff))

    @classmethod
    def planeWave(cls, gridSize: int, hbarEff: float, index: int = 0, beta: float = 0.0) -> Self:
        """Single momentum state ρ = (index + β)·ħ_eff."""
        amplitudes = np.zeros(gridSize, dtype=complex)
        amplitudes[index + gridSize // 2] = 1.0
        return cls(amplitudes, float(beta), float(hbarEff))

    # ==============
    # = properties =
    # ==============

    @property
    def gridSize(self) -> int:
        return int(self.amplitudes.size)

    @property
    def momenta(self) -> np.ndarray:
        return (gridIndices(self.gridSize) + self.beta) * self.hbarEff

    @property
    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @property
    def norm(self) -> float:
        return math.fsum(self.populations)

    @property
    def meanMomentum(self) -> float:
        return math.fsum(self.populations * self.momenta) / self.norm

    @property
    def energy(self) -> float:
        """⟨ρ²⟩/2."""
        return math.fsum(self.populations * self.momenta**2) / (2 * self.norm)

    def population(self, index: int) -> float:
        return float(self.populations[index + self.gridSize // 2])

    def withAmplitudes(self, amplitudes: np.ndarray) -> Self:
        return WaveState(amplitudes, self.beta, self.hbarEff)

    # ==============
    # = validation =
    # ==============

    def validate(self) -> bool:
        self._errors.clear()
        if not isPowerOfTwo(self.gridSize) or self.gridSize < MIN_GRID_SIZE:
            self._errors.append(f"grid size must be a power of two >= {MIN_GRID_SIZE}: {self.gridSize}")
        if not 0 <= self.beta < 1:
            self._errors.append(f"quasimomentum must satisfy 0 <= beta < 1: {self.beta}")
        if not self.hbarEff > 0:
            self._errors.append(f"hbarEff must be positive: {self.hbarEff}")
        if self.amplitudes.size and abs(self.norm - 1) > NORM_TOLERANCE:
            self._errors.append(f"state is not normalized: Σ|c|² = {self.norm!r}")
        return not bool(self._errors)

    def validationErrors(self) -> str:
        self.validate()
        return "\n".join(self._errors)


# ==================
# = split operator =
# ==================

def toPosition(amplitudes: np.ndarray) -> np.ndarray:
    return fft.ifft(fft.ifftshift(amplitudes), norm="forward")


def toMomentum(psi: np.ndarray) -> np.ndarray:
    return fft.fftshift(fft.fft(psi, norm="forward"))


def kickPhase(gridSize: int, strength: float, hbarEff: float) -> np.ndarray:
    """exp(−i·strength·cos φ_j/ħ_eff) on the position grid."""
    return np.exp(-1j * strength * np.cos(gridPhases(gridSize)) / hbarEff)


def freePhase(momenta: np.ndarray, duration: float, hbarEff: float) -> np.ndarray:
    return np.exp(-1j * momenta**2 * duration / (2 * hbarEff))


def kickDelta(s: WaveState, k: float) -> WaveState:
    """
    Instantaneous kick exp(−i·k·cos φ/ħ_eff).

    """
    if k == 0:
        return s.withAmplitudes(s.amplitudes.copy())
    psi = toPosition(s.amplitudes) * kickPhase(s.gridSize, k, s.hbarEff)
    return s.withAmplitudes(toMomentum(psi))


def freeEvolve(s: WaveState, duration: float) -> WaveState:
    """
    Free evolution over `duration` kick periods; diagonal in momentum.

    """
    if duration == 0:
        return s.withAmplitudes(s.amplitudes.copy())
    return s.withAmplitudes(s.amplitudes * freePhase(s.momenta, duration, s.hbarEff))


def defaultSubsteps(pulse: PulseShape, momentumExtent: float) -> int:
    """
    max(16, ⌈4·η·ρ_max/π⌉): keeps the free phase per substep well below π at
    the grid edge.

    """
    if pulse.kind == "delta":
        return 1
    return max(MIN_SUBSTEPS, math.ceil(4 * pulse.width * momentumExtent / math.pi))


def pulseWeights(pulse: PulseShape, substeps: int) -> np.ndarray:
    """
    Potential area of each substep: f at the substep midpoints times δτ,
    rescaled so the weights add up to ∫f dτ.

    """
    start, end = pulse.support
    delta = (end - start) / substeps
    midpoints = start + (np.arange(substeps) + 0.5) * delta
    weights = pulse.envelope(midpoints) * delta
    total = math.fsum(weights)
    if total != 0:
        weights = weights * (pulse.area / total)
    return weights


class Propagator:
    """
    Precomputed phases for one kick period: free evolution over 1 − w
    followed by the Strang-split pulse of width w.

        free(δ/2) V₁ free(δ) V₂ … free(δ) V_S free(δ/2)

    """

    def __init__(
        self,
        gridSize: int,
        beta: float,
        hbarEff: float,
        pulse: PulseShape,
        k: float,
        substeps: int,
        period: float = 1.0,
    ):
        if substeps < 1:
            raise ValueError(f"substeps must be >= 1: {substeps}")
        self.pulse = pulse
        self.substeps = substeps
        momenta = (gridIndices(gridSize) + beta) * hbarEff
        width = pulse.width
        self.gap = freePhase(momenta, period - width, hbarEff)
        if pulse.kind == "delta":
            self.kicks = [kickPhase(gridSize, k * pulse.area, hbarEff)]
            self.halfStep = self.fullStep = None
            return
        delta = width / substeps
        self.halfStep = freePhase(momenta, delta / 2, hbarEff)
        self.fullStep = freePhase(momenta, delta, hbarEff)
        cache = {}
        self.kicks = []
        for weight in pulseWeights(pulse, substeps):
            if weight not in cache:
                cache[weight] = kickPhase(gridSize, k * weight, hbarEff)
            self.kicks.append(cache[weight])

    def pulseStep(self, amplitudes: np.ndarray) -> np.ndarray:
        if self.halfStep is None:
            return toMomentum(toPosition(amplitudes) * self.kicks[0])
        amplitudes = amplitudes * self.halfStep
        last = len(self.kicks) - 1
        for index, phase in enumerate(self.kicks):
            amplitudes = toMomentum(toPosition(amplitudes) * phase)
            amplitudes = amplitudes * (self.halfStep if index == last else self.fullStep)
        return amplitudes

    def period(self, amplitudes: np.ndarray) -> np.ndarray:
        return self.pulseStep(amplitudes * self.gap)


def kickFinite(s: WaveState, pulse: PulseShape, k: float, substeps: int) -> WaveState:
    """
    Evolution across one pulse of amplitude k, including the free motion
    during it. A delta pulse reduces to kickDelta(s, k).

    """
    if substeps < 1:
        raise ValueError(f"substeps must be >= 1: {substeps}")
    if pulse.kind == "delta":
        return kickDelta(s, k * pulse.area)
    propagator = Propagator(s.gridSize, s.beta, s.hbarEff, pulse, k, substeps)
    return s.withAmplitudes(propagator.pulseStep(s.amplitudes))


# ============
# = estimates =
# ============

def breakTimeEstimate(stochasticity: float, hbarEff: float) -> float:
    """
    Kicks after which classical diffusion stops: t* = (K/ħ_eff)²/2.

    """
    if not stochasticity > 0:
        raise ValueError(f"stochasticity must be positive: {stochasticity}")
    if not hbarEff > 0:
        raise ValueError(f"hbarEff must be positive: {hbarEff}")
    return (stochasticity / hbarEff) ** 2 / 2


def localizationLength(stochasticity: float, hbarEff: float) -> float:
    """Momentum scale ħ_eff·t* at which the distribution saturates."""
    return hbarEff * breakTimeEstimate(stochasticity, hbarEff)


# ==========
# = config =
# ==========

@dataclass(frozen=True)
class QuantumConfig:
    """Number of momentum grid points M, a power of two >= 64."""
    gridSize: int = 1024

    """Kick amplitude k; the stochasticity is k·∫f dτ."""
    k: float = 5.0

    """Pulse envelope."""
    pulse: PulseShape = field(default_factory=PulseShape.delta)

    """Number of kicks."""
    nKicks: int = 500

    """Number of incoherently averaged quasimomentum samples."""
    nBeta: int = 16

    """Effective Planck constant."""
    hbarEff: float = 1.0

    """Width of the initial momentum distribution the packet centres are drawn from."""
    sigmaRho: float = 4.0

    """Mean initial momentum in the lattice frame."""
    rhoL: float = 0.0

    """64-bit seed."""
    seed: int = 0

    """Momentum width of each packet; None means ħ_eff/4."""
    packetWidth: Optional[float] = None

    """Single-β mode: every sample uses this quasimomentum."""
    fixedBeta: Optional[float] = None

    """Strang substeps per pulse; None uses defaultSubsteps."""
    substeps: Optional[int] = None

    """Threads running quasimomentum samples."""
    workers: int = 1

    _errors: list = field(default_factory=list, compare=False, repr=False)

    @property
    def stochasticity(self) -> float:
        return self.k * self.pulse.area

    @property
    def momentumExtent(self) -> float:
        """Largest momentum on the grid, (M/2)·ħ_eff."""
        return self.gridSize // 2 * self.hbarEff

    @property
    def width(self) -> float:
        return self.hbarEff / 4 if self.packetWidth is None else self.packetWidth

    @property
    def resolvedSubsteps(self) -> int:
        if self.substeps is not None:
            return self.substeps
        return defaultSubsteps(self.pulse, self.momentumExtent)

    @cached_property
    def boundaryMomentum(self) -> float:
        """First zero of the kick profile; inf for delta and invalid pulses."""
        if self.pulse.kind == "delta" or not self.pulse.validate():
            return math.inf
        return KickProfile(self.pulse, self.k).firstZero

    def requiredExtent(self) -> float:
        """
        4·max(|ρ_L| + ħ_eff·t*, ρ_b), ρ_b dropped for pulses without a
        first zero.

        """
        scale = abs(self.rhoL)
        if self.stochasticity > 0:
            scale += localizationLength(abs(self.stochasticity), self.hbarEff)
        if math.isfinite(self.boundaryMomentum):
            scale = max(scale, self.boundaryMomentum)
        return EXTENT_FACTOR * scale

    def validate(self) -> bool:
        self._errors.clear()
        if not isPowerOfTwo(self.gridSize) or self.gridSize < MIN_GRID_SIZE:
            self._errors.append(f"`gridSize` must be a power of two >= {MIN_GRID_SIZE}: {self.gridSize}")
        if not math.isfinite(self.k):
            self._errors.append(f"`k` must be finite: {self.k}")
        if not self.pulse.validate():
            self._errors.append(f"`pulse`: {self.pulse.validationErrors()}")
        if not (isinstance(self.nKicks, int) and self.nKicks >= 0):
            self._errors.append(f"`nKicks` must be an integer >= 0: {self.nKicks}")
        if not (isinstance(self.nBeta, int) and self.nBeta >= 1):
            self._errors.append(f"`nBeta` must be an integer >= 1: {self.nBeta}")
        if not (math.isfinite(self.hbarEff) and self.hbarEff > 0):
            self._errors.append(f"`hbarEff` must be positive: {self.hbarEff}")
        if not (math.isfinite(self.sigmaRho) and self.sigmaRho >= 0):
            self._errors.append(f"`sigmaRho` must be >= 0: {self.sigmaRho}")
        if not math.isfinite(self.rhoL):
            self._errors.append(f"`rhoL` must be finite: {self.rhoL}")
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2**64):
            self._errors.append(f"`seed` must be a 64-bit unsigned integer: {self.seed}")
        if self.packetWidth is not None and not self.packetWidth > 0:
            self._errors.append(f"`packetWidth` must be positive: {self.packetWidth}")
        if self.fixedBeta is not None and not 0 <= self.fixedBeta < 1:
            self._errors.append(f"`fixedBeta` must satisfy 0 <= beta < 1: {self.fixedBeta}")
        if self.substeps is not None and not (isinstance(self.substeps, int) and self.substeps >= 1):
            self._errors.append(f"`substeps` must be an integer >= 1: {self.substeps}")
        if not (isinstance(self.workers, int) and self.workers >= 1):
            self._errors.append(f"`workers` must be an integer >= 1: {self.workers}")
        if self._errors:
            return False
        required = self.requiredExtent()
        if self.momentumExtent < required:
            self._errors.append(
                f"`gridSize` too small: momentum extent (M/2)·ħ_eff = {self.momentumExtent:g} "
                f"must be >= {required:g} (4× the larger of |ρ_L| + localization length and ρ_b)"
            )
        return not bool(self._errors)

    def validationErrors(self) -> str:
        self.validate()
        return "\n".join(self._errors)


@dataclass(frozen=True)
class QuantumSeries:
    """Kick index n = 0..N."""
    kicks: np.ndarray

    """Incoherent average of ⟨ρ⟩ per kick."""
    meanRho: np.ndarray

    """Incoherent average of ⟨ρ²⟩/2 per kick."""
    energy: np.ndarray

    nBeta: int

    """Largest |Σ|c|² − 1| seen over all samples and kicks."""
    normDrift: float

    def rows(self) -> list[tuple]:
        return [
            (int(kick), float(mean), float(energy), self.nBeta)
            for kick, mean, energy in zip(self.kicks, self.meanRho, self.energy)
        ]


def initialState(cfg: QuantumConfig, index: int) -> WaveState:
    """
    Packet of sample `index`: centre ~ Normal(ρ_L, σ_ρ²) and position ~
    Uniform[0, 2π) from a Philox stream keyed by (seed, index).

    """
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([cfg.seed, index])))
    center = cfg.rhoL + cfg.sigmaRho * float(rng.standard_normal())
    position = TWO_PI * float(rng.random())
    return WaveState.gaussian(
        cfg.gridSize, cfg.hbarEff, center, cfg.width, beta=cfg.fixedBeta, position=position
    )


def _runSample(cfg: QuantumConfig, index: int, substeps: int):
    state = initialState(cfg, index)
    propagator = Propagator(state.gridSize, state.beta, state.hbarEff, cfg.pulse, cfg.k, substeps)
    momenta = state.momenta
    amplitudes = state.amplitudes
    means = np.empty(cfg.nKicks + 1)
    energies = np.empty(cfg.nKicks + 1)
    drift = 0.0
    for kick in range(cfg.nKicks + 1):
        if kick:
            amplitudes = propagator.period(amplitudes)
        populations = np.abs(amplitudes) ** 2
        norm = math.fsum(populations)
        drift = max(drift, abs(norm - 1))
        means[kick] = math.fsum(populations * momenta) / norm
        energies[kick] = math.fsum(populations * momenta**2) / (2 * norm)
    return means, energies, drift


def runQuantum(cfg: QuantumConfig, progress: bool = False) -> QuantumSeries:
    """
    Evolves cfg.nBeta wavepackets, free evolution then pulse in every
    period, and averages ⟨ρ⟩ and ⟨ρ²⟩/2 over the samples in index order.

    """
    if not cfg.validate():
        raise ConfigError(cfg.validationErrors())
    required = cfg.requiredExtent()
    if cfg.momentumExtent < EXTENT_COMFORT / EXTENT_FACTOR * required:
        warnings.warn(
            f"momentum grid extent {cfg.momentumExtent:g} only just meets the required "
            f"{required:g}; consider a larger gridSize"
        )
    substeps = cfg.resolvedSubsteps
    logger.info(
        "quantum run: M=%d ħ=%g K=%g, %d kicks, %d samples, %d substeps",
        cfg.gridSize, cfg.hbarEff, cfg.stochasticity, cfg.nKicks, cfg.nBeta, substeps,
    )

    indices = range(cfg.nBeta)
    if cfg.workers > 1 and cfg.nBeta > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(tqdm(
                pool.map(lambda index: _runSample(cfg, index, substeps), indices),
                total=cfg.nBeta, disable=not progress, desc="quasimomentum",
            ))
    else:
        results = [_runSample(cfg, index, substeps) for index in tqdm(indices, disable=not progress, desc="quasimomentum")]

    means = np.array([math.fsum(r[0][kick] for r in results) / cfg.nBeta for kick in range(cfg.nKicks + 1)])
    energies = np.array([math.fsum(r[1][kick] for r in results) / cfg.nBeta for kick in range(cfg.nKicks + 1)])
    drift = max(r[2] for r in results)
    if drift > NORM_TOLERANCE:
        warnings.warn(f"norm drifted by {drift:.3e} during the quantum run")
    return QuantumSeries(
        kicks=np.arange(cfg.nKicks + 1),
        meanRho=means,
        energy=energies,
        nBeta=cfg.nBeta,
        normDrift=drift,
    )
