"""
Monte-Carlo atom cloud in the frame of the moving lattice.

Random numbers come from counter-based Philox streams, one per block of
BLOCK_SIZE atoms keyed by (seed, block index); blocks always draw a full
BLOCK_SIZE so an atom's initial state depends only on (seed, atom index).
Evolution runs block by block, which fixes the array layout of every
vectorised operation: results are bit-identical for any number of workers.

Besides the two map schemes the ensemble accepts `randomPhase`: every
atom's phase is redrawn uniformly before each kick (from a second stream
per block) and the symplectic kick is applied. Momentum then performs a
Markov walk with variance K_eff²/2 and drift K_eff·K_eff'/2 per kick and
no islands or invariant curves, the quasilinear picture of momentum
dependent diffusion.

"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import jv
from scipy.stats import linregress
from tqdm import tqdm
from typing_extensions import Literal, Optional, Self, Union

from .classmap import SCHEMES, TWO_PI, PhaseState, advance
from .pulses import KickProfile

logger = logging.getLogger(__name__)

BLOCK_SIZE = 4096
DEFAULT_DIFFUSION_START = 5
PHASE_STREAM = 1

EnsembleScheme = Literal["explicit", "symplectic", "randomPhase"]
ENSEMBLE_SCHEMES = SCHEMES + ("randomPhase",)


def checkEnsembleScheme(scheme: str) -> str:
    if scheme not in ENSEMBLE_SCHEMES:
        raise ValueError(f"unknown ensemble scheme {scheme!r}, expected one of {', '.join(ENSEMBLE_SCHEMES)}")
    return scheme


@dataclass(frozen=True)
class EnsembleConfig:
    """Number of atoms."""
    nAtoms: int = 100000

    """Initial rms momentum width σ_ρ."""
    sigmaRho: float = 4.0

    """Mean initial momentum in the lattice frame, ρ_L."""
    rhoL: float = 0.0

    """Number of kicks."""
    nKicks: int = 120

    """64-bit seed."""
    seed: int = 0

    _errors: list = field(default_factory=list, compare=False, repr=False)

    def validate(self) -> bool:
        self._errors.clear()
        if not (isinstance(self.nAtoms, int) and self.nAtoms >= 1):
            self._errors.append(f"`nAtoms` must be an integer >= 1: {self.nAtoms}")
        if not (math.isfinite(self.sigmaRho) and self.sigmaRho >= 0):
            self._errors.append(f"`sigmaRho` must be >= 0: {self.sigmaRho}")
        if not math.isfinite(self.rhoL):
            self._errors.append(f"`rhoL` must be finite: {self.rhoL}")
        if not (isinstance(self.nKicks, int) and self.nKicks >= 0):
            self._errors.append(f"`nKicks` must be an integer >= 0: {self.nKicks}")
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2**64):
            self._errors.append(f"`seed` must be a 64-bit unsigned integer: {self.seed}")
        return not bool(self._errors)

    def validationErrors(self) -> str:
        self.validate()
        return "\n".join(self._errors)


@dataclass(frozen=True)
class EnsembleState:
    """
    Array-backed list of PhaseState.

    """
    phi: np.ndarray
    rho: np.ndarray

    def __len__(self) -> int:
        return int(self.rho.size)

    def __getitem__(self, index: int) -> PhaseState:
        return PhaseState(float(self.phi[index]), float(self.rho[index]))

    def __iter__(self):
        for index in range(len(self)):
            yield self[index]

    @classmethod
    def fromStates(cls, states) -> Self:
        states = list(states)
        return cls(
            np.array([s.phi for s in states], dtype=float),
            np.array([s.rho for s in states], dtype=float),
        )

    def blocks(self):
        for start in range(0, len(self), BLOCK_SIZE):
            yield self.phi[start:start + BLOCK_SIZE], self.rho[start:start + BLOCK_SIZE]


@dataclass(frozen=True)
class Snapshot:
    kick: int
    state: EnsembleState


@dataclass(frozen=True)
class MomentumHistogram:
    """Bin edges, strictly increasing; bins are half-open [lo, hi)."""
    binEdges: np.ndarray

    """Weight per bin."""
    counts: np.ndarray

    """Weight below the first edge."""
    underflow: float = 0.0

    """Weight at or above the last edge."""
    overflow: float = 0.0

    @property
    def total(self) -> float:
        return float(math.fsum(self.counts)) + self.underflow + self.overflow

    @property
    def centers(self) -> np.ndarray:
        return (self.binEdges[:-1] + self.binEdges[1:]) / 2


@dataclass(frozen=True)
class Moments:
    mean: float
    variance: float
    energy: float
    asymmetry: float

    """Standard error of the mean."""
    standardError: float = 0.0

    """True when computed from bin centres rather than raw momenta."""
    approximate: bool = False


@dataclass(frozen=True)
class SweepPoint:
    rhoL: float
    mean: float
    asymmetry: float
    energy: float
    standardError: float
    nAtoms: int
    seed: int


def _blockGenerator(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, block])))


def sampleInitial(cfg: EnsembleConfig) -> EnsembleState:
    """
    ρ ~ Normal(ρ_L, σ_ρ²) by the Box-Muller transform, φ ~ Uniform[0, 2π).

    """
    if not cfg.validate():
        raise ValueError(cfg.validationErrors())
    phis, rhos = [], []
    for block in range(-(-cfg.nAtoms // BLOCK_SIZE)):
        rng = _blockGenerator(cfg.seed, block)
        uPhi = rng.random(BLOCK_SIZE)
        uRadius = rng.random(BLOCK_SIZE)
        uAngle = rng.random(BLOCK_SIZE)
        gaussian = np.sqrt(-2 * np.log1p(-uRadius)) * np.cos(TWO_PI * uAngle)
        phis.append(TWO_PI * uPhi)
        rhos.append(cfg.rhoL + cfg.sigmaRho * gaussian)
    phi = np.concatenate(phis)[:cfg.nAtoms]
    rho = np.concatenate(rhos)[:cfg.nAtoms]
    return EnsembleState(phi, rho)


def _phaseGenerator(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, block, PHASE_STREAM])))


def _evolveBlock(block, phi, rho, profile, nKicks, recordEvery, scheme, seed):
    phases = _phaseGenerator(seed, block) if scheme == "randomPhase" else None
    recorded = [(0, phi, rho)]
    for kick in range(1, nKicks + 1):
        if phases is None:
            phi, rho = advance(phi, rho, profile, scheme)
        else:
            # a full block per kick keeps atom i's phases tied to (seed, i)
            phi = TWO_PI * phases.random(BLOCK_SIZE)[:rho.size]
            phi, rho = advance(phi, rho, profile, "symplectic")
        if kick % recordEvery == 0 or kick == nKicks:
            recorded.append((kick, phi, rho))
    return recorded


def evolveEnsemble(
    states: Union[EnsembleState, list],
    profile: KickProfile,
    nKicks: int,
    recordEvery: int = 1,
    workers: int = 1,
    scheme: EnsembleScheme = "explicit",
    seed: int = 0,
) -> list[Snapshot]:
    """
    Iterates every atom independently, keeping snapshots at kick 0,
    recordEvery, 2·recordEvery, … and always at nKicks. `seed` keys the
    phase streams of the `randomPhase` scheme and is unused otherwise.

    """
    if nKicks < 0:
        raise ValueError(f"number of kicks must be >= 0: {nKicks}")
    if recordEvery < 1:
        raise ValueError(f"recordEvery must be >= 1: {recordEvery}")
    checkEnsembleScheme(scheme)
    if not isinstance(states, EnsembleState):
        states = EnsembleState.fromStates(states)

    jobs = [(block, phi, rho) for block, (phi, rho) in enumerate(states.blocks())]
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda job: _evolveBlock(*job, profile, nKicks, recordEvery, scheme, seed), jobs))
    else:
        results = [_evolveBlock(*job, profile, nKicks, recordEvery, scheme, seed) for job in jobs]

    snapshots = []
    for index in range(len(results[0]) if results else 0):
        kick = results[0][index][0]
        phi = np.concatenate([blockResult[index][1] for blockResult in results])
        rho = np.concatenate([blockResult[index][2] for blockResult in results])
        snapshots.append(Snapshot(kick, EnsembleState(phi, rho)))
    return snapshots


def histogram(
    states: Union[EnsembleState, list],
    binWidth: float,
    range: tuple[float, float],
) -> MomentumHistogram:
    """
    Counts atoms in half-open bins [lo + i·w, lo + (i+1)·w) covering range;
    atoms outside go to the underflow and overflow bins.

    """
    lo, hi = range
    if not binWidth > 0:
        raise ValueError(f"bin width must be positive: {binWidth}")
    if not lo < hi:
        raise ValueError(f"histogram range must be increasing: {range}")
    if not isinstance(states, EnsembleState):
        states = EnsembleState.fromStates(states)
    nBins = max(1, math.ceil((hi - lo) / binWidth - 1e-9))
    edges = lo + binWidth * np.arange(nBins + 1)
    index = np.searchsorted(edges, states.rho, side="right") - 1
    inside = (index >= 0) & (index < nBins)
    counts = np.bincount(index[inside], minlength=nBins).astype(float)
    return MomentumHistogram(
        binEdges=edges,
        counts=counts,
        underflow=float(np.count_nonzero(index < 0)),
        overflow=float(np.count_nonzero(index >= nBins)),
    )


def moments(source: Union[EnsembleState, MomentumHistogram, list], rhoL: float = 0.0) -> Moments:
    """
    ⟨ρ⟩, variance, ⟨ρ²⟩/2 and the asymmetry ⟨ρ⟩ − ρ_L. Sums are exact
    (math.fsum), so the result does not depend on summation order. A
    histogram uses its bin centres (overflow ignored) and is flagged
    approximate.

    """
    if isinstance(source, MomentumHistogram):
        weights = source.counts
        total = math.fsum(weights)
        if total <= 0:
            raise ValueError("histogram has no weight inside its bins")
        centers = source.centers
        mean = math.fsum(weights * centers) / total
        variance = math.fsum(weights * (centers - mean) ** 2) / total
        return Moments(
            mean=mean,
            variance=variance,
            energy=(variance + mean**2) / 2,
            asymmetry=mean - rhoL,
            standardError=math.sqrt(variance / total),
            approximate=True,
        )

    if not isinstance(source, EnsembleState):
        source = EnsembleState.fromStates(source)
    n = len(source)
    if n == 0:
        raise ValueError("cannot take moments of an empty ensemble")
    mean = math.fsum(source.rho) / n
    variance = math.fsum((source.rho - mean) ** 2) / n
    return Moments(
        mean=mean,
        variance=variance,
        energy=(variance + mean**2) / 2,
        asymmetry=mean - rhoL,
        standardError=math.sqrt(variance / n),
    )


def labFrame(states: EnsembleState, rhoL: float) -> EnsembleState:
    """Momenta seen in the laboratory, ρ − ρ_L."""
    return EnsembleState(states.phi, states.rho - rhoL)


def spreadSeries(snapshots: list[Snapshot]) -> list[tuple[int, float]]:
    """
    (kick, ⟨(ρ − ρ₀)²⟩) for every snapshot, ρ₀ being each atom's initial
    momentum.

    """
    if not snapshots:
        raise ValueError("no snapshots")
    initial = snapshots[0].state.rho
    return [
        (s.kick, math.fsum((s.state.rho - initial) ** 2) / initial.size)
        for s in snapshots
    ]


def diffusionCoefficient(
    series: list[tuple[float, float]],
    kickMin: float = DEFAULT_DIFFUSION_START,
    kickMax: Optional[float] = None,
) -> float:
    """
    Least-squares slope of a (kick, spread) series over kickMin ≤ kick ≤
    kickMax, skipping the initial transient.

    """
    kicks = np.array([k for k, _ in series], dtype=float)
    values = np.array([v for _, v in series], dtype=float)
    if kicks.size and np.any(np.diff(kicks) <= 0):
        raise ValueError("kicks must be strictly increasing")
    window = kicks >= kickMin
    if kickMax is not None:
        window &= kicks <= kickMax
    if np.count_nonzero(window) < 3:
        raise ValueError(
            f"need at least 3 points between kicks {kickMin} and {kickMax}, got {np.count_nonzero(window)}"
        )
    return float(linregress(kicks[window], values[window]).slope)


def correlatedDiffusion(stochasticity: float) -> float:
    """
    Diffusion of the standard map with the lowest-order kick-to-kick
    correlations: K²/2·(1 − 2J₂ − 2J₁² + 2J₂² + 2J₃²).

    """
    K = stochasticity
    correction = 1 - 2 * jv(2, K) - 2 * jv(1, K) ** 2 + 2 * jv(2, K) ** 2 + 2 * jv(3, K) ** 2
    return float(K**2 / 2 * correction)


def _subSeed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index, 0x5EED]).generate_state(1, np.uint64)[0])


def asymmetrySweep(
    rhoLValues: list[float],
    cfg: EnsembleConfig,
    profile: KickProfile,
    workers: int = 1,
    progress: bool = False,
    scheme: EnsembleScheme = "explicit",
) -> list[SweepPoint]:
    """
    One ensemble per ρ_L with a deterministic sub-seed per point; returns the
    final-kick asymmetry curve in input order.

    """
    if not cfg.validate():
        raise ValueError(cfg.validationErrors())
    checkEnsembleScheme(scheme)

    def runPoint(indexed):
        index, rhoL = indexed
        pointCfg = replace(cfg, rhoL=float(rhoL), seed=_subSeed(cfg.seed, index), _errors=[])
        snapshots = evolveEnsemble(
            sampleInitial(pointCfg),
            profile,
            pointCfg.nKicks,
            recordEvery=max(1, pointCfg.nKicks),
            scheme=scheme,
            seed=pointCfg.seed,
        )
        m = moments(snapshots[-1].state, rhoL=pointCfg.rhoL)
        logger.info("ρ_L = %g: ⟨ρ⟩ = %.4f, asymmetry = %.4f", rhoL, m.mean, m.asymmetry)
        return SweepPoint(
            rhoL=pointCfg.rhoL,
            mean=m.mean,
            asymmetry=m.asymmetry,
            energy=m.energy,
            standardError=m.standardError,
            nAtoms=pointCfg.nAtoms,
            seed=pointCfg.seed,
        )

    points = list(enumerate(rhoLValues))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(tqdm(pool.map(runPoint, points), total=len(points), disable=not progress, desc="sweep"))
    return [runPoint(point) for point in tqdm(points, disable=not progress, desc="sweep")]
