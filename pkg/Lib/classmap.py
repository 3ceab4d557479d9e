"""
Standard map with a momentum-dependent kick:

    φ_{n+1} = (φ_n + ρ_n) mod 2π
    ρ_{n+1} = ρ_n + K_eff(ρ_n)·sin(φ_{n+1} + ψ(ρ_n))

K_eff is taken at the pre-kick momentum ρ_n. Position is always wrapped,
momentum never.

The `symplectic` scheme keeps K_eff at ρ_n but also applies the position
shift generated by the same kick Hamiltonian Re[k·F(ρ)·e^{iφ}],

    φ' = φ_{n+1} + Re[k·F'(ρ_n)·e^{iφ'}]
    ρ_{n+1} = ρ_n + Im[k·F(ρ_n)·e^{iφ'}]

which makes the map area preserving. Both schemes agree for delta pulses.

"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from typing_extensions import Literal, Optional, Union

from .pulses import KickProfile

logger = logging.getLogger(__name__)

TWO_PI = 2 * math.pi

Scheme = Literal["explicit", "symplectic"]
SCHEMES = ("explicit", "symplectic")
NEWTON_TOLERANCE = 1e-13
NEWTON_ITERATIONS = 50


def wrapPhase(phi: np.ndarray) -> np.ndarray:
    """Reduces φ into [0, 2π)."""
    phi = np.mod(phi, TWO_PI)
    return np.where(phi >= TWO_PI, 0.0, phi)


@dataclass(frozen=True)
class PhaseState:
    """Scaled position φ in [0, 2π)."""
    phi: float

    """Scaled momentum ρ."""
    rho: float

    def __post_init__(self):
        if not (math.isfinite(self.phi) and math.isfinite(self.rho)):
            raise ValueError(f"phase state must be finite: ({self.phi}, {self.rho})")
        phi = self.phi % TWO_PI
        if phi >= TWO_PI:
            phi = 0.0
        object.__setattr__(self, "phi", float(phi))
        object.__setattr__(self, "rho", float(self.rho))


@dataclass(frozen=True)
class Trajectory:
    """States at kick index n = 0..N; states[0] is the initial condition."""
    states: tuple

    def __len__(self) -> int:
        return len(self.states)

    def __getitem__(self, index) -> PhaseState:
        return self.states[index]

    @property
    def kicks(self) -> int:
        return len(self.states) - 1

    @property
    def phi(self) -> np.ndarray:
        return np.array([s.phi for s in self.states])

    @property
    def rho(self) -> np.ndarray:
        return np.array([s.rho for s in self.states])


def checkScheme(scheme: str) -> str:
    if scheme not in SCHEMES:
        raise ValueError(f"unknown map scheme {scheme!r}, expected one of {', '.join(SCHEMES)}")
    return scheme


def _shiftedPhase(phi: np.ndarray, slope: np.ndarray) -> np.ndarray:
    # Newton on φ' - φ - Re[s·e^{iφ'}] = 0
    shifted = phi.copy()
    for _ in range(NEWTON_ITERATIONS):
        rotated = slope * np.exp(1j * shifted)
        correction = (shifted - phi - rotated.real) / (1 + rotated.imag)
        shifted = shifted - correction
        if not correction.size or np.abs(correction).max() <= NEWTON_TOLERANCE:
            break
    else:
        logger.warning("symplectic phase shift did not converge in %d iterations", NEWTON_ITERATIONS)
    return shifted


def advance(
    phi: np.ndarray, rho: np.ndarray, profile: KickProfile, scheme: Scheme = "explicit"
) -> tuple[np.ndarray, np.ndarray]:
    """
    One kick period for arrays of states.

    """
    amplitude, phase = profile.kick(rho)
    if scheme == "explicit":
        phi = wrapPhase(phi + rho)
        if phase is None:
            rho = rho + amplitude * np.sin(phi)
        else:
            rho = rho + amplitude * np.sin(phi + phase)
        return phi, rho

    checkScheme(scheme)
    slope = profile.slope(rho)
    if phase is None:
        slope = slope.real
    shifted = wrapPhase(_shiftedPhase(wrapPhase(phi + rho), slope))
    if phase is None:
        rho = rho + amplitude * np.sin(shifted)
    else:
        rho = rho + amplitude * np.sin(shifted + phase)
    return shifted, rho


def step(s: PhaseState, profile: KickProfile, scheme: Scheme = "explicit") -> PhaseState:
    phi, rho = advance(np.array([s.phi]), np.array([s.rho]), profile, scheme)
    return PhaseState(float(phi[0]), float(rho[0]))


def iterate(
    s0: PhaseState,
    profile: KickProfile,
    n: int,
    record: bool = True,
    scheme: Scheme = "explicit",
) -> Union[Trajectory, PhaseState]:
    """
    Applies the map n times. With `record=False` only the final state is kept.

    """
    if n < 0:
        raise ValueError(f"number of kicks must be >= 0: {n}")
    checkScheme(scheme)
    phi = np.array([s0.phi])
    rho = np.array([s0.rho])
    states = [s0]
    for _ in range(n):
        phi, rho = advance(phi, rho, profile, scheme)
        if record:
            states.append(PhaseState(float(phi[0]), float(rho[0])))
    if not record:
        return PhaseState(float(phi[0]), float(rho[0]))
    return Trajectory(tuple(states))


def evolveArrays(
    phi: np.ndarray, rho: np.ndarray, profile: KickProfile, n: int, scheme: Scheme = "explicit"
) -> tuple[np.ndarray, np.ndarray]:
    """
    Full history of n kicks for arrays of initial conditions, shaped
    (n + 1, len(phi)).

    """
    phiHistory = np.empty((n + 1, phi.size))
    rhoHistory = np.empty((n + 1, rho.size))
    phiHistory[0] = phi
    rhoHistory[0] = rho
    for kick in range(1, n + 1):
        phi, rho = advance(phi, rho, profile, scheme)
        phiHistory[kick] = phi
        rhoHistory[kick] = rho
    return phiHistory, rhoHistory


def poincareSection(
    initials: list, profile: KickProfile, n: int, scheme: Scheme = "explicit"
) -> list[tuple[int, int, float, float]]:
    """
    Every point of every trajectory as (trajectory id, kick, φ, ρ), ordered
    trajectory-major, kick-minor. All initial conditions are iterated
    together as one array, so the result is independent of scheduling.

    """
    if not initials:
        raise ValueError("a Poincaré section needs at least one initial condition")
    if n < 0:
        raise ValueError(f"number of kicks must be >= 0: {n}")
    checkScheme(scheme)
    phi = np.array([s.phi for s in initials])
    rho = np.array([s.rho for s in initials])
    phiHistory, rhoHistory = evolveArrays(phi, rho, profile, n, scheme)
    points = []
    for trajectory in range(phi.size):
        for kick in range(n + 1):
            points.append(
                (trajectory, kick, float(phiHistory[kick, trajectory]), float(rhoHistory[kick, trajectory]))
            )
    logger.info(
        "Poincaré section: %d trajectories, %d kicks, max |ρ| = %.4f",
        phi.size, n, float(np.abs(rhoHistory).max()),
    )
    return points


def initialGrid(
    nPhi: int,
    nRho: int,
    rhoRange: tuple[float, float],
    boundaryLine: Optional[float] = None,
) -> list[PhaseState]:
    """
    Cell-centred grid of initial conditions over φ ∈ [0, 2π) and the open
    interval rhoRange. `boundaryLine` adds one extra row of nPhi states with
    ρ exactly equal to it.

    """
    if nPhi < 1 or nRho < 1:
        raise ValueError(f"grid must have at least one cell: {nPhi}x{nRho}")
    lo, hi = rhoRange
    if not lo < hi:
        raise ValueError(f"momentum range must be increasing: {rhoRange}")
    phis = [TWO_PI * (i + 0.5) / nPhi for i in range(nPhi)]
    rhos = [lo + (hi - lo) * (j + 0.5) / nRho for j in range(nRho)]
    initials = [PhaseState(phi, rho) for rho in rhos for phi in phis]
    if boundaryLine is not None:
        initials.extend(PhaseState(phi, boundaryLine) for phi in phis)
    return initials
