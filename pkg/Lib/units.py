"""
Conversion between laboratory (SI) parameters of a pulsed optical lattice and
the dimensionless kicked-rotor parameters.

Scaled coordinates: φ = 2k_L·x, ρ = 4πT·p/(Mλ), τ = t/T, with
ħ_eff = 8ω_R·T and ω_R = ħk_L²/2M.

"""
import math
from dataclasses import dataclass, field

from scipy import constants
from typing_extensions import Optional, Self

# J·s
HBAR = constants.hbar
# kg
ATOMIC_MASS = constants.atomic_mass
# Cs-133 (AME2016 atomic mass 132.905451961 u), kg
CESIUM_MASS = 132.905451961 * ATOMIC_MASS
# Cs D2 line, the lattice wavelength used for the kicking beams, m
CESIUM_WAVELENGTH = 852e-9

TWO_PI = 2 * math.pi


def recoilFrequency(mass: float, wavelength: float) -> float:
    """
    Recoil frequency ω_R = ħk_L²/2M in rad/s, with k_L = 2π/λ.

    """
    if not mass > 0:
        raise ValueError(f"atom mass must be positive: {mass}")
    if not wavelength > 0:
        raise ValueError(f"wavelength must be positive: {wavelength}")
    return 2 * math.pi**2 * HBAR / (mass * wavelength**2)


@dataclass(frozen=True)
class PhysicalParams:
    """Atom mass, kg."""
    atomMass: float = CESIUM_MASS

    """Lattice laser wavelength, m."""
    wavelength: float = CESIUM_WAVELENGTH

    """Optical potential depth V₀, J."""
    potentialDepth: float = 0.0

    """Pulse duration t_p, s."""
    pulseWidth: float = 1.42e-6

    """Kick period T, s."""
    kickPeriod: float = 9.47e-6

    """Frequency offset Δf applied to each beam, Hz (beams differ by 2Δf)."""
    frequencyOffset: float = 0.0

    _errors: list = field(default_factory=list, compare=False, repr=False)

    @classmethod
    def cesium(
        cls,
        pulseWidth: float,
        kickPeriod: float,
        potentialDepth: float = 0.0,
        frequencyOffset: float = 0.0,
        wavelength: float = CESIUM_WAVELENGTH,
    ) -> Self:
        return cls(
            atomMass=CESIUM_MASS,
            wavelength=wavelength,
            potentialDepth=potentialDepth,
            pulseWidth=pulseWidth,
            kickPeriod=kickPeriod,
            frequencyOffset=frequencyOffset,
        )

    @property
    def duty(self) -> float:
        return self.pulseWidth / self.kickPeriod

    def validate(self) -> bool:
        """
        Checks the parameter invariants, collecting every violation.

        """
        self._errors.clear()
        for name in ("atomMass", "wavelength", "kickPeriod"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                self._errors.append(f"`{name}` must be a positive finite number: {value}")
        if not (0 < self.pulseWidth < self.kickPeriod):
            self._errors.append(
                f"`pulseWidth` must satisfy 0 < pulseWidth < kickPeriod "
                f"(duty in (0, 1)): {self.pulseWidth} vs {self.kickPeriod}"
            )
        if not (math.isfinite(self.potentialDepth) and self.potentialDepth >= 0):
            self._errors.append(f"`potentialDepth` must be >= 0: {self.potentialDepth}")
        if not math.isfinite(self.frequencyOffset):
            self._errors.append(f"`frequencyOffset` must be finite: {self.frequencyOffset}")
        return not bool(self._errors)

    def validationErrors(self) -> str:
        """
        Returns the validation errors as a string.

        """
        self.validate()
        return "\n".join(self._errors)


@dataclass(frozen=True)
class ScaledParams:
    """Recoil frequency ω_R, rad/s. None for purely dimensionless studies."""
    recoilFrequency: Optional[float]

    """Effective Planck constant ħ_eff = 8ω_R·T."""
    hbarEff: float

    """Scaled kick strength k = (8V₀/ħ)·ω_R·T²."""
    kickAmplitude: float

    """Stochasticity parameter K = η·k."""
    stochasticity: float

    """Duty cycle η = t_p/T."""
    duty: float

    """First zero of K_eff(ρ), ρ_b = 2π/η."""
    boundaryMomentum: float

    """Mean initial momentum in the moving-lattice frame, ρ_L."""
    latticeMomentum: float = 0.0

    @classmethod
    def dimensionless(
        cls,
        stochasticity: float,
        duty: float,
        hbarEff: float = 1.0,
        latticeMomentum: float = 0.0,
    ) -> Self:
        """
        Builds scaled parameters without going through SI units.

        """
        if not 0 < duty < 1:
            raise ValueError(f"duty must satisfy 0 < duty < 1: {duty}")
        if not hbarEff > 0:
            raise ValueError(f"hbarEff must be positive: {hbarEff}")
        return cls(
            recoilFrequency=None,
            hbarEff=hbarEff,
            kickAmplitude=stochasticity / duty,
            stochasticity=stochasticity,
            duty=duty,
            boundaryMomentum=TWO_PI / duty,
            latticeMomentum=latticeMomentum,
        )

    def asDict(self) -> dict:
        return dict(
            recoilFrequency=self.recoilFrequency,
            hbarEff=self.hbarEff,
            kickAmplitude=self.kickAmplitude,
            stochasticity=self.stochasticity,
            duty=self.duty,
            boundaryMomentum=self.boundaryMomentum,
            latticeMomentum=self.latticeMomentum,
        )


def _checked(p: PhysicalParams) -> PhysicalParams:
    if not p.validate():
        raise ValueError(p.validationErrors())
    return p


def boundaryMomentum(p: PhysicalParams, hbarEff: float) -> float:
    """
    Momentum boundary ρ_b = Mλ²ħ_eff/(8πħt_p): the scaled momentum at which an
    atom crosses one lattice period during the pulse, so the impulse averages
    to zero.

    """
    if not p.pulseWidth > 0:
        raise ValueError(
            "pulseWidth must be positive; a delta pulse has no momentum boundary"
        )
    rhoB = p.atomMass * p.wavelength**2 * hbarEff / (8 * math.pi * HBAR * p.pulseWidth)
    if math.isclose(hbarEff, 8 * recoilFrequency(p.atomMass, p.wavelength) * p.kickPeriod, rel_tol=1e-12):
        assert math.isclose(rhoB, TWO_PI / p.duty, rel_tol=1e-10), "ρ_b identity broken"
    return rhoB


def latticeMomentum(p: PhysicalParams, hbarEff: float) -> float:
    """
    Scaled momentum of atoms at rest in the laboratory, seen from the frame of
    the moving lattice: ρ_L = Mλ²Δf·ħ_eff/(4πħ).

    """
    rhoL = p.atomMass * p.wavelength**2 * p.frequencyOffset * hbarEff / (4 * math.pi * HBAR)
    if math.isclose(hbarEff, 8 * recoilFrequency(p.atomMass, p.wavelength) * p.kickPeriod, rel_tol=1e-12):
        assert math.isclose(
            rhoL, 4 * math.pi * p.kickPeriod * p.frequencyOffset, rel_tol=1e-10, abs_tol=1e-12
        ), "ρ_L identity broken"
    return rhoL


def scaleParams(p: PhysicalParams) -> ScaledParams:
    """
    Derives the dimensionless kicked-rotor parameters from the SI ones.

    """
    _checked(p)
    omegaR = recoilFrequency(p.atomMass, p.wavelength)
    hbarEff = 8 * omegaR * p.kickPeriod
    kickAmplitude = (8 * p.potentialDepth / HBAR) * omegaR * p.kickPeriod**2
    duty = p.duty
    return ScaledParams(
        recoilFrequency=omegaR,
        hbarEff=hbarEff,
        kickAmplitude=kickAmplitude,
        stochasticity=duty * kickAmplitude,
        duty=duty,
        boundaryMomentum=boundaryMomentum(p, hbarEff),
        latticeMomentum=latticeMomentum(p, hbarEff),
    )


def stochasticityFromDepth(p: PhysicalParams) -> float:
    """
    K = (V₀/ħ)·t_p·ħ_eff, the same quantity as scaleParams(p).stochasticity.

    """
    _checked(p)
    hbarEff = 8 * recoilFrequency(p.atomMass, p.wavelength) * p.kickPeriod
    return p.potentialDepth / HBAR * p.pulseWidth * hbarEff


def potentialDepthForStochasticity(stochasticity: float, p: PhysicalParams) -> float:
    """
    Potential depth V₀ (J) giving the requested K with the timing of `p`.

    """
    if stochasticity < 0:
        raise ValueError(f"stochasticity must be >= 0: {stochasticity}")
    _checked(p)
    omegaR = recoilFrequency(p.atomMass, p.wavelength)
    return stochasticity * HBAR / (8 * p.duty * omegaR * p.kickPeriod**2)


def scaledMomentum(momentum: float, p: PhysicalParams) -> float:
    """ρ = 4πT·p/(Mλ) for a momentum in kg·m/s."""
    return 4 * math.pi * p.kickPeriod * momentum / (p.atomMass * p.wavelength)


def physicalMomentum(rho: float, p: PhysicalParams) -> float:
    return rho * p.atomMass * p.wavelength / (4 * math.pi * p.kickPeriod)


def latticeVelocity(p: PhysicalParams) -> float:
    """Velocity of the moving interference pattern, λ·Δf in m/s."""
    return p.wavelength * p.frequencyOffset
