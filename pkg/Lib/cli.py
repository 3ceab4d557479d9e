"""
Command line front end: `pulsed_rotor <command> [options]`.

Exit codes: 0 success, 2 invalid usage or parameters, 1 anything else.

"""
import logging
import math
import os
import sys
import warnings
from argparse import ArgumentParser
from pathlib import Path

import numpy as np
import yaml
from typing_extensions import Optional

from . import __version__
from .artifacts import ArtifactWriter, RunManifest
from .classmap import SCHEMES, initialGrid, poincareSection
from .config import PRESET_NAMES, ConfigError, resolveParameters
from .ensemble import (
    EnsembleConfig,
    asymmetrySweep,
    correlatedDiffusion,
    diffusionCoefficient,
    evolveEnsemble,
    histogram,
    moments,
    sampleInitial,
    spreadSeries,
)
from .pulses import KickProfile, PulseShape, deltaProfile, squareProfile
from .quantum import QuantumConfig, breakTimeEstimate, runQuantum
from .units import CESIUM_MASS, HBAR, PhysicalParams, ScaledParams, potentialDepthForStochasticity, scaleParams

logger = logging.getLogger(__name__)

OUTPUT_ENVIRONMENT = "PULSED_ROTOR_OUTPUT_DIR"
DEFAULT_OUTPUT = Path("runs")
CONFINEMENT_TOLERANCE = 2.0
HISTOGRAM_EXTENT = 4


# ==========
# = parser =
# ==========

def _kickOptions(parser: ArgumentParser):
    parser.add_argument("--K", dest="stochasticity", help="peak stochasticity K")
    parser.add_argument("--eta", "--duty", dest="duty", help="duty cycle η of a square pulse")
    parser.add_argument("--rho-b", dest="rhoB", help="momentum boundary, e.g. 13.5pi (overrides --eta)")
    parser.add_argument("--pulse", dest="pulse", help="square, delta or a (τ, f) CSV file")


def _ensembleOptions(parser: ArgumentParser):
    parser.add_argument("--atoms", dest="atoms", help="number of atoms")
    parser.add_argument("--sigma-rho", dest="sigmaRho", help="initial rms momentum width")
    parser.add_argument("--kicks", dest="kicks", help="number of kicks")
    parser.add_argument("--scheme", dest="scheme", help="explicit, symplectic or randomPhase")


def buildParser() -> ArgumentParser:
    common = ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON or YAML config, or a previous manifest.json")
    common.add_argument("--preset", choices=PRESET_NAMES, help="named parameter set")
    common.add_argument("--out", type=Path, help=f"output folder (default ${OUTPUT_ENVIRONMENT}/<command> or ./runs/<command>)")
    common.add_argument("--seed", dest="seed", help="64-bit seed")
    common.add_argument("--workers", dest="workers", help="worker threads")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress")
    common.add_argument("--progress", action="store_true", help="show progress bars")

    parser = ArgumentParser(
        prog="pulsed_rotor",
        description="Kicked-rotor simulations of atoms in a pulsed optical lattice with finite-width pulses",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    keff = commands.add_parser("keff", parents=[common], help="tabulate K_eff(ρ) and its first zero")
    _kickOptions(keff)
    keff.add_argument("--rho-max", dest="rhoMax", help="table extent, default 3·ρ_b")
    keff.add_argument("--points", dest="points", help="number of table rows")

    poincare = commands.add_parser("poincare", parents=[common], help="Poincaré section of the kick map")
    _kickOptions(poincare)
    poincare.add_argument("--kicks", dest="kicks", help="number of kicks")
    poincare.add_argument("--grid", dest="grid", help="initial grid NPHIxNRHO, e.g. 20x20")
    poincare.add_argument("--rho-range", dest="rhoRange", help="initial momentum range LOW,HIGH")
    poincare.add_argument("--boundary-line", dest="boundaryLine", help="extra row of states at this momentum")
    poincare.add_argument("--scheme", dest="scheme", help="map scheme: explicit or symplectic")

    ensemble = commands.add_parser("ensemble", parents=[common], help="evolve an atom cloud")
    _kickOptions(ensemble)
    _ensembleOptions(ensemble)
    ensemble.add_argument("--rho-l", dest="rhoL", help="mean initial momentum in the lattice frame")
    ensemble.add_argument("--record-every", dest="recordEvery", help="snapshot interval in kicks")
    ensemble.add_argument("--bin-width", dest="binWidth", help="histogram bin width")
    ensemble.add_argument("--histogram-range", dest="histogramRange", help="histogram range LOW,HIGH")
    ensemble.add_argument("--diffusion-start", dest="diffusionStart", help="first kick of the diffusion fit")

    sweep = commands.add_parser("sweep", parents=[common], help="final asymmetry against ρ_L")
    _kickOptions(sweep)
    _ensembleOptions(sweep)
    sweep.add_argument("--rho-l", dest="rhoLValues", help="ρ_L values, start:stop:step or a comma list")

    quantum = commands.add_parser("quantum", parents=[common], help="quantum kicked rotor")
    _kickOptions(quantum)
    quantum.add_argument("--hbar", dest="hbarEff", help="effective Planck constant")
    quantum.add_argument("--grid-size", dest="gridSize", help="momentum grid size, a power of two")
    quantum.add_argument("--n-beta", dest="nBeta", help="quasimomentum samples")
    quantum.add_argument("--kicks", dest="kicks", help="number of kicks")
    quantum.add_argument("--sigma-rho", dest="sigmaRho", help="spread of the packet centres")
    quantum.add_argument("--rho-l", dest="rhoL", help="mean packet centre")
    quantum.add_argument("--packet-width", dest="packetWidth", help="momentum width of each packet")
    quantum.add_argument("--beta", dest="fixedBeta", help="use this quasimomentum for every sample")
    quantum.add_argument("--substeps", dest="substeps", help="Strang substeps per pulse")

    units = commands.add_parser("units", parents=[common], help="laboratory to scaled parameters")
    units.add_argument("--cesium", dest="cesium", action="store_const", const=True, help="Cs-133 atoms (default)")
    units.add_argument("--mass", dest="mass", help="atom mass, kg")
    units.add_argument("--wavelength", dest="wavelength", help="lattice wavelength, m")
    units.add_argument("--tp", dest="pulseWidth", help="pulse duration, s")
    units.add_argument("--T", dest="kickPeriod", help="kick period, s")
    units.add_argument("--V0", dest="potentialDepth", help="potential depth, J")
    units.add_argument("--K", dest="targetK", help="solve the potential depth for this K")
    units.add_argument("--df", dest="frequencyOffset", help="beam frequency offset, Hz")
    return parser


NON_PARAMETERS = {"command", "config", "preset", "out", "verbose", "progress"}


# =============
# = pipelines =
# =============

def buildPulse(p: dict) -> PulseShape:
    if p["pulse"] == "delta":
        return PulseShape.delta()
    if p["pulse"] == "square":
        duty = 2 * math.pi / abs(p["rhoB"]) if p["rhoB"] is not None else p["duty"]
        return PulseShape.square(duty)
    try:
        return PulseShape.fromCSV(p["pulse"])
    except ValueError as error:
        raise ConfigError(str(error), path=p["pulse"], field="pulse") from None


def _pulseArea(p: dict, pulse: PulseShape) -> float:
    if pulse.area == 0:
        raise ConfigError(f"pulse {p['pulse']} has zero area", field="pulse")
    return pulse.area


def buildProfile(p: dict) -> KickProfile:
    """
    Kick profile of the resolved parameters; K is the peak stochasticity.

    """
    K = p["stochasticity"]
    if p["pulse"] == "delta":
        return deltaProfile(K)
    if p["pulse"] == "square":
        rhoB = abs(p["rhoB"]) if p["rhoB"] is not None else 2 * math.pi / p["duty"]
        return squareProfile(K, rhoB)
    pulse = buildPulse(p)
    return KickProfile(pulse, K / _pulseArea(p, pulse))


def scaledParameters(p: dict, profile: Optional[KickProfile] = None) -> dict:
    pulse = buildPulse(p)
    scaled = dict(
        hbarEff=p["hbarEff"],
        stochasticity=p["stochasticity"],
        pulse=repr(pulse),
        duty=pulse.equivalentDuty,
        latticeMomentum=p["rhoL"],
    )
    if profile is not None:
        scaled["boundaryMomentum"] = profile.firstZero if math.isfinite(profile.firstZero) else None
        scaled["kickAmplitude"] = profile.k
    return scaled


def runKeff(p: dict, writer: ArtifactWriter, manifest: RunManifest, progress: bool):
    profile = buildProfile(p)
    manifest.scaled = scaledParameters(p, profile)
    rhoMax = p["rhoMax"]
    if rhoMax is None:
        rhoMax = 3 * profile.firstZero if math.isfinite(profile.firstZero) else 10 * abs(profile.peak) + 10
    rho = np.linspace(-rhoMax, rhoMax, p["points"])
    amplitude = np.atleast_1d(profile.amplitude(rho))
    phase = np.atleast_1d(profile.phase(rho))
    writer.writeCSV("keff.csv", ["rho", "k_eff", "phase"], zip(rho, amplitude, phase))
    print(f"K = {profile.peak:.6g}")
    print(f"first zero ρ_b = {profile.firstZero:.10g}")


def runPoincare(p: dict, writer: ArtifactWriter, manifest: RunManifest, progress: bool):
    if p["scheme"] not in SCHEMES:
        raise ConfigError(f"`scheme` {p['scheme']} needs an ensemble; use one of {', '.join(SCHEMES)}", field="scheme")
    profile = buildProfile(p)
    manifest.scaled = scaledParameters(p, profile)
    boundary = profile.firstZero
    rhoRange = p["rhoRange"]
    if rhoRange is None:
        if not math.isfinite(boundary):
            raise ConfigError("a pulse without momentum boundary needs an explicit rhoRange", field="rhoRange")
        rhoRange = (-boundary, boundary)
    nPhi, nRho = p["grid"]
    initials = initialGrid(nPhi, nRho, tuple(rhoRange), p["boundaryLine"])
    points = poincareSection(initials, profile, p["kicks"], scheme=p["scheme"])
    writer.writeCSV("poincare.csv", ["trajectory", "kick", "phi", "rho"], points)
    maxRho = max(abs(point[3]) for point in points)
    print(f"trajectories: {len(initials)}, kicks: {p['kicks']}")
    print(f"max |ρ| = {maxRho:.6f}")
    if math.isfinite(boundary) and max(abs(r) for r in rhoRange) <= boundary:
        if maxRho > boundary + CONFINEMENT_TOLERANCE:
            warnings.warn(
                f"trajectories left the momentum boundary: "
                f"max |ρ| = {maxRho:.4f} > {boundary:.4f} + {CONFINEMENT_TOLERANCE}"
            )


def _ensembleConfig(p: dict, rhoL: Optional[float] = None) -> EnsembleConfig:
    cfg = EnsembleConfig(
        nAtoms=p["atoms"],
        sigmaRho=p["sigmaRho"],
        rhoL=p["rhoL"] if rhoL is None else rhoL,
        nKicks=p["kicks"],
        seed=p["seed"],
    )
    if not cfg.validate():
        raise ConfigError(cfg.validationErrors())
    return cfg


def defaultHistogramRange(profile: KickProfile, snapshots: list, width: float) -> tuple[float, float]:
    """
    ±4·ρ_b; pulses without a boundary use whole bins covering every
    recorded momentum.

    """
    if math.isfinite(profile.firstZero):
        return -HISTOGRAM_EXTENT * profile.firstZero, HISTOGRAM_EXTENT * profile.firstZero
    low = min(float(s.state.rho.min()) for s in snapshots)
    high = max(float(s.state.rho.max()) for s in snapshots)
    return width * math.floor(low / width), width * (math.floor(high / width) + 1)


def distributionRows(snapshots: list, width: float, histogramRange: tuple[float, float]) -> list[tuple]:
    """
    One histogram per snapshot, framed by its underflow (-inf, lo) and
    overflow [hi, inf) rows so each kick's counts sum to the atom number.

    """
    rows = []
    for snapshot in snapshots:
        h = histogram(snapshot.state, width, histogramRange)
        rows.append((snapshot.kick, -math.inf, float(h.binEdges[0]), h.underflow))
        for low, high, count in zip(h.binEdges[:-1], h.binEdges[1:], h.counts):
            rows.append((snapshot.kick, low, high, count))
        rows.append((snapshot.kick, float(h.binEdges[-1]), math.inf, h.overflow))
    return rows


def runEnsemble(p: dict, writer: ArtifactWriter, manifest: RunManifest, progress: bool):
    profile = buildProfile(p)
    manifest.scaled = scaledParameters(p, profile)
    cfg = _ensembleConfig(p)
    snapshots = evolveEnsemble(
        sampleInitial(cfg),
        profile,
        cfg.nKicks,
        recordEvery=p["recordEvery"],
        workers=p["workers"],
        scheme=p["scheme"],
        seed=cfg.seed,
    )
    histogramRange = p["histogramRange"] or defaultHistogramRange(profile, snapshots, p["binWidth"])
    writer.writeCSV(
        "distribution.csv",
        ["kick", "rho_low", "rho_high", "count"],
        distributionRows(snapshots, p["binWidth"], tuple(histogramRange)),
    )

    spreads = dict(spreadSeries(snapshots))
    rows = []
    for snapshot in snapshots:
        m = moments(snapshot.state, rhoL=cfg.rhoL)
        rows.append((snapshot.kick, m.mean, m.variance, m.energy, m.asymmetry, m.standardError, spreads[snapshot.kick]))
    writer.writeCSV(
        "moments.csv",
        ["kick", "mean_rho", "variance", "energy", "asymmetry", "standard_error", "spread"],
        rows,
    )
    final = moments(snapshots[-1].state, rhoL=cfg.rhoL)
    print(f"atoms: {cfg.nAtoms}, kicks: {cfg.nKicks}")
    print(f"final ⟨ρ⟩ = {final.mean:.6f}, asymmetry = {final.asymmetry:.6f} ± {final.standardError:.6f}")
    try:
        D = diffusionCoefficient(list(spreads.items()), kickMin=p["diffusionStart"])
    except ValueError as error:
        logger.info("no diffusion estimate: %s", error)
    else:
        print(f"D = {D:.6f} (correlated estimate at peak K: {correlatedDiffusion(profile.peak):.6f})")


def runSweep(p: dict, writer: ArtifactWriter, manifest: RunManifest, progress: bool):
    profile = buildProfile(p)
    manifest.scaled = scaledParameters(p, profile)
    cfg = _ensembleConfig(p)
    points = asymmetrySweep(
        p["rhoLValues"], cfg, profile, workers=p["workers"], progress=progress, scheme=p["scheme"]
    )
    writer.writeCSV(
        "sweep.csv",
        ["rho_l", "mean_rho", "asymmetry", "energy", "standard_error", "n_atoms", "seed"],
        [(s.rhoL, s.mean, s.asymmetry, s.energy, s.standardError, s.nAtoms, s.seed) for s in points],
    )
    for s in points:
        print(f"ρ_L = {s.rhoL:8.3f}  asymmetry = {s.asymmetry:+.5f} ± {s.standardError:.5f}")


def runQuantumCommand(p: dict, writer: ArtifactWriter, manifest: RunManifest, progress: bool):
    pulse = buildPulse(p)
    cfg = QuantumConfig(
        gridSize=p["gridSize"],
        k=p["stochasticity"] / _pulseArea(p, pulse),
        pulse=pulse,
        nKicks=p["kicks"],
        nBeta=p["nBeta"],
        hbarEff=p["hbarEff"],
        sigmaRho=p["sigmaRho"],
        rhoL=p["rhoL"],
        seed=p["seed"],
        packetWidth=p["packetWidth"],
        fixedBeta=p["fixedBeta"],
        substeps=p["substeps"],
        workers=p["workers"],
    )
    manifest.scaled = scaledParameters(p)
    manifest.scaled["substeps"] = cfg.resolvedSubsteps
    series = runQuantum(cfg, progress=progress)
    writer.writeCSV("quantum.csv", ["kick", "mean_rho", "energy", "n_beta"], series.rows())
    if cfg.stochasticity > 0:
        print(f"break time t* = {breakTimeEstimate(abs(cfg.stochasticity), cfg.hbarEff):.6g} kicks")
    print(f"final energy = {series.energy[-1]:.6f}, norm drift = {series.normDrift:.3e}")


def runUnits(p: dict, writer: ArtifactWriter, manifest: RunManifest, progress: bool):
    if p["mass"] is None and not p["cesium"]:
        raise ConfigError("`mass` is required when the atoms are not cesium", field="mass")
    physical = PhysicalParams(
        atomMass=p["mass"] if p["mass"] is not None else CESIUM_MASS,
        wavelength=p["wavelength"],
        potentialDepth=p["potentialDepth"],
        pulseWidth=p["pulseWidth"],
        kickPeriod=p["kickPeriod"],
        frequencyOffset=p["frequencyOffset"],
    )
    if not physical.validate():
        raise ConfigError(physical.validationErrors())
    if p["targetK"] is not None:
        depth = potentialDepthForStochasticity(p["targetK"], physical)
        physical = PhysicalParams(
            atomMass=physical.atomMass,
            wavelength=physical.wavelength,
            potentialDepth=depth,
            pulseWidth=physical.pulseWidth,
            kickPeriod=physical.kickPeriod,
            frequencyOffset=physical.frequencyOffset,
        )
    scaled: ScaledParams = scaleParams(physical)
    manifest.physical = dict(
        atomMass=physical.atomMass,
        wavelength=physical.wavelength,
        potentialDepth=physical.potentialDepth,
        pulseWidth=physical.pulseWidth,
        kickPeriod=physical.kickPeriod,
        frequencyOffset=physical.frequencyOffset,
    )
    manifest.scaled = scaled.asDict()
    writer.writeJSON("units.json", dict(physical=manifest.physical, scaled=manifest.scaled))
    print(f"η = {scaled.duty:.6f}")
    print(f"ω_R = {scaled.recoilFrequency:.6g} rad/s")
    print(f"ħ_eff = {scaled.hbarEff:.6f}")
    print(f"ρ_b = {scaled.boundaryMomentum:.6f}")
    print(f"ρ_L = {scaled.latticeMomentum:.6f}")
    print(f"k = {scaled.kickAmplitude:.6f}, K = {scaled.stochasticity:.6f}")
    print(f"V₀ = {physical.potentialDepth:.6e} J (V₀/ħ = {physical.potentialDepth / HBAR:.6e} rad/s)")


PIPELINES = {
    "keff": runKeff,
    "poincare": runPoincare,
    "ensemble": runEnsemble,
    "sweep": runSweep,
    "quantum": runQuantumCommand,
    "units": runUnits,
}


def outputFolder(command: str, out: Optional[Path]) -> Path:
    if out is not None:
        return out
    base = os.getenv(OUTPUT_ENVIRONMENT)
    return (Path(base) if base else DEFAULT_OUTPUT) / command


def run(argv: Optional[list[str]] = None) -> int:
    """
    Runs one command and returns its exit code.

    """
    parser = buildParser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as error:
        return int(error.code or 0)

    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s [%(levelname)s] %(message)s",
    )
    flags = {key: value for key, value in vars(args).items() if key not in NON_PARAMETERS}
    try:
        parameters = resolveParameters(args.command, args.preset, args.config, flags)
        p = parameters["resolved"]
        manifest = RunManifest(command=args.command, parameters=parameters, seed=p["seed"], toolVersion=__version__)
        folder = outputFolder(args.command, args.out)
        with ArtifactWriter(folder, manifest) as writer:
            PIPELINES[args.command](p, writer, manifest, args.progress)
    except (ConfigError, yaml.YAMLError) as error:
        print(f"error: {error}", file=sys.stderr)
        return 2
    except Exception:
        logger.exception("%s failed", args.command)
        return 1
    print(f"outputs written to {folder}")
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
