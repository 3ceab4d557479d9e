"""
Run parameters: defaults < preset < config file < command-line flags.

Config files are JSON or YAML mappings of parameter name to value; a
`manifest.json` written by a previous run is accepted too, its resolved
parameters are reused as the file layer.

"""
import json
import logging
import math
import re
import warnings
from dataclasses import dataclass
from pathlib import Path

import yaml
from packaging.version import InvalidVersion, Version
from typing_extensions import Any, Optional, Union

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """
    Invalid configuration; `path`, `line` and `field` locate the first
    problem when known.

    """

    def __init__(self, message: str, path=None, line: Optional[int] = None, field: Optional[str] = None):
        super().__init__(message)
        self.path = path
        self.line = line
        self.field = field


# ===========
# = parsers =
# ===========

ANGLE_PATTERN = re.compile(
    r"^\s*(?P<factor>[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?)?\s*\*?\s*(?P<pi>pi|π)\s*$"
)


def parseAngle(value: Union[str, float, int]) -> float:
    """
    A number, or a multiple of π written as `13.5pi`, `-pi`, `2*pi` or `3π`.

    """
    if isinstance(value, bool):
        raise ValueError(f"not a number: {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    text = str(value).strip()
    match = ANGLE_PATTERN.match(text)
    if match:
        factor = match.group("factor")
        return math.pi if factor is None else float(factor) * math.pi
    if text.startswith("-") and ANGLE_PATTERN.match(text[1:]):
        return -parseAngle(text[1:])
    try:
        return float(text)
    except ValueError:
        raise ValueError(f"not a number or multiple of pi: {value!r}") from None


def parseRange(value: Union[str, list, tuple]) -> list[float]:
    """
    `start:stop:step` (stop included when the last step lands on it), a
    comma separated list, or a list of values.

    """
    if isinstance(value, (list, tuple)):
        return [parseAngle(v) for v in value]
    text = str(value).strip()
    if ":" not in text:
        return [parseAngle(v) for v in text.split(",") if v.strip()]
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"range must look like start:stop:step: {value!r}")
    start, stop, step = (parseAngle(p) for p in parts)
    if not step > 0:
        raise ValueError(f"range step must be positive: {value!r}")
    if stop < start:
        raise ValueError(f"range stop must not be below start: {value!r}")
    count = math.floor((stop - start) / step + 1e-9)
    return [start + i * step for i in range(count + 1)]


def parseGrid(value: Union[str, list, tuple]) -> tuple[int, int]:
    """`20x20` → (20, 20)."""
    if isinstance(value, (list, tuple)):
        parts = list(value)
    else:
        parts = str(value).lower().replace("×", "x").split("x")
    if len(parts) != 2:
        raise ValueError(f"grid must look like NPHIxNRHO: {value!r}")
    try:
        nPhi, nRho = (int(p) for p in parts)
    except (TypeError, ValueError):
        raise ValueError(f"grid must look like NPHIxNRHO: {value!r}") from None
    if nPhi < 1 or nRho < 1:
        raise ValueError(f"grid dimensions must be >= 1: {value!r}")
    return nPhi, nRho


# ==========
# = schema =
# ==========

@dataclass(frozen=True)
class Field:
    kind: str
    default: Any
    help: str = ""
    choices: tuple = ()


FIELDS = {
    # kick
    "stochasticity": Field("float", 5.3, "peak stochasticity K"),
    "duty": Field("float", 0.15, "duty cycle η = t_p/T of a square pulse"),
    "rhoB": Field("optionalFloat", None, "momentum boundary of a square pulse; overrides duty"),
    "pulse": Field("str", "square", "`square`, `delta` or a (τ, f) CSV file"),
    "scheme": Field("choice", "explicit", "map scheme", ("explicit", "symplectic", "randomPhase")),
    # map and ensemble
    "kicks": Field("int", 120, "number of kicks"),
    "grid": Field("grid", [20, 20], "Poincaré initial grid NPHIxNRHO"),
    "rhoRange": Field("optionalPair", None, "momentum range of the initial grid, default ±ρ_b"),
    "boundaryLine": Field("optionalFloat", None, "extra row of initial states at exactly this momentum"),
    "atoms": Field("int", 100000, "number of atoms"),
    "sigmaRho": Field("float", 4.0, "initial rms momentum width"),
    "rhoL": Field("float", 0.0, "mean initial momentum in the lattice frame"),
    "rhoLValues": Field("range", "0:73:2", "ρ_L values of a sweep"),
    "seed": Field("int", 0, "64-bit seed"),
    "recordEvery": Field("int", 1, "snapshot interval in kicks"),
    "binWidth": Field("float", 1.0, "momentum histogram bin width"),
    "histogramRange": Field("optionalPair", None, "histogram momentum range, default ±4·ρ_b"),
    "diffusionStart": Field("int", 5, "first kick of the diffusion fit"),
    "rhoMax": Field("optionalFloat", None, "largest momentum of a K_eff table"),
    "points": Field("int", 1001, "samples of a K_eff table"),
    "workers": Field("int", 1, "worker threads"),
    # quantum
    "hbarEff": Field("float", 1.0, "effective Planck constant"),
    "gridSize": Field("int", 1024, "momentum grid size, a power of two"),
    "nBeta": Field("int", 16, "quasimomentum samples"),
    "packetWidth": Field("optionalFloat", None, "momentum width of each wavepacket, default ħ_eff/4"),
    "fixedBeta": Field("optionalFloat", None, "single quasimomentum for every sample"),
    "substeps": Field("optionalInt", None, "Strang substeps per pulse"),
    # laboratory units
    "cesium": Field("bool", True, "use the Cs-133 mass"),
    "mass": Field("optionalFloat", None, "atom mass, kg"),
    "wavelength": Field("float", 852e-9, "lattice wavelength, m"),
    "pulseWidth": Field("float", 1.42e-6, "pulse duration t_p, s"),
    "kickPeriod": Field("float", 9.47e-6, "kick period T, s"),
    "potentialDepth": Field("float", 0.0, "potential depth V₀, J"),
    "targetK": Field("optionalFloat", None, "solve V₀ for this stochasticity"),
    "frequencyOffset": Field("float", 0.0, "beam frequency offset Δf, Hz"),
}

DEFAULTS = {name: f.default for name, f in FIELDS.items()}

PRESETS = {
    "fig1-left": {
        "stochasticity": 5.3,
        "rhoB": "13.5pi",
        "kicks": 120,
        "grid": "20x20",
    },
    "fig1-right": {
        "stochasticity": 5.3,
        "rhoB": "13.5pi",
        "kicks": 120,
        "grid": "20x10",
        "rhoRange": ["-15.5pi", "-11.5pi"],
        "boundaryLine": "-13.5pi",
    },
    "fig3-sweep": {
        "stochasticity": 5.3,
        "duty": 0.15,
        "atoms": 100000,
        "kicks": 120,
        "sigmaRho": 4.0,
        "rhoLValues": "0:73:2",
        "scheme": "randomPhase",
    },
    "localization": {
        "pulse": "delta",
        "stochasticity": 5.0,
        "hbarEff": 2.0,
        "gridSize": 2048,
        "nBeta": 16,
        "kicks": 500,
    },
    "resonance": {
        "pulse": "delta",
        "stochasticity": 1.0,
        "hbarEff": "4pi",
        "fixedBeta": 0.0,
        "sigmaRho": 0.0,
        "nBeta": 1,
        "kicks": 50,
        "gridSize": 256,
    },
}

PRESET_ALIASES = {
    "confinement": "fig1-left",
    "boundary-line": "fig1-right",
    "asymmetry-sweep": "fig3-sweep",
}

PRESET_NAMES = tuple(sorted([*PRESETS, *PRESET_ALIASES]))


def presetName(name: str) -> str:
    """Canonical name of a preset or alias."""
    name = PRESET_ALIASES.get(name, name)
    if name not in PRESETS:
        raise ConfigError(f"unknown preset `{name}`, expected one of {', '.join(PRESET_NAMES)}", field="preset")
    return name


def _coerce(name: str, value: Any) -> Any:
    f = FIELDS[name]
    kind = f.kind
    if kind.startswith("optional"):
        if value is None:
            return None
        kind = kind[len("optional"):].lower()
    if kind == "float":
        number = parseAngle(value)
        if not math.isfinite(number):
            raise ValueError(f"must be finite: {value!r}")
        return number
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, (int, str)):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise ValueError(f"must be an integer: {value!r}")
        return int(value)
    if kind == "bool":
        if not isinstance(value, bool):
            raise ValueError(f"must be true or false: {value!r}")
        return value
    if kind == "str":
        if not isinstance(value, str):
            raise ValueError(f"must be a string: {value!r}")
        return value
    if kind == "choice":
        if value not in f.choices:
            raise ValueError(f"must be one of {', '.join(f.choices)}: {value!r}")
        return value
    if kind == "grid":
        return list(parseGrid(value))
    if kind == "range":
        values = parseRange(value)
        if not values:
            raise ValueError("must contain at least one value")
        return values
    if kind == "pair":
        values = parseRange(value) if isinstance(value, str) and ":" not in value else value
        if not isinstance(values, (list, tuple)) or len(values) != 2:
            raise ValueError(f"must be a pair [low, high]: {value!r}")
        low, high = (parseAngle(v) for v in values)
        if not low < high:
            raise ValueError(f"must be increasing: {value!r}")
        return [low, high]
    raise AssertionError(f"unknown field kind {kind}")


def coerceLayer(values: dict, source: str, lines: Optional[dict] = None) -> tuple[dict, list[str]]:
    """
    Checks names and types of one parameter layer, collecting every problem.

    """
    result, errors = {}, []
    for name, value in values.items():
        where = source
        if lines and name in lines:
            where = f"{source}:{lines[name]}"
        if name not in FIELDS:
            errors.append(f"{where}: unknown parameter `{name}`")
            continue
        try:
            result[name] = _coerce(name, value)
        except ValueError as error:
            errors.append(f"{where}: `{name}` {error}")
    return result, errors


def checkInvariants(p: dict) -> list[str]:
    """
    Cross-field rules on a fully resolved parameter set.

    """
    errors = []
    if p["rhoB"] is None and not 0 < p["duty"] < 1:
        errors.append(f"`duty` must satisfy 0 < duty < 1 (pulse shorter than the kick period): {p['duty']}")
    if p["rhoB"] is not None and not abs(p["rhoB"]) > 2 * math.pi:
        errors.append(f"`rhoB` must exceed 2π so that 0 < duty < 1: {p['rhoB']}")
    if p["pulse"] not in ("square", "delta") and not Path(p["pulse"]).exists():
        errors.append(f"`pulse` must be square, delta or an existing CSV file: {p['pulse']}")
    for name in ("kicks", "seed"):
        if p[name] < 0:
            errors.append(f"`{name}` must be >= 0: {p[name]}")
    if p["seed"] >= 2**64:
        errors.append(f"`seed` must fit in 64 bits: {p['seed']}")
    for name in ("atoms", "recordEvery", "workers", "nBeta", "points"):
        if p[name] < 1:
            errors.append(f"`{name}` must be >= 1: {p[name]}")
    for name in ("sigmaRho",):
        if p[name] < 0:
            errors.append(f"`{name}` must be >= 0: {p[name]}")
    for name in ("binWidth", "hbarEff", "wavelength", "kickPeriod"):
        if not p[name] > 0:
            errors.append(f"`{name}` must be positive: {p[name]}")
    if p["diffusionStart"] < 0:
        errors.append(f"`diffusionStart` must be >= 0: {p['diffusionStart']}")
    if p["rhoMax"] is not None and not p["rhoMax"] > 0:
        errors.append(f"`rhoMax` must be positive: {p['rhoMax']}")
    size = p["gridSize"]
    if size < 64 or size & (size - 1):
        errors.append(f"`gridSize` must be a power of two >= 64: {size}")
    if p["packetWidth"] is not None and not p["packetWidth"] > 0:
        errors.append(f"`packetWidth` must be positive: {p['packetWidth']}")
    if p["fixedBeta"] is not None and not 0 <= p["fixedBeta"] < 1:
        errors.append(f"`fixedBeta` must satisfy 0 <= beta < 1: {p['fixedBeta']}")
    if p["substeps"] is not None and p["substeps"] < 1:
        errors.append(f"`substeps` must be >= 1: {p['substeps']}")
    if not 0 < p["pulseWidth"] < p["kickPeriod"]:
        errors.append(
            f"`pulseWidth` must satisfy 0 < pulseWidth < kickPeriod: {p['pulseWidth']} vs {p['kickPeriod']}"
        )
    if p["mass"] is not None and not p["mass"] > 0:
        errors.append(f"`mass` must be positive: {p['mass']}")
    if p["potentialDepth"] < 0:
        errors.append(f"`potentialDepth` must be >= 0: {p['potentialDepth']}")
    if p["targetK"] is not None and p["targetK"] < 0:
        errors.append(f"`targetK` must be >= 0: {p['targetK']}")
    return errors


# ===========
# = loading =
# ===========

def _keyLines(text: str) -> dict:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError:
        return {}
    if not isinstance(node, yaml.MappingNode):
        return {}
    return {key.value: key.start_mark.line + 1 for key, _ in node.value if isinstance(key, yaml.ScalarNode)}


def _loadYAML(path: Path, text: str):
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as error:
        mark = getattr(error, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        problem = getattr(error, "problem", None) or str(error)
        location = f"{path}:{line}" if line else f"{path}"
        raise ConfigError(f"{location}: malformed config: {problem}", path=path, line=line) from None


def isManifest(data: dict) -> bool:
    return isinstance(data.get("parameters"), dict) and "toolVersion" in data


def loadConfig(path: Union[str, Path]) -> dict:
    """
    Reads a JSON or YAML config (or a run manifest) and returns its
    parameters, type checked.

    """
    from . import __version__

    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{path}: config file does not exist", path=path)
    text = path.read_text(encoding="utf-8")
    if not text.strip():
        data = {}
    elif path.suffix.lower() == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as error:
            raise ConfigError(
                f"{path}:{error.lineno}: malformed config: {error.msg}", path=path, line=error.lineno
            ) from None
    else:
        data = _loadYAML(path, text)
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a mapping of parameter names to values", path=path)

    lines = _keyLines(text)
    if isManifest(data):
        recorded = data["toolVersion"]
        try:
            if Version(str(recorded)) != Version(__version__):
                warnings.warn(f"{path} was written by version {recorded}, running {__version__}")
        except InvalidVersion:
            warnings.warn(f"{path} records an invalid tool version {recorded!r}")
        data = data["parameters"].get("resolved") or {}
        lines = {}
        logger.info("reusing resolved parameters from manifest %s", path)

    values, errors = coerceLayer(data, str(path), lines)
    if errors:
        first = errors[0]
        name = re.search(r"`(\w+)`", first)
        raise ConfigError(
            "\n".join(errors),
            path=path,
            line=next((lines[k] for k in data if k in lines and k not in values), None),
            field=name.group(1) if name else None,
        )
    return values


def resolveParameters(
    command: str,
    preset: Optional[str] = None,
    path: Optional[Union[str, Path]] = None,
    flags: Optional[dict] = None,
) -> dict:
    """
    Merges every layer and validates the result. Returns the layers and
    the resolved parameters, ready for the run manifest.

    """
    errors = []
    presetValues = {}
    if preset is not None:
        preset = presetName(preset)
        presetValues, presetErrors = coerceLayer(PRESETS[preset], f"preset {preset}")
        errors.extend(presetErrors)
    fileValues = loadConfig(path) if path is not None else {}
    flagValues, flagErrors = coerceLayer({k: v for k, v in (flags or {}).items() if v is not None}, "flag")
    errors.extend(flagErrors)
    if errors:
        raise ConfigError("\n".join(errors))

    resolved = {name: _coerce(name, value) for name, value in DEFAULTS.items()}
    for layer in (presetValues, fileValues, flagValues):
        resolved.update(layer)
    errors = checkInvariants(resolved)
    if errors:
        raise ConfigError("\n".join(errors))
    logger.debug("resolved %s parameters: %s", command, json.dumps(resolved, sort_keys=True))
    return dict(
        command=command,
        defaults={name: _coerce(name, value) for name, value in DEFAULTS.items()},
        preset=dict(name=preset, values=presetValues) if preset else None,
        file=dict(path=str(path), values=fileValues) if path is not None else None,
        flags=flagValues,
        resolved=resolved,
    )
