"""
Output files of a run: versioned CSV tables, JSON reports and the run
manifest that lists every output with its sha256 digest.

"""
import csv
import hashlib
import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from shutil import rmtree

import numpy as np
from typing_extensions import Any, Optional, Self, Union

logger = logging.getLogger(__name__)

CSV_SCHEMA = 1
TOOL_NAME = "pulsed-rotor"


def _toolVersion() -> str:
    from . import __version__

    return __version__


def fileDigest(path: Union[str, Path]) -> str:
    """
    sha256 of a file, read in 1 MB chunks.

    """
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        while True:
            buf = f.read(1024 * 1024)
            if not buf:
                break
            digest.update(buf)
    return digest.hexdigest()


def formatCell(value: Any) -> str:
    """Floats round-trip through `repr`; None is an empty cell."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def csvHeaderLine(schema: int = CSV_SCHEMA) -> str:
    return f"# {TOOL_NAME} v{_toolVersion()} schema={schema}"


def writeCSV(path: Union[str, Path], header: list[str], rows, schema: int = CSV_SCHEMA):
    """
    Writes a CSV table whose first line is the schema comment.

    """
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(csvHeaderLine(schema) + "\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            assert len(row) == len(header), f"row {row} does not match header {header}"
            writer.writerow([formatCell(cell) for cell in row])


def readCSV(path: Union[str, Path]) -> tuple[list[str], list[list[str]]]:
    """Header and rows of a CSV written by writeCSV, comment lines skipped."""
    with open(path, encoding="utf-8", newline="") as f:
        lines = [line for line in f if not line.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    return header, list(reader)


def _jsonDefault(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"not JSON serializable: {value!r}")


def dumpJSON(data: Any) -> str:
    return json.dumps(data, indent=2, sort_keys=True, default=_jsonDefault, allow_nan=True) + "\n"


@dataclass
class RunManifest:
    """Subcommand that produced the outputs."""
    command: Optional[str] = None

    """Parameter layers: defaults, preset, file, flags and the resolved set."""
    parameters: dict = field(default_factory=dict)

    """Laboratory parameters, SI units, when the run has them."""
    physical: dict = field(default_factory=dict)

    """Dimensionless parameters of the run."""
    scaled: dict = field(default_factory=dict)

    """Seed of every random stream of the run."""
    seed: Optional[int] = None

    """Version of the tool that wrote the outputs."""
    toolVersion: Optional[str] = None

    """ISO-8601 time the run finished, set when the manifest is saved."""
    timeStamp: Optional[str] = None

    """Output file name → sha256 digest."""
    outputs: dict = field(default_factory=dict)

    """Folder holding the outputs."""
    path: Optional[Path] = None

    # constants
    fileName = "manifest.json"

    # private
    _errors: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.path is not None:
            self.path = Path(self.path)
        if self.toolVersion is None:
            self.toolVersion = _toolVersion()

    def __repr__(self) -> str:
        name = "None" if self.path is None else self.path.name
        return f"<RunManifest: {self.command} in {name}>"

    # =========
    # = paths =
    # =========

    @property
    def manifestPath(self) -> Optional[Path]:
        if self.path is None:
            return None
        return self.path / self.fileName

    @property
    def resolved(self) -> dict:
        return self.parameters.get("resolved", {})

    # ================
    # = load or save =
    # ================

    def infoDictionary(self) -> dict[str, Any]:
        return dict(
            command=self.command,
            parameters=self.parameters,
            physical=self.physical,
            scaled=self.scaled,
            seed=self.seed,
            toolVersion=self.toolVersion,
            timeStamp=self.timeStamp,
            outputs=self.outputs,
        )

    def load(self, path: Union[str, Path]) -> Self:
        """
        Loads a manifest file, or the manifest inside an output folder.

        """
        path = Path(path)
        if path.is_dir():
            path = path / self.fileName
        assert path.exists(), f"{path} is missing, required to load the manifest"
        data = json.loads(path.read_text(encoding="utf-8"))
        self.command = data.get("command")
        self.parameters = data.get("parameters", {})
        self.physical = data.get("physical", {})
        self.scaled = data.get("scaled", {})
        self.seed = data.get("seed")
        self.toolVersion = data.get("toolVersion")
        self.timeStamp = data.get("timeStamp")
        self.outputs = data.get("outputs", {})
        self.path = path.parent
        return self

    def save(self, folder: Union[str, Path]) -> Path:
        """
        Digests every listed output in `folder` and writes the manifest there.

        """
        folder = Path(folder)
        for name in self.outputs:
            self.outputs[name] = fileDigest(folder / name)
        self.timeStamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
        manifestPath = folder / self.fileName
        manifestPath.write_text(dumpJSON(self.infoDictionary()), encoding="utf-8")
        self.path = folder
        return manifestPath

    def verify(self, folder: Optional[Union[str, Path]] = None) -> list[str]:
        """
        Names of outputs that are missing or whose digest changed.

        """
        folder = Path(folder) if folder is not None else self.path
        assert folder is not None, "no folder to verify"
        changed = []
        for name, digest in sorted(self.outputs.items()):
            filePath = folder / name
            if not filePath.exists() or fileDigest(filePath) != digest:
                changed.append(name)
        return changed

    # ==============
    # = validation =
    # ==============

    def validate(self) -> bool:
        """
        Checks the manifest is complete enough to re-run the command.

        """
        self._errors = []
        if not isinstance(self.command, str) or not self.command:
            self._errors.append(f"Command should be a non-empty string: {self.command}")
        if not isinstance(self.parameters.get("resolved"), dict):
            self._errors.append("Parameters must contain the `resolved` parameter set")
        if self.seed is not None and not (isinstance(self.seed, int) and 0 <= self.seed < 2**64):
            self._errors.append(f"Seed should be a 64-bit unsigned integer: {self.seed}")
        if not isinstance(self.toolVersion, str):
            self._errors.append(f"Tool version should be a string: {self.toolVersion}")
        if self.timeStamp is not None:
            try:
                datetime.fromisoformat(self.timeStamp)
            except ValueError:
                self._errors.append(f"Time stamp is not ISO-8601: {self.timeStamp}")
        for name, digest in self.outputs.items():
            if not (isinstance(digest, str) and len(digest) == 64):
                self._errors.append(f"Output `{name}` has no sha256 digest")
        for key in ("physical", "scaled"):
            for name, value in getattr(self, key).items():
                if isinstance(value, float) and not math.isfinite(value):
                    self._errors.append(f"{key.title()} parameter `{name}` is not finite: {value}")
        return not bool(self._errors)

    def validationErrors(self) -> str:
        """
        Returns the validation errors as a string.

        """
        self.validate()
        return "\n".join(self._errors)


class ArtifactWriter:
    """
    Stages output files in a hidden temporary folder inside `folder` and
    moves them into place, manifest last, when the block exits cleanly. On
    error the staging folder is removed and nothing in `folder` changes.

        with ArtifactWriter(folder, manifest) as writer:
            writer.writeCSV("keff.csv", header, rows)

    """

    def __init__(self, folder: Union[str, Path], manifest: Optional[RunManifest] = None):
        self.folder = Path(folder)
        self.manifest = manifest
        self.stagingFolder: Optional[Path] = None
        self.names: list[str] = []

    def __enter__(self) -> Self:
        self.folder.mkdir(parents=True, exist_ok=True)
        self.stagingFolder = Path(tempfile.mkdtemp(prefix=".staging-", dir=self.folder))
        return self

    def __exit__(self, excType, exc, traceback):
        try:
            if excType is None:
                self.commit()
        finally:
            if self.stagingFolder is not None and self.stagingFolder.exists():
                rmtree(self.stagingFolder)
        return False

    def stagedPath(self, name: str) -> Path:
        assert self.stagingFolder is not None, "writer is not open"
        assert Path(name).name == name, f"output names must be plain file names: {name}"
        if name not in self.names:
            self.names.append(name)
        return self.stagingFolder / name

    def writeCSV(self, name: str, header: list[str], rows, schema: int = CSV_SCHEMA) -> Path:
        path = self.stagedPath(name)
        writeCSV(path, header, rows, schema)
        return self.folder / name

    def writeJSON(self, name: str, data: Any) -> Path:
        self.stagedPath(name).write_text(dumpJSON(data), encoding="utf-8")
        return self.folder / name

    def commit(self):
        names = list(self.names)
        if self.manifest is not None:
            self.manifest.outputs = {name: "" for name in names}
            self.manifest.save(self.stagingFolder)
            names.append(RunManifest.fileName)
        for name in names:
            os.replace(self.stagingFolder / name, self.folder / name)
        if self.manifest is not None:
            self.manifest.path = self.folder
        logger.info("wrote %s to %s", ", ".join(names), self.folder)
