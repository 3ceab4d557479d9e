import json
import math

import pytest
from pulsedRotor import __version__
from pulsedRotor.config import (
    DEFAULTS,
    FIELDS,
    PRESET_ALIASES,
    PRESET_NAMES,
    PRESETS,
    ConfigError,
    checkInvariants,
    coerceLayer,
    loadConfig,
    parseAngle,
    parseGrid,
    parseRange,
    presetName,
    resolveParameters,
)

angles = {
    "13.5pi": 13.5 * math.pi,
    "-13.5pi": -13.5 * math.pi,
    "pi": math.pi,
    "-pi": -math.pi,
    "2*pi": 2 * math.pi,
    "3π": 3 * math.pi,
    "1.5": 1.5,
    "-2e-3": -2e-3,
    4: 4.0,
}


@pytest.mark.parametrize("text, value", angles.items())
def test_parseAngle(text, value):
    assert parseAngle(text) == pytest.approx(value, rel=1e-15)


@pytest.mark.parametrize("text", ["abc", "pi pi", "", True])
def test_parseAngle_invalid(text):
    with pytest.raises(ValueError):
        parseAngle(text)


ranges = {
    "0:73:2": [float(v) for v in range(0, 73, 2)],
    "0:4:2": [0.0, 2.0, 4.0],
    "0:5:2": [0.0, 2.0, 4.0],
    "1, 2,3": [1.0, 2.0, 3.0],
    "-pi,pi": [-math.pi, math.pi],
}


@pytest.mark.parametrize("text, values", ranges.items())
def test_parseRange(text, values):
    assert parseRange(text) == pytest.approx(values)


def test_parseRange_invalid():
    for text in ("0:10:0", "10:0:1", "0:1", "0:1:2:3"):
        with pytest.raises(ValueError):
            parseRange(text)


def test_parseGrid():
    assert parseGrid("20x20") == (20, 20)
    assert parseGrid("20X10") == (20, 10)
    assert parseGrid([4, 5]) == (4, 5)
    for text in ("20", "20x", "0x3", "ax3"):
        with pytest.raises(ValueError):
            parseGrid(text)


def test_schema():
    assert set(DEFAULTS) == set(FIELDS)
    for name, preset in PRESETS.items():
        values, errors = coerceLayer(preset, name)
        assert not errors, name
        assert set(values) == set(preset)


def test_coerceLayer():
    values, errors = coerceLayer({"stochasticity": "5.3", "grid": "3x4", "foo": 1, "kicks": "many"}, "flag")
    assert values == {"stochasticity": 5.3, "grid": [3, 4]}
    assert len(errors) == 2
    assert any("unknown parameter `foo`" in e for e in errors)
    assert any("`kicks`" in e for e in errors)


def test_checkInvariants():
    p = resolveParameters("poincare")["resolved"]
    assert checkInvariants(p) == []
    assert checkInvariants({**p, "duty": 1.2})
    assert checkInvariants({**p, "rhoB": 5.0})
    # rhoB overrides the duty cycle
    assert checkInvariants({**p, "duty": 1.2, "rhoB": 42.0}) == []
    assert checkInvariants({**p, "gridSize": 1000})
    assert checkInvariants({**p, "pulseWidth": 2e-5})


def test_resolveParameters_defaults():
    parameters = resolveParameters("sweep")
    resolved = parameters["resolved"]
    assert parameters["command"] == "sweep"
    assert parameters["preset"] is None
    assert parameters["file"] is None
    assert resolved["stochasticity"] == 5.3
    assert resolved["rhoLValues"] == [float(v) for v in range(0, 73, 2)]
    assert resolved == parameters["defaults"]


def test_resolveParameters_precedence(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("stochasticity: 3\nkicks: 50\n", encoding="utf-8")
    parameters = resolveParameters("poincare", "fig1-left", path, {"stochasticity": "4", "seed": None})
    resolved = parameters["resolved"]
    assert resolved["stochasticity"] == 4.0
    assert resolved["kicks"] == 50
    assert resolved["rhoB"] == pytest.approx(13.5 * math.pi)
    assert resolved["grid"] == [20, 20]
    assert resolved["seed"] == 0
    assert parameters["preset"]["values"]["kicks"] == 120
    assert parameters["file"]["values"] == {"stochasticity": 3.0, "kicks": 50}
    assert parameters["flags"] == {"stochasticity": 4.0}


aliases = {
    "confinement": "fig1-left",
    "boundary-line": "fig1-right",
    "asymmetry-sweep": "fig3-sweep",
}


@pytest.mark.parametrize("alias, name", aliases.items())
def test_presetAliases(alias, name):
    assert PRESET_ALIASES[alias] == name
    assert presetName(alias) == name
    assert presetName(name) == name
    assert alias in PRESET_NAMES and name in PRESET_NAMES
    parameters = resolveParameters("sweep", alias)
    assert parameters["preset"]["name"] == name
    assert parameters["resolved"] == resolveParameters("sweep", name)["resolved"]


def test_sweepPreset():
    resolved = resolveParameters("sweep", "fig3-sweep")["resolved"]
    assert resolved["scheme"] == "randomPhase"
    assert resolved["stochasticity"] == 5.3
    assert resolved["duty"] == 0.15
    assert resolved["sigmaRho"] == 4.0
    assert resolved["atoms"] == 100000
    assert resolved["kicks"] == 120
    assert resolved["rhoLValues"][:3] == [0.0, 2.0, 4.0]
    with pytest.raises(ConfigError, match="preset"):
        presetName("fig2")


def test_resolveParameters_invalid(tmp_path):
    with pytest.raises(ConfigError, match="duty"):
        resolveParameters("poincare", flags={"duty": "1.2"})
    with pytest.raises(ConfigError, match="preset"):
        resolveParameters("poincare", preset="chaos")
    with pytest.raises(ConfigError):
        resolveParameters("poincare", path=tmp_path / "missing.yaml")
    with pytest.raises(ConfigError, match="scheme"):
        resolveParameters("ensemble", flags={"scheme": "leapfrog"})


def test_loadConfig_json(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"rhoB": "13.5pi", "grid": "20x10", "rhoRange": ["-15.5pi", "-11.5pi"]}), encoding="utf-8")
    values = loadConfig(path)
    assert values["rhoB"] == pytest.approx(13.5 * math.pi)
    assert values["grid"] == [20, 10]
    assert values["rhoRange"] == pytest.approx([-15.5 * math.pi, -11.5 * math.pi])


def test_loadConfig_empty(tmp_path):
    path = tmp_path / "empty.yaml"
    path.write_text("\n", encoding="utf-8")
    assert loadConfig(path) == {}


def test_loadConfig_unknownKey(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("stochasticity: 3\nfoo: 1\n", encoding="utf-8")
    with pytest.raises(ConfigError) as error:
        loadConfig(path)
    assert error.value.line == 2
    assert error.value.field == "foo"
    assert "run.yaml:2" in str(error.value)


def test_loadConfig_malformedYAML(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("stochasticity: 3\nduty: [0.1, 0.2\nkicks: 5\n", encoding="utf-8")
    with pytest.raises(ConfigError) as error:
        loadConfig(path)
    assert error.value.line is not None
    assert "malformed config" in str(error.value)


def test_loadConfig_malformedJSON(tmp_path):
    path = tmp_path / "run.json"
    path.write_text('{"stochasticity": 3,\n}\n', encoding="utf-8")
    with pytest.raises(ConfigError) as error:
        loadConfig(path)
    assert error.value.line == 2


def test_loadConfig_notMapping(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("- 1\n- 2\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="mapping"):
        loadConfig(path)


def test_loadConfig_manifest(tmp_path):
    resolved = resolveParameters("ensemble", flags={"atoms": "500"})["resolved"]
    path = tmp_path / "manifest.json"
    data = dict(command="ensemble", parameters=dict(resolved=resolved), toolVersion=__version__, outputs={})
    path.write_text(json.dumps(data), encoding="utf-8")
    assert loadConfig(path) == resolved

    data["toolVersion"] = "0.0.1"
    path.write_text(json.dumps(data), encoding="utf-8")
    with pytest.warns(UserWarning, match="0.0.1"):
        assert loadConfig(path)["atoms"] == 500


if __name__ == "__main__":
    import pytest

    pytest.main([__file__])
