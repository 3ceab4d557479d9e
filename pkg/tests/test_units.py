import math

import numpy as np
import pytest
from pulsedRotor.units import (
    CESIUM_MASS,
    CESIUM_WAVELENGTH,
    PhysicalParams,
    ScaledParams,
    boundaryMomentum,
    latticeMomentum,
    latticeVelocity,
    physicalMomentum,
    potentialDepthForStochasticity,
    recoilFrequency,
    scaleParams,
    scaledMomentum,
    stochasticityFromDepth,
)


@pytest.fixture
def cesiumParams():
    return PhysicalParams.cesium(pulseWidth=1.42e-6, kickPeriod=9.47e-6, frequencyOffset=1e6)


def test_recoilFrequency():
    assert recoilFrequency(CESIUM_MASS, CESIUM_WAVELENGTH) == pytest.approx(12994, rel=1e-3)
    with pytest.raises(ValueError):
        recoilFrequency(-1.0, CESIUM_WAVELENGTH)
    with pytest.raises(ValueError):
        recoilFrequency(CESIUM_MASS, 0.0)


def test_scaleParams_cesium(cesiumParams):
    scaled = scaleParams(cesiumParams)
    assert scaled.duty == pytest.approx(0.150, abs=0.001)
    assert scaled.hbarEff == pytest.approx(0.98, abs=0.01)
    assert scaled.latticeMomentum == pytest.approx(119.0, abs=0.5)
    assert scaled.boundaryMomentum == pytest.approx(2 * math.pi / scaled.duty, rel=1e-12)
    assert scaled.boundaryMomentum == pytest.approx(41.9, abs=0.05)


def test_boundaryMomentum_identity():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        mass = 10 ** rng.uniform(-27, -24)
        wavelength = rng.uniform(300e-9, 1500e-9)
        kickPeriod = 10 ** rng.uniform(-7, -3)
        pulseWidth = kickPeriod * rng.uniform(1e-3, 0.99)
        p = PhysicalParams(
            atomMass=mass,
            wavelength=wavelength,
            pulseWidth=pulseWidth,
            kickPeriod=kickPeriod,
            frequencyOffset=rng.uniform(-1e7, 1e7),
        )
        scaled = scaleParams(p)
        assert math.isclose(scaled.boundaryMomentum, 2 * math.pi / p.duty, rel_tol=1e-10)
        assert math.isclose(
            scaled.latticeMomentum, 4 * math.pi * kickPeriod * p.frequencyOffset, rel_tol=1e-10, abs_tol=1e-12
        )


def test_boundaryMomentum_deltaPulse():
    p = PhysicalParams(pulseWidth=0.0)
    with pytest.raises(ValueError):
        boundaryMomentum(p, 1.0)


def test_latticeMomentum_atRest():
    p = PhysicalParams.cesium(pulseWidth=1.42e-6, kickPeriod=9.47e-6)
    assert latticeMomentum(p, 1.0) == 0.0


def test_stochasticity(cesiumParams):
    depth = potentialDepthForStochasticity(5.3, cesiumParams)
    assert depth > 0
    p = PhysicalParams.cesium(
        pulseWidth=cesiumParams.pulseWidth,
        kickPeriod=cesiumParams.kickPeriod,
        potentialDepth=depth,
        frequencyOffset=cesiumParams.frequencyOffset,
    )
    scaled = scaleParams(p)
    assert scaled.stochasticity == pytest.approx(5.3, rel=1e-12)
    assert stochasticityFromDepth(p) == pytest.approx(scaled.stochasticity, rel=1e-12)
    assert scaled.kickAmplitude == pytest.approx(5.3 / p.duty, rel=1e-12)

    with pytest.raises(ValueError):
        potentialDepthForStochasticity(-1.0, cesiumParams)


def test_momentumConversion(cesiumParams):
    momentum = 3.2e-27
    rho = scaledMomentum(momentum, cesiumParams)
    assert physicalMomentum(rho, cesiumParams) == pytest.approx(momentum, rel=1e-12)
    assert latticeVelocity(cesiumParams) == pytest.approx(0.852, rel=1e-12)


invalidParams = {
    "duty above one": dict(pulseWidth=2e-5, kickPeriod=1e-5),
    "negative depth": dict(potentialDepth=-1.0),
    "zero mass": dict(atomMass=0.0),
    "negative wavelength": dict(wavelength=-852e-9),
    "infinite offset": dict(frequencyOffset=math.inf),
}


@pytest.mark.parametrize("name, values", invalidParams.items())
def test_validation(name, values):
    p = PhysicalParams(**values)
    assert not p.validate()
    assert p.validationErrors()
    with pytest.raises(ValueError):
        scaleParams(p)


def test_validation_errorMessage():
    p = PhysicalParams(pulseWidth=2e-5, kickPeriod=1e-5)
    assert "pulseWidth" in p.validationErrors()
    assert PhysicalParams().validate()


def test_dimensionless():
    scaled = ScaledParams.dimensionless(5.3, 0.15)
    assert scaled.recoilFrequency is None
    assert scaled.boundaryMomentum == pytest.approx(41.8879, abs=1e-4)
    assert scaled.kickAmplitude == pytest.approx(5.3 / 0.15)
    assert scaled.asDict()["stochasticity"] == 5.3
    with pytest.raises(ValueError):
        ScaledParams.dimensionless(5.3, 1.2)


if __name__ == "__main__":
    import pytest

    pytest.main([__file__])
