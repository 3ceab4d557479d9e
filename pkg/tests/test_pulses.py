import math

import numpy as np
import pytest
from pulsedRotor.pulses import (
    KickProfile,
    PulseShape,
    deltaProfile,
    firstZero,
    keffGeneral,
    keffSquare,
    keffSquareSlope,
    localBreakTime,
    localDiffusion,
    sinpi,
    squareProfile,
)

DUTY = 0.15
RHO_B = 2 * math.pi / DUTY


@pytest.fixture
def sampledSquare():
    times = np.linspace(-DUTY / 2, DUTY / 2, 2001)
    return PulseShape.sampled(times, np.ones_like(times))


def test_sinpi():
    assert sinpi(3.0) == 0.0
    assert sinpi(-7.0) == 0.0
    assert float(sinpi(0.5)) == pytest.approx(1.0)
    assert float(sinpi(1.5)) == pytest.approx(-1.0)


keffValues = {
    0.0: 5.3,
    RHO_B: 0.0,
    -RHO_B: 0.0,
    2 * RHO_B: 0.0,
    RHO_B / 2: 5.3 * 2 / math.pi,
    1.5 * RHO_B: -5.3 * 2 / (3 * math.pi),
}


@pytest.mark.parametrize("rho, expected", keffValues.items())
def test_keffSquare(rho, expected):
    value = keffSquare(rho, 5.3, RHO_B)
    assert isinstance(value, float)
    assert value == pytest.approx(expected, abs=1e-12)


def test_keffSquare_boundaryIsExact():
    rhoB = 13.5 * math.pi
    assert keffSquare(rhoB, 5.3, rhoB) == 0.0
    assert keffSquare(-rhoB, 5.3, rhoB) == 0.0
    for n in range(2, 6):
        assert abs(keffSquare(n * rhoB, 5.3, rhoB)) < 1e-14


def test_keffSquare_array():
    rho = np.linspace(-3 * RHO_B, 3 * RHO_B, 101)
    values = keffSquare(rho, 5.3, RHO_B)
    assert values.shape == rho.shape
    assert np.allclose(values, values[::-1])
    assert np.abs(values).max() == pytest.approx(5.3)


def test_keffSquare_invalid():
    with pytest.raises(ValueError):
        keffSquare(1.0, 5.3, 0.0)


def test_keffSquareSlope():
    rho = np.array([0.0, 5.0, 13.0, RHO_B, 55.0])
    h = 1e-5
    numeric = (keffSquare(rho + h, 5.3, RHO_B) - keffSquare(rho - h, 5.3, RHO_B)) / (2 * h)
    assert np.allclose(keffSquareSlope(rho, 5.3, RHO_B), numeric, atol=1e-7)
    assert float(keffSquareSlope(RHO_B, 5.3, RHO_B)) == pytest.approx(-5.3 / RHO_B)


def test_pulseShape_properties(sampledSquare):
    square = PulseShape.square(DUTY)
    assert square.area == DUTY
    assert square.support == (-DUTY / 2, DUTY / 2)
    assert square.isSymmetric
    assert str(square) == "<PulseShape: square η=0.15>"

    delta = PulseShape.delta()
    assert delta.area == 1.0
    assert delta.width == 0.0
    assert delta.equivalentDuty == 0.0

    assert sampledSquare.area == pytest.approx(DUTY, rel=1e-12)
    assert sampledSquare.width == pytest.approx(DUTY)
    assert sampledSquare.isSymmetric
    assert sampledSquare.equivalentDuty == pytest.approx(DUTY, rel=1e-12)

    shifted = PulseShape.sampled([0.0, 0.05, 0.1], [1.0, 1.0, 1.0])
    assert not shifted.isSymmetric


def test_sampledSquare_matchesSinc():
    times = np.linspace(-DUTY / 2, DUTY / 2, 20001)
    pulse = PulseShape.sampled(times, np.ones_like(times))
    K = 5.3
    rho = np.linspace(-3 * RHO_B, 3 * RHO_B, 601)
    sampled = (K / DUTY) * pulse.transform(rho)
    exact = keffSquare(rho, K, RHO_B)
    assert np.abs(sampled.real - exact).max() < 1e-6
    assert np.abs(sampled.imag).max() < 1e-9


def test_sampledSquare_coarseGrid(sampledSquare):
    # 2001 samples: trapezoid error h²/12·2ρ·K/η stays below 4.2e-6 out to 3ρ_b
    K = 5.3
    rho = np.linspace(-3 * RHO_B, 3 * RHO_B, 601)
    sampled = (K / DUTY) * sampledSquare.transform(rho)
    exact = keffSquare(rho, K, RHO_B)
    assert np.abs(sampled.real - exact).max() < 5e-6
    assert np.abs(sampled.imag).max() < 1e-9


def test_gaussianPulse_transform():
    width = 0.02
    times = np.linspace(-0.2, 0.2, 4001)
    pulse = PulseShape.sampled(times, np.exp(-(times**2) / (2 * width**2)))
    rho = np.linspace(0.0, 100.0, 201)
    exact = width * math.sqrt(2 * math.pi) * np.exp(-(rho**2) * width**2 / 2)
    values = pulse.transform(rho)
    assert np.abs(values.real - exact).max() / exact.max() < 1e-4
    assert np.abs(values.real / exact - 1).max() < 1e-4


def test_transformSlope(sampledSquare):
    rho = np.array([1.0, 17.0, 40.0])
    h = 1e-4
    numeric = (sampledSquare.transform(rho + h) - sampledSquare.transform(rho - h)) / (2 * h)
    assert np.allclose(sampledSquare.transformSlope(rho), numeric, atol=1e-8)


def test_firstZero():
    assert firstZero(squareProfile(5.3, 41.0)) == pytest.approx(41.0, abs=1e-8)
    assert math.isinf(firstZero(deltaProfile(5.3)))


def test_firstZero_sampled(sampledSquare):
    profile = keffGeneral(sampledSquare, 5.3 / DUTY)
    assert profile.firstZero == pytest.approx(RHO_B, abs=1e-6)
    assert profile.peak == pytest.approx(5.3, rel=1e-12)


def test_firstZero_touchingZero():
    # triangle pulse: F(ρ) = a·(sin(ρa/2)/(ρa/2))², zero without sign change at 2π/a
    a = 0.1
    times = np.linspace(-a, a, 2001)
    pulse = PulseShape.sampled(times, 1 - np.abs(times) / a)
    profile = keffGeneral(pulse, 1.0)
    assert profile.symmetric
    assert profile.firstZero == pytest.approx(2 * math.pi / a, rel=1e-5)


def test_firstZero_asymmetric():
    times = np.linspace(0.0, DUTY, 2001)
    pulse = PulseShape.sampled(times, np.ones_like(times))
    profile = keffGeneral(pulse, 5.3 / DUTY)
    assert not profile.symmetric
    assert profile.firstZero == pytest.approx(RHO_B, abs=1e-6)
    # the delay shows up as a phase ρ·η/2
    assert profile.phase(10.0) == pytest.approx(10.0 * DUTY / 2, abs=1e-6)
    assert profile.amplitude(10.0) == pytest.approx(abs(keffSquare(10.0, 5.3, RHO_B)), rel=1e-5)


def test_kickProfile_square():
    profile = squareProfile(5.3, 13.5 * math.pi)
    assert profile.peak == 5.3
    assert profile.firstZero == 13.5 * math.pi
    rho = np.array([0.0, 13.5 * math.pi, 13.5 * math.pi + 1.0])
    amplitude, phase = profile.kick(rho)
    assert phase is None
    assert amplitude[0] == 5.3
    assert amplitude[1] == 0.0
    assert amplitude[2] < 0
    assert profile.phase(13.5 * math.pi + 1.0) == pytest.approx(math.pi)


def test_kickProfile_sampledTable(sampledSquare):
    profile = keffGeneral(sampledSquare, 5.3 / DUTY)
    rho = np.linspace(-4 * RHO_B, 4 * RHO_B, 977)
    amplitude, phase = profile.kick(rho)
    assert phase is None
    assert np.abs(amplitude - keffSquare(rho, 5.3, RHO_B)).max() < 1e-4 * 5.3
    # beyond the table the transform is evaluated directly
    far = np.array([5 * RHO_B + 3.0])
    amplitude, _ = profile.kick(far)
    assert amplitude[0] == pytest.approx(keffSquare(far[0], 5.3, RHO_B), abs=1e-4)


def test_kickProfile_slope(sampledSquare):
    profile = keffGeneral(sampledSquare, 5.3 / DUTY)
    rho = np.array([3.0, 20.0, 35.0])
    expected = keffSquareSlope(rho, 5.3, RHO_B)
    assert np.allclose(profile.slope(rho).real, expected, atol=1e-3)
    assert np.allclose(squareProfile(5.3, RHO_B).slope(rho).real, expected)
    assert not deltaProfile(5.3).slope(rho).any()


def test_localDiffusion():
    profile = squareProfile(5.3, RHO_B)
    assert localDiffusion(profile, 0.0) == pytest.approx(5.3**2 / 2)
    assert localDiffusion(profile, RHO_B) == 0.0
    assert localBreakTime(profile, 0.0, 2.0) == pytest.approx((5.3 / 2.0) ** 2 / 2)


invalidPulses = {
    "duty above one": PulseShape.square(1.2),
    "zero duty": PulseShape.square(0.0),
    "times not increasing": PulseShape.sampled([0.0, -0.1, 0.1], [1.0, 1.0, 1.0]),
    "times outside the period": PulseShape.sampled([-0.6, 0.0, 0.6], [1.0, 1.0, 1.0]),
    "single point": PulseShape.sampled([0.0], [1.0]),
    "length mismatch": PulseShape(kind="sampled", times=(0.0, 0.1), amplitudes=(1.0,)),
}


@pytest.mark.parametrize("name, pulse", invalidPulses.items())
def test_pulseValidation(name, pulse):
    assert not pulse.validate()
    with pytest.raises(ValueError):
        KickProfile(pulse, 1.0)


def test_fromCSV(tmp_path):
    path = tmp_path / "pulse.csv"
    path.write_text("tau,f\n# gaussian\n-0.05,0.1\n0.0,1.0\n0.05,0.1\n", encoding="utf-8")
    pulse = PulseShape.fromCSV(path)
    assert pulse.kind == "sampled"
    assert pulse.times == (-0.05, 0.0, 0.05)
    assert pulse.isSymmetric

    broken = tmp_path / "broken.csv"
    broken.write_text("tau,f\n0.0,1.0\n0.1,oops\n", encoding="utf-8")
    with pytest.raises(ValueError, match="broken.csv:3"):
        PulseShape.fromCSV(broken)

    unordered = tmp_path / "unordered.csv"
    unordered.write_text("0.1,1.0\n0.0,1.0\n", encoding="utf-8")
    with pytest.raises(ValueError):
        PulseShape.fromCSV(unordered)


if __name__ == "__main__":
    import pytest

    pytest.main([__file__])
