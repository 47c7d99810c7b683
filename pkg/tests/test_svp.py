import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lakekeeper.errors import ConfigError, DomainError, FormatError
from lakekeeper.svp import SvpCast, correct_range, effective_speed, read_cast, write_cast

# closed-form harmonic mean of two equal-thickness constant layers,
# computed before the implementation existed: 2 / (1/1450 + 1/1500)
TWO_LAYER_MEAN = 1474.5762711864407


def two_layer_cast():
    # a 1e-9 m transition realizes the speed step within the
    # piecewise-linear representation
    return SvpCast([(0.0, 1450.0), (1.0, 1450.0), (1.0 + 1e-9, 1500.0), (2.0, 1500.0)])


def test_two_constant_layers_harmonic_mean():
    c = effective_speed(two_layer_cast(), 2.0)
    assert c == pytest.approx(TWO_LAYER_MEAN, rel=1e-6)


def test_surface_limit_is_first_sample_speed():
    cast = SvpCast([(0.5, 1480.0), (5.0, 1490.0)])
    assert effective_speed(cast, 0.0) == 1480.0
    assert effective_speed(cast, 0.25) == 1480.0  # constant above first sample


def test_linear_ramp_against_quadrature():
    cast = SvpCast([(0.0, 1450.0), (10.0, 1550.0)])
    z = 7.3
    # numeric quadrature oracle for the travel-time integral
    zs = np.linspace(0.0, z, 200001)
    cz = 1450.0 + (1550.0 - 1450.0) / 10.0 * zs
    itime = np.trapezoid(1.0 / cz, zs)
    assert effective_speed(cast, z) == pytest.approx(z / itime, rel=1e-9)


def test_constant_extrapolation_below_last_sample():
    cast = SvpCast([(0.0, 1500.0)])
    assert effective_speed(cast, 123.0) == 1500.0


def test_correct_range_is_half_t_times_speed():
    cast = SvpCast([(0.0, 1480.0), (6.0, 1480.0)])
    r = correct_range(2 * 3.0 / 1480.0, cast, nominal_depth=3.0)
    assert r == pytest.approx(3.0, abs=1e-12)


def test_roundtrip_identity():
    cast = SvpCast([(0.0, 1440.0), (2.0, 1490.0), (6.0, 1510.0)])
    for r in (1.0, 2.5, 4.9):
        t = 2.0 * r / effective_speed(cast, r)
        assert correct_range(t, cast, nominal_depth=r) == pytest.approx(r, abs=1e-9)


def test_wrong_profile_bias_magnitude():
    # data simulated at 1500 m/s, corrected with a 1480 m/s cast:
    # depth error = 3 * (1500/1480 - 1) = +0.0405405... m at 3 m
    actual = SvpCast([(0.0, 1500.0), (6.0, 1500.0)])
    assumed = SvpCast([(0.0, 1480.0), (6.0, 1480.0)])
    t = 2 * 3.0 / effective_speed(actual, 3.0)
    wrong = correct_range(t, assumed, nominal_depth=3.0)
    bias = 3.0 - wrong
    assert bias == pytest.approx(3.0 * (1.0 - 1480.0 / 1500.0), abs=1e-12)
    assert bias == pytest.approx(0.04, abs=0.001)


@given(
    bump=st.floats(0.5, 40.0),
    z=st.floats(0.1, 8.0),
)
def test_raising_a_layer_never_lowers_effective_speed(bump, z):
    base = [(0.0, 1450.0), (3.0, 1470.0), (8.0, 1490.0)]
    cast = SvpCast(base)
    raised = SvpCast([(d, c + bump) for d, c in base])
    assert effective_speed(raised, z) >= effective_speed(cast, z) - 1e-9


def test_validation():
    with pytest.raises(ConfigError):
        SvpCast([])
    with pytest.raises(ConfigError):
        SvpCast([(0.0, 1450.0), (0.0, 1460.0)])  # depths not strictly increasing
    with pytest.raises(ConfigError):
        SvpCast([(0.0, 1300.0)])  # speed out of range
    with pytest.raises(ConfigError):
        SvpCast([(-1.0, 1450.0)])
    cast = SvpCast([(0.0, 1480.0)])
    with pytest.raises(DomainError):
        correct_range(0.0, cast)
    with pytest.raises(DomainError):
        effective_speed(cast, -1.0)


def test_csv_roundtrip(tmp_path):
    cast = SvpCast([(0.0, 1440.5), (2.25, 1490.125)], timestamp="2026-08-17T09:30:00Z")
    path = str(tmp_path / "cast.csv")
    write_cast(cast, path)
    header = open(path).readline().strip()
    assert header == "depth_m,sound_speed_mps"
    back = read_cast(path)
    assert np.array_equal(back.depths, cast.depths)
    assert np.array_equal(back.speeds, cast.speeds)
    assert back.timestamp == cast.timestamp


def test_csv_rejects_wrong_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("depth,speed\n0,1480\n")
    with pytest.raises(FormatError):
        read_cast(str(path))
    path.write_text("depth_m,sound_speed_mps\n0,notanumber\n")
    with pytest.raises(FormatError):
        read_cast(str(path))
