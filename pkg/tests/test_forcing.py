import numpy as np
import pytest

from cryoflow.errors import ConfigError
from cryoflow.forcing import YEAR, AspectForcing, ClimateForcing, load_forcing, sinusoidal_forcing, write_forcing

HEADER = "time_s,precip_m_s,pet_m_s,t_north_c,t_south_c\n"


def two_point():
    return ClimateForcing([0.0, YEAR / 2], [0.0, 2e-8], [1.0, 3.0], [-10.0, 10.0], [-7.0, 13.0])


def test_linear_interpolation_and_wrap():
    f = two_point()
    assert f.value("pet", YEAR / 4) == pytest.approx(2.0, rel=1e-15)
    # last breakpoint interpolates back to the first one year later
    assert f.value("pet", 3 * YEAR / 4) == pytest.approx(2.0, rel=1e-15)
    assert f.value("t_north", YEAR + YEAR / 4) == pytest.approx(0.0, abs=1e-12)


def test_breakpoint_exact():
    f = two_point()
    assert f.value("pet", YEAR / 2) == 3.0
    assert f.value("t_south", 0.0) == -7.0
    assert f.value("t_south", 5 * YEAR) == -7.0


def test_three_quarter_point():
    f = ClimateForcing([0.0, 100.0], [0.0, 0.0], [1.0, 3.0], [0.0, 0.0], [0.0, 0.0])
    assert f.value("pet", 75.0) == 2.5


def test_next_breakpoint():
    f = two_point()
    assert f.next_breakpoint(0.0) == YEAR / 2
    assert f.next_breakpoint(YEAR / 2) == YEAR
    assert f.next_breakpoint(YEAR + 10.0) == YEAR + YEAR / 2


def test_aspect_view():
    f = AspectForcing(two_point(), "south", pet_multiplier=0.5)
    assert f.surface_temperature(0.0) == -7.0
    assert f.pet(YEAR / 2) == 1.5
    with pytest.raises(ConfigError):
        AspectForcing(two_point(), "east")


@pytest.mark.parametrize(
    "body,line,fragment",
    [
        ("0,0,0,0,0\n100,0,0,0,0\n50,0,0,0,0\n", 4, "strictly increasing"),
        ("0,0,0,0,0\n100,-1e-9,0,0,0\n", 3, "negative precip"),
        ("0,0,0,0,0\n100,0,-1,0,0\n", 3, "negative pet"),
        ("10,0,0,0,0\n", 2, "first time stamp"),
        ("0,0,x,0,0\n", 2, "non-numeric"),
        ("0,0,0,0\n", 2, "expected 5"),
    ],
)
def test_load_errors_name_the_row(tmp_path, body, line, fragment):
    p = tmp_path / "f.csv"
    p.write_text(HEADER + body)
    with pytest.raises(ConfigError, match=fragment) as info:
        load_forcing(p)
    assert info.value.line == line
    assert f"f.csv:{line}:" in str(info.value)


def test_missing_column(tmp_path):
    p = tmp_path / "f.csv"
    p.write_text("time_s,precip_m_s,pet_m_s,t_north_c\n0,0,0,0\n")
    with pytest.raises(ConfigError, match="t_south_c"):
        load_forcing(p)


def test_round_trip(tmp_path):
    f = sinusoidal_forcing()
    write_forcing(f, tmp_path / "f.csv")
    g = load_forcing(tmp_path / "f.csv")
    for name in ("time", "precip", "pet", "t_north", "t_south"):
        np.testing.assert_array_equal(getattr(f, name), getattr(g, name))


def test_sinusoidal_totals():
    f = sinusoidal_forcing(precip_mm_year=350.0, pet_mm_year=400.0)
    spacing = YEAR / f.time.size
    assert f.precip.sum() * spacing == pytest.approx(0.35, rel=1e-12)
    assert f.pet.sum() * spacing == pytest.approx(0.40, rel=1e-12)
    np.testing.assert_allclose(f.t_south - f.t_north, 3.0, rtol=1e-14)
