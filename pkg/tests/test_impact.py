import dataclasses

import pytest
from hypothesis import given
from hypothesis import strategies as st

from parkingtax import DomainError
from parkingtax.impact import (TABLE4_BASE, TABLE4_HIGH, TABLE4_LOW, FleetScenario, annual_parking_energy, co2,
                               scenario_report, sensitivity_grid)


def test_corner_energies():
    # hand arithmetic: N * idle fraction * W * 8760 h
    assert annual_parking_energy(TABLE4_BASE) == pytest.approx(3.76e6 * 0.35 * 40 * 8760 / 1e9)
    assert annual_parking_energy(TABLE4_BASE) == pytest.approx(461.1, abs=0.05)
    assert annual_parking_energy(TABLE4_LOW) == pytest.approx(92.2, abs=0.05)
    assert annual_parking_energy(TABLE4_HIGH) == pytest.approx(1744.99, abs=0.005)
    for s, printed in ((TABLE4_LOW, 92), (TABLE4_BASE, 462), (TABLE4_HIGH, 1745)):
        assert abs(annual_parking_energy(s) - printed) <= 1


def test_co2():
    assert co2(462) == pytest.approx(180.18)
    assert co2(0) == 0
    assert co2(100, 0.39) == pytest.approx(39.0)
    with pytest.raises(DomainError):
        co2(-1)


def test_utilization_extremes():
    full = FleetScenario(1000, 0.0, 50.0)
    assert annual_parking_energy(FleetScenario(1000, 1.0, 50.0)) == 0
    assert annual_parking_energy(full) == pytest.approx(1000 * 50 * 8760 / 1e9)


@given(st.floats(1, 1e7), st.floats(0, 1), st.floats(0.1, 500), st.floats(0.1, 10))
def test_linear_in_fleet_and_tax(n, rho, w, k):
    s = FleetScenario(n, rho, w)
    e = annual_parking_energy(s)
    assert annual_parking_energy(dataclasses.replace(s, n_gpus=n * k)) == pytest.approx(e * k, rel=1e-12, abs=1e-15)
    assert annual_parking_energy(dataclasses.replace(s, park_w=w * k)) == pytest.approx(e * k, rel=1e-12, abs=1e-15)


def test_validation():
    for bad in ((1, 1.2, 40), (1, -0.1, 40), (-1, 0.5, 40), (1, 0.5, 0)):
        with pytest.raises(DomainError):
            FleetScenario(*bad)


def test_sensitivity_grid():
    rows = {r["parameter"]: r for r in sensitivity_grid(TABLE4_LOW, TABLE4_BASE, TABLE4_HIGH)}
    e = rows["e_park_gwh"]
    assert e["low"] < e["base"] < e["high"]
    assert rows["co2_kt"]["base"] == pytest.approx(co2(e["base"]))
    same = sensitivity_grid(TABLE4_BASE, TABLE4_BASE, TABLE4_BASE)
    assert same[3]["low"] == same[3]["base"] == same[3]["high"]
    with pytest.raises(DomainError):
        sensitivity_grid(TABLE4_HIGH, TABLE4_BASE, TABLE4_LOW)
    doubled = dataclasses.replace(TABLE4_HIGH, n_gpus=2 * TABLE4_HIGH.n_gpus)
    rows2 = sensitivity_grid(TABLE4_LOW, TABLE4_BASE, doubled)
    assert rows2[3]["high"] == pytest.approx(2 * e["high"])


def test_scenario_report():
    r = scenario_report(TABLE4_BASE)
    assert r["e_park_gwh_rounded"] == 461
    assert r["co2_kt"] == pytest.approx(179.8, abs=0.05)
