import pytest
from hypothesis import given
from hypothesis import strategies as st

from parkingtax import DomainError
from parkingtax.breakeven import (breakeven, breakeven_time, critical_rate, keep_warm_decision, per_hour,
                                  per_second)
from parkingtax.power import LoadProfile

PYTORCH = LoadProfile.constant(300, 45)


@pytest.mark.parametrize("park,load,expected", [
    (49.9, PYTORCH, 270.54),
    (49.9, LoadProfile.constant(124, 30), 74.55),
    (26.3, PYTORCH, 513.3),
])
def test_breakeven_time(park, load, expected):
    assert breakeven_time(park, load) == pytest.approx(expected, abs=0.01)


@pytest.mark.parametrize("park,per_hr", [(49.9, 13.3), (26.3, 7.01), (66.4, 17.7)])
def test_critical_rate(park, per_hr):
    assert per_hour(critical_rate(park, PYTORCH)) == pytest.approx(per_hr, abs=0.01)


def test_critical_rate_per_second():
    assert critical_rate(49.9, PYTORCH) == pytest.approx(3.696e-3, abs=1e-6)


def test_keep_warm_decision():
    assert not keep_warm_decision(0, 49.9, PYTORCH)
    assert keep_warm_decision(per_second(20), 49.9, PYTORCH)
    assert not keep_warm_decision(per_second(5), 49.9, PYTORCH)
    with pytest.raises(DomainError):
        keep_warm_decision(-1, 49.9, PYTORCH)


def test_nonpositive_park_power():
    for bad in (0, -1):
        with pytest.raises(DomainError):
            breakeven_time(bad, PYTORCH)
        with pytest.raises(DomainError):
            critical_rate(bad, PYTORCH)


def test_staged_profile_uses_total_energy():
    staged = LoadProfile(((22, 70.8), (3, 124.1), (4.7, 121.0)))
    assert breakeven_time(49.9, staged) == pytest.approx(2498.6 / 49.9)


powers = st.floats(1, 1000)
durs = st.floats(0.1, 600)


@given(powers, powers, durs)
def test_product_is_one(park, p_load, t_load):
    load = LoadProfile.constant(p_load, t_load)
    assert breakeven_time(park, load) * critical_rate(park, load) == pytest.approx(1.0, rel=1e-12)
    r = breakeven(park, load)
    assert r.t_star_s == pytest.approx(r.load_energy_j / r.park_w)


@given(powers, powers, durs, st.floats(1.01, 10))
def test_monotone(park, p_load, t_load, k):
    load = LoadProfile.constant(p_load, t_load)
    assert breakeven_time(park * k, load) < breakeven_time(park, load)
    assert breakeven_time(park, LoadProfile.constant(p_load * k, t_load)) > breakeven_time(park, load)


@given(powers, st.floats(1, 500), durs)
def test_equal_energy_equal_t_star(park, p_load, t_load):
    # a "small" and a "large" model with the same load energy share T*
    a = LoadProfile.constant(p_load, t_load, "7b")
    b = LoadProfile.constant(p_load * 2, t_load / 2, "70b")
    assert breakeven_time(park, a) == pytest.approx(breakeven_time(park, b), rel=1e-12)


@pytest.mark.parametrize("p_load,t_load,printed", [(124, 30, "1.2 min"), (300, 45, "4.5 min"),
                                                   (300, 8, "48 s"), (200, 5, "20 s")])
def test_breakeven_table_rows(p_load, t_load, printed):
    t = breakeven_time(49.9, LoadProfile.constant(p_load, t_load))
    text = f"{t:.0f} s" if t < 60 else f"{t / 60:.1f} min"
    assert text == printed
