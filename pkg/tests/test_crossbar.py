import math

import pytest

from reram_fsa.crossbar import (
    AdcConfig,
    Crossbar,
    CrossbarConfig,
    adc_bits,
    adc_quantize,
    balanced_thresholds,
    default_thresholds,
    quantize_many,
)
from reram_fsa.device import DEFAULT_TABLE, FA_STATES, PulseSpec, StateId, StateTable, VariationProfile
from reram_fsa.errors import AlreadySelected, DegenerateTable, NotSelected, OutOfRange, WrongAmplitude

from conftest import put


def test_select_returns_enabled_selection(xbar):
    sel = xbar.select(2, 3)
    assert (sel.row, sel.col, sel.gate_enabled) == (2, 3, True)


@pytest.mark.parametrize("row, col", [(4, 0), (0, 4), (-1, 0)])
def test_select_out_of_range(xbar, row, col):
    with pytest.raises(OutOfRange):
        xbar.select(row, col)


def test_single_shared_sense_path(xbar):
    xbar.select(0, 0)
    with pytest.raises(AlreadySelected):
        xbar.select(1, 1)


def test_release_frees_sense_path(xbar):
    sel = xbar.select(0, 0)
    xbar.release(sel)
    assert not sel.gate_enabled
    xbar.select(1, 1)


def test_sense_nominal_currents(xbar):
    put(xbar.cell(0, 0), "S1")
    put(xbar.cell(1, 2), "S4")
    sel = xbar.select(0, 0)
    assert xbar.sense(sel) == 12.6
    xbar.release(sel)
    sel = xbar.select(1, 2)
    assert xbar.sense(sel) == 0.3


def test_sense_requires_enabled_gate(xbar):
    sel = xbar.select(0, 0)
    sel.gate_enabled = False
    with pytest.raises(NotSelected):
        xbar.sense(sel)


def test_sense_after_release(xbar):
    sel = xbar.select(0, 0)
    xbar.release(sel)
    with pytest.raises(NotSelected):
        xbar.sense(sel)


def test_read_voltage_is_not_a_write_pulse(xbar):
    sel = xbar.select(0, 0)
    with pytest.raises(WrongAmplitude):
        xbar.apply_pulse(sel, PulseSpec(0.1, 10))


def test_unselected_cells_untouched(xbar):
    sel = xbar.select(1, 1)
    xbar.apply_pulse(sel, PulseSpec.reset_pulse(60))
    states = [[c.state for c in row] for row in xbar.cells]
    assert states[1][1] == StateId.S5
    assert sum(s != StateId.S0 for row in states for s in row) == 1


def test_crossbar_config_validation():
    with pytest.raises(ValueError):
        CrossbarConfig(0, 3)


# ---- ADC ----------------------------------------------------------------------

def _ceil_log2(s):
    p = 0
    while 2 ** p < s:
        p += 1
    return p


@pytest.mark.parametrize("s, expected", [(7, 3), (2, 1), (6, 3)])
def test_adc_bits(s, expected):
    assert _ceil_log2(s) == expected
    assert adc_bits(s) == expected


def test_adc_bits_matches_enumeration():
    for s in range(2, 300):
        assert adc_bits(s) == _ceil_log2(s) == math.ceil(math.log2(s))


def test_adc_bits_needs_two_states():
    with pytest.raises(ValueError):
        adc_bits(1)


def test_default_thresholds_ends():
    t = default_thresholds(DEFAULT_TABLE)
    assert len(t) == 5
    assert t[0] == pytest.approx(math.sqrt(12.6 * 1.6))
    assert t[0] == pytest.approx(4.49, abs=0.005)
    assert t[-1] == pytest.approx(math.sqrt(0.2 * 0.07))
    assert t[-1] == pytest.approx(0.118, abs=0.0005)


def test_degenerate_table():
    table = DEFAULT_TABLE.with_overrides({"S3": {"current_uA": 1.6}})
    with pytest.raises(DegenerateTable):
        default_thresholds(table)


@pytest.mark.parametrize("rule", ["geometric", "balanced"])
def test_threshold_sandwich(rule):
    adc = AdcConfig.for_rule(rule, DEFAULT_TABLE, VariationProfile())
    for t, hi, lo in zip(adc.thresholds, FA_STATES, FA_STATES[1:]):
        assert DEFAULT_TABLE.current(lo) < t < DEFAULT_TABLE.current(hi)


def test_balanced_thresholds_equalise_sigma_distance():
    p = VariationProfile()
    t = balanced_thresholds(DEFAULT_TABLE, p)
    for thr, hi, lo in zip(t, FA_STATES, FA_STATES[1:]):
        i_hi, i_lo = DEFAULT_TABLE.current(hi), DEFAULT_TABLE.current(lo)
        z_hi = (i_hi - thr) / (p.bound(hi) / 3 * i_hi)
        z_lo = (thr - i_lo) / (p.bound(lo) / 3 * i_lo)
        assert z_hi == pytest.approx(z_lo)


def test_balanced_falls_back_to_geometric_without_variation():
    assert balanced_thresholds(DEFAULT_TABLE, VariationProfile(0.0, 0.0)) == pytest.approx(
        default_thresholds(DEFAULT_TABLE))


def test_adc_config_validation():
    with pytest.raises(ValueError):
        AdcConfig(4, (5, 1, 0.5, 0.25, 0.1))
    with pytest.raises(ValueError):
        AdcConfig(3, (5, 1, 0.5, 0.25))
    with pytest.raises(ValueError):
        AdcConfig(3, (5, 1, 1, 0.25, 0.1))


def test_quantize_examples():
    adc = AdcConfig.from_table()
    assert adc_quantize(12.6, adc) == StateId.S1
    assert adc_quantize(0.07, adc) == StateId.S6
    assert adc_quantize(0.0, adc) == StateId.S6


def test_quantize_tie_goes_to_higher_current_state():
    adc = AdcConfig.from_table()
    mid = math.sqrt(12.6 * 1.6)
    assert adc.thresholds[0] == mid
    assert adc_quantize(mid, adc) == StateId.S1
    assert adc_quantize(math.nextafter(mid, 0), adc) == StateId.S2


def test_quantize_negative_current():
    with pytest.raises(ValueError):
        adc_quantize(-0.1, AdcConfig.from_table())


def test_s0_aliases_to_s1():
    assert adc_quantize(12.8, AdcConfig.from_table()) == StateId.S1


@pytest.mark.parametrize("state", FA_STATES)
def test_round_trip_without_variation(state):
    xb = Crossbar()
    put(xb.cell(3, 3), state)
    sel = xb.select(3, 3)
    assert adc_quantize(xb.sense(sel), AdcConfig.from_table()) == state


def test_vectorised_quantize_agrees():
    adc = AdcConfig.from_table()
    currents = [12.8, 12.6, 4.49, 1.6, 0.9, 0.56, 0.41, 0.3, 0.2449, 0.2, 0.1, 0.07, 0.0,
                adc.thresholds[2]]
    assert list(quantize_many(currents, adc)) == [int(adc_quantize(c, adc)) for c in currents]


def test_allocation_and_insufficient_cells():
    from reram_fsa.errors import InsufficientCells
    xb = Crossbar(CrossbarConfig(1, 2))
    assert xb.allocate(1) == [(0, 0)]
    assert xb.allocate(1) == [(0, 1)]
    with pytest.raises(InsufficientCells):
        xb.allocate(1)


def test_crossbar_seeding_is_deterministic():
    p = VariationProfile()
    a = Crossbar(profile=p, seed=9)
    b = Crossbar(profile=p, seed=9)
    c = Crossbar(profile=p, seed=10)
    assert a.cell(2, 1).d2d_multipliers == b.cell(2, 1).d2d_multipliers
    assert a.cell(2, 1).d2d_multipliers != c.cell(2, 1).d2d_multipliers
    assert a.cell(0, 0).d2d_multipliers != a.cell(0, 1).d2d_multipliers


def test_custom_table_thresholds():
    t = StateTable(currents=(20, 10, 5, 2.5, 1.25, 0.625, 0.3125))
    th = default_thresholds(t)
    assert th == pytest.approx([math.sqrt(50), math.sqrt(12.5), math.sqrt(3.125),
                                math.sqrt(0.78125), math.sqrt(0.1953125)])
