import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ifcexp.channels import HkMaps, make_hk_virtual_channel, make_z_channel, marginal_channel
from ifcexp.errors import ValidationError
from ifcexp.hk import (U_SETS, HkExponent, HkRates, legal_u, live_patterns, make_pattern,
                       rate_sums, region_hk)
from ifcexp.ordinary import OrdinaryExponent, RatePair
from ifcexp.simplexopt import GridSpec
from oracles import ExhaustiveExponent, cmi_bf

P = [0.5, 0.5]
# instance A: two binary common parts, no private parts (a two-user MAC)
CASE_A = (HkMaps(np.array([[0], [1]]), np.array([[0], [1]])), (2, 1, 2, 1), [P, [1.0], P, [1.0]])
# instance B: sender 1 sends the XOR of two binary parts, sender 2 is silent
CASE_B = (HkMaps(np.array([[0, 1], [1, 0]]), np.array([[1]])), (2, 2, 1, 1), [P, P, [1.0], [1.0]])


def _vch(case):
    maps, zs, _ = case
    return make_hk_virtual_channel(marginal_channel(make_z_channel(0.01), 1), maps, zs)


def test_rate_sums_and_totals():
    r = HkRates(0.1, 0.2, 0.3, 0.4)
    assert rate_sums(r).values == pytest.approx((0.1, 0.2, 0.3, 0.3, 0.4, 0.5, 0.6))
    assert (r.R1, r.R2) == pytest.approx((0.3, 0.7))
    with pytest.raises(ValidationError):
        HkRates(0.1, -0.1, 0, 0)


def test_legal_families():
    assert legal_u(1) == [1]
    assert legal_u(4) == [1, 2, 4]
    assert legal_u(7) == list(range(1, 8))
    for v in (0, 8):
        with pytest.raises(ValidationError) as e:
            legal_u(v)
        assert e.value.code == "ILLEGAL_UV_PAIR"
    p = make_pattern(5)
    assert p.redrawn == (0, 2)
    assert p.families == ((0,), (2,), (0, 2))
    assert p.rate_slots == (0, 2, 4)


def test_live_patterns():
    assert live_patterns((2, 2, 2, 2)) == list(range(1, 8))
    assert live_patterns((2, 1, 2, 1)) == [1, 3, 5]
    assert live_patterns((2, 2, 1, 1)) == [1, 2, 4]


@pytest.mark.parametrize("case", [CASE_A, CASE_B], ids=["A", "B"])
def test_region_bounds_match_brute_force(case):
    vch = _vch(case)
    pz = case[2]
    reg = region_hk(vch, pz)
    pin = np.ones(())
    for p in pz:
        pin = np.multiply.outer(pin, p)
    joint = pin[..., None] * vch.table
    for u in range(1, 8):
        cond = [a for a in (0, 1, 2) if a not in U_SETS[u]]
        assert reg.bounds[u - 1] == pytest.approx(cmi_bf(joint, list(U_SETS[u]), [4], cond),
                                                  abs=1e-9)
        assert reg.active[u - 1] == all(case[1][a] > 1 for a in U_SETS[u])


def test_region_distance():
    reg = region_hk(_vch(CASE_B), CASE_B[2])
    b = reg.bounds[0]
    assert reg.contains(HkRates(0.1, 0.1, 0.0, 0.0))
    assert reg.boundary_distance(HkRates(0.1, 0.1, 0, 0)) == pytest.approx(
        min(b - 0.1, (reg.bounds[3] - 0.2) / math.sqrt(2)))
    out = HkRates(b + 0.05, 0.0, 0.0, 0.0)
    assert not reg.contains(out)
    assert reg.boundary_distance(out) == pytest.approx(0.05)
    assert reg.margin(out) == pytest.approx(-0.05)


@pytest.mark.parametrize("case,rates", [(CASE_A, (0.2, 0.0, 0.1, 0.0)),
                                        (CASE_B, (0.05, 0.1, 0.0, 0.0))], ids=["A", "B"])
def test_exponent_matches_exhaustive_oracle(case, rates):
    vch = _vch(case)
    pz = case[2]
    pats = []
    for v in live_patterns(case[1]):
        p = make_pattern(v)
        pats.append((p.redrawn, list(p.families), list(p.rate_slots)))
    ora = ExhaustiveExponent(vch.table, [np.array(p) for p in pz], 3, pats, 3)
    r = HkRates(*rates)
    value, arg = ora.exponent(rate_sums(r).values, r.R22)
    res = HkExponent(vch, pz, GridSpec(3), bracket=False).exponent(r)
    assert res.value == value
    assert np.array_equal(res.argmin_q.flat, arg)


@pytest.fixture(scope="module")
def reduction():
    d = make_z_channel(0.01)
    w = marginal_channel(d, 1)
    vch = make_hk_virtual_channel(w, HkMaps(np.array([[0], [1]]), np.array([[0, 1]])), (2, 1, 1, 2))
    return (HkExponent(vch, [P, [1.0], [1.0], P], GridSpec(3)),
            OrdinaryExponent(d, P, P, GridSpec(3)))


@settings(max_examples=15, deadline=None)
@given(st.floats(0, 0.6), st.floats(0, 0.6))
def test_singleton_split_reduces_to_ordinary(reduction, r1, r2):
    hk, od = reduction
    a = hk.exponent(HkRates(r1, 0.0, 0.0, r2))
    b = od.exponent(RatePair(r1, r2))
    assert a.value == b.value
    assert a.tau == b.tau


def test_bad_inputs():
    vch = _vch(CASE_A)
    with pytest.raises(ValidationError):
        HkExponent(vch, [P, P, P, P], GridSpec(3))
    with pytest.raises(ValidationError):
        HkExponent(vch, [P, [1.0], P], GridSpec(3))
