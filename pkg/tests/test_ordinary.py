import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ifcexp import _kernels as K
from ifcexp.channels import make_z_channel, marginal_channel
from ifcexp.errors import ValidationError
from ifcexp.infomeasures import JointDist
from ifcexp.ordinary import (OrdinaryExponent, RatePair, e_one, e_star_inner, exponent_ordinary,
                             region_ordinary)
from ifcexp.simplexopt import GridSpec
from oracles import ExhaustiveExponent

P = np.array([0.5, 0.5])


def h(p):
    return -p * math.log(p) - (1 - p) * math.log(1 - p)


@pytest.fixture(scope="module")
def w():
    return marginal_channel(make_z_channel(0.01), 1).table


@pytest.fixture(scope="module")
def oracle3(w):
    return ExhaustiveExponent(w, [P, P], 1, [((0,), [(0,)], [0])], 3)


@pytest.fixture(scope="module")
def engine3():
    return OrdinaryExponent(make_z_channel(0.01), P, P, GridSpec(3))


def test_rate_validation():
    for bad in (-0.1, math.inf, math.nan):
        with pytest.raises(ValidationError) as e:
            RatePair(bad, 0.1)
        assert e.value.code == "INVALID_RATE"


@pytest.mark.parametrize("rates", [(0.05, 0.1), (0.2, 0.45)])
def test_exponent_matches_exhaustive_oracle(oracle3, rates):
    value, arg = oracle3.exponent([rates[0]], rates[1])
    res = exponent_ordinary(make_z_channel(0.01), P, P, RatePair(*rates), GridSpec(3), bracket=False)
    assert res.value == value
    assert np.array_equal(res.argmin_q.flat, arg)


def _pw(w):
    return JointDist(np.einsum("a,b,aby->aby", P, P, w))


def test_pointwise_pieces_match_oracle(w, oracle3):
    q = _pw(w)
    qt = JointDist(np.einsum("a,b,ay->aby", P, P, q.probs.sum(axis=1) / 0.5))
    for r2 in (0.0, 0.1, 0.4):
        s = K.f_flat(q.flat, oracle3.logw)
        t0 = oracle3.t0(q.flat, r2)
        for cand in (q, qt):
            assert e_one(cand, q, r2, w, GridSpec(3), p_x2=P) == oracle3.e1(cand.flat, t0, s, r2)
        for r1 in (0.0, 0.2):
            assert e_star_inner(q, RatePair(r1, r2), w, GridSpec(3), P, P) == \
                oracle3.inner(q.flat, [r1], r2)


def test_zero_at_channel_point_outside_region(engine3):
    # far outside every bound the channel's own joint gives exponent 0
    assert engine3.exponent(RatePair(1.0, 1.0)).value == 0.0


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 0.6), st.floats(0, 0.6), st.floats(0, 0.2), st.floats(0, 0.2))
def test_monotone_in_rates(engine3, r1, r2, d1, d2):
    a = engine3.exponent(RatePair(r1, r2)).value
    b = engine3.exponent(RatePair(r1 + d1, r2 + d2)).value
    assert b <= a
    assert a >= 0


def test_region_closed_forms():
    reg = region_ordinary(make_z_channel(0.01), P, P)
    assert reg.i_x1_y1_given_x2 == pytest.approx(0.5 * (math.log(2) - h(0.01)), abs=1e-12)
    assert reg.i_x1_y1 == pytest.approx(h(0.255) - 0.5 * h(0.01) - 0.5 * math.log(2), abs=1e-12)
    assert reg.i_x1x2_y1 == pytest.approx(h(0.255) - h(0.01), abs=1e-12)


def test_region_membership_and_distance():
    reg = region_ordinary(make_z_channel(0.01), P, P)
    a, c, s = reg.i_x1_y1, reg.i_x1_y1_given_x2, reg.i_x1x2_y1
    assert reg.contains(RatePair(a - 0.01, 5.0))
    assert not reg.contains(RatePair(a + 0.01, 5.0))
    assert reg.contains(RatePair(c - 0.01, s - c))
    assert not reg.contains(RatePair(c + 0.01, 0.0))
    assert reg.boundary_distance(RatePair(a - 0.01, 5.0)) == pytest.approx(0.01)
    assert reg.boundary_distance(RatePair(c + 0.02, 0.0)) == pytest.approx(0.02)
    # just above the sum-rate face between the two corner rates
    r1 = 0.5 * (a + c)
    d = reg.boundary_distance(RatePair(r1, s - r1 + 0.03))
    assert d == pytest.approx(min(0.03 / math.sqrt(2), r1 - a))


def test_bracket_and_tau():
    res = exponent_ordinary(make_z_channel(0.01), P, P, RatePair(0.05, 0.1), GridSpec(4))
    coarse = exponent_ordinary(make_z_channel(0.01), P, P, RatePair(0.05, 0.1), GridSpec(2),
                               bracket=False)
    assert res.bracket == (coarse.value, res.value)
    assert res.tau == abs(coarse.value - res.value)


def test_shape_mismatch():
    with pytest.raises(ValidationError):
        OrdinaryExponent(make_z_channel(0.01), [1 / 3] * 3, P, GridSpec(3))
