import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ifcexp.channels import (HkMaps, make_hk_virtual_channel, make_marginal_channel,
                             make_two_user_dmc, make_z_channel, marginal_channel, swap_roles,
                             table_row_major)
from ifcexp.errors import ValidationError


def random_dmc(rng, sizes=(2, 3, 2, 2)):
    nx1, nx2, ny1, ny2 = sizes
    t = rng.dirichlet(np.ones(ny1 * ny2), size=(nx1, nx2)).reshape(nx1, nx2, ny1, ny2)
    return make_two_user_dmc(sizes, np.ascontiguousarray(t.transpose(2, 3, 0, 1)).ravel())


def test_identity_product_channel_is_valid():
    t = np.zeros((2, 2, 2, 2))  # [y1][y2][x1][x2]
    for x1, x2 in itertools.product(range(2), repeat=2):
        t[x1, x2, x1, x2] = 1.0
    dmc = make_two_user_dmc((2, 2, 2, 2), t)
    assert dmc.table[1, 0, 1, 0] == 1.0 and dmc.table.sum() == 4.0


def test_row_sum_error():
    t = np.zeros((2, 2, 2, 2))
    t[0, 0] = 0.25
    t[0, 0, 0, 0] = 0.23  # row (0,0) sums to 0.98
    for x1, x2 in itertools.product(range(2), repeat=2):
        if (x1, x2) != (0, 0):
            t[:, :, x1, x2] = 0.25
    with pytest.raises(ValidationError) as exc:
        make_two_user_dmc((2, 2, 2, 2), t)
    assert exc.value.code == "ROW_SUM"


def test_negative_and_dimension_errors():
    t = np.full(16, 0.25)
    t[0] = -0.25
    t[4] = 0.75
    with pytest.raises(ValidationError) as exc:
        make_two_user_dmc((2, 2, 2, 2), t)
    assert exc.value.code == "NEGATIVE_PROBABILITY"
    with pytest.raises(ValidationError) as exc:
        make_two_user_dmc((2, 2, 2, 2), np.full(12, 0.25))
    assert exc.value.code == "DIMENSION_MISMATCH"


def test_z_channel_round_trip_through_row_major():
    z = make_z_channel(0.01)
    again = make_two_user_dmc((2, 2, 2, 2), table_row_major(z))
    assert np.array_equal(again.table, z.table)


def test_z_channel_entries():
    w = marginal_channel(make_z_channel(0.01), 1).table
    for x1, x2 in itertools.product(range(2), repeat=2):
        clean = x1 * x2
        assert w[x1, x2, clean] == 0.99
        assert w[x1, x2, 1 - clean] == 0.01
    w2 = marginal_channel(make_z_channel(0.01), 2).table
    for x1, x2 in itertools.product(range(2), repeat=2):
        assert w2[x1, x2, x2] == 1.0


def test_z_channel_extremes():
    t0 = make_z_channel(0.0).table
    assert set(np.unique(t0)) == {0.0, 1.0}
    w = marginal_channel(make_z_channel(0.5), 1).table
    assert np.all(w == 0.5)
    with pytest.raises(ValidationError) as exc:
        make_z_channel(1.5)
    assert exc.value.code == "P_OUT_OF_RANGE"


def test_marginal_of_independent_y2():
    rng = np.random.default_rng(0)
    w1 = rng.dirichlet(np.ones(3), size=(2, 2))
    q2 = np.array([0.3, 0.7])
    full = w1[..., :, None] * q2
    dmc = make_two_user_dmc((2, 2, 3, 2), np.ascontiguousarray(full.transpose(2, 3, 0, 1)))
    assert np.allclose(marginal_channel(dmc, 1).table, w1, atol=1e-15)


@given(st.integers(0, 2**32 - 1), st.floats(0, 1))
@settings(max_examples=30, deadline=None)
def test_marginal_commutes_with_mixtures(seed, lam):
    rng = np.random.default_rng(seed)
    a, b = random_dmc(rng), random_dmc(rng)
    mix_t = lam * a.table + (1 - lam) * b.table
    mix = make_two_user_dmc((2, 3, 2, 2), np.ascontiguousarray(mix_t.transpose(2, 3, 0, 1)))
    for r in (1, 2):
        lhs = marginal_channel(mix, r).table
        rhs = lam * marginal_channel(a, r).table + (1 - lam) * marginal_channel(b, r).table
        assert np.max(np.abs(lhs - rhs)) <= 1e-12
        assert np.allclose(lhs.sum(axis=-1), 1.0, atol=1e-9)


def test_virtual_channel_xor_and_by_lookup():
    m = marginal_channel(make_z_channel(0.01), 1)
    maps = HkMaps(np.array([[0, 1], [1, 0]]), np.array([[0, 0], [0, 1]]))
    v = make_hk_virtual_channel(m, maps, (2, 2, 2, 2))
    for z in itertools.product(range(2), repeat=4):
        x1, x2 = z[0] ^ z[1], z[2] & z[3]
        for y in range(2):
            assert v.table[z + (y,)] == m.table[x1, x2, y]
    assert np.allclose(v.table.sum(axis=-1), 1.0, atol=1e-9)


def test_virtual_channel_projection_ignores_second_args():
    m = marginal_channel(make_z_channel(0.1), 1)
    maps = HkMaps(np.array([[0, 0], [1, 1]]), np.array([[0, 0, 0], [1, 1, 1]]))
    v = make_hk_virtual_channel(m, maps, (2, 2, 2, 3))
    assert np.array_equal(v.table[:, 0], v.table[:, 1])
    assert all(np.array_equal(v.table[..., 0, :], v.table[..., k, :]) for k in (1, 2))


def test_virtual_channel_singleton_collapse():
    m = marginal_channel(make_z_channel(0.01), 1)
    maps = HkMaps(np.array([[0], [1]]), np.array([[0], [1]]))
    v = make_hk_virtual_channel(m, maps, (2, 1, 2, 1))
    assert np.array_equal(v.table[:, 0, :, 0], m.table)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_virtual_rows_sum_to_one(seed):
    rng = np.random.default_rng(seed)
    sizes = rng.integers(1, 4, size=4)
    m = make_marginal_channel(rng.dirichlet(np.ones(3), size=(2, 3)))
    maps = HkMaps(rng.integers(0, 2, size=sizes[:2]), rng.integers(0, 3, size=sizes[2:]))
    v = make_hk_virtual_channel(m, maps, tuple(int(s) for s in sizes))
    assert np.allclose(v.table.sum(axis=-1), 1.0, atol=1e-9)


def test_map_range_mismatch():
    m = marginal_channel(make_z_channel(0.01), 1)
    with pytest.raises(ValidationError) as exc:
        make_hk_virtual_channel(m, HkMaps(np.array([[2]]), np.array([[0]])), (1, 1, 1, 1))
    assert exc.value.code == "MAP_RANGE_MISMATCH"
    with pytest.raises(ValidationError) as exc:
        make_hk_virtual_channel(m, HkMaps(np.array([[0]]), np.array([[0]])), (2, 1, 1, 1))
    assert exc.value.code == "MAP_RANGE_MISMATCH"


def test_swap_is_an_involution_and_moves_receivers():
    rng = np.random.default_rng(5)
    dmc = random_dmc(rng)
    assert np.array_equal(swap_roles(swap_roles(dmc)).table, dmc.table)
    z = make_z_channel(0.01)
    sw = swap_roles(z)
    assert np.array_equal(marginal_channel(sw, 1).table,
                          marginal_channel(z, 2).table.transpose(1, 0, 2))


def test_swap_symmetric_channel_is_noop():
    t = np.zeros((2, 2, 2, 2))
    for x1, x2 in itertools.product(range(2), repeat=2):
        t[x1, x2, x1 ^ x2, x1 ^ x2] = 1.0
    dmc = make_two_user_dmc((2, 2, 2, 2), np.ascontiguousarray(t.transpose(2, 3, 0, 1)))
    assert np.array_equal(swap_roles(dmc).table, dmc.table)
