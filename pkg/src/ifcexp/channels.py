"""Two-user discrete memoryless channels and derived single-receiver views."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

ROW_TOL = 1e-9


def _validate_rows(table, n_in, what):
    t = np.array(table, dtype=np.float64)
    if not np.all(np.isfinite(t)) or np.any(t < 0):
        raise ValidationError(f"{what}: negative or non-finite entry", "NEGATIVE_PROBABILITY")
    axes = tuple(range(n_in, t.ndim))
    sums = t.sum(axis=axes, keepdims=True)
    if np.any(np.abs(sums - 1.0) > ROW_TOL):
        worst = float(np.max(np.abs(sums - 1.0)))
        raise ValidationError(f"{what}: a conditional row deviates from 1 by {worst:.3g}", "ROW_SUM")
    t = t / sums
    t.setflags(write=False)
    return t


def _sizes(sizes, n):
    s = tuple(int(x) for x in sizes)
    if len(s) != n or any(x < 1 for x in s):
        raise ValidationError(f"expected {n} alphabet sizes >= 1, got {sizes}", "DIMENSION_MISMATCH")
    return s


@dataclass(frozen=True, eq=False)
class Dmc2User:
    """P(y1, y2 | x1, x2), stored with axes (x1, x2, y1, y2)."""

    table: np.ndarray

    @property
    def sizes(self):
        """(|X1|, |X2|, |Y1|, |Y2|)."""
        return self.table.shape


@dataclass(frozen=True, eq=False)
class MarginalChannel:
    """P(y | inputs...), output axis last."""

    table: np.ndarray

    @property
    def input_sizes(self):
        return self.table.shape[:-1]

    @property
    def output_size(self):
        return self.table.shape[-1]


@dataclass(frozen=True)
class HkMaps:
    """Deterministic maps X1 = g1[z11, z12] and X2 = g2[z21, z22]."""

    g1: np.ndarray
    g2: np.ndarray

    def __post_init__(self):
        for name in ("g1", "g2"):
            g = np.array(getattr(self, name))
            if g.ndim != 2 or g.size == 0 or not np.issubdtype(g.dtype, np.integer):
                raise ValidationError(f"{name} must be a non-empty 2-d integer table", "DIMENSION_MISMATCH")
            if np.any(g < 0):
                raise ValidationError(f"{name} has negative symbols", "MAP_RANGE_MISMATCH")
            g.setflags(write=False)
            object.__setattr__(self, name, g)

    def __hash__(self):
        return hash((self.g1.tobytes(), self.g1.shape, self.g2.tobytes(), self.g2.shape))

    def __eq__(self, other):
        return (isinstance(other, HkMaps) and np.array_equal(self.g1, other.g1)
                and np.array_equal(self.g2, other.g2))


@dataclass(frozen=True, eq=False)
class VirtualChannel:
    """P(y | z11, z12, z21, z22) obtained by composing maps with a marginal channel."""

    table: np.ndarray
    underlying: MarginalChannel
    maps: HkMaps

    @property
    def input_sizes(self):
        return self.table.shape[:-1]

    @property
    def output_size(self):
        return self.table.shape[-1]


def make_two_user_dmc(sizes, table) -> Dmc2User:
    """Build a channel from sizes (|X1|, |X2|, |Y1|, |Y2|).

    ``table`` is indexed [y1][y2][x1][x2], either nested or flattened in that
    row-major order.
    """
    nx1, nx2, ny1, ny2 = _sizes(sizes, 4)
    raw = np.asarray(table, dtype=np.float64)
    if raw.size != nx1 * nx2 * ny1 * ny2 or (raw.ndim > 1 and raw.shape != (ny1, ny2, nx1, nx2)):
        raise ValidationError(
            f"table of shape {raw.shape} does not match sizes {sizes}", "DIMENSION_MISMATCH")
    t = raw.reshape(ny1, ny2, nx1, nx2).transpose(2, 3, 0, 1)
    return Dmc2User(_validate_rows(t, 2, "channel"))


def table_row_major(dmc: Dmc2User) -> np.ndarray:
    """Inverse of the layout accepted by make_two_user_dmc, as a flat array."""
    return np.ascontiguousarray(dmc.table.transpose(2, 3, 0, 1)).reshape(-1)


def make_marginal_channel(table) -> MarginalChannel:
    t = np.asarray(table, dtype=np.float64)
    if t.ndim < 2:
        raise ValidationError("marginal channel needs inputs and an output axis", "DIMENSION_MISMATCH")
    return MarginalChannel(_validate_rows(t, t.ndim - 1, "marginal channel"))


def marginal_channel(dmc: Dmc2User, receiver: int = 1) -> MarginalChannel:
    """P(y_receiver | x1, x2)."""
    if receiver == 1:
        t = dmc.table.sum(axis=3)
    elif receiver == 2:
        t = dmc.table.sum(axis=2)
    else:
        raise ValidationError(f"receiver must be 1 or 2, got {receiver}", "DIMENSION_MISMATCH")
    t.setflags(write=False)
    return MarginalChannel(t)


def make_z_channel(p: float) -> Dmc2User:
    """Binary channel Y1 = X1*X2 xor Z with Z ~ Bernoulli(p), and Y2 = X2."""
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"p={p} outside [0, 1]", "P_OUT_OF_RANGE")
    t = np.zeros((2, 2, 2, 2))
    for x1 in range(2):
        for x2 in range(2):
            clean = x1 * x2
            t[x1, x2, clean, x2] += 1.0 - p
            t[x1, x2, 1 - clean, x2] += p
    t.setflags(write=False)
    return Dmc2User(t)


def make_hk_virtual_channel(m: MarginalChannel, maps: HkMaps, z_sizes) -> VirtualChannel:
    """Virtual four-input channel P(y | z11, z12, z21, z22) = m(y | g1(z11,z12), g2(z21,z22))."""
    z11, z12, z21, z22 = _sizes(z_sizes, 4)
    if m.table.ndim != 3:
        raise ValidationError("underlying channel must have two inputs", "DIMENSION_MISMATCH")
    nx1, nx2, _ = m.table.shape
    if maps.g1.shape != (z11, z12) or maps.g2.shape != (z21, z22):
        raise ValidationError(
            f"map shapes {maps.g1.shape}, {maps.g2.shape} vs alphabets {z_sizes}", "MAP_RANGE_MISMATCH")
    if maps.g1.max() >= nx1 or maps.g2.max() >= nx2:
        raise ValidationError("map output outside the channel input alphabet", "MAP_RANGE_MISMATCH")
    x1 = maps.g1[:, :, None, None]
    x2 = maps.g2[None, None, :, :]
    t = m.table[x1, x2]
    t = np.ascontiguousarray(t)
    t.setflags(write=False)
    return VirtualChannel(t, m, maps)


def swap_roles(dmc: Dmc2User) -> Dmc2User:
    """Exchange the users: (x1, x2, y1, y2) -> (x2, x1, y2, y1)."""
    t = np.ascontiguousarray(dmc.table.transpose(1, 0, 3, 2))
    t.setflags(write=False)
    return Dmc2User(t)
