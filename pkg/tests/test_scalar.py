"""Scalar multiplication: triple oracle, schedule shape, NOP placement.

The atomic right-to-left ladder must agree with the left-to-right
reference and with naive repeated addition, while emitting exactly the
block/NOP event stream the simulator prices.
"""

import random

import pytest

from atomkp.curve import AffinePoint, is_on_curve
from atomkp.errors import ExceptionalAddition
from atomkp.scalar import (NOP_AFTER_ADD1, NOP_AFTER_ADD2, NOP_AFTER_DBL,
                           BlockEvent, NopEvent, Scalar, kp_left_to_right,
                           kp_right_to_left, naive_kp)

N = 0xFFFFFFFF00000000FFFFFFFFFFFFFFFFBCE6FAADA7179E84F3B9CAC2FC632551


def _ints(pt):
    return None if pt.is_infinity else (pt.x.to_int(), pt.y.to_int())


def test_scalar_parsing():
    assert Scalar.from_string("1111111111").value == 1023
    assert Scalar.from_string("1111111111").length == 10
    assert Scalar.from_string("3FF").value == 1023
    assert Scalar.from_string("0b0011").length == 4
    assert Scalar.from_string("0x10").value == 16
    assert Scalar.from_int(5, length=8).length == 8
    assert Scalar.from_int(5, length=8).value == 5
    with pytest.raises(ValueError):
        Scalar.from_int(-1)
    with pytest.raises(ValueError):
        Scalar.from_int(256, length=8)
    with pytest.raises(ValueError):
        Scalar.from_string("zz")
    assert Scalar.from_string("101").to_binary() == "101"
    assert Scalar.from_string("101").hamming_weight() == 2


def test_small_scalars_triple_oracle(params):
    base = AffinePoint(params.gx, params.gy)
    for k in range(1, 65):
        r2l, _, _ = kp_right_to_left(Scalar.from_int(k), base, params)
        l2r = kp_left_to_right(Scalar.from_int(k), base, params)
        naive = naive_kp(k, base, params)
        assert _ints(r2l) == _ints(l2r) == _ints(naive)
        assert is_on_curve(r2l, params)


def test_random_64bit_scalars_match_reference(params):
    base = AffinePoint(params.gx, params.gy)
    rng = random.Random(30)
    for _ in range(25):
        k = rng.getrandbits(64) | (1 << 63)
        r2l, _, _ = kp_right_to_left(Scalar.from_int(k), base, params)
        l2r = kp_left_to_right(Scalar.from_int(k), base, params)
        assert _ints(r2l) == _ints(l2r)
        assert is_on_curve(r2l, params)


def test_leading_zero_bits_do_not_change_result(params):
    base = AffinePoint(params.gx, params.gy)
    plain, _, _ = kp_right_to_left(Scalar.from_int(41), base, params)
    padded, schedule, _ = kp_right_to_left(Scalar.from_int(41, length=12),
                                           base, params)
    assert _ints(plain) == _ints(padded)
    # the fixed-width key still schedules one doubling per declared bit
    assert schedule.class_counts()["Dbl"] == 12


def test_zero_scalar_gives_infinity(params):
    base = AffinePoint(params.gx, params.gy)
    result, schedule, logs = kp_right_to_left(Scalar.from_int(0, length=4),
                                              base, params)
    assert result.is_infinity
    assert schedule.class_counts() == {"Dbl": 4, "Add1": 0, "Add2": 0}
    assert len(logs) == 4


def test_schedule_counts_and_block_logs(params):
    base = AffinePoint(params.gx, params.gy)
    k = Scalar.from_string("1011001110")
    _, schedule, logs = kp_right_to_left(k, base, params)
    w = k.hamming_weight()
    assert schedule.class_counts() == {"Dbl": k.length, "Add1": w, "Add2": w}
    assert len(logs) == k.length + 2 * w
    for log in logs:
        log.validate()
    # logs arrive in event order: classes match the schedule's block events
    assert [log.block_class for log in logs] == \
        [ev.block_class for ev in schedule.block_events()]


def test_nop_follows_every_block(params):
    base = AffinePoint(params.gx, params.gy)
    _, schedule, _ = kp_right_to_left(Scalar.from_string("1101"), base,
                                      params)
    expect_gap = {"Add1": NOP_AFTER_ADD1, "Add2": NOP_AFTER_ADD2,
                  "Dbl": NOP_AFTER_DBL}
    events = schedule.events
    assert len(events) % 2 == 0
    for block, nop in zip(events[::2], events[1::2]):
        assert isinstance(block, BlockEvent)
        assert isinstance(nop, NopEvent)
        assert nop.count == expect_gap[block.block_class]


def test_addition_pairs_share_the_bit_index(params):
    base = AffinePoint(params.gx, params.gy)
    _, schedule, _ = kp_right_to_left(Scalar.from_string("10101"), base,
                                      params)
    blocks = schedule.block_events()
    for i, ev in enumerate(blocks):
        if ev.block_class == "Add1":
            nxt = blocks[i + 1]
            assert nxt.block_class == "Add2"
            assert nxt.key_bit_index == ev.key_bit_index


def test_group_order_hits_exceptional_addition(params):
    """k equal to the group order drives the final addition into Q == -R,
    which the second addition block must refuse."""
    base = AffinePoint(params.gx, params.gy)
    with pytest.raises(ExceptionalAddition) as err:
        kp_right_to_left(Scalar.from_int(N), base, params)
    assert err.value.key_bit_index == 256
