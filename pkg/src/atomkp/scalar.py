"""Scalar multiplication k*P built from atomic blocks, plus reference ladders.

The production path is the right-to-left double-and-add:

    Q <- O ; R <- P
    for i = 0 .. n-1:  if k_i == 1: Q <- Q + R ;  R <- 2R

Every iteration doubles, so the block stream leaks only the Hamming weight
through its length, and each processed key bit emits blocks in the order
Add1, Add2 (when k_i is 1) then Dbl, with NOP gaps of 1000 / 2000 / 3000
cycles after them respectively.  The gap lengths are deliberately distinct so
a segmented trace is self-describing.

The very first set bit has no accumulator yet; instead of skipping the
addition (which would leak the position of that bit through a missing block
pair) the implementation runs the two addition blocks on a shadow operand
pair with a guaranteed-regular input, discards the result, and loads R into
Q.  The trace shape is therefore identical for every set bit.

``kp_left_to_right`` and ``naive_kp`` are independent affine oracles used to
cross-check the block path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .blocks import (RegisterFile, atomic_add_block1, atomic_add_block2,
                     atomic_double_block)
from .curve import (AffinePoint, JacobianPoint, ModifiedJacobianPoint,
                    affine_add, affine_double, jacobian_to_affine)
from .gfp import CurveParams, add_mod

#: NOP gap sizes (in NOP instructions) emitted after each block class.
NOP_AFTER_ADD1 = 1000
NOP_AFTER_ADD2 = 2000
NOP_AFTER_DBL = 3000

NOP_COUNTS = (NOP_AFTER_ADD1, NOP_AFTER_ADD2, NOP_AFTER_DBL)


@dataclass(frozen=True)
class Scalar:
    """A scalar as an explicit bit vector with a declared length.

    ``bits[i]`` is k_i (bit i of k, LSB first); the length may exceed the
    minimal bit length to model fixed-width keys.
    """

    bits: tuple

    def __post_init__(self):
        if len(self.bits) == 0 or any(b not in (0, 1) for b in self.bits):
            raise ValueError("scalar needs a non-empty vector of 0/1 bits")

    @classmethod
    def from_int(cls, value: int, length: int | None = None) -> "Scalar":
        if value < 0:
            raise ValueError("scalar must be non-negative")
        n = length if length is not None else max(1, value.bit_length())
        if value.bit_length() > n:
            raise ValueError("declared length too small for value")
        return cls(tuple((value >> i) & 1 for i in range(n)))

    @classmethod
    def from_string(cls, text: str) -> "Scalar":
        """Parse a key string: all-0/1 strings are binary (MSB first,
        length preserved), anything else is hexadecimal."""
        t = text.strip().lower()
        if t.startswith("0b"):
            return cls(tuple(1 if c == "1" else 0 for c in reversed(t[2:])))
        if t.startswith("0x"):
            return cls.from_int(int(t, 16))
        if t and all(c in "01" for c in t):
            return cls(tuple(1 if c == "1" else 0 for c in reversed(t)))
        return cls.from_int(int(t, 16))

    @property
    def length(self) -> int:
        return len(self.bits)

    @property
    def value(self) -> int:
        return sum(b << i for i, b in enumerate(self.bits))

    def hamming_weight(self) -> int:
        return sum(self.bits)

    def to_binary(self) -> str:
        return "".join(str(b) for b in reversed(self.bits))


@dataclass(frozen=True)
class BlockEvent:
    block_class: str          # "Dbl" | "Add1" | "Add2"
    key_bit_index: int        # 1-based
    cycle_cost: int | None = None   # filled in when a simulation prices it


@dataclass(frozen=True)
class NopEvent:
    count: int                # 1000 | 2000 | 3000
    cycle_cost: int | None = None


@dataclass
class ExecutionSchedule:
    """Ordered block/NOP event stream of one scalar multiplication."""

    key_length: int
    events: list = field(default_factory=list)

    def block_events(self) -> list:
        return [e for e in self.events if isinstance(e, BlockEvent)]

    def class_counts(self) -> dict:
        counts = {"Dbl": 0, "Add1": 0, "Add2": 0}
        for e in self.block_events():
            counts[e.block_class] += 1
        return counts


def kp_right_to_left(k: Scalar, p: AffinePoint, params: CurveParams):
    """Right-to-left atomic double-and-add.

    Returns (k*P as AffinePoint, ExecutionSchedule, [BlockLog, ...]) with one
    log per block event, in event order.  Raises ExceptionalAddition if an
    addition degenerates (e.g. k equal to the group order hits Q == -R on
    the final set bit).
    """
    if p.is_infinity:
        raise ValueError("base point must be finite")
    schedule = ExecutionSchedule(key_length=k.length)
    logs = []
    r = ModifiedJacobianPoint.from_affine(p, params)
    q: JacobianPoint | None = None
    one = params.ctx.one()

    for i, bit in enumerate(k.bits):
        bit_index = i + 1
        if bit:
            regs = RegisterFile()
            if q is None:
                # Shadow addition: same block stream, discarded result.
                # Using Q = (X+1, Y, Z) guarantees Delta-x = Z^2 != 0.
                shadow = JacobianPoint(add_mod(r.x, one), r.y, r.z)
                logs.append(atomic_add_block1(r.to_jacobian(), shadow, regs,
                                              bit_index))
                schedule.events.append(BlockEvent("Add1", bit_index))
                schedule.events.append(NopEvent(NOP_AFTER_ADD1))
                _, log2 = atomic_add_block2(regs, bit_index)
                logs.append(log2)
                schedule.events.append(BlockEvent("Add2", bit_index))
                schedule.events.append(NopEvent(NOP_AFTER_ADD2))
                q = r.to_jacobian()
            else:
                logs.append(atomic_add_block1(r.to_jacobian(), q, regs,
                                              bit_index))
                schedule.events.append(BlockEvent("Add1", bit_index))
                schedule.events.append(NopEvent(NOP_AFTER_ADD1))
                q, log2 = atomic_add_block2(regs, bit_index)
                logs.append(log2)
                schedule.events.append(BlockEvent("Add2", bit_index))
                schedule.events.append(NopEvent(NOP_AFTER_ADD2))
        r, dlog = atomic_double_block(r, key_bit_index=bit_index)
        logs.append(dlog)
        schedule.events.append(BlockEvent("Dbl", bit_index))
        schedule.events.append(NopEvent(NOP_AFTER_DBL))

    if q is None:
        return AffinePoint.infinity(), schedule, logs
    return jacobian_to_affine(q, params), schedule, logs


def kp_left_to_right(k: Scalar, p: AffinePoint, params: CurveParams) -> AffinePoint:
    """Left-to-right affine double-and-add reference.

    Scans from the bit below the most significant set bit down to bit 0,
    starting with Q = P.
    """
    value = k.value
    if value == 0:
        return AffinePoint.infinity()
    if p.is_infinity:
        raise ValueError("base point must be finite")
    q = p
    for i in range(value.bit_length() - 2, -1, -1):
        q = affine_double(q, params)
        if (value >> i) & 1:
            q = affine_add(q, p, params)
    return q


def naive_kp(k: int, p: AffinePoint, params: CurveParams) -> AffinePoint:
    """k repeated affine additions; independent oracle for small k."""
    if not 0 <= k <= 1 << 14:
        raise ValueError("naive_kp is limited to 0 <= k <= 2^14")
    acc = AffinePoint.infinity()
    for _ in range(k):
        acc = affine_add(acc, p, params)
    return acc
