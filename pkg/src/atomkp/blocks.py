"""Atomic 18-operation blocks for Jacobian point arithmetic.

Every block — one for a modified-Jacobian doubling, two chained ones for a
Jacobian addition — executes the identical operation-kind sequence

    Sq A M A M A M A A Sq M A S M S S M S

(2 squarings, 6 multiplications, 6 additions, 4 subtractions).  Positions
that a given block does not need arithmetically are filled with dummy
operations: real field computations on real registers whose result goes to a
scratch register (``tmpReg``) that no real operation ever reads.  A side
channel that can only distinguish operation *kinds* therefore sees the same
pattern in every block.

The addition is split in half (block 1 computes the shared intermediates,
block 2 finishes the output point) and the register file persists between the
two halves.  Block 2 must start with Delta-x != 0 in R6; otherwise the
formula degenerates and :class:`ExceptionalAddition` is raised.

Each executed block emits a :class:`BlockLog` that records, per operation:
kind, destination, sources, dummy flag and the operand Hamming weights (the
last one feeds the trace simulator's data-dependent modulation).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .curve import JacobianPoint, ModifiedJacobianPoint
from .errors import DegenerateInput, ExceptionalAddition
from .gfp import add_mod, mul_two_mont, square_mod, sub_mod

#: Operation kinds at positions 1..18, shared by all block classes.
CANONICAL_KINDS = ("Sq", "A", "M", "A", "M", "A", "M", "A", "A",
                   "Sq", "M", "A", "S", "M", "S", "S", "M", "S")

BLOCK_CLASSES = ("Dbl", "Add1", "Add2")

_SLOT_NAMES = ("R1", "R2", "R3", "R4", "R5", "R6", "tmpReg",
               "X1", "Y1", "Z1", "W1", "X2", "Y2", "Z2", "W2",
               "X3", "Y3", "Z3")


class RegisterFile:
    """Named register slots holding field elements.

    Working registers R1-R6, the dummy sink tmpReg, and the named
    input/output slots.  Contents persist for as long as the caller keeps
    the object, which is what carries state from Add1 into Add2.
    """

    def __init__(self):
        self._slots = {name: None for name in _SLOT_NAMES}

    def __getitem__(self, name):
        if name not in self._slots:
            raise KeyError(f"unknown register {name!r}")
        value = self._slots[name]
        if value is None:
            raise LookupError(f"register {name!r} read before being set")
        return value

    def __setitem__(self, name, value):
        if name not in self._slots:
            raise KeyError(f"unknown register {name!r}")
        self._slots[name] = value

    def is_set(self, name) -> bool:
        return self._slots.get(name) is not None


@dataclass(frozen=True)
class BlockLogEntry:
    op_kind: str           # "Sq" | "A" | "M" | "S"
    dest: str
    sources: tuple
    is_dummy: bool
    source_weights: tuple  # Hamming weight of each source operand value


@dataclass
class BlockLog:
    block_class: str       # "Dbl" | "Add1" | "Add2"
    key_bit_index: int     # 1-based key bit this block was executed for
    entries: list = field(default_factory=list)

    def kinds(self) -> tuple:
        return tuple(e.op_kind for e in self.entries)

    def kind_counts(self) -> dict:
        counts = {"Sq": 0, "A": 0, "M": 0, "S": 0}
        for e in self.entries:
            counts[e.op_kind] += 1
        return counts

    def dummy_positions(self) -> tuple:
        """1-based operation indices that are dummies."""
        return tuple(i + 1 for i, e in enumerate(self.entries) if e.is_dummy)

    def validate(self):
        """Assert the canonical shape; raises ValueError on any deviation."""
        if self.block_class not in BLOCK_CLASSES:
            raise ValueError(f"unknown block class {self.block_class!r}")
        if self.kinds() != CANONICAL_KINDS:
            raise ValueError("operation kinds deviate from the canonical "
                             f"sequence: {self.kinds()}")
        for e in self.entries:
            if e.is_dummy and e.dest != "tmpReg":
                raise ValueError("dummy operation writing outside tmpReg")
            if not e.is_dummy and "tmpReg" in e.sources:
                raise ValueError("real operation reading tmpReg")

    def to_json(self) -> str:
        """One-line JSON record."""
        return json.dumps({
            "block_class": self.block_class,
            "key_bit_index": self.key_bit_index,
            "entries": [
                {"op_kind": e.op_kind, "dest": e.dest,
                 "sources": list(e.sources), "is_dummy": e.is_dummy,
                 "source_weights": list(e.source_weights)}
                for e in self.entries
            ],
        }, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> "BlockLog":
        raw = json.loads(line)
        log = cls(raw["block_class"], raw["key_bit_index"])
        for e in raw["entries"]:
            log.entries.append(BlockLogEntry(
                e["op_kind"], e["dest"], tuple(e["sources"]), e["is_dummy"],
                tuple(e["source_weights"])))
        return log


def _run(regs: RegisterFile, log: BlockLog, ops):
    """Execute an 18-op program: (kind, dest, sources, is_dummy) tuples."""
    for kind, dest, sources, is_dummy in ops:
        vals = [regs[s] for s in sources]
        if kind == "A":
            res = add_mod(vals[0], vals[1])
        elif kind == "S":
            res = sub_mod(vals[0], vals[1])
        elif kind == "M":
            res = mul_two_mont(vals[0], vals[1])
        elif kind == "Sq":
            res = square_mod(vals[0])
        else:  # pragma: no cover - programs are static
            raise ValueError(f"unknown op kind {kind!r}")
        regs[dest] = res
        log.entries.append(BlockLogEntry(
            kind, dest, tuple(sources), is_dummy,
            tuple(v.hamming_weight() for v in vals)))


# Doubling of (X1, Y1, Z1, W1) into (X2, Y2, Z2, W2).  No dummy slots: the
# modified-Jacobian doubling needs all 18 positions.
_DBL_OPS = (
    ("Sq", "R1", ("X1",), False),
    ("A",  "R2", ("Y1", "Y1"), False),
    ("M",  "Z2", ("R2", "Z1"), False),
    ("A",  "R4", ("R1", "R1"), False),
    ("M",  "R3", ("R2", "Y1"), False),
    ("A",  "R6", ("R3", "R3"), False),
    ("M",  "R2", ("R6", "R3"), False),
    ("A",  "R1", ("R4", "R1"), False),
    ("A",  "R1", ("R1", "W1"), False),
    ("Sq", "R3", ("R1",), False),
    ("M",  "R4", ("R6", "X1"), False),
    ("A",  "R5", ("W1", "W1"), False),
    ("S",  "R3", ("R3", "R4"), False),
    ("M",  "W2", ("R2", "R5"), False),
    ("S",  "X2", ("R3", "R4"), False),
    ("S",  "R6", ("R4", "X2"), False),
    ("M",  "R4", ("R6", "R1"), False),
    ("S",  "Y2", ("R4", "R2"), False),
)

# First half of the addition P=(X1,Y1,Z1) + Q=(X2,Y2,Z2): leaves
# R1=Z2^2, R2=Dy, R3=Y1*Z2^3, R4=Z1^2, R5=X1*Z2^2, R6=Dx in the registers.
# Dummies at positions 2, 4, 6, 8, 9, 12, 15, 16.
_ADD1_OPS = (
    ("Sq", "R1", ("Z2",), False),
    ("A",  "tmpReg", ("R1", "Z1"), True),
    ("M",  "R2", ("Y1", "Z2"), False),
    ("A",  "tmpReg", ("R2", "Z2"), True),
    ("M",  "R5", ("Y2", "Z1"), False),
    ("A",  "tmpReg", ("R2", "Z2"), True),
    ("M",  "R3", ("R1", "R2"), False),
    ("A",  "tmpReg", ("R3", "R1"), True),
    ("A",  "tmpReg", ("R5", "Z2"), True),
    ("Sq", "R4", ("Z1",), False),
    ("M",  "R2", ("R5", "R4"), False),
    ("A",  "tmpReg", ("R2", "R4"), True),
    ("S",  "R2", ("R2", "R3"), False),
    ("M",  "R5", ("R1", "X1"), False),
    ("S",  "tmpReg", ("R5", "X1"), True),
    ("S",  "tmpReg", ("R5", "X2"), True),
    ("M",  "R6", ("X2", "R4"), False),
    ("S",  "R6", ("R6", "R5"), False),
)

# Second half: consumes the Add1 register state plus the still-loaded Z1, Z2
# slots and writes (X3, Y3, Z3).  Dummies at positions 2, 4, 6, 8, 9.
_ADD2_OPS = (
    ("Sq", "R1", ("R6",), False),
    ("A",  "tmpReg", ("R2", "R3"), True),
    ("M",  "R4", ("R5", "R1"), False),
    ("A",  "tmpReg", ("R4", "R3"), True),
    ("M",  "R5", ("R1", "R6"), False),
    ("A",  "tmpReg", ("R5", "R6"), True),
    ("M",  "R1", ("Z1", "R6"), False),
    ("A",  "tmpReg", ("R1", "Z1"), True),
    ("A",  "tmpReg", ("R2", "R6"), True),
    ("Sq", "R6", ("R2",), False),
    ("M",  "Z3", ("R1", "Z2"), False),
    ("A",  "R1", ("R4", "R4"), False),
    ("S",  "R6", ("R6", "R1"), False),
    ("M",  "R1", ("R5", "R3"), False),
    ("S",  "X3", ("R6", "R5"), False),
    ("S",  "R4", ("R4", "X3"), False),
    ("M",  "R3", ("R4", "R2"), False),
    ("S",  "Y3", ("R3", "R1"), False),
)


def atomic_double_block(point: ModifiedJacobianPoint,
                        regs: RegisterFile | None = None,
                        key_bit_index: int = 0):
    """One atomic block doubling a modified-Jacobian point.

    Returns (2*point, BlockLog).  Requires Z != 0 and Y != 0 (the caller
    never doubles the point at infinity or a 2-torsion point in a scalar
    multiplication on a prime-order subgroup).
    """
    if point.z.is_zero() or point.y.is_zero():
        raise DegenerateInput("doubling requires Y != 0 and Z != 0")
    if regs is None:
        regs = RegisterFile()
    regs["X1"] = point.x
    regs["Y1"] = point.y
    regs["Z1"] = point.z
    regs["W1"] = point.w
    log = BlockLog("Dbl", key_bit_index)
    _run(regs, log, _DBL_OPS)
    out = ModifiedJacobianPoint(regs["X2"], regs["Y2"], regs["Z2"], regs["W2"])
    return out, log


def atomic_add_block1(p: JacobianPoint, q: JacobianPoint, regs: RegisterFile,
                      key_bit_index: int = 0) -> BlockLog:
    """First half of the atomic Jacobian addition P + Q.

    Loads both points into the register file and leaves the shared
    intermediates in R1..R6 for :func:`atomic_add_block2`.
    """
    if p.z.is_zero() or q.z.is_zero():
        raise DegenerateInput("addition blocks require finite points")
    regs["X1"] = p.x
    regs["Y1"] = p.y
    regs["Z1"] = p.z
    regs["X2"] = q.x
    regs["Y2"] = q.y
    regs["Z2"] = q.z
    log = BlockLog("Add1", key_bit_index)
    _run(regs, log, _ADD1_OPS)
    return log


def atomic_add_block2(regs: RegisterFile, key_bit_index: int = 0):
    """Second half of the atomic addition; returns (P + Q, BlockLog).

    Raises ExceptionalAddition when the operands share an x coordinate
    (Delta-x == 0 in R6), i.e. P == +-Q after projection.
    """
    if regs["R6"].is_zero():
        raise ExceptionalAddition(
            "addition operands project to the same x coordinate",
            key_bit_index=key_bit_index or None)
    log = BlockLog("Add2", key_bit_index)
    _run(regs, log, _ADD2_OPS)
    out = JacobianPoint(regs["X3"], regs["Y3"], regs["Z3"])
    return out, log
