"""Atomic block shape and algebra.

Every block must execute the one canonical 18-operation sequence, keep
its dummies inert, and still compute the right group operation.  The
algebraic reference is the integer-formula oracle duplicated from the
curve tests (kept local so each file reads standalone).
"""

import random

import pytest

from atomkp.blocks import (BLOCK_CLASSES, CANONICAL_KINDS, RegisterFile,
                           atomic_add_block1, atomic_add_block2,
                           atomic_double_block)
from atomkp.curve import (AffinePoint, JacobianPoint, ModifiedJacobianPoint,
                          jacobian_to_affine)
from atomkp.errors import DegenerateInput, ExceptionalAddition

P = 0xFFFFFFFF00000001000000000000000000000000FFFFFFFFFFFFFFFFFFFFFFFF
A = P - 3

ADD1_DUMMIES = (2, 4, 6, 8, 9, 12, 15, 16)
ADD2_DUMMIES = (2, 4, 6, 8, 9)


def _oracle_double(pt):
    x, y = pt
    lam = (3 * x * x + A) * pow(2 * y, -1, P) % P
    x3 = (lam * lam - 2 * x) % P
    return (x3, (lam * (x - x3) - y) % P)


def _oracle_add(p, q):
    lam = (q[1] - p[1]) * pow(q[0] - p[0], -1, P) % P
    x3 = (lam * lam - p[0] - q[0]) % P
    return (x3, (lam * (p[0] - x3) - p[1]) % P)


def _oracle_mul(k, pt):
    acc = None
    while k:
        if k & 1:
            acc = pt if acc is None else _oracle_add(acc, pt)
        pt = _oracle_double(pt)
        k >>= 1
    return acc


def _mj(params, pt):
    return ModifiedJacobianPoint.from_affine(
        AffinePoint(params.ctx.element(pt[0]), params.ctx.element(pt[1])),
        params)


def _jac(params, pt):
    return _mj(params, pt).to_jacobian()


def _ints(params, jac):
    pt = jacobian_to_affine(jac, params)
    return (pt.x.to_int(), pt.y.to_int())


def _points(params, n, seed):
    rng = random.Random(seed)
    g = (params.gx.to_int(), params.gy.to_int())
    return [_oracle_mul(rng.randrange(2, 1 << 30), g) for _ in range(n)]


def test_double_block_algebra_and_w(params):
    for pt in _points(params, 15, 20):
        out, log = atomic_double_block(_mj(params, pt))
        log.validate()
        assert _ints(params, out.to_jacobian()) == _oracle_double(pt)
        # W stays coherent: W == a * Z^4
        z2 = out.z * out.z
        assert out.w == params.a * z2 * z2


def test_add_blocks_algebra(params):
    pts = _points(params, 16, 21)
    for p, q in zip(pts[::2], pts[1::2]):
        regs = RegisterFile()
        log1 = atomic_add_block1(_jac(params, p), _jac(params, q), regs)
        result, log2 = atomic_add_block2(regs)
        log1.validate()
        log2.validate()
        assert _ints(params, result) == _oracle_add(p, q)


def test_canonical_shape_and_dummy_positions(params):
    (p,) = _points(params, 1, 22)
    q = _oracle_double(p)
    _, dlog = atomic_double_block(_mj(params, p))
    regs = RegisterFile()
    log1 = atomic_add_block1(_jac(params, p), _jac(params, q), regs)
    _, log2 = atomic_add_block2(regs)
    for log in (dlog, log1, log2):
        assert log.block_class in BLOCK_CLASSES
        assert log.kinds() == CANONICAL_KINDS
        assert log.kind_counts() == {"Sq": 2, "M": 6, "A": 6, "S": 4}
    assert dlog.dummy_positions() == ()
    assert log1.dummy_positions() == ADD1_DUMMIES
    assert log2.dummy_positions() == ADD2_DUMMIES


def test_dummies_are_inert(params):
    """Poisoning tmpReg before a block never changes the real result."""
    pts = _points(params, 4, 23)
    for p, q in zip(pts[::2], pts[1::2]):
        results = []
        for poison in (0, 12345):
            regs = RegisterFile()
            regs["tmpReg"] = params.ctx.element(poison)
            atomic_add_block1(_jac(params, p), _jac(params, q), regs)
            result, _ = atomic_add_block2(regs)
            results.append(_ints(params, result))
        assert results[0] == results[1]

        outs = []
        for poison in (0, 99999):
            regs = RegisterFile()
            regs["tmpReg"] = params.ctx.element(poison)
            out, _ = atomic_double_block(_mj(params, p), regs)
            outs.append(_ints(params, out.to_jacobian()))
        assert outs[0] == outs[1]


def test_degenerate_inputs_raise(params):
    (p,) = _points(params, 1, 24)
    x, y = params.ctx.element(p[0]), params.ctx.element(p[1])
    zero, one = params.ctx.zero(), params.ctx.one()
    with pytest.raises(DegenerateInput):
        atomic_double_block(ModifiedJacobianPoint(x, zero, one, params.a))
    with pytest.raises(DegenerateInput):
        atomic_double_block(ModifiedJacobianPoint(x, y, zero, params.a))
    with pytest.raises(DegenerateInput):
        atomic_add_block1(JacobianPoint(x, y, zero), _jac(params, p),
                          RegisterFile())


def test_exceptional_addition_on_shared_x(params):
    """P and -P (and P and P) project to the same x: Delta-x == 0 must be
    caught at the entry of the second addition block."""
    (p,) = _points(params, 1, 25)
    minus = (p[0], P - p[1])
    for other in (p, minus):
        regs = RegisterFile()
        atomic_add_block1(_jac(params, p), _jac(params, other), regs,
                          key_bit_index=7)
        with pytest.raises(ExceptionalAddition) as err:
            atomic_add_block2(regs, key_bit_index=7)
        assert err.value.key_bit_index == 7
