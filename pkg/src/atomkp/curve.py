"""Point types and affine reference arithmetic on short-Weierstrass curves.

Three coordinate systems appear here:

* affine (x, y) with an explicit point at infinity,
* Jacobian (X, Y, Z) with x = X/Z^2, y = Y/Z^3 and O = (1, 1, 0),
* modified Jacobian (X, Y, Z, W) where W = a*Z^4 is carried along so a
  doubling never needs the curve constant.

The affine routines are the slow, regular-by-accident reference path used to
cross-check the atomic-block path; they invert denominators directly.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DegenerateInput
from .gfp import CurveParams, FieldElement, inverse_mod


@dataclass(frozen=True)
class AffinePoint:
    x: FieldElement | None
    y: FieldElement | None

    @classmethod
    def infinity(cls) -> "AffinePoint":
        return cls(None, None)

    @property
    def is_infinity(self) -> bool:
        return self.x is None

    def __repr__(self):
        if self.is_infinity:
            return "AffinePoint(infinity)"
        return f"AffinePoint(x=0x{self.x.to_int():X}, y=0x{self.y.to_int():X})"


@dataclass(frozen=True)
class JacobianPoint:
    x: FieldElement
    y: FieldElement
    z: FieldElement

    @classmethod
    def infinity(cls, params: CurveParams) -> "JacobianPoint":
        one = params.ctx.one()
        return cls(one, one, params.ctx.zero())

    @classmethod
    def from_affine(cls, pt: AffinePoint, params: CurveParams) -> "JacobianPoint":
        if pt.is_infinity:
            return cls.infinity(params)
        return cls(pt.x, pt.y, params.ctx.one())

    @property
    def is_infinity(self) -> bool:
        return self.z.is_zero()


@dataclass(frozen=True)
class ModifiedJacobianPoint:
    """Jacobian point extended with W = a*Z^4."""

    x: FieldElement
    y: FieldElement
    z: FieldElement
    w: FieldElement

    @classmethod
    def from_affine(cls, pt: AffinePoint, params: CurveParams) -> "ModifiedJacobianPoint":
        if pt.is_infinity:
            raise DegenerateInput("cannot lift the point at infinity")
        # Z = 1, so W = a
        return cls(pt.x, pt.y, params.ctx.one(), params.a)

    def to_jacobian(self) -> JacobianPoint:
        return JacobianPoint(self.x, self.y, self.z)


def is_on_curve(pt: AffinePoint, params: CurveParams) -> bool:
    """Check y^2 == x^3 + a*x + b (the point at infinity counts as on-curve)."""
    if pt.is_infinity:
        return True
    lhs = pt.y * pt.y
    rhs = pt.x * pt.x * pt.x + params.a * pt.x + params.b
    return lhs == rhs


def affine_negate(pt: AffinePoint, params: CurveParams) -> AffinePoint:
    if pt.is_infinity:
        return pt
    return AffinePoint(pt.x, params.ctx.zero() - pt.y)


def affine_double(pt: AffinePoint, params: CurveParams) -> AffinePoint:
    """2*P with lambda = (3x^2 + a) / (2y); returns O when y == 0."""
    if pt.is_infinity:
        return pt
    if pt.y.is_zero():
        return AffinePoint.infinity()
    ctx = params.ctx
    three = ctx.element(3)
    two = ctx.element(2)
    lam = (three * pt.x * pt.x + params.a) * inverse_mod(two * pt.y)
    x3 = lam * lam - pt.x - pt.x
    y3 = lam * (pt.x - x3) - pt.y
    return AffinePoint(x3, y3)


def affine_add(p: AffinePoint, q: AffinePoint, params: CurveParams) -> AffinePoint:
    """P + Q with lambda = (y2 - y1) / (x2 - x1), handling all special cases."""
    if p.is_infinity:
        return q
    if q.is_infinity:
        return p
    if p.x == q.x:
        if p.y == q.y:
            return affine_double(p, params)
        return AffinePoint.infinity()  # q == -p
    lam = (q.y - p.y) * inverse_mod(q.x - p.x)
    x3 = lam * lam - p.x - q.x
    y3 = lam * (p.x - x3) - p.y
    return AffinePoint(x3, y3)


def jacobian_to_affine(pt: JacobianPoint, params: CurveParams) -> AffinePoint:
    if pt.is_infinity:
        return AffinePoint.infinity()
    zi = inverse_mod(pt.z)
    zi2 = zi * zi
    return AffinePoint(pt.x * zi2, pt.y * zi2 * zi)
