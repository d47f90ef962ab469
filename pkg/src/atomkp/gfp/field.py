"""Prime-field contexts, field elements and curve parameters.

A :class:`MontgomeryContext` fixes a modulus and limb layout, derives the
Montgomery constants (R mod p, R^2 mod p, n0') and owns a kernel backend:
either the compiled extension (32-bit limbs) or the pure-Python fallback.
:class:`FieldElement` is an immutable limb vector bound to a context.

Multiplication of plain-domain values is the two-step route
``mont_mul(mont_mul(a, b), R^2)``; callers that want long chains in the
Montgomery domain can use ``to_mont``/``from_mont`` and raw ``mont_mul``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from ..errors import ZeroInverse
from ._pure import PureKernel

try:
    from ._kernels import CompiledKernel
except ImportError:  # extension not built; fall back silently
    CompiledKernel = None

_COMPILED_MAX_LIMBS = 16


def compiled_available() -> bool:
    return CompiledKernel is not None


def _pick_backend(pure: PureKernel, requested: str):
    """Return the kernel object to use for a context.

    ``requested`` is "auto", "compiled" or "pure".  The ATOMKP_BACKEND
    environment variable overrides "auto" (useful for benchmarking the
    fallback without touching code).
    """
    if requested == "auto":
        requested = os.environ.get("ATOMKP_BACKEND", "auto")
    if requested == "pure":
        return pure
    compiled_ok = (CompiledKernel is not None and pure.limb_bits == 32
                   and pure.limb_count <= _COMPILED_MAX_LIMBS)
    if requested == "compiled":
        if not compiled_ok:
            raise ValueError("compiled backend unavailable for this layout")
    elif requested != "auto":
        raise ValueError(f"unknown backend {requested!r}")
    if compiled_ok:
        return CompiledKernel(pure.p_limbs, pure.r_limbs, pure.r2_limbs,
                              pure.n0_prime, pure.inv_exp_bits)
    return pure


class MontgomeryContext:
    """Modulus + limb layout + derived Montgomery constants + backend.

    Parameters
    ----------
    p : odd prime modulus
    limb_bits : machine word width (32 for the compiled backend)
    limb_count : number of limbs; default is the smallest count that fits p
    backend : "auto" (default), "compiled" or "pure"
    """

    def __init__(self, p: int, limb_bits: int = 32, limb_count: int | None = None,
                 backend: str = "auto"):
        if limb_count is None:
            limb_count = max(1, -(-p.bit_length() // limb_bits))
        self._pure = PureKernel(p, limb_bits, limb_count)
        self._kernel = _pick_backend(self._pure, backend)
        self.p = p
        self.limb_bits = limb_bits
        self.limb_count = limb_count
        self.r_mod_p = self._pure.r_mod_p
        self.r2_mod_p = self._pure.r2_mod_p
        self.n0_prime = self._pure.n0_prime

    @property
    def backend_name(self) -> str:
        return self._kernel.name

    @property
    def op_counter(self):
        """Word-op counter of the pure backend, or None when the active
        backend is compiled (the compiled kernels are not instrumented;
        their equivalence is established against the pure backend)."""
        return getattr(self._kernel, "counter", None)

    # -- element construction ---------------------------------------------

    def element(self, value) -> "FieldElement":
        """Make a field element from an int (reduced mod p) or hex string."""
        if isinstance(value, str):
            value = int(value, 16)
        return FieldElement(self._pure.to_limbs(value % self.p), self)

    def zero(self) -> "FieldElement":
        return self.element(0)

    def one(self) -> "FieldElement":
        return self.element(1)

    def _wrap(self, limbs) -> "FieldElement":
        return FieldElement(limbs, self)

    def __repr__(self):
        return (f"MontgomeryContext(p=0x{self.p:X}, limb_bits={self.limb_bits}, "
                f"limb_count={self.limb_count}, backend={self.backend_name!r})")


@dataclass(frozen=True)
class FieldElement:
    """Immutable element of GF(p): little-endian limb tuple + context."""

    limbs: tuple
    ctx: MontgomeryContext

    def to_int(self) -> int:
        return self.ctx._pure.from_limbs(self.limbs)

    def to_hex(self) -> str:
        """Big-endian hex, fixed width, no 0x prefix."""
        width = self.ctx.limb_bits * self.ctx.limb_count // 4
        return format(self.to_int(), f"0{width}X")

    def is_zero(self) -> bool:
        return all(l == 0 for l in self.limbs)

    def hamming_weight(self) -> int:
        return sum(l.bit_count() for l in self.limbs)

    # convenience operators for reference formulas (plain domain)
    def __add__(self, other):
        return add_mod(self, other)

    def __sub__(self, other):
        return sub_mod(self, other)

    def __mul__(self, other):
        return mul_two_mont(self, other)

    def __repr__(self):
        return f"FieldElement(0x{self.to_int():X})"


def _same_ctx(a: FieldElement, b: FieldElement) -> MontgomeryContext:
    if a.ctx is not b.ctx:
        raise ValueError("field elements belong to different contexts")
    return a.ctx


def add_mod(a: FieldElement, b: FieldElement) -> FieldElement:
    ctx = _same_ctx(a, b)
    return ctx._wrap(ctx._kernel.add_mod(a.limbs, b.limbs))


def sub_mod(a: FieldElement, b: FieldElement) -> FieldElement:
    ctx = _same_ctx(a, b)
    return ctx._wrap(ctx._kernel.sub_mod(a.limbs, b.limbs))


def mont_mul(a: FieldElement, b: FieldElement) -> FieldElement:
    """Montgomery product a*b*R^-1 mod p."""
    ctx = _same_ctx(a, b)
    return ctx._wrap(ctx._kernel.mont_mul(a.limbs, b.limbs))


def mul_two_mont(a: FieldElement, b: FieldElement) -> FieldElement:
    """Plain-domain product via two Montgomery multiplications."""
    ctx = _same_ctx(a, b)
    return ctx._wrap(ctx._kernel.mul_two_mont(a.limbs, b.limbs))


def square_mod(a: FieldElement) -> FieldElement:
    """Plain-domain square; logged by callers as a distinct op kind."""
    ctx = a.ctx
    return ctx._wrap(ctx._kernel.mul_two_mont(a.limbs, a.limbs))


def to_mont(a: FieldElement) -> FieldElement:
    return a.ctx._wrap(a.ctx._kernel.to_mont(a.limbs))


def from_mont(a: FieldElement) -> FieldElement:
    return a.ctx._wrap(a.ctx._kernel.from_mont(a.limbs))


def inverse_mod(a: FieldElement) -> FieldElement:
    """Multiplicative inverse via the fixed a^(p-2) ladder.

    Raises ZeroInverse for a == 0.
    """
    if a.is_zero():
        raise ZeroInverse("inverse of zero requested")
    return a.ctx._wrap(a.ctx._kernel.inverse_mod(a.limbs))


@dataclass(frozen=True)
class CurveParams:
    """Short-Weierstrass curve y^2 = x^3 + a*x + b over GF(p).

    Construction validates non-singularity (4a^3 + 27b^2 != 0) and that the
    base point satisfies the curve equation.
    """

    ctx: MontgomeryContext
    a: FieldElement
    b: FieldElement
    gx: FieldElement
    gy: FieldElement
    n: int            # base-point order
    h: int            # cofactor
    seed: int | None  # generation seed, informational
    name: str = ""

    def __post_init__(self):
        four = self.ctx.element(4)
        t27 = self.ctx.element(27)
        disc = four * self.a * self.a * self.a + t27 * self.b * self.b
        if disc.is_zero():
            raise ValueError("singular curve: 4a^3 + 27b^2 == 0")
        lhs = self.gy * self.gy
        rhs = self.gx * self.gx * self.gx + self.a * self.gx + self.b
        if lhs != rhs:
            raise ValueError("base point is not on the curve")


# NIST P-256 domain parameters.
_P256_P = 0xFFFFFFFF00000001000000000000000000000000FFFFFFFFFFFFFFFFFFFFFFFF
_P256_A = 0xFFFFFFFF00000001000000000000000000000000FFFFFFFFFFFFFFFFFFFFFFFC
_P256_B = 0x5AC635D8AA3A93E7B3EBBD55769886BC651D06B0CC53B0F63BCE3C3E27D2604B
_P256_GX = 0x6B17D1F2E12C4247F8BCE6E563A440F277037D812DEB33A0F4A13945D898C296
_P256_GY = 0x4FE342E2FE1A7F9B8EE7EB4A7C0F9E162BCE33576B315ECECBB6406837BF51F5
_P256_N = 0xFFFFFFFF00000000FFFFFFFFFFFFFFFFBCE6FAADA7179E84F3B9CAC2FC632551
_P256_SEED = 0xC49D360886E704936A6678E1139D26B7819F7E90


def p256(backend: str = "auto") -> CurveParams:
    """NIST P-256 with the standard 8 x 32-bit limb layout."""
    ctx = MontgomeryContext(_P256_P, limb_bits=32, limb_count=8,
                            backend=backend)
    return CurveParams(
        ctx=ctx,
        a=ctx.element(_P256_A),
        b=ctx.element(_P256_B),
        gx=ctx.element(_P256_GX),
        gy=ctx.element(_P256_GY),
        n=_P256_N,
        h=1,
        seed=_P256_SEED,
        name="P-256",
    )
