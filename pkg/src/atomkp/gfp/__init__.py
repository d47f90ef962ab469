"""Prime-field arithmetic: Montgomery contexts, field elements, curve params."""

from .field import (
    CurveParams,
    FieldElement,
    MontgomeryContext,
    add_mod,
    compiled_available,
    from_mont,
    inverse_mod,
    mont_mul,
    mul_two_mont,
    p256,
    square_mod,
    sub_mod,
    to_mont,
)

__all__ = [
    "CurveParams",
    "FieldElement",
    "MontgomeryContext",
    "add_mod",
    "compiled_available",
    "from_mont",
    "inverse_mod",
    "mont_mul",
    "mul_two_mont",
    "p256",
    "square_mod",
    "sub_mod",
    "to_mont",
]
