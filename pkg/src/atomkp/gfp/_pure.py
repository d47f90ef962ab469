"""Pure-Python limb-level Montgomery kernels (reference / fallback backend).

The kernels mirror what a word-oriented hardware or C implementation does:
operands are little-endian vectors of ``limb_bits``-wide words, multiplication
uses the separated operand scanning (SOS) method, and the conditional final
reductions are done with masked word selects instead of branches.  For a fixed
limb layout every kernel therefore executes the same word-level operation
sequence regardless of operand values; the attached :class:`OpCounter`
measures that sequence so tests can assert it.

This backend works for any odd modulus and any limb layout.  It is slow
(Python-int arithmetic per word) and exists as the always-available fallback
and as the instrumented reference for the compiled backend.
"""

from __future__ import annotations


class OpCounter:
    """Counts word-level operations as the kernels execute them.

    Categories: single-word multiplies (``mul``), word additions including
    carry updates (``add``), word subtractions including borrow updates
    (``sub``) and masked conditional selects (``select``).
    """

    __slots__ = ("mul", "add", "sub", "select")

    def __init__(self):
        self.reset()

    def reset(self):
        self.mul = 0
        self.add = 0
        self.sub = 0
        self.select = 0

    def snapshot(self) -> dict:
        return {"mul": self.mul, "add": self.add, "sub": self.sub,
                "select": self.select}


class PureKernel:
    """Montgomery arithmetic for one modulus and limb layout.

    Limbs are little-endian tuples of ints in ``[0, 2**limb_bits)``.
    All public methods take and return such tuples; values are kept in
    ``[0, p)``.
    """

    name = "pure"

    def __init__(self, p: int, limb_bits: int, limb_count: int):
        if p < 3 or p % 2 == 0:
            raise ValueError("modulus must be an odd integer >= 3")
        if limb_bits < 8:
            raise ValueError("limb_bits must be at least 8")
        if p >= 1 << (limb_bits * limb_count):
            raise ValueError("modulus does not fit the limb layout")
        self.p = p
        self.limb_bits = limb_bits
        self.limb_count = limb_count
        self.mask = (1 << limb_bits) - 1
        self.r = 1 << (limb_bits * limb_count)
        self.r_mod_p = self.r % p
        self.r2_mod_p = (self.r * self.r) % p
        # n0' = -p^-1 mod 2^limb_bits, the per-word reduction factor.
        self.n0_prime = (-pow(p, -1, 1 << limb_bits)) % (1 << limb_bits)
        self.p_limbs = self.to_limbs(p)
        self.r_limbs = self.to_limbs(self.r_mod_p)
        self.r2_limbs = self.to_limbs(self.r2_mod_p)
        self.one_limbs = self.to_limbs(1)
        exp = p - 2
        self.inv_exp_bits = tuple(
            (exp >> i) & 1 for i in range(exp.bit_length() - 1, -1, -1))
        self.counter = OpCounter()

    # -- limb packing ------------------------------------------------------

    def to_limbs(self, value: int) -> tuple:
        b, m, n = self.limb_bits, self.mask, self.limb_count
        return tuple((value >> (i * b)) & m for i in range(n))

    def from_limbs(self, limbs) -> int:
        b = self.limb_bits
        v = 0
        for i, limb in enumerate(limbs):
            v |= limb << (i * b)
        return v

    # -- kernels -----------------------------------------------------------

    def add_mod(self, a, b):
        n, w, mask = self.limb_count, self.limb_bits, self.mask
        c = self.counter
        p = self.p_limbs
        s = [0] * n
        carry = 0
        for i in range(n):
            cur = a[i] + b[i] + carry
            c.add += 2
            s[i] = cur & mask
            carry = cur >> w
        d = [0] * n
        borrow = 0
        for i in range(n):
            cur = s[i] - p[i] - borrow
            c.sub += 2
            d[i] = cur & mask
            borrow = (cur >> w) & 1
        # use the subtracted value when the raw sum reached p
        use_d = carry | (1 - borrow)
        return self._select(d, s, use_d)

    def sub_mod(self, a, b):
        n, w, mask = self.limb_count, self.limb_bits, self.mask
        c = self.counter
        p = self.p_limbs
        d = [0] * n
        borrow = 0
        for i in range(n):
            cur = a[i] - b[i] - borrow
            c.sub += 2
            d[i] = cur & mask
            borrow = (cur >> w) & 1
        s = [0] * n
        carry = 0
        for i in range(n):
            cur = d[i] + p[i] + carry
            c.add += 2
            s[i] = cur & mask
            carry = cur >> w
        return self._select(s, d, borrow)

    def mont_mul(self, a, b):
        """SOS Montgomery multiplication: returns a*b*R^-1 mod p."""
        n, w, mask = self.limb_count, self.limb_bits, self.mask
        c = self.counter
        p = self.p_limbs
        n0p = self.n0_prime
        t = [0] * (2 * n + 1)
        for i in range(n):
            carry = 0
            ai = a[i]
            for j in range(n):
                cur = t[i + j] + ai * b[j] + carry
                c.mul += 1
                c.add += 2
                t[i + j] = cur & mask
                carry = cur >> w
            t[i + n] = carry
        for i in range(n):
            m = (t[i] * n0p) & mask
            c.mul += 1
            carry = 0
            for j in range(n):
                cur = t[i + j] + m * p[j] + carry
                c.mul += 1
                c.add += 2
                t[i + j] = cur & mask
                carry = cur >> w
            # fixed-length carry propagation through the remaining words
            for j2 in range(i + n, 2 * n + 1):
                cur = t[j2] + carry
                c.add += 1
                t[j2] = cur & mask
                carry = cur >> w
        # u = t / R lives in n words plus one top bit; u < 2p
        u = t[n:2 * n + 1]
        d = [0] * (n + 1)
        borrow = 0
        for i in range(n + 1):
            pi = p[i] if i < n else 0
            cur = u[i] - pi - borrow
            c.sub += 2
            d[i] = cur & mask
            borrow = (cur >> w) & 1
        return self._select(d[:n], u[:n], 1 - borrow)

    def mul_two_mont(self, a, b):
        """Plain-domain modular product via two Montgomery multiplications."""
        return self.mont_mul(self.mont_mul(a, b), self.r2_limbs)

    def to_mont(self, a):
        return self.mont_mul(a, self.r2_limbs)

    def from_mont(self, a):
        return self.mont_mul(a, self.one_limbs)

    def inverse_mod(self, a):
        """a^-1 mod p via the fixed ladder a^(p-2), in the Montgomery domain.

        The caller must reject a == 0; this method assumes a in [1, p).
        """
        am = self.to_mont(a)
        acc = self.r_limbs  # 1 in the Montgomery domain
        for bit in self.inv_exp_bits:
            acc = self.mont_mul(acc, acc)
            if bit:
                acc = self.mont_mul(acc, am)
        return self.from_mont(acc)

    # -- helpers -----------------------------------------------------------

    def _select(self, x, y, take_x):
        """Branchless per-word select: x if take_x else y."""
        mask = self.mask
        c = self.counter
        m = (0 - take_x) & mask
        out = [0] * self.limb_count
        for i in range(self.limb_count):
            out[i] = (x[i] & m) | (y[i] & (mask ^ m))
            c.select += 1
        return tuple(out)
