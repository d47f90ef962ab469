# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled Montgomery kernels for 32-bit limb layouts.

Same algorithms as the pure backend (SOS Montgomery multiplication, masked
final reductions, fixed inversion ladder) specialised to limb_bits == 32 with
fixed-size stack buffers.  Values cross the boundary as little-endian tuples
of Python ints, identical to the pure backend, so the two are interchangeable.
"""

from libc.stdint cimport uint32_t, uint64_t

DEF MAX_LIMBS = 16


cdef class CompiledKernel:
    cdef uint32_t p[MAX_LIMBS]
    cdef uint32_t r_limbs[MAX_LIMBS]
    cdef uint32_t r2_limbs[MAX_LIMBS]
    cdef uint32_t one_limbs[MAX_LIMBS]
    cdef uint32_t n0_prime
    cdef int n
    cdef object exp_bits          # tuple of 0/1, MSB first (bits of p-2)
    cdef readonly str name
    cdef readonly object counter  # no word-level instrumentation here

    def __init__(self, p_limbs, r_mod_p_limbs, r2_mod_p_limbs, n0_prime,
                 inv_exp_bits):
        cdef int i
        self.n = len(p_limbs)
        if self.n < 1 or self.n > MAX_LIMBS:
            raise ValueError("limb count outside compiled range")
        for i in range(self.n):
            self.p[i] = <uint32_t> p_limbs[i]
            self.r_limbs[i] = <uint32_t> r_mod_p_limbs[i]
            self.r2_limbs[i] = <uint32_t> r2_mod_p_limbs[i]
            self.one_limbs[i] = 1 if i == 0 else 0
        self.n0_prime = <uint32_t> n0_prime
        self.exp_bits = tuple(inv_exp_bits)
        self.name = "compiled"
        self.counter = None

    # -- tuple <-> buffer --------------------------------------------------

    cdef void _load(self, uint32_t *dst, a):
        cdef int i
        for i in range(self.n):
            dst[i] = <uint32_t> a[i]

    cdef tuple _dump(self, uint32_t *src):
        cdef int i
        return tuple(src[i] for i in range(self.n))

    # -- C cores -----------------------------------------------------------

    cdef void _add_mod_c(self, uint32_t *out, uint32_t *a, uint32_t *b):
        cdef uint64_t cur, carry = 0, borrow = 0
        cdef uint32_t s[MAX_LIMBS]
        cdef uint32_t d[MAX_LIMBS]
        cdef uint32_t m
        cdef int i
        for i in range(self.n):
            cur = (<uint64_t> a[i]) + b[i] + carry
            s[i] = <uint32_t> cur
            carry = cur >> 32
        for i in range(self.n):
            cur = (<uint64_t> s[i]) - self.p[i] - borrow
            d[i] = <uint32_t> cur
            borrow = (cur >> 32) & 1
        m = <uint32_t> (0 - (carry | (1 - borrow)))
        for i in range(self.n):
            out[i] = (d[i] & m) | (s[i] & ~m)

    cdef void _sub_mod_c(self, uint32_t *out, uint32_t *a, uint32_t *b):
        cdef uint64_t cur, carry = 0, borrow = 0
        cdef uint32_t d[MAX_LIMBS]
        cdef uint32_t s[MAX_LIMBS]
        cdef uint32_t m
        cdef int i
        for i in range(self.n):
            cur = (<uint64_t> a[i]) - b[i] - borrow
            d[i] = <uint32_t> cur
            borrow = (cur >> 32) & 1
        for i in range(self.n):
            cur = (<uint64_t> d[i]) + self.p[i] + carry
            s[i] = <uint32_t> cur
            carry = cur >> 32
        m = <uint32_t> (0 - borrow)
        for i in range(self.n):
            out[i] = (s[i] & m) | (d[i] & ~m)

    cdef void _mont_mul_c(self, uint32_t *out, uint32_t *a, uint32_t *b):
        cdef uint64_t t[2 * MAX_LIMBS + 1]
        cdef uint64_t cur, carry, mw
        cdef uint32_t d[MAX_LIMBS + 1]
        cdef uint32_t sel
        cdef uint64_t borrow = 0
        cdef int i, j, n = self.n
        for i in range(2 * n + 1):
            t[i] = 0
        for i in range(n):
            carry = 0
            for j in range(n):
                cur = t[i + j] + (<uint64_t> a[i]) * b[j] + carry
                t[i + j] = <uint32_t> cur
                carry = cur >> 32
            t[i + n] = carry
        for i in range(n):
            mw = <uint32_t> (t[i] * self.n0_prime)
            carry = 0
            for j in range(n):
                cur = t[i + j] + mw * self.p[j] + carry
                t[i + j] = <uint32_t> cur
                carry = cur >> 32
            for j in range(i + n, 2 * n + 1):
                cur = t[j] + carry
                t[j] = <uint32_t> cur
                carry = cur >> 32
        for i in range(n + 1):
            cur = t[n + i] - (self.p[i] if i < n else 0) - borrow
            d[i] = <uint32_t> cur
            borrow = (cur >> 32) & 1
        sel = <uint32_t> (0 - (1 - borrow))
        for i in range(n):
            out[i] = (d[i] & sel) | ((<uint32_t> t[n + i]) & ~sel)

    # -- Python-facing methods ----------------------------------------------

    def add_mod(self, a, b):
        cdef uint32_t x[MAX_LIMBS]
        cdef uint32_t y[MAX_LIMBS]
        cdef uint32_t z[MAX_LIMBS]
        self._load(x, a)
        self._load(y, b)
        self._add_mod_c(z, x, y)
        return self._dump(z)

    def sub_mod(self, a, b):
        cdef uint32_t x[MAX_LIMBS]
        cdef uint32_t y[MAX_LIMBS]
        cdef uint32_t z[MAX_LIMBS]
        self._load(x, a)
        self._load(y, b)
        self._sub_mod_c(z, x, y)
        return self._dump(z)

    def mont_mul(self, a, b):
        cdef uint32_t x[MAX_LIMBS]
        cdef uint32_t y[MAX_LIMBS]
        cdef uint32_t z[MAX_LIMBS]
        self._load(x, a)
        self._load(y, b)
        self._mont_mul_c(z, x, y)
        return self._dump(z)

    def mul_two_mont(self, a, b):
        cdef uint32_t x[MAX_LIMBS]
        cdef uint32_t y[MAX_LIMBS]
        cdef uint32_t z[MAX_LIMBS]
        self._load(x, a)
        self._load(y, b)
        self._mont_mul_c(z, x, y)
        self._mont_mul_c(x, z, self.r2_limbs)
        return self._dump(x)

    def to_mont(self, a):
        cdef uint32_t x[MAX_LIMBS]
        cdef uint32_t z[MAX_LIMBS]
        self._load(x, a)
        self._mont_mul_c(z, x, self.r2_limbs)
        return self._dump(z)

    def from_mont(self, a):
        cdef uint32_t x[MAX_LIMBS]
        cdef uint32_t z[MAX_LIMBS]
        self._load(x, a)
        self._mont_mul_c(z, x, self.one_limbs)
        return self._dump(z)

    def inverse_mod(self, a):
        """Fixed-ladder a^(p-2); the whole ladder runs without returning to
        Python, which is what makes compiled inversion worthwhile."""
        cdef uint32_t am[MAX_LIMBS]
        cdef uint32_t acc[MAX_LIMBS]
        cdef uint32_t tmp[MAX_LIMBS]
        cdef int i, j, nbits
        self._load(am, a)
        self._mont_mul_c(tmp, am, self.r2_limbs)   # to Montgomery domain
        for i in range(self.n):
            am[i] = tmp[i]
            acc[i] = self.r_limbs[i]               # Montgomery one
        bits = self.exp_bits
        nbits = len(bits)
        for i in range(nbits):
            self._mont_mul_c(tmp, acc, acc)
            if bits[i]:
                self._mont_mul_c(acc, tmp, am)
            else:
                for j in range(self.n):
                    acc[j] = tmp[j]
        self._mont_mul_c(tmp, acc, self.one_limbs)  # back to plain domain
        return self._dump(tmp)
