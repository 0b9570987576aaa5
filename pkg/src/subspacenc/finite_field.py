"""Exact arithmetic in GF(q) for prime q and q = 2^k (k <= 16).

Elements are plain integers in ``[0, q)``.  Binary fields use log/antilog
tables for multiplication; the bitwise carry-less routine is kept as the
reference path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Conway-style defaults; 0x11B is the AES polynomial x^8+x^4+x^3+x+1.
DEFAULT_POLYNOMIALS = {
    1: 0x3,
    2: 0x7,
    3: 0xB,
    4: 0x13,
    5: 0x25,
    6: 0x43,
    7: 0x83,
    8: 0x11B,
    9: 0x211,
    10: 0x409,
    11: 0x805,
    12: 0x1053,
    13: 0x201B,
    14: 0x4443,
    15: 0x8003,
    16: 0x1100B,
}

MAX_PRIME = (1 << 31) - 1


class FieldError(ValueError):
    pass


class NonPrimePower(FieldError):
    """Field order is neither a supported prime nor 2^k with k <= 16."""


class ReduciblePolynomial(FieldError):
    pass


class DivisionByZero(ZeroDivisionError):
    pass


def is_prime(q: int) -> bool:
    if q < 2:
        return False
    if q % 2 == 0:
        return q == 2
    i = 3
    while i * i <= q:
        if q % i == 0:
            return False
        i += 2
    return True


def clmul(a: int, b: int) -> int:
    """Carry-less product of two bit-encoded polynomials."""
    out = 0
    while b:
        if b & 1:
            out ^= a
        a <<= 1
        b >>= 1
    return out


def poly_mod(a: int, m: int) -> int:
    dm = m.bit_length() - 1
    while a and a.bit_length() - 1 >= dm:
        a ^= m << (a.bit_length() - 1 - dm)
    return a


def is_irreducible(poly: int) -> bool:
    """Exhaustive trial division by every polynomial of degree 1..deg/2."""
    deg = poly.bit_length() - 1
    if deg < 1:
        return False
    for d in range(1, deg // 2 + 1):
        for f in range(1 << d, 1 << (d + 1)):
            if poly_mod(poly, f) == 0:
                return False
    return True


def _mul_bitwise(a: int, b: int, poly: int, k: int) -> int:
    out = 0
    top = 1 << k
    while b:
        if b & 1:
            out ^= a
        b >>= 1
        a <<= 1
        if a & top:
            a ^= poly
    return out


@dataclass(frozen=True, eq=False)
class FieldSpec:
    """GF(q).  Build with :func:`field_new`."""

    q: int
    characteristic: int
    degree: int
    reduction_polynomial: int | None = None
    exp: np.ndarray = field(repr=False, default=None)
    log: np.ndarray = field(repr=False, default=None)

    @property
    def binary(self) -> bool:
        return self.characteristic == 2 and self.reduction_polynomial is not None

    @property
    def kernel_args(self) -> tuple:
        """Arguments forwarded to the compiled elimination kernels."""
        return (self.binary, self.q, self.exp, self.log)

    def __eq__(self, other):
        return (
            isinstance(other, FieldSpec)
            and self.q == other.q
            and self.reduction_polynomial == other.reduction_polynomial
        )

    def __hash__(self):
        return hash((self.q, self.reduction_polynomial))

    def _check(self, *xs: int) -> None:
        for x in xs:
            if not 0 <= x < self.q:
                raise ValueError(f"{x} is not an element of GF({self.q})")

    def add(self, a: int, b: int) -> int:
        self._check(a, b)
        return a ^ b if self.binary else (a + b) % self.q

    def sub(self, a: int, b: int) -> int:
        self._check(a, b)
        return a ^ b if self.binary else (a - b) % self.q

    def neg(self, a: int) -> int:
        self._check(a)
        return a if self.binary else (-a) % self.q

    def mul(self, a: int, b: int) -> int:
        self._check(a, b)
        if self.binary:
            if a == 0 or b == 0:
                return 0
            return int(self.exp[int(self.log[a]) + int(self.log[b])])
        return a * b % self.q

    def mul_direct(self, a: int, b: int) -> int:
        """Multiplication without tables (bitwise reduce, or plain modular)."""
        self._check(a, b)
        if self.binary:
            return _mul_bitwise(a, b, self.reduction_polynomial, self.degree)
        return a * b % self.q

    def inv(self, a: int) -> int:
        self._check(a)
        if a == 0:
            raise DivisionByZero("0 has no inverse")
        if self.binary:
            return int(self.exp[(self.q - 1 - int(self.log[a])) % (self.q - 1)])
        return pow(a, self.q - 2, self.q)

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def pow(self, a: int, e: int) -> int:
        self._check(a)
        if e < 0:
            return self.pow(self.inv(a), -e)
        out = 1
        while e:
            if e & 1:
                out = self.mul(out, a)
            a = self.mul(a, a)
            e >>= 1
        return out

    def elements(self) -> range:
        return range(self.q)

    def __repr__(self):
        if self.binary:
            return f"GF(2^{self.degree}, poly=0x{self.reduction_polynomial:X})"
        return f"GF({self.q})"


def _binary_tables(k: int, poly: int) -> tuple[np.ndarray, np.ndarray]:
    q = 1 << k
    # find a generator of the multiplicative group
    for g in range(2, q) if q > 2 else [1]:
        exp = np.zeros(2 * (q - 1) + 1, dtype=np.int64)
        log = np.zeros(q, dtype=np.int64)
        x = 1
        seen = 0
        ok = True
        for i in range(q - 1):
            if i and x == 1:
                ok = False
                break
            exp[i] = x
            log[x] = i
            seen += 1
            x = _mul_bitwise(x, g, poly, k)
        if ok and seen == q - 1:
            exp[q - 1 : 2 * (q - 1)] = exp[: q - 1]
            exp[2 * (q - 1)] = exp[0]
            return exp, log
    raise ReduciblePolynomial(f"no generator found for poly 0x{poly:X}")


def field_new(q: int, reduction_polynomial: int | None = None) -> FieldSpec:
    """Construct GF(q).

    >>> F = field_new(5)
    >>> F.add(3, 4), F.mul(3, 4)
    (2, 2)
    """
    q = int(q)
    if q >= 2 and q & (q - 1) == 0:
        k = q.bit_length() - 1
        if k > 16:
            raise NonPrimePower(f"2^{k} exceeds the supported 2^16")
        if reduction_polynomial is None:
            reduction_polynomial = DEFAULT_POLYNOMIALS[k]
        poly = int(reduction_polynomial)
        if poly.bit_length() - 1 != k:
            raise ReduciblePolynomial(f"polynomial 0x{poly:X} does not have degree {k}")
        if not is_irreducible(poly):
            raise ReduciblePolynomial(f"polynomial 0x{poly:X} is reducible")
        exp, log = _binary_tables(k, poly)
        return FieldSpec(q, 2, k, poly, exp, log)
    if reduction_polynomial is not None:
        raise NonPrimePower("a reduction polynomial only applies to q = 2^k")
    if not is_prime(q) or q > MAX_PRIME:
        raise NonPrimePower(f"q={q} is not a supported prime or power of two")
    dummy = np.zeros(1, dtype=np.int64)
    return FieldSpec(q, q, 1, None, dummy, dummy)


def sample_uniform(field: FieldSpec, rng: np.random.Generator, size=None):
    """Uniform element(s) of the field drawn from ``rng``."""
    if size is None:
        return int(rng.integers(0, field.q))
    return rng.integers(0, field.q, size=size, dtype=np.int64)


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))
