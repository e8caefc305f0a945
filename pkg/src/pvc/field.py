"""Arithmetic in the prime field F_p and octet-string conversions.

Field elements are plain Python ints kept in ``[0, p)``.  Python integers do
not overflow, so the double-width intermediate needed by a fixed-width
implementation comes for free; the modulus is still capped below 2**62 so
that serialized elements and headers keep a fixed, small layout.

None of this is constant time.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from functools import cached_property

from .errors import InvalidParameters, Overflow, ZeroInverse

MAX_PRIME_BITS = 62

_SMALL_PRIMES = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67,
    71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149,
    151, 157, 163, 167, 173, 179, 181, 191, 193, 197, 199, 211, 223, 227, 229,
]
# deterministic for every n < 3.3 * 10**24
_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)


def is_probable_prime(n: int) -> bool:
    """Miller-Rabin with a fixed base set; exact for all 64-bit inputs."""
    if n < 2:
        return False
    for q in _SMALL_PRIMES:
        if n % q == 0:
            return n == q
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _pollard_rho(n: int) -> int:
    # Brent's variant; n is odd and composite
    if n % 2 == 0:
        return 2
    rng = random.Random(n)
    while True:
        y, c, m = rng.randrange(1, n), rng.randrange(1, n), 128
        g = r = q = 1
        while g == 1:
            x = y
            for _ in range(r):
                y = (y * y + c) % n
            k = 0
            while k < r and g == 1:
                ys = y
                for _ in range(min(m, r - k)):
                    y = (y * y + c) % n
                    q = q * abs(x - y) % n
                g = math.gcd(q, n)
                k += m
            r *= 2
        if g == n:
            g = 1
            while g == 1:
                ys = (ys * ys + c) % n
                g = math.gcd(abs(x - ys), n)
        if g != n:
            return g


def factorize(n: int) -> dict[int, int]:
    """Prime factorization ``{prime: multiplicity}`` of a positive integer."""
    out: dict[int, int] = {}
    for q in _SMALL_PRIMES:
        while n % q == 0:
            out[q] = out.get(q, 0) + 1
            n //= q
    stack = [n] if n > 1 else []
    while stack:
        x = stack.pop()
        if x == 1:
            continue
        if is_probable_prime(x):
            out[x] = out.get(x, 0) + 1
            continue
        d = _pollard_rho(x)
        stack.extend((d, x // d))
    return dict(sorted(out.items()))


@dataclass(frozen=True)
class FieldCtx:
    """A validated prime modulus plus the constants derived from it.

    The factorization of ``p - 1`` is computed on first use and cached; it is
    only needed for primitive-root checks.
    """

    p: int
    octet_len: int = field(init=False)

    def __post_init__(self):
        p = self.p
        if not isinstance(p, int) or isinstance(p, bool):
            raise InvalidParameters(f"p must be an int, got {type(p).__name__}")
        if p <= 2:
            raise InvalidParameters(f"p must be an odd prime, got {p}")
        if p.bit_length() > MAX_PRIME_BITS:
            raise InvalidParameters(f"p exceeds {MAX_PRIME_BITS} bits")
        if not is_probable_prime(p):
            raise InvalidParameters(f"p = {p} is not prime")
        object.__setattr__(self, "octet_len", (p.bit_length() + 7) // 8)

    @cached_property
    def factorization(self) -> dict[int, int]:
        return factorize(self.p - 1)

    @property
    def factors_p_minus_1(self) -> list[int]:
        return list(self.factorization)

    def reduce(self, x: int) -> int:
        return x % self.p

    def check(self, x: int, name: str = "value") -> int:
        if not isinstance(x, int) or not 0 <= x < self.p:
            raise InvalidParameters(f"{name} = {x!r} is not a reduced element mod {self.p}")
        return x


def mod_add(a: int, b: int, ctx: FieldCtx) -> int:
    return (a + b) % ctx.p


def mod_sub(a: int, b: int, ctx: FieldCtx) -> int:
    return (a - b) % ctx.p


def mod_mul(a: int, b: int, ctx: FieldCtx) -> int:
    return a * b % ctx.p


def mod_pow(base: int, exp: int, ctx: FieldCtx) -> int:
    if exp < 0:
        raise ValueError("exponent must be non-negative")
    return pow(base, exp, ctx.p)


def mod_inv(a: int, ctx: FieldCtx) -> int:
    a %= ctx.p
    if a == 0:
        raise ZeroInverse("0 has no inverse mod p")
    return pow(a, -1, ctx.p)


def is_primitive_root(g: int, ctx: FieldCtx) -> bool:
    """True iff g generates the multiplicative group of F_p."""
    if not 1 < g < ctx.p:
        return False
    n = ctx.p - 1
    return all(pow(g, n // q, ctx.p) != 1 for q in ctx.factorization)


def i2osp(x: int, length: int) -> bytes:
    """Big-endian, zero-padded encoding of ``x`` in exactly ``length`` octets."""
    if x < 0 or x >= 1 << (8 * length):
        raise Overflow(f"integer too large for {length} octets")
    return x.to_bytes(length, "big")


def os2ip(octets: bytes) -> int:
    return int.from_bytes(octets, "big")


def random_prime(bits: int, rng: random.Random) -> int:
    """Random odd prime with exactly ``bits`` bits."""
    if bits < 3:
        raise ValueError("need at least 3 bits")
    lo, hi = 1 << (bits - 1), 1 << bits
    while True:
        n = rng.randrange(lo, hi) | 1
        if is_probable_prime(n):
            return n
