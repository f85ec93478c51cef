"""Exact arithmetic for sums of rational powers of two.

Regularity certification compares quantities like ``sum_y 2**(-Q*|y|)``
against ``2**(-Q*|x|)``.  For rational ``Q = r/s`` these live in the ring
generated by ``2**(1/s)`` over the rationals; for ``Q = log2(u)`` with
rational ``u`` they are plain rationals.  :class:`PowerSum` represents both
exactly, so certified constants are never float-noisy.  Ordering is decided
by exact interval refinement (dyadic bounds on ``2**(j/s)`` from integer
roots), which terminates because ``1, 2**(1/s), ..., 2**((s-1)/s)`` are
linearly independent over the rationals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import gcd
from typing import Iterable, Union

__all__ = ["integer_root", "PowerSum", "Exponent"]


def integer_root(n: int, k: int) -> int:
    """Return ``floor(n ** (1/k))`` for integers ``n >= 0``, ``k >= 1``."""
    if n < 0:
        raise ValueError("integer_root requires n >= 0")
    if k < 1:
        raise ValueError("integer_root requires k >= 1")
    if k == 1 or n < 2:
        return n
    # Newton iteration on integers, starting from a provable upper bound.
    x = 1 << -(-n.bit_length() // k)
    while True:
        y = ((k - 1) * x + n // x ** (k - 1)) // k
        if y >= x:
            return x
        x = y


@lru_cache(maxsize=None)
def _pow2_bounds(j: int, s: int, prec: int) -> tuple[Fraction, Fraction]:
    """Rational bounds ``lo <= 2**(j/s) <= hi`` with ``hi - lo <= 2**-prec``."""
    r = integer_root(1 << (j + s * prec), s)
    return Fraction(r, 1 << prec), Fraction(r + 1, 1 << prec)


_RationalLike = Union[int, Fraction]


class PowerSum:
    """An exact real number ``sum_j c_j * 2**(j/s)`` with rational ``c_j``.

    Instances are immutable, hashable, totally ordered, and support exact
    ``+``, ``-``, ``*``.  ``s`` is reduced to the smallest root order that
    still represents the value, so equal values always compare (and hash)
    equal regardless of how they were built.
    """

    __slots__ = ("_s", "_coeffs", "_hash")

    def __init__(self, coeffs: Iterable[tuple[Fraction, Fraction]] = ()):
        """Build from ``(exponent, coefficient)`` pairs, exponents rational."""
        merged: dict[Fraction, Fraction] = {}
        for e, c in coeffs:
            e = Fraction(e)
            c = Fraction(c)
            if c:
                merged[e] = merged.get(e, Fraction(0)) + c
        s = 1
        for e in merged:
            s = s * e.denominator // gcd(s, e.denominator)
        table: dict[int, Fraction] = {}
        for e, c in merged.items():
            if not c:
                continue
            j = int(e * s)
            q, r = divmod(j, s)
            # 2**(j/s) == 2**q * 2**(r/s) with 0 <= r < s
            table[r] = table.get(r, Fraction(0)) + c * Fraction(2) ** q
        table = {j: c for j, c in table.items() if c}
        # Reduce to the minimal root order.
        if table:
            g = s
            for j in table:
                g = gcd(g, j)
            if g > 1:
                s //= g
                table = {j // g: c for j, c in table.items()}
        else:
            s = 1
        object.__setattr__(self, "_s", s)
        object.__setattr__(self, "_coeffs", table)
        object.__setattr__(self, "_hash", None)

    # -- constructors ----------------------------------------------------

    @staticmethod
    def zero() -> "PowerSum":
        return PowerSum()

    @staticmethod
    def one() -> "PowerSum":
        return PowerSum([(Fraction(0), Fraction(1))])

    @staticmethod
    def from_rational(c: _RationalLike) -> "PowerSum":
        return PowerSum([(Fraction(0), Fraction(c))])

    @staticmethod
    def pow2(exponent: _RationalLike) -> "PowerSum":
        """Exact ``2**exponent`` for rational ``exponent``."""
        return PowerSum([(Fraction(exponent), Fraction(1))])

    # -- introspection ---------------------------------------------------

    @property
    def root_order(self) -> int:
        return self._s

    def terms(self) -> list[tuple[Fraction, Fraction]]:
        """Sorted ``(exponent, coefficient)`` pairs of the canonical form."""
        return sorted((Fraction(j, self._s), c) for j, c in self._coeffs.items())

    def is_zero(self) -> bool:
        return not self._coeffs

    def is_rational(self) -> bool:
        return all(j == 0 for j in self._coeffs)

    def as_rational(self) -> Fraction:
        if not self._coeffs:
            return Fraction(0)
        if not self.is_rational():
            raise ValueError(f"{self!r} is irrational")
        return self._coeffs[0]

    # -- arithmetic ------------------------------------------------------

    def _pairs(self) -> list[tuple[Fraction, Fraction]]:
        return [(Fraction(j, self._s), c) for j, c in self._coeffs.items()]

    def __add__(self, other: "PowerSum | _RationalLike") -> "PowerSum":
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return PowerSum(self._pairs() + other._pairs())

    __radd__ = __add__

    def __neg__(self) -> "PowerSum":
        return PowerSum([(e, -c) for e, c in self._pairs()])

    def __sub__(self, other: "PowerSum | _RationalLike") -> "PowerSum":
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other: "PowerSum | _RationalLike") -> "PowerSum":
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other: "PowerSum | _RationalLike") -> "PowerSum":
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        pairs = [
            (e1 + e2, c1 * c2)
            for e1, c1 in self._pairs()
            for e2, c2 in other._pairs()
        ]
        return PowerSum(pairs)

    __rmul__ = __mul__

    # -- ordering --------------------------------------------------------

    def sign(self) -> int:
        """Exact sign of the represented real number."""
        if not self._coeffs:
            return 0
        signs = {1 if c > 0 else -1 for c in self._coeffs.values()}
        if len(signs) == 1:
            return signs.pop()
        prec = 16
        while True:
            lo = Fraction(0)
            hi = Fraction(0)
            for j, c in self._coeffs.items():
                bl, bh = _pow2_bounds(j, self._s, prec)
                if c > 0:
                    lo += c * bl
                    hi += c * bh
                else:
                    lo += c * bh
                    hi += c * bl
            if lo > 0:
                return 1
            if hi < 0:
                return -1
            prec *= 2

    def __eq__(self, other: object) -> bool:
        if isinstance(other, (int, Fraction)):
            other = PowerSum.from_rational(other)
        if not isinstance(other, PowerSum):
            return NotImplemented
        return self._s == other._s and self._coeffs == other._coeffs

    def __hash__(self) -> int:
        if self._hash is None:
            key = (self._s, tuple(sorted(self._coeffs.items())))
            object.__setattr__(self, "_hash", hash(key))
        return self._hash

    def __lt__(self, other: "PowerSum | _RationalLike") -> bool:
        return (self - other).sign() < 0

    def __le__(self, other: "PowerSum | _RationalLike") -> bool:
        return (self - other).sign() <= 0

    def __gt__(self, other: "PowerSum | _RationalLike") -> bool:
        return (self - other).sign() > 0

    def __ge__(self, other: "PowerSum | _RationalLike") -> bool:
        return (self - other).sign() >= 0

    def __bool__(self) -> bool:
        return bool(self._coeffs)

    # -- rendering -------------------------------------------------------

    def __float__(self) -> float:
        return math.fsum(
            float(c) * 2.0 ** (j / self._s) for j, c in self._coeffs.items()
        )

    def exact_str(self) -> str:
        """Human- and machine-readable exact form, e.g. ``3/4*2^(1/2)+1``."""
        if not self._coeffs:
            return "0"
        parts = []
        for e, c in self.terms():
            if e == 0:
                parts.append(str(c))
            elif c == 1:
                parts.append(f"2^({e})")
            else:
                parts.append(f"{c}*2^({e})")
        return "+".join(parts).replace("+-", "-")

    def __repr__(self) -> str:
        return f"PowerSum({self.exact_str()})"


def _coerce(value) -> "PowerSum":
    if isinstance(value, PowerSum):
        return value
    if isinstance(value, (int, Fraction)):
        return PowerSum.from_rational(value)
    return NotImplemented


@dataclass(frozen=True)
class Exponent:
    """An exact regularity exponent ``Q = rational + log2(log_factor)``.

    Covers both forms acceptance work needs: plain rationals ``p/q`` and
    base-2 logarithms of rationals (``log2(3)`` for the 3-homogeneous
    boundary).  ``weight(n)`` is the exact kernel value ``2**(-Q*n)``.
    """

    rational: Fraction = Fraction(0)
    log_factor: Fraction = Fraction(1)

    def __post_init__(self):
        object.__setattr__(self, "rational", Fraction(self.rational))
        object.__setattr__(self, "log_factor", Fraction(self.log_factor))
        if self.log_factor <= 0:
            raise ValueError("log_factor must be positive")

    @staticmethod
    def parse(text: str) -> "Exponent":
        """Parse ``"p/q"`` or ``"log2(p/q)"`` (whitespace-insensitive)."""
        t = text.strip().replace(" ", "")
        if t.startswith("log2(") and t.endswith(")"):
            return Exponent(Fraction(0), Fraction(t[5:-1]))
        return Exponent(Fraction(t), Fraction(1))

    def format(self) -> str:
        if self.log_factor == 1:
            return str(self.rational)
        if self.rational == 0:
            return f"log2({self.log_factor})"
        return f"{self.rational}+log2({self.log_factor})"

    def as_float(self) -> float:
        return float(self.rational) + math.log2(float(self.log_factor))

    def is_positive(self) -> bool:
        # Q > 0  iff  2**rational * log_factor > 1.
        return PowerSum.pow2(self.rational) * self.log_factor > PowerSum.one()

    def weight(self, n: int) -> PowerSum:
        """Exact ``2**(-Q*n)``."""
        return PowerSum.pow2(-self.rational * n) * self.log_factor ** (-n)

    def scale(self, n: int) -> PowerSum:
        """Exact ``2**(Q*n)``."""
        return self.weight(-n)

    def __str__(self) -> str:
        return self.format()
