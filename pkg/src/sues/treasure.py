"""Treasure sequences and the constants of the linear length bound.

    q_i = sum_{j >= i} 2^(-j/lam) + 2^-(a j + b) + 2^-(c j - 2)

with ``a = (2 lam + 1)/(lam^2 + lam)``, ``b = lam/(lam + 1) - 2`` and
``c = (lam + 1)/lam``.  Each tail is geometric, so ``q_i`` has a closed form.
Everything here is evaluated in outward-rounded interval arithmetic so
comparisons against 1 (the golden ball) and against the length bound are
certified.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass
from fractions import Fraction

from mpmath import iv
from mpmath.libmp import to_man_exp

from .construction import DIVIDES, sues_length

PREC = 80
MAX_PREC = 4096
ERROR_BOUND = 2.0 ** -40


@contextmanager
def _precision(bits: int):
    old = iv.prec
    iv.prec = bits
    try:
        yield
    finally:
        iv.prec = old


def _raw_frac(raw) -> Fraction:
    man, exp = to_man_exp(raw)
    return Fraction(int(man)) * Fraction(2) ** int(exp)


@dataclass(frozen=True)
class Enclosure:
    """A closed interval ``[lo, hi]`` of exact rationals containing the true value."""

    lo: Fraction
    hi: Fraction

    @classmethod
    def of(cls, x) -> "Enclosure":
        a, b = x._mpi_
        return cls(_raw_frac(a), _raw_frac(b))

    def as_interval(self):
        lo = iv.mpf(self.lo.numerator) / self.lo.denominator
        hi = iv.mpf(self.hi.numerator) / self.hi.denominator
        return iv.mpf([lo.a, hi.b])

    @property
    def mid(self) -> float:
        return float((self.lo + self.hi) / 2)

    @property
    def radius(self) -> float:
        """Bound on ``|mid - true value|``, including the float rounding of ``mid``."""
        m = Fraction(self.mid)
        return float(max(self.hi - m, m - self.lo))

    def below(self, x) -> bool | None:
        """Certified ``value < x``: True, False, or None when undecided."""
        x = Fraction(x)
        if self.hi < x:
            return True
        if self.lo >= x:
            return False
        return None

    def __contains__(self, x) -> bool:
        return self.lo <= Fraction(x) <= self.hi


def _q_interval(i: int, lam: int):
    lam_ = iv.mpf(lam)
    two = iv.mpf(2)
    r1 = two ** (-1 / lam_)
    a = (2 * lam_ + 1) / (lam_ * lam_ + lam_)
    b = lam_ / (lam_ + 1) - 2
    c = (lam_ + 1) / lam_
    r2 = two ** (-a)
    r3 = two ** (-c)
    return (
        r1 ** i / (1 - r1)
        + two ** (-b) * r2 ** i / (1 - r2)
        + 4 * r3 ** i / (1 - r3)
    )


def q_interval(i: int, lam: int, prec: int = PREC) -> Enclosure:
    if i < 1 or lam < 2:
        raise ValueError("need i >= 1 and lambda >= 2")
    with _precision(prec):
        return Enclosure.of(_q_interval(i, lam))


def q_value(i: int, lam: int, prec: int = PREC) -> tuple[float, float]:
    """``(q_i, certified absolute error)`` with error at most 2^-40."""
    enc = q_interval(i, lam, prec)
    while enc.radius > ERROR_BOUND:
        prec *= 2
        enc = q_interval(i, lam, prec)
    return enc.mid, enc.radius


def golden_point(lam: int, prec: int = PREC) -> tuple[int, Enclosure]:
    """Smallest ``i`` with ``q_i < 1``, decided with certified comparisons."""
    i = 1
    while True:
        p = prec
        while True:
            verdict = q_interval(i, lam, p).below(1)
            if verdict is not None:
                break
            if p >= MAX_PREC:
                raise ArithmeticError(f"cannot separate q_{i} from 1 at {p} bits")
            p *= 2
        if verdict:
            return i, q_interval(i, lam, p)
        i += 1


@dataclass(frozen=True)
class TreasureConstants:
    lam: int
    g: int
    q_g: Enclosure
    c_finite: Enclosure
    c_max: Fraction
    bound_coefficient: Enclosure

    def holds(self, s: int, n: int) -> bool | None:
        """Certified ``s < bound_coefficient * n``; None when the enclosure straddles."""
        x = Fraction(s, n)
        enc = self.bound_coefficient
        if x < enc.lo:
            return True
        if x >= enc.hi:
            return False
        return None


def bound_constants(lam: int, schedule: str = DIVIDES, lengths=None) -> TreasureConstants:
    """Golden point and the constants ``C_finite``, ``C_max`` of the linear bound.

    ``lengths(j)`` supplies ``s_{2^j}``; defaults to the construction's own.

        C_finite = sum_{j=1}^{g-1} 2 (s_{2^j} - s_{2^{j-1}}) / 2^((lam+1) j / lam)
        C_max    = max_{1 <= j <= g-1} s_{2^j} / 2^j
        bound    = (5 + C_finite) / (1 - q_g) + C_max
    """
    if lengths is None:
        def lengths(j):
            return sues_length(j, lam, schedule)
    g, q_enc = golden_point(lam)
    with _precision(PREC):
        q = q_enc.as_interval()
        c_finite = iv.mpf(0)
        for j in range(1, g):
            delta = lengths(j) - lengths(j - 1)
            c_finite += 2 * iv.mpf(delta) / iv.mpf(2) ** (iv.mpf((lam + 1) * j) / lam)
        c_max = max((Fraction(lengths(j), 2 ** j) for j in range(1, g)), default=Fraction(0))
        cm = iv.mpf(c_max.numerator) / c_max.denominator
        bound = (5 + c_finite) / (1 - q) + cm
        return TreasureConstants(lam, g, q_enc, Enclosure.of(c_finite), c_max, Enclosure.of(bound))
