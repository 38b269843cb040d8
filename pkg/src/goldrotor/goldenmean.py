"""Exact arithmetic around the golden mean r = (sqrt(5) + 1) / 2.

Fibonacci denominators are indexed so that q_1 = 2, q_2 = 3, q_3 = 5, ...
and the convergents are r_n = q_{n+1} / q_n.  Extending the recurrence one
step backwards gives q_0 = 1, which is what lets every positive integer be
written as a sum of distinct q's.
"""
from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from decimal import Decimal, localcontext
from fractions import Fraction

import numpy as np

# digits carried for r; q_n * r keeps 25+ fractional digits for q_n <= 1e6
GOLDEN_DIGITS = 80
FRAC_BITS = 256

with localcontext() as _ctx:
    _ctx.prec = GOLDEN_DIGITS
    GOLDEN = (1 + Decimal(5).sqrt()) / 2

# frac(r) = r - 1 as a FRAC_BITS fixed-point integer
_FRAC_ONE = 1 << FRAC_BITS
with localcontext() as _ctx:
    _ctx.prec = GOLDEN_DIGITS
    _GOLDEN_FRAC_FIXED = int((GOLDEN - 1) * _FRAC_ONE)

GOLDEN_FLOAT = float(GOLDEN)
DELTA_LIMIT = 1.0 / (2.0 * math.pi * math.sqrt(5.0))


class InvalidIndexError(ValueError):
    """Raised for a Fibonacci/convergent index below 1."""


@dataclass(frozen=True)
class Convergent:
    n: int
    p: int
    q: int

    @property
    def value(self) -> Fraction:
        return Fraction(self.p, self.q)

    def is_below(self) -> bool:
        """Exact test of p/q < r."""
        return is_below(self.n)


@dataclass(frozen=True)
class FibDecomposition:
    k: int
    parts: tuple[int, ...]
    indices: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.parts)


def _check_index(n: int) -> None:
    if n < 1:
        raise InvalidIndexError(f"index must be >= 1, got {n}")


# extended table q_0 = 1, q_1 = 2, ...; grown on demand
_Q = [1, 2]


def _q_upto(limit: int) -> list[int]:
    while _Q[-1] <= limit:
        _Q.append(_Q[-1] + _Q[-2])
    return _Q


def fibonacci_q(n: int) -> int:
    """Return q_n (q_1 = 2, q_2 = 3, q_{n+1} = q_n + q_{n-1}) exactly."""
    _check_index(n)
    if n < 2:
        return 2
    a, b = 2, 3
    for _ in range(n - 2):
        a, b = b, a + b
    return b


def convergent(n: int) -> Convergent:
    _check_index(n)
    return Convergent(n=n, p=fibonacci_q(n + 1), q=fibonacci_q(n))


def is_below(n: int) -> bool:
    """True when r_n < r, decided in integer arithmetic.

    p/q < (1 + sqrt 5)/2  <=>  2p - q < q sqrt 5, and both sides are positive.
    """
    c = convergent(n)
    a = 2 * c.p - c.q
    return a * a < 5 * c.q * c.q


def scaled_error_below_half(n: int) -> bool:
    """Exact test of |r_n - r| * q_n^2 < 1/2.

    With a = 2p - q the condition reads |a - q sqrt 5| * q < 1, and
    |a - q sqrt 5| = |a^2 - 5 q^2| / (a + q sqrt 5).
    """
    c = convergent(n)
    a = 2 * c.p - c.q
    d = abs(a * a - 5 * c.q * c.q)
    lhs = d * c.q - a
    return lhs < 0 or lhs * lhs < 5 * c.q * c.q


def _scaled_error(n: int) -> Decimal:
    # q_n^2 |r_n - r| = q_n |p_n - q_n r|, computed with enough digits to
    # survive the cancellation in p - q r
    c = convergent(n)
    digits = 2 * len(str(c.q)) + 30
    with localcontext() as ctx:
        ctx.prec = digits
        r = (1 + Decimal(5).sqrt()) / 2
        return abs(c.p - c.q * r) * c.q


def delta_n(n: int) -> float:
    """q_n^2 |r_n - r| / (2 pi); tends to 1/(2 pi sqrt 5)."""
    _check_index(n)
    return float(_scaled_error(n)) / (2.0 * math.pi)


def decompose(k: int) -> FibDecomposition:
    """Greedy decomposition of k into distinct members of {1, 2, 3, 5, 8, ...}.

    Parts are returned in increasing order.  The greedy choice never picks two
    neighbouring Fibonacci numbers, so the parts are strictly increasing.
    """
    if k < 1:
        raise ValueError(f"k must be a positive integer, got {k}")
    qs = _q_upto(k)
    parts: list[int] = []
    indices: list[int] = []
    rem = k
    hi = len(qs)
    while rem:
        i = bisect_right(qs, rem, 0, hi) - 1
        parts.append(qs[i])
        indices.append(i)
        rem -= qs[i]
        hi = i
    parts.reverse()
    indices.reverse()
    return FibDecomposition(k=k, parts=tuple(parts), indices=tuple(indices))


def decomposition_bound(k: int) -> float:
    return math.log(k) / math.log(1.5)


def golden_fractions(n: int, start: int = 0) -> np.ndarray:
    """frac(j * r) for j = start, ..., start + n - 1 as float64 (read-only).

    Each value is the correctly rounded float of a FRAC_BITS fixed-point
    product, so it carries full double precision even for large j.
    """
    start, n = int(start), int(n)
    end = start + n
    if end > _PREFIX_LIMIT:
        return _fixed_point_fractions(start, n)
    global _prefix
    if end > len(_prefix):
        size = max(end, 2 * len(_prefix), 1024)
        size = min(size, _PREFIX_LIMIT)
        grown = np.concatenate([_prefix, _fixed_point_fractions(len(_prefix), size - len(_prefix))])
        grown.setflags(write=False)
        _prefix = grown
    return _prefix[start:end]


# frac(j r) for j = 0 .. len - 1, grown by doubling
_PREFIX_LIMIT = 1 << 24
_prefix = np.zeros(0)


def _fixed_point_fractions(start: int, n: int) -> np.ndarray:
    mask = _FRAC_ONE - 1
    g = _GOLDEN_FRAC_FIXED
    out = np.fromiter(
        (((j * g) & mask) / _FRAC_ONE for j in range(start, start + n)),
        dtype=np.float64,
        count=n,
    )
    out.setflags(write=False)
    return out


def golden_fraction(j: int) -> float:
    return ((j * _GOLDEN_FRAC_FIXED) & (_FRAC_ONE - 1)) / _FRAC_ONE


def halfcircle_count(theta: float, k: int) -> int:
    """Count j in [1, k] with theta + 2 pi j r (mod 2 pi) in the closed arc [0, pi]."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return int(halfcircle_counts(np.array([theta]), k)[0])


def halfcircle_counts(thetas: np.ndarray, k: int) -> np.ndarray:
    """Vectorised halfcircle_count over many starting angles."""
    fr = golden_fractions(k, start=1)
    t = np.mod(np.asarray(thetas, dtype=np.float64) / (2.0 * np.pi), 1.0)
    out = np.empty(t.shape, dtype=np.int64)
    for i, ti in enumerate(t.flat):
        x = ti + fr
        x -= np.floor(x)
        out.flat[i] = np.count_nonzero(x <= 0.5)
    return out
