"""
Exact rational scalars and the two Bernoulli sequences used by the bracket formulas
"""

import logging
import threading
from fractions import Fraction
from math import comb, factorial
from typing import List, Union

logger = logging.getLogger(__name__)

Rational = Fraction

_bernoulli_cache: List[Fraction] = [Fraction(1)]
_bernoulli_lock = threading.Lock()


def to_rational(value: Union[int, str, Fraction]) -> Fraction:
    """Coerce ints, Fractions and "p/q" strings to a canonical Fraction"""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not scalars")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return parse_rational(value)
    raise TypeError(f"Unsupported scalar type: {type(value).__name__}")


def parse_rational(text: str) -> Fraction:
    """Parse "p/q" or "p"; floats are rejected"""
    text = text.strip()
    if not text or any(ch in text for ch in ".eE"):
        raise ValueError(f"Not an exact rational: {text!r}")
    if "/" in text:
        numerator, denominator = text.split("/", 1)
        if int(denominator) <= 0:
            raise ValueError(f"Denominator must be positive: {text!r}")
        return Fraction(int(numerator), int(denominator))
    return Fraction(int(text))


def format_rational(value: Fraction) -> str:
    """Serialize as "p/q", or "p" when q = 1"""
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def bernoulli_first(n: int) -> Fraction:
    """
    B_n = B_n(0), from t/(e^t - 1); B_1 = -1/2.

    Grown through sum_{k<i} binom(i, k) B_k = 0 and cached.
    """
    if n < 0:
        raise ValueError("Bernoulli index must be nonnegative")
    if n < len(_bernoulli_cache):
        return _bernoulli_cache[n]
    with _bernoulli_lock:
        while len(_bernoulli_cache) <= n:
            i = len(_bernoulli_cache) + 1
            partial = sum(comb(i, k) * _bernoulli_cache[k] for k in range(i - 1))
            _bernoulli_cache.append(-partial / comb(i, i - 1))
        logger.debug(f"Bernoulli cache grown to {len(_bernoulli_cache)} entries")
    return _bernoulli_cache[n]


def bernoulli_second(n: int) -> Fraction:
    """B_n(1) = (-1)^n B_n"""
    value = bernoulli_first(n)
    return value if n % 2 == 0 else -value


def bernoulli_identity_check(i: int) -> bool:
    """Self-test of sum_{k=0}^{i-1} B_k binom(i, k) = 0"""
    if i < 2:
        raise ValueError("identity holds for i >= 2")
    return sum(bernoulli_first(k) * comb(i, k) for k in range(i)) == 0


def inverse_factorial(n: int) -> Fraction:
    return Fraction(1, factorial(n))
