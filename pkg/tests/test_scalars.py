from fractions import Fraction

import pytest

from src.core.scalars import (bernoulli_first, bernoulli_identity_check, bernoulli_second, format_rational,
                              inverse_factorial, parse_rational, to_rational)


def test_first_bernoulli_numbers():
    assert [bernoulli_first(n) for n in range(7)] == [
        Fraction(1), Fraction(-1, 2), Fraction(1, 6), Fraction(0), Fraction(-1, 30), Fraction(0), Fraction(1, 42)]


def test_second_sequence_flips_odd_entries():
    assert bernoulli_second(1) == Fraction(1, 2)
    assert bernoulli_second(2) == Fraction(1, 6)
    for n in range(3, 12, 2):
        assert bernoulli_second(n) == 0


@pytest.mark.parametrize("i", range(2, 15))
def test_binomial_recurrence(i):
    assert bernoulli_identity_check(i)


def test_recurrence_needs_two_terms():
    with pytest.raises(ValueError):
        bernoulli_identity_check(1)


def test_negative_index():
    with pytest.raises(ValueError):
        bernoulli_first(-1)


def test_parse_rational():
    assert parse_rational("3/4") == Fraction(3, 4)
    assert parse_rational(" -2 ") == Fraction(-2)
    assert parse_rational("6/8") == Fraction(3, 4)


@pytest.mark.parametrize("text", ["0.5", "1e3", "1E3", "", "1/0", "1/-2", "abc"])
def test_parse_rational_rejects(text):
    with pytest.raises((ValueError, ZeroDivisionError)):
        parse_rational(text)


def test_to_rational():
    assert to_rational(3) == Fraction(3)
    assert to_rational("1/3") == Fraction(1, 3)
    assert to_rational(Fraction(2, 5)) == Fraction(2, 5)
    with pytest.raises(TypeError):
        to_rational(True)
    with pytest.raises(TypeError):
        to_rational(0.5)


def test_format_rational():
    assert format_rational(Fraction(3)) == "3"
    assert format_rational(Fraction(-1, 12)) == "-1/12"


def test_inverse_factorial():
    assert inverse_factorial(4) == Fraction(1, 24)
