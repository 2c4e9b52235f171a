from fractions import Fraction
from typing import Iterable, Sequence


def parse_fraction(text) -> Fraction:
    """Parse '3/5', '0.9' or an integer into an exact Fraction."""
    if isinstance(text, Fraction):
        return text
    try:
        return Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"Not an exact rational: {text!r}") from exc


def parse_fractions(values: Iterable) -> list[Fraction]:
    return [parse_fraction(v) for v in values]


def parse_weight(values: Sequence, rank: int) -> tuple[int, ...]:
    """Integer fundamental-weight coordinates of length rank."""
    if len(values) != rank:
        raise ValueError(f"Expected {rank} weight coordinates, got {len(values)}")
    try:
        return tuple(int(v) for v in values)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"Weight coordinates must be integers: {list(values)!r}") from exc
