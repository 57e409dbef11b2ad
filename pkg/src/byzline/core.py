"""Exact scalar arithmetic and sorted position multisets.

Every position, distance and destination in the simulator is an exact
rational number (``fractions.Fraction``).  The adversarial constructions
depend on exact ties and exact midpoints, so no floating point is used
anywhere in the computation path; decimals appear only in rendered output.
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right
from fractions import Fraction
from typing import Iterable, Iterator, Union

Scalar = Fraction
ScalarLike = Union[Fraction, int, str]

__all__ = [
    "Scalar",
    "ScalarLike",
    "scalar",
    "format_exact",
    "format_decimal",
    "midpoint",
    "PositionMultiset",
]


def scalar(value: ScalarLike) -> Fraction:
    """Convert ``value`` to an exact rational.

    Accepts integers, Fractions, and strings in "p/q", decimal or
    scientific notation ("3/4", "0.25", "1e-6").  Conversion is exact.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("bool is not a scalar")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"not a rational scalar: {value!r}") from exc
    if isinstance(value, float):
        raise TypeError(
            "refusing float -> scalar conversion; pass a string or Fraction"
        )
    raise TypeError(f"cannot convert {type(value).__name__} to scalar")


def format_exact(x: Fraction) -> str:
    """Render ``x`` as "num/den", always including the denominator."""
    return f"{x.numerator}/{x.denominator}"


def format_decimal(x: Fraction, digits: int = 12) -> str:
    """Render ``x`` as a decimal string with up to ``digits`` fractional
    digits (truncated toward zero, trailing zeros stripped).

    Rendering only; the simulator never computes with decimals.
    """
    if digits < 0:
        raise ValueError("digits must be >= 0")
    sign = "-" if x < 0 else ""
    num, den = abs(x.numerator), x.denominator
    whole, rem = divmod(num, den)
    if rem == 0 or digits == 0:
        return f"{sign}{whole}"
    frac = rem * 10**digits // den
    frac_str = str(frac).rjust(digits, "0").rstrip("0")
    if not frac_str:
        return f"{sign}{whole}"
    return f"{sign}{whole}.{frac_str}"


def midpoint(a: Fraction, b: Fraction) -> Fraction:
    """Exact midpoint of two scalars."""
    return (a + b) / 2


class PositionMultiset:
    """Immutable multiset of positions, stored as an ascending sorted tuple.

    Indexed access is 1-based (``kth``) because the protocol reasons about
    the k-th smallest position of a snapshot.  Duplicates are kept; the
    cardinality counts repetitions.
    """

    __slots__ = ("_values",)

    def __init__(self, values: Iterable[ScalarLike]):
        self._values: tuple[Fraction, ...] = tuple(
            sorted(scalar(v) for v in values)
        )

    @classmethod
    def _from_sorted(cls, values: tuple[Fraction, ...]) -> "PositionMultiset":
        # Internal: caller guarantees ascending order.
        obj = cls.__new__(cls)
        obj._values = values
        return obj

    @property
    def values(self) -> tuple[Fraction, ...]:
        return self._values

    def __len__(self) -> int:
        return len(self._values)

    def __iter__(self) -> Iterator[Fraction]:
        return iter(self._values)

    def __contains__(self, value: ScalarLike) -> bool:
        v = scalar(value)
        i = bisect_left(self._values, v)
        return i < len(self._values) and self._values[i] == v

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PositionMultiset):
            return NotImplemented
        return self._values == other._values

    def __hash__(self) -> int:
        return hash(self._values)

    def __repr__(self) -> str:
        inner = ", ".join(str(v) for v in self._values)
        return f"PositionMultiset({{{inner}}})"

    def _require_nonempty(self) -> None:
        if not self._values:
            raise ValueError("operation undefined on an empty multiset")

    def min(self) -> Fraction:
        """Smallest element."""
        self._require_nonempty()
        return self._values[0]

    def max(self) -> Fraction:
        """Largest element."""
        self._require_nonempty()
        return self._values[-1]

    def range(self) -> tuple[Fraction, Fraction]:
        """Closed interval [min, max] as an endpoint pair."""
        self._require_nonempty()
        return (self._values[0], self._values[-1])

    def diameter(self) -> Fraction:
        """max - min; zero iff all elements are equal."""
        self._require_nonempty()
        return self._values[-1] - self._values[0]

    def kth(self, k: int) -> Fraction:
        """k-th smallest element, 1-based, counting multiplicity."""
        if not 1 <= k <= len(self._values):
            raise IndexError(f"k={k} out of range for multiset of size {len(self._values)}")
        return self._values[k - 1]

    def multiplicity(self, value: ScalarLike) -> int:
        """Number of occurrences of ``value``."""
        v = scalar(value)
        return bisect_right(self._values, v) - bisect_left(self._values, v)

    def first_index(self, value: ScalarLike) -> int:
        """1-based index of the first occurrence of ``value``."""
        v = scalar(value)
        i = bisect_left(self._values, v)
        if i == len(self._values) or self._values[i] != v:
            raise ValueError(f"{v} not in multiset")
        return i + 1

    def last_index(self, value: ScalarLike) -> int:
        """1-based index of the last occurrence of ``value``."""
        v = scalar(value)
        i = bisect_right(self._values, v)
        if i == 0 or self._values[i - 1] != v:
            raise ValueError(f"{v} not in multiset")
        return i

    def union(self, other: "PositionMultiset") -> "PositionMultiset":
        """Additive multiset union (multiplicities add up)."""
        return PositionMultiset(self._values + other._values)

    def slice_1based(self, lo: int, hi: int) -> "PositionMultiset":
        """Contiguous sub-multiset from index ``lo`` to ``hi`` inclusive (1-based)."""
        if not (1 <= lo <= hi <= len(self._values)):
            raise IndexError(f"invalid slice [{lo}, {hi}] for size {len(self._values)}")
        return PositionMultiset._from_sorted(self._values[lo - 1 : hi])


# Functional aliases mirroring the multiset vocabulary used elsewhere.

def min_of(s: PositionMultiset) -> Fraction:
    return s.min()


def max_of(s: PositionMultiset) -> Fraction:
    return s.max()


def range_of(s: PositionMultiset) -> tuple[Fraction, Fraction]:
    return s.range()


def diam_of(s: PositionMultiset) -> Fraction:
    return s.diameter()


def kth(s: PositionMultiset, k: int) -> Fraction:
    return s.kth(k)
