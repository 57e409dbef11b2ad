"""Convergence protocol: position-dependent trimming, election, midpoint moves.

A robot's whole decision procedure is a pure function of its view: the
snapshot it took during its Look phase, its own position inside that
snapshot, and the system parameters (n robots, at most f Byzantine).
Robots are anonymous and oblivious, so nothing else may influence the
outcome.

The default algorithm moves an *elected* robot (one at the extremes of the
snapshot) to the midpoint of its position-dependent trimmed snapshot.  Any
callable with the same signature can be plugged in as the algorithm under
test or under attack.
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from .core import PositionMultiset, midpoint, scalar

__all__ = [
    "ConfigurationError",
    "RobotView",
    "ComputeOutcome",
    "Algorithm",
    "trim_2f",
    "center",
    "elected",
    "convergence_compute",
    "full_trim_midpoint",
    "always_stay",
    "ALGORITHMS",
    "resolve_algorithm",
]


class ConfigurationError(ValueError):
    """Raised when (n, f) make an operation undefined."""


@dataclass(frozen=True)
class RobotView:
    """What a robot knows when it computes: its snapshot and itself.

    ``self_position`` must occur in ``snapshot``.  Positions are absolute;
    the algorithms are covariant under translation and reflection of the
    coordinate axis, which stands in for each robot's private frame.
    """

    snapshot: PositionMultiset
    self_position: Fraction
    n: int
    f: int

    def __post_init__(self) -> None:
        if self.n < 1 or self.f < 0:
            raise ConfigurationError(f"invalid parameters n={self.n}, f={self.f}")
        if len(self.snapshot) != self.n:
            raise ConfigurationError(
                f"snapshot has {len(self.snapshot)} positions, expected n={self.n}"
            )
        if self.self_position not in self.snapshot:
            raise ConfigurationError("self_position missing from snapshot")


@dataclass(frozen=True)
class ComputeOutcome:
    """Decision of one Compute phase: stay put, or move to a destination.

    Staying is explicit (``destination is None``) so trace analysis can
    tell "not allowed to move" apart from "moving to where I already am".
    """

    destination: Fraction | None

    @classmethod
    def stay(cls) -> "ComputeOutcome":
        return cls(destination=None)

    @classmethod
    def move_to(cls, destination) -> "ComputeOutcome":
        return cls(destination=scalar(destination))

    @property
    def is_stay(self) -> bool:
        return self.destination is None


Algorithm = Callable[[RobotView], ComputeOutcome]


def _require_trimmable(view: RobotView) -> None:
    if view.n <= 4 * view.f:
        raise ConfigurationError(
            f"trim undefined for n={view.n} <= 4f={4 * view.f}"
        )


def trim_2f(view: RobotView) -> PositionMultiset:
    """Trim up to 2f extreme positions on each side of the caller.

    Over the sorted snapshot P_1 <= ... <= P_n, the result is the
    contiguous block P_lo..P_hi with

        lo = caller index   if self < P_(2f+1)   else 2f+1
        hi = caller index   if self > P_(n-2f)   else n-2f

    Anonymity means the caller's index among equal positions is ambiguous;
    it is resolved to the first (resp. last) occurrence of the caller's
    value, which keeps every tied copy and makes the result a pure
    function of the value.  The result always contains the caller.
    """
    _require_trimmable(view)
    vals = view.snapshot.values
    n, f = view.n, view.f
    self_pos = view.self_position
    low_guard = vals[2 * f]          # P_(2f+1)
    high_guard = vals[n - 2 * f - 1]  # P_(n-2f)
    if self_pos < low_guard:
        start = bisect_left(vals, self_pos)
    else:
        start = 2 * f
    if self_pos > high_guard:
        end = bisect_right(vals, self_pos) - 1
    else:
        end = n - 2 * f - 1
    return view.snapshot.slice_1based(start + 1, end + 1)


def center(s: PositionMultiset) -> Fraction:
    """Exact midpoint of the range of ``s`` (interior points are ignored)."""
    lo, hi = s.range()
    return midpoint(lo, hi)


def elected(view: RobotView) -> bool:
    """True iff the caller sits at the extremes of the snapshot.

    A robot may move only when its position is <= the (f+1)-th smallest
    or >= the (n-f)-th smallest observed position.
    """
    if view.n < view.f + 1:
        raise ConfigurationError(f"election undefined for n={view.n} < f+1={view.f + 1}")
    vals = view.snapshot.values
    return view.self_position <= vals[view.f] or view.self_position >= vals[view.n - view.f - 1]


def convergence_compute(view: RobotView) -> ComputeOutcome:
    """Default algorithm: elected robots move to the center of their trim.

    Correct whenever n > 5f, under fully asynchronous non-atomic
    scheduling; executable for any n > 4f.
    """
    if not elected(view):
        return ComputeOutcome.stay()
    return ComputeOutcome.move_to(center(trim_2f(view)))


def full_trim_midpoint(view: RobotView) -> ComputeOutcome:
    """Reference algorithm: drop the f smallest and f largest positions
    unconditionally and move to the midpoint of what remains.

    Not position-dependent and with no election step; used as a
    comparison victim in adversary experiments.
    """
    if view.n <= 2 * view.f:
        raise ConfigurationError(
            f"full trim undefined for n={view.n} <= 2f={2 * view.f}"
        )
    vals = view.snapshot.values
    trimmed = vals[view.f : view.n - view.f]
    return ComputeOutcome.move_to(midpoint(trimmed[0], trimmed[-1]))


def always_stay(view: RobotView) -> ComputeOutcome:
    """Degenerate algorithm that never moves; fails non-triviality."""
    return ComputeOutcome.stay()


ALGORITHMS: dict[str, Algorithm] = {
    "algo4": convergence_compute,
    "fulltrim": full_trim_midpoint,
    "stay": always_stay,
}


def resolve_algorithm(name: str) -> Algorithm:
    """Look up a built-in algorithm or import a "module:callable" plugin."""
    if name in ALGORITHMS:
        return ALGORITHMS[name]
    if ":" in name:
        module_name, _, attr = name.partition(":")
        import importlib

        module = importlib.import_module(module_name)
        algo = getattr(module, attr)
        if not callable(algo):
            raise ConfigurationError(f"plugin {name!r} is not callable")
        return algo
    raise ConfigurationError(
        f"unknown algorithm {name!r}; choose from {sorted(ALGORITHMS)} or 'module:callable'"
    )
