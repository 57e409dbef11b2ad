"""Execution engine: robot cycle state machine, movement rules, traces.

The engine applies one schedule event at a time to a system state and is
completely deterministic: all nondeterminism (which robot acts, where a
move is interrupted, where Byzantine robots jump) is injected through the
events themselves.

Two execution models are supported.  In the atomic model a robot's whole
Look-Compute-Move cycle is a single event, so between events every robot
is idle.  In the non-atomic model the three phases are separate events
and may interleave arbitrarily across robots; a robot may therefore
compute on a snapshot that is already stale.  Atomic executions are a
strict subset of non-atomic ones.

A correct robot ordered to move travels toward its destination and may be
stopped by the scheduler, but never before it has covered its minimal
distance delta, and never past the destination; if the destination is
within delta, it is reached exactly.  Byzantine robots never run cycles:
the scheduler moves them by teleport events.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from .core import PositionMultiset, format_decimal, format_exact, scalar
from .protocol import Algorithm, ComputeOutcome, RobotView

__all__ = [
    "Model",
    "RobotKind",
    "Phase",
    "ActionType",
    "PhaseError",
    "RobotState",
    "SystemState",
    "ScheduleEvent",
    "TraceRecord",
    "Trace",
    "build_system",
    "ground_truth",
    "check_event",
    "apply_event",
    "apply_batch",
]


class Model(Enum):
    ATOM = "atom"
    CORDA = "corda"


class RobotKind(Enum):
    CORRECT = "correct"
    BYZANTINE = "byzantine"


class Phase(Enum):
    IDLE = "idle"
    LOOKED = "looked"
    COMPUTED = "computed"


class ActionType(Enum):
    LOOK = "look"
    COMPUTE = "compute"
    MOVE = "move"
    FULL_CYCLE = "full_cycle"
    TELEPORT = "teleport"


class PhaseError(RuntimeError):
    """An event was applied to a robot whose phase or kind forbids it."""


@dataclass
class RobotState:
    """Per-robot cycle state.

    The identifier exists only for the engine and the trace; algorithms
    never see it (robots are anonymous).  ``snapshot`` and the
    ``*_at_look`` fields are populated during Look and consumed by
    Compute/Move; they may be stale by the time they are used, which is
    exactly the non-atomic model's hazard.
    """

    rid: int
    position: Fraction
    kind: RobotKind
    delta: Fraction
    phase: Phase = Phase.IDLE
    snapshot: PositionMultiset | None = None
    look_step: int | None = None
    pos_at_look: Fraction | None = None
    u_lo_at_look: Fraction | None = None
    u_hi_at_look: Fraction | None = None
    outcome: ComputeOutcome | None = None
    cycles_completed: int = 0

    def clear_cycle(self) -> None:
        self.phase = Phase.IDLE
        self.snapshot = None
        self.look_step = None
        self.pos_at_look = None
        self.u_lo_at_look = None
        self.u_hi_at_look = None
        self.outcome = None


@dataclass
class SystemState:
    """Whole-system snapshot: robot states plus a global event counter."""

    robots: list[RobotState]
    f: int
    model: Model
    time: int = 0

    @property
    def n(self) -> int:
        return len(self.robots)

    def robot(self, rid: int) -> RobotState:
        return self.robots[rid]

    def correct_robots(self) -> list[RobotState]:
        return [r for r in self.robots if r.kind is RobotKind.CORRECT]

    def byzantine_robots(self) -> list[RobotState]:
        return [r for r in self.robots if r.kind is RobotKind.BYZANTINE]

    def positions(self) -> PositionMultiset:
        return PositionMultiset(r.position for r in self.robots)

    def all_idle(self) -> bool:
        return all(r.phase is Phase.IDLE for r in self.robots)

    def clone(self) -> "SystemState":
        return SystemState(
            robots=[replace(r) for r in self.robots],
            f=self.f,
            model=self.model,
            time=self.time,
        )


@dataclass(frozen=True)
class ScheduleEvent:
    """One atomic engine step for one robot.

    ``requested_stop`` is the travel distance the scheduler asks for on a
    move (None means travel all the way); the engine clamps it into
    [delta, distance-to-destination].  ``target`` is the teleport
    destination for a Byzantine robot.
    """

    robot: int
    action: ActionType
    requested_stop: Fraction | None = None
    target: Fraction | None = None


def build_system(
    positions: Sequence,
    kinds: Sequence[RobotKind],
    deltas: Sequence,
    f: int,
    model: Model,
) -> SystemState:
    """Assemble a system state, validating the fault-bound bookkeeping."""
    if len(positions) != len(kinds) or len(positions) != len(deltas):
        raise ValueError("positions, kinds and deltas must have equal length")
    n = len(positions)
    if n < 1:
        raise ValueError("need at least one robot")
    byz = sum(1 for k in kinds if k is RobotKind.BYZANTINE)
    if byz > f:
        raise ValueError(f"{byz} Byzantine robots exceed the declared bound f={f}")
    robots = []
    for rid, (pos, kind, delta) in enumerate(zip(positions, kinds, deltas)):
        d = scalar(delta)
        if kind is RobotKind.CORRECT and d <= 0:
            raise ValueError(f"robot {rid}: delta must be > 0")
        robots.append(RobotState(rid=rid, position=scalar(pos), kind=kind, delta=d))
    return SystemState(robots=robots, f=f, model=model)


def ground_truth(
    state: SystemState,
) -> tuple[PositionMultiset, PositionMultiset, PositionMultiset]:
    """(U, D, UD): correct positions, their pending destinations, and the
    additive union of both.

    A robot with no computed destination in flight contributes its
    position to D; a robot that computed "stay" likewise.  Byzantine
    robots never appear.
    """
    u_vals = []
    d_vals = []
    for r in state.robots:
        if r.kind is not RobotKind.CORRECT:
            continue
        u_vals.append(r.position)
        if r.phase is Phase.COMPUTED and r.outcome is not None and not r.outcome.is_stay:
            d_vals.append(r.outcome.destination)
        else:
            d_vals.append(r.position)
    u = PositionMultiset(u_vals)
    d = PositionMultiset(d_vals)
    return u, d, u.union(d)


@dataclass
class TraceRecord:
    """One applied event plus the system statistics right after it."""

    step: int
    robot: int
    kind: str
    action: str
    outcome: str
    position_before: Fraction
    position_after: Fraction
    destination: Fraction | None
    look_step: int | None
    pos_at_look: Fraction | None
    u_lo_at_look: Fraction | None
    u_hi_at_look: Fraction | None
    u_min: Fraction
    u_max: Fraction
    diam_u: Fraction
    ud_min: Fraction
    ud_max: Fraction
    diam_ud: Fraction

    @property
    def cycle_completed(self) -> bool:
        return self.action in ("move", "full_cycle")

    @property
    def computed_destination(self) -> bool:
        return self.action in ("compute", "full_cycle")


_CSV_COLUMNS = [
    "step",
    "robot",
    "kind",
    "action",
    "outcome",
    "position_before",
    "position_after",
    "destination",
    "look_step",
    "pos_at_look",
    "u_lo_at_look",
    "u_hi_at_look",
    "u_min",
    "u_max",
    "diam_u",
    "ud_min",
    "ud_max",
    "diam_ud",
    "position_before_dec",
    "position_after_dec",
    "destination_dec",
    "diam_u_dec",
    "diam_ud_dec",
]


@dataclass
class Trace:
    """Recorded execution: immutable setup metadata plus one record per event."""

    n: int
    f: int
    model: str
    kinds: list[str]
    deltas: list[Fraction]
    initial_positions: list[Fraction]
    records: list[TraceRecord] = field(default_factory=list)

    @classmethod
    def for_state(cls, state: SystemState) -> "Trace":
        return cls(
            n=state.n,
            f=state.f,
            model=state.model.value,
            kinds=[r.kind.value for r in state.robots],
            deltas=[r.delta for r in state.robots],
            initial_positions=[r.position for r in state.robots],
        )

    def append(self, record: TraceRecord) -> None:
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    def correct_ids(self) -> list[int]:
        return [i for i, k in enumerate(self.kinds) if k == "correct"]

    def initial_ground_truth(self) -> tuple[PositionMultiset, PositionMultiset, PositionMultiset]:
        u = PositionMultiset(
            p for p, k in zip(self.initial_positions, self.kinds) if k == "correct"
        )
        return u, u, u.union(u)

    def diam_u_series(self) -> list[Fraction]:
        """diam(U) at step 0 (initial) and after every event."""
        u, _, _ = self.initial_ground_truth()
        return [u.diameter()] + [rec.diam_u for rec in self.records]

    # ---- CSV serialization -------------------------------------------------

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")

    def to_csv(self) -> str:
        def exact(x: Fraction | None) -> str:
            return "" if x is None else format_exact(x)

        def opt_int(x: int | None) -> str:
            return "" if x is None else str(x)

        buf = io.StringIO()
        buf.write(f"# n={self.n}\n")
        buf.write(f"# f={self.f}\n")
        buf.write(f"# model={self.model}\n")
        buf.write("# kinds=" + ",".join(self.kinds) + "\n")
        buf.write("# deltas=" + ",".join(format_exact(d) for d in self.deltas) + "\n")
        buf.write(
            "# initial=" + ",".join(format_exact(p) for p in self.initial_positions) + "\n"
        )
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(_CSV_COLUMNS)
        for rec in self.records:
            writer.writerow(
                [
                    rec.step,
                    rec.robot,
                    rec.kind,
                    rec.action,
                    rec.outcome,
                    exact(rec.position_before),
                    exact(rec.position_after),
                    exact(rec.destination),
                    opt_int(rec.look_step),
                    exact(rec.pos_at_look),
                    exact(rec.u_lo_at_look),
                    exact(rec.u_hi_at_look),
                    exact(rec.u_min),
                    exact(rec.u_max),
                    exact(rec.diam_u),
                    exact(rec.ud_min),
                    exact(rec.ud_max),
                    exact(rec.diam_ud),
                    format_decimal(rec.position_before),
                    format_decimal(rec.position_after),
                    "" if rec.destination is None else format_decimal(rec.destination),
                    format_decimal(rec.diam_u),
                    format_decimal(rec.diam_ud),
                ]
            )
        return buf.getvalue()

    @classmethod
    def read_csv(cls, path) -> "Trace":
        return cls.from_csv(Path(path).read_text(encoding="utf-8"))

    @classmethod
    def from_csv(cls, text: str) -> "Trace":
        meta: dict[str, str] = {}
        lines = text.splitlines()
        body_start = 0
        for i, line in enumerate(lines):
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key.strip()] = value
                body_start = i + 1
            else:
                break

        def frac(s: str) -> Fraction | None:
            return None if s == "" else Fraction(s)

        trace = cls(
            n=int(meta["n"]),
            f=int(meta["f"]),
            model=meta["model"],
            kinds=meta["kinds"].split(","),
            deltas=[Fraction(s) for s in meta["deltas"].split(",")],
            initial_positions=[Fraction(s) for s in meta["initial"].split(",")],
        )
        reader = csv.DictReader(io.StringIO("\n".join(lines[body_start:])))
        for row in reader:
            trace.append(
                TraceRecord(
                    step=int(row["step"]),
                    robot=int(row["robot"]),
                    kind=row["kind"],
                    action=row["action"],
                    outcome=row["outcome"],
                    position_before=Fraction(row["position_before"]),
                    position_after=Fraction(row["position_after"]),
                    destination=frac(row["destination"]),
                    look_step=None if row["look_step"] == "" else int(row["look_step"]),
                    pos_at_look=frac(row["pos_at_look"]),
                    u_lo_at_look=frac(row["u_lo_at_look"]),
                    u_hi_at_look=frac(row["u_hi_at_look"]),
                    u_min=Fraction(row["u_min"]),
                    u_max=Fraction(row["u_max"]),
                    diam_u=Fraction(row["diam_u"]),
                    ud_min=Fraction(row["ud_min"]),
                    ud_max=Fraction(row["ud_max"]),
                    diam_ud=Fraction(row["diam_ud"]),
                )
            )
        return trace


# ---- event application -----------------------------------------------------


def check_event(state: SystemState, ev: ScheduleEvent) -> None:
    """Validate an event against the current state; raise PhaseError if invalid."""
    if not 0 <= ev.robot < state.n:
        raise PhaseError(f"unknown robot id {ev.robot}")
    r = state.robot(ev.robot)
    if ev.action is ActionType.TELEPORT:
        if r.kind is not RobotKind.BYZANTINE:
            raise PhaseError(f"robot {r.rid} is correct; teleport is Byzantine-only")
        if ev.target is None:
            raise PhaseError("teleport requires a target")
        return
    if r.kind is not RobotKind.CORRECT:
        raise PhaseError(f"robot {r.rid} is Byzantine and never runs cycles")
    if ev.action is ActionType.FULL_CYCLE:
        if state.model is not Model.ATOM:
            raise PhaseError("full-cycle events only exist in the atomic model")
        if r.phase is not Phase.IDLE:
            raise PhaseError(f"robot {r.rid} not idle for a full cycle")
    elif ev.action is ActionType.LOOK:
        if state.model is Model.ATOM:
            raise PhaseError("granular phase events only exist in the non-atomic model")
        if r.phase is not Phase.IDLE:
            raise PhaseError(f"robot {r.rid} cannot look in phase {r.phase.value}")
    elif ev.action is ActionType.COMPUTE:
        if state.model is Model.ATOM:
            raise PhaseError("granular phase events only exist in the non-atomic model")
        if r.phase is not Phase.LOOKED:
            raise PhaseError(f"robot {r.rid} cannot compute in phase {r.phase.value}")
    elif ev.action is ActionType.MOVE:
        if state.model is Model.ATOM:
            raise PhaseError("granular phase events only exist in the non-atomic model")
        if r.phase is not Phase.COMPUTED:
            raise PhaseError(f"robot {r.rid} cannot move in phase {r.phase.value}")
    if ev.requested_stop is not None and ev.requested_stop < 0:
        raise PhaseError("requested_stop must be >= 0")


def _do_look(state: SystemState, r: RobotState) -> None:
    u, _, _ = ground_truth(state)
    r.snapshot = state.positions()
    r.look_step = state.time
    r.pos_at_look = r.position
    r.u_lo_at_look = u.min()
    r.u_hi_at_look = u.max()
    r.phase = Phase.LOOKED


def _do_compute(state: SystemState, r: RobotState, algo: Algorithm) -> None:
    view = RobotView(
        snapshot=r.snapshot,
        self_position=r.pos_at_look,
        n=state.n,
        f=state.f,
    )
    r.outcome = algo(view)
    r.phase = Phase.COMPUTED


def _do_move(r: RobotState, requested_stop: Fraction | None) -> None:
    outcome = r.outcome
    if not outcome.is_stay:
        dest = outcome.destination
        dist = abs(dest - r.position)
        if dist <= r.delta:
            traveled = dist
        elif requested_stop is None:
            traveled = dist
        else:
            traveled = min(max(requested_stop, r.delta), dist)
        direction = 1 if dest > r.position else -1
        r.position = r.position + direction * traveled
    r.cycles_completed += 1
    r.clear_cycle()


def _record(
    state: SystemState,
    trace: Trace | None,
    r: RobotState,
    action: ActionType,
    position_before: Fraction,
    outcome: ComputeOutcome | None,
    look_info: tuple | None,
) -> None:
    state.time += 1
    if trace is None:
        return
    u, _, ud = ground_truth(state)
    if outcome is None:
        outcome_str, destination = "", None
    elif outcome.is_stay:
        outcome_str, destination = "stay", r.position
    else:
        outcome_str, destination = "move_to", outcome.destination
    look_step = pos_at_look = u_lo = u_hi = None
    if look_info is not None:
        look_step, pos_at_look, u_lo, u_hi = look_info
    trace.append(
        TraceRecord(
            step=state.time - 1,
            robot=r.rid,
            kind=r.kind.value,
            action=action.value,
            outcome=outcome_str,
            position_before=position_before,
            position_after=r.position,
            destination=destination,
            look_step=look_step,
            pos_at_look=pos_at_look,
            u_lo_at_look=u_lo,
            u_hi_at_look=u_hi,
            u_min=u.min(),
            u_max=u.max(),
            diam_u=u.diameter(),
            ud_min=ud.min(),
            ud_max=ud.max(),
            diam_ud=ud.diameter(),
        )
    )


def apply_event(
    state: SystemState,
    ev: ScheduleEvent,
    algo: Algorithm,
    trace: Trace | None = None,
) -> SystemState:
    """Apply one event in place; returns the same state for chaining."""
    check_event(state, ev)
    r = state.robot(ev.robot)
    before = r.position

    if ev.action is ActionType.TELEPORT:
        r.position = ev.target
        _record(state, trace, r, ev.action, before, None, None)
        return state

    if ev.action is ActionType.LOOK:
        _do_look(state, r)
        _record(state, trace, r, ev.action, before, None,
                (r.look_step, r.pos_at_look, r.u_lo_at_look, r.u_hi_at_look))
        return state

    if ev.action is ActionType.COMPUTE:
        _do_compute(state, r, algo)
        _record(state, trace, r, ev.action, before, r.outcome,
                (r.look_step, r.pos_at_look, r.u_lo_at_look, r.u_hi_at_look))
        return state

    if ev.action is ActionType.MOVE:
        look_info = (r.look_step, r.pos_at_look, r.u_lo_at_look, r.u_hi_at_look)
        outcome = r.outcome
        _do_move(r, ev.requested_stop)
        _record(state, trace, r, ev.action, before, outcome, look_info)
        return state

    # FULL_CYCLE: the three phases back to back, atomically.
    _do_look(state, r)
    look_info = (r.look_step, r.pos_at_look, r.u_lo_at_look, r.u_hi_at_look)
    _do_compute(state, r, algo)
    outcome = r.outcome
    _do_move(r, ev.requested_stop)
    _record(state, trace, r, ev.action, before, outcome, look_info)
    return state


def apply_batch(
    state: SystemState,
    events: Sequence[ScheduleEvent],
    algo: Algorithm,
    trace: Trace | None = None,
) -> SystemState:
    """Apply a batch of simultaneously initiated events.

    A batch of several full-cycle events is executed as a synchronized
    wave: every robot looks at the same pre-batch configuration, then all
    compute, then all move.  Any other batch (granular phases, teleports,
    or a single event) applies element-wise, which already matches
    simultaneity because same-phase events do not interact.
    """
    full_cycles = [ev for ev in events if ev.action is ActionType.FULL_CYCLE]
    if len(full_cycles) > 1:
        if len(full_cycles) != len(events):
            raise PhaseError("cannot mix full-cycle events with other actions in one batch")
        seen = set()
        for ev in events:
            check_event(state, ev)
            if ev.robot in seen:
                raise PhaseError(f"robot {ev.robot} appears twice in one wave")
            seen.add(ev.robot)
        robots = [state.robot(ev.robot) for ev in events]
        before = [r.position for r in robots]
        for r in robots:
            _do_look(state, r)
        look_infos = [
            (r.look_step, r.pos_at_look, r.u_lo_at_look, r.u_hi_at_look) for r in robots
        ]
        for r in robots:
            _do_compute(state, r, algo)
        outcomes = [r.outcome for r in robots]
        for ev, r, b, info, out in zip(events, robots, before, look_infos, outcomes):
            _do_move(r, ev.requested_stop)
            _record(state, trace, r, ActionType.FULL_CYCLE, b, out, info)
        return state
    for ev in events:
        apply_event(state, ev, algo, trace)
    return state
