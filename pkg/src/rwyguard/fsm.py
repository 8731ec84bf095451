"""Operational state machines for the takeoff and landing procedures.

Each machine classifies live prediction snapshots into advisory states with
the green/amber/red color conventions used on certified flight-deck
displays.  Transitions outside the documented graph raise instead of
silently changing state; that always indicates an ingestion or ordering
bug upstream.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

DELTA_WARNING_THRESHOLD = 0.02   # static-vs-dynamic deviation raising a warning
MAX_BRAKE_OVERRUN_FRACTION = 0.10  # overrun beyond this fraction of runway -> max brake
SEVERITY_DOWNGRADE_FRAMES = 5    # consecutive calmer frames before easing an advisory


class IllegalTransition(Exception):
    """(state, event) pair outside the documented graph."""


class Severity(enum.IntEnum):
    NOMINAL = 0
    CAUTION = 1
    CRITICAL = 2


class TakeoffState(enum.Enum):
    STANDBY = "Standby"
    CALCULATING = "Calculating"
    AS_EXPECTED = "AsExpected"
    WARNING = "Warning"
    REJECT_TAKEOFF = "RejectTakeOff"
    RTO_INITIATED = "RtoInitiated"
    RTO_AS_EXPECTED = "RtoAsExpected"
    RTO_BRAKE_MORE = "RtoBrakeMore"
    RTO_MAX_BRAKE = "RtoMaxBrake"
    TAKEOFF = "TakeOff"


class LandingState(enum.Enum):
    SYSTEM_READY = "SystemReady"
    WITHIN_LIMITS = "WithinLimits"
    WARNING = "Warning"
    GO_AROUND = "GoAround"
    TD_WITHIN_LIMITS = "TdWithinLimits"
    TD_WARNING = "TdWarning"
    BRAKE_MORE = "BrakeMore"


class StatusColor(enum.Enum):
    GREEN = "Green"
    AMBER = "Amber"
    RED = "Red"
    NEUTRAL = "Neutral"


class TakeoffEvent(enum.Enum):
    THROTTLE_UP = "ThrottleUp"
    SEED_COMPLETE = "SeedComplete"   # carries severity
    SEVERITY = "Severity"            # carries severity
    RTO_DETECTED = "RtoDetected"
    V1_REACHED = "V1Reached"
    STOPPED = "Stopped"


class LandingEvent(enum.Enum):
    BELOW_300FT = "Below300ft"       # carries severity
    SEVERITY = "Severity"            # carries severity
    TOUCHDOWN = "Touchdown"          # carries severity
    BRAKING_STARTED = "BrakingStarted"
    STOPPED = "Stopped"


_ROLL_SEVERITY_STATE = {
    Severity.NOMINAL: TakeoffState.AS_EXPECTED,
    Severity.CAUTION: TakeoffState.WARNING,
    Severity.CRITICAL: TakeoffState.REJECT_TAKEOFF,
}
_RTO_SEVERITY_STATE = {
    Severity.NOMINAL: TakeoffState.RTO_AS_EXPECTED,
    Severity.CAUTION: TakeoffState.RTO_BRAKE_MORE,
    Severity.CRITICAL: TakeoffState.RTO_MAX_BRAKE,
}
_AIRBORNE_SEVERITY_STATE = {
    Severity.NOMINAL: LandingState.WITHIN_LIMITS,
    Severity.CAUTION: LandingState.WARNING,
    Severity.CRITICAL: LandingState.GO_AROUND,
}
_GROUND_SEVERITY_STATE = {
    Severity.NOMINAL: LandingState.TD_WITHIN_LIMITS,
    Severity.CAUTION: LandingState.TD_WARNING,
    Severity.CRITICAL: LandingState.BRAKE_MORE,
}

_ROLL_STATES = frozenset({TakeoffState.CALCULATING, TakeoffState.AS_EXPECTED,
                          TakeoffState.WARNING, TakeoffState.REJECT_TAKEOFF})
_RTO_STATES = frozenset({TakeoffState.RTO_INITIATED, TakeoffState.RTO_AS_EXPECTED,
                         TakeoffState.RTO_BRAKE_MORE, TakeoffState.RTO_MAX_BRAKE})
_LANDING_AIRBORNE = frozenset({LandingState.WITHIN_LIMITS, LandingState.WARNING,
                               LandingState.GO_AROUND})
_LANDING_GROUND = frozenset({LandingState.TD_WITHIN_LIMITS, LandingState.TD_WARNING,
                             LandingState.BRAKE_MORE})

STATE_COLORS = {
    TakeoffState.STANDBY: StatusColor.NEUTRAL,
    TakeoffState.CALCULATING: StatusColor.NEUTRAL,
    TakeoffState.AS_EXPECTED: StatusColor.GREEN,
    TakeoffState.WARNING: StatusColor.AMBER,
    TakeoffState.REJECT_TAKEOFF: StatusColor.RED,
    TakeoffState.RTO_INITIATED: StatusColor.AMBER,
    TakeoffState.RTO_AS_EXPECTED: StatusColor.GREEN,
    TakeoffState.RTO_BRAKE_MORE: StatusColor.AMBER,
    TakeoffState.RTO_MAX_BRAKE: StatusColor.RED,
    TakeoffState.TAKEOFF: StatusColor.GREEN,
    LandingState.SYSTEM_READY: StatusColor.NEUTRAL,
    LandingState.WITHIN_LIMITS: StatusColor.GREEN,
    LandingState.WARNING: StatusColor.AMBER,
    LandingState.GO_AROUND: StatusColor.RED,
    LandingState.TD_WITHIN_LIMITS: StatusColor.GREEN,
    LandingState.TD_WARNING: StatusColor.AMBER,
    LandingState.BRAKE_MORE: StatusColor.AMBER,
}


def color_of(state) -> StatusColor:
    """Advisory background color for any takeoff or landing state."""
    return STATE_COLORS[state]


def classify(snapshot, static_total: float, runway_length: float) -> Severity:
    """Severity of a converged snapshot during the takeoff roll or approach.

    Overrunning the runway dominates; otherwise a 2% deviation between the
    static and dynamic totals raises a caution.
    """
    if snapshot.stop_margin <= 0:
        return Severity.CRITICAL
    if abs(snapshot.delta_from_static) >= DELTA_WARNING_THRESHOLD:
        return Severity.CAUTION
    return Severity.NOMINAL


def classify_braking(snapshot, static_total: float, runway_length: float) -> Severity:
    """Severity while actively stopping (RTO or landing braking).

    The projected overrun splits amber from red: up to 10% of the runway
    length calls for more braking, beyond that for maximum braking.
    """
    overrun = -snapshot.stop_margin
    if overrun > MAX_BRAKE_OVERRUN_FRACTION * runway_length:
        return Severity.CRITICAL
    if overrun > 0:
        return Severity.CAUTION
    if abs(snapshot.delta_from_static) >= DELTA_WARNING_THRESHOLD:
        return Severity.CAUTION
    return Severity.NOMINAL


def _require_severity(event, severity):
    if severity is None:
        raise IllegalTransition(f"{event} requires a severity payload")
    return severity


def takeoff_transition(state: TakeoffState, event: TakeoffEvent,
                       severity: Severity | None = None) -> TakeoffState:
    """Documented takeoff graph; raises IllegalTransition off-graph.

    STANDBY --ThrottleUp--> CALCULATING --SeedComplete(sev)--> roll triple;
    the roll triple interchanges on Severity, reaches TAKEOFF on V1Reached,
    and any rolling state (TAKEOFF included) enters RTO_INITIATED on
    RtoDetected.  RTO states interchange on Severity and accept Stopped.
    """
    if event is TakeoffEvent.THROTTLE_UP:
        if state is TakeoffState.STANDBY:
            return TakeoffState.CALCULATING
    elif event is TakeoffEvent.SEED_COMPLETE:
        if state is TakeoffState.CALCULATING:
            return _ROLL_SEVERITY_STATE[_require_severity(event, severity)]
    elif event is TakeoffEvent.SEVERITY:
        if state in _ROLL_STATES and state is not TakeoffState.CALCULATING:
            return _ROLL_SEVERITY_STATE[_require_severity(event, severity)]
        if state in _RTO_STATES:
            return _RTO_SEVERITY_STATE[_require_severity(event, severity)]
    elif event is TakeoffEvent.RTO_DETECTED:
        if state in _ROLL_STATES or state is TakeoffState.TAKEOFF:
            return TakeoffState.RTO_INITIATED
    elif event is TakeoffEvent.V1_REACHED:
        if state in _ROLL_STATES:
            return TakeoffState.TAKEOFF
    elif event is TakeoffEvent.STOPPED:
        if state in _RTO_STATES:
            return state  # terminal: machine stays put, procedure complete
    raise IllegalTransition(f"takeoff: {state.value} cannot accept {event.value}")


def landing_transition(state: LandingState, event: LandingEvent,
                       severity: Severity | None = None) -> LandingState:
    """Documented landing graph; raises IllegalTransition off-graph.

    SYSTEM_READY gates on the 300 ft crossing; the airborne triple
    interchanges on Severity until Touchdown maps it onto the ground
    triple, from which GoAround is unreachable by construction.
    """
    if event is LandingEvent.BELOW_300FT:
        if state is LandingState.SYSTEM_READY:
            return _AIRBORNE_SEVERITY_STATE[_require_severity(event, severity)]
    elif event is LandingEvent.SEVERITY:
        if state in _LANDING_AIRBORNE:
            return _AIRBORNE_SEVERITY_STATE[_require_severity(event, severity)]
        if state in _LANDING_GROUND:
            return _GROUND_SEVERITY_STATE[_require_severity(event, severity)]
    elif event is LandingEvent.TOUCHDOWN:
        if state in _LANDING_AIRBORNE:
            return _GROUND_SEVERITY_STATE[_require_severity(event, severity)]
    elif event is LandingEvent.BRAKING_STARTED:
        if state in _LANDING_GROUND:
            return state
    elif event is LandingEvent.STOPPED:
        if state in _LANDING_GROUND:
            return state  # terminal
    raise IllegalTransition(f"landing: {state.value} cannot accept {event.value}")


class SeverityFilter:
    """Hysteresis against advisory flicker.

    Upgrades apply immediately; a downgrade must hold for
    SEVERITY_DOWNGRADE_FRAMES consecutive frames before it clears.
    """

    def __init__(self, frames: int = SEVERITY_DOWNGRADE_FRAMES):
        self.frames = frames
        self.current = Severity.NOMINAL
        self._calmer_run = 0

    def feed(self, raw: Severity) -> Severity:
        if raw >= self.current:
            self.current = raw
            self._calmer_run = 0
        else:
            self._calmer_run += 1
            if self._calmer_run >= self.frames:
                self.current = raw
                self._calmer_run = 0
        return self.current


@dataclass
class TransitionRecord:
    from_state: str
    to_state: str
    reason: str


class TakeoffMachine:
    """Stateful wrapper applying events in arrival order."""

    def __init__(self):
        self.state = TakeoffState.STANDBY
        self.finished = False
        self.history: list[TransitionRecord] = []

    def apply(self, event: TakeoffEvent, severity: Severity | None = None) -> bool:
        """Apply one event; returns True when the state actually changed."""
        new = takeoff_transition(self.state, event, severity)
        if event is TakeoffEvent.STOPPED:
            self.finished = True
        changed = new is not self.state
        if changed:
            self.history.append(TransitionRecord(self.state.value, new.value,
                                                 event.value))
            self.state = new
        return changed


class LandingMachine:
    def __init__(self):
        self.state = LandingState.SYSTEM_READY
        self.finished = False
        self.history: list[TransitionRecord] = []

    def apply(self, event: LandingEvent, severity: Severity | None = None) -> bool:
        new = landing_transition(self.state, event, severity)
        if event is LandingEvent.STOPPED:
            self.finished = True
        changed = new is not self.state
        if changed:
            self.history.append(TransitionRecord(self.state.value, new.value,
                                                 event.value))
            self.state = new
        return changed
