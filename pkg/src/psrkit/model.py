"""Assembly states, procedure definitions, and step events.

An assembly is tracked as a fixed-length code over its components, one
status per component: 1 (correctly installed), 0 (absent), -1 (incorrectly
installed). A procedure is a set of actions, each flipping one component,
with a prerequisite partial order between actions. Comparing two assembly
states tells you which procedure steps were completed in between.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass
from functools import cached_property


class ComponentStatus(enum.IntEnum):
    INCORRECT = -1
    ABSENT = 0
    INSTALLED = 1


class Transition(enum.Enum):
    """What happened to a single component."""

    INSTALL = "install"
    REMOVE = "remove"
    INCORRECT = "incorrect"


class EventSource(enum.Enum):
    RECOGNIZED = "recognized"
    INFERRED = "inferred"
    GROUND_TRUTH = "ground_truth"


def status_for_value(value: int) -> ComponentStatus:
    """Map an integer to a ComponentStatus, rejecting anything but -1/0/1."""
    try:
        return ComponentStatus(value)
    except ValueError:
        raise ValueError(f"component status must be -1, 0 or 1, got {value}") from None


def transition_to(value: int) -> Transition:
    """Transition implied by a component's new status value."""
    status = status_for_value(value)
    if status is ComponentStatus.INSTALLED:
        return Transition.INSTALL
    if status is ComponentStatus.ABSENT:
        return Transition.REMOVE
    return Transition.INCORRECT


_TARGET_VALUE = {
    Transition.INSTALL: ComponentStatus.INSTALLED,
    Transition.REMOVE: ComponentStatus.ABSENT,
    Transition.INCORRECT: ComponentStatus.INCORRECT,
}


def transition_target(transition: Transition) -> ComponentStatus:
    """The component status a transition leaves behind."""
    return _TARGET_VALUE[transition]


@dataclass(frozen=True)
class AssemblyState:
    """Immutable per-component status vector, e.g. the code 11100000000."""

    statuses: tuple[ComponentStatus, ...]

    def __len__(self) -> int:
        return len(self.statuses)

    def __getitem__(self, index: int) -> ComponentStatus:
        return self.statuses[index]

    def __iter__(self):
        return iter(self.statuses)

    def replace(self, component: int, status: ComponentStatus) -> AssemblyState:
        """New state with one component's status changed."""
        statuses = list(self.statuses)
        statuses[component] = status
        return AssemblyState(tuple(statuses))

    def as_ints(self) -> tuple[int, ...]:
        return tuple(int(s) for s in self.statuses)

    @classmethod
    def from_values(cls, values) -> AssemblyState:
        return cls(tuple(status_for_value(v) for v in values))

    @classmethod
    def all_absent(cls, n_components: int) -> AssemblyState:
        return cls((ComponentStatus.ABSENT,) * n_components)


@dataclass(frozen=True)
class ProceduralAction:
    """One procedure step: a single component transition plus prerequisites.

    ``transition`` is INSTALL or REMOVE; INCORRECT is an observation
    outcome, not something a procedure prescribes.
    """

    action_id: str
    component: int
    transition: Transition
    prerequisites: frozenset[str] = frozenset()
    description: str = ""


@dataclass(frozen=True)
class ProcedureSpec:
    """A procedure: ordered component names, actions, and the start state.

    Construction is permissive; run validate_procedure (or ensure_valid)
    to check the invariants, so that a broken definition can still be
    loaded and diagnosed.
    """

    id: str
    components: tuple[str, ...]
    actions: tuple[ProceduralAction, ...]
    initial_state: AssemblyState

    @property
    def n_components(self) -> int:
        return len(self.components)

    @cached_property
    def _by_id(self) -> dict[str, ProceduralAction]:
        return {a.action_id: a for a in self.actions}

    @cached_property
    def _by_pair(self) -> dict[tuple[int, Transition], ProceduralAction]:
        return {(a.component, a.transition): a for a in self.actions}

    def action_by_id(self, action_id: str) -> ProceduralAction:
        return self._by_id[action_id]

    def action_for(self, component: int, transition: Transition) -> ProceduralAction | None:
        """The action defining this (component, transition) pair, if any."""
        return self._by_pair.get((component, transition))

    def ensure_valid(self) -> None:
        diagnostics = validate_procedure(self)
        if diagnostics:
            raise ValueError(
                f"invalid procedure '{self.id}': " + "; ".join(diagnostics)
            )

    def step_id(self, component: int, transition: Transition) -> str:
        """Stable identifier for an observed component transition.

        Transitions prescribed by the procedure use the action id.
        Incorrect completions are named after the install action they
        botch ("incorrect:<action>"); transitions with no corresponding
        action get a positional id ("c<idx>:install" / "c<idx>:remove"),
        so ground truth and predictions always agree on naming.
        """
        if transition is Transition.INCORRECT:
            install = self.action_for(component, Transition.INSTALL)
            base = install.action_id if install else f"c{component}"
            return f"incorrect:{base}"
        action = self.action_for(component, transition)
        if action is not None:
            return action.action_id
        return f"c{component}:{transition.value}"

    def topological_order(self) -> tuple[ProceduralAction, ...]:
        """Actions in a prerequisite-respecting order (stable Kahn)."""
        remaining = {a.action_id: set(a.prerequisites) for a in self.actions}
        by_id = self._by_id
        order: list[ProceduralAction] = []
        done: set[str] = set()
        while remaining:
            ready = [aid for aid, pre in remaining.items() if pre <= done]
            if not ready:
                raise ValueError(f"cyclic prerequisites in procedure '{self.id}'")
            for aid in ready:
                order.append(by_id[aid])
                done.add(aid)
                del remaining[aid]
        return tuple(order)

    def final_state(self) -> AssemblyState:
        """State after every action has been applied in prerequisite order."""
        state = self.initial_state
        for action in self.topological_order():
            state = state.replace(action.component, _TARGET_VALUE[action.transition])
        return state


@dataclass(frozen=True)
class StepEvent:
    """One recognized, inferred, or annotated step completion."""

    action_id: str
    component: int
    transition: Transition
    time_s: float
    frame: int
    confidence: float = 1.0
    source: EventSource = EventSource.RECOGNIZED

    def __post_init__(self):
        if self.frame < 0:
            raise ValueError(f"frame must be non-negative, got {self.frame}")
        if self.time_s < 0:
            raise ValueError(f"time_s must be non-negative, got {self.time_s}")
        if self.confidence < 0:
            raise ValueError(f"confidence must be >= 0, got {self.confidence}")


@dataclass(frozen=True)
class StepSequence:
    """Step events of one recording, sorted by (time, component).

    At most one event per action id: a second completion of the same step
    has no defined meaning anywhere downstream and is rejected here.
    """

    recording_id: str
    fps: float
    events: tuple[StepEvent, ...] = ()

    def __post_init__(self):
        if self.fps <= 0:
            raise ValueError(f"fps must be positive, got {self.fps}")
        seen: set[str] = set()
        previous: StepEvent | None = None
        for event in self.events:
            if event.action_id in seen:
                raise ValueError(
                    f"duplicate event for action '{event.action_id}' "
                    f"in recording '{self.recording_id}'"
                )
            seen.add(event.action_id)
            if previous is not None and (event.time_s, event.component) < (
                previous.time_s,
                previous.component,
            ):
                raise ValueError(
                    f"events out of order at action '{event.action_id}'"
                )
            if abs(event.time_s - event.frame / self.fps) > 1e-6:
                raise ValueError(
                    f"event '{event.action_id}' time {event.time_s} does not "
                    f"match frame {event.frame} at {self.fps} fps"
                )
            previous = event

    @classmethod
    def from_events(cls, recording_id: str, fps: float, events) -> StepSequence:
        """Build a sequence, sorting events by (time, component)."""
        ordered = tuple(sorted(events, key=lambda e: (e.time_s, e.component)))
        return cls(recording_id, fps, ordered)

    def __len__(self) -> int:
        return len(self.events)

    def action_ids(self) -> tuple[str, ...]:
        """Action ids in completion order (the sequence's order projection)."""
        return tuple(e.action_id for e in self.events)

    def correct_only(self) -> StepSequence:
        """View without incorrect completions."""
        kept = tuple(e for e in self.events if e.transition is not Transition.INCORRECT)
        if len(kept) == len(self.events):
            return self
        return StepSequence(self.recording_id, self.fps, kept)

    def filter_sources(self, *sources: EventSource) -> StepSequence:
        """View restricted to events from the given sources.

        Lets a caller score directly recognized completions separately
        from ones a system inferred from procedural assumptions.
        """
        kept = tuple(e for e in self.events if e.source in sources)
        if len(kept) == len(self.events):
            return self
        return StepSequence(self.recording_id, self.fps, kept)

    def has_incorrect(self) -> bool:
        return any(e.transition is Transition.INCORRECT for e in self.events)


def parse_state(text: str, spec: ProcedureSpec) -> AssemblyState:
    """Parse a state string against a procedure's component count.

    Two forms are accepted: the compact digit form ("11100000000"), legal
    only when no component is incorrect, and the canonical comma-separated
    form ("1,-1,0,...").
    """
    state = parse_state_text(text)
    if len(state) != spec.n_components:
        raise ValueError(
            f"state '{text}' has {len(state)} components, "
            f"procedure '{spec.id}' expects {spec.n_components}"
        )
    return state


def parse_state_text(text: str) -> AssemblyState:
    """Parse a state string whose length is not tied to any procedure."""
    text = text.strip()
    if not text:
        raise ValueError("empty state string")
    # single-component states have no separator; "-1" is still list form
    if "," in text or text == "-1":
        values = []
        for token in text.split(","):
            token = token.strip()
            try:
                value = int(token)
            except ValueError:
                raise ValueError(f"malformed state token '{token}' in '{text}'") from None
            values.append(status_for_value(value))
        return AssemblyState(tuple(values))
    for ch in text:
        if ch not in "01":
            raise ValueError(
                f"compact state '{text}' may only contain 0 and 1; "
                "use the comma-separated form for -1"
            )
    return AssemblyState(tuple(status_for_value(int(ch)) for ch in text))


def serialize_state(state: AssemblyState) -> str:
    """Canonical comma-separated form; inverse of parse_state."""
    return ",".join(str(int(s)) for s in state)


def compact_state(state: AssemblyState) -> str:
    """Compact digit form; only defined when no component is incorrect."""
    if is_error_state(state):
        raise ValueError("compact form cannot represent incorrect components")
    return "".join(str(int(s)) for s in state)


def is_error_state(state: AssemblyState) -> bool:
    """True iff any component is incorrectly installed."""
    return any(s is ComponentStatus.INCORRECT for s in state.statuses)


def diff_states(prev: AssemblyState, next_state: AssemblyState) -> list[tuple[int, Transition]]:
    """Component transitions turning `prev` into `next_state`.

    One entry per changed component, ascending by component index. The
    transition is named by the new value: INSTALL for 1, REMOVE for 0,
    INCORRECT for -1.
    """
    if len(prev) != len(next_state):
        raise ValueError(
            f"cannot diff states of length {len(prev)} and {len(next_state)}"
        )
    changes: list[tuple[int, Transition]] = []
    for index, (before, after) in enumerate(zip(prev.statuses, next_state.statuses)):
        if before != after:
            changes.append((index, transition_to(int(after))))
    return changes


def apply_transition(state: AssemblyState, component: int, transition: Transition) -> AssemblyState:
    """Apply one component transition to a state."""
    return state.replace(component, _TARGET_VALUE[transition])


def expected_states(spec: ProcedureSpec) -> frozenset[AssemblyState]:
    """All states reachable by prerequisite-respecting execution.

    Includes the initial and final states. Explored by breadth-first
    search over (state, completed-action-set) pairs, so states reachable
    along several orders are counted once.
    """
    spec.ensure_valid()
    initial = spec.initial_state
    start = (initial, frozenset())
    seen_configs = {start}
    states = {initial}
    queue = deque([start])
    while queue:
        state, done = queue.popleft()
        for action in spec.actions:
            if action.action_id in done:
                continue
            if not action.prerequisites <= done:
                continue
            next_state = apply_transition(state, action.component, action.transition)
            config = (next_state, done | {action.action_id})
            if config in seen_configs:
                continue
            seen_configs.add(config)
            states.add(next_state)
            queue.append(config)
    return frozenset(states)


def validate_procedure(spec: ProcedureSpec) -> list[str]:
    """Diagnostics for every violated procedure invariant (empty = valid)."""
    diagnostics: list[str] = []
    n = len(spec.components)
    if len(spec.initial_state) != n:
        diagnostics.append(
            f"initial state has {len(spec.initial_state)} components, expected {n}"
        )
    ids: set[str] = set()
    pairs: set[tuple[int, Transition]] = set()
    for action in spec.actions:
        if action.action_id in ids:
            diagnostics.append(f"duplicate action id '{action.action_id}'")
        ids.add(action.action_id)
        if not 0 <= action.component < n:
            diagnostics.append(
                f"action '{action.action_id}' references component "
                f"{action.component} of a {n}-component procedure"
            )
        if action.transition is Transition.INCORRECT:
            diagnostics.append(
                f"action '{action.action_id}' may not prescribe an incorrect transition"
            )
        pair = (action.component, action.transition)
        if pair in pairs:
            diagnostics.append(
                f"actions define component {action.component} "
                f"{action.transition.value} more than once"
            )
        pairs.add(pair)
    for action in spec.actions:
        for pre in action.prerequisites:
            if pre not in ids:
                diagnostics.append(
                    f"action '{action.action_id}' requires unknown action '{pre}'"
                )
    if not _prerequisites_acyclic(spec):
        diagnostics.append("prerequisite graph contains a cycle")
    return diagnostics


def _prerequisites_acyclic(spec: ProcedureSpec) -> bool:
    ids = {a.action_id for a in spec.actions}
    remaining = {a.action_id: set(a.prerequisites) & ids for a in spec.actions}
    done: set[str] = set()
    while remaining:
        ready = [aid for aid, pre in remaining.items() if pre <= done]
        if not ready:
            return False
        for aid in ready:
            done.add(aid)
            del remaining[aid]
    return True
