#!/usr/bin/env python3
"""
Party Life Cycle
States and events of a registered party, and the transition table that
connects them. Banned and Withdrawn are terminal.
"""

import logging
from enum import Enum
from typing import Dict, List, Tuple

logger = logging.getLogger(__name__)


class ProtocolViolation(RuntimeError):
    """Raised for a (state, event) pair the life cycle does not allow."""

    def __init__(self, state: "PartyState", event: "PartyEvent"):
        super().__init__(f"event {event.value} is illegal in state {state.value}")
        self.state = state
        self.event = event


class PartyState(Enum):
    UNREGISTERED = "Unregistered"
    AUDITING = "Auditing"
    AWAITING_POOL = "AwaitingPool"
    SANITY_AS_MEMBER = "SanityAsMember"
    SANITY_AS_AUDITOR = "SanityAsAuditor"
    COMPUTING_F = "ComputingF"
    BANNED = "Banned"
    WITHDRAWN = "Withdrawn"


class PartyEvent(Enum):
    REGISTERED_OK = "registered_ok"
    REQUEST_ACCEPTED = "request_accepted"
    POOL_THRESHOLD = "pool_threshold"
    CHECK_SUCCESS = "check_success"
    OTHER_BANNED = "other_banned"
    SELF_BANNED = "self_banned"
    COORDINATOR_MALICIOUS = "coordinator_malicious"
    COMPUTATION_DONE = "computation_done"
    AUDIT_VIOLATION = "audit_violation"


TERMINAL_STATES = frozenset({PartyState.BANNED, PartyState.WITHDRAWN})

S = PartyState
E = PartyEvent

TRANSITIONS: Dict[Tuple[PartyState, PartyEvent], PartyState] = {
    (S.UNREGISTERED, E.REGISTERED_OK): S.AUDITING,
    (S.AUDITING, E.REQUEST_ACCEPTED): S.AWAITING_POOL,
    (S.AUDITING, E.POOL_THRESHOLD): S.SANITY_AS_AUDITOR,
    (S.AWAITING_POOL, E.POOL_THRESHOLD): S.SANITY_AS_MEMBER,
    (S.SANITY_AS_MEMBER, E.CHECK_SUCCESS): S.COMPUTING_F,
    (S.SANITY_AS_AUDITOR, E.CHECK_SUCCESS): S.AUDITING,
    (S.COMPUTING_F, E.COMPUTATION_DONE): S.AUDITING,
    # failed check, someone else removed: back to auditing with a fresh pseudonym
    (S.SANITY_AS_MEMBER, E.OTHER_BANNED): S.AUDITING,
    (S.SANITY_AS_AUDITOR, E.OTHER_BANNED): S.AUDITING,
    (S.SANITY_AS_MEMBER, E.SELF_BANNED): S.BANNED,
    (S.SANITY_AS_AUDITOR, E.SELF_BANNED): S.BANNED,
    (S.SANITY_AS_MEMBER, E.COORDINATOR_MALICIOUS): S.WITHDRAWN,
    (S.SANITY_AS_AUDITOR, E.COORDINATOR_MALICIOUS): S.WITHDRAWN,
}

# A failed audit ends participation from any registered, non-terminal state.
for _state in (S.AUDITING, S.AWAITING_POOL, S.SANITY_AS_MEMBER, S.SANITY_AS_AUDITOR, S.COMPUTING_F):
    TRANSITIONS[(_state, E.AUDIT_VIOLATION)] = S.WITHDRAWN


def transition(state: PartyState, event: PartyEvent) -> PartyState:
    next_state = TRANSITIONS.get((state, event))
    if next_state is None:
        raise ProtocolViolation(state, event)
    return next_state


class PartyStateMachine:
    """Current state plus the history of (state, event, next) steps."""

    def __init__(self, owner: str, state: PartyState = PartyState.UNREGISTERED):
        self.owner = owner
        self.state = state
        self.history: List[Tuple[PartyState, PartyEvent, PartyState]] = []

    @property
    def is_terminal(self) -> bool:
        return self.state in TERMINAL_STATES

    def fire(self, event: PartyEvent) -> PartyState:
        next_state = transition(self.state, event)
        logger.debug("%s: %s --%s--> %s", self.owner, self.state.value, event.value, next_state.value)
        self.history.append((self.state, event, next_state))
        self.state = next_state
        return next_state
