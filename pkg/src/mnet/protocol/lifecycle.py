"""Trial lifecycle state machine.

One trial advances along a single spine from registration to a terminal
verdict. Any unrecoverable disconnect or protocol violation before the
submission lands sends the trial to Broken; terminal states absorb. Every
registered trial counts against quota no matter which terminal state it
reaches, so abandoning a bad run is never free.
"""

from __future__ import annotations

from enum import Enum


class TrialState(Enum):
    REGISTERED = "Registered"
    CODE_ISSUED = "CodeIssued"
    EXECUTING = "Executing"
    FINALIZED = "Finalized"
    AWAITING_UPLOAD = "AwaitingUpload"
    SUBMITTED = "Submitted"
    UNDER_REVIEW = "UnderReview"
    ACCEPTED = "Accepted"
    REJECTED = "Rejected"
    BROKEN = "Broken"


class LifecycleEvent(Enum):
    CODE_DELIVERED = "CodeDelivered"
    EVENT_RECORDED = "EventRecorded"
    FINALIZE = "Finalize"
    URL_ISSUED = "UrlIssued"
    UPLOAD_ACCEPTED = "UploadAccepted"
    REVIEW_STARTED = "ReviewStarted"
    ACCEPT = "Accept"
    REJECT = "Reject"
    DISCONNECT = "Disconnect"
    VIOLATION = "Violation"


TERMINAL_STATES = frozenset({TrialState.ACCEPTED, TrialState.REJECTED, TrialState.BROKEN})

# States from which an unrecoverable disconnect or violation breaks the trial:
# everything before the submission is safely stored.
BREAKABLE_STATES = frozenset(
    {
        TrialState.REGISTERED,
        TrialState.CODE_ISSUED,
        TrialState.EXECUTING,
        TrialState.FINALIZED,
        TrialState.AWAITING_UPLOAD,
    }
)

_TABLE: dict[tuple[TrialState, LifecycleEvent], TrialState] = {
    (TrialState.REGISTERED, LifecycleEvent.CODE_DELIVERED): TrialState.CODE_ISSUED,
    (TrialState.CODE_ISSUED, LifecycleEvent.EVENT_RECORDED): TrialState.EXECUTING,
    (TrialState.EXECUTING, LifecycleEvent.EVENT_RECORDED): TrialState.EXECUTING,
    (TrialState.EXECUTING, LifecycleEvent.FINALIZE): TrialState.FINALIZED,
    (TrialState.FINALIZED, LifecycleEvent.URL_ISSUED): TrialState.AWAITING_UPLOAD,
    # Re-issue after a failed upload is allowed.
    (TrialState.AWAITING_UPLOAD, LifecycleEvent.URL_ISSUED): TrialState.AWAITING_UPLOAD,
    (TrialState.AWAITING_UPLOAD, LifecycleEvent.UPLOAD_ACCEPTED): TrialState.SUBMITTED,
    (TrialState.SUBMITTED, LifecycleEvent.REVIEW_STARTED): TrialState.UNDER_REVIEW,
    (TrialState.UNDER_REVIEW, LifecycleEvent.ACCEPT): TrialState.ACCEPTED,
    (TrialState.UNDER_REVIEW, LifecycleEvent.REJECT): TrialState.REJECTED,
}


class IllegalTransition(Exception):
    def __init__(self, state: TrialState, event: LifecycleEvent) -> None:
        super().__init__(f"illegal transition: {state.value} + {event.value}")
        self.state = state
        self.event = event


def transition(state: TrialState, event: LifecycleEvent) -> TrialState:
    """Next state for ``(state, event)``; raises IllegalTransition otherwise.

    Rejection never mutates anything: callers apply the returned state.
    """
    if event in (LifecycleEvent.DISCONNECT, LifecycleEvent.VIOLATION):
        if state in BREAKABLE_STATES:
            return TrialState.BROKEN
        raise IllegalTransition(state, event)
    nxt = _TABLE.get((state, event))
    if nxt is None:
        raise IllegalTransition(state, event)
    return nxt
