from .sessions import (
    EVENT_DECIMATION,
    MANUAL_DIRECTIONS,
    MANUAL_STEP_LEN,
    EpisodeRecord,
    Session,
    SessionError,
    SessionManager,
    SessionState,
)
from .app import create_app

__all__ = [
    "EVENT_DECIMATION", "MANUAL_DIRECTIONS", "MANUAL_STEP_LEN",
    "EpisodeRecord", "Session", "SessionError", "SessionManager",
    "SessionState", "create_app",
]
