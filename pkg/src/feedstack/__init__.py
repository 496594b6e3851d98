"""Feedstack: layered structure over human-AI design-feedback conversations.

The engine annotates each chat message with principle mentions, accumulates
per-principle chapters with generated learning materials, places bookmarks
along the conversation, and suggests where to take the discussion next. A
small HTTP service exposes the same pipeline with an ordered event stream and
event-sourced persistence.
"""

__version__ = "0.1.0"

from .catalog import default_catalog, load_catalog, parse_catalog
from .detection import (
    AnalyzerResult,
    AnalyzerSource,
    Lexicon,
    analyze_message,
    build_lexicon,
    detect_mentions_lexicon,
    merge_results,
    scan_text,
)
from .gateway import (
    CompletionRequest,
    GatewayConfig,
    GatewayError,
    GatewayRemoteError,
    GatewayTimeout,
    GatewayTransportError,
    TemplateId,
    complete,
    render_prompt,
    stub_completion,
)
from .model import (
    Bookmark,
    ChapterState,
    ChapterStatus,
    DesignArtifact,
    EventFrame,
    FeedstackError,
    FrameType,
    Materials,
    MentionSpan,
    Message,
    NoTargetError,
    NotFoundError,
    Principle,
    PrincipleCatalog,
    Role,
    SessionState,
    Suggestion,
    SuggestionKind,
    ValidationError,
)
from .scaffold import (
    ChapterDelta,
    JumpTarget,
    compute_bookmarks,
    conversational_cues,
    emerging_topics,
    generate_materials,
    jump_target,
    opacity_for_count,
    update_chapters,
    visible_spans,
)
from .session import (
    append_message,
    apply_frame,
    create_session,
    export_json,
    export_session,
    import_session,
    replay_transcript,
    set_toggle,
)
from .store import SessionStore

__all__ = [
    "__version__",
    "AnalyzerResult",
    "AnalyzerSource",
    "Bookmark",
    "ChapterDelta",
    "ChapterState",
    "ChapterStatus",
    "CompletionRequest",
    "DesignArtifact",
    "EventFrame",
    "FeedstackError",
    "FrameType",
    "GatewayConfig",
    "GatewayError",
    "GatewayRemoteError",
    "GatewayTimeout",
    "GatewayTransportError",
    "JumpTarget",
    "Lexicon",
    "Materials",
    "MentionSpan",
    "Message",
    "NoTargetError",
    "NotFoundError",
    "Principle",
    "PrincipleCatalog",
    "Role",
    "SessionState",
    "SessionStore",
    "Suggestion",
    "SuggestionKind",
    "TemplateId",
    "ValidationError",
    "analyze_message",
    "append_message",
    "apply_frame",
    "build_lexicon",
    "complete",
    "compute_bookmarks",
    "conversational_cues",
    "create_session",
    "default_catalog",
    "detect_mentions_lexicon",
    "emerging_topics",
    "export_json",
    "export_session",
    "generate_materials",
    "import_session",
    "jump_target",
    "load_catalog",
    "merge_results",
    "opacity_for_count",
    "parse_catalog",
    "render_prompt",
    "replay_transcript",
    "scan_text",
    "set_toggle",
    "stub_completion",
    "update_chapters",
    "visible_spans",
]
