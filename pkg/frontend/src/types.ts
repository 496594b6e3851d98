/** Wire shapes as the service emits them. Field names mirror the JSON exactly. */

export type Role = "user" | "assistant";

export type ChapterStatus = "undiscovered" | "pending_materials" | "ready";

export type SuggestionKind = "emerging_topic" | "conversational_cue";

export type FrameType =
  | "message_added"
  | "mentions_added"
  | "chapter_updated"
  | "bookmarks_updated"
  | "suggestions_updated"
  | "materials_ready"
  | "toggles_updated"
  | "error";

export interface Principle {
  id: string;
  name: string;
  definition: string;
  terms: string[];
}

export interface Catalog {
  version: string;
  principles: Principle[];
}

export interface Message {
  id: string;
  index: number;
  role: Role;
  text: string;
  created_at: string;
}

/** Offsets count Unicode code points, not UTF-16 units. */
export interface MentionSpan {
  message_id: string;
  principle_id: string;
  start: number;
  end: number;
  matched_term: string;
}

export interface Materials {
  definition: string;
  relation_to_design: string;
  key_terms: [string, string][];
  degraded: boolean;
}

export interface Chapter {
  principle_id: string;
  status: ChapterStatus;
  mention_count: number;
  opacity: number;
  collapsed: boolean;
  excerpt_refs: [number, number][];
  materials: Materials | null;
}

export interface Bookmark {
  principle_id: string;
  message_index: number;
  position: number;
}

export interface Suggestion {
  kind: SuggestionKind;
  text: string;
  principle_id: string | null;
  rank: number;
}

export interface DesignArtifact {
  name: string;
  media_type: string;
  content_ref: string;
}

export interface EventFrame {
  seq: number;
  session_id: string;
  type: FrameType;
  payload: Record<string, unknown>;
  at: string;
}

export interface Snapshot {
  session_id: string;
  created_at: string;
  artifact: DesignArtifact | null;
  catalog: Catalog;
  messages: Message[];
  mentions: MentionSpan[];
  chapters: Record<string, Chapter>;
  bookmarks: Bookmark[];
  suggestions: Suggestion[];
  toggles: Record<string, boolean>;
  last_seq: number;
  pending_jobs: number;
}
