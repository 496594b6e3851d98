/**
 * DOM rendering for the three-panel layout: design artifact on the left,
 * conversation in the middle, principle chapters on the right.
 *
 * render() is a pure projection of UiState: it rebuilds the panel tree from
 * scratch, so the same state always yields the same markup. The only
 * side effect is the scroll-into-view nudge, keyed by a nonce so it fires
 * once per navigation and never on ordinary re-renders.
 */

import type { Chapter, MentionSpan, Suggestion } from "./types.js";
import {
  isExpanded,
  toggleOn,
  visibleSpansFor,
  type UiState,
} from "./state.js";

export interface Handlers {
  onToggle(principleId: string, enabled: boolean): void;
  onBookmarkClick(principleId: string): void;
  onChapterHeaderClick(principleId: string): void;
  onSuggestionClick(text: string): void;
  onExcerptRefClick(index: number, start: number): void;
  onComposerInput(text: string): void;
  onSend(text: string): void;
}

/** One color per principle, assigned by catalog order. */
const PALETTE = [
  "#c2504f",
  "#2f6fc1",
  "#3a8a5f",
  "#a2641f",
  "#7352a5",
  "#3a7f8a",
  "#b0487f",
];

export function principleColor(state: UiState, principleId: string): string {
  const at = state.catalog.principles.findIndex((p) => p.id === principleId);
  const index = at < 0 ? PALETTE.length - 1 : at % PALETTE.length;
  return PALETTE[index] ?? "#666666";
}

/**
 * Map from code-point offset to UTF-16 unit offset. Mention spans count
 * code points, JavaScript strings count UTF-16 units; indexing through this
 * table keeps highlights exact even when the text holds astral characters.
 */
export function codePointOffsets(text: string): number[] {
  const offsets = [0];
  let units = 0;
  for (const ch of text) {
    units += ch.length;
    offsets.push(units);
  }
  return offsets;
}

export interface Segment {
  text: string;
  span: MentionSpan | null;
}

/** Split message text into plain and highlighted runs, in reading order. */
export function segmentMessage(text: string, spans: MentionSpan[]): Segment[] {
  const offsets = codePointOffsets(text);
  const total = offsets.length - 1;
  const clamp = (n: number) => Math.max(0, Math.min(n, total));
  const segments: Segment[] = [];
  let cursor = 0;
  for (const span of spans) {
    const start = clamp(span.start);
    const end = clamp(span.end);
    if (end <= start) continue;
    if (start > cursor) {
      segments.push({
        text: text.slice(offsets[cursor], offsets[start]),
        span: null,
      });
    }
    segments.push({ text: text.slice(offsets[start], offsets[end]), span });
    cursor = end;
  }
  if (cursor < total) {
    segments.push({ text: text.slice(offsets[cursor]), span: null });
  }
  return segments;
}

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  return node;
}

function renderMessages(doc: Document, state: UiState): HTMLElement {
  const list = el(doc, "div", "messages");
  for (const message of state.messages) {
    const article = el(doc, "article", `msg ${message.role}`);
    article.dataset.index = String(message.index);
    const bubble = el(doc, "div", "bubble");
    const spans = visibleSpansFor(state, message.id);
    for (const segment of segmentMessage(message.text, spans)) {
      if (!segment.span) {
        bubble.appendChild(doc.createTextNode(segment.text));
        continue;
      }
      const mark = el(doc, "mark", "hl");
      mark.dataset.principle = segment.span.principle_id;
      mark.dataset.start = String(segment.span.start);
      mark.style.setProperty(
        "--pc",
        principleColor(state, segment.span.principle_id),
      );
      if (
        state.emphasis &&
        state.emphasis.index === message.index &&
        state.emphasis.start === segment.span.start
      ) {
        mark.classList.add("emphasized");
      }
      mark.appendChild(doc.createTextNode(segment.text));
      bubble.appendChild(mark);
    }
    article.appendChild(bubble);
    list.appendChild(article);
  }
  return list;
}

function renderScrubBar(
  doc: Document,
  state: UiState,
  handlers: Handlers,
): HTMLElement {
  const bar = el(doc, "div", "scrub");
  bar.setAttribute("role", "navigation");
  bar.setAttribute("aria-label", "bookmarks");
  const names = new Map(state.catalog.principles.map((p) => [p.id, p.name]));
  for (const bookmark of state.bookmarks) {
    const chapter = state.chapters[bookmark.principle_id];
    if (!chapter || chapter.status === "undiscovered") continue;
    const tick = el(doc, "button", "tick");
    tick.type = "button";
    tick.dataset.bookmark = bookmark.principle_id;
    tick.dataset.index = String(bookmark.message_index);
    tick.style.left = `${(bookmark.position * 100).toFixed(1)}%`;
    tick.style.setProperty("--pc", principleColor(state, bookmark.principle_id));
    const name = names.get(bookmark.principle_id) ?? bookmark.principle_id;
    tick.title = `${name}: message ${bookmark.message_index}`;
    tick.addEventListener("click", () =>
      handlers.onBookmarkClick(bookmark.principle_id),
    );
    bar.appendChild(tick);
  }
  return bar;
}

function renderSuggestions(
  doc: Document,
  suggestions: Suggestion[],
  handlers: Handlers,
): HTMLElement {
  const row = el(doc, "div", "suggestions");
  for (const suggestion of suggestions) {
    const chip = el(doc, "button", `suggestion ${suggestion.kind}`);
    chip.type = "button";
    chip.dataset.kind = suggestion.kind;
    if (suggestion.principle_id) {
      chip.dataset.principle = suggestion.principle_id;
    }
    chip.textContent = suggestion.text;
    chip.addEventListener("click", () =>
      handlers.onSuggestionClick(suggestion.text),
    );
    row.appendChild(chip);
  }
  return row;
}

function renderChapterBody(
  doc: Document,
  state: UiState,
  chapter: Chapter,
  handlers: Handlers,
): HTMLElement {
  const body = el(doc, "div", "chapter-body");
  if (chapter.status === "pending_materials") {
    const note = el(doc, "p", "pending-note");
    note.textContent = "gathering notes";
    body.appendChild(note);
    return body;
  }
  const materials = chapter.materials;
  if (!materials) return body;
  if (materials.degraded) {
    const note = el(doc, "p", "degraded-note");
    note.textContent = "offline summary";
    body.appendChild(note);
  }
  const definition = el(doc, "p", "definition");
  definition.textContent = materials.definition;
  body.appendChild(definition);
  const relation = el(doc, "p", "relation");
  relation.textContent = materials.relation_to_design;
  body.appendChild(relation);
  if (materials.key_terms.length > 0) {
    const terms = el(doc, "ul", "key-terms");
    for (const [term, gloss] of materials.key_terms) {
      const item = el(doc, "li");
      const strong = el(doc, "strong");
      strong.textContent = term;
      item.appendChild(strong);
      item.appendChild(doc.createTextNode(` ${gloss}`));
      terms.appendChild(item);
    }
    body.appendChild(terms);
  }
  if (chapter.excerpt_refs.length > 0) {
    const refs = el(doc, "div", "excerpt-refs");
    for (const [index, start] of chapter.excerpt_refs) {
      const ref = el(doc, "button", "excerpt-ref");
      ref.type = "button";
      ref.dataset.refIndex = String(index);
      ref.dataset.refStart = String(start);
      ref.textContent = `message ${index}`;
      ref.addEventListener("click", () =>
        handlers.onExcerptRefClick(index, start),
      );
      refs.appendChild(ref);
    }
    body.appendChild(refs);
  }
  return body;
}

function renderChapters(
  doc: Document,
  state: UiState,
  handlers: Handlers,
): HTMLElement {
  const panel = el(doc, "div", "chapters");
  for (const principle of state.catalog.principles) {
    const chapter = state.chapters[principle.id];
    if (!chapter) continue;
    const expanded = isExpanded(state, principle.id);
    const card = el(
      doc,
      "section",
      `chapter ${chapter.status}${expanded ? " expanded" : ""}`,
    );
    card.dataset.chapter = principle.id;
    card.style.opacity = chapter.opacity.toFixed(2);
    const head = el(doc, "button", "chapter-head");
    head.type = "button";
    head.dataset.chapterHead = principle.id;
    head.setAttribute("aria-expanded", expanded ? "true" : "false");
    const dot = el(doc, "span", "dot");
    dot.style.setProperty("--pc", principleColor(state, principle.id));
    head.appendChild(dot);
    const label = el(doc, "span", "chapter-name");
    label.textContent = principle.name;
    head.appendChild(label);
    const count = el(doc, "span", "mention-count");
    count.textContent = String(chapter.mention_count);
    head.appendChild(count);
    head.addEventListener("click", () =>
      handlers.onChapterHeaderClick(principle.id),
    );
    card.appendChild(head);
    if (expanded) {
      card.appendChild(renderChapterBody(doc, state, chapter, handlers));
    }
    panel.appendChild(card);
  }
  return panel;
}

function renderToggles(
  doc: Document,
  state: UiState,
  handlers: Handlers,
): HTMLElement {
  const row = el(doc, "div", "toggles");
  for (const principle of state.catalog.principles) {
    const enabled = toggleOn(state, principle.id);
    const chip = el(doc, "button", `chip${enabled ? "" : " off"}`);
    chip.type = "button";
    chip.dataset.toggle = principle.id;
    chip.setAttribute("aria-pressed", enabled ? "true" : "false");
    const dot = el(doc, "span", "dot");
    dot.style.setProperty("--pc", principleColor(state, principle.id));
    chip.appendChild(dot);
    chip.appendChild(doc.createTextNode(principle.name));
    chip.addEventListener("click", () =>
      handlers.onToggle(principle.id, !enabled),
    );
    row.appendChild(chip);
  }
  return row;
}

function renderComposer(
  doc: Document,
  state: UiState,
  handlers: Handlers,
): HTMLElement {
  const form = el(doc, "form", "composer");
  const input = el(doc, "textarea");
  input.className = "composer-input";
  input.rows = 2;
  input.value = state.composer;
  input.placeholder = "Describe your design or ask for feedback";
  input.addEventListener("input", () => handlers.onComposerInput(input.value));
  form.appendChild(input);
  const send = el(doc, "button", "send");
  send.type = "submit";
  send.textContent = "Send";
  send.disabled = state.pendingSend;
  form.appendChild(send);
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    handlers.onSend(input.value);
  });
  return form;
}

function renderArtifactPanel(doc: Document, state: UiState): HTMLElement {
  const panel = el(doc, "aside", "panel artifact-panel");
  const heading = el(doc, "h2");
  heading.textContent = "Design";
  panel.appendChild(heading);
  if (state.artifact) {
    const name = el(doc, "p", "artifact-name");
    name.textContent = state.artifact.name;
    panel.appendChild(name);
    const kind = el(doc, "p", "artifact-kind");
    kind.textContent = state.artifact.media_type;
    panel.appendChild(kind);
  } else {
    const note = el(doc, "p", "artifact-note");
    note.textContent = "No artifact uploaded";
    panel.appendChild(note);
  }
  return panel;
}

/** Rebuild the UI under root from the given state. */
export function render(
  root: HTMLElement,
  state: UiState,
  handlers: Handlers,
): void {
  const doc = root.ownerDocument;
  root.textContent = "";
  root.classList.add("feedstack");

  if (state.connection === "reconnecting") {
    const banner = el(doc, "div", "banner reconnecting");
    banner.textContent = "reconnecting";
    root.appendChild(banner);
  }

  root.appendChild(renderArtifactPanel(doc, state));

  const chat = el(doc, "main", "panel chat-panel");
  chat.appendChild(renderScrubBar(doc, state, handlers));
  chat.appendChild(renderMessages(doc, state));
  if (state.lastError) {
    const note = el(doc, "div", "error-note");
    note.textContent = state.lastError;
    chat.appendChild(note);
  }
  chat.appendChild(renderSuggestions(doc, state.suggestions, handlers));
  chat.appendChild(renderComposer(doc, state, handlers));
  root.appendChild(chat);

  const side = el(doc, "aside", "panel chapters-panel");
  side.appendChild(renderToggles(doc, state, handlers));
  side.appendChild(renderChapters(doc, state, handlers));
  root.appendChild(side);

  if (state.scrollTarget) {
    const nonce = String(state.scrollTarget.nonce);
    if (root.dataset.scrollNonce !== nonce) {
      root.dataset.scrollNonce = nonce;
      const target = root.querySelector<HTMLElement>(
        `.msg[data-index="${state.scrollTarget.index}"]`,
      );
      target?.scrollIntoView?.({ block: "center" });
    }
  }
}
