// DOM renderer. Stateless: every render rebuilds the zones from the
// view model's surfaces, which are verbatim server renderings. Zones
// hug the viewport edges; the center stays empty except while the
// derivative ring is open.

import { ViewModel } from "./model.js";
import {
  decodeKeywordList,
  decodeNoteList,
  decodeSentenceList,
  decodeTranscriptList,
} from "./protocol.js";
import { Theme, ringSlots } from "./theme.js";

function el(
  tag: string,
  className: string,
  text = "",
  target: string | null = null,
): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  if (text) node.textContent = text;
  if (target) {
    node.classList.add("hit");
    node.dataset.target = target;
  }
  return node;
}

function sized(node: HTMLElement, theme: Theme): HTMLElement {
  node.style.minWidth = `${theme.minTargetPx}px`;
  node.style.minHeight = `${theme.minTargetPx}px`;
  return node;
}

export function render(model: ViewModel, theme: Theme, root: HTMLElement): void {
  const visibility = model.surface("visibility").value ?? "hidden";
  const mode = model.surface("mode").value ?? "keyword_browse";
  root.textContent = "";
  root.classList.toggle("hidden-state", visibility !== "shown");

  if (visibility !== "shown") {
    // Display off: only a minimal status chip remains.
    const chip = el("div", "status-chip", "held to show");
    chip.id = "status-chip";
    root.appendChild(chip);
    return;
  }

  root.appendChild(renderQueue(model, theme));
  root.appendChild(renderCustomized(model, theme));
  root.appendChild(renderSelection(model, theme));
  root.appendChild(renderRing(model, theme, root));
  root.appendChild(renderCandidates(model, theme, mode));
  const notesBtn = sized(el("button", "notes-btn", "Notes", "btn:notes"), theme);
  notesBtn.id = "notes-btn";
  root.appendChild(notesBtn);

  if (mode === "notes_review") root.appendChild(renderNotesList(model, theme));
  if (mode === "note_detail") root.appendChild(renderNoteDetail(model, theme));
}

function renderQueue(model: ViewModel, theme: Theme): HTMLElement {
  const queue = model.surface("queue");
  const zone = el("div", "zone zone-top");
  zone.id = "queue";
  const prev = sized(el("button", "arrow", "‹", "arrow:queue:prev"), theme);
  if (queue.has_prev !== "1") prev.classList.add("dim");
  zone.appendChild(prev);
  for (const item of decodeKeywordList(queue.items ?? "")) {
    const btn = sized(el("button", "kw", item.word, `kw:${item.id}`), theme);
    if (item.selected) btn.classList.add("selected");
    if (item.underlined) btn.classList.add("underlined");
    zone.appendChild(btn);
  }
  const next = sized(el("button", "arrow", "›", "arrow:queue:next"), theme);
  if (queue.has_next !== "1") next.classList.add("dim");
  zone.appendChild(next);
  return zone;
}

function renderCustomized(model: ViewModel, theme: Theme): HTMLElement {
  const customized = model.surface("customized");
  const zone = el("div", "zone zone-left");
  zone.id = "customized";
  if (customized.visible !== "1") {
    zone.classList.add("empty");
    return zone;
  }
  for (const item of decodeKeywordList(customized.items ?? "")) {
    const btn = sized(el("button", "kw customized", item.word, `kw:${item.id}`), theme);
    if (item.selected) btn.classList.add("selected");
    zone.appendChild(btn);
  }
  return zone;
}

function renderSelection(model: ViewModel, theme: Theme): HTMLElement {
  const selection = model.surface("selection");
  const zone = el("div", "zone zone-right");
  zone.id = "selection";
  for (const item of decodeKeywordList(selection.items ?? "")) {
    zone.appendChild(sized(el("button", "chip", item.word, `chip:${item.id}`), theme));
  }
  return zone;
}

function renderRing(model: ViewModel, theme: Theme, root: HTMLElement): HTMLElement {
  const ring = model.surface("ring");
  const zone = el("div", "zone zone-center");
  zone.id = "ring";
  if (ring.open !== "1") {
    return zone; // center stays blank for real-world activities
  }
  const width = root.clientWidth || 1280;
  const height = root.clientHeight || 800;
  const slots = ringSlots(width, height, theme);
  const origin = decodeKeywordList(ring.origin ? ring.origin : "")[0];
  if (origin) {
    const center = sized(el("button", "kw ring-origin", origin.word, `ring:${origin.id}`), theme);
    center.style.left = `${slots.center.x}px`;
    center.style.top = `${slots.center.y}px`;
    zone.appendChild(center);
  }
  const items = decodeKeywordList(ring.items ?? "");
  items.forEach((item, index) => {
    const slot = slots.around[index % slots.around.length];
    const btn = sized(el("button", "kw ring-item", item.word, `ring:${item.id}`), theme);
    btn.style.left = `${slot.x}px`;
    btn.style.top = `${slot.y}px`;
    zone.appendChild(btn);
  });
  const prev = sized(el("button", "arrow ring-prev", "‹", "arrow:ring:prev"), theme);
  const next = sized(el("button", "arrow ring-next", "›", "arrow:ring:next"), theme);
  if (ring.pending === "1") next.classList.add("pending");
  zone.appendChild(prev);
  zone.appendChild(next);
  return zone;
}

function renderCandidates(model: ViewModel, theme: Theme, mode: string): HTMLElement {
  const zone = el("div", "zone zone-bottom");
  zone.id = "candidates";
  if (mode === "notes_review" || mode === "note_detail") {
    zone.classList.add("empty");
    return zone;
  }
  const panel = model.surface("candidates");
  const status = panel.status ?? "empty";
  if (status === "pending") {
    zone.appendChild(el("div", "pending-note", "composing…"));
    return zone;
  }
  if (status === "shown") {
    decodeSentenceList(panel.items ?? "").forEach((sentence, index) => {
      const row = sized(el("button", "candidate", sentence, `cand:${index}`), theme);
      zone.appendChild(row);
    });
  }
  return zone;
}

function renderNotesList(model: ViewModel, theme: Theme): HTMLElement {
  const panel = el("div", "panel");
  panel.id = "notes-panel";
  panel.appendChild(el("h2", "", "Notes"));
  const notes = decodeNoteList(model.surface("notes").items ?? "");
  if (notes.length === 0) {
    panel.appendChild(el("p", "empty-note", "no notes yet"));
  }
  for (const note of notes) {
    const row = sized(
      el("button", `note-row note-${note.kind}`, `[${note.kind}] ${note.text}`, `note:${note.id}`),
      theme,
    );
    panel.appendChild(row);
  }
  panel.appendChild(sized(el("button", "back", "Back", "btn:back"), theme));
  return panel;
}

function renderNoteDetail(model: ViewModel, theme: Theme): HTMLElement {
  const detail = model.surface("note_detail");
  const panel = el("div", "panel");
  panel.id = "note-detail";
  if (detail.open !== "1") {
    panel.appendChild(el("p", "", "note unavailable"));
    return panel;
  }
  panel.appendChild(el("h2", "", `Note ${detail.note} (${detail.note_kind})`));
  panel.appendChild(el("p", "note-text", decodeURIComponent(detail.text ?? "")));
  const transcripts = el("div", "transcripts");
  for (const item of decodeTranscriptList(detail.transcripts ?? "")) {
    transcripts.appendChild(el("p", "transcript", `“${item.text}”`));
  }
  panel.appendChild(transcripts);
  const pager = el("div", "refine-pager");
  pager.appendChild(sized(el("button", "arrow", "‹", "arrow:refine:prev"), theme));
  pager.appendChild(
    el("span", "page-indicator", `${Number(detail.page) + 1}/${detail.pages}`),
  );
  pager.appendChild(sized(el("button", "arrow", "›", "arrow:refine:next"), theme));
  panel.appendChild(pager);
  decodeSentenceList(detail.items ?? "").forEach((sentence, index) => {
    panel.appendChild(sized(el("button", "candidate", sentence, `cand:${index}`), theme));
  });
  panel.appendChild(sized(el("button", "back", "Back", "btn:back"), theme));
  return panel;
}
