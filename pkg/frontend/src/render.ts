/** DOM rendering. Pure view of the session; no state of its own. */

import type { ReviewSession } from "./session.js";
import type { StatsSnapshot } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderQueue(session: ReviewSession, root: HTMLElement): void {
  root.replaceChildren();
  const header = el("div", "queue-header");
  header.append(
    el("span", "reviewer", `reviewer: ${session.reviewerId}`),
    el("span", "count", `${session.queue.length} pending for you`),
  );
  root.append(header);
  const list = el("ul", "queue-list");
  for (const item of session.queue) {
    const row = el("li", "queue-row");
    if (session.current?.item_id === item.item_id) row.classList.add("active");
    row.append(
      el("span", "section", item.section_id),
      el("span", "question", item.question),
      el("span", "kind", item.section_kind),
    );
    row.addEventListener("click", () => void session.focus(item.item_id));
    list.append(row);
  }
  root.append(list);
}

export function renderItem(session: ReviewSession, root: HTMLElement): void {
  root.replaceChildren();
  const item = session.current;
  if (!item) {
    root.append(el("p", "empty", "Queue is empty - nothing waiting for your review."));
    return;
  }
  const required = new Set(item.candidate.required_sentence_indices);
  const passage = el("div", "passage");
  for (const sentence of item.segmented.sentences) {
    const row = el("span", "sentence", ` ${sentence.sentence}`);
    const badge = el("span", "index-badge", String(sentence.index));
    if (required.has(sentence.index)) {
      row.classList.add("required");
      badge.classList.add("required");
    }
    passage.append(badge, row, document.createTextNode(" "));
  }
  const qa = el("div", "qa");
  qa.append(
    el("p", "question", `Q: ${item.candidate.question}`),
    el("p", "answer", `A: ${item.candidate.answer}`),
    el(
      "p",
      "indices",
      `required sentences: ${item.candidate.required_sentence_indices.join(", ")}`,
    ),
  );
  const help = el(
    "p",
    "help",
    "keys: [a] accept, [r] reject, [n] next; in the reject dialog: 1-9 choose, Enter submit, Esc cancel",
  );
  root.append(el("h2", "section-title", item.section_id), passage, qa, help);
  if (session.lastError) {
    root.append(el("p", "error-banner", session.lastError));
  }
}

export function renderModal(session: ReviewSession, root: HTMLElement): void {
  root.replaceChildren();
  if (!session.modal.open) {
    root.classList.remove("open");
    return;
  }
  root.classList.add("open");
  const box = el("div", "modal-box");
  box.append(el("h3", undefined, "Reject: choose a category"));
  const list = el("ol", "category-list");
  session.modal.categories.forEach((category, index) => {
    const row = el("li", "category", `${category}`);
    if (session.modal.selected === index) row.classList.add("selected");
    row.addEventListener("click", () => session.selectCategory(index));
    list.append(row);
  });
  box.append(list);
  const hint = session.canSubmitReject()
    ? "Enter to submit, Esc to cancel"
    : "pick a category (1-9) to enable submit";
  box.append(el("p", "hint", hint));
  root.append(box);
}

export function renderDashboard(stats: StatsSnapshot | null, root: HTMLElement): void {
  root.replaceChildren();
  if (!stats) return;
  const counts = el("div", "stat-counts");
  for (const [label, value] of Object.entries(stats.counts)) {
    const cell = el("div", "stat");
    cell.append(el("div", "value", String(value)), el("div", "label", label));
    counts.append(cell);
  }
  const disputed = el("div", "stat");
  disputed.append(el("div", "value", String(stats.disputed)), el("div", "label", "disputed"));
  counts.append(disputed);
  root.append(counts);
  const yieldText =
    stats.yield_fraction === null ? "n/a" : `${(stats.yield_fraction * 100).toFixed(1)}%`;
  root.append(el("p", "yield", `yield: ${yieldText} (${stats.human_accepted}/${stats.attempts || "?"})`));
  const bars = el("div", "tally");
  const max = Math.max(1, ...Object.values(stats.rejection_tally));
  for (const [category, count] of Object.entries(stats.rejection_tally)) {
    const row = el("div", "tally-row");
    const bar = el("div", "bar");
    bar.style.width = `${(count / max) * 100}%`;
    row.append(el("span", "tally-label", `${category} (${count})`), bar);
    bars.append(row);
  }
  root.append(bars);
}
