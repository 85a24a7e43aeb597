/** Review-session state machine.
 *
 * Holds the reviewer's working queue and the category-selector modal state;
 * the DOM layer renders from here and the keyboard layer calls in. Decisions
 * advance optimistically (the item leaves the local queue before the server
 * confirms) and reconcile by refreshing the queue when the server disagrees,
 * e.g. after a duplicate-decision race from a second tab.
 */

import { ApiRequestError } from "./api.js";
import type { ApiClient } from "./api.js";
import type { ItemDetail, ItemSummary, StatsSnapshot } from "./types.js";

export interface ModalState {
  open: boolean;
  categories: string[];
  selected: number | null;
  freeText: string;
}

export type SessionListener = () => void;

export class ReviewSession {
  queue: ItemSummary[] = [];
  current: ItemDetail | null = null;
  stats: StatsSnapshot | null = null;
  modal: ModalState = { open: false, categories: [], selected: null, freeText: "" };
  lastError: string | null = null;

  private listeners: SessionListener[] = [];

  constructor(
    readonly api: ApiClient,
    readonly reviewerId: string,
  ) {
    if (!reviewerId.trim()) throw new Error("reviewerId must be non-empty");
  }

  onChange(listener: SessionListener): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) listener();
  }

  /** Pending items this reviewer has not decided yet. */
  async loadQueue(): Promise<ItemSummary[]> {
    const pending = await this.api.queue("pending");
    this.queue = pending.filter((item) => !item.decided_by.includes(this.reviewerId));
    if (this.queue.length === 0) {
      this.current = null;
    } else if (!this.current || !this.queue.some((i) => i.item_id === this.current!.item_id)) {
      await this.focus(this.queue[0].item_id);
    }
    this.notify();
    return this.queue;
  }

  async focus(itemId: string): Promise<void> {
    this.current = await this.api.item(itemId);
    this.notify();
  }

  async loadStats(): Promise<StatsSnapshot> {
    this.stats = await this.api.stats();
    this.notify();
    return this.stats;
  }

  async openRejectModal(): Promise<void> {
    if (!this.current || this.modal.open) return;
    if (this.modal.categories.length === 0) {
      this.modal.categories = await this.api.taxonomy();
    }
    this.modal = { ...this.modal, open: true, selected: null, freeText: "" };
    this.notify();
  }

  closeModal(): void {
    this.modal = { ...this.modal, open: false, selected: null, freeText: "" };
    this.notify();
  }

  selectCategory(index: number): void {
    if (!this.modal.open) return;
    if (index >= 0 && index < this.modal.categories.length) {
      this.modal = { ...this.modal, selected: index };
      this.notify();
    }
  }

  /** Reject is blocked client-side until a category is chosen. */
  canSubmitReject(): boolean {
    return this.modal.open && this.modal.selected !== null;
  }

  async accept(): Promise<void> {
    if (!this.current || this.modal.open) return;
    await this.submit({ verdict: "accept" });
  }

  async submitReject(): Promise<void> {
    if (!this.canSubmitReject() || !this.current) return;
    const category = this.modal.categories[this.modal.selected!];
    const freeText = this.modal.freeText.trim();
    this.closeModal();
    await this.submit({
      verdict: "reject",
      reason_category: category,
      ...(freeText ? { free_text: freeText } : {}),
    });
  }

  /** Skip: rotate the current item to the back of the local queue. */
  async next(): Promise<void> {
    if (this.modal.open || this.queue.length === 0 || !this.current) return;
    const index = this.queue.findIndex((i) => i.item_id === this.current!.item_id);
    if (index >= 0) {
      this.queue.push(...this.queue.splice(index, 1));
    }
    const nextItem = this.queue[0];
    if (nextItem) await this.focus(nextItem.item_id);
    this.notify();
  }

  private async submit(body: { verdict: "accept" | "reject"; reason_category?: string; free_text?: string }): Promise<void> {
    const item = this.current!;
    // optimistic advance: drop locally, move on, reconcile on failure
    this.queue = this.queue.filter((i) => i.item_id !== item.item_id);
    this.current = null;
    this.lastError = null;
    const nextItem = this.queue[0];
    const post = this.api.postDecision(item.item_id, {
      reviewer_id: this.reviewerId,
      verdict: body.verdict,
      ...(body.reason_category ? { reason_category: body.reason_category } : {}),
      ...(body.free_text ? { free_text: body.free_text } : {}),
    });
    if (nextItem) {
      await this.focus(nextItem.item_id);
    } else {
      this.notify();
    }
    try {
      await post;
    } catch (error) {
      if (error instanceof ApiRequestError) {
        // decided elsewhere, finalized, or rejected input: resync with the server
        this.lastError = `${error.errorCode}: ${error.message}`;
        await this.loadQueue();
        return;
      }
      throw error;
    }
  }
}
