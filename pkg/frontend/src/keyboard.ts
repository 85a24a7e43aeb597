/** Keyboard shortcuts.
 *
 *   a          accept the current item
 *   r          open the reject modal (category required)
 *   1..9       choose a category while the modal is open
 *   Enter      submit the reject (only once a category is chosen)
 *   Escape     close the modal without deciding
 *   n          skip to the next item
 *
 * Accept / reject / next never fire while the category modal is open, and
 * nothing fires while focus is in a text input.
 */

import type { ReviewSession } from "./session.js";

export interface KeyStroke {
  key: string;
  targetTag?: string;
  targetIsEditable?: boolean;
}

const TEXT_TAGS = new Set(["INPUT", "TEXTAREA", "SELECT"]);

export async function handleKey(session: ReviewSession, stroke: KeyStroke): Promise<void> {
  const tag = (stroke.targetTag ?? "").toUpperCase();
  if (TEXT_TAGS.has(tag) || stroke.targetIsEditable) return;

  if (session.modal.open) {
    if (stroke.key >= "1" && stroke.key <= "9") {
      session.selectCategory(Number(stroke.key) - 1);
    } else if (stroke.key === "Enter") {
      await session.submitReject();
    } else if (stroke.key === "Escape") {
      session.closeModal();
    }
    return; // modal swallows everything else, including a / r / n
  }

  switch (stroke.key) {
    case "a":
      await session.accept();
      break;
    case "r":
      await session.openRejectModal();
      break;
    case "n":
      await session.next();
      break;
    default:
      break;
  }
}

/** Bridge a real DOM KeyboardEvent into the testable handler. */
export function strokeFromEvent(event: KeyboardEvent): KeyStroke {
  const target = event.target as HTMLElement | null;
  return {
    key: event.key,
    targetTag: target?.tagName,
    targetIsEditable: target?.isContentEditable ?? false,
  };
}
