/** Payload shapes of the review-service JSON API. */

export type ItemStatus = "pending" | "accepted" | "rejected" | "dropped_duplicate";

export interface ItemSummary {
  item_id: string;
  section_id: string;
  article_id: string;
  section_kind: "summary" | "body";
  question: string;
  status: ItemStatus;
  decision_count: number;
  decided_by: string[];
}

export interface SentenceRow {
  index: number;
  sentence: string;
}

export interface Decision {
  reviewer_id: string;
  verdict: "accept" | "reject";
  reason_category: string | null;
  free_text: string | null;
  decided_at: string;
}

export interface ItemDetail extends ItemSummary {
  run_id: string;
  segmented: {
    section_id: string;
    article_id: string;
    kind: string;
    sentences: SentenceRow[];
    fallback_segmentation: boolean;
  };
  candidate: {
    question: string;
    answer: string;
    required_sentence_indices: number[];
  };
  iteration_count: number;
  decisions: Decision[];
}

export interface StatsSnapshot {
  counts: Record<ItemStatus, number>;
  disputed: number;
  attempts: number;
  human_accepted: number;
  yield_fraction: number | null;
  rejection_tally: Record<string, number>;
}

export interface DecisionBody {
  reviewer_id: string;
  verdict: "accept" | "reject";
  reason_category?: string;
  free_text?: string;
}

export interface ApiError {
  error_code: string;
  message: string;
}
