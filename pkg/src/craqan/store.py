"""Human-review queue persistence.

Everything lives in one append-only JSON Lines event log; the in-memory
materialized view is a pure fold over it, so replaying the log from empty
always reproduces the current state (the crash-consistency contract).
Decision rule: the first side to reach two distinct reviewers wins.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .corpus import SegmentedSection
from .rci import OUTCOME_ACCEPTED, CandidateQA, RciTranscript

logger = logging.getLogger(__name__)

EVENT_LOG_NAME = "review_events.jsonl"
RELEASE_NAME = "release.jsonl"
RELEASE_META_NAME = "release_meta.json"

REJECTION_TAXONOMY = (
    "Irrelevant Sentences Included",
    "Important Sentences Excluded",
    "Parsing or Formatting Errors",
    "Incomplete or Unclear Answer",
    "Question Ambiguity",
    "Coreference Errors",
    "Other",
    "Wrong Information",
    "Compound or Double Questions",
)

STATUS_PENDING = "pending"
STATUS_ACCEPTED = "accepted"
STATUS_REJECTED = "rejected"
STATUS_DROPPED = "dropped_duplicate"
STATUSES = (STATUS_PENDING, STATUS_ACCEPTED, STATUS_REJECTED, STATUS_DROPPED)

DECISION_THRESHOLD = 2


class ReviewStoreError(Exception):
    """Base class; carries an error_code for the HTTP layer."""

    error_code = "store_error"


class NotFound(ReviewStoreError):
    error_code = "not_found"


class DuplicateDecision(ReviewStoreError):
    error_code = "duplicate_decision"


class DecisionValidationError(ReviewStoreError):
    error_code = "validation_error"


class ItemFinalized(ReviewStoreError):
    error_code = "item_finalized"


class ContractError(ReviewStoreError):
    error_code = "contract_error"


class CorruptEventLog(ReviewStoreError):
    error_code = "corrupt_event_log"


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass(frozen=True)
class HumanDecision:
    reviewer_id: str
    verdict: str  # accept | reject
    reason_category: str | None = None
    free_text: str | None = None
    decided_at: str = field(default_factory=_utcnow)

    def __post_init__(self):
        if self.verdict not in ("accept", "reject"):
            raise DecisionValidationError(f"unknown verdict {self.verdict!r}")
        if not self.reviewer_id.strip():
            raise DecisionValidationError("reviewer_id must be non-empty")
        if self.verdict == "reject":
            if self.reason_category not in REJECTION_TAXONOMY:
                raise DecisionValidationError(
                    f"reject requires a reason_category from the taxonomy, got {self.reason_category!r}"
                )
        elif self.reason_category is not None and self.reason_category not in REJECTION_TAXONOMY:
            raise DecisionValidationError(f"unknown reason_category {self.reason_category!r}")

    def to_dict(self) -> dict:
        return {
            "reviewer_id": self.reviewer_id,
            "verdict": self.verdict,
            "reason_category": self.reason_category,
            "free_text": self.free_text,
            "decided_at": self.decided_at,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "HumanDecision":
        return cls(
            reviewer_id=data["reviewer_id"],
            verdict=data["verdict"],
            reason_category=data.get("reason_category"),
            free_text=data.get("free_text"),
            decided_at=data.get("decided_at", _utcnow()),
        )


@dataclass
class ReviewItem:
    item_id: str
    run_id: str
    section_id: str
    article_id: str
    section_kind: str
    segmented: SegmentedSection
    candidate: CandidateQA
    iteration_count: int
    status: str = STATUS_PENDING
    decisions: list[HumanDecision] = field(default_factory=list)
    enqueued_seq: int = 0
    accepted_seq: int | None = None

    def decided_by(self) -> set[str]:
        return {d.reviewer_id for d in self.decisions}

    def accept_count(self) -> int:
        return sum(1 for d in self.decisions if d.verdict == "accept")

    def reject_count(self) -> int:
        return sum(1 for d in self.decisions if d.verdict == "reject")

    def is_disputed(self) -> bool:
        return self.status == STATUS_PENDING and self.accept_count() > 0 and self.reject_count() > 0

    def summary_dict(self) -> dict:
        return {
            "item_id": self.item_id,
            "section_id": self.section_id,
            "article_id": self.article_id,
            "section_kind": self.section_kind,
            "question": self.candidate.question,
            "status": self.status,
            "decision_count": len(self.decisions),
            "decided_by": sorted(self.decided_by()),
        }

    def full_dict(self) -> dict:
        data = self.summary_dict()
        data.update(
            {
                "run_id": self.run_id,
                "segmented": self.segmented.to_dict(),
                "candidate": self.candidate.to_dict(),
                "iteration_count": self.iteration_count,
                "decisions": [d.to_dict() for d in self.decisions],
            }
        )
        return data


@dataclass
class DatasetRecord:
    record_id: str
    article_id: str
    section_id: str
    section_kind: str
    sentences: list[dict]
    question: str
    answer: str
    required_sentence_indices: list[int]
    provenance: dict

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "article_id": self.article_id,
            "section_id": self.section_id,
            "section_kind": self.section_kind,
            "sentences": self.sentences,
            "question": self.question,
            "answer": self.answer,
            "required_sentence_indices": self.required_sentence_indices,
            "provenance": self.provenance,
        }

    @classmethod
    def from_item(cls, item: ReviewItem) -> "DatasetRecord":
        accepters = [d.reviewer_id for d in item.decisions if d.verdict == "accept"]
        return cls(
            record_id=item.item_id,
            article_id=item.article_id,
            section_id=item.section_id,
            section_kind=item.section_kind,
            sentences=[{"index": s.index, "sentence": s.sentence} for s in item.segmented.sentences],
            question=item.candidate.question,
            answer=item.candidate.answer,
            required_sentence_indices=list(item.candidate.required_sentence_indices),
            provenance={
                "run_id": item.run_id,
                "iteration_count": item.iteration_count,
                "human_reviewer_ids": accepters,
            },
        )


@dataclass
class DedupResult:
    kept: list[str]
    dropped: list[str]


@dataclass
class ExportResult:
    release_path: Path
    meta_path: Path
    record_count: int


def item_id_for(run_id: str, section_id: str) -> str:
    digest = hashlib.sha1(f"{run_id}::{section_id}".encode("utf-8")).hexdigest()[:12]
    return f"item-{digest}"


class ViewState:
    """Materialized view over the event stream. Fold-only; no I/O."""

    def __init__(self):
        self.items: dict[str, ReviewItem] = {}
        self.by_key: dict[tuple[str, str], str] = {}  # (run_id, section_id) -> item_id
        self.attempts: dict[tuple[str, str], str] = {}  # (run_id, section_id) -> outcome
        self.seq = 0

    def apply(self, event: dict) -> None:
        self.seq += 1
        kind = event["type"]
        payload = event["payload"]
        if kind == "item_enqueued":
            item = ReviewItem(
                item_id=payload["item_id"],
                run_id=payload["run_id"],
                section_id=payload["section_id"],
                article_id=payload["article_id"],
                section_kind=payload["section_kind"],
                segmented=SegmentedSection.from_dict(payload["segmented"]),
                candidate=CandidateQA(
                    question=payload["candidate"]["question"],
                    answer=payload["candidate"]["answer"],
                    required_sentence_indices=tuple(
                        payload["candidate"]["required_sentence_indices"]
                    ),
                ),
                iteration_count=payload["iteration_count"],
                enqueued_seq=self.seq,
            )
            self.items[item.item_id] = item
            self.by_key[(item.run_id, item.section_id)] = item.item_id
        elif kind == "decision_recorded":
            item = self.items[payload["item_id"]]
            item.decisions.append(HumanDecision.from_dict(payload["decision"]))
            if item.status == STATUS_PENDING:
                if item.accept_count() >= DECISION_THRESHOLD:
                    item.status = STATUS_ACCEPTED
                    item.accepted_seq = self.seq
                elif item.reject_count() >= DECISION_THRESHOLD:
                    item.status = STATUS_REJECTED
        elif kind == "item_dropped_duplicate":
            item = self.items[payload["item_id"]]
            item.status = STATUS_DROPPED
        elif kind == "attempt_recorded":
            self.attempts[(payload["run_id"], payload["section_id"])] = payload["outcome"]
        else:
            raise CorruptEventLog(f"unknown event type {kind!r}")

    def rejection_tally(self) -> dict[str, int]:
        tally = {category: 0 for category in REJECTION_TAXONOMY}
        for item in self.items.values():
            for decision in item.decisions:
                if decision.verdict == "reject" and decision.reason_category:
                    tally[decision.reason_category] += 1
        return tally


def fold_events(events) -> ViewState:
    state = ViewState()
    for event in events:
        state.apply(event)
    return state


class ReviewStore:
    """Event-sourced store under a directory; one writer, locked mutations.

    Every mutation is flushed and fsynced to the log before it is applied to
    the view and acknowledged, so a killed process never acknowledges state
    that a restart cannot rebuild.
    """

    def __init__(self, directory: str | Path, fsync: bool = True):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.log_path = self.directory / EVENT_LOG_NAME
        self._fsync = fsync
        self._lock = threading.RLock()
        self._state = ViewState()
        self._replay()
        self._handle = self.log_path.open("a", encoding="utf-8")

    # ------------------------------------------------------------- lifecycle

    def _replay(self) -> None:
        if not self.log_path.exists():
            return
        raw = self.log_path.read_text(encoding="utf-8")
        lines = raw.splitlines()
        for lineno, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                event = json.loads(line)
            except json.JSONDecodeError:
                if lineno == len(lines):
                    # torn tail from a crash mid-append; drop it
                    logger.warning("dropping torn final event-log line %d", lineno)
                    break
                raise CorruptEventLog(f"undecodable event at line {lineno}")
            self._state.apply(event)
        logger.info("replayed %d events from %s", self._state.seq, self.log_path)

    def close(self) -> None:
        with self._lock:
            self._handle.close()

    def _append(self, kind: str, payload: dict) -> None:
        event = {"ts": _utcnow(), "type": kind, "payload": payload}
        line = json.dumps(event, ensure_ascii=False)
        self._handle.write(line + "\n")
        self._handle.flush()
        if self._fsync:
            os.fsync(self._handle.fileno())
        self._state.apply(event)

    # ------------------------------------------------------------- queries

    def get(self, item_id: str) -> ReviewItem:
        with self._lock:
            item = self._state.items.get(item_id)
            if item is None:
                raise NotFound(f"unknown item {item_id}")
            return item

    def items(self, status: str | None = None) -> list[ReviewItem]:
        with self._lock:
            out = sorted(self._state.items.values(), key=lambda i: i.enqueued_seq)
            if status is not None:
                if status not in STATUSES:
                    raise DecisionValidationError(f"unknown status {status!r}")
                out = [i for i in out if i.status == status]
            return out

    def attempt_count(self) -> int:
        with self._lock:
            return len(self._state.attempts)

    # ------------------------------------------------------------- mutations

    def record_attempt(self, run_id: str, section_id: str, outcome: str) -> None:
        """Idempotent on (run_id, section_id); feeds yield accounting."""
        with self._lock:
            if (run_id, section_id) in self._state.attempts:
                return
            self._append(
                "attempt_recorded",
                {"run_id": run_id, "section_id": section_id, "outcome": outcome},
            )

    def enqueue(self, transcript: RciTranscript) -> ReviewItem:
        """Queue a panel-accepted transcript's candidate for human review.

        Idempotent on (run_id, section_id): re-enqueueing returns the
        existing item untouched.
        """
        if transcript.outcome != OUTCOME_ACCEPTED:
            raise ContractError(
                f"only panel-accepted transcripts can be enqueued, got {transcript.outcome!r}"
            )
        candidate = transcript.accepted_candidate
        if candidate is None or transcript.segmented is None:
            raise ContractError("accepted transcript lacks candidate or segmented section")
        run_id = str(transcript.run_metadata.get("run_id", "run"))
        with self._lock:
            key = (run_id, transcript.section_id)
            if key in self._state.by_key:
                return self._state.items[self._state.by_key[key]]
            item_id = item_id_for(run_id, transcript.section_id)
            self._append(
                "item_enqueued",
                {
                    "item_id": item_id,
                    "run_id": run_id,
                    "section_id": transcript.section_id,
                    "article_id": transcript.segmented.article_id,
                    "section_kind": transcript.segmented.kind,
                    "segmented": transcript.segmented.to_dict(),
                    "candidate": candidate.to_dict(),
                    "iteration_count": len(transcript.iterations),
                },
            )
            return self._state.items[item_id]

    def record_decision(self, item_id: str, decision: HumanDecision) -> ReviewItem:
        with self._lock:
            item = self.get(item_id)
            if item.status != STATUS_PENDING:
                raise ItemFinalized(f"item {item_id} is already {item.status}")
            if decision.reviewer_id in item.decided_by():
                raise DuplicateDecision(
                    f"reviewer {decision.reviewer_id} already decided item {item_id}"
                )
            self._append(
                "decision_recorded", {"item_id": item_id, "decision": decision.to_dict()}
            )
            return self._state.items[item_id]

    def dedup(self) -> DedupResult:
        """Keep one accepted item per section (earliest acceptance, then
        lexicographic item id); mark the rest dropped_duplicate. Idempotent
        and independent of call order."""
        with self._lock:
            groups: dict[str, list[ReviewItem]] = {}
            for item in self._state.items.values():
                if item.status == STATUS_ACCEPTED:
                    groups.setdefault(item.section_id, []).append(item)
            kept: list[str] = []
            dropped: list[str] = []
            for section_id in sorted(groups):
                members = sorted(
                    groups[section_id], key=lambda i: (i.accepted_seq or 0, i.item_id)
                )
                kept.append(members[0].item_id)
                for duplicate in members[1:]:
                    self._append("item_dropped_duplicate", {"item_id": duplicate.item_id})
                    dropped.append(duplicate.item_id)
            return DedupResult(kept=kept, dropped=dropped)

    # ------------------------------------------------------------- export

    def export_dataset(self, destination: str | Path | None = None) -> ExportResult:
        """Write the accepted, deduplicated items as a sorted JSON Lines
        release plus a sidecar metadata file. Deterministic: re-export of an
        unchanged store is byte-identical."""
        destination = Path(destination) if destination else self.directory
        destination.mkdir(parents=True, exist_ok=True)
        with self._lock:
            accepted = [i for i in self._state.items.values() if i.status == STATUS_ACCEPTED]
            sections = [i.section_id for i in accepted]
            if len(set(sections)) != len(sections):
                raise ContractError("duplicate sections among accepted items; run dedup first")
            records = sorted(
                (DatasetRecord.from_item(item) for item in accepted),
                key=lambda r: (r.article_id, r.section_id),
            )
            release_path = destination / RELEASE_NAME
            meta_path = destination / RELEASE_META_NAME
            try:
                with release_path.open("w", encoding="utf-8") as handle:
                    for record in records:
                        handle.write(json.dumps(record.to_dict(), ensure_ascii=False) + "\n")
                dropped = sum(1 for i in self._state.items.values() if i.status == STATUS_DROPPED)
                meta = {
                    "record_count": len(records),
                    "unique_articles": len({r.article_id for r in records}),
                    "dropped_duplicates": dropped,
                    "attempted_sections": len(self._state.attempts),
                    "run_ids": sorted({i.run_id for i in accepted}),
                    "decision_rule": f"{DECISION_THRESHOLD}-accept / {DECISION_THRESHOLD}-reject, first to threshold",
                }
                meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
            except OSError as exc:
                raise ReviewStoreError(f"export failed: {exc}") from exc
            return ExportResult(release_path=release_path, meta_path=meta_path, record_count=len(records))

    # ------------------------------------------------------------- stats

    def stats_snapshot(self) -> dict:
        with self._lock:
            counts = {status: 0 for status in STATUSES}
            disputed = 0
            for item in self._state.items.values():
                counts[item.status] += 1
                if item.is_disputed():
                    disputed += 1
            human_accepted = counts[STATUS_ACCEPTED] + counts[STATUS_DROPPED]
            attempts = len(self._state.attempts)
            return {
                "counts": counts,
                "disputed": disputed,
                "attempts": attempts,
                "human_accepted": human_accepted,
                "yield_fraction": (human_accepted / attempts) if attempts else None,
                "rejection_tally": self._state.rejection_tally(),
            }

    def events(self) -> list[dict]:
        """Re-read the persisted event log (for stats over a snapshot)."""
        if not self.log_path.exists():
            return []
        out = []
        for line in self.log_path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                out.append(json.loads(line))
        return out


def read_event_log(path: str | Path) -> list[dict]:
    out = []
    text = Path(path).read_text(encoding="utf-8")
    for line in text.splitlines():
        if line.strip():
            out.append(json.loads(line))
    return out
