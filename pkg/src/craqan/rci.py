"""The generate/review/improve loop.

Per section: the generator persona proposes a question-answer candidate,
machine-checkable structural rules are validated first, then the reviewer
panel criticizes. Failing feedback is folded back into the generator's
dialogue and the loop repeats, terminating on unanimous panel acceptance or
after the iteration budget (default 5) is exhausted.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Sequence

from .corpus import SegmentedSection
from .gateway import (
    BackendUnavailable,
    ChatMessage,
    ChatRequest,
    JsonParseError,
    NoJsonFound,
    extract_json_object,
)
from .personas import PanelSpec, PersonaSpec, render_prompt

logger = logging.getLogger(__name__)

OUTCOME_ACCEPTED = "panel_accepted"
OUTCOME_EXHAUSTED = "exhausted"
OUTCOME_FAILED = "generation_failed"

# structural rule violation codes
EMPTY_QUESTION = "empty_question"
EMPTY_ANSWER = "empty_answer"
INDEX_OUT_OF_RANGE = "index_out_of_range"
DUPLICATE_INDICES = "duplicate_indices"
INDICES_NOT_ASCENDING = "indices_not_ascending"
BAD_INDEX_COUNT = "bad_index_count"

UNPARSABLE_REVIEW_REASON = "reviewer reply unparsable"

GENERATOR_FORMAT_REMINDER = (
    "Your previous reply could not be used. Respond with exactly one JSON object "
    'of the form {"question": <question>, "answer": <answer>, '
    '"required_sentence_indices": [<indices>]} and nothing else.'
)
REVIEWER_FORMAT_REMINDER = (
    "Your previous reply could not be used. Respond with exactly one JSON object "
    'of the form {"reason": <reason_for_quality>, "is_quality": <true/false>} and nothing else.'
)


class GenerationParseFailure(Exception):
    """The generator's reply stayed unparsable after the re-ask."""


class CandidateParseError(ValueError):
    """A reply parsed as JSON but does not carry the candidate fields."""


@dataclass(frozen=True)
class CandidateQA:
    """A proposed dataset entry. Construction does not enforce the structural
    rules; validate_candidate reports them so invalid proposals can be fed
    back to the generator."""

    question: str
    answer: str
    required_sentence_indices: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "required_sentence_indices", tuple(self.required_sentence_indices)
        )

    def to_dict(self) -> dict:
        return {
            "question": self.question,
            "answer": self.answer,
            "required_sentence_indices": list(self.required_sentence_indices),
        }

    @classmethod
    def from_reply_dict(cls, data: dict) -> "CandidateQA":
        if not isinstance(data, dict):
            raise CandidateParseError("candidate reply is not an object")
        question = data.get("question")
        answer = data.get("answer")
        indices = data.get("required_sentence_indices")
        if not isinstance(question, str) or not isinstance(answer, str):
            raise CandidateParseError("question and answer must be strings")
        if not isinstance(indices, list) or not all(
            isinstance(i, int) and not isinstance(i, bool) for i in indices
        ):
            raise CandidateParseError("required_sentence_indices must be a list of integers")
        return cls(question=question, answer=answer, required_sentence_indices=tuple(indices))


@dataclass(frozen=True)
class ReviewVerdict:
    persona_name: str
    reason: str
    is_quality: bool

    def __post_init__(self):
        if not self.reason.strip():
            raise ValueError("verdict reason must be non-empty")

    def to_dict(self) -> dict:
        return {"persona_name": self.persona_name, "reason": self.reason, "is_quality": self.is_quality}


@dataclass(frozen=True)
class Violation:
    code: str
    message: str

    def to_dict(self) -> dict:
        return {"code": self.code, "message": self.message}


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def codes(self) -> list[str]:
        return [v.code for v in self.violations]


@dataclass(frozen=True)
class RciIteration:
    iteration_number: int
    candidate: CandidateQA
    structural_valid: bool
    verdicts: tuple[ReviewVerdict, ...]
    feedback: str | None = None

    def to_dict(self) -> dict:
        return {
            "iteration_number": self.iteration_number,
            "candidate": self.candidate.to_dict(),
            "structural_valid": self.structural_valid,
            "verdicts": [v.to_dict() for v in self.verdicts],
            "feedback": self.feedback,
        }


@dataclass(frozen=True)
class CallLogEntry:
    persona: str
    iteration: int

    def to_dict(self) -> dict:
        return {"persona": self.persona, "iteration": self.iteration}


@dataclass
class RciTranscript:
    """Full audit record of one section's loop, including exhausted and failed
    runs (nothing is exported from them, but yield accounting needs the
    attempt)."""

    section_id: str
    iterations: list[RciIteration]
    outcome: str
    run_metadata: dict
    call_log: list[CallLogEntry] = field(default_factory=list)
    segmented: SegmentedSection | None = None

    @property
    def accepted_candidate(self) -> CandidateQA | None:
        if self.outcome == OUTCOME_ACCEPTED and self.iterations:
            return self.iterations[-1].candidate
        return None

    def to_dict(self) -> dict:
        return {
            "section_id": self.section_id,
            "iterations": [it.to_dict() for it in self.iterations],
            "outcome": self.outcome,
            "run_metadata": self.run_metadata,
            "call_log": [c.to_dict() for c in self.call_log],
            "segmented": self.segmented.to_dict() if self.segmented else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RciTranscript":
        iterations = [
            RciIteration(
                iteration_number=it["iteration_number"],
                candidate=CandidateQA(
                    question=it["candidate"]["question"],
                    answer=it["candidate"]["answer"],
                    required_sentence_indices=tuple(it["candidate"]["required_sentence_indices"]),
                ),
                structural_valid=it["structural_valid"],
                verdicts=tuple(
                    ReviewVerdict(v["persona_name"], v["reason"], v["is_quality"])
                    for v in it["verdicts"]
                ),
                feedback=it.get("feedback"),
            )
            for it in data["iterations"]
        ]
        segmented = SegmentedSection.from_dict(data["segmented"]) if data.get("segmented") else None
        return cls(
            section_id=data["section_id"],
            iterations=iterations,
            outcome=data["outcome"],
            run_metadata=data.get("run_metadata", {}),
            call_log=[CallLogEntry(c["persona"], c["iteration"]) for c in data.get("call_log", [])],
            segmented=segmented,
        )


@dataclass
class DialogueTurn:
    """One prior generator proposal and the feedback it drew."""

    candidate_json: str
    feedback: str


@dataclass
class RciConfig:
    generator: PersonaSpec
    max_iterations: int = 5
    run_id: str = "run"
    seed: int | None = None

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


def serialize_segmented(segmented: SegmentedSection) -> str:
    return json.dumps(
        [{"index": s.index, "sentence": s.sentence} for s in segmented.sentences],
        ensure_ascii=False,
    )


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat()


def _log_call(call_log: list[CallLogEntry] | None, persona: str, iteration: int) -> None:
    if call_log is not None:
        call_log.append(CallLogEntry(persona=persona, iteration=iteration))


def generate_candidate(
    segmented: SegmentedSection,
    dialogue_history: Sequence[DialogueTurn],
    gateway,
    persona: PersonaSpec,
    iteration: int = 1,
    call_log: list[CallLogEntry] | None = None,
) -> tuple[CandidateQA, str]:
    """Ask the generator for a candidate, continuing the feedback dialogue.

    Returns (candidate, raw reply). Unparsable replies get one re-ask with a
    format reminder; a second failure raises GenerationParseFailure.
    """
    if len(segmented.sentences) < 2:
        raise ValueError(
            f"section {segmented.section_id} has {len(segmented.sentences)} sentence(s); "
            "need at least 2"
        )
    messages = [ChatMessage(persona.message_role, render_prompt(persona, serialize_segmented(segmented)))]
    for turn in dialogue_history:
        messages.append(ChatMessage("assistant", turn.candidate_json))
        messages.append(ChatMessage("user", f"REVIEWER: {turn.feedback}"))

    last_error: Exception | None = None
    for ask in range(2):
        request = ChatRequest(
            messages=tuple(messages),
            model_name=persona.model_name,
            temperature=persona.temperature,
            persona=persona.persona_id,
            iteration=iteration,
        )
        _log_call(call_log, persona.persona_id, iteration)
        reply = gateway.complete(request)
        try:
            candidate = CandidateQA.from_reply_dict(extract_json_object(reply.content))
            return candidate, reply.content
        except (NoJsonFound, JsonParseError, CandidateParseError) as exc:
            last_error = exc
            logger.info("generator reply unparsable (ask %d): %s", ask + 1, exc)
            if ask == 0:
                messages.append(ChatMessage("assistant", reply.content))
                messages.append(ChatMessage("user", GENERATOR_FORMAT_REMINDER))
    raise GenerationParseFailure(f"generator reply unparsable after re-ask: {last_error}")


def validate_candidate(candidate: CandidateQA, segmented: SegmentedSection) -> ValidationReport:
    """Report every violated structural rule; never raises."""
    violations: list[Violation] = []
    indices = candidate.required_sentence_indices
    n = len(segmented.sentences)

    if not candidate.question.strip():
        violations.append(Violation(EMPTY_QUESTION, "question is empty"))
    if not candidate.answer.strip():
        violations.append(Violation(EMPTY_ANSWER, "answer is empty"))
    out_of_range = [i for i in indices if i < 0 or i >= n]
    if out_of_range:
        violations.append(
            Violation(
                INDEX_OUT_OF_RANGE,
                f"indices {out_of_range} outside the section's sentence range 0..{n - 1}",
            )
        )
    if len(set(indices)) != len(indices):
        violations.append(Violation(DUPLICATE_INDICES, "required_sentence_indices repeat a value"))
    elif list(indices) != sorted(indices):
        violations.append(
            Violation(INDICES_NOT_ASCENDING, "required_sentence_indices must be ascending")
        )
    if len(indices) not in (2, 3):
        violations.append(
            Violation(
                BAD_INDEX_COUNT,
                f"required_sentence_indices must list 2 or 3 sentences, found {len(indices)}",
            )
        )
    return ValidationReport(violations=tuple(violations))


def review_payload(candidate: CandidateQA, segmented: SegmentedSection) -> str:
    """The INPUT object a reviewer sees: segmented text plus the candidate."""
    return json.dumps(
        {
            "segmented_text": [
                {"index": s.index, "sentence": s.sentence} for s in segmented.sentences
            ],
            "question": candidate.question,
            "answer": candidate.answer,
            "required_sentence_indices": list(candidate.required_sentence_indices),
        },
        ensure_ascii=False,
    )


def _parse_verdict(content: str, persona_name: str) -> ReviewVerdict:
    data = extract_json_object(content)
    reason = data.get("reason")
    is_quality = data.get("is_quality")
    if not isinstance(reason, str) or not reason.strip() or not isinstance(is_quality, bool):
        raise CandidateParseError("verdict must carry non-empty reason and boolean is_quality")
    return ReviewVerdict(persona_name=persona_name, reason=reason, is_quality=is_quality)


def review_candidate(
    candidate: CandidateQA,
    segmented: SegmentedSection,
    reviewer: PersonaSpec,
    gateway,
    iteration: int = 1,
    call_log: list[CallLogEntry] | None = None,
) -> ReviewVerdict:
    """One reviewer's verdict. Unparsable replies get one re-ask; a second
    failure is recorded fail-closed as is_quality=false."""
    messages = [ChatMessage(reviewer.message_role, render_prompt(reviewer, review_payload(candidate, segmented)))]
    for ask in range(2):
        request = ChatRequest(
            messages=tuple(messages),
            model_name=reviewer.model_name,
            temperature=reviewer.temperature,
            persona=reviewer.persona_id,
            iteration=iteration,
        )
        _log_call(call_log, reviewer.persona_id, iteration)
        reply = gateway.complete(request)
        try:
            return _parse_verdict(reply.content, reviewer.name)
        except (NoJsonFound, JsonParseError, CandidateParseError) as exc:
            logger.info("%s reply unparsable (ask %d): %s", reviewer.persona_id, ask + 1, exc)
            if ask == 0:
                messages.append(ChatMessage("assistant", reply.content))
                messages.append(ChatMessage("user", REVIEWER_FORMAT_REMINDER))
    return ReviewVerdict(persona_name=reviewer.name, reason=UNPARSABLE_REVIEW_REASON, is_quality=False)


def aggregate_feedback(verdicts: Sequence[ReviewVerdict]) -> str:
    """Failing reviewers' reasons, persona-prefixed, in panel order."""
    failing = [v for v in verdicts if not v.is_quality]
    if not failing:
        raise ValueError("aggregate_feedback requires at least one failing verdict")
    return "\n".join(f"{v.persona_name}: {v.reason}" for v in failing)


def _structural_feedback(report: ValidationReport) -> str:
    issues = "; ".join(v.message for v in report.violations)
    return (
        f"Structural validation: your response breaks these rules: {issues}. "
        "Please revise the question, answer, and required_sentence_indices accordingly."
    )


def run_rci(
    segmented: SegmentedSection,
    panel: PanelSpec,
    gateway,
    config: RciConfig,
) -> RciTranscript:
    """Run the full loop for one section and return its transcript.

    Structurally invalid candidates consume an iteration without spending
    reviewer calls. Consensus is unanimity across the panel. After
    max_iterations without consensus the outcome is `exhausted`; no record
    is exported from such a transcript, but it is persisted for accounting.
    """
    started_at = _utcnow()
    call_log: list[CallLogEntry] = []
    iterations: list[RciIteration] = []
    history: list[DialogueTurn] = []
    outcome = OUTCOME_EXHAUSTED
    error: str | None = None

    try:
        for number in range(1, config.max_iterations + 1):
            candidate, _raw = generate_candidate(
                segmented, history, gateway, config.generator, iteration=number, call_log=call_log
            )
            report = validate_candidate(candidate, segmented)
            if not report.ok:
                feedback = _structural_feedback(report)
                iterations.append(
                    RciIteration(number, candidate, structural_valid=False, verdicts=(), feedback=feedback)
                )
                history.append(DialogueTurn(json.dumps(candidate.to_dict()), feedback))
                continue
            verdicts = tuple(
                review_candidate(candidate, segmented, reviewer, gateway, iteration=number, call_log=call_log)
                for reviewer in panel.reviewers
            )
            if all(v.is_quality for v in verdicts):
                iterations.append(RciIteration(number, candidate, True, verdicts))
                outcome = OUTCOME_ACCEPTED
                break
            feedback = aggregate_feedback(verdicts)
            iterations.append(RciIteration(number, candidate, True, verdicts, feedback=feedback))
            history.append(DialogueTurn(json.dumps(candidate.to_dict()), feedback))
    except (GenerationParseFailure, BackendUnavailable) as exc:
        outcome = OUTCOME_FAILED
        error = str(exc)
        logger.warning("section %s: loop aborted: %s", segmented.section_id, exc)

    metadata = {
        "run_id": config.run_id,
        "seed": config.seed,
        "model_names": {
            config.generator.persona_id: config.generator.model_name,
            **{r.persona_id: r.model_name for r in panel.reviewers},
        },
        "max_iterations": config.max_iterations,
        "started_at": started_at,
        "finished_at": _utcnow(),
    }
    if error:
        metadata["error"] = error

    return RciTranscript(
        section_id=segmented.section_id,
        iterations=iterations,
        outcome=outcome,
        run_metadata=metadata,
        call_log=call_log,
        segmented=segmented,
    )
