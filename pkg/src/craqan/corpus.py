"""Corpus ingestion.

Loads Markdown articles, splits them into a summary section plus level-2
heading sections, samples sections deterministically, and segments section
text into indexed sentences through the model gateway (with a rule-based
fallback when the model cannot reproduce the text losslessly).
"""

from __future__ import annotations

import json
import logging
import random
import re
from dataclasses import dataclass, field
from pathlib import Path

from .gateway import (
    BackendUnavailable,
    ChatMessage,
    ChatRequest,
    JsonParseError,
    NoJsonFound,
    extract_json_array,
)
from .personas import PersonaSpec, render_prompt

logger = logging.getLogger(__name__)

SECTION_KINDS = ("summary", "body")


class CorpusError(Exception):
    """Base class for corpus-ingestion failures."""


class CorpusEmpty(CorpusError):
    """The corpus path yielded no loadable articles."""


class NoSections(CorpusError):
    """An article contains no extractable section text."""


class SegmentationFailed(CorpusError):
    """The gateway could not segment a section even after retries."""


@dataclass(frozen=True)
class Article:
    article_id: str
    title: str
    markdown: str
    source_url: str | None = None

    def __post_init__(self):
        if not self.markdown.strip():
            raise ValueError(f"article {self.article_id}: markdown is empty")


@dataclass(frozen=True)
class Section:
    section_id: str
    article_id: str
    kind: str
    text: str
    heading: str | None = None

    def __post_init__(self):
        if self.kind not in SECTION_KINDS:
            raise ValueError(f"section {self.section_id}: unknown kind {self.kind!r}")
        if not normalize_whitespace(self.text):
            raise ValueError(f"section {self.section_id}: empty text")


@dataclass(frozen=True)
class Sentence:
    index: int
    sentence: str


@dataclass(frozen=True)
class SegmentedSection:
    """A section as an ordered, gap-free list of indexed sentences."""

    section_id: str
    article_id: str
    kind: str
    sentences: tuple[Sentence, ...]
    fallback_segmentation: bool = False

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))
        for position, item in enumerate(self.sentences):
            if item.index != position:
                raise ValueError(
                    f"section {self.section_id}: sentence indices must be 0..n-1 "
                    f"(found {item.index} at position {position})"
                )
            if not item.sentence.strip():
                raise ValueError(f"section {self.section_id}: sentence {position} is empty")

    def text(self) -> str:
        return " ".join(item.sentence for item in self.sentences)

    def to_dict(self) -> dict:
        return {
            "section_id": self.section_id,
            "article_id": self.article_id,
            "kind": self.kind,
            "sentences": [{"index": s.index, "sentence": s.sentence} for s in self.sentences],
            "fallback_segmentation": self.fallback_segmentation,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SegmentedSection":
        return cls(
            section_id=data["section_id"],
            article_id=data["article_id"],
            kind=data["kind"],
            sentences=tuple(Sentence(s["index"], s["sentence"]) for s in data["sentences"]),
            fallback_segmentation=data.get("fallback_segmentation", False),
        )


@dataclass(frozen=True)
class LoadFailure:
    path: str
    reason: str


@dataclass
class CorpusLoad:
    """Articles that loaded plus a per-file failure report."""

    articles: list[Article] = field(default_factory=list)
    failures: list[LoadFailure] = field(default_factory=list)


_WS_RE = re.compile(r"\s+")
_HEADING_RE = re.compile(r"^(#{1,6})\s+(.*?)\s*$")
_H1_RE = re.compile(r"^#\s+(.*?)\s*$", re.MULTILINE)
# terminal punctuation, then whitespace, then an uppercase start
_FALLBACK_SPLIT_RE = re.compile(r"(?<=[.!?])\s+(?=[A-Z])")


def normalize_whitespace(text: str) -> str:
    return _WS_RE.sub(" ", text).strip()


def _read_article(path: Path, article_id: str | None = None) -> Article:
    markdown = path.read_text(encoding="utf-8")
    if not markdown.strip():
        raise ValueError("file is empty")
    aid = article_id or path.stem
    match = _H1_RE.search(markdown)
    title = match.group(1) if match else aid
    return Article(article_id=aid, title=title, markdown=markdown)


def _parse_manifest_line(line: str, base: Path) -> tuple[Path, str | None]:
    # "path" or "path<TAB>article_id"; tab keeps paths with spaces unambiguous
    if "\t" in line:
        raw_path, aid = line.split("\t", 1)
        return base / raw_path.strip(), aid.strip() or None
    return base / line.strip(), None


def load_corpus(path: str | Path) -> CorpusLoad:
    """Load a directory of .md files or a manifest listing them.

    Per-file read errors land in the failure report; other articles still
    load. An entirely empty corpus raises CorpusEmpty.
    """
    path = Path(path)
    entries: list[tuple[Path, str | None]]
    if path.is_dir():
        entries = [(p, None) for p in sorted(path.glob("*.md"))]
    elif path.is_file():
        entries = []
        for line in path.read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            entries.append(_parse_manifest_line(line, path.parent))
    else:
        raise CorpusEmpty(f"corpus path does not exist: {path}")

    result = CorpusLoad()
    seen_ids: set[str] = set()
    for file_path, aid in entries:
        try:
            article = _read_article(file_path, aid)
        except (OSError, ValueError) as exc:
            result.failures.append(LoadFailure(path=str(file_path), reason=str(exc)))
            logger.warning("skipping %s: %s", file_path, exc)
            continue
        if article.article_id in seen_ids:
            result.failures.append(
                LoadFailure(path=str(file_path), reason=f"duplicate article_id {article.article_id}")
            )
            continue
        seen_ids.add(article.article_id)
        result.articles.append(article)

    result.articles.sort(key=lambda a: a.article_id)
    if not result.articles:
        raise CorpusEmpty(f"no loadable articles under {path}")
    return result


def split_sections(article: Article) -> list[Section]:
    """Pre-heading text becomes the summary; each level-2 heading starts a
    body section. Heading lines themselves are structure, not prose, and are
    dropped from section text. Empty bodies are dropped."""
    summary_lines: list[str] = []
    bodies: list[tuple[str, list[str]]] = []
    current: list[str] | None = None  # None = still in the summary region

    for line in article.markdown.splitlines():
        match = _HEADING_RE.match(line)
        if match:
            if len(match.group(1)) == 2:
                bodies.append((match.group(2), []))
                current = bodies[-1][1]
            continue
        if current is None:
            summary_lines.append(line)
        else:
            current.append(line)

    sections: list[Section] = []
    ordinal = 0
    summary_text = normalize_whitespace("\n".join(summary_lines))
    if summary_text:
        sections.append(
            Section(
                section_id=f"{article.article_id}#{ordinal:02d}",
                article_id=article.article_id,
                kind="summary",
                text=summary_text,
            )
        )
        ordinal += 1
    for heading, lines in bodies:
        text = normalize_whitespace("\n".join(lines))
        if not text:
            continue
        sections.append(
            Section(
                section_id=f"{article.article_id}#{ordinal:02d}",
                article_id=article.article_id,
                kind="body",
                text=text,
                heading=heading,
            )
        )
        ordinal += 1

    if not sections:
        raise NoSections(f"article {article.article_id} has no extractable text")
    return sections


def sample_sections(article_sections: list[Section], k: int, seed: int) -> list[Section]:
    """The summary section (if any) plus min(k, available) body sections drawn
    without replacement. Pure function of (sections, k, seed); sampled bodies
    keep document order."""
    if k < 0:
        raise ValueError("k must be >= 0")
    summary = [s for s in article_sections if s.kind == "summary"][:1]
    bodies = [s for s in article_sections if s.kind == "body"]
    take = min(k, len(bodies))
    rng = random.Random(seed)
    chosen = sorted(rng.sample(range(len(bodies)), take))
    return summary + [bodies[i] for i in chosen]


def fallback_split(text: str) -> list[str]:
    """Deterministic rule-based splitter: break after terminal punctuation
    followed by whitespace and an uppercase letter."""
    parts = [p.strip() for p in _FALLBACK_SPLIT_RE.split(text)]
    return [p for p in parts if p]


def _reconstructs(sentences: list[str], section_text: str) -> bool:
    return normalize_whitespace(" ".join(sentences)) == normalize_whitespace(section_text)


def _parse_sentence_list(reply: str) -> list[str]:
    items = extract_json_array(reply)
    if not isinstance(items, list) or not items:
        raise ValueError("reply is not a non-empty list")
    out = []
    for item in items:
        if not isinstance(item, str) or not item.strip():
            raise ValueError("sentence list items must be non-empty strings")
        out.append(item.strip())
    return out


RESPLIT_INSTRUCTION = (
    "Your split did not reproduce the text exactly. Reply again with a JSON "
    "list of the original sentences, preserving every character."
)


def segment_sentences(section: Section, gateway, splitter: PersonaSpec) -> SegmentedSection:
    """Ask the splitter persona to segment `section`; verify the segmentation
    is lossless (whitespace-normalized). One corrective re-ask, then the
    flagged rule-based fallback. Gateway exhaustion raises SegmentationFailed.
    """
    prompt = render_prompt(splitter, section.text)
    messages = [ChatMessage(splitter.message_role, prompt)]
    sentences: list[str] | None = None
    for ask in range(2):
        request = ChatRequest(
            messages=tuple(messages),
            model_name=splitter.model_name,
            temperature=splitter.temperature,
            persona=splitter.persona_id,
        )
        try:
            reply = gateway.complete(request)
        except BackendUnavailable as exc:
            raise SegmentationFailed(f"section {section.section_id}: {exc}") from exc
        try:
            candidate = _parse_sentence_list(reply.content)
        except (NoJsonFound, JsonParseError, ValueError) as exc:
            logger.info("section %s: unusable split reply (%s)", section.section_id, exc)
            candidate = None
        if candidate is not None and _reconstructs(candidate, section.text):
            sentences = candidate
            break
        if ask == 0:
            messages.append(ChatMessage("assistant", reply.content))
            messages.append(ChatMessage("user", RESPLIT_INSTRUCTION))

    fallback = sentences is None
    if fallback:
        logger.warning("section %s: falling back to rule-based splitter", section.section_id)
        sentences = fallback_split(section.text)
        if not sentences:
            raise SegmentationFailed(f"section {section.section_id}: nothing to segment")

    return SegmentedSection(
        section_id=section.section_id,
        article_id=section.article_id,
        kind=section.kind,
        sentences=tuple(Sentence(i, s) for i, s in enumerate(sentences)),
        fallback_segmentation=fallback,
    )


def write_sections_jsonl(segmented: list[SegmentedSection], path: str | Path) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with tmp.open("w", encoding="utf-8") as handle:
        for seg in segmented:
            handle.write(json.dumps(seg.to_dict(), ensure_ascii=False) + "\n")
    tmp.replace(path)


def read_sections_jsonl(path: str | Path) -> list[SegmentedSection]:
    out = []
    with Path(path).open(encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                out.append(SegmentedSection.from_dict(json.loads(line)))
    return out
