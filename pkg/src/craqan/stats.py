"""Dataset characteristics report.

Counts, p10/p50/p90 quantiles (linear interpolation between closest ranks,
numpy's default), run yield, and the per-category rejection tally. The
"sentences between coreferences" statistic has no single obvious reading,
so three per-record definitions are computed side by side and all appear in
the report:

    max_consecutive  - largest gap between consecutive required indices
    mean_consecutive - average gap between consecutive required indices
    span             - last required index minus first

The report names the quantile method so downstream comparisons know what
they are looking at.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .store import REJECTION_TAXONOMY, fold_events

logger = logging.getLogger(__name__)

QUANTILE_METHOD = "linear"
QUANTILE_POINTS = {"p10": 0.10, "p50": 0.50, "p90": 0.90}
GAP_DEFINITIONS = ("max_consecutive", "mean_consecutive", "span")
PRIMARY_GAP_DEFINITION = "max_consecutive"


@dataclass
class StatsReport:
    total_records: int
    unique_articles: int
    qa_from_summary: int
    qa_from_body: int
    qa_requiring_2: int
    qa_requiring_3: int
    quantiles: dict[str, dict[str, float | None]]
    gap_quantiles: dict[str, dict[str, float | None]]
    yield_fraction: float | None
    rejection_tally: dict[str, int]
    quantile_method: str = QUANTILE_METHOD
    primary_gap_definition: str = PRIMARY_GAP_DEFINITION
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "total_records": self.total_records,
            "unique_articles": self.unique_articles,
            "qa_from_summary": self.qa_from_summary,
            "qa_from_body": self.qa_from_body,
            "qa_requiring_2": self.qa_requiring_2,
            "qa_requiring_3": self.qa_requiring_3,
            "quantiles": self.quantiles,
            "gap_quantiles": self.gap_quantiles,
            "yield_fraction": self.yield_fraction,
            "rejection_tally": self.rejection_tally,
            "quantile_method": self.quantile_method,
            "primary_gap_definition": self.primary_gap_definition,
            "notes": self.notes,
        }


def quantile_points(values: Sequence[float]) -> dict[str, float | None]:
    """p10/p50/p90 with linear interpolation; None-marked when empty."""
    if not values:
        return {name: None for name in QUANTILE_POINTS}
    arr = np.asarray(values, dtype=float)
    return {
        name: float(np.quantile(arr, q, method=QUANTILE_METHOD))
        for name, q in QUANTILE_POINTS.items()
    }


def _indices(record: dict) -> list[int]:
    return list(record["required_sentence_indices"])


def coreference_gap(record: dict, definition: str = PRIMARY_GAP_DEFINITION) -> float:
    """Distance between a record's coreference-linked sentences, under the
    named definition. Requires at least two indices."""
    indices = _indices(record)
    if len(indices) < 2:
        raise ValueError("record needs at least 2 required indices")
    diffs = [b - a for a, b in zip(indices, indices[1:])]
    if definition == "max_consecutive":
        return float(max(diffs))
    if definition == "mean_consecutive":
        return float(sum(diffs) / len(diffs))
    if definition == "span":
        return float(indices[-1] - indices[0])
    raise ValueError(f"unknown gap definition {definition!r}")


def _section_text(record: dict) -> str:
    return " ".join(s["sentence"] for s in record["sentences"])


def compute_yield(transcripts: Sequence[dict], events: Iterable[dict]) -> float | None:
    """Human-accepted items divided by attempted sections; None when nothing
    was attempted. Items later dropped as duplicates still count as accepted
    (the drop is curation, not review)."""
    attempted = len(transcripts)
    if attempted == 0:
        return None
    state = fold_events(events)
    accepted = sum(
        1 for item in state.items.values() if item.status in ("accepted", "dropped_duplicate")
    )
    return accepted / attempted


def rejection_tally(events: Iterable[dict]) -> dict[str, int]:
    return fold_events(events).rejection_tally()


def compute_stats(
    records: Sequence[dict],
    transcripts: Sequence[dict] | None = None,
    events: Sequence[dict] | None = None,
) -> StatsReport:
    """Build the full report from a release plus optional run artifacts.

    `records` are release rows (dicts as exported); `transcripts` and
    `events` feed yield and the rejection tally and may be omitted.
    """
    records = list(records)
    total = len(records)
    by_article: dict[str, int] = {}
    for record in records:
        by_article[record["article_id"]] = by_article.get(record["article_id"], 0) + 1

    requiring_2 = sum(1 for r in records if len(_indices(r)) == 2)
    requiring_3 = sum(1 for r in records if len(_indices(r)) == 3)
    if requiring_2 + requiring_3 != total:
        logger.warning(
            "%d records fall outside the 2-or-3 required-sentence profile",
            total - requiring_2 - requiring_3,
        )

    quantiles = {
        "sections_per_article": quantile_points(sorted(by_article.values())),
        "sentences_per_section": quantile_points([len(r["sentences"]) for r in records]),
        "words_per_section": quantile_points([len(_section_text(r).split()) for r in records]),
    }
    gap_quantiles = {
        definition: quantile_points(
            [coreference_gap(r, definition) for r in records if len(_indices(r)) >= 2]
        )
        for definition in GAP_DEFINITIONS
    }
    quantiles["sentences_between_coreferences"] = gap_quantiles[PRIMARY_GAP_DEFINITION]

    yield_fraction = (
        compute_yield(transcripts, events) if transcripts is not None and events is not None else None
    )
    tally = rejection_tally(events) if events is not None else {c: 0 for c in REJECTION_TAXONOMY}

    return StatsReport(
        total_records=total,
        unique_articles=len(by_article),
        qa_from_summary=sum(1 for r in records if r["section_kind"] == "summary"),
        qa_from_body=sum(1 for r in records if r["section_kind"] == "body"),
        qa_requiring_2=requiring_2,
        qa_requiring_3=requiring_3,
        quantiles=quantiles,
        gap_quantiles=gap_quantiles,
        yield_fraction=yield_fraction,
        rejection_tally=tally,
        notes={
            "sections_per_article": "counts sections contributing released records, per article",
            "words_per_section": "whitespace token count of the joined section text",
        },
    )


def _fmt(value: float | None) -> str:
    if value is None:
        return "n/a"
    return f"{value:g}"


def render_table(report: StatsReport) -> str:
    """Aligned plain-text table of the report's headline rows."""
    count_rows = [
        ("Number of Unique Articles", report.unique_articles),
        ("Number of QA Pairs from a Summary Section", report.qa_from_summary),
        ("Number of QA Pairs from a Random Section", report.qa_from_body),
        ("Number of QA Pairs that Require 2 Sentences to Answer", report.qa_requiring_2),
        ("Number of QA Pairs that Require 3 Sentences to Answer", report.qa_requiring_3),
    ]
    quantile_rows = [
        ("Number of Sections per Article", report.quantiles["sections_per_article"]),
        ("Number of Sentences per Section", report.quantiles["sentences_per_section"]),
        ("Number of Words per Section", report.quantiles["words_per_section"]),
    ] + [
        (f"Number of Sentences between Coreferences ({definition})", report.gap_quantiles[definition])
        for definition in GAP_DEFINITIONS
    ]

    width = max(len(label) for label, _ in count_rows + quantile_rows) + 2
    lines = [f"{'Characteristic':<{width}}Total"]
    for label, value in count_rows:
        lines.append(f"{label:<{width}}{value}")
    lines.append("")
    header = f"{'':<{width}}{'10% Quantile':>14}{'50% Quantile':>14}{'90% Quantile':>14}"
    lines.append(header)
    for label, points in quantile_rows:
        lines.append(
            f"{label:<{width}}"
            f"{_fmt(points['p10']):>14}{_fmt(points['p50']):>14}{_fmt(points['p90']):>14}"
        )
    if report.yield_fraction is not None:
        lines.append("")
        lines.append(f"{'Automated generation yield':<{width}}{report.yield_fraction:.1%}")
    return "\n".join(lines)


def write_stats(report: StatsReport, path) -> None:
    from pathlib import Path

    Path(path).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
