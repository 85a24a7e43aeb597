"""End-to-end pipeline demo on a two-article corpus, entirely offline.

Stages: ingest (section + segment via the mock splitter), generate (the
review loop per section), human review (programmatic decisions against the
store), dedup + export, and the final stats table.

Run:  python3 demos/demo_full_pipeline.py
"""

from __future__ import annotations

import json
import tempfile
from pathlib import Path

from craqan.cli import main as cli_main
from craqan.service import auto_enqueue
from craqan.stats import compute_stats, render_table
from craqan.store import HumanDecision, ReviewStore

ARTICLES = {
    "energy-act": (
        "# Energy Policy Act\n\n"
        "The Energy Policy Act addressed national energy production. "
        "The law changed fuel standards across several industries.\n\n"
        "## Provisions\n\n"
        "The act created new efficiency programs. "
        "It also funded research into alternative fuels.\n"
    ),
    "copyright-act": (
        "# Copyright Act\n\n"
        "The Copyright Act governs creative works. "
        "It took effect after years of revision.\n"
    ),
}

SPLITS = {
    "national energy production": [
        "The Energy Policy Act addressed national energy production.",
        "The law changed fuel standards across several industries.",
    ],
    "efficiency programs": [
        "The act created new efficiency programs.",
        "It also funded research into alternative fuels.",
    ],
    "creative works": [
        "The Copyright Act governs creative works.",
        "It took effect after years of revision.",
    ],
}

QUESTIONS = {
    "national energy production": (
        "What did the law that addressed national energy production change?",
        "Fuel standards across several industries.",
    ),
    "efficiency programs": (
        "What did the act that created new efficiency programs fund?",
        "Research into alternative fuels.",
    ),
    "creative works": (
        "When did the act governing creative works take effect?",
        "After years of revision.",
    ),
}


def build_inputs(root: Path) -> tuple[Path, Path]:
    corpus = root / "corpus"
    corpus.mkdir()
    for name, markdown in ARTICLES.items():
        (corpus / f"{name}.md").write_text(markdown)

    rules = []
    for marker, sentences in SPLITS.items():
        rules.append(
            {"match": {"persona": "splitter", "payload_contains": marker}, "reply": json.dumps(sentences)}
        )
    for marker, (question, answer) in QUESTIONS.items():
        rules.append(
            {
                "match": {"persona": "generator", "payload_contains": marker},
                "reply": json.dumps(
                    {"question": question, "answer": answer, "required_sentence_indices": [0, 1]}
                ),
            }
        )
    for reviewer in ("content_cohesion", "information_accuracy", "linguistic_quality", "required_sentence"):
        rules.append(
            {
                "match": {"persona": reviewer},
                "reply": json.dumps({"reason": "All operational directives are followed.", "is_quality": True}),
            }
        )
    script = root / "mock_script.jsonl"
    script.write_text("\n".join(json.dumps(rule) for rule in rules) + "\n")
    return corpus, script


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        corpus, script = build_inputs(root)
        output = root / "run"
        base = ["--output-dir", str(output), "--seed", "42", "--mock-script", str(script)]

        print("== ingest ==")
        assert cli_main(base + ["ingest", "--corpus", str(corpus), "--sections-per-article", "2"]) == 0

        print("\n== generate ==")
        assert cli_main(base + ["generate"]) == 0

        print("\n== human review ==")
        store = ReviewStore(output)
        auto_enqueue(store, output)
        for item in store.items(status="pending"):
            for reviewer in ("dana", "erin"):
                store.record_decision(item.item_id, HumanDecision(reviewer_id=reviewer, verdict="accept"))
            print(f"accepted {item.item_id} ({item.section_id})")
        store.close()

        print("\n== export ==")
        assert cli_main(["--output-dir", str(output), "export"]) == 0

        print("\n== stats ==")
        records = [
            json.loads(line)
            for line in (output / "release.jsonl").read_text().splitlines()
        ]
        print(render_table(compute_stats(records)))


if __name__ == "__main__":
    main()
