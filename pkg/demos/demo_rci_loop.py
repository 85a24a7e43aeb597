"""Walk one section through the generate/review loop, narrating each step.

Uses a scripted mock backend, so the run is fully deterministic and offline:
the generator's first candidate draws an objection from the Required Sentence
Reviewer, the revision passes the whole panel, and the transcript records
both rounds.

Run:  python3 demos/demo_rci_loop.py
"""

from __future__ import annotations

import json
import tempfile
from pathlib import Path

from craqan.corpus import SegmentedSection, Sentence
from craqan.gateway import BackendConfig, mock_from_script
from craqan.personas import builtin_personas
from craqan.rci import RciConfig, run_rci

SECTION = SegmentedSection(
    section_id="aca#00",
    article_id="aca",
    kind="summary",
    sentences=(
        Sentence(0, "The Affordable Care Act (ACA), formally known as the Patient Protection "
                    "and Affordable Care Act and colloquially known as Obamacare, was signed "
                    "into law by President Barack Obama on March 23, 2010."),
        Sentence(1, "Together with the Health Care and Education Reconciliation Act of 2010 "
                    "amendment, it represents the U.S. healthcare system's most significant "
                    "regulatory overhaul and expansion of coverage since the enactment of "
                    "Medicare and Medicaid in 1965."),
        Sentence(2, "The ACA's major provisions came into force in 2014."),
    ),
)

FIRST = {
    "question": "When did the ACA's major provisions come into force?",
    "answer": "2014.",
    "required_sentence_indices": [0, 2],
}
REVISED = {
    "question": "When did the Affordable Care Act's major provisions come into force?",
    "answer": "2014.",
    "required_sentence_indices": [0, 2],
}
OBJECTION = (
    "Your question does not require a coreference resolution between sentences to answer "
    "and only requires sentence index 2 to answer. Please revise your question."
)
PASS = {"reason": "All operational directives are followed.", "is_quality": True}


def build_script(path: Path) -> None:
    rules = [
        {"match": {"persona": "generator", "iteration": 1}, "reply": json.dumps(FIRST)},
        {"match": {"persona": "generator", "iteration": 2}, "reply": json.dumps(REVISED)},
        {
            "match": {"persona": "required_sentence", "iteration": 1},
            "reply": json.dumps({"reason": OBJECTION, "is_quality": False}),
        },
    ]
    for reviewer in ("content_cohesion", "information_accuracy", "linguistic_quality", "required_sentence"):
        rules.append({"match": {"persona": reviewer}, "reply": json.dumps(PASS)})
    path.write_text("\n".join(json.dumps(rule) for rule in rules) + "\n")


def main() -> None:
    registry = builtin_personas()
    with tempfile.TemporaryDirectory() as tmp:
        script = Path(tmp) / "replay.jsonl"
        build_script(script)
        gateway = mock_from_script(script, config=BackendConfig(kind="mock", script_path=script, requests_per_minute=10_000))
        config = RciConfig(generator=registry.get("generator"), run_id="demo", seed=0)
        transcript = run_rci(SECTION, registry.default_panel(), gateway, config)

    print(f"section: {SECTION.section_id} ({len(SECTION.sentences)} sentences)\n")
    for iteration in transcript.iterations:
        print(f"--- iteration {iteration.iteration_number} ---")
        print(f"candidate question: {iteration.candidate.question}")
        print(f"candidate indices:  {list(iteration.candidate.required_sentence_indices)}")
        for verdict in iteration.verdicts:
            mark = "PASS" if verdict.is_quality else "FAIL"
            print(f"  [{mark}] {verdict.persona_name}: {verdict.reason}")
        if iteration.feedback:
            print(f"feedback to generator: {iteration.feedback}")
        print()
    print(f"outcome: {transcript.outcome}")
    print(f"model calls: {len(transcript.call_log)} "
          f"({sum(1 for c in transcript.call_log if c.persona == 'generator')} generator)")


if __name__ == "__main__":
    main()
