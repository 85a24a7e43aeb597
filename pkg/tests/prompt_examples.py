"""Test data lifted from the shipped prompt templates' few-shot examples.

These passages and candidates drive the mock-backend replays, so tests stay
aligned with the exact texts the personas are trained on.
"""

from __future__ import annotations

import json

from craqan.corpus import SegmentedSection, Sentence
from craqan.gateway import BackendConfig, MockBackend, MockRule
from craqan.rci import CandidateQA


def segmented(section_id, sentences, article_id="art", kind="body"):
    return SegmentedSection(
        section_id=section_id,
        article_id=article_id,
        kind=kind,
        sentences=tuple(Sentence(i, s) for i, s in enumerate(sentences)),
    )


EINSTEIN = segmented(
    "einstein#00",
    [
        "Albert Einstein was a theoretical physicist who developed the theory of relativity.",
        "His work is also known for its influence on the philosophy of science.",
        "He won the 1921 Nobel Prize in Physics.",
        "Einstein, considered one of the most important figures in the history of science, was "
        "awarded the prize for his services to theoretical physics and especially for his "
        "discovery of the law of the photoelectric effect.",
    ],
)
EINSTEIN_CANDIDATE = CandidateQA(
    question="For what discovery did Albert Einstein win the Nobel Prize in Physics?",
    answer="The law of the photoelectric effect.",
    required_sentence_indices=(0, 2, 3),
)

SAMANTHA = segmented(
    "samantha#00",
    [
        "Samantha is a talented painter.",
        "She has won numerous awards for her work.",
        "The artist often uses bright colors in her pieces.",
        "Despite her young age, she enjoys respect and admiration from older artists.",
    ],
)
SAMANTHA_CANDIDATE = CandidateQA(
    question="What does the artist Samantha often use in her pieces?",
    answer="Bright colors.",
    required_sentence_indices=(0, 2),
)

AMAZON = segmented(
    "amazon#00",
    [
        "Rainforests are places with enormous diversity among species.",
        "Amazon rainforest is the world's largest tropical rainforest.",
        "It covers an area of five and half a million square kilometers.",
        "The Amazon is home to an astounding number of plant species, some of which are not "
        "found anywhere else in the world.",
        "This forest is also a habitat for many animal species.",
    ],
)
AMAZON_CANDIDATE = CandidateQA(
    question="How large is the area that the Amazon rainforest covers?",
    answer="Five and half a million square kilometers.",
    required_sentence_indices=(1, 2),
)

ACA = segmented(
    "aca#00",
    [
        "The Affordable Care Act (ACA), formally known as the Patient Protection and Affordable "
        "Care Act and colloquially known as Obamacare, was signed into law by President Barack "
        "Obama on March 23, 2010.",
        "Together with the Health Care and Education Reconciliation Act of 2010 amendment, it "
        "represents the U.S. healthcare system's most significant regulatory overhaul and "
        "expansion of coverage since the enactment of Medicare and Medicaid in 1965.",
        "The ACA's major provisions came into force in 2014.",
    ],
)
ACA_FIRST_CANDIDATE = CandidateQA(
    question="When did the ACA's major provisions come into force?",
    answer="2014.",
    required_sentence_indices=(0, 2),
)
ACA_REVISED_CANDIDATE = CandidateQA(
    question="When did the Affordable Care Act's major provisions come into force?",
    answer="2014.",
    required_sentence_indices=(0, 2),
)
ACA_FEEDBACK = (
    "Your question does not require a coreference resolution between sentences to answer and "
    "only requires sentence index 2 to answer. Please revise your question."
)

STEVE = segmented(
    "steve#00",
    [
        "Steve creates web designs.",
        "His clients say they are impressed.",
        "He works in the Silicon Valley.",
    ],
)
STEVE_CANDIDATE = CandidateQA(
    question="Why are Steve's clients impressed?",
    answer="Because of his web designs.",
    required_sentence_indices=(1, 2),
)
STEVE_REQUIRED_SENTENCE_REASON = (
    'The question asks about "Steve\'s clients". Sentence 1 and 2 use pronouns but don\'t '
    'mention "Steve" by name. Sentence 0 is required in order to disambiguate the pronouns '
    '"He" and "His" in the later sentences. Sentence 0 should have been marked as required '
    "but was not."
)

TITANIC = segmented(
    "titanic#00",
    [
        "The 'Titanic' sank on its maiden voyage.",
        "It hit an iceberg and began to sink.",
        "The ship went down on April 15, 1912.",
    ],
)
TITANIC_CANDIDATE = CandidateQA(
    question="What happened on April 15, 1912?",
    answer="The 'Titanic' sank.",
    required_sentence_indices=(0, 2),
)

REVIEWER_IDS = ("content_cohesion", "information_accuracy", "linguistic_quality", "required_sentence")

PASS_REPLY = json.dumps({"reason": "All operational directives are followed.", "is_quality": True})


def fail_reply(reason):
    return json.dumps({"reason": reason, "is_quality": False})


def candidate_reply(candidate: CandidateQA) -> str:
    return json.dumps(candidate.to_dict())


def fast_mock(rules) -> MockBackend:
    """Mock backend with the rate limiter effectively disabled."""
    config = BackendConfig(kind="mock", script_path="<inline>", requests_per_minute=1_000_000)
    return MockBackend(list(rules), config=config)


def passing_reviewer_rules(iteration=None):
    return [
        MockRule(match_persona=rid, match_iteration=iteration, reply=PASS_REPLY)
        for rid in REVIEWER_IDS
    ]


def example4_rules():
    """The two-round revision flow: one reviewer objects, the revision passes."""
    rules = [
        MockRule("generator", candidate_reply(ACA_FIRST_CANDIDATE), match_iteration=1),
        MockRule("generator", candidate_reply(ACA_REVISED_CANDIDATE), match_iteration=2),
        MockRule("required_sentence", fail_reply(ACA_FEEDBACK), match_iteration=1),
        MockRule("required_sentence", PASS_REPLY, match_iteration=2),
    ]
    for rid in REVIEWER_IDS[:-1]:
        rules.append(MockRule(rid, PASS_REPLY))
    return rules
