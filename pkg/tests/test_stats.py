"""Stats tests: quantiles against a brute-force oracle, gap definitions,
yield, tallies, and report assembly."""

from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from craqan.stats import (
    GAP_DEFINITIONS,
    StatsReport,
    compute_stats,
    compute_yield,
    coreference_gap,
    quantile_points,
    render_table,
)
from craqan.store import REJECTION_TAXONOMY, ReviewStore
from builders import accept, accepted_transcript, reject


def oracle_quantile(values, q):
    """Independent sort-and-interpolate oracle: h = (n-1) q, linear between
    the closest ranks."""
    data = sorted(values)
    if not data:
        return None
    h = (len(data) - 1) * q
    low = math.floor(h)
    high = math.ceil(h)
    return data[low] + (h - low) * (data[high] - data[low])


def make_record(record_id, article_id="a1", kind="body", indices=(0, 2), n_sentences=4, words_per_sentence=5):
    return {
        "record_id": record_id,
        "article_id": article_id,
        "section_id": f"{article_id}#{record_id}",
        "section_kind": kind,
        "sentences": [
            {"index": i, "sentence": " ".join([f"w{i}{j}" for j in range(words_per_sentence)]) + "."}
            for i in range(n_sentences)
        ],
        "question": "Q?",
        "answer": "A.",
        "required_sentence_indices": list(indices),
        "provenance": {"run_id": "r", "iteration_count": 1, "human_reviewer_ids": []},
    }


# ---------------------------------------------------------------- quantiles


def test_quantiles_match_hand_computed_fixture():
    # oracle values computed by hand for [3, 5, 7, 9, 11]:
    # p10 -> 3.8, p50 -> 7, p90 -> 10.2
    points = quantile_points([3, 5, 7, 9, 11])
    assert points == {"p10": 3.8, "p50": 7.0, "p90": 10.2}


def test_quantiles_empty_marked_undefined():
    assert quantile_points([]) == {"p10": None, "p50": None, "p90": None}


@settings(max_examples=100, deadline=None)
@given(values=st.lists(st.integers(min_value=0, max_value=500), min_size=1, max_size=1000))
def test_quantiles_agree_with_oracle(values):
    points = quantile_points(values)
    for name, q in (("p10", 0.1), ("p50", 0.5), ("p90", 0.9)):
        assert points[name] == pytest.approx(oracle_quantile(values, q), abs=1e-9)


# ---------------------------------------------------------------- gaps


def test_gap_adjacent_sentences():
    record = make_record("r", indices=(0, 1))
    assert coreference_gap(record) == 1.0


def test_gap_definitions_on_three_indices():
    record = make_record("r", indices=(0, 2, 3))
    assert coreference_gap(record, "max_consecutive") == 2.0
    assert coreference_gap(record, "mean_consecutive") == 1.5
    assert coreference_gap(record, "span") == 3.0


def test_gap_requires_two_indices():
    with pytest.raises(ValueError):
        coreference_gap(make_record("r", indices=(1,)))


def test_gap_unknown_definition():
    with pytest.raises(ValueError):
        coreference_gap(make_record("r"), "hamming")


# ---------------------------------------------------------------- yield


def test_yield_perfect(tmp_path):
    store = ReviewStore(tmp_path, fsync=False)
    transcripts = []
    for i in range(10):
        t = accepted_transcript(f"s{i}")
        transcripts.append(t.to_dict())
        item = store.enqueue(t)
        accept(store, item.item_id)
    events = store.events()
    store.close()
    assert compute_yield(transcripts, events) == 1.0


def test_yield_zero_attempts_undefined():
    assert compute_yield([], []) is None


def test_yield_counts_dropped_duplicates_as_accepted(tmp_path):
    store = ReviewStore(tmp_path, fsync=False)
    transcripts = []
    for run in ("r1", "r2"):
        t = accepted_transcript("shared", run_id=run)
        transcripts.append(t.to_dict())
        item = store.enqueue(t)
        accept(store, item.item_id)
    store.dedup()
    events = store.events()
    store.close()
    assert compute_yield(transcripts, events) == 1.0


# ---------------------------------------------------------------- report


def small_release():
    return [
        make_record("r0", article_id="a1", kind="summary", indices=(0, 1), n_sentences=3),
        make_record("r1", article_id="a1", kind="body", indices=(0, 2, 3), n_sentences=5),
        make_record("r2", article_id="a2", kind="body", indices=(1, 3), n_sentences=4),
        make_record("r3", article_id="a3", kind="summary", indices=(0, 2), n_sentences=6),
        make_record("r4", article_id="a3", kind="body", indices=(2, 4), n_sentences=7),
    ]


def test_compute_stats_counts():
    report = compute_stats(small_release())
    assert report.total_records == 5
    assert report.unique_articles == 3
    assert report.qa_from_summary == 2
    assert report.qa_from_body == 3
    assert report.qa_requiring_2 == 4
    assert report.qa_requiring_3 == 1
    assert report.qa_requiring_2 + report.qa_requiring_3 == report.total_records


def test_compute_stats_quantiles_use_oracle_values():
    report = compute_stats(small_release())
    sentences = [3, 5, 4, 6, 7]
    for name, q in (("p10", 0.1), ("p50", 0.5), ("p90", 0.9)):
        assert report.quantiles["sentences_per_section"][name] == pytest.approx(
            oracle_quantile(sentences, q)
        )
    # sections per article: [2, 1, 2]
    assert report.quantiles["sections_per_article"]["p50"] == 2.0


def test_compute_stats_gap_quantiles_cover_all_definitions():
    report = compute_stats(small_release())
    assert set(report.gap_quantiles) == set(GAP_DEFINITIONS)
    assert report.quantiles["sentences_between_coreferences"] == report.gap_quantiles["max_consecutive"]


def test_compute_stats_empty_release():
    report = compute_stats([])
    assert report.total_records == 0
    assert report.unique_articles == 0
    assert report.quantiles["sentences_per_section"]["p50"] is None
    assert report.yield_fraction is None
    assert all(v == 0 for v in report.rejection_tally.values())


def test_compute_stats_is_pure():
    records = small_release()
    first = compute_stats(records).to_dict()
    second = compute_stats(records).to_dict()
    assert first == second


def test_tally_sums_to_rejecting_decisions(tmp_path):
    store = ReviewStore(tmp_path, fsync=False)
    for i, category in enumerate(("Other", "Other", "Question Ambiguity")):
        item = store.enqueue(accepted_transcript(f"s{i}"))
        reject(store, item.item_id, category, reviewers=(f"x{i}", f"y{i}"))
    events = store.events()
    store.close()
    report = compute_stats([], transcripts=[], events=events)
    assert sum(report.rejection_tally.values()) == 6
    assert report.rejection_tally["Other"] == 4
    assert set(report.rejection_tally) == set(REJECTION_TAXONOMY)


def test_render_table_lists_headline_rows():
    text = render_table(compute_stats(small_release()))
    assert "Number of Unique Articles" in text
    assert "Number of Sentences between Coreferences (mean_consecutive)" in text
    assert "10% Quantile" in text


def test_report_round_trips_to_json():
    import json

    report = compute_stats(small_release())
    assert isinstance(json.loads(json.dumps(report.to_dict())), dict)
    assert isinstance(report, StatsReport)
