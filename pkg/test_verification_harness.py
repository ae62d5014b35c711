#!/usr/bin/env python3
"""Tests for the verification harness: corpora, random systems, verdicts, golden counts and milestones"""

from pathlib import Path

import pytest

from evolution_model import errors_only
from network_engine import Outcome
from tag_compiler import compile_tag_system
from tag_system import TagOutcome, TagOutcomeKind, TagSystem, validate_tag
from verification_harness import (
    GeneratorSpec,
    Milestone,
    MilestoneMissedError,
    Verdict,
    classify,
    equivalence_check,
    load_golden,
    milestone_check,
    proof_milestones,
    random_sweep,
    random_tag_system,
    track_milestones,
    word_corpus,
    write_golden,
)

CORPUS = Path(__file__).parent / "test_corpus"

T2 = TagSystem.build(("a", "b", "H"), {"a": ("b", "b"), "b": ("H",)})
T3 = TagSystem.build(("a", "b", "H"), {"a": ("a", "a"), "b": ("H",)})
GROWING = TagSystem.build(("a", "b", "H"), {"a": ("a", "a", "a"), "b": ("H",)})


@pytest.fixture(scope="module")
def compiled_t2():
    return compile_tag_system(T2)


def w(*symbols):
    return tuple(symbols)


def halted(iterations=1):
    return TagOutcome(TagOutcomeKind.HALTED, w("H"), iterations)


def exhausted(budget=1000):
    return TagOutcome(TagOutcomeKind.BUDGET_EXHAUSTED, w("a", "a"), budget)


# ---------------------------------------------------------------------------
# Corpora and random systems
# ---------------------------------------------------------------------------

def test_word_corpus():
    corpus = word_corpus(T2, 3)
    assert len(corpus) == 4 + 8
    assert corpus[:4] == [w("a", "a"), w("a", "b"), w("b", "a"), w("b", "b")]
    assert len(word_corpus(T2, 2)) == 4
    assert all("H" not in word for word in corpus)
    with pytest.raises(ValueError):
        word_corpus(T2, 1)


def test_random_systems_are_deterministic_and_valid():
    for seed in range(30):
        for size in (1, 2, 3, 4):
            spec = GeneratorSpec(seed, size, 3)
            system = random_tag_system(spec)
            assert system == random_tag_system(spec)
            assert errors_only(validate_tag(system)) == []
            assert system.n == size
            assert all(len(p) <= 3 for p in (system.production(a) for a in system.non_halting))


def test_single_symbol_system_halts_on_a():
    system = random_tag_system(GeneratorSpec(5, 1))
    assert system.alphabet == ("a", "H")
    assert system.production("a") == ("H",)


def test_generator_spec_bounds():
    with pytest.raises(ValueError):
        GeneratorSpec(0, alphabet_size=0)
    with pytest.raises(ValueError):
        GeneratorSpec(0, max_production_length=1)


# ---------------------------------------------------------------------------
# Verdicts
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("tag, loop, net, tag_budget, expected", [
    (halted(), None, Outcome.accepted(48), 1000, Verdict.CONSISTENT),
    (halted(), None, Outcome.stagnation(30), 1000, Verdict.MISMATCH),
    (halted(), None, Outcome.budget_exhausted(20000), 1000, Verdict.INCONCLUSIVE),
    (exhausted(), (0, 1), Outcome.accepted(300), 1000, Verdict.MISMATCH),
    (exhausted(), (0, 1), Outcome.budget_exhausted(20000), 1000, Verdict.CONSISTENT),
    (exhausted(), (0, 1), Outcome.stagnation(40), 1000, Verdict.CONSISTENT),
    (exhausted(), None, Outcome.stagnation(40), 1000, Verdict.CONSISTENT),
    (exhausted(), None, Outcome.budget_exhausted(1200), 1000, Verdict.INCONCLUSIVE),
    # estimate 120 // 12 + 1 = 11 iterations
    (exhausted(110), None, Outcome.accepted(120), 110, Verdict.MISMATCH),
    (exhausted(109), None, Outcome.accepted(120), 109, Verdict.INCONCLUSIVE),
])
def test_classify(tag, loop, net, tag_budget, expected):
    assert classify(tag, loop, net, tag_budget) is expected


# ---------------------------------------------------------------------------
# Equivalence
# ---------------------------------------------------------------------------

def test_t2_short_words_are_consistent(compiled_t2):
    report = equivalence_check(T2, word_corpus(T2, 3), compiled=compiled_t2)
    assert report.summary == {"consistent": 12, "mismatch": 0, "inconclusive": 0}
    assert report.mismatches == []
    assert report.golden["b b"] == 48
    assert equivalence_check(T2, word_corpus(T2, 3), compiled=compiled_t2, workers=3).golden == report.golden


@pytest.mark.slow
def test_t2_words_up_to_length_five_are_consistent_and_repeatable(compiled_t2):
    corpus = word_corpus(T2, 5)
    report = equivalence_check(T2, corpus, compiled=compiled_t2, workers=2)
    assert report.count(Verdict.MISMATCH) == 0
    assert report.count(Verdict.CONSISTENT) == 4 + 8 + 16 + 32

    again = equivalence_check(T2, corpus, compiled=compiled_t2)
    assert again.golden == report.golden
    assert len(report.golden) == 60
    recorded = load_golden(CORPUS / "golden_steps_t2.json")
    assert {word: report.golden[word] for word in recorded} == recorded


def test_raising_the_network_budget_keeps_consistent_words(compiled_t2):
    corpus = word_corpus(T2, 3)
    short = equivalence_check(T2, corpus, net_budget=200, compiled=compiled_t2)
    full = equivalence_check(T2, corpus, net_budget=20000, compiled=compiled_t2)
    assert short.mismatches == [] and full.mismatches == []
    assert short.count(Verdict.CONSISTENT) >= 1
    for before, after in zip(short.records, full.records):
        assert before.word == after.word
        if before.verdict is Verdict.CONSISTENT:
            assert after.verdict is Verdict.CONSISTENT
            assert after.network == before.network


def test_counter_cannot_outrun_a_finished_block():
    # a -> H, b -> b a: "b a" and "b b" loop on "b a", every other short word halts
    system = TagSystem.build(("a", "b", "H"), {"a": ("H",), "b": ("b", "a")})
    report = equivalence_check(system, word_corpus(system, 3), tag_budget=200, net_budget=3000)
    assert report.mismatches == []
    looping = [r for r in report.records if r.loop is not None]
    assert [r.word for r in looping] == [w("b", "a"), w("b", "b")]
    assert not any(r.network.is_accepted for r in looping)


def test_looping_word_is_not_accepted():
    report = equivalence_check(T3, [w("a", "a")], net_budget=600)
    (record,) = report.records
    assert record.verdict is Verdict.CONSISTENT
    assert record.loop == (0, 1)
    assert not record.network.is_accepted
    assert record.to_dict()["loop"] == {"start": 0, "period": 1}
    assert report.golden == {}


def test_must_not_accept_marks_a_proven_loop():
    word = w("a", "a")
    unproven = equivalence_check(GROWING, [word], tag_budget=20, net_budget=200)
    assert unproven.records[0].verdict is Verdict.INCONCLUSIVE
    assert unproven.records[0].loop is None
    # without a loop the network budget shrinks to 20 // 10 * 12 steps
    assert unproven.records[0].network == Outcome.budget_exhausted(24)

    proven = equivalence_check(GROWING, [word], tag_budget=20, net_budget=200, must_not_accept=[word])
    assert proven.records[0].verdict is Verdict.CONSISTENT
    assert proven.records[0].loop == (0, 0)


def test_empty_corpus():
    report = equivalence_check(T2, [])
    assert report.records == []
    assert report.summary == {"consistent": 0, "mismatch": 0, "inconclusive": 0}
    assert report.to_dict()["records"] == []


def test_report_document(compiled_t2):
    report = equivalence_check(T2, [w("b", "b"), w("b", "b")], compiled=compiled_t2)
    assert len(report.records) == 1
    data = report.to_dict()
    assert data["records"][0] == {
        "word": "b b",
        "tag": "HALTED word=H iterations=1",
        "network": "ACCEPTED time=48",
        "verdict": "consistent",
        "stepsPerIteration": 48.0,
    }
    assert data["stepsPerIteration"] == {"min": 48.0, "max": 48.0}


@pytest.mark.slow
def test_random_sweep_has_no_mismatches():
    entries = random_sweep(20, seed=0, alphabet_size=3, max_len=4, tag_budget=200, net_budget=5000)
    assert len(entries) == 20
    assert [entry.spec.alphabet_size for entry in entries[:4]] == [1, 2, 3, 1]
    for entry in entries:
        assert entry.report.mismatches == [], entry.system


# ---------------------------------------------------------------------------
# Golden step counts
# ---------------------------------------------------------------------------

def test_golden_step_counts(compiled_t2, tmp_path):
    golden = load_golden(CORPUS / "golden_steps_t2.json")
    report = equivalence_check(T2, [tuple(word.split()) for word in golden], compiled=compiled_t2)
    assert report.golden == golden

    path = tmp_path / "golden.json"
    write_golden(path, report.golden)
    assert load_golden(path) == golden


def test_golden_file_must_map_words_to_counts(tmp_path):
    path = tmp_path / "golden.json"
    path.write_text('{"b b": "48"}')
    with pytest.raises(ValueError):
        load_golden(path)


# ---------------------------------------------------------------------------
# Milestones
# ---------------------------------------------------------------------------

def test_proof_milestones_for_ab():
    milestones = proof_milestones(T2, w("a", "b"))
    assert milestones[0] == Milestone("2", w("[b.b]", "b^o"), milestones[0].label)
    assert milestones[3].node == "5"
    assert milestones[3].word == w("<a.b>", "b^o", "_0''", "$")
    assert milestones[-1].node == "9"
    assert milestones[-1].word == w("b", "b")
    with pytest.raises(ValueError):
        proof_milestones(T2, w("a"))
    with pytest.raises(ValueError):
        proof_milestones(T2, w("a", "H"))


def test_track_milestones_for_bb(compiled_t2):
    result = track_milestones(T2, w("b", "b"), compiled=compiled_t2)
    assert result.outcome == Outcome.accepted(48)
    assert result.steps == [4, 5, 8, 12, 17, 19, 47, 48]


def test_track_milestones_for_ab(compiled_t2):
    milestones = proof_milestones(T2, w("a", "b"))
    result = track_milestones(T2, w("a", "b"), milestones, compiled=compiled_t2)
    assert result.outcome.is_accepted
    assert len(result.steps) == len(milestones) + 1
    assert result.steps == sorted(result.steps)
    assert result.steps[-1] == result.outcome.time
    assert milestone_check(T2, w("a", "b"))


def test_missed_milestone(compiled_t2):
    never = [Milestone("10", w("a", "a"), "never reached")]
    with pytest.raises(MilestoneMissedError) as excinfo:
        track_milestones(T2, w("b", "b"), never, max_steps=30, compiled=compiled_t2)
    assert excinfo.value.step == 30
    assert "node 10" in excinfo.value.expected


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
