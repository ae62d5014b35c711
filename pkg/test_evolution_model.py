#!/usr/bin/env python3
"""Tests for rule semantics, filters, validation and the network document format"""

import itertools
import json
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from evolution_model import (
    ActionMode,
    Edge,
    EdgeFilter,
    InputOutsideAlphabetError,
    Network,
    NetworkFormatError,
    ProcessorNode,
    Rule,
    RuleKind,
    apply_rule,
    apply_ruleset,
    compile_ruleset,
    dump_network,
    filter_language,
    filter_pass,
    language_action,
    load_network,
    network_to_dict,
    parse_word,
    render_word,
    validate_network,
)

CORPUS = Path(__file__).parent / "test_corpus"


def w(text):
    """Single-character shorthand for test words"""
    return tuple(text)


def words_up_to(alphabet, length):
    for n in range(length + 1):
        yield from itertools.product(alphabet, repeat=n)


def decomposition_oracle(rule, mode, word, candidates):
    """σ^α(w) straight from the definitions: every x with w = u a v and x = u b v"""
    a = (rule.source,) if rule.source is not None else ()
    b = (rule.target,) if rule.target is not None else ()
    found = set()
    for x in candidates:
        for i in range(len(word) + 1):
            u = word[:i]
            if word[i:i + len(a)] != a:
                continue
            v = word[i + len(a):]
            if rule.kind is RuleKind.DELETION and mode is ActionMode.LEFT and u:
                continue
            if rule.kind is not RuleKind.SUBSTITUTION and mode is ActionMode.RIGHT and v:
                continue
            if rule.kind is RuleKind.INSERTION and mode is ActionMode.LEFT and u:
                continue
            if x == u + b + v:
                found.add(x)
    if not found and rule.kind is not RuleKind.INSERTION:
        found.add(word)
    return found


SMALL_RULES = [
    Rule.substitution("x", "y"),
    Rule.substitution("y", "x"),
    Rule.deletion("x"),
    Rule.deletion("y"),
    Rule.insertion("x"),
    Rule.insertion("y"),
]


def test_apply_rule_matches_decomposition_oracle():
    candidates = list(words_up_to("xy", 5))
    cases = 0
    for rule in SMALL_RULES:
        for mode in ActionMode:
            for word in words_up_to("xy", 4):
                assert apply_rule(rule, mode, word) == decomposition_oracle(rule, mode, word, candidates), \
                    f"{rule} {mode.value} on {''.join(word)}"
                cases += 1
    assert cases == 6 * 3 * 31


def test_apply_rule_examples():
    assert apply_rule(Rule.substitution("a", "b"), ActionMode.STAR, w("aba")) == {w("bba"), w("abb")}
    assert apply_rule(Rule.substitution("a", "b"), ActionMode.STAR, w("bbb")) == {w("bbb")}
    assert apply_rule(Rule.deletion("a"), ActionMode.RIGHT, w("baa")) == {w("ba")}
    assert apply_rule(Rule.deletion("a"), ActionMode.RIGHT, w("ab")) == {w("ab")}
    assert apply_rule(Rule.insertion("$"), ActionMode.RIGHT, w("ab")) == {w("ab$")}
    assert apply_rule(Rule.deletion("a"), ActionMode.STAR, w("aa")) == {w("a")}


def test_substitution_ignores_mode():
    rule = Rule.substitution("a", "b")
    for mode in ActionMode:
        assert apply_rule(rule, mode, w("aca")) == {w("bca"), w("acb")}


def test_insertion_star_covers_every_position():
    assert apply_rule(Rule.insertion("$"), ActionMode.STAR, w("ab")) == {w("$ab"), w("a$b"), w("ab$")}
    assert apply_rule(Rule.insertion("$"), ActionMode.STAR, ()) == {w("$")}
    assert apply_rule(Rule.insertion("$"), ActionMode.LEFT, w("ab")) == {w("$ab")}


def test_rule_rejects_identity_and_empty():
    with pytest.raises(ValueError):
        Rule.substitution("a", "a")
    with pytest.raises(ValueError):
        Rule(None, None)


def test_apply_ruleset_union_and_empty():
    node = ProcessorNode("1", frozenset({
        Rule.substitution("a", "[bb]"),
        Rule.substitution("a", "a^o"),
        Rule.substitution("b", "[H]"),
        Rule.substitution("b", "b^o"),
    }), ActionMode.STAR)
    assert apply_ruleset(node, {w("ab")}) == {
        ("[bb]", "b"), ("a^o", "b"), ("a", "[H]"), ("a", "b^o"),
    }
    assert apply_ruleset(ProcessorNode("2", frozenset(), ActionMode.STAR), {w("w")}) == set()
    inapplicable = ProcessorNode("3", frozenset({Rule.substitution("x", "y")}), ActionMode.STAR)
    assert apply_ruleset(inapplicable, {w("zz")}) == {w("zz")}


def test_language_action_is_union_of_word_results():
    rule = Rule.deletion("a")
    assert language_action(rule, ActionMode.LEFT, [w("ab"), w("ba"), ()]) == {w("b"), w("ba"), ()}


def test_filter_examples():
    weak = EdgeFilter.weak({"p"}, {"f"})
    assert filter_pass(w("pq"), weak)
    assert not filter_pass(w("pf"), weak)
    assert not filter_pass((), weak)
    strong = EdgeFilter.strong({"p", "q"})
    assert not filter_pass(w("pr"), strong)
    assert filter_pass(w("qp"), strong)
    assert filter_pass((), EdgeFilter.strong(()))
    assert filter_language([w("pq"), w("pf"), w("q")], weak) == {w("pq")}


symbols = st.sampled_from("abc")
small_words = st.lists(symbols, max_size=5).map(tuple)


@st.composite
def nodes(draw):
    kind = draw(st.sampled_from(list(RuleKind)))
    mode = draw(st.sampled_from(list(ActionMode)))
    count = draw(st.integers(0, 4))
    rules = set()
    for _ in range(count):
        a, b = draw(symbols), draw(symbols)
        if kind is RuleKind.SUBSTITUTION:
            if a != b:
                rules.add(Rule.substitution(a, b))
        elif kind is RuleKind.DELETION:
            rules.add(Rule.deletion(a))
        else:
            rules.add(Rule.insertion(a))
    return ProcessorNode("n", frozenset(rules), mode, kind)


@given(nodes(), small_words)
@settings(max_examples=400, deadline=None)
def test_compiled_ruleset_agrees_with_definition(node, word):
    assert compile_ruleset(node).apply(word) == apply_ruleset(node, {word})


@given(nodes(), st.lists(small_words, max_size=4), st.lists(small_words, max_size=4))
@settings(max_examples=200, deadline=None)
def test_apply_ruleset_distributes_over_union(node, left, right):
    assert apply_ruleset(node, set(left) | set(right)) == apply_ruleset(node, set(left)) | apply_ruleset(node, set(right))


@given(st.sampled_from(SMALL_RULES), st.sampled_from([ActionMode.LEFT, ActionMode.RIGHT]),
       st.lists(st.sampled_from("xy"), max_size=6).map(tuple))
@settings(max_examples=200, deadline=None)
def test_end_modes_yield_one_word_for_deletion_and_insertion(rule, mode, word):
    if rule.kind is RuleKind.SUBSTITUTION:
        return
    assert len(apply_rule(rule, mode, word)) == 1


@given(st.sampled_from(SMALL_RULES), st.sampled_from(list(ActionMode)), st.lists(st.sampled_from("xy"), max_size=6).map(tuple))
@settings(max_examples=300, deadline=None)
def test_word_survives_exactly_when_rule_is_inapplicable(rule, mode, word):
    result = apply_rule(rule, mode, word)
    if rule.kind is RuleKind.INSERTION:
        assert word not in result
        return
    assert len(result) <= len(word) + 1
    if mode is ActionMode.STAR or rule.kind is RuleKind.SUBSTITUTION:
        applicable = rule.source in word
    elif mode is ActionMode.LEFT:
        applicable = word[:1] == (rule.source,)
    else:
        applicable = word[-1:] == (rule.source,)
    assert (word in result) == (not applicable)


@given(st.sets(symbols, max_size=2), st.sets(symbols, max_size=2), small_words, symbols)
@settings(max_examples=300, deadline=None)
def test_weak_filter_monotonicity(permitting, forbidding, word, extra):
    forbidding = forbidding - permitting
    f = EdgeFilter.weak(permitting, forbidding)
    extended = word + (extra,)
    if extra in forbidding:
        assert not filter_pass(extended, f) or filter_pass(word, f)
    if extra in permitting and not set(word) & forbidding and filter_pass(word, f):
        assert filter_pass(extended, f)


def two_node_network(**changes):
    fields = dict(
        input_alphabet=frozenset({"x", "z"}),
        alphabet=frozenset({"x", "y", "z"}),
        nodes=(
            ProcessorNode("1", frozenset({Rule.substitution("x", "y")}), ActionMode.STAR),
            ProcessorNode("2", frozenset(), ActionMode.STAR),
        ),
        edges=(Edge("1", "2", EdgeFilter.weak({"y"})),),
        input_node="1",
        output_node="2",
    )
    fields.update(changes)
    return Network(**fields)


def codes(violations):
    return {v.code for v in violations}


def test_well_formed_network_has_no_violations():
    assert validate_network(two_node_network()) == []


def test_validation_reports_structural_errors():
    net = two_node_network(edges=(
        Edge("1", "2", EdgeFilter.weak({"y"}, {"y"})),
        Edge("2", "1", EdgeFilter.weak({"x"})),
        Edge("1", "1", EdgeFilter.weak({"x"})),
        Edge("1", "3", EdgeFilter.weak({"q"})),
    ), output_node="9")
    found = codes(validate_network(net))
    assert {"filter sets not disjoint", "duplicate edge", "self-loop", "unknown edge end",
            "symbol outside U", "missing output node"} <= found


def test_validation_reports_mixed_kinds_and_input_alphabet():
    mixed = ProcessorNode("1", frozenset({Rule.substitution("x", "y"), Rule.deletion("z")}), ActionMode.STAR)
    net = two_node_network(nodes=(mixed, ProcessorNode("2", frozenset(), ActionMode.STAR)),
                           input_alphabet=frozenset({"x", "w"}))
    found = codes(validate_network(net))
    assert "mixed rule kinds" in found
    assert "rule kind mismatch" not in found
    assert "input alphabet not in U" in found


def test_validation_reports_declared_kind_mismatch():
    deleting = ProcessorNode("1", frozenset({Rule.deletion("x")}), ActionMode.STAR, RuleKind.SUBSTITUTION)
    net = two_node_network(nodes=(deleting, ProcessorNode("2", frozenset(), ActionMode.STAR)))
    found = codes(validate_network(net))
    assert "rule kind mismatch" in found
    assert "mixed rule kinds" not in found


def test_validation_warnings():
    net = two_node_network(nodes=(
        ProcessorNode("1", frozenset({Rule.substitution("x", "y")}), ActionMode.STAR),
        ProcessorNode("2", frozenset(), ActionMode.STAR),
        ProcessorNode("3", frozenset(), ActionMode.STAR),
    ))
    violations = validate_network(net)
    assert all(not v.is_error for v in violations)
    assert codes(violations) == {"empty rule set", "unreachable node"}


def test_parse_word():
    assert parse_word("ab", {"a", "b"}) == w("ab")
    assert parse_word("a b", {"a", "b"}) == w("ab")
    assert parse_word("", {"a"}) == ()
    assert parse_word("_0' b^o", {"_0'", "b^o"}) == ("_0'", "b^o")
    with pytest.raises(InputOutsideAlphabetError):
        parse_word("ac", {"a", "b"})
    assert render_word(("[b.b]", "b^o")) == "[b.b] b^o"


def test_network_document_is_canonical(tmp_path):
    net = load_network(CORPUS / "two_node.json")
    assert net.input_node == "1" and net.output_node == "2"
    first = tmp_path / "first.json"
    second = tmp_path / "second.json"
    dump_network(net, first)
    dump_network(load_network(first), second)
    assert first.read_bytes() == second.read_bytes()
    assert load_network(network_to_dict(net)) == net


def test_malformed_documents_raise_format_error(tmp_path):
    with pytest.raises(NetworkFormatError):
        load_network({"nodes": []})
    with pytest.raises(NetworkFormatError):
        load_network({"inputAlphabet": [], "networkAlphabet": [], "input": "1", "output": "1",
                      "edges": [], "nodes": [{"id": "1", "mode": "x", "rules": []}]})
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    with pytest.raises(NetworkFormatError):
        load_network(broken)
    listed = tmp_path / "list.json"
    listed.write_text(json.dumps([1, 2]))
    with pytest.raises(NetworkFormatError):
        load_network(listed)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
