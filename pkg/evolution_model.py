#!/usr/bin/env python3
"""
ANEPFC Data Model
Symbols, words, evolutionary rules, edge filters, networks and configurations,
plus the single-word semantics every other module builds on.
"""

import json
import logging
from collections import defaultdict, deque
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Set, Tuple, Union

logger = logging.getLogger(__name__)

Symbol = str
Word = Tuple[Symbol, ...]
Configuration = Mapping[str, FrozenSet[Word]]

EMPTY_WORD: Word = ()


class NetworkFormatError(ValueError):
    """Raised when a network document cannot be turned into a Network"""


class InputOutsideAlphabetError(ValueError):
    """Raised when a word uses a symbol that is not in the expected alphabet"""

    def __init__(self, symbols: Iterable[Symbol], alphabet_name: str = "input alphabet"):
        self.symbols = sorted(set(symbols))
        super().__init__(f"symbols outside the {alphabet_name}: {', '.join(self.symbols)}")


class RuleKind(Enum):
    SUBSTITUTION = "substitution"
    DELETION = "deletion"
    INSERTION = "insertion"


class ActionMode(Enum):
    STAR = "*"
    LEFT = "l"
    RIGHT = "r"


class FilterType(Enum):
    STRONG = "s"
    WEAK = "w"


@dataclass(frozen=True, order=True)
class Rule:
    """An evolutionary rule a -> b; None stands for the empty word on either side"""
    source: Optional[Symbol]
    target: Optional[Symbol]

    def __post_init__(self):
        if self.source is None and self.target is None:
            raise ValueError("a rule needs at least one non-empty side")
        if self.source == self.target:
            raise ValueError(f"substitution {self.source} -> {self.target} must change the symbol")

    @classmethod
    def substitution(cls, a: Symbol, b: Symbol) -> "Rule":
        return cls(a, b)

    @classmethod
    def deletion(cls, a: Symbol) -> "Rule":
        return cls(a, None)

    @classmethod
    def insertion(cls, a: Symbol) -> "Rule":
        return cls(None, a)

    @property
    def kind(self) -> RuleKind:
        if self.source is None:
            return RuleKind.INSERTION
        if self.target is None:
            return RuleKind.DELETION
        return RuleKind.SUBSTITUTION

    @property
    def symbols(self) -> Tuple[Symbol, ...]:
        return tuple(s for s in (self.source, self.target) if s is not None)

    def __str__(self):
        return f"{self.source or 'ε'}->{self.target or 'ε'}"


@dataclass(frozen=True)
class EdgeFilter:
    """Random-context filter of an edge: permitting set P, forbidding set F and type β"""
    permitting: FrozenSet[Symbol]
    forbidding: FrozenSet[Symbol]
    filter_type: FilterType = FilterType.WEAK

    @classmethod
    def weak(cls, permitting: Iterable[Symbol], forbidding: Iterable[Symbol] = ()) -> "EdgeFilter":
        return cls(frozenset(permitting), frozenset(forbidding), FilterType.WEAK)

    @classmethod
    def strong(cls, permitting: Iterable[Symbol], forbidding: Iterable[Symbol] = ()) -> "EdgeFilter":
        return cls(frozenset(permitting), frozenset(forbidding), FilterType.STRONG)

    def passes_alphabet(self, alph: FrozenSet[Symbol]) -> bool:
        """Filter predicate on alph(w); a word's membership only depends on its symbol set"""
        if not self.forbidding.isdisjoint(alph):
            return False
        if self.filter_type is FilterType.STRONG:
            return self.permitting <= alph
        return not self.permitting.isdisjoint(alph)


@dataclass(frozen=True)
class ProcessorNode:
    id: str
    rules: FrozenSet[Rule]
    mode: ActionMode
    kind: RuleKind = RuleKind.SUBSTITUTION

    @property
    def rule_kinds(self) -> Set[RuleKind]:
        return {rule.kind for rule in self.rules}


@dataclass(frozen=True)
class Edge:
    a: str
    b: str
    filter: EdgeFilter

    @property
    def key(self) -> FrozenSet[str]:
        return frozenset((self.a, self.b))

    def other(self, node_id: str) -> str:
        return self.b if node_id == self.a else self.a


@dataclass(frozen=True)
class Network:
    """The 9-tuple (V, U, G, R, N, α, β, x_I, x_O); R and α live on the nodes, N and β on the edges"""
    input_alphabet: FrozenSet[Symbol]
    alphabet: FrozenSet[Symbol]
    nodes: Tuple[ProcessorNode, ...]
    edges: Tuple[Edge, ...]
    input_node: str
    output_node: str

    @cached_property
    def node_map(self) -> Dict[str, ProcessorNode]:
        return {node.id: node for node in self.nodes}

    @cached_property
    def incident(self) -> Dict[str, Tuple[Tuple[Edge, str], ...]]:
        """node id -> ((edge, neighbour id), ...) in edge order"""
        table: Dict[str, List[Tuple[Edge, str]]] = defaultdict(list)
        for edge in self.edges:
            if edge.a == edge.b:
                continue
            table[edge.a].append((edge, edge.b))
            table[edge.b].append((edge, edge.a))
        return {node.id: tuple(table.get(node.id, ())) for node in self.nodes}

    @property
    def node_ids(self) -> List[str]:
        return [node.id for node in self.nodes]

    @property
    def size(self) -> int:
        return len(self.nodes)

    def node(self, node_id: str) -> ProcessorNode:
        return self.node_map[node_id]


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    subject: str = ""
    severity: str = "error"

    @property
    def is_error(self) -> bool:
        return self.severity == "error"

    def __str__(self):
        return f"{self.severity.upper()} {self.code}: {self.message}"


# ---------------------------------------------------------------------------
# Single-word semantics
# ---------------------------------------------------------------------------

def alph(word: Word) -> FrozenSet[Symbol]:
    return frozenset(word)


def apply_rule(rule: Rule, mode: ActionMode, word: Word) -> Set[Word]:
    """σ^α(w), enumerating decompositions of w exactly as the definitions state"""
    kind = rule.kind
    a = rule.source
    if kind is RuleKind.SUBSTITUTION:
        # substitution ignores the action mode
        results = {word[:i] + (rule.target,) + word[i + 1:] for i, s in enumerate(word) if s == a}
        return results or {word}
    if kind is RuleKind.DELETION:
        if mode is ActionMode.STAR:
            results = {word[:i] + word[i + 1:] for i, s in enumerate(word) if s == a}
            return results or {word}
        if mode is ActionMode.LEFT:
            return {word[1:]} if word[:1] == (a,) else {word}
        return {word[:-1]} if word[-1:] == (a,) else {word}
    b = rule.target
    if mode is ActionMode.STAR:
        return {word[:i] + (b,) + word[i:] for i in range(len(word) + 1)}
    if mode is ActionMode.LEFT:
        return {(b,) + word}
    return {word + (b,)}


def language_action(rule: Rule, mode: ActionMode, words: Iterable[Word]) -> Set[Word]:
    result: Set[Word] = set()
    for word in words:
        result |= apply_rule(rule, mode, word)
    return result


def apply_ruleset(node: ProcessorNode, words: Iterable[Word]) -> Set[Word]:
    """M^α(L): union over every rule of the node and every word; an empty rule set yields ∅"""
    result: Set[Word] = set()
    for word in words:
        for rule in node.rules:
            result |= apply_rule(rule, node.mode, word)
    return result


def filter_pass(word: Word, edge_filter: EdgeFilter) -> bool:
    return edge_filter.passes_alphabet(frozenset(word))


def filter_language(words: Iterable[Word], edge_filter: EdgeFilter) -> Set[Word]:
    return {word for word in words if filter_pass(word, edge_filter)}


class CompiledRuleSet:
    """
    Indexed form of a node's rules.
    apply(w) returns the same set as apply_ruleset(node, {w}) without
    looping over every rule for every word.
    """

    def __init__(self, node: ProcessorNode):
        self.node_id = node.id
        self.mode = node.mode
        self.empty = not node.rules
        kinds = node.rule_kinds
        self.kind = kinds.pop() if len(kinds) == 1 else None
        self._targets: Dict[Symbol, Tuple[Symbol, ...]] = {}
        grouped: Dict[Symbol, List[Symbol]] = defaultdict(list)
        self._inserted: Tuple[Symbol, ...] = ()
        if self.kind is RuleKind.INSERTION:
            self._inserted = tuple(sorted(rule.target for rule in node.rules))
        elif self.kind is not None:
            for rule in sorted(node.rules, key=str):
                grouped[rule.source].append(rule.target)
            self._targets = {a: tuple(bs) for a, bs in grouped.items()}
        self._sources = frozenset(self._targets)
        self._rules = node.rules

    @property
    def single_end_insertion(self) -> Optional[Symbol]:
        """The inserted symbol when the node is exactly one Left/Right insertion rule"""
        if self.kind is RuleKind.INSERTION and len(self._inserted) == 1 and self.mode is not ActionMode.STAR:
            return self._inserted[0]
        return None

    def apply(self, word: Word) -> FrozenSet[Word]:
        if self.empty:
            return frozenset()
        if self.kind is None:
            # mixed kinds only exist in unvalidated networks; fall back to the definition
            node = ProcessorNode(self.node_id, self._rules, self.mode)
            return frozenset(apply_ruleset(node, (word,)))
        if self.kind is RuleKind.INSERTION:
            return self._insert(word)
        if self.kind is RuleKind.DELETION and self.mode is not ActionMode.STAR:
            return self._delete_at_end(word)
        return self._rewrite_anywhere(word)

    def _insert(self, word: Word) -> FrozenSet[Word]:
        if self.mode is ActionMode.RIGHT:
            return frozenset(word + (b,) for b in self._inserted)
        if self.mode is ActionMode.LEFT:
            return frozenset((b,) + word for b in self._inserted)
        return frozenset(word[:i] + (b,) + word[i:] for b in self._inserted for i in range(len(word) + 1))

    def _delete_at_end(self, word: Word) -> FrozenSet[Word]:
        end = word[0] if self.mode is ActionMode.LEFT and word else word[-1] if word else None
        if end in self._sources:
            shorter = word[1:] if self.mode is ActionMode.LEFT else word[:-1]
            # every other rule is inapplicable and contributes w itself
            return frozenset((shorter, word)) if len(self._sources) > 1 else frozenset((shorter,))
        return frozenset((word,))

    def _rewrite_anywhere(self, word: Word) -> FrozenSet[Word]:
        present = self._sources.intersection(word)
        results: Set[Word] = set()
        if len(present) < len(self._sources):
            results.add(word)
        deleting = self.kind is RuleKind.DELETION
        for a in present:
            targets = self._targets[a]
            i = word.index(a)
            while True:
                if deleting:
                    results.add(word[:i] + word[i + 1:])
                else:
                    head, tail = word[:i], word[i + 1:]
                    for b in targets:
                        results.add(head + (b,) + tail)
                try:
                    i = word.index(a, i + 1)
                except ValueError:
                    break
        return frozenset(results)


def compile_ruleset(node: ProcessorNode) -> CompiledRuleSet:
    return CompiledRuleSet(node)


# ---------------------------------------------------------------------------
# Structural validation
# ---------------------------------------------------------------------------

def _bad_symbol_id(symbol: Symbol) -> bool:
    return not isinstance(symbol, str) or not symbol or any(ch.isspace() for ch in symbol)


def validate_network(net: Network) -> List[Violation]:
    """All well-formedness violations of the network; an empty list means well-formed"""
    violations: List[Violation] = []
    alphabet = net.alphabet

    for symbol in sorted(alphabet, key=str):
        if _bad_symbol_id(symbol):
            violations.append(Violation("bad symbol id", f"symbol id {symbol!r} is empty or contains whitespace", str(symbol)))

    stray_inputs = net.input_alphabet - alphabet
    if stray_inputs:
        violations.append(Violation("input alphabet not in U", f"V is not a subset of U: {', '.join(sorted(stray_inputs))}", "V"))

    seen_ids: Set[str] = set()
    for node in net.nodes:
        if node.id in seen_ids:
            violations.append(Violation("duplicate node", f"node id {node.id} appears more than once", node.id))
        seen_ids.add(node.id)
        kinds = node.rule_kinds
        if len(kinds) > 1:
            names = ", ".join(sorted(k.value for k in kinds))
            violations.append(Violation("mixed rule kinds", f"node {node.id} mixes rule kinds ({names})", node.id))
        elif kinds and node.kind not in kinds:
            (actual,) = kinds
            violations.append(Violation("rule kind mismatch", f"node {node.id} is declared {node.kind.value} but its rules are {actual.value}", node.id))
        for rule in sorted(node.rules, key=str):
            outside = [s for s in rule.symbols if s not in alphabet]
            if outside:
                violations.append(Violation("symbol outside U", f"rule {rule} of node {node.id} uses {', '.join(outside)}", node.id))
        if not node.rules and node.id != net.output_node:
            violations.append(Violation("empty rule set", f"node {node.id} has no rules and erases every word it evolves", node.id, "warning"))

    for label, node_id in (("input", net.input_node), ("output", net.output_node)):
        if node_id not in seen_ids:
            violations.append(Violation(f"missing {label} node", f"{label} node {node_id} is not a node of the network", node_id))

    seen_edges: Set[FrozenSet[str]] = set()
    for edge in net.edges:
        subject = f"{{{edge.a},{edge.b}}}"
        if edge.a == edge.b:
            violations.append(Violation("self-loop", f"edge {subject} connects a node to itself", subject))
        if edge.key in seen_edges:
            violations.append(Violation("duplicate edge", f"edge {subject} appears more than once", subject))
        seen_edges.add(edge.key)
        for end in (edge.a, edge.b):
            if end not in seen_ids:
                violations.append(Violation("unknown edge end", f"edge {subject} refers to unknown node {end}", subject))
        both = edge.filter.permitting & edge.filter.forbidding
        if both:
            violations.append(Violation("filter sets not disjoint", f"edge {subject} has {', '.join(sorted(both))} in both P and F", subject))
        outside = (edge.filter.permitting | edge.filter.forbidding) - alphabet
        if outside:
            violations.append(Violation("symbol outside U", f"filter of edge {subject} uses {', '.join(sorted(outside))}", subject))

    if net.input_node in seen_ids:
        reached = {net.input_node}
        queue = deque([net.input_node])
        while queue:
            current = queue.popleft()
            for _, neighbour in net.incident.get(current, ()):
                if neighbour not in reached:
                    reached.add(neighbour)
                    queue.append(neighbour)
        for node in net.nodes:
            if node.id not in reached:
                violations.append(Violation("unreachable node", f"node {node.id} cannot be reached from the input node", node.id, "warning"))

    return violations


def errors_only(violations: Iterable[Violation]) -> List[Violation]:
    return [v for v in violations if v.is_error]


# ---------------------------------------------------------------------------
# Words and documents
# ---------------------------------------------------------------------------

def render_word(word: Word) -> str:
    return " ".join(word)


def parse_word(text: str, alphabet: Iterable[Symbol], alphabet_name: str = "input alphabet") -> Word:
    """
    Parse the command-line word syntax.
    Whitespace-separated ids; a word without whitespace is read one character per
    symbol only when every id of the alphabet is a single character.
    """
    alphabet = frozenset(alphabet)
    text = text.strip()
    if not text:
        return EMPTY_WORD
    if any(ch.isspace() for ch in text):
        word = tuple(text.split())
    elif alphabet and all(len(s) == 1 for s in alphabet):
        word = tuple(text)
    else:
        word = (text,)
    outside = [s for s in word if s not in alphabet]
    if outside:
        raise InputOutsideAlphabetError(outside, alphabet_name)
    return word


def _symbol_list(raw, what: str) -> List[Symbol]:
    if not isinstance(raw, list) or not all(isinstance(s, str) for s in raw):
        raise NetworkFormatError(f"{what} must be an array of strings")
    return list(raw)


def network_from_dict(data: Mapping) -> Network:
    try:
        nodes = []
        for raw in data["nodes"]:
            kind = RuleKind(raw.get("kind", "substitution"))
            rules = frozenset(Rule(r.get("from"), r.get("to")) for r in raw.get("rules", []))
            nodes.append(ProcessorNode(str(raw["id"]), rules, ActionMode(raw.get("mode", "*")), kind))
        edges = []
        for raw in data["edges"]:
            edge_filter = EdgeFilter(
                frozenset(_symbol_list(raw.get("P", []), "P")),
                frozenset(_symbol_list(raw.get("F", []), "F")),
                FilterType(raw.get("beta", "w")),
            )
            edges.append(Edge(str(raw["a"]), str(raw["b"]), edge_filter))
        return Network(
            input_alphabet=frozenset(_symbol_list(data["inputAlphabet"], "inputAlphabet")),
            alphabet=frozenset(_symbol_list(data["networkAlphabet"], "networkAlphabet")),
            nodes=tuple(nodes),
            edges=tuple(edges),
            input_node=str(data["input"]),
            output_node=str(data["output"]),
        )
    except KeyError as e:
        raise NetworkFormatError(f"network document is missing field {e}") from e
    except (TypeError, AttributeError) as e:
        raise NetworkFormatError(f"network document is malformed: {e}") from e
    except ValueError as e:
        if isinstance(e, NetworkFormatError):
            raise
        raise NetworkFormatError(f"network document is malformed: {e}") from e


def network_to_dict(net: Network) -> Dict:
    """Canonical document: every array sorted so the serialization is byte-stable"""
    nodes = []
    for node in sorted(net.nodes, key=lambda n: n.id):
        rules = sorted(({"from": r.source, "to": r.target} for r in node.rules),
                       key=lambda r: (r["from"] or "", r["to"] or ""))
        nodes.append({"id": node.id, "kind": node.kind.value, "mode": node.mode.value, "rules": rules})
    edges = []
    for edge in net.edges:
        a, b = sorted((edge.a, edge.b))
        edges.append({
            "a": a,
            "b": b,
            "beta": edge.filter.filter_type.value,
            "P": sorted(edge.filter.permitting),
            "F": sorted(edge.filter.forbidding),
        })
    edges.sort(key=lambda e: (e["a"], e["b"]))
    return {
        "inputAlphabet": sorted(net.input_alphabet),
        "networkAlphabet": sorted(net.alphabet),
        "nodes": nodes,
        "edges": edges,
        "input": net.input_node,
        "output": net.output_node,
    }


def canonical_json(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def load_network(source: Union[str, Path, Mapping]) -> Network:
    if isinstance(source, Mapping):
        return network_from_dict(source)
    try:
        with open(source, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise NetworkFormatError(f"{source} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise NetworkFormatError(f"{source} does not hold a JSON object")
    net = network_from_dict(data)
    logger.info(f"Loaded network {source}: {net.size} nodes, {len(net.edges)} edges, {len(net.alphabet)} symbols")
    return net


def dump_network(net: Network, path: Union[str, Path]):
    with open(path, "w", encoding="utf-8") as f:
        f.write(canonical_json(network_to_dict(net)))
