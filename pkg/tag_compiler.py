#!/usr/bin/env python3
"""
Tag System Compiler
Builds the complete 10-node ANEPFC that accepts exactly the words a restricted
2-tag system halts on, together with a provenance record of every node and edge.
"""

import itertools
import logging
from collections import Counter
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

from evolution_model import (
    ActionMode,
    Edge,
    EdgeFilter,
    Network,
    ProcessorNode,
    Rule,
    RuleKind,
    Symbol,
    Violation,
    Word,
    errors_only,
    validate_network,
)
from tag_system import TagSystem, validate_tag

logger = logging.getLogger(__name__)

A0 = "_0"
RESERVED_CHARACTERS = frozenset(".[]<>'^$#")

NODE_IDS = tuple(str(i) for i in range(1, 11))
INPUT_NODE = "1"
OUTPUT_NODE = "10"


class InvalidTagSystemError(ValueError):
    """compile refused the tag system; carries the violations that caused it"""

    def __init__(self, violations: List[Violation]):
        self.violations = list(violations)
        details = "; ".join(str(v) for v in self.violations)
        super().__init__(f"invalid tag system: {details}")


class SymbolScheme:
    """
    Injective rendering of the construction's structured symbols.
    Bracket contents are tuples over V ∪ {a_0}, with a_0 rendered as "_0".
    """

    def __init__(self, t: TagSystem):
        self.t = t
        self.plain: Tuple[Symbol, ...] = t.alphabet
        self.non_halting: Tuple[Symbol, ...] = t.non_halting
        self.halt: Symbol = t.halt
        # a_0, a_1, ..., a_{n+1}
        self.indexed: Tuple[Symbol, ...] = (A0,) + t.alphabet
        self.dollar = "$"
        self.hash = "#"

    def a(self, k: int) -> Symbol:
        return self.indexed[k]

    @staticmethod
    def prime(symbol: Symbol) -> Symbol:
        return symbol + "'"

    @staticmethod
    def double_prime(symbol: Symbol) -> Symbol:
        return symbol + "''"

    @staticmethod
    def circle(symbol: Symbol) -> Symbol:
        return symbol + "^o"

    @staticmethod
    def square(content: Word) -> Symbol:
        return "[" + ".".join(content) + "]"

    @staticmethod
    def angle(content: Word) -> Symbol:
        return "<" + ".".join(content) + ">"

    @staticmethod
    def double_angle(content: Word) -> Symbol:
        return "<<" + ".".join(content) + ">>"

    @property
    def marked_a0(self) -> Symbol:
        return self.double_angle((A0,)) + "'"

    @property
    def primed_base(self) -> Tuple[Symbol, ...]:
        """Symbols that carry primes: a_0 and V'"""
        return (A0,) + self.non_halting


def scheme_violations(t: TagSystem) -> List[Violation]:
    violations = []
    for symbol in t.alphabet:
        if symbol == A0:
            violations.append(Violation("reserved symbol", f"{A0} names the construction's a_0 and cannot be a tag symbol", symbol))
        used = sorted(set(symbol) & RESERVED_CHARACTERS)
        if used:
            violations.append(Violation("reserved character", f"symbol {symbol} uses {' '.join(used)}, reserved by the network symbol naming", symbol))
    return violations


def enumerate_X(t: TagSystem) -> List[Word]:
    """All words over V ∪ {a_0} of length at most maxlen, ε included, shortest first"""
    base = (A0,) + t.alphabet
    words: List[Word] = []
    for length in range(t.max_production_length + 1):
        words.extend(itertools.product(base, repeat=length))
    return words


def _starts_with_a0(content: Word) -> bool:
    return bool(content) and content[0] == A0


@dataclass
class CompiledNetwork:
    network: Network
    provenance: Dict

    @property
    def symbol_count(self) -> int:
        return len(self.network.alphabet)

    def summary(self) -> str:
        return f"nodes={self.network.size} edges={len(self.network.edges)} symbols={self.symbol_count}"


def reachable_contents(t: TagSystem) -> Tuple[Set[Word], Set[Word], Set[Word]]:
    """
    Bracket contents reachable from {[φ(a)]} through the node-4 decrement and
    node-5 promotion rules, as (square, angle, double-angle) content sets.
    """
    index = {s: k for k, s in enumerate((A0,) + t.alphabet)}

    def decrement(content: Word) -> Optional[Word]:
        if content and content[0] != A0:
            return ((A0,) + t.alphabet)[index[content[0]] - 1:index[content[0]]] + content[1:]
        if len(content) >= 2 and content[0] == A0 and content[1] != A0:
            k = index[content[1]]
            return ((A0,) + t.alphabet)[k - 1:k] + content[2:]
        return None

    square = {t.production(a) for a in t.non_halting}
    angle: Set[Word] = set()
    double: Set[Word] = set()
    pending = [decrement(c) for c in square]
    while pending:
        content = pending.pop()
        if content is None or content in angle:
            continue
        angle.add(content)
        double.add(content)
        pending.append(decrement(content))
    return square, angle, double


class TagCompiler:
    """Emits the nodes and edges of the network for one tag system"""

    def __init__(self, t: TagSystem, prune_reachable: bool = False):
        self.t = t
        self.s = SymbolScheme(t)
        self.prune_reachable = prune_reachable
        self.X = enumerate_X(t)
        self.X_set = frozenset(self.X)
        if prune_reachable:
            square, angle, double = reachable_contents(t)
        else:
            square = angle = double = set(self.X)
        self.square_contents = frozenset(square)
        self.angle_contents = frozenset(angle)
        self.double_contents = frozenset(double)

    # -- alphabet ----------------------------------------------------------

    def bracket_symbols(self) -> Tuple[Set[Symbol], Set[Symbol], Set[Symbol]]:
        s = self.s
        return (
            {s.square(x) for x in self.X if x in self.square_contents},
            {s.angle(x) for x in self.X if x in self.angle_contents},
            {s.double_angle(x) for x in self.X if x in self.double_contents},
        )

    def working_alphabet(self) -> FrozenSet[Symbol]:
        s = self.s
        generated: List[Symbol] = list(s.plain)
        generated += [s.dollar, s.hash, s.marked_a0]
        for a in s.primed_base:
            generated += [s.prime(a), s.double_prime(a)]
        generated += [s.circle(a) for a in s.non_halting]
        for family in self.bracket_symbols():
            generated += sorted(family)
        symbols = set(generated)
        if len(symbols) != len(generated):
            clashes = sorted(symbol for symbol, count in Counter(generated).items() if count > 1)
            raise InvalidTagSystemError([Violation("symbol collision", f"{symbol} names two constructed symbols", symbol) for symbol in clashes])
        # ≺a_0≻ is referenced by edge filters even when pruning drops its content
        symbols.add(s.double_angle((A0,)))
        return frozenset(symbols)

    # -- nodes -------------------------------------------------------------

    def node_1(self) -> ProcessorNode:
        s = self.s
        rules = set()
        for a in s.non_halting:
            rules.add(Rule.substitution(a, s.square(self.t.production(a))))
            rules.add(Rule.substitution(a, s.circle(a)))
        return ProcessorNode("1", frozenset(rules), ActionMode.STAR, RuleKind.SUBSTITUTION)

    def node_4(self) -> ProcessorNode:
        s = self.s
        n = self.t.n
        rules = {Rule.substitution(s.prime(s.a(k)), s.double_prime(s.a(k))) for k in range(0, n + 1)}
        for x in self.X:
            for k in range(1, n + 2):
                content = (s.a(k),) + x
                lowered = (s.a(k - 1),) + x
                if content not in self.X_set:
                    continue
                target = s.angle(lowered)
                if content in self.square_contents and lowered in self.angle_contents:
                    rules.add(Rule.substitution(s.square(content), target))
                if content in self.double_contents and lowered in self.angle_contents:
                    rules.add(Rule.substitution(s.double_angle(content), target))
                prefixed = (A0,) + content
                if prefixed in self.X_set and prefixed in self.double_contents and lowered in self.angle_contents:
                    rules.add(Rule.substitution(s.double_angle(prefixed), target))
        return ProcessorNode("4", frozenset(rules), ActionMode.STAR, RuleKind.SUBSTITUTION)

    def node_5(self) -> ProcessorNode:
        s = self.s
        n = self.t.n
        rules = set()
        for k in range(1, n + 1):
            rules.add(Rule.substitution(s.double_prime(s.a(k - 1)), s.prime(s.a(k))))
        for k in range(1, n + 2):
            rules.add(Rule.substitution(s.double_prime(s.a(k - 1)), s.a(k)))
        for x in self.X:
            if x in self.angle_contents and x in self.double_contents:
                rules.add(Rule.substitution(s.angle(x), s.double_angle(x)))
        return ProcessorNode("5", frozenset(rules), ActionMode.STAR, RuleKind.SUBSTITUTION)

    def nodes(self) -> Tuple[ProcessorNode, ...]:
        s = self.s
        a0_block = s.double_angle((A0,))
        return (
            self.node_1(),
            ProcessorNode("2", frozenset({Rule.insertion(s.prime(A0))}), ActionMode.RIGHT, RuleKind.INSERTION),
            ProcessorNode("3", frozenset({Rule.insertion(s.dollar)}), ActionMode.RIGHT, RuleKind.INSERTION),
            self.node_4(),
            self.node_5(),
            ProcessorNode("6", frozenset({Rule.deletion(s.dollar)}), ActionMode.RIGHT, RuleKind.DELETION),
            ProcessorNode("7", frozenset({Rule.substitution(a0_block, s.marked_a0)}), ActionMode.STAR, RuleKind.SUBSTITUTION),
            ProcessorNode("8", frozenset({Rule.deletion(s.marked_a0)}), ActionMode.LEFT, RuleKind.DELETION),
            ProcessorNode("9", frozenset(Rule.deletion(s.circle(a)) for a in s.non_halting), ActionMode.LEFT, RuleKind.DELETION),
            ProcessorNode("10", frozenset(), ActionMode.STAR, RuleKind.SUBSTITUTION),
        )

    # -- edges -------------------------------------------------------------

    def edges(self, alphabet: FrozenSet[Symbol]) -> Tuple[Edge, ...]:
        s = self.s
        squares, angles, doubles = self.bracket_symbols()
        doubles.add(s.double_angle((A0,)))
        a0_block = s.double_angle((A0,))
        circles = {s.circle(a) for a in s.non_halting}
        primes = {s.prime(a) for a in s.primed_base}
        double_primes = {s.double_prime(a) for a in s.primed_base}
        a0_prefixed = {s.double_angle(x) for x in self.X if _starts_with_a0(x) and x in self.double_contents} | {a0_block}
        a0_extended = {s.double_angle(x) for x in self.X if _starts_with_a0(x) and len(x) > 1 and x in self.double_contents}
        other_doubles = doubles - a0_prefixed
        beyond_v = alphabet - set(s.plain)
        productions = {s.square(self.t.production(a)) for a in s.non_halting}

        def weak(a: str, b: str, permitting: Iterable[Symbol], forbidding: Iterable[Symbol]) -> Edge:
            return Edge(a, b, EdgeFilter.weak(permitting, forbidding))

        return (
            weak("1", "2", circles, primes | {s.halt}),
            weak("2", "3", productions | a0_extended, {s.dollar, a0_block}),
            weak("3", "4", {s.dollar}, {a0_block} | angles | double_primes),
            weak("4", "5", double_primes, squares | doubles),
            weak("5", "6", doubles, double_primes | squares | angles),
            weak("6", "2", a0_extended, {s.dollar} | primes | squares | angles | other_doubles),
            weak("6", "3", other_doubles, {s.dollar} | squares | angles | a0_prefixed),
            weak("6", "7", {a0_block}, {s.dollar} | (doubles - {a0_block}) | squares | angles),
            weak("7", "8", {s.marked_a0}, {a0_block}),
            weak("7", "3", {a0_block}, {s.dollar}),
            weak("8", "9", circles, {s.marked_a0}),
            weak("9", "10", {s.halt}, beyond_v),
            weak("9", "1", set(s.non_halting), {s.halt} | beyond_v),
        )

    # -- provenance --------------------------------------------------------

    def provenance(self) -> Dict:
        return {
            "nodes": {
                "1": "substitution, *: a -> [phi(a)] and a -> a^o for every a in V'; input node",
                "2": "insertion, r: eps -> _0' (starts the index counter)",
                "3": "insertion, r: eps -> $ (marks one decrement round)",
                "4": "substitution, *: a_k' -> a_k'', [a_k x] -> <a_{k-1} x>, <<a_k x>> -> <a_{k-1} x>, <<_0 a_k x>> -> <a_{k-1} x>",
                "5": "substitution, *: a_{k-1}'' -> a_k', a_{k-1}'' -> a_k, <x> -> <<x>>",
                "6": "deletion, r: $ -> eps",
                "7": "substitution, *: <<_0>> -> <<_0>>'",
                "8": "deletion, l: <<_0>>' -> eps",
                "9": "deletion, l: a^o -> eps for every a in V'",
                "10": "output node, no rules",
            },
            "edges": {
                "{1,2}": "circled symbol present; no primed symbol and no H",
                "{2,3}": "a fresh [phi(a)] or a pending <<_0 x>> (x non-empty); no $ and no <<_0>>",
                "{3,4}": "$ present; no <<_0>>, no <x>, no double prime",
                "{4,5}": "double prime present; no [x] and no <<x>>",
                "{5,6}": "<<x>> present; no double prime, no [x], no <x>",
                "{6,2}": "<<_0 x>> with x non-empty; no $, no single-primed symbol, no [x], no <x>, no <<x>> outside the _0 family",
                "{6,3}": "<<x>> with x not starting with _0; no $, no [x], no <x>, no <<_0 y>>",
                "{6,7}": "<<_0>> present; no $, no other <<x>>, no [x], no <x>",
                "{7,8}": "<<_0>>' present; no <<_0>>",
                "{7,3}": "<<_0>> still present; no $",
                "{8,9}": "circled symbol present; no <<_0>>'",
                "{9,10}": "H present; only symbols of V",
                "{9,1}": "a symbol of V' present; only symbols of V' (no H)",
            },
            "resolutions": [
                "{9,1}: P = V \\ {H} and F = {H} u (U \\ V) so that P and F are disjoint; behaviour under the weak filter is unchanged",
                "{1,2}: the primed forbidding family ranges over _0 and V', the symbols that carry primes",
                "{2,3}: P also admits <<_0 x>> with x non-empty so that a decremented block re-enters the counting loop through node 3; F of {6,2} then forbids every single-primed symbol, so a counter still being raised cannot follow that block",
            ],
            "symbols": {
                "#": "declared, never used",
                "_0": "a_0, the counter base below a_1",
            },
            "brackets": "reachable from [phi(a)]" if self.prune_reachable else "every content in X",
        }

    def build(self) -> CompiledNetwork:
        alphabet = self.working_alphabet()
        network = Network(
            input_alphabet=frozenset(self.s.non_halting),
            alphabet=alphabet,
            nodes=self.nodes(),
            edges=self.edges(alphabet),
            input_node=INPUT_NODE,
            output_node=OUTPUT_NODE,
        )
        return CompiledNetwork(network, self.provenance())


def compile_tag_system(t: TagSystem, prune_reachable: bool = False) -> CompiledNetwork:
    problems = errors_only(validate_tag(t)) + scheme_violations(t)
    if problems:
        raise InvalidTagSystemError(problems)

    compiled = TagCompiler(t, prune_reachable).build()
    violations = errors_only(validate_network(compiled.network))
    if violations:
        # the construction only emits well-formed networks for valid tag systems
        raise InvalidTagSystemError(violations)

    logger.info(f"Compiled tag system over {' '.join(t.alphabet)}: {compiled.summary()}")
    return compiled


def to_dot(net: Network) -> str:
    """Graphviz description of the topology"""
    lines = ["graph anepfc {", "  node [shape=box];"]
    for node in sorted(net.nodes, key=lambda n: int(n.id) if n.id.isdigit() else n.id):
        shape = ""
        if node.id == net.input_node:
            shape = ", peripheries=2"
        elif node.id == net.output_node:
            shape = ", shape=doublecircle"
        label = f"{node.id}\\n{node.kind.value} {node.mode.value}\\n{len(node.rules)} rules"
        lines.append(f'  "{node.id}" [label="{label}"{shape}];')
    for edge in net.edges:
        f = edge.filter
        label = f"{f.filter_type.value} |P|={len(f.permitting)} |F|={len(f.forbidding)}"
        lines.append(f'  "{edge.a}" -- "{edge.b}" [label="{label}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
