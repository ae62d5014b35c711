#!/usr/bin/env python3
"""
Universality Verification Harness
Cross-checks compiled networks against the tag-system oracle, generates word
corpora and seeded random tag systems, keeps golden step counts and follows
the intermediate strings of one simulated tag step through the network.
"""

import itertools
import json
import logging
import random
import string
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from evolution_model import Word, canonical_json, render_word
from network_engine import Outcome, OutcomeKind, StepBudget, TraceLevel, run
from tag_compiler import A0, CompiledNetwork, SymbolScheme, compile_tag_system
from tag_system import TagOutcome, TagSystem, find_tag_cycle, run_tag

logger = logging.getLogger(__name__)

# one simulated tag iteration takes at least this many network steps
MIN_STEPS_PER_ITERATION = 12
MISMATCH_BUDGET_FACTOR = 10


def word_corpus(t: TagSystem, max_len: int) -> List[Word]:
    """Words over V' with 2 <= |w| <= max_len, shortest first, each length in alphabet order"""
    if max_len < 2:
        raise ValueError(f"corpus words need length at least 2, got max_len={max_len}")
    words: List[Word] = []
    for length in range(2, max_len + 1):
        words.extend(itertools.product(t.non_halting, repeat=length))
    return words


# ---------------------------------------------------------------------------
# Random systems
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeneratorSpec:
    seed: int
    alphabet_size: int = 2
    max_production_length: int = 3

    def __post_init__(self):
        if not 1 <= self.alphabet_size <= len(string.ascii_lowercase):
            raise ValueError(f"alphabet_size must be between 1 and {len(string.ascii_lowercase)}")
        if self.max_production_length < 2:
            raise ValueError("max_production_length must be at least 2")


def random_tag_system(spec: GeneratorSpec) -> TagSystem:
    """A restricted 2-tag system drawn deterministically from spec.seed"""
    rng = random.Random(spec.seed)
    non_halting = tuple(string.ascii_lowercase[:spec.alphabet_size])
    alphabet = non_halting + ("H",)
    halting_source = rng.choice(non_halting)
    productions = {}
    for symbol in non_halting:
        if symbol == halting_source:
            productions[symbol] = ("H",)
            continue
        length = rng.randint(2, spec.max_production_length)
        productions[symbol] = tuple(rng.choice(alphabet) for _ in range(length))
    return TagSystem.build(alphabet, productions)


# ---------------------------------------------------------------------------
# Equivalence
# ---------------------------------------------------------------------------

class Verdict(Enum):
    CONSISTENT = "consistent"
    MISMATCH = "mismatch"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class WordRecord:
    word: Word
    tag: TagOutcome
    network: Outcome
    verdict: Verdict
    loop: Optional[Tuple[int, int]] = None

    @property
    def steps_per_iteration(self) -> Optional[float]:
        if self.verdict is Verdict.CONSISTENT and self.network.is_accepted and self.tag.iterations:
            return self.network.time / self.tag.iterations
        return None

    def to_dict(self) -> Dict:
        data = {
            "word": render_word(self.word),
            "tag": self.tag.describe(),
            "network": self.network.describe(),
            "verdict": self.verdict.value,
        }
        if self.loop is not None:
            data["loop"] = {"start": self.loop[0], "period": self.loop[1]}
        if self.steps_per_iteration is not None:
            data["stepsPerIteration"] = round(self.steps_per_iteration, 3)
        return data


@dataclass
class EquivalenceReport:
    records: List[WordRecord] = field(default_factory=list)

    def count(self, verdict: Verdict) -> int:
        return sum(1 for r in self.records if r.verdict is verdict)

    @property
    def summary(self) -> Dict[str, int]:
        return {verdict.value: self.count(verdict) for verdict in Verdict}

    @property
    def mismatches(self) -> List[WordRecord]:
        return [r for r in self.records if r.verdict is Verdict.MISMATCH]

    @property
    def golden(self) -> Dict[str, int]:
        """Time_Γ per accepted word"""
        return {render_word(r.word): r.network.time for r in self.records if r.network.is_accepted}

    def to_dict(self) -> Dict:
        ratios = [r.steps_per_iteration for r in self.records if r.steps_per_iteration is not None]
        data = {
            "summary": self.summary,
            "records": [r.to_dict() for r in self.records],
            "golden": self.golden,
        }
        if ratios:
            data["stepsPerIteration"] = {"min": round(min(ratios), 3), "max": round(max(ratios), 3)}
        return data


def classify(tag: TagOutcome, loop: Optional[Tuple[int, int]], net: Outcome, tag_budget: int) -> Verdict:
    if tag.halted:
        if net.is_accepted:
            return Verdict.CONSISTENT
        if net.kind is OutcomeKind.REJECTED_STAGNATION:
            return Verdict.MISMATCH
        return Verdict.INCONCLUSIVE
    if loop is not None:
        return Verdict.MISMATCH if net.is_accepted else Verdict.CONSISTENT
    if net.is_accepted:
        estimate = net.time // MIN_STEPS_PER_ITERATION + 1
        return Verdict.MISMATCH if tag_budget >= MISMATCH_BUDGET_FACTOR * estimate else Verdict.INCONCLUSIVE
    if net.kind is OutcomeKind.REJECTED_STAGNATION:
        return Verdict.CONSISTENT
    return Verdict.INCONCLUSIVE


def _check_word(t: TagSystem, compiled: CompiledNetwork, word: Word, tag_budget: int, net_budget: int,
                proven_loop: bool) -> WordRecord:
    tag = run_tag(t, word, tag_budget)
    loop = None
    if not tag.halted:
        loop = find_tag_cycle(t, word, tag_budget)
        if loop is None and proven_loop:
            loop = (0, 0)
    steps = net_budget
    if not tag.halted and loop is None:
        # a later acceptance could only be inconclusive
        steps = min(net_budget, (tag_budget // MISMATCH_BUDGET_FACTOR) * MIN_STEPS_PER_ITERATION)
    net = run(compiled.network, word, StepBudget(steps)).outcome
    verdict = classify(tag, loop, net, tag_budget)
    if verdict is Verdict.MISMATCH:
        logger.warning(f"Mismatch on '{render_word(word)}': tag {tag.describe()}, network {net.describe()}")
    return WordRecord(word, tag, net, verdict, loop)


def equivalence_check(t: TagSystem, corpus: Iterable[Word], tag_budget: int = 1000, net_budget: int = 20000,
                      workers: int = 1, must_not_accept: Iterable[Word] = (),
                      compiled: Optional[CompiledNetwork] = None) -> EquivalenceReport:
    """
    Run the tag oracle and the compiled network on every corpus word.
    must_not_accept names hand-proven loops that the iteration budget may not expose.
    """
    corpus = list(dict.fromkeys(tuple(w) for w in corpus))
    if not corpus:
        return EquivalenceReport()
    compiled = compiled or compile_tag_system(t)
    proven = {tuple(w) for w in must_not_accept}

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(lambda w: _check_word(t, compiled, w, tag_budget, net_budget, w in proven), corpus))
    else:
        records = [_check_word(t, compiled, w, tag_budget, net_budget, w in proven) for w in corpus]

    report = EquivalenceReport(sorted(records, key=lambda r: (len(r.word), r.word)))
    logger.info(f"Equivalence over {len(corpus)} words: {report.summary}")
    return report


@dataclass
class SweepEntry:
    spec: GeneratorSpec
    system: TagSystem
    report: EquivalenceReport


def random_sweep(count: int, seed: int = 0, alphabet_size: int = 3, max_production_length: int = 3,
                 max_len: int = 4, tag_budget: int = 1000, net_budget: int = 20000,
                 workers: int = 1) -> List[SweepEntry]:
    """Equivalence over count seeded systems; system i uses seed + i and 1 + i mod alphabet_size symbols"""
    entries = []
    for i in range(count):
        spec = GeneratorSpec(seed + i, 1 + i % alphabet_size, max_production_length)
        system = random_tag_system(spec)
        report = equivalence_check(system, word_corpus(system, max_len), tag_budget, net_budget, workers)
        logger.info(f"System {i} (seed {spec.seed}): {report.summary}")
        entries.append(SweepEntry(spec, system, report))
    return entries


# ---------------------------------------------------------------------------
# Golden step counts
# ---------------------------------------------------------------------------

def load_golden(path: Union[str, Path]) -> Dict[str, int]:
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    if not isinstance(data, dict) or not all(isinstance(v, int) for v in data.values()):
        raise ValueError(f"{path} must map rendered words to step counts")
    return data


def write_golden(path: Union[str, Path], golden: Dict[str, int]):
    with open(path, "w", encoding="utf-8") as f:
        f.write(canonical_json(golden))


# ---------------------------------------------------------------------------
# Milestones
# ---------------------------------------------------------------------------

class MilestoneMissedError(RuntimeError):
    def __init__(self, step: int, expected: str, excerpt: str = ""):
        self.step = step
        self.expected = expected
        self.excerpt = excerpt
        super().__init__(f"milestone missed at step {step}: expected {expected}")


@dataclass(frozen=True)
class Milestone:
    node: str
    word: Word
    label: str

    def describe(self) -> str:
        return f"node {self.node} holds '{render_word(self.word)}'"


def proof_milestones(t: TagSystem, w: Word) -> List[Milestone]:
    """Intermediate strings of the simulation of one tag step on w = a·b·y, in the order they appear"""
    w = tuple(w)
    if len(w) < 2 or any(s not in t.non_halting for s in w):
        raise ValueError(f"'{render_word(w)}' is not a word a·b·y over V'")
    s = SymbolScheme(t)
    a, b, y = w[0], w[1], w[2:]
    production = t.production(a)
    i = t.index(production[0])
    rest = production[1:]
    lowered = (s.a(i - 1),) + rest
    head = (s.square(production), s.circle(b)) + y

    milestones = [
        Milestone("2", head, "[phi(a)] b^o y is sent to node 2"),
        Milestone("2", head + (s.prime(A0),), "node 2 appends _0'"),
        Milestone("4", head + (s.prime(A0), s.dollar), "node 3 appends $ and the word enters node 4"),
        Milestone("5", (s.angle(lowered), s.circle(b)) + y + (s.double_prime(A0), s.dollar),
                  "node 4 decrements the bracket and promotes the counter"),
    ]
    if i > 1:
        counted = (s.double_angle(lowered), s.circle(b)) + y + (s.prime(s.a(1)),)
        milestones.append(Milestone("6", counted, "node 6 removes $ while the count continues"))
        milestones.append(Milestone("3", counted + (s.dollar,), "the word returns to node 3 for another round"))
    else:
        milestones.append(Milestone("6", (s.double_angle(lowered), s.circle(b)) + y + (s.a(1),),
                                    "node 6 removes $ after the last round of the first symbol"))
    milestones.append(Milestone("9", y + production, "node 9 holds y phi(a)"))
    return milestones


@dataclass
class MilestoneResult:
    steps: List[int]
    outcome: Outcome


def track_milestones(t: TagSystem, w: Word, milestones: Optional[Sequence[Milestone]] = None,
                     max_steps: int = 2000, compiled: Optional[CompiledNetwork] = None) -> MilestoneResult:
    """Steps at which each milestone is first seen, in order; raises MilestoneMissedError"""
    w = tuple(w)
    milestones = list(milestones) if milestones is not None else proof_milestones(t, w)
    compiled = compiled or compile_tag_system(t)
    net = compiled.network
    result = run(net, w, StepBudget(max_steps), TraceLevel.FULL)

    steps: List[int] = []
    pointer = 0
    configurations = list(result.trace.configurations())
    for step, _, config in configurations:
        while pointer < len(milestones) and milestones[pointer].word in config.get(milestones[pointer].node, ()):
            steps.append(step)
            pointer += 1
    if pointer < len(milestones):
        missing = milestones[pointer]
        last = configurations[-1] if configurations else (0, "init", {})
        excerpt = "; ".join(f"{node}: {sorted(render_word(x) for x in words)[:5]}"
                            for node, words in sorted(last[2].items()) if words)
        raise MilestoneMissedError(last[0], f"{missing.describe()} ({missing.label})", excerpt)

    if result.outcome.is_accepted:
        accepted_at = result.outcome.time
        by_step = {step: config for step, _, config in configurations}
        accepted = by_step.get(accepted_at, {}).get(net.output_node, frozenset())
        before = by_step.get(accepted_at - 1, {}).get("9", frozenset())
        crossed = [x for x in accepted if t.halt in x and x in before]
        if not crossed:
            raise MilestoneMissedError(accepted_at, f"a word containing {t.halt} crossing edge {{9,10}}")
        steps.append(accepted_at)
    logger.info(f"Milestones for '{render_word(w)}' reached at steps {steps}")
    return MilestoneResult(steps, result.outcome)


def milestone_check(t: TagSystem, w: Word, milestones: Optional[Sequence[Milestone]] = None,
                    max_steps: int = 2000) -> bool:
    track_milestones(t, w, milestones, max_steps)
    return True
