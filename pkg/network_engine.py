#!/usr/bin/env python3
"""
ANEPFC Execution Engine
Runs a network on an input word: alternating evolutionary and communication
steps, acceptance, stagnation, budgets, guards and JSON-lines traces.
"""

import hashlib
import json
import logging
from concurrent.futures import Executor, ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Callable, Dict, FrozenSet, Iterator, List, Mapping, NamedTuple, Optional, Set, Tuple, Union

import psutil

from evolution_model import (
    ActionMode,
    Configuration,
    InputOutsideAlphabetError,
    Network,
    Symbol,
    Violation,
    Word,
    apply_ruleset,
    compile_ruleset,
    errors_only,
    render_word,
    validate_network,
)

logger = logging.getLogger(__name__)

MEMORY_SAMPLE_INTERVAL = 64
APPLY_CACHE_SIZE = 1 << 16


class UndefinedTimeError(RuntimeError):
    """time_of is only defined for computations that halted"""


class NetworkValidationError(RuntimeError):
    """The engine refuses to run a network that is not well-formed"""

    def __init__(self, violations: List[Violation]):
        self.violations = list(violations)
        super().__init__("network is not well-formed: " + "; ".join(str(v) for v in self.violations))


class TraceMismatchError(RuntimeError):
    def __init__(self, step: int, message: str):
        self.step = step
        super().__init__(f"trace diverges at step {step}: {message}")


@dataclass(frozen=True)
class StepBudget:
    """maxSteps counts configurations after C0; the guards are optional"""
    max_steps: int = 20000
    max_words_per_node: Optional[int] = None
    max_word_length: Optional[int] = None
    max_memory_mb: Optional[float] = None


class OutcomeKind(Enum):
    ACCEPTED = "ACCEPTED"
    REJECTED_STAGNATION = "REJECTED_STAGNATION"
    BUDGET_EXHAUSTED = "BUDGET_EXHAUSTED"
    GUARD_TRIPPED = "GUARD_TRIPPED"


@dataclass(frozen=True)
class Outcome:
    kind: OutcomeKind
    time: int
    reason: str = ""

    @classmethod
    def accepted(cls, time: int) -> "Outcome":
        return cls(OutcomeKind.ACCEPTED, time)

    @classmethod
    def stagnation(cls, time: int, reason: str = "") -> "Outcome":
        return cls(OutcomeKind.REJECTED_STAGNATION, time, reason)

    @classmethod
    def budget_exhausted(cls, time: int) -> "Outcome":
        return cls(OutcomeKind.BUDGET_EXHAUSTED, time)

    @classmethod
    def guard_tripped(cls, reason: str, time: int) -> "Outcome":
        return cls(OutcomeKind.GUARD_TRIPPED, time, reason)

    @property
    def is_accepted(self) -> bool:
        return self.kind is OutcomeKind.ACCEPTED

    @property
    def halted(self) -> bool:
        """Accepted or rejected by stagnation: the computation is finite"""
        return self.kind in (OutcomeKind.ACCEPTED, OutcomeKind.REJECTED_STAGNATION)

    def describe(self) -> str:
        if self.halted:
            return f"{self.kind.value} time={self.time}"
        if self.kind is OutcomeKind.GUARD_TRIPPED:
            return f"{self.kind.value} {self.reason}"
        return self.kind.value


def time_of(outcome: Outcome) -> int:
    """Time_Γ(x): the index of the halting configuration"""
    if not outcome.halted:
        raise UndefinedTimeError(f"{outcome.kind.value} has no computation time")
    return outcome.time


# ---------------------------------------------------------------------------
# Definitional steps
# ---------------------------------------------------------------------------

def initial_config(net: Network, word: Word) -> Dict[str, FrozenSet[Word]]:
    outside = [s for s in word if s not in net.input_alphabet]
    if outside:
        raise InputOutsideAlphabetError(outside)
    config = {node_id: frozenset() for node_id in net.node_ids}
    config[net.input_node] = frozenset({tuple(word)})
    return config


def evolutionary_step(net: Network, c: Configuration) -> Dict[str, FrozenSet[Word]]:
    return {node.id: frozenset(apply_ruleset(node, c.get(node.id, ()))) for node in net.nodes}


def communication_step(net: Network, c: Configuration) -> Dict[str, FrozenSet[Word]]:
    """Every node keeps what passes none of its filters and receives what its neighbours send"""
    result = {}
    for node_id in net.node_ids:
        words = c.get(node_id, frozenset())
        incident = net.incident[node_id]
        kept = {w for w in words if not any(edge.filter.passes_alphabet(frozenset(w)) for edge, _ in incident)}
        for edge, neighbour in incident:
            kept |= {w for w in c.get(neighbour, ()) if edge.filter.passes_alphabet(frozenset(w))}
        result[node_id] = frozenset(kept)
    return result


# ---------------------------------------------------------------------------
# Simulation state
# ---------------------------------------------------------------------------

TrappedStore = Mapping[Word, FrozenSet[int]]


@dataclass(frozen=True)
class SimulatorState:
    """
    live holds ordinary word sets. trapped holds, per single-insertion node,
    words that can never leave it, as core -> offsets; the materialized word
    carries offset + clock copies of the inserted symbol at the inserting end.
    """
    live: Mapping[str, FrozenSet[Word]]
    trapped: Mapping[str, TrappedStore] = field(default_factory=dict)
    clock: int = 0

    @property
    def has_trapped(self) -> bool:
        return any(self.trapped.values())

    def trapped_count(self) -> int:
        return sum(len(offsets) for store in self.trapped.values() for offsets in store.values())

    def same_as(self, other: "SimulatorState") -> bool:
        # the longest trapped word grows every evolutionary step, so any trapped word rules out equality
        if self.has_trapped or other.has_trapped:
            return False
        return self.live == other.live


class TrapSpec(NamedTuple):
    symbol: Symbol
    mode: ActionMode


class Stepper:
    """Step interface shared by the reference and the optimized simulator"""

    def __init__(self, net: Network):
        self.net = net
        self.node_ids = net.node_ids
        self.traps: Dict[str, TrapSpec] = {}

    def start(self, word: Word) -> SimulatorState:
        return SimulatorState(initial_config(self.net, word))

    def evolve(self, state: SimulatorState) -> SimulatorState:
        raise NotImplementedError

    def communicate(self, state: SimulatorState) -> SimulatorState:
        raise NotImplementedError

    def materialize(self, state: SimulatorState) -> Dict[str, FrozenSet[Word]]:
        config = {}
        for node_id in self.node_ids:
            words = state.live.get(node_id, frozenset())
            store = state.trapped.get(node_id)
            if store:
                symbol, mode = self.traps[node_id]
                extra = set()
                for core, offsets in store.items():
                    for offset in offsets:
                        run = (symbol,) * (offset + state.clock)
                        extra.add(core + run if mode is ActionMode.RIGHT else run + core)
                words = words | extra
            config[node_id] = words
        return config

    def output_nonempty(self, state: SimulatorState) -> bool:
        output = self.net.output_node
        return bool(state.live.get(output)) or bool(state.trapped.get(output))

    def statistics(self, state: SimulatorState) -> Tuple[int, int, int]:
        """(largest node word count, longest word length, total words)"""
        largest = longest = total = 0
        for node_id in self.node_ids:
            words = state.live.get(node_id, frozenset())
            count = len(words)
            if words:
                longest = max(longest, max(len(w) for w in words))
            for core, offsets in state.trapped.get(node_id, {}).items():
                count += len(offsets)
                longest = max(longest, len(core) + max(offsets) + state.clock)
            largest = max(largest, count)
            total += count
        return largest, longest, total

    def digest(self, state: SimulatorState) -> str:
        canonical = [[node_id, sorted(render_word(w) for w in state.live.get(node_id, ()))] for node_id in sorted(self.node_ids)]
        return hashlib.sha256(json.dumps(canonical).encode("utf-8")).hexdigest()


class ReferenceStepper(Stepper):
    """Steps with the pure evolutionary_step / communication_step functions"""

    def evolve(self, state: SimulatorState) -> SimulatorState:
        return SimulatorState(evolutionary_step(self.net, state.live), clock=state.clock + 1)

    def communicate(self, state: SimulatorState) -> SimulatorState:
        return SimulatorState(communication_step(self.net, state.live), clock=state.clock)


class NetworkSimulator(Stepper):
    """
    Optimized stepper. Rule application and routing are cached per node, node
    evolutions may run on a thread pool, and words trapped in single-insertion
    nodes are kept in compressed form. The configuration sequence is identical
    to the reference stepper's.
    """

    def __init__(self, net: Network, executor: Optional[Executor] = None):
        super().__init__(net)
        self.executor = executor
        self._apply: Dict[str, Callable[[Word], FrozenSet[Word]]] = {}
        self._routes: Dict[str, Dict[FrozenSet[Symbol], Tuple[str, ...]]] = {}
        for node in net.nodes:
            compiled = compile_ruleset(node)
            self._apply[node.id] = lru_cache(maxsize=APPLY_CACHE_SIZE)(compiled.apply)
            self._routes[node.id] = {}
            symbol = compiled.single_end_insertion
            if symbol is not None:
                self.traps[node.id] = TrapSpec(symbol, compiled.mode)
        if self.traps:
            logger.debug(f"Trapped-word compression enabled for nodes {', '.join(sorted(self.traps))}")

    def routes(self, node_id: str, word: Word) -> Tuple[str, ...]:
        """Neighbours whose connecting edge filter the word passes"""
        alph = frozenset(word)
        cache = self._routes[node_id]
        destinations = cache.get(alph)
        if destinations is None:
            destinations = tuple(neighbour for edge, neighbour in self.net.incident[node_id]
                                 if edge.filter.passes_alphabet(alph))
            cache[alph] = destinations
        return destinations

    def _split_trapped(self, node_id: str, words, store: TrappedStore, clock: int) -> Tuple[FrozenSet[Word], TrappedStore]:
        symbol, mode = self.traps[node_id]
        kept = set()
        grown: Dict[Word, Set[int]] = {}
        for word in words:
            if symbol not in word or self.routes(node_id, word):
                kept.add(word)
                continue
            run = 0
            if mode is ActionMode.RIGHT:
                while run < len(word) and word[-1 - run] == symbol:
                    run += 1
                core = word[:len(word) - run]
            else:
                while run < len(word) and word[run] == symbol:
                    run += 1
                core = word[run:]
            grown.setdefault(core, set()).add(run - clock)
        if not grown:
            return frozenset(kept), store
        merged = dict(store)
        for core, offsets in grown.items():
            merged[core] = merged.get(core, frozenset()) | offsets
        return frozenset(kept), merged

    def start(self, word: Word) -> SimulatorState:
        live = initial_config(self.net, word)
        trapped = {}
        for node_id in self.traps:
            live[node_id], store = self._split_trapped(node_id, live[node_id], {}, 0)
            if store:
                trapped[node_id] = store
        return SimulatorState(live, trapped, 0)

    def _evolve_node(self, node_id: str, words: FrozenSet[Word]) -> Set[Word]:
        apply = self._apply[node_id]
        produced: Set[Word] = set()
        for word in words:
            produced |= apply(word)
        return produced

    def evolve(self, state: SimulatorState) -> SimulatorState:
        clock = state.clock + 1
        if self.executor is not None:
            futures = [self.executor.submit(self._evolve_node, node_id, state.live.get(node_id, frozenset()))
                       for node_id in self.node_ids]
            results = [future.result() for future in futures]
        else:
            results = [self._evolve_node(node_id, state.live.get(node_id, frozenset())) for node_id in self.node_ids]

        live = {}
        trapped = dict(state.trapped)
        for node_id, produced in zip(self.node_ids, results):
            if node_id in self.traps:
                live[node_id], store = self._split_trapped(node_id, produced, state.trapped.get(node_id, {}), clock)
                if store:
                    trapped[node_id] = store
            else:
                live[node_id] = frozenset(produced)
        return SimulatorState(live, trapped, clock)

    def communicate(self, state: SimulatorState) -> SimulatorState:
        kept: Dict[str, Set[Word]] = {node_id: set() for node_id in self.node_ids}
        incoming: Dict[str, Set[Word]] = {node_id: set() for node_id in self.node_ids}
        for node_id in self.node_ids:
            for word in state.live.get(node_id, ()):
                destinations = self.routes(node_id, word)
                if not destinations:
                    kept[node_id].add(word)
                for destination in destinations:
                    incoming[destination].add(word)
        live = {node_id: frozenset(kept[node_id] | incoming[node_id]) for node_id in self.node_ids}
        return SimulatorState(live, state.trapped, state.clock)


# ---------------------------------------------------------------------------
# Traces
# ---------------------------------------------------------------------------

class TraceLevel(Enum):
    NONE = "none"
    FULL = "full"
    DELTA = "delta"


def _render_nodes(config: Mapping[str, FrozenSet[Word]]) -> Dict[str, List[str]]:
    return {node_id: sorted(render_word(w) for w in words) for node_id, words in config.items()}


def _parse_words(rendered: List[str]) -> FrozenSet[Word]:
    return frozenset(tuple(text.split()) for text in rendered)


@dataclass(frozen=True)
class TraceRecord:
    step: int
    type: str
    nodes: Dict

    def to_dict(self) -> Dict:
        return {"step": self.step, "type": self.type, "nodes": self.nodes}


@dataclass
class Trace:
    input: Word
    max_steps: int
    level: TraceLevel
    initial: Dict[str, List[str]]
    records: List[TraceRecord] = field(default_factory=list)
    guards: Dict[str, Optional[int]] = field(default_factory=dict)

    def header(self) -> Dict:
        header = {"step": 0, "type": "init", "input": render_word(self.input), "maxSteps": self.max_steps,
                  "level": self.level.value, "nodes": self.initial}
        if self.guards:
            header["guards"] = self.guards
        return header

    def configurations(self) -> Iterator[Tuple[int, str, Dict[str, FrozenSet[Word]]]]:
        """Full configurations C1, C2, ... rebuilt from full or delta records"""
        current = {node_id: _parse_words(words) for node_id, words in self.initial.items()}
        for record in self.records:
            if self.level is TraceLevel.DELTA:
                current = dict(current)
                for node_id, change in record.nodes.items():
                    words = current.get(node_id, frozenset())
                    current[node_id] = (words - _parse_words(change.get("-", []))) | _parse_words(change.get("+", []))
            else:
                current = {node_id: _parse_words(words) for node_id, words in record.nodes.items()}
            yield record.step, record.type, current


class TraceRecorder:
    def __init__(self, level: TraceLevel):
        self.level = level
        self.previous: Dict[str, FrozenSet[Word]] = {}
        self.records: List[TraceRecord] = []

    def begin(self, config: Dict[str, FrozenSet[Word]]) -> Dict[str, List[str]]:
        self.previous = config
        return _render_nodes(config)

    def record(self, step: int, step_type: str, config: Dict[str, FrozenSet[Word]]):
        if self.level is TraceLevel.FULL:
            nodes = _render_nodes(config)
        else:
            nodes = {}
            for node_id, words in config.items():
                before = self.previous.get(node_id, frozenset())
                if words != before:
                    nodes[node_id] = {"+": sorted(render_word(w) for w in words - before),
                                      "-": sorted(render_word(w) for w in before - words)}
        self.records.append(TraceRecord(step, step_type, nodes))
        self.previous = config


def write_trace(trace: Trace, path: Union[str, Path]):
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps(trace.header(), sort_keys=True, ensure_ascii=False) + "\n")
        for record in trace.records:
            f.write(json.dumps(record.to_dict(), sort_keys=True, ensure_ascii=False) + "\n")


def read_trace(path: Union[str, Path]) -> Trace:
    with open(path, "r", encoding="utf-8") as f:
        lines = [json.loads(line) for line in f if line.strip()]
    if not lines or lines[0].get("type") != "init":
        raise TraceMismatchError(0, f"{path} has no init header")
    header = lines[0]
    records = [TraceRecord(raw["step"], raw["type"], raw["nodes"]) for raw in lines[1:]]
    return Trace(
        input=tuple(header.get("input", "").split()),
        max_steps=header["maxSteps"],
        level=TraceLevel(header.get("level", "full")),
        initial=header["nodes"],
        records=records,
        guards=header.get("guards", {}),
    )


# ---------------------------------------------------------------------------
# Run loop
# ---------------------------------------------------------------------------

class RunResult(NamedTuple):
    outcome: Outcome
    trace: Optional[Trace]


def _memory_mb() -> float:
    return psutil.Process().memory_info().rss / (1024 * 1024)


def _check_guards(stepper: Stepper, state: SimulatorState, budget: StepBudget, step: int) -> Optional[str]:
    if budget.max_words_per_node is not None or budget.max_word_length is not None:
        largest, longest, _ = stepper.statistics(state)
        if budget.max_words_per_node is not None and largest > budget.max_words_per_node:
            return f"max_words_per_node={budget.max_words_per_node} exceeded ({largest} words)"
        if budget.max_word_length is not None and longest > budget.max_word_length:
            return f"max_word_length={budget.max_word_length} exceeded (length {longest})"
    if budget.max_memory_mb is not None and step % MEMORY_SAMPLE_INTERVAL == 0:
        used = _memory_mb()
        if used > budget.max_memory_mb:
            return f"max_memory_mb={budget.max_memory_mb} exceeded ({used:.0f} MB)"
    return None


def run(net: Network, word: Word, budget: Optional[StepBudget] = None, trace_level: TraceLevel = TraceLevel.NONE,
        workers: int = 1, detect_cycles: bool = False, reference: bool = False) -> RunResult:
    """Run net on word; returns the outcome and, when requested, the trace"""
    budget = budget or StepBudget()
    violations = errors_only(validate_network(net))
    if violations:
        raise NetworkValidationError(violations)

    if workers > 1 and not reference:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return _run(NetworkSimulator(net, pool), word, budget, trace_level, detect_cycles)
    stepper = ReferenceStepper(net) if reference else NetworkSimulator(net)
    return _run(stepper, word, budget, trace_level, detect_cycles)


def _run(stepper: Stepper, word: Word, budget: StepBudget, trace_level: TraceLevel, detect_cycles: bool) -> RunResult:
    state = stepper.start(tuple(word))
    recorder = TraceRecorder(trace_level) if trace_level is not TraceLevel.NONE else None
    trace = None
    if recorder is not None:
        guards = {key: value for key, value in (("maxWordsPerNode", budget.max_words_per_node),
                                                ("maxWordLength", budget.max_word_length)) if value is not None}
        trace = Trace(tuple(word), budget.max_steps, trace_level, recorder.begin(stepper.materialize(state)),
                      recorder.records, guards)

    def finish(outcome: Outcome) -> RunResult:
        logger.info(f"Run on '{render_word(word)}' finished: {outcome.describe()}")
        return RunResult(outcome, trace)

    if stepper.output_nonempty(state):
        return finish(Outcome.accepted(0))

    previous: Dict[int, Optional[SimulatorState]] = {0: None, 1: None}
    seen: Dict[int, Set[str]] = {0: set(), 1: set()}
    if detect_cycles and not state.has_trapped:
        seen[0].add(stepper.digest(state))

    for step in range(1, budget.max_steps + 1):
        evolutionary = step % 2 == 1
        state = stepper.evolve(state) if evolutionary else stepper.communicate(state)
        step_type = "evo" if evolutionary else "comm"
        if recorder is not None:
            recorder.record(step, step_type, stepper.materialize(state))
        if logger.isEnabledFor(logging.DEBUG):
            largest, longest, total = stepper.statistics(state)
            logger.debug(f"step {step} {step_type}: {total} words, largest node {largest}, "
                         f"longest word {longest}, trapped {state.trapped_count()}")

        if stepper.output_nonempty(state):
            return finish(Outcome.accepted(step))
        parity = step % 2
        prior = previous[parity]
        if prior is not None and state.same_as(prior):
            return finish(Outcome.stagnation(step))
        previous[parity] = state

        reason = _check_guards(stepper, state, budget, step)
        if reason is not None:
            logger.warning(f"Guard tripped at step {step}: {reason}")
            return finish(Outcome.guard_tripped(reason, step))

        if detect_cycles and not state.has_trapped:
            digest = stepper.digest(state)
            if digest in seen[parity]:
                return finish(Outcome.stagnation(step, "cycle"))
            seen[parity].add(digest)

    return finish(Outcome.budget_exhausted(budget.max_steps))


def replay_trace(net: Network, trace: Trace) -> Outcome:
    """Re-execute the recorded input with the definitional stepper and check every recorded configuration"""
    budget = StepBudget(trace.max_steps, trace.guards.get("maxWordsPerNode"), trace.guards.get("maxWordLength"))
    result = run(net, trace.input, budget, TraceLevel.FULL, reference=True)
    fresh = result.trace

    initial = {node_id: _parse_words(words) for node_id, words in trace.initial.items()}
    expected_initial = {node_id: _parse_words(words) for node_id, words in fresh.initial.items()}
    if _normalized(initial) != _normalized(expected_initial):
        raise TraceMismatchError(0, "initial configuration differs")

    recorded = list(trace.configurations())
    replayed = list(fresh.configurations())
    for (step, step_type, config), (fresh_step, fresh_type, fresh_config) in zip(recorded, replayed):
        if step != fresh_step or step_type != fresh_type:
            raise TraceMismatchError(step, f"expected {fresh_type} step {fresh_step}, found {step_type} step {step}")
        if _normalized(config) != _normalized(fresh_config):
            differing = sorted(n for n in set(config) | set(fresh_config)
                               if config.get(n, frozenset()) != fresh_config.get(n, frozenset()))
            raise TraceMismatchError(step, f"nodes {', '.join(differing)} differ")
    if len(recorded) != len(replayed):
        raise TraceMismatchError(min(len(recorded), len(replayed)) + 1,
                                 f"trace has {len(recorded)} steps, replay produced {len(replayed)}")
    logger.info(f"Replayed {len(recorded)} steps: {result.outcome.describe()}")
    return result.outcome


def _normalized(config: Mapping[str, FrozenSet[Word]]) -> Dict[str, FrozenSet[Word]]:
    return {node_id: words for node_id, words in config.items() if words}
