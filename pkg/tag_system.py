#!/usr/bin/env python3
"""
Restricted 2-Tag Systems
Definition, validation and interpretation; the independent halting oracle
the compiled networks are checked against.
"""

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple, Union

from evolution_model import Symbol, Violation, Word, canonical_json, render_word

logger = logging.getLogger(__name__)


class TagFormatError(ValueError):
    """Raised when a tag-system document is malformed"""


class HaltingWordError(ValueError):
    """tag_step is only defined on non-halting words"""

    def __init__(self, word: Word):
        self.word = word
        super().__init__(f"'{render_word(word)}' is a halting word")


@dataclass(frozen=True)
class TagSystem:
    alphabet: Tuple[Symbol, ...]
    productions: Tuple[Tuple[Symbol, Word], ...]

    @property
    def halt(self) -> Symbol:
        return self.alphabet[-1]

    @property
    def n(self) -> int:
        return len(self.alphabet) - 1

    @property
    def non_halting(self) -> Tuple[Symbol, ...]:
        """V' = V \\ {H}, in alphabet order"""
        return self.alphabet[:-1]

    @cached_property
    def production_map(self) -> Dict[Symbol, Word]:
        return dict(self.productions)

    def production(self, symbol: Symbol) -> Word:
        return self.production_map[symbol]

    def index(self, symbol: Symbol) -> int:
        """k such that symbol = a_k (1-based)"""
        return self.alphabet.index(symbol) + 1

    @property
    def max_production_length(self) -> int:
        return max((len(w) for _, w in self.productions), default=1)

    @classmethod
    def build(cls, alphabet, productions: Mapping[Symbol, Word]) -> "TagSystem":
        alphabet = tuple(alphabet)
        ordered = tuple((a, tuple(productions[a])) for a in alphabet if a in productions)
        stray = tuple((a, tuple(w)) for a, w in sorted(productions.items()) if a not in alphabet)
        return cls(alphabet, ordered + stray)


def compact_word(word: Word) -> str:
    """Single-character symbols are written without separators"""
    if all(len(s) == 1 for s in word):
        return "".join(word)
    return render_word(word)


class TagOutcomeKind(Enum):
    HALTED = "HALTED"
    BUDGET_EXHAUSTED = "TAG_BUDGET_EXHAUSTED"


@dataclass(frozen=True)
class TagOutcome:
    kind: TagOutcomeKind
    word: Word
    iterations: int
    history: Tuple[Word, ...] = field(default=(), compare=False)

    @property
    def halted(self) -> bool:
        return self.kind is TagOutcomeKind.HALTED

    def describe(self) -> str:
        if self.halted:
            return f"HALTED word={compact_word(self.word)} iterations={self.iterations}"
        return "TAG_BUDGET_EXHAUSTED"


def validate_tag(t: TagSystem) -> List[Violation]:
    violations: List[Violation] = []
    if len(t.alphabet) < 2:
        violations.append(Violation("alphabet too small", "the alphabet needs at least one symbol besides H", "alphabet"))
        return violations
    if len(set(t.alphabet)) != len(t.alphabet):
        violations.append(Violation("duplicate symbol", "alphabet symbols must be unique", "alphabet"))
    for symbol in t.alphabet:
        if not symbol or any(ch.isspace() for ch in symbol):
            violations.append(Violation("bad symbol id", f"symbol id {symbol!r} is empty or contains whitespace", symbol))

    halt = t.halt
    productions = t.production_map
    if halt in productions:
        violations.append(Violation("H has a production", f"halting symbol {halt} must not have a production", halt))
    for symbol in t.non_halting:
        if symbol not in productions:
            violations.append(Violation("missing production", f"symbol {symbol} has no production", symbol))
    for symbol, word in t.productions:
        if symbol not in t.alphabet:
            violations.append(Violation("unknown symbol", f"production for {symbol}, which is not in the alphabet", symbol))
            continue
        outside = sorted(set(word) - set(t.alphabet))
        if outside:
            violations.append(Violation("production outside V", f"production of {symbol} uses {', '.join(outside)}", symbol))
        if word != (halt,) and len(word) < 2:
            violations.append(Violation("production too short", f"production of {symbol} must have length >= 2 or be {halt}", symbol))
        elif len(word) >= 2 and halt in word:
            violations.append(Violation("H inside production", f"production of {symbol} contains {halt}; the system halts as soon as it is appended", symbol, "warning"))

    halting_sources = [s for s, w in t.productions if w == (halt,)]
    if not halting_sources:
        violations.append(Violation("no H production", f"exactly one symbol must produce {halt}", halt))
    elif len(halting_sources) > 1:
        violations.append(Violation("H production not unique", f"{', '.join(halting_sources)} all produce {halt}", halt))
    return violations


def is_halting_word(t: TagSystem, word: Word) -> bool:
    return len(word) < 2 or t.halt in word


def tag_step(t: TagSystem, word: Word) -> Word:
    """Delete the leftmost two symbols and append φ of the first one"""
    if is_halting_word(t, word):
        raise HaltingWordError(word)
    return word[2:] + t.production(word[0])


def run_tag(t: TagSystem, word: Word, max_iterations: int, record_history: bool = False) -> TagOutcome:
    history = [word] if record_history else []
    iterations = 0
    while not is_halting_word(t, word):
        if iterations >= max_iterations:
            return TagOutcome(TagOutcomeKind.BUDGET_EXHAUSTED, word, iterations, tuple(history))
        word = tag_step(t, word)
        iterations += 1
        if record_history:
            history.append(word)
    return TagOutcome(TagOutcomeKind.HALTED, word, iterations, tuple(history))


def find_tag_cycle(t: TagSystem, word: Word, max_iterations: int) -> Optional[Tuple[int, int]]:
    """
    (start, period) when the iteration revisits a word within the budget.
    The tag operation is deterministic, so a revisit proves the system never halts on `word`.
    """
    seen: Dict[Word, int] = {word: 0}
    for i in range(1, max_iterations + 1):
        if is_halting_word(t, word):
            return None
        word = tag_step(t, word)
        if word in seen:
            return seen[word], i - seen[word]
        seen[word] = i
    return None


# ---------------------------------------------------------------------------
# Documents
# ---------------------------------------------------------------------------

def tag_system_from_dict(data: Mapping) -> TagSystem:
    try:
        alphabet = data["alphabet"]
        halt = data.get("halt", alphabet[-1] if alphabet else None)
        productions = data["productions"]
    except (KeyError, TypeError, IndexError) as e:
        raise TagFormatError(f"tag-system document is missing or has malformed field {e}") from e
    if not isinstance(alphabet, list) or not all(isinstance(s, str) for s in alphabet) or not alphabet:
        raise TagFormatError("alphabet must be a non-empty array of strings")
    if halt != alphabet[-1]:
        raise TagFormatError(f"halt symbol {halt!r} must be the last alphabet entry")
    if not isinstance(productions, dict):
        raise TagFormatError("productions must be an object")
    parsed: Dict[Symbol, Word] = {}
    for symbol, word in productions.items():
        if isinstance(word, str):
            word = [word]
        if not isinstance(word, list) or not all(isinstance(s, str) for s in word):
            raise TagFormatError(f"production of {symbol} must be an array of symbol ids")
        parsed[symbol] = tuple(word)
    return TagSystem.build(alphabet, parsed)


def tag_system_to_dict(t: TagSystem) -> Dict:
    return {
        "alphabet": list(t.alphabet),
        "halt": t.halt,
        "productions": {symbol: list(word) for symbol, word in t.productions},
    }


def load_tag_system(source: Union[str, Path, Mapping]) -> TagSystem:
    if isinstance(source, Mapping):
        return tag_system_from_dict(source)
    try:
        with open(source, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise TagFormatError(f"{source} is not valid JSON: {e}") from e
    t = tag_system_from_dict(data)
    logger.info(f"Loaded tag system {source}: alphabet {' '.join(t.alphabet)}")
    return t


def dump_tag_system(t: TagSystem, path: Union[str, Path]):
    with open(path, "w", encoding="utf-8") as f:
        f.write(canonical_json(tag_system_to_dict(t)))
