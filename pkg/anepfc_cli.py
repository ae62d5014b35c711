#!/usr/bin/env python3
"""
ANEPFC Command Line
Validation, simulation, tag interpretation, compilation and verification over
the JSON document formats. Standard output carries one result line per run;
diagnostics go to standard error.
"""

import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from command_registry import Command, CommandRegistry
from config_manager import ConfigError, ConfigManager, Settings
from evolution_model import (
    InputOutsideAlphabetError,
    NetworkFormatError,
    canonical_json,
    dump_network,
    errors_only,
    load_network,
    network_from_dict,
    parse_word,
    render_word,
    validate_network,
)
from network_engine import (
    NetworkValidationError,
    StepBudget,
    TraceLevel,
    TraceMismatchError,
    read_trace,
    replay_trace,
    run,
    write_trace,
)
from tag_compiler import InvalidTagSystemError, compile_tag_system, to_dot
from tag_system import TagFormatError, load_tag_system, run_tag, tag_system_from_dict, validate_tag
from verification_harness import (
    MilestoneMissedError,
    Verdict,
    equivalence_check,
    load_golden,
    random_sweep,
    track_milestones,
    word_corpus,
    write_golden,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_USAGE = 2

# expected error classes: reported on standard error without a traceback
USAGE_ERRORS = (
    ConfigError,
    InputOutsideAlphabetError,
    InvalidTagSystemError,
    NetworkFormatError,
    NetworkValidationError,
    TagFormatError,
    OSError,
    ValueError,
)


def setup_logging(settings: Settings, verbosity: int = 0, quiet: bool = False):
    level = logging.getLevelName(settings.log_level)
    if quiet:
        level = logging.ERROR
    elif verbosity:
        level = logging.DEBUG if verbosity > 1 else min(level, logging.INFO)
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if settings.log_file:
        handlers.append(logging.FileHandler(settings.log_file))
    logging.basicConfig(level=level, format='%(asctime)s - %(levelname)s - %(message)s', handlers=handlers)
    logging.getLogger().setLevel(level)


def _error(message: str):
    print(message, file=sys.stderr)


def load_valid_tag_system(path: str):
    t = load_tag_system(path)
    problems = errors_only(validate_tag(t))
    if problems:
        raise InvalidTagSystemError(problems)
    return t


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------

def configure_validate(parser):
    parser.add_argument("file", help="network or tag-system JSON document")


def cmd_validate(args, settings: Settings) -> int:
    with open(args.file, "r", encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise NetworkFormatError(f"{args.file} is not valid JSON: {e}") from e
    if isinstance(data, dict) and "nodes" in data:
        violations = validate_network(network_from_dict(data))
    elif isinstance(data, dict) and "productions" in data:
        violations = validate_tag(tag_system_from_dict(data))
    else:
        raise NetworkFormatError(f"{args.file} is neither a network nor a tag-system document")
    for violation in violations:
        print(violation)
    if any(v.is_error for v in violations):
        print("INVALID")
        return EXIT_NEGATIVE
    print("OK")
    return EXIT_OK


# ---------------------------------------------------------------------------
# compile
# ---------------------------------------------------------------------------

def configure_compile(parser):
    parser.add_argument("tag", help="tag-system JSON document")
    parser.add_argument("-o", "--output", required=True, help="network JSON document to write")
    parser.add_argument("--prune-reachable", action="store_true",
                        help="keep only bracket symbols reachable from [phi(a)]")
    parser.add_argument("--provenance", metavar="FILE", help="write the node/edge provenance sidecar")
    parser.add_argument("--dot", metavar="FILE", help="write the topology as Graphviz text")


def cmd_compile(args, settings: Settings) -> int:
    t = load_tag_system(args.tag)
    compiled = compile_tag_system(t, prune_reachable=args.prune_reachable)
    dump_network(compiled.network, args.output)
    if args.provenance:
        Path(args.provenance).write_text(canonical_json(compiled.provenance), encoding="utf-8")
    if args.dot:
        Path(args.dot).write_text(to_dot(compiled.network), encoding="utf-8")
    print(compiled.summary())
    return EXIT_OK


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def configure_run(parser):
    parser.add_argument("network", help="network JSON document")
    parser.add_argument("input", nargs="?", default="", help="input word (empty for the empty word)")
    parser.add_argument("--max-steps", type=int)
    parser.add_argument("--max-words-per-node", type=int)
    parser.add_argument("--max-word-length", type=int)
    parser.add_argument("--detect-cycles", action="store_true", help="also stop on any repeated configuration")
    parser.add_argument("--workers", type=int)
    parser.add_argument("--trace", metavar="FILE", help="write a JSON-lines trace")
    parser.add_argument("--trace-level", choices=["full", "delta"], default="full")
    parser.add_argument("--replay", metavar="FILE", help="re-execute and check a recorded trace")
    parser.add_argument("--reference", action="store_true", help="use the definitional stepper")


def cmd_run(args, settings: Settings) -> int:
    net = load_network(args.network)
    if args.replay:
        outcome = replay_trace(net, read_trace(args.replay))
    else:
        word = parse_word(args.input, net.input_alphabet)
        budget = StepBudget(
            max_steps=args.max_steps if args.max_steps is not None else settings.net_budget,
            max_words_per_node=args.max_words_per_node if args.max_words_per_node is not None else settings.max_words_per_node,
            max_word_length=args.max_word_length if args.max_word_length is not None else settings.max_word_length,
            max_memory_mb=settings.max_memory_mb,
        )
        level = TraceLevel(args.trace_level) if args.trace else TraceLevel.NONE
        result = run(net, word, budget, level,
                     workers=args.workers or settings.workers,
                     detect_cycles=args.detect_cycles or settings.detect_cycles,
                     reference=args.reference)
        if args.trace:
            write_trace(result.trace, args.trace)
        outcome = result.outcome
    print(outcome.describe())
    return EXIT_OK if outcome.is_accepted else EXIT_NEGATIVE


# ---------------------------------------------------------------------------
# tag-run
# ---------------------------------------------------------------------------

def configure_tag_run(parser):
    parser.add_argument("tag", help="tag-system JSON document")
    parser.add_argument("input", help="input word over the tag alphabet")
    parser.add_argument("--max-iterations", type=int)


def cmd_tag_run(args, settings: Settings) -> int:
    t = load_valid_tag_system(args.tag)
    word = parse_word(args.input, t.alphabet, "tag alphabet")
    budget = args.max_iterations if args.max_iterations is not None else settings.tag_budget
    outcome = run_tag(t, word, budget)
    print(outcome.describe())
    return EXIT_OK if outcome.halted else EXIT_NEGATIVE


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def configure_verify(parser):
    parser.add_argument("tag", nargs="?", help="tag-system JSON document")
    corpus = parser.add_mutually_exclusive_group()
    corpus.add_argument("--max-len", type=int, default=4, help="corpus of all words with 2 <= |w| <= L")
    corpus.add_argument("--words", nargs="+", metavar="W", help="explicit corpus")
    parser.add_argument("--must-not-accept", nargs="+", metavar="W", default=[],
                        help="words whose tag computation is known to loop")
    parser.add_argument("--tag-budget", type=int)
    parser.add_argument("--net-budget", type=int)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--report", metavar="FILE", help="write the JSON report")
    parser.add_argument("--golden", metavar="FILE", help="compare with (or record) golden step counts")
    parser.add_argument("--random-systems", type=int, metavar="N", help="sweep N seeded random tag systems")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--alphabet-size", type=int, default=3)
    parser.add_argument("--max-production-length", type=int, default=3)


def _summary_line(summary) -> str:
    return " ".join(f"{key}={value}" for key, value in summary.items())


def cmd_verify(args, settings: Settings) -> int:
    tag_budget = args.tag_budget if args.tag_budget is not None else settings.tag_budget
    net_budget = args.net_budget if args.net_budget is not None else settings.net_budget
    workers = args.workers or settings.workers

    if args.random_systems is not None:
        entries = random_sweep(args.random_systems, args.seed, args.alphabet_size, args.max_production_length,
                               args.max_len, tag_budget, net_budget, workers)
        mismatches = 0
        for entry in entries:
            productions = ", ".join(f"{a}->{''.join(w)}" for a, w in entry.system.productions)
            print(f"seed={entry.spec.seed} {productions}: {_summary_line(entry.report.summary)}")
            mismatches += entry.report.count(Verdict.MISMATCH)
        if args.report:
            data = [{"seed": e.spec.seed, "productions": {a: list(w) for a, w in e.system.productions},
                     **e.report.to_dict()} for e in entries]
            Path(args.report).write_text(canonical_json(data), encoding="utf-8")
        print(f"SYSTEMS={len(entries)} mismatch={mismatches}")
        return EXIT_OK if mismatches == 0 else EXIT_NEGATIVE

    if not args.tag:
        raise ValueError("verify needs a tag-system document or --random-systems")
    t = load_valid_tag_system(args.tag)
    if args.words:
        corpus = [parse_word(w, t.non_halting) for w in args.words]
    else:
        corpus = word_corpus(t, args.max_len)
    loops = [parse_word(w, t.non_halting) for w in args.must_not_accept]
    report = equivalence_check(t, corpus, tag_budget, net_budget, workers, must_not_accept=loops)
    if args.report:
        Path(args.report).write_text(canonical_json(report.to_dict()), encoding="utf-8")
    for record in report.mismatches:
        _error(f"mismatch: '{render_word(record.word)}' tag {record.tag.describe()} network {record.network.describe()}")

    golden_ok = True
    if args.golden:
        golden_path = Path(args.golden)
        if len(golden_path.parts) == 1 and not golden_path.exists():
            golden_path = Path(settings.golden_dir) / golden_path
        if golden_path.exists():
            expected = load_golden(golden_path)
            for word, steps in sorted(report.golden.items()):
                if word in expected and expected[word] != steps:
                    golden_ok = False
                    _error(f"golden step count differs for '{word}': expected {expected[word]}, got {steps}")
        else:
            golden_path.parent.mkdir(parents=True, exist_ok=True)
            write_golden(golden_path, report.golden)
            logger.info(f"Recorded {len(report.golden)} golden step counts in {golden_path}")

    print(_summary_line(report.summary))
    return EXIT_OK if not report.mismatches and golden_ok else EXIT_NEGATIVE


# ---------------------------------------------------------------------------
# milestones
# ---------------------------------------------------------------------------

def configure_milestones(parser):
    parser.add_argument("tag", help="tag-system JSON document")
    parser.add_argument("input", help="word a b y over V'")
    parser.add_argument("--max-steps", type=int, default=2000)


def cmd_milestones(args, settings: Settings) -> int:
    t = load_valid_tag_system(args.tag)
    word = parse_word(args.input, t.non_halting)
    try:
        result = track_milestones(t, word, max_steps=args.max_steps)
    except MilestoneMissedError as e:
        print(f"MILESTONE_MISSED step={e.step} expected={e.expected}")
        if e.excerpt:
            _error(e.excerpt)
        return EXIT_NEGATIVE
    print(f"MILESTONES_OK steps={','.join(str(s) for s in result.steps)}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------

def cmd_config(args, settings: Settings) -> int:
    print(json.dumps(args.config_manager.get_config_info(), indent=2))
    return EXIT_OK


def build_registry() -> CommandRegistry:
    registry = CommandRegistry()
    registry.register(Command("validate", cmd_validate, "check a network or tag-system document", configure=configure_validate))
    registry.register(Command("compile", cmd_compile, "compile a tag system into its 10-node network", configure=configure_compile))
    registry.register(Command("run", cmd_run, "run a network on an input word", configure=configure_run))
    registry.register(Command("tag-run", cmd_tag_run, "iterate a tag system on a word", aliases=["tag"], configure=configure_tag_run))
    registry.register(Command("verify", cmd_verify, "compare the compiled network with the tag oracle", configure=configure_verify))
    registry.register(Command("milestones", cmd_milestones, "follow one simulated tag step through the network", configure=configure_milestones))
    registry.register(Command("config", cmd_config, "show the effective settings"))
    return registry


def add_global_arguments(parser):
    parser.add_argument("--config", metavar="PATH", help="YAML settings file (default: ./anepfc.yaml when present)")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("-q", "--quiet", action="store_true")


def main(argv: Optional[List[str]] = None) -> int:
    registry = build_registry()
    parser = registry.build_parser("anepfc", "ANEPFC toolkit", add_global_arguments)
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    try:
        manager = ConfigManager(args.config)
    except ConfigError as e:
        _error(f"error: {e}")
        return EXIT_USAGE
    args.config_manager = manager
    setup_logging(manager.settings, args.verbose, args.quiet)

    command = registry.get_command(args.command_name)
    try:
        return command.handler(args, manager.settings)
    except TraceMismatchError as e:
        print(f"TRACE_MISMATCH step={e.step}")
        _error(f"error: {e}")
        return EXIT_NEGATIVE
    except USAGE_ERRORS as e:
        _error(f"error: {e}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
