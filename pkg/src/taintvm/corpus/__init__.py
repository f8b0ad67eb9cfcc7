"""Assembler and the fixture catalogue of attack and false-positive patterns."""

from .asm import (
    AsmError,
    DuplicateLabel,
    ImmediateTooWide,
    UndefinedLabel,
    UnknownMnemonic,
    assemble,
    assemble_file,
    disassemble,
    labels_of,
)
from .catalogue import (
    Drain,
    Expectation,
    Fixture,
    FixtureTx,
    ManifestError,
    Outcome,
    UnknownFixture,
    Verdict,
    all_fixtures,
    check_expectation,
    corpus_root,
    fixture_names,
    flagged_of,
    load_fixture,
    load_manifest,
    parse_manifest,
    replay,
    verdict_of,
)

__all__ = [
    "AsmError", "DuplicateLabel", "ImmediateTooWide", "UndefinedLabel", "UnknownMnemonic",
    "assemble", "assemble_file", "disassemble", "labels_of",
    "Drain", "Expectation", "Fixture", "FixtureTx", "ManifestError", "Outcome",
    "UnknownFixture", "Verdict", "all_fixtures", "check_expectation", "corpus_root",
    "fixture_names", "flagged_of", "load_fixture", "load_manifest", "parse_manifest", "replay", "verdict_of",
]
