"""Command-line front end.

    taintvm run <scenario>... [--mode enforce|monitor] [--taint on|off]
                              [--trace] [--json] [--parallel K]
    taintvm trace <scenario>
    taintvm bench [pattern ...] [--iterations N] [--warmup W] [--benign-only] [--json]
    taintvm list
    taintvm asm <file.asm>
    taintvm disasm <hex | file>
    taintvm opcodes

A scenario is a catalogue fixture name or a path to a manifest file.

Exit codes: 0 when every expectation holds, 1 on an expectation mismatch,
2 on usage, parse or I/O errors.
"""

from __future__ import annotations

import argparse
import fnmatch
import json
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

from . import __version__
from .corpus import (
    AsmError,
    Fixture,
    ManifestError,
    UnknownFixture,
    assemble_file,
    disassemble,
    fixture_names,
    load_fixture,
    load_manifest,
)
from .corpus.catalogue import check_expectation, verdict_of
from .detector import Mode
from .evm.code import parse_bytecode
from .evm.opcodes import opcode_table_json
from .harness import Config, Receipt, apply_transaction

REPORT_SCHEMA = "taintvm.run-report/1"
BENCH_SCHEMA = "taintvm.bench-report/1"
SCHEMA_PATH = Path(__file__).with_name("schemas") / "run_report.schema.json"

EXIT_OK, EXIT_MISMATCH, EXIT_ERROR = 0, 1, 2


class ScenarioError(Exception):
    pass


def resolve_scenario(spec: str) -> Fixture:
    path = Path(spec)
    try:
        if path.suffix == ".json" or path.exists():
            if not path.is_file():
                raise ScenarioError(f"scenario file not found: {spec}")
            return load_manifest(path)
        return load_fixture(spec)
    except UnknownFixture:
        raise ScenarioError(f"unknown fixture: {spec}") from None
    except (ManifestError, AsmError, KeyError, TypeError, ValueError, OSError) as exc:
        raise ScenarioError(f"{spec}: {exc}") from None


# -- run ------------------------------------------------------------------------


def _tx_summary(label: str, receipt: Receipt) -> Dict[str, Any]:
    out: Dict[str, Any] = {
        "label": label,
        "status": receipt.status.value,
        "verdict": verdict_of(receipt).value,
        "gas_used": receipt.gas_used,
        "instructions": receipt.instructions,
        "output": "0x" + receipt.output.hex(),
        "error": receipt.error,
        "contract_address": None if receipt.contract_address is None
        else f"0x{receipt.contract_address:040x}",
        "attacks": [a.to_json() for a in receipt.attacks],
    }
    if receipt.trace is not None:
        out["trace"] = receipt.trace
    return out


def run_report(fixture: Fixture, mode: Optional[str] = None, taint: bool = True,
               trace: bool = False) -> Dict[str, Any]:
    """Replay ``fixture`` and build its RunReport document."""
    mode = Mode(mode or fixture.mode or Mode.ENFORCE)
    config = Config(mode=mode, taint=taint, trace=trace)
    world = fixture.world()
    elapsed = 0.0
    txs, mismatches = [], []
    for i, ftx in enumerate(fixture.transactions):
        start = time.perf_counter()
        receipt = apply_transaction(world, ftx.transaction, config, transaction_id=i)
        elapsed += time.perf_counter() - start
        txs.append(_tx_summary(ftx.label, receipt))
        if taint:
            mismatches += check_expectation(ftx, receipt, fixture, mode)
    return {
        "schema": REPORT_SCHEMA,
        "scenario": fixture.name,
        "source": fixture.source,
        "mode": mode.value,
        "taint": taint,
        "transactions": txs,
        "attack_count": sum(len(t["attacks"]) for t in txs),
        "mismatches": mismatches,
        "ok": not mismatches,
        "world_digest": world.digest(),
        "timing": {"execution_seconds": elapsed},
    }


def _run_one(spec: str, mode: Optional[str], taint: bool, trace: bool) -> Dict[str, Any]:
    try:
        return run_report(resolve_scenario(spec), mode, taint, trace)
    except ScenarioError as exc:
        return {"error": str(exc), "scenario": spec}


def _print_human(report: Dict[str, Any], out) -> None:
    print(f"{report['scenario']}  mode={report['mode']} taint={'on' if report['taint'] else 'off'}",
          file=out)
    for tx in report["transactions"]:
        line = f"  {tx['label']:<28} {tx['status']:<14} {tx['verdict']}"
        if tx["error"]:
            line += f"  ({tx['error']})"
        print(line, file=out)
        for a in tx["attacks"]:
            print(f"    write to locked slot {a['slot']} of {a['context']} at pc {a['pc']}"
                  f" (node {a['node']}, locked by {a['locking_nodes']})", file=out)
        for rec in tx.get("trace", ()):
            print("    " + json.dumps(rec, separators=(",", ":")), file=out)
    for m in report["mismatches"]:
        print(f"  MISMATCH {m}", file=out)
    print(f"  world digest {report['world_digest']}", file=out)


def cmd_run(args: argparse.Namespace) -> int:
    taint = args.taint == "on"
    jobs = [(s, args.mode, taint, args.trace) for s in args.scenarios]
    if args.parallel > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.parallel) as pool:
            reports = list(pool.map(_run_one, *zip(*jobs)))
    else:
        reports = [_run_one(*j) for j in jobs]

    errors = [r for r in reports if "error" in r]
    good = [r for r in reports if "error" not in r]
    for r in errors:
        print(f"error: {r['error']}", file=sys.stderr)
    if args.json:
        doc = {"schema": REPORT_SCHEMA, "version": __version__, "scenarios": good,
               "ok": not errors and all(r["ok"] for r in good)}
        json.dump(doc, sys.stdout, indent=2)
        sys.stdout.write("\n")
    else:
        for r in good:
            _print_human(r, sys.stdout)
    if errors:
        return EXIT_ERROR
    return EXIT_OK if all(r["ok"] for r in good) else EXIT_MISMATCH


# -- trace ------------------------------------------------------------------------


def cmd_trace(args: argparse.Namespace) -> int:
    try:
        fixture = resolve_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    report = run_report(fixture, args.mode, taint=True, trace=True)
    for i, tx in enumerate(report["transactions"]):
        for rec in tx["trace"]:
            sys.stdout.write(json.dumps({"tx": i, **rec}, separators=(",", ":")) + "\n")
    return EXIT_OK


# -- bench ------------------------------------------------------------------------


def select_fixtures(patterns: Sequence[str], benign_only: bool) -> List[Fixture]:
    names = fixture_names()
    chosen: List[Fixture] = []
    for pattern in patterns or ["*"]:
        path = Path(pattern)
        if path.suffix == ".json" and path.is_file():
            chosen.append(load_manifest(path))
            continue
        for name in names:
            if fnmatch.fnmatch(name, pattern) and all(f.name != name for f in chosen):
                chosen.append(load_fixture(name))
    if benign_only:
        chosen = [f for f in chosen if f.is_benign]
    return chosen


def _flagged_indices(fixture: Fixture) -> set:
    world = fixture.world()
    config = Config(mode=Mode.ENFORCE)
    flagged = set()
    for i, ftx in enumerate(fixture.transactions):
        if apply_transaction(world, ftx.transaction, config, i).attacks:
            flagged.add(i)
    return flagged


def _time_once(fixtures: Iterable[Fixture], skip: Dict[str, set], config: Config) -> float:
    total = 0.0
    clock = time.perf_counter
    for fx in fixtures:
        world = fx.world()
        excluded = skip[fx.name]
        for i, ftx in enumerate(fx.transactions):
            if i in excluded:
                apply_transaction(world, ftx.transaction, config, i)
                continue
            start = clock()
            apply_transaction(world, ftx.transaction, config, i)
            total += clock() - start
    return total


def bench(fixtures: Sequence[Fixture], iterations: int, warmup: int = 0) -> Dict[str, Any]:
    """Time execution with taint tracking off and on.

    Only interpreter execution is timed: world construction is outside the
    clock, and transactions the detector flags are left out of both
    configurations.
    """
    skip = {fx.name: _flagged_indices(fx) for fx in fixtures}
    configs = {"taint-off": Config(taint=False), "taint-on": Config(mode=Mode.ENFORCE)}
    samples: Dict[str, List[float]] = {k: [] for k in configs}
    for _ in range(warmup):
        for cfg in configs.values():
            _time_once(fixtures, skip, cfg)
    for _ in range(iterations):
        # interleave so drift affects both configurations alike
        for key, cfg in configs.items():
            samples[key].append(_time_once(fixtures, skip, cfg))
    stats = {}
    for key, values in samples.items():
        stats[key] = {
            "mean_ms": statistics.fmean(values) * 1e3,
            "std_ms": (statistics.stdev(values) if len(values) > 1 else 0.0) * 1e3,
        }
    off, on = stats["taint-off"]["mean_ms"], stats["taint-on"]["mean_ms"]
    return {
        "schema": BENCH_SCHEMA,
        "fixtures": [fx.name for fx in fixtures],
        "transactions_timed": sum(len(fx.transactions) - len(skip[fx.name]) for fx in fixtures),
        "transactions_excluded": sum(len(s) for s in skip.values()),
        "iterations": iterations,
        "warmup": warmup,
        "configurations": stats,
        "overhead_percent": (on - off) / off * 100.0 if off > 0 else float("nan"),
    }


def cmd_bench(args: argparse.Namespace) -> int:
    if args.iterations < 1 or args.warmup < 0:
        print("error: --iterations must be >= 1 and --warmup >= 0", file=sys.stderr)
        return EXIT_ERROR
    try:
        fixtures = select_fixtures(args.patterns, args.benign_only)
    except (ManifestError, AsmError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if not fixtures:
        print("error: no fixtures match", file=sys.stderr)
        return EXIT_ERROR
    result = bench(fixtures, args.iterations, args.warmup)
    if args.json:
        json.dump(result, sys.stdout, indent=2)
        sys.stdout.write("\n")
        return EXIT_OK
    print(f"fixtures: {', '.join(result['fixtures'])}")
    print(f"transactions timed per iteration: {result['transactions_timed']}"
          f" (excluded as flagged: {result['transactions_excluded']})")
    print(f"iterations: {args.iterations} after {args.warmup} warmup")
    print(f"{'configuration':<14}{'mean ms':>12}{'std ms':>12}")
    for key, s in result["configurations"].items():
        print(f"{key:<14}{s['mean_ms']:>12.3f}{s['std_ms']:>12.3f}")
    print(f"overhead: {result['overhead_percent']:.1f}%")
    return EXIT_OK


# -- small tools ------------------------------------------------------------------


def cmd_list(args: argparse.Namespace) -> int:
    for name in fixture_names():
        fx = load_fixture(name)
        print(f"{name:<26} {','.join(fx.tags):<18} {fx.description}")
    return EXIT_OK


def cmd_asm(args: argparse.Namespace) -> int:
    try:
        code = assemble_file(args.file)
    except (AsmError, OSError) as exc:
        print(f"error: {args.file}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print("0x" + code.hex())
    return EXIT_OK


def cmd_disasm(args: argparse.Namespace) -> int:
    source = args.code
    try:
        text = Path(source).read_text().strip() if Path(source).is_file() else source
        code = parse_bytecode(text)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(disassemble(code, offsets=args.offsets))
    return EXIT_OK


def cmd_opcodes(args: argparse.Namespace) -> int:
    print(opcode_table_json())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="taintvm", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"taintvm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="replay scenarios and report detections")
    p.add_argument("scenarios", nargs="+")
    p.add_argument("--mode", choices=[m.value for m in Mode])
    p.add_argument("--taint", choices=["on", "off"], default="on")
    p.add_argument("--trace", action="store_true")
    p.add_argument("--json", action="store_true")
    p.add_argument("--parallel", type=int, default=1, metavar="K")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("trace", help="emit a JSON-lines instruction trace")
    p.add_argument("scenario")
    p.add_argument("--mode", choices=[m.value for m in Mode])
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("bench", help="time taint-off against taint-on execution")
    p.add_argument("patterns", nargs="*", help="fixture name globs or manifest paths")
    p.add_argument("--iterations", "-n", type=int, default=100)
    p.add_argument("--warmup", "-w", type=int, default=5)
    p.add_argument("--benign-only", action="store_true")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("list", help="list catalogue fixtures")
    p.set_defaults(func=cmd_list)

    p = sub.add_parser("asm", help="assemble a file to hex")
    p.add_argument("file")
    p.set_defaults(func=cmd_asm)

    p = sub.add_parser("disasm", help="disassemble hex bytecode or a file holding it")
    p.add_argument("code")
    p.add_argument("--offsets", action="store_true")
    p.set_defaults(func=cmd_disasm)

    p = sub.add_parser("opcodes", help="print the opcode and gas table")
    p.set_defaults(func=cmd_opcodes)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
