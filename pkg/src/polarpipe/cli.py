"""Command-line interface: ``polarpipe <command> [flags]``.

Exit codes: 0 success, 2 usage error, 3 invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import re
import sys
from pathlib import Path

from . import harness
from .code_model import (
    ChannelConfig,
    QuantSpec,
    construct_frozen_set,
    format_frozen_set,
    parse_frozen_text,
    simulate_frames,
)
from .pipeline_sim import check_timing, run as run_pipeline
from .reference_decoders import decoders_agree, fastssc_interpret
from .tree_compiler import CompilerConfig, build_tree, emit_program, program_stats, tree_to_dot
from .unroller import check_sync, emit_netlist, resource_report, unroll

log = logging.getLogger("polarpipe")

EXIT_USAGE = 2
EXIT_VIOLATION = 3


class UsageError(Exception):
    pass


def _csv_text(header, rows, footer=()) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    for line in footer:
        buf.write(f"# {line}\n")
    return buf.getvalue()


def _float_list(text: str) -> list[float]:
    items = [t for t in re.split(r"[,\s]+", text.strip()) if t]
    if not items:
        raise UsageError("empty list")
    return [float(t) for t in items]


def _int_list(text: str) -> list[int]:
    return [int(v) for v in _float_list(text)]


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text)
    return path


def _load_code(args):
    path = Path(args.frozen)
    if not path.is_file():
        raise UsageError(f"frozen-set file not found: {path}")
    text = path.read_text()
    n = args.n
    if n is None:
        m = re.search(r"N\s*=\s*(\d+)", text)
        if not m:
            raise UsageError("block length unknown: pass --n")
        n = int(m.group(1))
    return parse_frozen_text(text, n)


def _code_from_args(args):
    if getattr(args, "frozen", None):
        return _load_code(args)
    if args.n is None or args.k is None:
        raise UsageError("give --frozen FILE, or --n and --k")
    return construct_frozen_set(args.n, args.k, args.design_snr)


def _compiler_cfg(args):
    return CompilerConfig(args.cap_repspc, args.cap_rate)


def cmd_construct(args) -> int:
    if args.load:
        spec = _load_code(argparse.Namespace(frozen=args.load, n=args.n))
    else:
        if args.n is None or args.k is None:
            raise UsageError("construct needs --n and --k (or --load FILE)")
        spec = construct_frozen_set(args.n, args.k, args.design_snr)
    path = _write(Path(args.out), args.name, format_frozen_set(spec))
    print(f"N={spec.n_block} K={spec.k_info} R={spec.rate} frozen={len(spec.frozen_set)} -> {path}")
    return 0


def cmd_compile(args) -> int:
    spec = _code_from_args(args)
    quant = QuantSpec.parse(args.quant)
    cfg = _compiler_cfg(args)
    tree = build_tree(spec, cfg)
    prog = emit_program(tree)
    netlist = unroll(prog, quant)
    report = resource_report(netlist, quant, args.freq_mhz * 1e6)
    out = Path(args.out)
    _write(out, "program.json", prog.to_json())
    _write(out, "netlist.json", emit_netlist(netlist, "json"))
    _write(out, "netlist.dot", emit_netlist(netlist, "dot"))
    _write(out, "tree.dot", tree_to_dot(tree))
    body = {
        "code": {"n_block": spec.n_block, "k_info": spec.k_info, "rate": str(spec.rate)},
        "compiler": {"cap_repspc": cfg.cap_repspc, "cap_rate": cfg.rate_cap(spec.n_block)},
        "quant": str(quant),
        "program": program_stats(prog),
        "report": report.to_dict(),
    }
    _write(out, "report.json", json.dumps(body, indent=1, sort_keys=True) + "\n")
    tp = report.throughput_model
    print(
        f"latency={report.latency_cycles} CC  register_bits={report.register_bits}  "
        f"coded={tp.coded_bps / 1e9:.4g} Gbps  info={tp.info_bps / 1e9:.4g} Gbps"
    )
    problems = check_sync(netlist)
    if problems or report.latency_cycles != len(prog):
        for p in problems:
            log.error(p)
        return EXIT_VIOLATION
    return 0


def cmd_ber(args) -> int:
    spec = _code_from_args(args)
    quant = QuantSpec.parse(args.quant)
    cfg = _compiler_cfg(args)
    if not args.ebno_list:
        raise UsageError("--ebno-list is required")
    ebnos = _float_list(args.ebno_list)
    kwargs = dict(
        min_frame_errors=args.min_frame_errors,
        max_frames=args.max_frames,
        min_frames=args.min_frames,
        batch=args.batch,
    )
    kinds = list(harness.DECODERS) if args.check else [args.decoder]
    results = {}
    for kind in kinds:
        dec = harness.Decoder(kind, spec, quant, cfg, lanes=args.lanes)
        results[kind] = harness.ber_curve(dec, ebnos, args.seed, **kwargs)
    rows = [r.csv_fields() for r in results[args.decoder]]
    text = _csv_text(harness.BER_HEADER, rows)
    _write(Path(args.out), args.name, text)
    sys.stdout.write(text)
    if args.check:
        ref = [r.csv_fields() for r in results["sc"]]
        bad = [k for k in kinds if [r.csv_fields() for r in results[k]] != ref]
        if bad:
            log.error("decoders disagree with sc: %s", ", ".join(bad))
            return EXIT_VIOLATION
    return 0


def cmd_sweep(args) -> int:
    if not args.n_list:
        raise UsageError("--n-list is required")
    ns = _int_list(args.n_list)
    quant = QuantSpec.parse(args.quant)
    cfg = CompilerConfig(args.cap_repspc, args.cap_rate)
    rows = harness.sweep(ns, args.rate, args.design_snr, cfg, quant)
    footer = []
    if len(rows) >= 2:
        e = harness.power_law_exponent([r.n_block for r in rows], [r.register_bits for r in rows])
        footer.append(f"register_bits power-law exponent: {e:.4f}")
    body = [[r.n_block, r.latency_cycles, r.register_bits, r.instruction_count] for r in rows]
    text = _csv_text(["N", "latency_cycles", "register_bits", "instruction_count"], body, footer)
    _write(Path(args.out), args.name, text)
    sys.stdout.write(text)
    return 0


def cmd_simulate(args) -> int:
    spec = _code_from_args(args)
    quant = QuantSpec.parse(args.quant)
    prog = emit_program(build_tree(spec, _compiler_cfg(args)))
    netlist = unroll(prog, quant)
    fb = simulate_frames(spec, ChannelConfig(args.ebno, args.seed), quant, 0, args.frames)
    res = run_pipeline(netlist, fb.llrs, quant, lanes=args.lanes, record_occupancy=args.trace)
    timing = check_timing(res.trace, netlist)
    ref = fastssc_interpret(prog, fb.llrs, quant).x_hat
    mismatches = int((res.x_hat != ref).any(axis=1).sum()) if args.frames else 0
    out = Path(args.out)
    if args.trace:
        _write(out, "trace.csv", res.trace.to_csv(netlist))
    summary = {
        "frames": args.frames,
        "lanes": args.lanes,
        "latency_cycles": netlist.latency,
        "cycles": res.trace.cycles,
        "frames_per_cycle": (args.frames / res.trace.cycles) if res.trace.cycles else 0.0,
        "timing_passed": timing.passed,
        "timing_failures": timing.failures[:20],
        "mismatches_vs_fastssc": mismatches,
    }
    _write(out, "simulate.json", json.dumps(summary, indent=1, sort_keys=True) + "\n")
    print(json.dumps(summary, sort_keys=True))
    return 0 if timing.passed and mismatches == 0 else EXIT_VIOLATION


def cmd_agree(args) -> int:
    spec = _code_from_args(args)
    quant = QuantSpec.parse(args.quant)
    rep = decoders_agree(spec, _compiler_cfg(args), args.frames, args.seed, args.ebno, quant)
    _write(Path(args.out), "mismatches.jsonl", "".join(line + "\n" for line in rep.mismatch_lines))
    print(f"frames={rep.frames} ebno={rep.ebno_db:g} mismatches={rep.mismatches}")
    return 0 if rep.ok else EXIT_VIOLATION


def _add_code_flags(p):
    p.add_argument("--frozen", help="frozen-set file (whitespace-separated indices)")
    p.add_argument("--n", type=int, help="block length N")
    p.add_argument("--k", type=int, help="info length K (when constructing)")
    p.add_argument("--design-snr", type=float, default=0.0, help="design Eb/N0 in dB for construction")


def _add_compile_flags(p):
    p.add_argument("--cap-repspc", type=int, default=4, help="max span of Rep/SPC leaves")
    p.add_argument("--cap-rate", type=int, default=None, help="max span of Rate0/Rate1 leaves (default N)")
    p.add_argument("--quant", default="fixed:6", help="'float' or 'fixed:<bits>'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polarpipe", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="key=value file supplying defaults for the command's flags")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("construct", help="build or validate a frozen set")
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--design-snr", type=float, default=0.0)
    p.add_argument("--load", help="validate an existing frozen-set file instead of constructing")
    p.add_argument("--out", default="out")
    p.add_argument("--name", default="frozen.txt")
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("compile", help="compile, unroll and report")
    _add_code_flags(p)
    _add_compile_flags(p)
    p.add_argument("--freq-mhz", type=float, default=231.0)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("ber", help="Monte-Carlo BER/FER")
    _add_code_flags(p)
    _add_compile_flags(p)
    p.add_argument("--ebno-list", help="comma-separated Eb/N0 values in dB")
    p.add_argument("--min-frame-errors", type=int, default=100)
    p.add_argument("--min-frames", type=int, default=0)
    p.add_argument("--max-frames", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--decoder", choices=harness.DECODERS, default="fastssc")
    p.add_argument("--check", action="store_true", help="run all decoders and fail on any disagreement")
    p.add_argument("--batch", type=int, default=1024)
    p.add_argument("--lanes", type=int, default=128, help="pipeline lanes simulated in lockstep")
    p.add_argument("--out", default="out")
    p.add_argument("--name", default="ber.csv")
    p.set_defaults(func=cmd_ber)

    p = sub.add_parser("sweep", help="latency/register growth over block lengths")
    p.add_argument("--n-list", help="comma-separated block lengths")
    p.add_argument("--rate", type=float, default=0.5)
    p.add_argument("--design-snr", type=float, default=0.0)
    _add_compile_flags(p)
    p.add_argument("--out", default="out")
    p.add_argument("--name", default="sweep.csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="cycle-accurate pipeline run with timing check")
    _add_code_flags(p)
    _add_compile_flags(p)
    p.add_argument("--frames", type=int, default=3)
    p.add_argument("--ebno", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lanes", type=int, default=1)
    p.add_argument("--trace", action="store_true", help="write trace.csv (stage occupancy)")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("agree", help="differential SC vs Fast-SSC run")
    _add_code_flags(p)
    _add_compile_flags(p)
    p.add_argument("--frames", type=int, default=10_000)
    p.add_argument("--ebno", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_agree)
    return parser


def read_config(path) -> dict:
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.lstrip("-").replace("-", "_")] = value
    return values


def _apply_config(parser, argv, config: dict):
    """Re-parse with config values as defaults so explicit flags still win."""
    args = parser.parse_args(argv)
    sub = next(a for a in parser._subparsers._group_actions if isinstance(a, argparse._SubParsersAction))
    subparser = sub.choices[args.command]
    known = {a.dest: a for a in subparser._actions}
    defaults = {}
    for key, value in config.items():
        if key not in known:
            raise UsageError(f"config key {key!r} is not a flag of {args.command!r}")
        action = known[key]
        if isinstance(action, argparse._StoreTrueAction):
            defaults[key] = value.lower() in ("1", "true", "yes", "on")
        else:
            defaults[key] = action.type(value) if action.type else value
    subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.config:
            args = _apply_config(parser, argv, read_config(args.config))
        return args.func(args)
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
