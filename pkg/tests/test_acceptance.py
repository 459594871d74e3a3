"""End-to-end acceptance criteria; each test prints one PASS/FAIL line."""

import json
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from polarpipe import harness
from polarpipe.cli import main
from polarpipe.code_model import FIXED6, ChannelConfig, PolarCodeSpec, construct_frozen_set, simulate_frames
from polarpipe.pipeline_sim import check_timing, run
from polarpipe.reference_decoders import fastssc_interpret, sc_decode
from polarpipe.tree_compiler import CompilerConfig, build_tree, compile_code, program_stats
from polarpipe.unroller import check_sync, latency_of, resource_report, unroll

LATENCY_SNAPSHOT_1024 = 461
TOY = PolarCodeSpec(8, (0, 1, 2, 4))


@pytest.fixture
def verdict(capsys):
    def report(number, title, ok, detail, elapsed=None, budget=None):
        within = elapsed is None or elapsed < budget
        status = "PASS" if ok and within else "FAIL"
        timing = "" if elapsed is None else f" [{elapsed:.2f}s / {budget:g}s]"
        with capsys.disabled():
            print(f"\nCRITERION {number} {status}: {title}: {detail}{timing}")
        assert ok, detail
        assert within, f"took {elapsed:.2f}s, budget {budget}s"

    return report


def test_criterion_1_toy_tree_and_program(verdict):
    t0 = time.perf_counter()
    tree = build_tree(TOY, CompilerConfig(4, 1024))
    prog = compile_code(TOY, CompilerConfig(4, 8))
    shape = tree.shape()
    ok = shape == ("Branch", 8, ("Rep", 4), ("SPC", 4)) and prog.labels == ["F8", "Rep4", "G8", "SPC4", "Comb8"]
    verdict(1, "(8,4) tree and program", ok, f"tree={shape} program={prog.labels}", time.perf_counter() - t0, 1)


def test_criterion_2_three_frame_timing(verdict):
    t0 = time.perf_counter()
    net = unroll(compile_code(TOY), FIXED6)
    llrs = simulate_frames(TOY, ChannelConfig(2.0, 0), FIXED6, 0, 3).llrs
    res = run(net, llrs, FIXED6)
    timing = check_timing(res.trace, net)
    ingest = [c for c, _ in res.trace.ingests]
    diagonal = all(
        beat == (cycle - stage if 0 <= cycle - stage < 3 else None)
        for cycle, row in enumerate(res.trace.occupancy)
        for stage, beat in enumerate(row)
    )
    ok = (
        timing.passed
        and ingest == [0, 1, 2]
        and net.latency == 5
        and res.output_cycles == [5, 6, 7]
        and diagonal
    )
    detail = f"ingest={ingest} outputs={res.output_cycles} latency={net.latency} diagonal={diagonal}"
    verdict(2, "three-frame timing", ok, detail, time.perf_counter() - t0, 1)


def test_criterion_3_throughput(verdict):
    net = unroll(compile_code(construct_frozen_set(1024, 512)), FIXED6)
    r231 = resource_report(net, FIXED6, 231e6).throughput_model
    r206 = resource_report(net, FIXED6, 206e6).throughput_model
    checks = {
        "info@231": (r231.info_bps, 118.5e9),
        "coded@231": (r231.coded_bps, 237e9),
        "info@206": (r206.info_bps, 105.3e9),
    }
    errs = {k: abs(v / ref - 1) for k, (v, ref) in checks.items()}
    exact = r231.info_bps == 1024 * 231e6 * 0.5 and r231.rate == Fraction(1, 2)
    ok = exact and all(e <= 3e-3 for e in errs.values())
    detail = ", ".join(f"{k}={checks[k][0] / 1e9:.3f} Gbps ({errs[k] * 100:.2f}%)" for k in checks)
    verdict(3, "throughput PfR", ok, detail)


def test_criterion_4_latency(verdict):
    t0 = time.perf_counter()
    invariant = True
    for n, k in [(8, 4), (16, 8), (64, 32), (128, 30), (256, 128), (512, 400), (1024, 512), (2048, 1024)]:
        prog = compile_code(construct_frozen_set(n, k))
        invariant &= latency_of(unroll(prog, FIXED6)) == program_stats(prog)["instruction_count"]
    prog = compile_code(construct_frozen_set(1024, 512), CompilerConfig(4, 1024))
    lat = latency_of(unroll(prog, FIXED6))
    ok = invariant and 300 <= lat <= 900 and lat == LATENCY_SNAPSHOT_1024
    detail = f"latency==instructions: {invariant}; (1024,512) latency={lat} (snapshot {LATENCY_SNAPSHOT_1024})"
    verdict(4, "latency", ok, detail, time.perf_counter() - t0, 5)


def test_criterion_5_oracle_equivalence(verdict):
    t0 = time.perf_counter()
    codes = [TOY] + [construct_frozen_set(n, n // 2) for n in (64, 256, 1024)]
    frames = 10_000
    mismatches = {}
    for spec in codes:
        prog = compile_code(spec)
        net = unroll(prog, FIXED6)
        for ebno in (1.0, 3.0):
            llrs = simulate_frames(spec, ChannelConfig(ebno, 2024), FIXED6, 0, frames).llrs
            sc = sc_decode(spec, llrs, FIXED6).x_hat
            fast = fastssc_interpret(prog, llrs, FIXED6).x_hat
            pipe = run(net, llrs, FIXED6, lanes=128, record_occupancy=False).x_hat
            bad = int(((sc != fast).any(axis=1) | (sc != pipe).any(axis=1)).sum())
            mismatches[f"({spec.n_block},{spec.k_info})@{ebno:g}dB"] = bad
    ok = not any(mismatches.values())
    detail = f"{frames} frames per point, mismatches {mismatches}"
    verdict(5, "SC = Fast-SSC = pipeline", ok, detail, time.perf_counter() - t0, 120)


def test_criterion_6_quadratic_trend(verdict):
    t0 = time.perf_counter()
    rows = harness.sweep([64, 128, 256, 512, 1024])
    e = harness.power_law_exponent([r.n_block for r in rows], [r.register_bits for r in rows])
    verdict(6, "register growth", 1.7 <= e <= 2.3, f"exponent {e:.3f}", time.perf_counter() - t0, 10)


def test_criterion_7_monte_carlo(verdict):
    t0 = time.perf_counter()
    spec = construct_frozen_set(1024, 512)
    curves = {}
    for kind in harness.DECODERS:
        dec = harness.Decoder(kind, spec, FIXED6)
        rows = harness.ber_curve(dec, [1.0, 2.0, 3.0], seed=7, min_frame_errors=10**9, max_frames=10_000)
        curves[kind] = [(r.frames, r.bit_errors, r.frame_errors) for r in rows]
    ref = curves["sc"]
    identical = all(c == ref for c in curves.values())
    bers = [b / (f * spec.k_info) for f, b, _ in ref]
    decreasing = all(a > b for a, b in zip(bers, bers[1:]))
    enough = all(f >= 10_000 for f, _, _ in ref)
    detail = f"BER {[f'{b:.3e}' for b in bers]}, identical across decoders: {identical}"
    verdict(7, "Monte-Carlo BER", identical and decreasing and enough, detail, time.perf_counter() - t0, 300)


def test_criterion_8_determinism(verdict, tmp_path):
    runs = {
        "compile": (["compile", "--n", "256", "--k", "128", "--freq-mhz", "231"], ["program.json", "netlist.json"]),
        "ber": (["ber", "--n", "64", "--k", "32", "--ebno-list", "1,2", "--max-frames", "2000", "--seed", "3"], ["ber.csv"]),
        "sweep": (["sweep", "--n-list", "64,128,256"], ["sweep.csv"]),
        "simulate": (["simulate", "--n", "8", "--k", "4", "--frames", "20", "--trace"], ["trace.csv", "simulate.json"]),
    }
    diffs = []
    for name, (args, files) in runs.items():
        for rep in ("a", "b"):
            assert main(args + ["--out", str(tmp_path / name / rep)]) == 0
        for f in files:
            if (tmp_path / name / "a" / f).read_bytes() != (tmp_path / name / "b" / f).read_bytes():
                diffs.append(f"{name}/{f}")
    verdict(8, "determinism", not diffs, f"byte-identical reruns of {sorted(runs)}; differing: {diffs or 'none'}")
