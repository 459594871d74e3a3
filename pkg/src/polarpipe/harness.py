"""Monte-Carlo error-rate runs and code-length sweeps behind the CLI."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .code_model import (
    ChannelConfig,
    PolarCodeSpec,
    QuantSpec,
    construct_frozen_set,
    polar_transform,
    simulate_frames,
)
from .pipeline_sim import run as run_pipeline
from .reference_decoders import fastssc_interpret, sc_decode
from .tree_compiler import CompilerConfig, OpProgram, compile_code
from .unroller import resource_report, unroll

DECODERS = ("sc", "fastssc", "pipeline")


class Decoder:
    """Batch decoder returning u_hat for a (frames, N) LLR array."""

    def __init__(
        self,
        kind: str,
        spec: PolarCodeSpec,
        quant: QuantSpec,
        cfg: CompilerConfig = CompilerConfig(),
        lanes: int = 128,
    ):
        if kind not in DECODERS:
            raise ValueError(f"unknown decoder {kind!r}")
        self.kind = kind
        self.spec = spec
        self.quant = quant
        self.lanes = lanes
        self.program: OpProgram = compile_code(spec, cfg)
        self.netlist = unroll(self.program, quant) if kind == "pipeline" else None

    def x_hat(self, llrs: np.ndarray) -> np.ndarray:
        if self.kind == "sc":
            return sc_decode(self.spec, llrs, self.quant).x_hat
        if self.kind == "fastssc":
            return fastssc_interpret(self.program, llrs, self.quant).x_hat
        res = run_pipeline(self.netlist, llrs, self.quant, lanes=self.lanes, record_occupancy=False)
        return res.x_hat

    def u_hat(self, llrs: np.ndarray) -> np.ndarray:
        return polar_transform(self.x_hat(llrs))


@dataclass
class BerRow:
    ebno_db: float
    frames: int
    bit_errors: int
    frame_errors: int
    info_bits: int

    @property
    def ber(self) -> float:
        return self.bit_errors / (self.frames * self.info_bits) if self.frames else 0.0

    @property
    def fer(self) -> float:
        return self.frame_errors / self.frames if self.frames else 0.0

    def csv_fields(self):
        return [f"{self.ebno_db:g}", self.frames, self.bit_errors, self.frame_errors, f"{self.ber:.6e}", f"{self.fer:.6e}"]


BER_HEADER = ["ebno_db", "frames", "bit_errors", "frame_errors", "BER", "FER"]


def ber_point(
    decoder: Decoder,
    ebno_db: float,
    seed: int,
    min_frame_errors: int = 100,
    max_frames: int = 100_000,
    min_frames: int = 0,
    batch: int = 1024,
) -> BerRow:
    """Decode batches of frames until enough frame errors (and frames) are seen or max_frames is hit.

    The stopping rule looks only at the counters after each batch, so every
    decoder that agrees bit-for-bit consumes exactly the same frames.
    """
    spec = decoder.spec
    chan = ChannelConfig(ebno_db, seed)
    row = BerRow(ebno_db, 0, 0, 0, spec.k_info)
    info_set = spec.info_set
    while row.frames < max_frames:
        if row.frame_errors >= min_frame_errors and row.frames >= min_frames:
            break
        count = min(batch, max_frames - row.frames)
        fb = simulate_frames(spec, chan, decoder.quant, row.frames, count)
        u = decoder.u_hat(fb.llrs)[:, info_set]
        errs = (u != fb.info).sum(axis=1)
        row.frames += count
        row.bit_errors += int(errs.sum())
        row.frame_errors += int((errs > 0).sum())
    return row


def ber_curve(decoder: Decoder, ebno_list, seed: int, **kwargs) -> list[BerRow]:
    if not ebno_list:
        raise ValueError("empty Eb/N0 list")
    return [ber_point(decoder, eb, seed, **kwargs) for eb in ebno_list]


@dataclass
class SweepRow:
    n_block: int
    latency_cycles: int
    register_bits: int
    instruction_count: int


def sweep(
    n_list,
    rate=0.5,
    design_snr: float = 0.0,
    cfg: CompilerConfig = CompilerConfig(),
    quant: QuantSpec = QuantSpec(),
) -> list[SweepRow]:
    """Construct, compile and unroll a code per block length at a fixed rate."""
    rows = []
    for n in n_list:
        k = max(1, int(round(n * float(rate))))
        spec = construct_frozen_set(n, k, design_snr)
        prog = compile_code(spec, cfg)
        rep = resource_report(unroll(prog, quant), quant, 1.0)
        rows.append(SweepRow(n, rep.latency_cycles, rep.register_bits, len(prog)))
    return rows


def power_law_exponent(xs, ys) -> float:
    """Least-squares slope of log(y) against log(x)."""
    if len(xs) < 2:
        raise ValueError("need at least two points for a fit")
    slope, _ = np.polyfit([math.log(x) for x in xs], [math.log(y) for y in ys], 1)
    return float(slope)
