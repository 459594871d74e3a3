"""Sequential decoders used as functional ground truth.

``sc_decode`` is plain min-sum successive cancellation and knows nothing
about the tree compiler. ``fastssc_interpret`` executes a compiled
:class:`OpProgram` one instruction at a time. Both accept a single frame of
shape ``(N,)`` or a batch of shape ``(frames, N)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .code_model import ChannelConfig, PolarCodeSpec, QuantSpec, polar_transform, simulate_frames
from .kernel_ops import LEAF_DECODERS, combine, f_op, g_op, hard_decision
from .tree_compiler import CHANNEL_SLOT, ROOT_SLOT, CompilerConfig, OpProgram, compile_code


@dataclass
class DecodeResult:
    u_hat: np.ndarray
    x_hat: np.ndarray
    trace: Optional[list] = None


def _as_llrs(llrs, n_block: int, quant: QuantSpec) -> np.ndarray:
    llrs = np.asarray(llrs)
    if llrs.shape[-1] != n_block:
        raise ValueError(f"expected {n_block} channel LLRs, got {llrs.shape[-1]}")
    return llrs.astype(quant.dtype, copy=False)


def sc_decode(spec: PolarCodeSpec, channel_llrs, quant: QuantSpec) -> DecodeResult:
    frozen = spec.frozen_mask
    llrs = _as_llrs(channel_llrs, spec.n_block, quant)
    u_hat = np.zeros(llrs.shape, dtype=np.uint8)

    def rec(alpha, start):
        span = alpha.shape[-1]
        if span == 1:
            bit = np.zeros(alpha.shape, np.uint8) if frozen[start] else hard_decision(alpha)
            u_hat[..., start : start + 1] = bit
            return bit
        h = span // 2
        a, b = alpha[..., :h], alpha[..., h:]
        left = rec(f_op(a, b, quant), start)
        right = rec(g_op(a, b, left, quant), start + h)
        return combine(left, right)

    x_hat = rec(llrs, 0)
    return DecodeResult(u_hat, x_hat)


def execute(op: str, span: int, operands, quant: QuantSpec) -> np.ndarray:
    """Evaluate one opcode on its operand values (shared with the pipeline's functional units)."""
    if op == "F":
        (alpha,) = operands
        h = span // 2
        return f_op(alpha[..., :h], alpha[..., h:], quant)
    if op == "G":
        alpha, beta_left = operands
        h = span // 2
        return g_op(alpha[..., :h], alpha[..., h:], beta_left, quant)
    if op == "Combine":
        return combine(*operands)
    (alpha,) = operands
    return LEAF_DECODERS[op](alpha, quant)


def _operand(slots, ins, slot, want):
    try:
        value = slots[slot]
    except KeyError:
        raise RuntimeError(f"slot underflow: {ins.label} reads unwritten slot {slot!r}") from None
    if value.shape[-1] != want:
        raise RuntimeError(f"{ins.label} expects {want} values in {slot!r}, found {value.shape[-1]}")
    return value


def fastssc_interpret(
    prog: OpProgram, channel_llrs, quant: QuantSpec, keep_trace: bool = False
) -> DecodeResult:
    llrs = _as_llrs(channel_llrs, prog.n_block, quant)
    slots = {CHANNEL_SLOT: llrs}
    trace = [] if keep_trace else None
    for ins in prog:
        operands = [_operand(slots, ins, s, w) for s, w in zip(ins.reads, ins.operand_spans)]
        value = execute(ins.op, ins.span, operands, quant)
        slots[ins.slot_out] = value
        if keep_trace:
            trace.append(value)
    if ROOT_SLOT not in slots:
        raise RuntimeError("program never wrote the root estimate")
    x_hat = slots[ROOT_SLOT].astype(np.uint8)
    return DecodeResult(polar_transform(x_hat), x_hat, trace)


@dataclass
class AgreementReport:
    frames: int
    ebno_db: float
    mismatches: int = 0
    first_mismatch: Optional[dict] = None
    mismatch_lines: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.mismatches == 0


def mismatch_record(frame: int, ebno_db: float, sc_bits, fast_bits) -> dict:
    diff = np.flatnonzero(np.asarray(sc_bits) != np.asarray(fast_bits))
    return {
        "frame": int(frame),
        "ebno": float(ebno_db),
        "first_diff_index": int(diff[0]) if diff.size else -1,
        "sc_bits": "".join(map(str, np.asarray(sc_bits, dtype=int))),
        "fastssc_bits": "".join(map(str, np.asarray(fast_bits, dtype=int))),
    }


def decoders_agree(
    spec: PolarCodeSpec,
    cfg: CompilerConfig,
    frames: int,
    seed: int,
    ebno_db: float = 2.0,
    quant: QuantSpec = QuantSpec(),
    batch: int = 2048,
) -> AgreementReport:
    """Run SC and the compiled Fast-SSC program on the same channel outputs and diff x_hat."""
    if frames < 1:
        raise ValueError("frames must be >= 1")
    prog = compile_code(spec, cfg)
    chan = ChannelConfig(ebno_db, seed)
    report = AgreementReport(frames, ebno_db)
    for first in range(0, frames, batch):
        fb = simulate_frames(spec, chan, quant, first, min(batch, frames - first))
        sc = sc_decode(spec, fb.llrs, quant).x_hat
        fast = fastssc_interpret(prog, fb.llrs, quant).x_hat
        bad = np.flatnonzero((sc != fast).any(axis=1))
        report.mismatches += bad.size
        for j in bad:
            rec = mismatch_record(first + j, ebno_db, sc[j], fast[j])
            report.mismatch_lines.append(json.dumps(rec, sort_keys=True))
            if report.first_mismatch is None:
                rec["trace"] = [
                    np.asarray(v).tolist() for v in fastssc_interpret(prog, fb.llrs[j], quant, True).trace
                ]
                report.first_mismatch = rec
    return report
