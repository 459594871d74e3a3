"""Cycle-accurate simulation of an unrolled decoder netlist.

Every register (functional-unit outputs and sync registers) is updated once
per clock with two-phase semantics: all next values are computed from the
current register contents, then committed together. Each register also
carries the id of the beat (group of frames) its data belongs to, which is
how timing and synchronization are checked.

With ``lanes=1`` one frame enters per cycle, as in the hardware. With
``lanes=L`` the simulator models L identical decoders clocked in lockstep:
beat ``t`` carries frames ``tL .. tL+L-1`` through the same netlist. This
is only a vectorization of the data path; the cycle behaviour per lane is
unchanged.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .code_model import QuantSpec
from .reference_decoders import execute
from .unroller import PipelineNetlist, RegRef

BUBBLE = None


@dataclass
class SimTrace:
    latency: int
    lanes: int
    ingests: list = field(default_factory=list)  # (cycle, beat)
    bubbles: list = field(default_factory=list)  # cycles with no input
    emits: list = field(default_factory=list)  # (cycle, beat)
    occupancy: Optional[list] = None  # per cycle: beat id per stage (None = empty)
    violations: list = field(default_factory=list)  # (cycle, stage, operand beats)
    beat_frames: dict = field(default_factory=dict)  # beat -> frame ids
    cycles: int = 0

    def to_csv(self, netlist: PipelineNetlist) -> str:
        """Occupancy as CSV rows: cycle, stage_index, frame_id, opcode (lanes=1 ids are frame ids)."""
        if self.occupancy is None:
            raise ValueError("trace was recorded without occupancy")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["cycle", "stage_index", "frame_id", "opcode"])
        ops = [s.units[0].op + str(s.units[0].span) for s in netlist.stages]
        for cycle, row in enumerate(self.occupancy):
            for stage, beat in enumerate(row):
                if beat is not None:
                    for fid in self.beat_frames[beat]:
                        w.writerow([cycle, stage, fid, ops[stage]])
        return buf.getvalue()


@dataclass
class FrameOutput:
    frame_id: int
    x_hat: np.ndarray
    output_cycle: int


@dataclass
class SimResult:
    outputs: list
    trace: SimTrace

    @property
    def x_hat(self) -> np.ndarray:
        return np.array([o.x_hat for o in self.outputs], dtype=np.uint8)

    @property
    def output_cycles(self) -> list[int]:
        return [o.output_cycle for o in self.outputs]


class PipelineSimulator:
    """Register-level model of a :class:`PipelineNetlist`.

    Parameters
    ----------
    netlist : PipelineNetlist
    quant : QuantSpec
        Number format of the LLR datapath.
    lanes : int
        Frames per beat (see module docstring).
    eval_rng : numpy Generator, optional
        When given, registers are evaluated in a fresh random order every
        cycle. Results must not depend on it.
    record_occupancy : bool
        Keep the per-cycle stage occupancy table.
    """

    def __init__(self, netlist, quant, lanes=1, eval_rng=None, record_occupancy=True):
        if lanes < 1:
            raise ValueError("lanes must be >= 1")
        self.netlist = netlist
        self.quant = quant
        self.lanes = lanes
        self.eval_rng = eval_rng
        self.record_occupancy = record_occupancy

        refs: list[RegRef] = []
        for s in netlist.stages:
            refs.extend(RegRef(s.index, "unit", i) for i in range(len(s.units)))
            refs.extend(RegRef(s.index, "sync", i) for i in range(len(s.syncs)))
        index = {r: i for i, r in enumerate(refs)}
        self._refs = refs
        self._plan = []
        for r in refs:
            srcs = [-1 if src.kind == "input" else index[src] for src in netlist.operands(r)]
            if r.kind == "unit":
                unit = netlist.stages[r.stage].units[r.index]
                self._plan.append((unit.op, unit.span, srcs))
            else:
                if len(srcs) != 1:
                    raise ValueError(f"sync register {r} must have exactly one source")
                self._plan.append((None, 0, srcs))
        self._unit_regs = [i for i, r in enumerate(refs) if r.kind == "unit" and r.index == 0]
        self._out = index[netlist.output] if netlist.stages else None
        self.reset()

    def reset(self):
        n = len(self._refs)
        self.values = [None] * n
        self.tags = [BUBBLE] * n
        self.cycle = 0
        self.trace = SimTrace(self.netlist.latency, self.lanes, occupancy=[] if self.record_occupancy else None)

    def step(self, beat_llrs: Optional[np.ndarray], beat: Optional[int]):
        """Advance one clock: ``beat_llrs`` (lanes, N) is presented at the ingress during this cycle."""
        values, tags = self.values, self.tags
        n = len(values)
        new_vals = [None] * n
        new_tags = [BUBBLE] * n
        order = range(n) if self.eval_rng is None else self.eval_rng.permutation(n)
        for i in order:
            op, span, srcs = self._plan[i]
            src_tags = [beat if s < 0 else tags[s] for s in srcs]
            if op is None:
                s = srcs[0]
                new_vals[i] = beat_llrs if s < 0 else values[s]
                new_tags[i] = src_tags[0]
                continue
            if any(t is BUBBLE for t in src_tags):
                continue
            if len(set(src_tags)) > 1:
                self.trace.violations.append((self.cycle, self._refs[i].stage, tuple(src_tags)))
            operands = [beat_llrs if s < 0 else values[s] for s in srcs]
            new_vals[i] = execute(op, span, operands, self.quant)
            new_tags[i] = src_tags[0]
        if beat is BUBBLE:
            self.trace.bubbles.append(self.cycle)
        else:
            self.trace.ingests.append((self.cycle, beat))
        if self.trace.occupancy is not None:
            self.trace.occupancy.append([new_tags[i] for i in self._unit_regs])
        # commit
        self.values, self.tags = new_vals, new_tags
        self.cycle += 1
        emitted = None
        if self._out is not None and new_tags[self._out] is not BUBBLE:
            emitted = (new_tags[self._out], new_vals[self._out])
            self.trace.emits.append((self.cycle, new_tags[self._out]))
        return emitted

    def run(self, frames: Iterable) -> SimResult:
        """Feed ``frames`` (LLR vectors, or None for an idle input slot) and drain the pipeline."""
        n_block = self.netlist.n_block
        beats = _group_beats(frames, self.lanes, n_block, self.quant)
        outputs = []
        pending = 0
        beat_id = 0
        it = iter(beats)
        exhausted = False
        drain = 0
        while True:
            if not exhausted:
                try:
                    item = next(it)
                except StopIteration:
                    exhausted = True
                    item = None
            if exhausted:
                # a mis-wired netlist may never emit some beats; the pipeline is empty after `latency` cycles
                if pending <= 0 or drain >= self.netlist.latency:
                    break
                drain += 1
            if exhausted or item is None or item[0] is None:
                data, tag = None, BUBBLE
            else:
                data, ids = item
                tag = beat_id
                self.trace.beat_frames[tag] = ids
                beat_id += 1
                pending += 1
            out = self.step(data, tag)
            if out is not None:
                tag, x = out
                pending -= 1
                for lane, fid in enumerate(self.trace.beat_frames[tag]):
                    outputs.append(FrameOutput(fid, np.asarray(x[lane], dtype=np.uint8), self.cycle))
        self.trace.cycles = self.cycle
        return SimResult(outputs, self.trace)


def _group_beats(frames, lanes, n_block, quant):
    """Yield (array (lanes, N), frame ids) per beat, or None for a bubble slot.

    Frame ids count real frames in arrival order. A partially filled final
    beat is padded with zero LLRs whose outputs are dropped.
    """
    fid = 0
    buf, ids = [], []
    for item in frames:
        if item is None:
            if lanes == 1:
                yield None
            continue
        llr = np.asarray(item)
        if llr.shape != (n_block,):
            raise ValueError(f"frame length mismatch: expected {n_block}, got {llr.shape}")
        buf.append(llr.astype(quant.dtype, copy=False))
        ids.append(fid)
        fid += 1
        if len(buf) == lanes:
            yield np.stack(buf), ids
            buf, ids = [], []
    if buf:
        pad = [np.zeros(n_block, dtype=quant.dtype)] * (lanes - len(buf))
        yield np.stack(buf + pad), ids


def run(netlist: PipelineNetlist, frames: Iterable, quant: QuantSpec, lanes: int = 1, **kwargs) -> SimResult:
    return PipelineSimulator(netlist, quant, lanes, **kwargs).run(frames)


@dataclass
class TimingReport:
    passed: bool
    failures: list
    first_bad_stage: Optional[int] = None
    max_distinct_in_flight: int = 0

    def __bool__(self):
        return self.passed


def check_timing(trace: SimTrace, netlist: PipelineNetlist) -> TimingReport:
    """Verify the initiation-interval-1 contract on a finished trace.

    (a) every cycle either ingests a beat or was an idle input slot, until
    input ends; (b)/(c) each beat is emitted exactly ``latency`` cycles
    after it was ingested, in order, so emission gaps mirror ingest gaps;
    (d) stage occupancy advances one stage per cycle, beats in flight are
    pairwise distinct, and no unit ever combined operands from different beats.
    """
    failures = []
    bad_stage = None
    latency = netlist.latency

    ingest_at = {beat: c for c, beat in trace.ingests}
    slots = sorted([c for c, _ in trace.ingests] + list(trace.bubbles))
    last_input = max((c for c, _ in trace.ingests), default=-1)
    if [c for c in slots if c <= last_input] != list(range(last_input + 1)):
        failures.append("input slots are not one per cycle")

    emit_at = {}
    for c, beat in trace.emits:
        if beat in emit_at:
            failures.append(f"beat {beat} emitted twice")
        emit_at[beat] = c
    for beat, c_in in ingest_at.items():
        c_out = emit_at.get(beat)
        if c_out is None:
            failures.append(f"beat {beat} never emitted")
        elif c_out - c_in != latency:
            failures.append(f"beat {beat}: delay {c_out - c_in} != latency {latency}")
    emitted_order = [b for _, b in sorted(trace.emits)]
    if emitted_order != sorted(emitted_order, key=lambda b: ingest_at.get(b, -1)):
        failures.append("output order differs from input order")

    for cycle, stage, beats in trace.violations:
        failures.append(f"cycle {cycle}: stage {stage} combined operands from beats {list(beats)}")
        if bad_stage is None or stage < bad_stage:
            bad_stage = stage

    max_distinct = 0
    if trace.occupancy is not None:
        for cycle, row in enumerate(trace.occupancy):
            live = [b for b in row if b is not None]
            max_distinct = max(max_distinct, len(live))
            if len(set(live)) != len(live):
                failures.append(f"cycle {cycle}: a beat occupies two stages")
            for stage, beat in enumerate(row):
                want = ingest_at.get(beat, None)
                if beat is not None and want is not None and cycle - want != stage:
                    failures.append(f"cycle {cycle}: beat {beat} at stage {stage}, expected stage {cycle - want}")
                    if bad_stage is None or stage < bad_stage:
                        bad_stage = stage
    return TimingReport(not failures, failures, bad_stage, max_distinct)
