"""Unroll an OpProgram into a fully pipelined netlist and report its cost.

Stage ``i`` hosts the functional unit of instruction ``i`` followed by its
output register. A value produced at stage ``p`` and last read at stage
``c`` is carried through ``c - p - 1`` synchronization registers, one per
intervening stage, so every edge in the netlist spans exactly one stage.
The channel LLRs enter at the ingress port, which behaves like stage -1.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .code_model import QuantSpec
from .tree_compiler import CHANNEL_SLOT, OPCODES, OpProgram

NETLIST_SCHEMA = "polarpipe.netlist/1"
INGRESS = -1


@dataclass(frozen=True)
class RegRef:
    """A register: the unit output or the ``index``-th sync register of a stage, or the ingress port."""

    stage: int
    kind: str  # "unit", "sync" or "input"
    index: int = 0

    def to_list(self):
        return [self.stage, self.kind, self.index]


INPUT_REF = RegRef(INGRESS, "input", 0)


@dataclass(frozen=True)
class Unit:
    op: str
    span: int
    width_bits: int
    domain: str  # "llr" or "bit"


@dataclass(frozen=True)
class SyncReg:
    span: int
    width_bits: int
    domain: str
    value: int  # producing instruction, -1 for the channel
    src_stage: int


@dataclass(frozen=True)
class Stage:
    index: int
    units: tuple[Unit, ...]
    syncs: tuple[SyncReg, ...]


@dataclass(frozen=True)
class Edge:
    src: RegRef
    dst: RegRef
    port: int = 0


@dataclass(frozen=True)
class PipelineNetlist:
    n_block: int
    llr_bits: int
    stages: tuple[Stage, ...]
    edges: tuple[Edge, ...]

    @property
    def latency(self) -> int:
        return len(self.stages)

    @property
    def info_bits(self) -> int:
        """K, recovered from the leaf units (Rate1: all, SPC: all but one, Rep: one)."""
        per_leaf = {"Rate0": lambda s: 0, "Rate1": lambda s: s, "SPC": lambda s: s - 1, "Rep": lambda s: 1}
        return sum(per_leaf[u.op](u.span) for s in self.stages for u in s.units if u.op in per_leaf)

    @property
    def rate(self) -> Fraction:
        return Fraction(self.info_bits, self.n_block)

    @property
    def output(self) -> RegRef:
        return RegRef(len(self.stages) - 1, "unit", 0)

    def operands(self, dst: RegRef) -> list[RegRef]:
        """Sources feeding ``dst`` ordered by port (cached per netlist)."""
        return self._operand_map().get(dst, [])

    def _operand_map(self):
        cache = self.__dict__.get("_opmap")
        if cache is None:
            grouped: dict[RegRef, list[Edge]] = {}
            for e in self.edges:
                grouped.setdefault(e.dst, []).append(e)
            cache = {k: [e.src for e in sorted(v, key=lambda e: e.port)] for k, v in grouped.items()}
            object.__setattr__(self, "_opmap", cache)
        return cache


def unroll(prog: OpProgram, quant: QuantSpec) -> PipelineNetlist:
    """One stage per instruction plus the sync-register chains that keep operands aligned."""
    try:
        prog.validate()
    except ValueError as exc:
        raise ValueError(f"program not topologically ordered: {exc}") from None
    q = quant.width_bits
    n = prog.n_block

    # value id -> (producer stage, span, domain); consumers per value
    latest = {CHANNEL_SLOT: INGRESS}
    values = {INGRESS: (n, "llr")}
    reads: list[list[int]] = []
    last_use: dict[int, int] = {}
    for i, ins in enumerate(prog):
        vs = [latest[s] for s in ins.reads]
        reads.append(vs)
        for v in vs:
            last_use[v] = i
        latest[ins.slot_out] = i
        # F and G emit the half-length child LLR vector
        values[i] = (ins.span // 2, "llr") if ins.outputs_llrs else (ins.span, "bit")

    def width(v):
        span, dom = values[v]
        return span * (q if dom == "llr" else 1)

    syncs: list[list[SyncReg]] = [[] for _ in prog]
    where: dict[tuple[int, int], RegRef] = {}  # (value, stage) -> register holding it at that stage
    edges: list[Edge] = []
    for v in sorted(values):
        where[(v, v)] = INPUT_REF if v == INGRESS else RegRef(v, "unit", 0)
        span, dom = values[v]
        for k in range(v + 1, last_use.get(v, v)):
            ref = RegRef(k, "sync", len(syncs[k]))
            syncs[k].append(SyncReg(span, width(v), dom, v, k - 1))
            edges.append(Edge(where[(v, k - 1)], ref))
            where[(v, k)] = ref

    for c, vs in enumerate(reads):
        for port, v in enumerate(vs):
            edges.append(Edge(where[(v, c - 1)], RegRef(c, "unit", 0), port))

    stages = tuple(
        Stage(i, (Unit(ins.op, ins.span, width(i), values[i][1]),), tuple(syncs[i])) for i, ins in enumerate(prog)
    )
    edges.sort(key=lambda e: (e.dst.stage, e.dst.kind != "unit", e.dst.index, e.port))
    return PipelineNetlist(n, q, stages, tuple(edges))


def latency_of(netlist: PipelineNetlist) -> int:
    return netlist.latency


def check_sync(netlist: PipelineNetlist) -> list[str]:
    """Static synchronization check: every edge must start exactly one stage upstream."""
    problems = []
    for e in netlist.edges:
        if e.src.stage != e.dst.stage - 1:
            problems.append(
                f"stage {e.dst.stage} {e.dst.kind}[{e.dst.index}] port {e.port} "
                f"reads stage {e.src.stage} (expected {e.dst.stage - 1})"
            )
    return problems


@dataclass(frozen=True)
class ThroughputModel:
    p_bus_bits: int
    f_hz: float
    rate: Fraction
    coded_bps: float
    info_bps: float


@dataclass(frozen=True)
class ResourceReport:
    latency_cycles: int
    register_bits: int
    unit_register_bits: int
    sync_register_bits: int
    sync_registers: int
    functional_units: dict
    throughput_model: ThroughputModel

    def to_dict(self) -> dict:
        tp = self.throughput_model
        return {
            "latency_cycles": self.latency_cycles,
            "register_bits": self.register_bits,
            "unit_register_bits": self.unit_register_bits,
            "sync_register_bits": self.sync_register_bits,
            "sync_registers": self.sync_registers,
            "functional_units": dict(self.functional_units),
            "throughput_model": {
                "p_bus_bits": tp.p_bus_bits,
                "f_hz": tp.f_hz,
                "rate": f"{tp.rate.numerator}/{tp.rate.denominator}",
                "coded_bps": tp.coded_bps,
                "info_bps": tp.info_bps,
            },
        }


def throughput(p_bus_bits: int, f_hz: float, rate) -> ThroughputModel:
    """Information throughput P f R and coded throughput P f."""
    if f_hz <= 0:
        raise ValueError("frequency must be positive")
    rate = Fraction(rate)
    coded = p_bus_bits * f_hz
    return ThroughputModel(p_bus_bits, f_hz, rate, coded, coded * rate.numerator / rate.denominator)


def resource_report(netlist: PipelineNetlist, quant: Optional[QuantSpec], f_hz: float) -> ResourceReport:
    """Register bits, unit counts and the throughput model.

    The ingress channel register is not counted; every unit output register
    and every sync register is, at full bus width.
    """
    if quant is not None and quant.width_bits != netlist.llr_bits:
        raise ValueError(f"netlist was unrolled for {netlist.llr_bits}-bit LLRs, not {quant.width_bits}")
    unit_bits = sum(u.width_bits for s in netlist.stages for u in s.units)
    sync_bits = sum(r.width_bits for s in netlist.stages for r in s.syncs)
    counts = Counter(u.op for s in netlist.stages for u in s.units)
    return ResourceReport(
        latency_cycles=netlist.latency,
        register_bits=unit_bits + sync_bits,
        unit_register_bits=unit_bits,
        sync_register_bits=sync_bits,
        sync_registers=sum(len(s.syncs) for s in netlist.stages),
        functional_units={op: counts[op] for op in OPCODES if counts[op]},
        throughput_model=throughput(netlist.n_block, f_hz, netlist.rate),
    )


def netlist_to_dict(netlist: PipelineNetlist) -> dict:
    return {
        "schema": NETLIST_SCHEMA,
        "n_block": netlist.n_block,
        "llr_bits": netlist.llr_bits,
        "stages": [
            {
                "index": s.index,
                "units": [{"op": u.op, "span": u.span, "width_bits": u.width_bits, "domain": u.domain} for u in s.units],
                "syncs": [
                    {
                        "width_bits": r.width_bits,
                        "src_stage": r.src_stage,
                        "span": r.span,
                        "domain": r.domain,
                        "value": r.value,
                    }
                    for r in s.syncs
                ],
            }
            for s in netlist.stages
        ],
        "edges": [{"src": e.src.to_list(), "dst": e.dst.to_list(), "port": e.port} for e in netlist.edges],
    }


def netlist_from_dict(d: dict) -> PipelineNetlist:
    if d.get("schema") != NETLIST_SCHEMA:
        raise ValueError(f"unsupported netlist schema {d.get('schema')!r}")
    stages = tuple(
        Stage(
            s["index"],
            tuple(Unit(u["op"], u["span"], u["width_bits"], u["domain"]) for u in s["units"]),
            tuple(SyncReg(r["span"], r["width_bits"], r["domain"], r["value"], r["src_stage"]) for r in s["syncs"]),
        )
        for s in d["stages"]
    )
    edges = tuple(Edge(RegRef(*e["src"]), RegRef(*e["dst"]), e["port"]) for e in d["edges"])
    return PipelineNetlist(d["n_block"], d["llr_bits"], stages, edges)


def _netlist_dot(netlist: PipelineNetlist) -> str:
    lines = [
        "digraph unrolled_decoder {",
        "  rankdir=LR;",
        '  in [label="channel LLRs", shape=invhouse, class="io"];',
    ]

    def name(ref: RegRef):
        if ref.kind == "input":
            return "in"
        return f"s{ref.stage}_{'u' if ref.kind == 'unit' else 'r'}{ref.index}"

    for s in netlist.stages:
        members = []
        for i, u in enumerate(s.units):
            ref = RegRef(s.index, "unit", i)
            lines.append(f'  {name(ref)} [label="{u.op}{u.span}", shape=box, class="unit"];')
            members.append(name(ref))
        for i, r in enumerate(s.syncs):
            ref = RegRef(s.index, "sync", i)
            lines.append(f'  {name(ref)} [label="{r.width_bits}b", shape=box, style=dashed, class="sync"];')
            members.append(name(ref))
        lines.append(f"  {{ rank=same; {'; '.join(members)}; }}")
    for e in netlist.edges:
        lines.append(f"  {name(e.src)} -> {name(e.dst)};")
    if netlist.stages:
        lines.append('  out [label="codeword", shape=house, class="io"];')
        lines.append(f"  {name(netlist.output)} -> out;")
    lines.append("}")
    return "\n".join(lines) + "\n"


def emit_netlist(netlist: PipelineNetlist, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(netlist_to_dict(netlist), indent=1) + "\n"
    if fmt == "dot":
        return _netlist_dot(netlist)
    raise ValueError(f"unknown netlist format {fmt!r}")


def parse_netlist(text: str) -> PipelineNetlist:
    return netlist_from_dict(json.loads(text))
