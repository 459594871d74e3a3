"""Decoder-tree construction, Fast-SSC pruning and program emission."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from .code_model import PolarCodeSpec, is_power_of_two

LEAF_KINDS = ("Rate0", "Rate1", "Rep", "SPC")
OPCODES = ("F", "G", "Combine") + LEAF_KINDS
# Short labels used in timing diagrams (F8, Rep4, G8, SPC4, Comb8).
LABELS = {"F": "F", "G": "G", "Combine": "Comb", "Rate0": "Rate0", "Rate1": "Rate1", "Rep": "Rep", "SPC": "SPC"}

CHANNEL_SLOT = "alpha0"
ROOT_SLOT = "beta0"


@dataclass(frozen=True)
class CompilerConfig:
    """Largest span allowed for Rep/SPC leaves and for Rate0/Rate1 leaves.

    ``cap_rate=None`` means "the block length".
    """

    cap_repspc: int = 4
    cap_rate: Optional[int] = None

    def __post_init__(self):
        for name in ("cap_repspc", "cap_rate"):
            v = getattr(self, name)
            if v is not None and (not is_power_of_two(v) or v < 2):
                raise ValueError(f"{name} must be a power of two >= 2, got {v}")

    def rate_cap(self, n_block: int) -> int:
        return n_block if self.cap_rate is None else self.cap_rate


@dataclass(frozen=True)
class Node:
    start: int
    span: int
    depth: int
    kind: str
    left: Optional["Node"] = None
    right: Optional["Node"] = None

    @property
    def is_leaf(self) -> bool:
        return self.kind != "Branch"

    @property
    def stop(self) -> int:
        return self.start + self.span

    def leaves(self) -> Iterator["Node"]:
        if self.is_leaf:
            yield self
        else:
            yield from self.left.leaves()
            yield from self.right.leaves()

    def walk(self) -> Iterator["Node"]:
        yield self
        if not self.is_leaf:
            yield from self.left.walk()
            yield from self.right.walk()


@dataclass(frozen=True)
class DecoderTree:
    spec: PolarCodeSpec
    config: CompilerConfig
    root: Node

    def shape(self):
        """Nested (kind, span) tuples; handy for structural comparisons."""

        def rec(node):
            if node.is_leaf:
                return (node.kind, node.span)
            return (node.kind, node.span, rec(node.left), rec(node.right))

        return rec(self.root)


def classify(frozen: np.ndarray, cfg: CompilerConfig, n_block: int) -> Optional[str]:
    """Leaf kind for a span whose frozen pattern is ``frozen``, or None to branch.

    Priority at equal span is Rate0, Rate1, Rep, SPC.
    """
    span = frozen.size
    if span == 1:
        return "Rate0" if frozen[0] else "Rate1"
    if span <= cfg.rate_cap(n_block):
        if frozen.all():
            return "Rate0"
        if not frozen.any():
            return "Rate1"
    if span <= cfg.cap_repspc:
        if frozen[:-1].all() and not frozen[-1]:
            return "Rep"
        if frozen[0] and not frozen[1:].any():
            return "SPC"
    return None


def build_tree(spec: PolarCodeSpec, cfg: CompilerConfig = CompilerConfig()) -> DecoderTree:
    """Prune the SC tree top-down: every node becomes the largest matching leaf."""
    mask = spec.frozen_mask
    n = spec.n_block

    def rec(start, span, depth):
        kind = classify(mask[start : start + span], cfg, n)
        if kind is not None:
            return Node(start, span, depth, kind)
        h = span // 2
        return Node(start, span, depth, "Branch", rec(start, h, depth + 1), rec(start + h, h, depth + 1))

    return DecoderTree(spec, cfg, rec(0, n, 0))


@dataclass(frozen=True)
class Instruction:
    """One Fast-SSC operation.

    Slots follow a sequential decoder's memory banks: ``alpha<d>`` holds the
    LLRs entering depth d (``alpha0`` is the channel), ``beta<d>L`` and
    ``beta<d>R`` the bit estimates of the left and right child at depth d,
    and ``beta0`` the decoded codeword. F and G read both halves of
    ``slot_in_a``; G takes the left estimate from ``slot_in_b``.
    """

    op: str
    span: int
    slot_in_a: str
    slot_in_b: Optional[str]
    slot_out: str
    node_range: tuple[int, int]

    @property
    def label(self) -> str:
        return f"{LABELS[self.op]}{self.span}"

    @property
    def reads(self) -> tuple[str, ...]:
        return (self.slot_in_a,) if self.slot_in_b is None else (self.slot_in_a, self.slot_in_b)

    @property
    def operand_spans(self) -> tuple[int, ...]:
        h = self.span // 2
        if self.op == "G":
            return (self.span, h)
        if self.op == "Combine":
            return (h, h)
        return (self.span,)

    @property
    def outputs_llrs(self) -> bool:
        return self.op in ("F", "G")

    def to_dict(self) -> dict:
        return {
            "op": self.op,
            "span": self.span,
            "slot_in_a": self.slot_in_a,
            "slot_in_b": self.slot_in_b,
            "slot_out": self.slot_out,
            "node_range": list(self.node_range),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Instruction":
        return cls(d["op"], int(d["span"]), d["slot_in_a"], d["slot_in_b"], d["slot_out"], tuple(d["node_range"]))


@dataclass(frozen=True)
class OpProgram:
    n_block: int
    instructions: tuple[Instruction, ...]

    def __len__(self):
        return len(self.instructions)

    def __iter__(self):
        return iter(self.instructions)

    def __getitem__(self, i):
        return self.instructions[i]

    @property
    def labels(self) -> list[str]:
        return [ins.label for ins in self.instructions]

    def to_json(self) -> str:
        body = [ins.to_dict() for ins in self.instructions]
        return json.dumps({"n_block": self.n_block, "instructions": body}, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "OpProgram":
        d = json.loads(text)
        return cls(int(d["n_block"]), tuple(Instruction.from_dict(x) for x in d["instructions"]))

    def validate(self) -> None:
        """Raise ValueError unless every slot is written before it is read."""
        written = {CHANNEL_SLOT}
        for i, ins in enumerate(self.instructions):
            if ins.op not in OPCODES:
                raise ValueError(f"instruction {i}: unknown opcode {ins.op!r}")
            for slot in ins.reads:
                if slot not in written:
                    raise ValueError(f"instruction {i} ({ins.label}) reads {slot!r} before it is written")
            written.add(ins.slot_out)
        if self.instructions and self.instructions[-1].slot_out != ROOT_SLOT:
            raise ValueError("program does not produce the root estimate")


def emit_program(tree: DecoderTree) -> OpProgram:
    """Depth-first schedule: F, left subtree, G, right subtree, Combine."""
    out: list[Instruction] = []

    def rec(node: Node, slot_out: str):
        d = node.depth
        a_in = f"alpha{d}"
        rng = (node.start, node.stop)
        if node.is_leaf:
            out.append(Instruction(node.kind, node.span, a_in, None, slot_out, rng))
            return
        a_child = f"alpha{d + 1}"
        bl, br = f"beta{d + 1}L", f"beta{d + 1}R"
        out.append(Instruction("F", node.span, a_in, None, a_child, rng))
        rec(node.left, bl)
        out.append(Instruction("G", node.span, a_in, bl, a_child, rng))
        rec(node.right, br)
        out.append(Instruction("Combine", node.span, bl, br, slot_out, rng))

    rec(tree.root, ROOT_SLOT)
    return OpProgram(tree.spec.n_block, tuple(out))


def compile_code(spec: PolarCodeSpec, cfg: CompilerConfig = CompilerConfig()) -> OpProgram:
    return emit_program(build_tree(spec, cfg))


def program_stats(prog: OpProgram) -> dict:
    counts = Counter(ins.op for ins in prog)
    return {
        "instruction_count": len(prog),
        "count_by_opcode": {op: counts[op] for op in OPCODES if counts[op]},
        "max_span": max((ins.span for ins in prog), default=0),
    }


_DOT_STYLE = {
    "Rate0": 'style=filled, fillcolor="white"',
    "Rate1": 'style=filled, fillcolor="black", fontcolor="white"',
    "Rep": 'style=striped, fillcolor="gray:white"',
    "SPC": 'style=filled, fillcolor="gray"',
    "Branch": "shape=circle",
}


def tree_to_dot(tree: DecoderTree) -> str:
    lines = ["digraph decoder_tree {", "  node [shape=box];"]
    ids = {}
    for i, node in enumerate(tree.root.walk()):
        ids[id(node)] = f"n{i}"
        label = f"{node.kind}{node.span}\\n[{node.start},{node.stop})"
        lines.append(f'  n{i} [label="{label}", {_DOT_STYLE[node.kind]}];')
    for node in tree.root.walk():
        if not node.is_leaf:
            lines.append(f"  {ids[id(node)]} -> {ids[id(node.left)]};")
            lines.append(f"  {ids[id(node)]} -> {ids[id(node.right)]};")
    lines.append("}")
    return "\n".join(lines) + "\n"
