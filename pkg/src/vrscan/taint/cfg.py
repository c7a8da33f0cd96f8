"""Basic-block control-flow graphs over method bodies."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

FALL = "fall"
BRANCH = "branch"
HANDLER = "handler"


@dataclass(frozen=True)
class Block:
    id: int
    start: int  # index of first instruction
    end: int  # index one past the last instruction
    offset: int  # code-unit offset of first instruction


@dataclass(frozen=True)
class Cfg:
    blocks: tuple
    edges: dict  # block id -> tuple of (successor id, edge kind)
    entry: int = 0

    def successors(self, bid):
        return [s for s, _ in self.edges.get(bid, ())]

    def block_at(self, offset):
        """Block containing the instruction at ``offset`` (None if not an instruction boundary)."""
        return self._offset_index.get(offset)

    def __post_init__(self):
        object.__setattr__(self, "_offset_index", {})

    def edge_count(self):
        return sum(len(v) for v in self.edges.values())


def build_cfg(body):
    """Split ``body`` into basic blocks with fallthrough, branch and handler edges.

    Blocks also start at try-range boundaries so that every instruction of a
    block shares the same handler coverage.
    """
    insns = body.instructions
    if not insns:
        return Cfg((), {}, 0)
    index_of = {ins.offset: i for i, ins in enumerate(insns)}

    def index_at_or_after(off):
        for i, ins in enumerate(insns):
            if ins.offset >= off:
                return i
        return None

    leaders = {0}
    for i, ins in enumerate(insns):
        for t in ins.targets:
            leaders.add(index_of[t])
        if (ins.targets or not ins.falls_through) and i + 1 < len(insns):
            leaders.add(i + 1)
    for tb in body.try_blocks:
        for off in (tb.start, tb.end):
            i = index_at_or_after(off)
            if i is not None:
                leaders.add(i)
        for _, h in tb.handlers:
            leaders.add(index_of[h])

    starts = sorted(leaders)
    blocks = []
    for bid, s in enumerate(starts):
        e = starts[bid + 1] if bid + 1 < len(starts) else len(insns)
        blocks.append(Block(bid, s, e, insns[s].offset))
    block_of_index = {}
    for b in blocks:
        for i in range(b.start, b.end):
            block_of_index[i] = b.id

    edges = {}
    for b in blocks:
        last = insns[b.end - 1]
        out = []
        if last.falls_through and b.end < len(insns):
            out.append((block_of_index[b.end], FALL))
        for t in last.targets:
            out.append((block_of_index[index_of[t]], BRANCH))
        for tb in body.try_blocks:
            if tb.start <= insns[b.start].offset < tb.end:
                for _, h in tb.handlers:
                    out.append((block_of_index[index_of[h]], HANDLER))
        seen, uniq = set(), []
        for edge in out:
            if edge not in seen:
                seen.add(edge)
                uniq.append(edge)
        if uniq:
            edges[b.id] = tuple(uniq)
    cfg = Cfg(tuple(blocks), edges, 0)
    for b in blocks:
        for i in range(b.start, b.end):
            cfg._offset_index[insns[i].offset] = b.id
    return cfg


def reachable_blocks(cfg):
    if not cfg.blocks:
        return set()
    seen = {cfg.entry}
    queue = deque([cfg.entry])
    while queue:
        b = queue.popleft()
        for s in cfg.successors(b):
            if s not in seen:
                seen.add(s)
                queue.append(s)
    return seen


def reverse_postorder(cfg):
    if not cfg.blocks:
        return []
    seen, order = set(), []
    stack = [(cfg.entry, iter(cfg.successors(cfg.entry)))]
    seen.add(cfg.entry)
    while stack:
        node, it = stack[-1]
        for s in it:
            if s not in seen:
                seen.add(s)
                stack.append((s, iter(cfg.successors(s))))
                break
        else:
            stack.pop()
            order.append(node)
    return order[::-1]
