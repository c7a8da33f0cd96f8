"""Source-to-sink register taint propagation over the method IR.

Taint values map a source call site to the shortest chain of interprocedural
hops that carried it. A hop is ("call", caller, call offset) when a value
enters a callee through a parameter and ("ret", callee, return offset) when it
leaves through a return. Chains longer than the configured depth are dropped.
"""
from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field

from ..dex import model as M
from .cfg import HANDLER, build_cfg, reachable_blocks, reverse_postorder
from .config import TaintConfig

REFLECTIVE = ("Ljava/lang/reflect/Method;", "invoke")
RESULT = M.RESULT_REG


@dataclass(frozen=True)
class TaintPath:
    source: tuple  # (pattern text, (MethodSig, offset))
    sink: tuple  # (pattern text, (MethodSig, offset))
    label: str
    trace: tuple  # ((MethodSig, offset), ...)
    confirmed_reachable: bool = True

    @property
    def pair(self):
        return self.source[1], self.sink[1]

    def to_dict(self):
        def site(s):
            return {"method": str(s[0]), "offset": s[1]}

        return {
            "source": {"pattern": self.source[0], **site(self.source[1])},
            "sink": {"pattern": self.sink[0], **site(self.sink[1])},
            "label": self.label,
            "trace": [site(h) for h in self.trace],
            "confirmed_reachable": self.confirmed_reachable,
        }


@dataclass
class TaintResult:
    paths: list
    diagnostics: list = field(default_factory=list)
    suppressed: int = 0


def _join(a, b):
    """Union of two taint values keeping the shortest chain per source site."""
    if not a:
        return b
    if not b:
        return a
    out = dict(a)
    for k, c in b.items():
        old = out.get(k)
        if old is None or (len(c), c) < (len(old), old):
            out[k] = c
    return out


def _leq(a, b):
    """a is subsumed by b."""
    for k, c in a.items():
        old = b.get(k)
        if old is None or (len(c), c) < (len(old), old):
            return False
    return True


def _join_state(a, b):
    if a is None:
        return dict(b)
    out = dict(a)
    for r, v in b.items():
        if v:
            out[r] = _join(out.get(r), v)
    return out


def _state_leq(a, b):
    return all(_leq(v, b.get(r, {})) for r, v in a.items() if v)


class _Analysis:
    def __init__(self, program, config: TaintConfig):
        self.program = program
        self.config = config
        self.params = {}  # sig -> {reg: value}
        self.rets = {}  # sig -> value
        self.fields = {}  # field id -> value
        self.observations = {}  # sig -> list of (sink site, sink pattern, source site, chain)
        self.diag = set()
        self.cfgs = {}
        self.bodies = {sig: m.body for sig, m in program.methods.items() if m.body is not None}
        self.callers = {}
        self.readers = {}
        for sig, body in self.bodies.items():
            for ins in body.instructions:
                if ins.kind == M.INVOKE and ins.method in self.bodies:
                    self.callers.setdefault(ins.method, set()).add(sig)
                if ins.field_op == "load":
                    self.readers.setdefault(ins.field, set()).add(sig)
        self.dirty = set()

    def cfg(self, sig):
        g = self.cfgs.get(sig)
        if g is None:
            g = self.cfgs[sig] = build_cfg(self.bodies[sig])
        return g

    def _extend(self, value, hop):
        if not value:
            return {}
        out = {}
        for site, chain in value.items():
            if len(chain) + 1 > self.config.max_depth:
                self.diag.add(f"DepthExceeded: taint from {site[0]}@{site[1]} truncated at "
                              f"{hop[0]} {hop[1]}@{hop[2]} (max depth {self.config.max_depth})")
                continue
            out[site] = chain + (hop,)
        return out

    def _mark(self, sigs):
        for s in sigs:
            self.dirty.add(s)

    def _update_param(self, callee, reg, value):
        cur = self.params.setdefault(callee, {})
        old = cur.get(reg, {})
        if value and not _leq(value, old):
            cur[reg] = _join(old, value)
            self._mark([callee])

    def _update_ret(self, sig, value):
        old = self.rets.get(sig, {})
        if value and not _leq(value, old):
            self.rets[sig] = _join(old, value)
            self._mark(self.callers.get(sig, ()))

    def _update_field(self, fid, value):
        old = self.fields.get(fid, {})
        if value and not _leq(value, old):
            self.fields[fid] = _join(old, value)
            self._mark(self.readers.get(fid, ()))

    # -- transfer ------------------------------------------------------------

    def step(self, sig, ins, state, observe):
        """Apply one instruction to ``state`` (mutated in place)."""
        get = state.get
        kind = ins.kind
        if kind == M.CONST_STRING:
            state.pop(ins.dst, None)
        elif kind == M.MOVE or kind == M.MOVE_RESULT:
            v = get(RESULT if kind == M.MOVE_RESULT else ins.src)
            if v:
                state[ins.dst] = v
            else:
                state.pop(ins.dst, None)
        elif kind == M.RETURN:
            if ins.src is not None:
                self._update_ret(sig, self._extend(get(ins.src), ("ret", sig, ins.offset)))
        elif kind == M.INVOKE:
            self._invoke(sig, ins, state, observe)
        elif kind == M.OTHER:
            v = {}
            for r in ins.uses:
                v = _join(v, get(r))
            if ins.field_op == "store":
                self._update_field(ins.field, get(ins.src))
                return
            if ins.field_op == "load":
                v = _join(v, self.fields.get(ins.field))
            for d in ins.defs:
                nv = _join(get(d), v) if ins.weak else v
                if nv:
                    state[d] = nv
                else:
                    state.pop(d, None)
        # branches only read registers

    def _invoke(self, sig, ins, state, observe):
        callee = ins.method
        vals = [state.get(r) or {} for r in ins.args]
        if observe is not None:
            sink = self.config.sink_match(callee)
            if sink is not None:
                for v in vals:
                    for site, chain in v.items():
                        observe.append(((sig, ins.offset), sink.text, site, chain))
        if (callee.class_descriptor, callee.name) == REFLECTIVE:
            self.diag.add(f"boundary: reflective call in {sig} not resolved")
        body = self.bodies.get(callee)
        if body is not None:
            pregs = list(body.param_registers())
            for i, v in enumerate(vals[:len(pregs)]):
                if v:
                    self._update_param(callee, pregs[i], self._extend(v, ("call", sig, ins.offset)))
            res = self.rets.get(callee, {})
        else:
            m = self.program.methods.get(callee)
            if m is not None and m.access_flags & 0x100:
                self.diag.add(f"boundary: native method {callee} treated as pass-through")
            res = {}
            for v in vals:
                res = _join(res, v)
            if not ins.is_static and ins.args:
                others = {}
                for v in vals[1:]:
                    others = _join(others, v)
                if others:
                    state[ins.args[0]] = _join(state.get(ins.args[0]), others)
        if self.config.source_match(callee) is not None:
            res = _join(res, {(sig, ins.offset): ()})
        if res:
            state[RESULT] = res
        else:
            state.pop(RESULT, None)

    # -- per-method fixed point ---------------------------------------------

    def analyze_method(self, sig):
        body = self.bodies[sig]
        cfg = self.cfg(sig)
        if not cfg.blocks:
            self.observations[sig] = []
            return
        insns = body.instructions
        entry_state = {r: v for r, v in self.params.get(sig, {}).items() if v}
        in_states = {cfg.entry: entry_state}
        order = reverse_postorder(cfg)
        rank = {b: i for i, b in enumerate(order)}
        work = [rank[cfg.entry]]
        queued = {cfg.entry}
        while work:
            bid = order[heapq.heappop(work)]
            queued.discard(bid)
            out, exc = self._run_block(sig, insns, cfg.blocks[bid], in_states[bid], None)
            for succ, kind in cfg.edges.get(bid, ()):
                flow = exc if kind == HANDLER else out
                cur = in_states.get(succ)
                if cur is not None and _state_leq(flow, cur):
                    continue
                in_states[succ] = _join_state(cur, flow)
                if succ not in queued:
                    queued.add(succ)
                    heapq.heappush(work, rank[succ])
        obs = []
        for bid in sorted(in_states):
            self._run_block(sig, insns, cfg.blocks[bid], in_states[bid], obs)
        self.observations[sig] = obs

    def _run_block(self, sig, insns, block, in_state, observe):
        state = dict(in_state)
        exc = dict(in_state)
        for i in range(block.start, block.end):
            self.step(sig, insns[i], state, observe)
            exc = _join_state(exc, state)
        return state, exc

    def run(self):
        pending = sorted(self.bodies)
        self.dirty = set(pending)
        heap = list(pending)
        heapq.heapify(heap)
        while heap:
            sig = heapq.heappop(heap)
            if sig not in self.dirty:
                continue
            self.dirty.discard(sig)
            before = set(self.dirty)
            self.analyze_method(sig)
            for s in self.dirty - before:
                heapq.heappush(heap, s)
            if sig in self.dirty:
                heapq.heappush(heap, sig)



def _source_instruction(program, site):
    body = program.body_of(site[0])
    if body is None:
        return None
    for ins in body.instructions:
        if ins.offset == site[1]:
            return ins
    return None


def analyze(program, config=None):
    """Run propagation and return paths plus analysis diagnostics."""
    config = TaintConfig.load() if config is None else config
    a = _Analysis(program, config)
    a.run()
    best = {}
    for sig in sorted(a.observations):
        for sink_site, sink_pat, src_site, chain in a.observations[sig]:
            key = (src_site, sink_site)
            cur = best.get(key)
            cand = (len(chain), chain, sink_pat)
            if cur is None or cand < cur:
                best[key] = cand
    paths, suppressed = [], 0
    reach = _Reachability(program, config, a.cfgs)
    for (src_site, sink_site), (_, chain, sink_pat) in sorted(best.items()):
        ins = _source_instruction(program, src_site)
        pat = config.source_match(ins.method) if ins is not None else None
        pat_text = pat.text if pat is not None else "?"
        trace = (src_site,) + tuple((h[1], h[2]) for h in chain) + (sink_site,)
        path = TaintPath((pat_text, src_site), (sink_pat, sink_site), config.label_of(pat_text), trace, True)
        if not reach.confirm(path):
            suppressed += 1
            continue
        paths.append(path)
    diags = sorted(a.diag)
    if suppressed:
        diags.append(f"taint: {suppressed} candidate path(s) suppressed as unreachable")
    approx = sorted({p.source[0] for p in paths if p.source[0] in config.approximate})
    for text in approx:
        diags.append(f"taint: source pattern {text} is a name-substring approximation")
    return TaintResult(paths, diags, suppressed)


def propagate(program, config=None):
    return analyze(program, config).paths


class _Reachability:
    def __init__(self, program, config, cfgs=None):
        self.program = program
        self.entry_points = set(config.entry_points) if config is not None else set()
        self.cfgs = cfgs if cfgs is not None else {}
        self._methods = None

    def reachable_methods(self):
        if self._methods is None:
            graph = self.program.call_graph
            roots = sorted(s for s in graph if s.name in self.entry_points)
            seen = set(roots)
            queue = deque(roots)
            while queue:
                m = queue.popleft()
                for callee in graph.get(m, ()):
                    if callee not in seen and callee in graph:
                        seen.add(callee)
                        queue.append(callee)
            self._methods = seen
        return self._methods

    def confirm(self, path):
        sig, offset = path.source[1]
        body = self.program.body_of(sig)
        if body is None:
            return False
        cfg = self.cfgs.get(sig)
        if cfg is None:
            cfg = self.cfgs[sig] = build_cfg(body)
        block = cfg.block_at(offset)
        if block is None or block not in reachable_blocks(cfg):
            return False
        return sig in self.reachable_methods()


def confirm_reachable(program, path, entry_points=None):
    """True iff the source site is live in its method and the method is reachable from an entry point."""
    if entry_points is None:
        config = TaintConfig.load()
    else:
        config = TaintConfig((), (), {}, tuple(entry_points))
    return _Reachability(program, config).confirm(path)
