"""Random small programs plus a brute-force taint oracle.

The generator emits a flat instruction list per method together with a
listing the DEX assembler accepts. The oracle never touches vrscan: it walks
every acyclic path of every method (forward branches only), iterating
per-method summaries (parameter taint, return taint, static fields) until
nothing changes. Taint values map a source site to the fewest call/return
hops that reach it; a value that would need more than ``max_depth`` hops is
dropped.
"""
from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field

CLASS = "Lr/P;"
OBJ = "Ljava/lang/Object;"
SRC = "Lext/Src;->get()Ljava/lang/Object;"
SINK = "Lext/Sink;->put(Ljava/lang/Object;)V"
LOCALS = 4
ENTRY = "onCreate"

# code units per flat instruction kind, independent of the assembler
UNITS = {"invoke": 3, "move_result": 1, "const": 2, "move": 1, "add": 2, "sput": 2, "sget": 2,
         "if": 2, "goto": 2, "move_exc": 1, "ret": 1, "ret_void": 1}


@dataclass
class GenMethod:
    name: str
    nparams: int
    returns: bool
    insns: list = field(default_factory=list)
    tries: list = field(default_factory=list)  # (start index, end index exclusive, handler index)

    @property
    def nregs(self):
        return LOCALS + self.nparams

    def descriptor(self):
        ret = OBJ if self.returns else "V"
        return f"{self.name}({OBJ * self.nparams}){ret}"

    def offsets(self):
        out, pc = [], 0
        for ins in self.insns:
            out.append(pc)
            pc += UNITS[ins[0]]
        return out


@dataclass
class GenProgram:
    methods: list
    nfields: int
    max_depth: int = 5

    def ext_sig(self, nargs):
        return f"Lext/Lib;->f{nargs}({OBJ * nargs}){OBJ}"

    def callee_sig(self, j):
        return f"{CLASS}->{self.methods[j].descriptor()}"

    def listing(self):
        lines = [f".class public {CLASS}", f".super {OBJ}"]
        for m in self.methods:
            lines.append(f".method public static {m.descriptor()}")
            lines.append(f"    .registers {m.nregs}")
            labels = {}
            for i, ins in enumerate(m.insns):
                if ins[0] in ("if", "goto"):
                    labels.setdefault(ins[-1], f":L{ins[-1]}")
            for k, (s, e, h) in enumerate(m.tries):
                labels.setdefault(s, f":L{s}")
                labels.setdefault(e, f":L{e}")
                labels.setdefault(h, f":L{h}")
            for i, ins in enumerate(m.insns):
                if i in labels:
                    lines.append(labels[i])
                lines.append("    " + self._render(ins, labels))
            for s, e, h in m.tries:
                lines.append(f"    .catchall {{{labels[s]} .. {labels[e]}}} {labels[h]}")
            lines.append(".end method")
        lines.append(".end class")
        return "\n".join(lines) + "\n"

    def _render(self, ins, labels):
        op = ins[0]
        if op == "invoke":
            target, args = ins[1], ins[2]
            regs = ", ".join(f"v{r}" for r in args)
            if target == "src":
                sig = SRC
            elif target == "sink":
                sig = SINK
            elif target == "ext":
                sig = self.ext_sig(len(args))
            else:
                sig = self.callee_sig(target)
            return f"invoke-static {{{regs}}}, {sig}"
        if op == "move_result":
            return f"move-result-object v{ins[1]}"
        if op == "const":
            return f'const-string v{ins[1]}, "{ins[2]}"'
        if op == "move":
            return f"move-object v{ins[1]}, v{ins[2]}"
        if op == "add":
            return f"add-int v{ins[1]}, v{ins[2]}, v{ins[3]}"
        if op == "sput":
            return f"sput-object v{ins[1]}, {CLASS}->f{ins[2]}:{OBJ}"
        if op == "sget":
            return f"sget-object v{ins[1]}, {CLASS}->f{ins[2]}:{OBJ}"
        if op == "if":
            return f"if-eqz v{ins[1]}, {labels[ins[2]]}"
        if op == "goto":
            return f"goto/16 {labels[ins[1]]}"
        if op == "move_exc":
            return f"move-exception v{ins[1]}"
        if op == "ret":
            return f"return-object v{ins[1]}"
        if op == "ret_void":
            return "return-void"
        raise ValueError(op)


def random_program(rng: random.Random, max_methods=12, max_insns=40) -> GenProgram:
    n = rng.randint(1, max_methods)
    methods = []
    for i in range(n):
        name = ENTRY if i == 0 else f"m{i}"
        methods.append(GenMethod(name, 0 if i == 0 else rng.randint(0, 3), rng.random() < 0.6 and i > 0))
    nfields = rng.randint(0, 3)
    prog = GenProgram(methods, nfields, max_depth=rng.choice((2, 3, 5, 5, 5)))
    for m in methods:
        _fill_method(rng, prog, m, max_insns)
    return prog


def _fill_method(rng, prog, m, max_insns):
    regs = list(range(m.nregs))
    target_len = rng.randint(1, max_insns)
    insns = []
    want_handler = rng.random() < 0.4
    n_branches = 0

    def room(k):
        # keep space for the final return and an optional handler instruction
        return len(insns) + k <= max_insns - 1 - (1 if want_handler else 0)

    while len(insns) < target_len - 1:
        r = rng.random()
        if r < 0.14 and room(2):
            insns += [("invoke", "src", []), ("move_result", rng.choice(regs))]
        elif r < 0.24 and room(1):
            insns.append(("invoke", "sink", [rng.choice(regs)]))
        elif r < 0.40 and room(2):
            j = rng.randrange(len(prog.methods))
            callee = prog.methods[j]
            args = [rng.choice(regs) for _ in range(callee.nparams)]
            insns.append(("invoke", j, args))
            if callee.returns and rng.random() < 0.8:
                insns.append(("move_result", rng.choice(regs)))
        elif r < 0.48 and room(2):
            args = [rng.choice(regs) for _ in range(rng.randint(0, 2))]
            insns += [("invoke", "ext", args), ("move_result", rng.choice(regs))]
        elif r < 0.56 and room(1):
            insns.append(("const", rng.choice(regs), f"s{len(insns)}"))
        elif r < 0.66 and room(1):
            insns.append(("move", rng.choice(regs), rng.choice(regs)))
        elif r < 0.71 and room(1):
            insns.append(("add", rng.choice(regs), rng.choice(regs), rng.choice(regs)))
        elif r < 0.77 and prog.nfields and room(1):
            insns.append(("sput", rng.choice(regs), rng.randrange(prog.nfields)))
        elif r < 0.83 and prog.nfields and room(1):
            insns.append(("sget", rng.choice(regs), rng.randrange(prog.nfields)))
        elif r < 0.93 and n_branches < 6 and room(1):
            n_branches += 1
            insns.append(("if", rng.choice(regs), None) if rng.random() < 0.7 else ("goto", None))
        elif r < 0.96 and room(1):
            insns.append(("ret", rng.choice(regs)) if m.returns else ("ret_void",))
        elif not room(1):
            break
    if want_handler and len(insns) >= 1:
        # handler goes at a random point after some covered range
        cut = [i for i in range(1, len(insns) + 1) if i == len(insns) or insns[i][0] != "move_result"]
        h = rng.choice(cut)
        insns.insert(h, ("move_exc", rng.choice(regs)))
        starts = [i for i in range(h) if insns[i][0] != "move_result"]
        s = rng.choice(starts)
        ends = [e for e in range(s + 1, h + 1) if e == h or insns[e][0] != "move_result"]
        e = rng.choice(ends)
        m.tries = [(s, e, h)]
    insns.append(("ret", rng.choice(regs)) if m.returns else ("ret_void",))
    # resolve forward branch targets, never onto a move-result
    for i, ins in enumerate(insns):
        if ins[0] in ("if", "goto"):
            choices = [t for t in range(i + 1, len(insns)) if insns[t][0] != "move_result"]
            t = rng.choice(choices)
            insns[i] = ins[:-1] + (t,)
    m.insns = insns


# --- oracle -----------------------------------------------------------------

def _join_into(dst, src):
    changed = False
    for site, d in src.items():
        if site not in dst or d < dst[site]:
            dst[site] = d
            changed = True
    return changed


def _union(*vals):
    out = {}
    for v in vals:
        _join_into(out, v)
    return out


def _hop(val, max_depth):
    return {s: d + 1 for s, d in val.items() if d + 1 <= max_depth}


class Oracle:
    def __init__(self, prog: GenProgram):
        self.prog = prog
        self.params = [[{} for _ in range(m.nparams)] for m in prog.methods]
        self.rets = [{} for _ in prog.methods]
        self.fields = [{} for _ in range(prog.nfields)]

    def run(self):
        while True:
            self.changed = False
            self.obs = set()
            for mi in range(len(self.prog.methods)):
                self._walk_method(mi)
            if not self.changed:
                return self.obs

    def _walk_method(self, mi):
        m = self.prog.methods[mi]
        offs = m.offsets()
        state = {LOCALS + k: dict(v) for k, v in enumerate(self.params[mi]) if v}
        covered = {}
        for s, e, h in m.tries:
            for i in range(s, e):
                covered[i] = h
        # explicit stack of (index, state); every acyclic path is visited
        stack = [(0, state)]
        while stack:
            i, st = stack.pop()
            ins = m.insns[i]
            pre = st
            post = self._apply(mi, i, offs[i], ins, dict(st))
            if i in covered:
                stack.append((covered[i], pre))
                stack.append((covered[i], post))
            op = ins[0]
            if op in ("ret", "ret_void"):
                continue
            if op == "goto":
                stack.append((ins[1], post))
                continue
            if op == "if":
                stack.append((ins[2], post))
            stack.append((i + 1, post))

    def _apply(self, mi, idx, off, ins, st):
        prog = self.prog
        op = ins[0]
        get = lambda r: st.get(r, {})  # noqa: E731
        if op == "invoke":
            target, args = ins[1], ins[2]
            vals = [get(r) for r in args]
            if target == "sink":
                for v in vals:
                    for site in v:
                        self.obs.add((site, (mi, off)))
                st["RES"] = _union(*vals)
            elif target == "src":
                st["RES"] = {(mi, off): 0}
            elif target == "ext":
                st["RES"] = _union(*vals)
            else:
                for k, v in enumerate(vals):
                    if _join_into(self.params[target][k], _hop(v, prog.max_depth)):
                        self.changed = True
                st["RES"] = dict(self.rets[target])
        elif op == "move_result":
            st[ins[1]] = get("RES")
        elif op == "const":
            st[ins[1]] = {}
        elif op == "move":
            st[ins[1]] = get(ins[2])
        elif op == "add":
            st[ins[1]] = _union(get(ins[2]), get(ins[3]))
        elif op == "sput":
            if _join_into(self.fields[ins[2]], get(ins[1])):
                self.changed = True
        elif op == "sget":
            st[ins[1]] = dict(self.fields[ins[2]])
        elif op == "move_exc":
            st[ins[1]] = {}
        elif op == "ret":
            if _join_into(self.rets[mi], _hop(get(ins[1]), prog.max_depth)):
                self.changed = True
        return st


def reachable_methods(prog: GenProgram):
    edges = {i: {ins[1] for ins in m.insns if ins[0] == "invoke" and isinstance(ins[1], int)}
             for i, m in enumerate(prog.methods)}
    roots = [i for i, m in enumerate(prog.methods) if m.name == ENTRY]
    seen = set(roots)
    q = deque(roots)
    while q:
        for j in edges[q.popleft()]:
            if j not in seen:
                seen.add(j)
                q.append(j)
    return seen


def oracle_pairs(prog: GenProgram):
    """Set of ((method name, source offset), (method name, sink offset))."""
    obs = Oracle(prog).run()
    live = reachable_methods(prog)
    names = [m.name for m in prog.methods]
    return {((names[s[0]], s[1]), (names[k[0]], k[1])) for s, k in obs if s[0] in live}
