"""Correctness oracles for merged substrates.

These are deliberately independent of the merge engine: extraction only
reads the merged graph, its provenance and a configuration table, and the
isomorphism test compares plain networks.
"""
from __future__ import annotations

import ast
import re as _re
from collections import Counter
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional

from .ir import (IN, OUT, SBOX1X2, SBOX2X1, Channel, DataflowNetwork, Endpoint, NetworkError,
                 validate)
from .multiflow import ConfigurationTable, MultiDataflow


class ExtractionError(NetworkError):
    """The merged graph cannot be resolved for a configuration (a merge bug)."""


def extract_configuration(m: MultiDataflow, ctab: ConfigurationTable, c) -> DataflowNetwork:
    """Resolve every SBox of ``m`` for configuration ``c`` into plain wires.

    Elements whose provenance lacks ``c`` are dropped. Each kept sink is
    traced backwards through the SBoxes following the row-``c`` selectors;
    a leg that is not selected, or a channel not serving ``c``, leaves the
    sink unconnected and its port is marked open.
    """
    c = m.config_index(c)
    if not 0 <= c < m.n_configs:
        raise IndexError(c)
    row = ctab.row(c).selectors
    net = m.base
    actors = net.actor_map
    incoming = net.incoming

    def active(ep: Endpoint) -> bool:
        if ep.actor is None:
            return c in m.port_prov.get(ep.port, ())
        return c in m.actor_prov.get(ep.actor, ())

    def trace(d: Endpoint):
        depth = 0
        ep = d
        while True:
            ch = incoming.get(ep)
            if ch is None:
                if ep is d:
                    return None
                raise ExtractionError(f"{ep} is selected in configuration {c} but unconnected",
                                      ep.actor or ep.port)
            if c not in m.channel_prov.get(ch.key, ()):
                return None
            depth += ch.depth
            src = ch.src
            a = actors.get(src.actor) if src.actor is not None else None
            if a is not None and a.kind == SBOX2X1:
                ep = Endpoint(a.name, f"in{row[a.name]}")
                continue
            if a is not None and a.kind == SBOX1X2:
                if src.port != f"out{row[a.name]}":
                    return None
                ep = Endpoint(a.name, "in")
                continue
            if not active(src):
                raise ExtractionError(f"{src} feeds {d} in configuration {c} but is inactive there",
                                      src.actor or src.port)
            return Channel(src, d, depth)

    kept = [a for a in net.actors if not a.is_sbox and active(Endpoint(a.name, ""))]
    ports = tuple(p for p in net.ports if c in m.port_prov.get(p.name, ()))
    sinks = [Endpoint(a.name, p.name) for a in kept for p in a.ports if p.direction == IN]
    sinks += [Endpoint(None, p.name) for p in ports if p.direction == OUT]
    channels = []
    for d in sinks:
        ch = trace(d)
        if ch is not None:
            channels.append(ch)
    used = {ch.src for ch in channels} | {ch.dst for ch in channels}
    out_actors = []
    for a in kept:
        ps = tuple(replace(p, open=Endpoint(a.name, p.name) not in used) for p in a.ports)
        out_actors.append(replace(a, ports=ps))
    result = DataflowNetwork(m.configs[c], tuple(out_actors), tuple(channels), ports)
    diags = validate(result)
    if diags:
        raise ExtractionError(f"configuration {m.configs[c]} resolves to an invalid network: "
                              + "; ".join(diags))
    return result


# ---------------------------------------------------------------------------
# labeled isomorphism


def _graph(net: DataflowNetwork, with_depth: bool = True):
    verts = []
    labels = {}
    for a in net.actors:
        v = ("a", a.name)
        verts.append(v)
        labels[v] = ("actor", a.component, a.kind, tuple(p.signature() for p in a.ports))
    for p in net.ports:
        v = ("p", p.name)
        verts.append(v)
        # boundary ports keep their names: the interface is not relabelable
        labels[v] = ("port", p.name, p.direction, p.width)
    adj = {v: [] for v in verts}
    edges = []
    for ch in net.channels:
        u = ("p", ch.src.port) if ch.src.actor is None else ("a", ch.src.actor)
        w = ("p", ch.dst.port) if ch.dst.actor is None else ("a", ch.dst.actor)
        depth = ch.depth if with_depth else 0
        edges.append((u, ch.src.port, w, ch.dst.port, depth))
        adj[u].append((0, ch.src.port, ch.dst.port, depth, w))
        adj[w].append((1, ch.dst.port, ch.src.port, depth, u))
    return verts, labels, adj, edges


def _refine(ga, gb, ca: dict, cb: dict):
    """Joint colour refinement of two graphs to a fixpoint."""
    n_before = len(set(ca.values()) | set(cb.values()))
    while True:
        sa = {v: (ca[v], tuple(sorted((d, mp, op, dep, ca[o]) for d, mp, op, dep, o in ga[2][v])))
              for v in ga[0]}
        sb = {v: (cb[v], tuple(sorted((d, mp, op, dep, cb[o]) for d, mp, op, dep, o in gb[2][v])))
              for v in gb[0]}
        ids = {s: i for i, s in enumerate(sorted(set(sa.values()) | set(sb.values())))}
        ca = {v: ids[s] for v, s in sa.items()}
        cb = {v: ids[s] for v, s in sb.items()}
        n = len(ids)
        if n == n_before:
            return ca, cb
        n_before = n


def isomorphic_labeled(a: DataflowNetwork, b: DataflowNetwork, depth: bool = True, accept=None):
    """Return ``(True, mapping)`` if ``a`` and ``b`` are isomorphic as labeled graphs.

    Labels are component type, kind and port signature for actors, and the
    name for boundary ports; channels must agree on port names and depth.
    With ``depth=False`` fifo depths are ignored. ``accept``, if given, is
    called with each candidate actor mapping and the search goes on until
    it returns true. The mapping sends ``a`` actor names to ``b`` actor names.
    """
    ga, gb = _graph(a, depth), _graph(b, depth)
    if len(ga[0]) != len(gb[0]) or len(ga[3]) != len(gb[3]):
        return False, None
    all_labels = {s: i for i, s in enumerate(sorted(set(ga[1].values()) | set(gb[1].values())))}
    ca = {v: all_labels[ga[1][v]] for v in ga[0]}
    cb = {v: all_labels[gb[1][v]] for v in gb[0]}
    target = Counter((u, up, w, wp, d) for u, up, w, wp, d in gb[3])

    def search(ca, cb):
        ca, cb = _refine(ga, gb, ca, cb)
        if Counter(ca.values()) != Counter(cb.values()):
            return None
        classes = {}
        for v, col in ca.items():
            classes.setdefault(col, []).append(v)
        open_classes = sorted((len(vs), col) for col, vs in classes.items() if len(vs) > 1)
        if not open_classes:
            inv = {col: v for v, col in cb.items()}
            mapping = {v: inv[ca[v]] for v in ga[0]}
            image = Counter((mapping[u], up, mapping[w], wp, d) for u, up, w, wp, d in ga[3])
            if image != target:
                return None
            if accept is not None and not accept(_actor_map(mapping)):
                return None
            return mapping
        col = open_classes[0][1]
        v = sorted(classes[col])[0]
        fresh = max(max(ca.values()), max(cb.values())) + 1
        for w in sorted(x for x, cc in cb.items() if cc == col):
            na, nb = dict(ca), dict(cb)
            na[v] = fresh
            nb[w] = fresh
            r = search(na, nb)
            if r is not None:
                return r
        return None

    if not ga[0]:
        return (not ga[3] and not gb[3]), {}
    mapping = search(ca, cb)
    if mapping is None:
        return False, None
    return True, _actor_map(mapping)


def _actor_map(mapping: dict) -> dict:
    return {v[1]: w[1] for v, w in mapping.items() if v[0] == "a"}


# ---------------------------------------------------------------------------
# selector sensitivity


@dataclass
class SensitivityReport:
    checked: int = 0
    insensitive: list = field(default_factory=list)   # (config, sbox)

    @property
    def ok(self) -> bool:
        return not self.insensitive


def selector_sensitivity(m: MultiDataflow, ctab: ConfigurationTable, references=None,
                         max_sboxes: int = 16) -> SensitivityReport:
    """Flip every load-bearing selector bit and check the configuration breaks.

    ``references`` are the flattened inputs in configuration order; when
    omitted, the unflipped extraction is the reference.
    """
    sboxes = m.sbox_names
    if len(sboxes) > max_sboxes:
        raise ValueError(f"{len(sboxes)} SBoxes exceed the exhaustive limit of {max_sboxes}")
    report = SensitivityReport()
    for c in range(m.n_configs):
        ref = references[c] if references is not None else extract_configuration(m, ctab, c)
        depth = references is None
        for s in sboxes:
            if c not in m.actor_prov.get(s, ()):
                continue
            report.checked += 1
            try:
                got = extract_configuration(m, ctab.flipped(c, s), c)
            except ExtractionError:
                continue
            if isomorphic_labeled(got, ref, depth)[0]:
                report.insensitive.append((m.configs[c], s))
    return report


def buffer_shortfalls(got: DataflowNetwork, ref: DataflowNetwork, mapping: dict) -> list:
    """Channels of ``ref`` whose image in ``got`` holds a smaller buffer."""
    def lift(ep):
        return ep if ep.actor is None else Endpoint(mapping[ep.actor], ep.port)
    have = {(c.src, c.dst): c.depth for c in got.channels}
    return [c.key for c in ref.channels if have.get((lift(c.src), lift(c.dst)), -1) < c.depth]


def verify_merge(m: MultiDataflow, ctab: ConfigurationTable, inputs) -> list:
    """Diagnostics for the master property: each configuration extracts to
    a network isomorphic to its flattened input.

    Structure is compared without fifo depths; shared channels take the
    largest buffer any configuration asked for, so depths are only required
    not to shrink.
    """
    diags = []
    for c, ref in enumerate(inputs):
        try:
            got = extract_configuration(m, ctab, c)
        except ExtractionError as e:
            diags.append(f"{m.configs[c]}: {e}")
            continue
        if not isomorphic_labeled(ref, got, depth=False)[0]:
            diags.append(f"{m.configs[c]}: extracted configuration is not isomorphic to its input")
            continue
        ok, _ = isomorphic_labeled(ref, got, depth=False,
                                   accept=lambda mp: not buffer_shortfalls(got, ref, mp))
        if not ok:
            diags.append(f"{m.configs[c]}: a channel lost buffering")
    diags += ctab.validate()
    return diags


# ---------------------------------------------------------------------------
# structural Verilog reader, lint and reverse parser
#
# Only the subset the HDL backend writes is understood: ANSI module headers,
# wire/reg/localparam declarations, continuous assigns, named-port instances
# and always blocks.

_TOKEN = _re.compile(r"""
    (?P<num>\d+'[bdhoBDHO][0-9a-fA-FxzXZ_]+|\d+)
  | (?P<id>[A-Za-z_][A-Za-z0-9_$]*|\$[A-Za-z_]+)
  | (?P<op><=|>=|==|!=|&&|\|\||<<|>>|\S)
""", _re.VERBOSE)
_KEYWORDS = frozenset("""
module endmodule input output inout wire reg parameter localparam assign always begin end
if else case endcase default posedge negedge or integer
""".split())


def _strip(text: str) -> str:
    text = _re.sub(r"/\*.*?\*/", lambda mt: "\n" * mt.group(0).count("\n"), text, flags=_re.S)
    text = _re.sub(r"\(\*.*?\*\)", "", text)
    return _re.sub(r"//[^\n]*", "", text)


def _tokens(text: str):
    out = []
    for ln, line in enumerate(_strip(text).split("\n"), 1):
        for mt in _TOKEN.finditer(line):
            out.append((mt.group(0), ln))
    return out


@dataclass
class VModule:
    name: str
    params: dict = field(default_factory=dict)          # name -> default expr tokens
    ports: list = field(default_factory=list)           # (name, direction, range tokens)
    decls: dict = field(default_factory=dict)           # name -> (kind, range tokens)
    assigns: list = field(default_factory=list)         # (lhs, used idents, line, rhs tokens)
    instances: list = field(default_factory=list)       # (module, inst, params, bindings, line)
    always: list = field(default_factory=list)          # (targets, used idents, line)
    uses_before_decl: list = field(default_factory=list)
    file: str = ""

    @property
    def port_dirs(self) -> dict:
        return {p: d for p, d, _ in self.ports}

    @property
    def black_box(self) -> bool:
        return not (self.assigns or self.instances or self.always)


class _Reader:
    def __init__(self, toks, file):
        self.t = toks
        self.i = 0
        self.file = file
        self.diags = []

    def peek(self, k=0):
        j = self.i + k
        return self.t[j][0] if j < len(self.t) else None

    def line(self):
        return self.t[min(self.i, len(self.t) - 1)][1] if self.t else 0

    def take(self, want=None):
        if self.i >= len(self.t):
            raise SyntaxError(f"{self.file}: unexpected end of text")
        tok = self.t[self.i][0]
        if want is not None and tok != want:
            raise SyntaxError(f"{self.file}:{self.t[self.i][1]}: expected '{want}', found '{tok}'")
        self.i += 1
        return tok

    def until(self, stop=";"):
        """Tokens up to ``stop`` at bracket depth 0; consumes ``stop``."""
        out, depth = [], 0
        while True:
            tok = self.take()
            if tok in "([{":
                depth += 1
            elif tok in ")]}":
                depth -= 1
            if depth < 0 or (depth == 0 and tok == stop):
                return out
            out.append(tok)

    def group(self):
        """A balanced ``( ... )``; returns the inner tokens."""
        self.take("(")
        out, depth = [], 1
        while True:
            tok = self.take()
            if tok == "(":
                depth += 1
            elif tok == ")":
                depth -= 1
                if depth == 0:
                    return out
            out.append(tok)


def _is_ident(t: str) -> bool:
    return (t[0].isalpha() or t[0] == "_") and t not in _KEYWORDS


def _idents(toks) -> list:
    return [t for t in toks if _is_ident(t)]


def _split_range(toks):
    """``[msb:lsb] name`` -> (range tokens, rest)."""
    if toks and toks[0] == "[":
        j = toks.index("]")
        return toks[:j + 1], toks[j + 1:]
    return [], toks


def _split_commas(toks) -> list:
    out, cur, depth = [], [], 0
    for t in toks:
        if t in "([{":
            depth += 1
        elif t in ")]}":
            depth -= 1
        if t == "," and depth == 0:
            out.append(cur)
            cur = []
        else:
            cur.append(t)
    if cur:
        out.append(cur)
    return out


def parse_verilog(text: str, file: str = "") -> tuple:
    """Return ``(modules, diagnostics)`` for one file."""
    r = _Reader(_tokens(text), file)
    modules = []
    opened = 0
    try:
        while r.peek() is not None:
            tok = r.take()
            if tok == "endmodule":
                r.diags.append(f"{file}:{r.line()}: endmodule without module")
                continue
            if tok != "module":
                r.diags.append(f"{file}:{r.line()}: unexpected '{tok}' outside a module")
                continue
            opened += 1
            modules.append(_parse_module(r, file))
    except SyntaxError as e:
        r.diags.append(str(e))
    return modules, r.diags


def _parse_module(r: _Reader, file: str) -> VModule:
    m = VModule(r.take(), file=file)
    declared = set()
    if r.peek() == "#":
        r.take()
        for item in _split_commas(r.group()):
            if item and item[0] == "parameter":
                item = item[1:]
            if "=" in item:
                k = item.index("=")
                m.params[item[k - 1]] = item[k + 1:]
                declared.add(item[k - 1])
    if r.peek() == "(":
        for item in _split_commas(r.group()):
            if not item:
                continue
            d = item[0]
            rest = [t for t in item[1:] if t not in ("wire", "reg", "signed")]
            kind = "reg" if "reg" in item else "wire"
            rng, rest = _split_range(rest)
            for u in _idents(rng):
                if u not in declared:
                    m.uses_before_decl.append((u, r.line()))
            name = rest[0]
            m.ports.append((name, d, rng))
            m.decls[name] = (kind, rng)
            declared.add(name)
    r.take(";")

    def use(names, line):
        for u in names:
            if u not in declared:
                m.uses_before_decl.append((u, line))

    while True:
        tok = r.peek()
        if tok is None:
            raise SyntaxError(f"{file}: module {m.name} lacks endmodule")
        line = r.line()
        if tok == "endmodule":
            r.take()
            return m
        if tok == "module":
            raise SyntaxError(f"{file}:{line}: module {m.name} lacks endmodule before nested module")
        if tok in ("wire", "reg", "integer"):
            r.take()
            body = r.until(";")
            body = [t for t in body if t != "signed"]
            rng, rest = _split_range(body)
            use(_idents(rng), line)
            for item in _split_commas(rest):
                if "=" in item:
                    raise SyntaxError(f"{file}:{line}: net declaration assignments are not supported")
                name = item[0]
                use(_idents(item[1:]), line)
                if name in declared:
                    r.diags.append(f"{file}:{line}: '{name}' declared twice in {m.name}")
                # unpacked dimension: a memory, written from any number of processes
                m.decls[name] = ("memory" if "[" in item[1:] else tok, rng)
                declared.add(name)
            continue
        if tok in ("localparam", "parameter"):
            r.take()
            body = r.until(";")
            for item in _split_commas(body):
                k = item.index("=")
                use(_idents(item[k + 1:]), line)
                m.params[item[k - 1]] = item[k + 1:]
                declared.add(item[k - 1])
            continue
        if tok == "assign":
            r.take()
            body = r.until(";")
            k = body.index("=")
            lhs = body[0]
            use(_idents(body[:k]) + _idents(body[k + 1:]), line)
            # partial selects on the left are not width-checked
            m.assigns.append((lhs, _idents(body[k + 1:]), line, body[k + 1:] if k == 1 else []))
            continue
        if tok == "always":
            r.take()
            r.take("@")
            if r.peek() == "*":
                r.take()
                sens = []
            else:
                sens = r.group()
            use(_idents(sens), line)
            body = _statement(r)
            targets, used = _block_targets(body)
            use(used, line)
            m.always.append((targets, used, line))
            continue
        # instance: MOD [#(...)] NAME ( .p(n), ... );
        mod = r.take()
        params = {}
        if r.peek() == "#":
            r.take()
            for item in _split_commas(r.group()):
                params[item[1]] = item[3:-1]
        inst = r.take()
        bindings = []
        for item in _split_commas(r.group()):
            if not item or item[0] != ".":
                raise SyntaxError(f"{file}:{line}: only named port connections are supported")
            inner = item[3:-1]
            use(_idents(inner), line)
            bindings.append((item[1], inner))
        r.take(";")
        m.instances.append((mod, inst, params, bindings, line))


def _statement(r: _Reader) -> list:
    """Tokens of one procedural statement (``begin ... end`` or up to ``;``)."""
    out = []
    depth = 0
    while True:
        tok = r.take()
        out.append(tok)
        if tok in ("begin", "case"):
            depth += 1
        elif tok in ("end", "endcase"):
            depth -= 1
            if depth == 0:
                return out
        elif tok == ";" and depth == 0:
            return out


def _block_targets(body) -> tuple:
    targets = set()
    paren = 0
    for j, tok in enumerate(body):
        if tok == "(":
            paren += 1
        elif tok == ")":
            paren -= 1
        elif tok in ("=", "<=") and paren == 0 and j > 0:
            k = j - 1
            if body[k] == "]":
                while body[k] != "[":
                    k -= 1
                k -= 1
            targets.add(body[k])
    return targets, _idents(body)


def _eval(toks, env: dict):
    expr = " ".join(str(env.get(t, t)) if _re.match(r"^[A-Za-z_]", t) else t for t in toks)
    expr = expr.replace("/", "//")

    def ev(n):
        if isinstance(n, ast.Expression):
            return ev(n.body)
        if isinstance(n, ast.Constant) and isinstance(n.value, int):
            return n.value
        if isinstance(n, ast.UnaryOp) and isinstance(n.op, ast.USub):
            return -ev(n.operand)
        if isinstance(n, ast.BinOp):
            a, b = ev(n.left), ev(n.right)
            ops = {ast.Add: a + b, ast.Sub: a - b, ast.Mult: a * b}
            if isinstance(n.op, ast.FloorDiv):
                return a // b
            if type(n.op) in ops:
                return ops[type(n.op)]
        raise ValueError(expr)
    return ev(ast.parse(expr, mode="eval"))


def _width(rng, env: dict):
    if not rng:
        return 1
    return _width_cached(tuple(rng), tuple(sorted((k, v) for k, v in env.items() if k in rng)))


@lru_cache(maxsize=4096)
def _width_cached(rng, env_items):
    env = dict(env_items)
    inner = rng[1:-1]
    k = inner.index(":")
    try:
        return abs(_eval(inner[:k], env) - _eval(inner[k + 1:], env)) + 1
    except (ValueError, SyntaxError, KeyError):
        return None


def _literal_width(toks):
    if len(toks) == 1:
        mt = _re.match(r"^(\d+)'", toks[0])
        if mt:
            return int(mt.group(1))
    return None


def _closing(toks, i: int) -> int:
    depth = 0
    for j in range(i, len(toks)):
        depth += {"{": 1, "}": -1}.get(toks[j], 0)
        if depth == 0:
            return j
    return -1


def _expr_width(toks, decls: dict, env: dict):
    """Width of a net, slice, sized literal or concatenation; None otherwise."""
    toks = list(toks)
    if not toks:
        return None
    if toks[0] == "{" and _closing(toks, 0) == len(toks) - 1:
        inner = toks[1:-1]
        # replication {n{x}}
        if len(inner) > 2 and inner[1] == "{" and inner[-1] == "}":
            try:
                n = _eval(inner[:1], env)
            except (ValueError, SyntaxError):
                return None
            w = _expr_width(inner[1:], decls, env)
            return None if w is None else n * w
        total = 0
        for part in _split_commas(inner):
            w = _expr_width(part, decls, env)
            if w is None:
                return None
            total += w
        return total
    if len(toks) == 1:
        if toks[0] in decls:
            return _width(decls[toks[0]][1], env)
        return _literal_width(toks)
    if toks[0] in decls and toks[1] == "[" and toks[-1] == "]":
        inner = toks[2:-1]
        if decls[toks[0]][0] == "memory":
            return _width(decls[toks[0]][1], env) if ":" not in inner else None
        if ":" not in inner:
            return 1
        k = inner.index(":")
        try:
            return abs(_eval(inner[:k], env) - _eval(inner[k + 1:], env)) + 1
        except (ValueError, SyntaxError):
            return None
    return None


def lint_netlist(files: dict) -> list:
    """Structural checks over a set of Verilog texts (file name -> text).

    Balanced module/endmodule, declaration before use, one driver per net,
    every port of every instance bound, known modules and matching widths.
    """
    diags = []
    modules = {}
    for fname in sorted(files):
        mods, d = parse_verilog(files[fname], fname)
        diags += d
        for mod in mods:
            if mod.name in modules:
                diags.append(f"{fname}: module {mod.name} defined twice")
            modules[mod.name] = mod
    for mod in modules.values():
        where = f"{mod.file}: {mod.name}"
        for u, line in mod.uses_before_decl:
            diags.append(f"{where}:{line}: '{u}' used before declaration")
        if mod.black_box:
            continue
        env = {k: _eval_default(v, mod.params) for k, v in mod.params.items()}
        drivers = Counter()
        for lhs, _, line, rhs in mod.assigns:
            drivers[lhs] += 1
            if lhs not in mod.decls:
                continue
            lw = _width(mod.decls[lhs][1], env)
            rw = _expr_width(rhs, mod.decls, env)
            if lw is not None and rw is not None and lw != rw:
                diags.append(f"{where}:{line}: assign to '{lhs}' is {lw} bits wide, from {rw} bits")
        for targets, _, _ in mod.always:
            for t in targets:
                drivers[t] += 1
        for modname, inst, params, bindings, line in mod.instances:
            sub = modules.get(modname)
            if sub is None:
                diags.append(f"{where}:{line}: instance {inst} of unknown module {modname}")
                continue
            sub_env = {k: _eval_default(v, sub.params) for k, v in sub.params.items()}
            for k, v in params.items():
                try:
                    sub_env[k] = _eval(v, env)
                except (ValueError, SyntaxError):
                    pass
            dirs = {p: (d, rng) for p, d, rng in sub.ports}
            bound = set()
            for pin, netx in bindings:
                if pin not in dirs:
                    diags.append(f"{where}:{line}: {inst} binds unknown port '{pin}' of {modname}")
                    continue
                if pin in bound:
                    diags.append(f"{where}:{line}: {inst} binds port '{pin}' twice")
                bound.add(pin)
                d, rng = dirs[pin]
                if d == "output" and not netx:
                    continue
                if not netx:
                    diags.append(f"{where}:{line}: input {inst}.{pin} left unconnected")
                    continue
                if d == "output" and len(netx) == 1 and netx[0] in mod.decls:
                    drivers[netx[0]] += 1
                pw = _width(rng, sub_env)
                nw = _expr_width(netx, mod.decls, env)
                if pw is not None and nw is not None and pw != nw:
                    diags.append(f"{where}:{line}: {inst}.{pin} is {pw} bits wide, bound to {nw} bits")
            for pin in dirs:
                if pin not in bound:
                    diags.append(f"{where}:{line}: {inst} leaves port '{pin}' of {modname} unbound")
        dirs = mod.port_dirs
        for name, (kind, _) in mod.decls.items():
            n = drivers.get(name, 0)
            if dirs.get(name) == "input":
                if n:
                    diags.append(f"{where}: input '{name}' is driven inside the module")
            elif kind in ("integer", "memory"):
                continue
            elif n == 0:
                diags.append(f"{where}: '{name}' has no driver")
            elif n > 1:
                diags.append(f"{where}: '{name}' has {n} drivers")
    return diags


def _eval_default(toks, params: dict, _seen=None):
    env = {}
    for t in toks:
        if t in params and t not in (_seen or ()):
            env[t] = _eval_default(params[t], params, (_seen or set()) | {t})
    try:
        return _eval(toks, env)
    except (ValueError, SyntaxError):
        return None


def recover_adjacency(files: dict, protocol=None, top: Optional[str] = None) -> dict:
    """Rebuild the dataflow adjacency of an emitted top level.

    Returns ``{"instances": {name: module}, "channels": {(src, dst): depth}}``
    where endpoints read ``inst.port`` or a boundary port name, and FIFO
    wrapper instances are folded back into the channel they buffer.
    """
    from .formats import DEFAULT_PROTOCOL
    protocol = protocol or DEFAULT_PROTOCOL
    data = protocol.data.pattern
    pre, post = data.split("{port}")
    pin_re = _re.compile("^" + _re.escape(pre) + r"(\w+?)" + _re.escape(post) + "$")

    modules = {}
    for fname in sorted(files):
        for mod in parse_verilog(files[fname], fname)[0]:
            modules[mod.name] = mod
    if top is None:
        used = {i[0] for mod in modules.values() for i in mod.instances}
        tops = [n for n, mod in modules.items() if n not in used and not mod.black_box]
        if len(tops) != 1:
            raise ValueError(f"cannot pick a top module among {sorted(tops)}")
        top = tops[0]
    tm = modules[top]

    def pin_port(pin):
        mt = pin_re.match(pin)
        return mt.group(1) if mt else None

    drivers, loads = {}, {}
    for lhs, used_ids, _, _ in tm.assigns:
        if len(used_ids) != 1:
            continue
        port = pin_port(used_ids[0]) if tm.port_dirs.get(used_ids[0]) == "input" else None
        if port is not None:
            drivers[lhs] = port
        port = pin_port(lhs) if tm.port_dirs.get(lhs) == "output" else None
        if port is not None:
            loads.setdefault(used_ids[0], []).append(port)
    instances = {}
    fifo_depth = {}
    for modname, inst, params, bindings, _ in tm.instances:
        instances[inst] = modname
        sub = modules.get(modname)
        if modname == "fifo_wrapper":
            fifo_depth[inst] = int(params.get("DEPTH", ["1"])[0])
        for pin, netx in bindings:
            port = pin_port(pin)
            if port is None or len(netx) != 1 or sub is None:
                continue
            d = sub.port_dirs.get(pin)
            if d == "output":
                drivers[netx[0]] = f"{inst}.{port}"
            elif d == "input":
                loads.setdefault(netx[0], []).append(f"{inst}.{port}")
    edges = {}
    for netn, src in drivers.items():
        for dst in loads.get(netn, []):
            edges[src] = dst
    channels = {}
    for src, dst in sorted(edges.items()):
        if src.split(".")[0] in fifo_depth:
            continue
        depth = 0
        while dst.split(".")[0] in fifo_depth:
            f = dst.split(".")[0]
            depth += fifo_depth[f]
            dst = edges[f"{f}.out"]
        channels[(src, dst)] = depth
    return {"instances": instances, "channels": channels}
