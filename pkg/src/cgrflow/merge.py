"""Iterative pairwise datapath merging.

Networks are folded into a :class:`MultiDataflow` one at a time. A
correspondence between the new network's actors and the actors already in
the merged substrate decides what is shared; each channel of the new
network is then routed through the substrate:

* if the substrate already connects the two endpoints through SBoxes, the
  existing path is reused and only selector bits are recorded;
* otherwise an ``sbox1x2`` forks the source when it already drives
  something, and an ``sbox2x1`` joins the sink when something already drives
  it.

A new SBox is always inserted next to the shared endpoint, so every merge
step adds at most one SBox in front of a given actor input: a sink shared by
``N`` networks sits behind at most ``N - 1`` cascaded joins.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Mapping, Optional

from .ir import (SBOX1X2, SBOX2X1, Actor, Channel, DataflowNetwork, Endpoint, NetworkError,
                 is_flat, make_sbox, channel_sort_key)
from .multiflow import MultiDataflow, configuration_table, sbox_index

log = logging.getLogger(__name__)

HEURISTIC = "heuristic"
MOREANO = "moreano"
GIVEN = "given"
CANONICAL = "canonical"


class MergeError(NetworkError):
    pass


@dataclass(frozen=True)
class MergePolicy:
    algorithm: str = HEURISTIC
    # "signature": component type and ordered port signature must match;
    # "type": component type only (a signature mismatch is then an error)
    equality: str = "signature"
    order: str = GIVEN
    # per-component vertex weight for the clique-based mapping
    weights: Optional[Mapping] = None

    def __post_init__(self):
        if self.algorithm not in (HEURISTIC, MOREANO):
            raise ValueError(f"unknown merge algorithm {self.algorithm!r}")
        if self.equality not in ("signature", "type"):
            raise ValueError(f"unknown actor equality rule {self.equality!r}")
        if self.order not in (GIVEN, CANONICAL):
            raise ValueError(f"unknown pair order {self.order!r}")

    def key(self, actor: Actor):
        return actor.signature() if self.equality == "signature" else actor.component

    def weight(self, component: str) -> float:
        if self.weights and component in self.weights:
            return self.weights[component]
        return 1


def _compatible(policy: MergePolicy, a: Actor, b: Actor) -> bool:
    if a.is_sbox or b.is_sbox:
        return False
    if policy.key(a) != policy.key(b):
        return False
    if a.signature() != b.signature():
        raise MergeError(
            f"actors '{a.name}' and '{b.name}' share component type '{a.component}' "
            f"but have different port signatures", b.name)
    return True


# ---------------------------------------------------------------------------
# mutable working copy of a merged network


class _Builder:
    def __init__(self, name: str):
        self.name = name
        self.configs = []
        self.actors = {}
        self.ports = {}
        self.out_ch = {}
        self.in_ch = {}
        self.chan_prov = {}
        self.actor_prov = {}
        self.port_prov = {}
        self.selectors = {}
        self._next_sbox = 0

    @classmethod
    def from_multi(cls, m: MultiDataflow) -> "_Builder":
        b = cls(m.base.name)
        b.configs = list(m.configs)
        for a in m.base.actors:
            b.actors[a.name] = a
            b.actor_prov[a.name] = set(m.actor_prov.get(a.name, ()))
        for p in m.base.ports:
            b.ports[p.name] = p
            b.port_prov[p.name] = set(m.port_prov.get(p.name, ()))
        for c in m.base.channels:
            b._add(c, m.channel_prov.get(c.key, ()))
        for s, bits in m.selectors.items():
            b.selectors[s] = list(bits)
        b._next_sbox = 1 + max((sbox_index(s.name) for s in m.base.sboxes), default=-1)
        return b

    def freeze(self) -> MultiDataflow:
        chans = sorted(self.out_ch.values(), key=channel_sort_key)
        net = DataflowNetwork(self.name, tuple(self.actors[n] for n in sorted(self.actors)),
                              tuple(chans), tuple(self.ports[n] for n in self.ports))
        return MultiDataflow(
            net,
            tuple(self.configs),
            {n: frozenset(v) for n, v in self.actor_prov.items()},
            {n: frozenset(v) for n, v in self.port_prov.items()},
            {c.key: frozenset(self.chan_prov[c.key]) for c in chans},
            {s: tuple(v) for s, v in self.selectors.items()},
        )

    # -- channels

    def _add(self, ch: Channel, prov):
        if ch.src in self.out_ch or ch.dst in self.in_ch:
            raise AssertionError(f"point-to-point violation adding {ch.key}")
        self.out_ch[ch.src] = ch
        self.in_ch[ch.dst] = ch
        self.chan_prov[ch.key] = set(prov)

    def _remove(self, ch: Channel) -> set:
        del self.out_ch[ch.src]
        del self.in_ch[ch.dst]
        return self.chan_prov.pop(ch.key)

    def _new_sbox(self, kind: str, width: int) -> Actor:
        while f"sbox_{self._next_sbox}" in self.actors:
            self._next_sbox += 1
        sb = make_sbox(f"sbox_{self._next_sbox}", kind, width)
        self._next_sbox += 1
        self.actors[sb.name] = sb
        self.selectors[sb.name] = [0] * len(self.configs)
        return sb

    def width(self, ep: Endpoint) -> int:
        if ep.actor is None:
            return self.ports[ep.port].width
        return self.actors[ep.actor].port(ep.port).width

    # -- routing

    def route(self, s: Endpoint, d: Endpoint):
        """Existing SBox path from ``s`` to ``d`` as (channels, [(sbox, bit)])."""
        ch = self.out_ch.get(s)
        if ch is None:
            return None
        if ch.dst == d:
            return [ch], []
        a = self.actors.get(ch.dst.actor) if ch.dst.actor is not None else None
        if a is None or not a.is_sbox:
            return None
        if a.kind == SBOX1X2:
            for bit in (0, 1):
                r = self.route(Endpoint(a.name, f"out{bit}"), d)
                if r is not None:
                    return [ch] + r[0], [(a.name, bit)] + r[1]
            return None
        bit = 1 if ch.dst.port == "in1" else 0
        r = self.route(Endpoint(a.name, "out"), d)
        if r is None:
            return None
        return [ch] + r[0], [(a.name, bit)] + r[1]

    def connect(self, s: Endpoint, d: Endpoint, depth: int, k: int) -> int:
        """Realize ``s -> d`` for configuration ``k``; returns SBoxes inserted."""
        r = self.route(s, d)
        if r is not None:
            chans, sels = r
            for ch in chans:
                self.chan_prov[ch.key].add(k)
            self._raise_depth(chans, depth)
            for sbox, bit in sels:
                self.selectors[sbox][k] = bit
                self.actor_prov[sbox].add(k)
            return 0

        inserted = 0
        width = self.width(s)
        src = s
        old = self.out_ch.get(s)
        if old is not None:
            fork = self._new_sbox(SBOX1X2, width)
            prov = self._remove(old)
            self._add(Channel(s, Endpoint(fork.name, "in"), 0), prov | {k})
            self._add(Channel(Endpoint(fork.name, "out0"), old.dst, old.depth), prov)
            self.selectors[fork.name][k] = 1
            self.actor_prov[fork.name] = prov | {k}
            src = Endpoint(fork.name, "out1")
            inserted += 1
        dst = d
        old = self.in_ch.get(d)
        if old is not None:
            join = self._new_sbox(SBOX2X1, width)
            prov = self._remove(old)
            self._add(Channel(old.src, Endpoint(join.name, "in0"), old.depth), prov)
            self._add(Channel(Endpoint(join.name, "out"), d, 0), prov | {k})
            self.selectors[join.name][k] = 1
            self.actor_prov[join.name] = prov | {k}
            dst = Endpoint(join.name, "in1")
            inserted += 1
        self._add(Channel(src, dst, depth), {k})
        return inserted

    def _raise_depth(self, chans, depth: int):
        # a shared path holds one buffer: on the channel that neither enters
        # a fork nor leaves a join
        for ch in chans:
            dst = self.actors.get(ch.dst.actor) if ch.dst.actor is not None else None
            src = self.actors.get(ch.src.actor) if ch.src.actor is not None else None
            if (dst is not None and dst.kind == SBOX1X2) or (src is not None and src.kind == SBOX2X1):
                continue
            if ch.depth < depth:
                prov = self._remove(ch)
                self._add(Channel(ch.src, ch.dst, depth), prov)
            return

    # -- logical view (SBoxes collapsed, selectors ignored)

    def logical_edges(self):
        """All (source, sink) endpoint pairs joined by some SBox path."""
        edges = []
        for s, ch in self.out_ch.items():
            if s.actor is not None and self.actors[s.actor].is_sbox:
                continue
            for d in self._reach(ch):
                edges.append((s, d))
        return edges

    def _reach(self, ch: Channel):
        a = self.actors.get(ch.dst.actor) if ch.dst.actor is not None else None
        if a is None or not a.is_sbox:
            return [ch.dst]
        outs = ["out0", "out1"] if a.kind == SBOX1X2 else ["out"]
        res = []
        for o in outs:
            nxt = self.out_ch.get(Endpoint(a.name, o))
            if nxt is not None:
                res.extend(self._reach(nxt))
        return res


# ---------------------------------------------------------------------------
# correspondences


@dataclass
class Correspondence:
    """Actor mapping between a merged substrate (``a``) and a new network (``b``)."""

    vertices: dict = field(default_factory=dict)   # a actor -> b actor
    edges: list = field(default_factory=list)      # (a edge key, b edge key)
    score: float = 0

    def b_to_a(self) -> dict:
        return {v: k for k, v in self.vertices.items()}


def _edge_key(s: Endpoint, d: Endpoint) -> str:
    return f"{s}->{d}"


def heuristic_mapping(a: _Builder, b: DataflowNetwork, policy: MergePolicy) -> dict:
    """Greedy matching seeded at boundary ports and grown along channels.

    Returns a mapping from ``b`` actor names to ``a`` actor names.
    """
    a_actors = {n: x for n, x in a.actors.items() if not x.is_sbox}
    fw, bw = {}, {}
    for s, d in a.logical_edges():
        fw.setdefault(s, []).append(d)
        bw.setdefault(d, []).append(s)

    matched = {}
    used = set()
    queue = deque()

    def try_match(bname: str, cands):
        if bname in matched:
            return
        bx = b.actor(bname)
        ok = sorted(c for c in set(cands) if c not in used and _compatible(policy, a_actors[c], bx))
        if ok:
            matched[bname] = ok[0]
            used.add(ok[0])
            queue.append(bname)

    def grow_from(b_owner: Optional[str], a_owner: Optional[str], port: Optional[str] = None):
        for ch in sorted(b.channels, key=channel_sort_key):
            if ch.src.actor == b_owner and (b_owner is not None or ch.src.port == port):
                if ch.dst.actor is not None and ch.dst.actor not in matched:
                    a_src = Endpoint(a_owner, ch.src.port)
                    cands = [e.actor for e in fw.get(a_src, ())
                             if e.actor in a_actors and e.port == ch.dst.port]
                    try_match(ch.dst.actor, cands)
            if ch.dst.actor == b_owner and (b_owner is not None or ch.dst.port == port):
                if ch.src.actor is not None and ch.src.actor not in matched:
                    a_dst = Endpoint(a_owner, ch.dst.port)
                    cands = [e.actor for e in bw.get(a_dst, ())
                             if e.actor in a_actors and e.port == ch.src.port]
                    try_match(ch.src.actor, cands)

    def drain():
        while queue:
            bn = queue.popleft()
            grow_from(bn, matched[bn])

    for p in sorted(b.port_map):
        if p in a.ports:
            grow_from(None, None, p)
    drain()
    by_key = {}
    for n in sorted(a_actors):
        by_key.setdefault(policy.key(a_actors[n]), []).append(n)
    for bx in sorted(b.actors, key=lambda x: x.name):
        if bx.name in matched:
            continue
        try_match(bx.name, by_key.get(policy.key(bx), ()))
        drain()
    return matched


def _graph_of(net) -> tuple:
    """(actors by name, edge list) of a network or builder's logical view."""
    if isinstance(net, _Builder):
        actors = {n: x for n, x in net.actors.items() if not x.is_sbox}
        edges = sorted(net.logical_edges(), key=lambda e: _edge_key(*e))
    else:
        actors = dict(net.actor_map)
        edges = sorted(((c.src, c.dst) for c in net.channels), key=lambda e: _edge_key(*e))
    return actors, edges


def build_moreano_mapping(a, b, policy: MergePolicy = MergePolicy(algorithm=MOREANO),
                          w_e: float = 1) -> Correspondence:
    """Clique-based correspondence between two graphs.

    Nodes of the compatibility graph are candidate actor pairings (weight
    ``w_v``, the component's area when ``policy.weights`` has it) and
    candidate channel pairings (weight ``w_e``). Two nodes are compatible
    when the actor pairs they imply form a partial bijection. A greedy
    clique is grown by repeatedly taking the node with the largest marginal
    score, ties broken by name.
    """
    a_actors, a_edges = _graph_of(a)
    b_actors, b_edges = _graph_of(b)

    def owners_ok(ea: Endpoint, eb: Endpoint) -> bool:
        if ea.port != eb.port:
            return False
        if ea.actor is None or eb.actor is None:
            return ea.actor is None and eb.actor is None
        return _compatible(policy, a_actors[ea.actor], b_actors[eb.actor])

    vnodes = []
    for an in sorted(a_actors):
        for bn in sorted(b_actors):
            if _compatible(policy, a_actors[an], b_actors[bn]):
                vnodes.append((an, bn))
    enodes = []
    for (sa, da) in a_edges:
        for (sb, db) in b_edges:
            if owners_ok(sa, sb) and owners_ok(da, db):
                pairs = tuple((x.actor, y.actor) for x, y in ((sa, sb), (da, db)) if x.actor is not None)
                # a self-loop must map onto a self-loop
                if len({p[0] for p in pairs}) != len({p[1] for p in pairs}):
                    continue
                enodes.append((_edge_key(sa, da), _edge_key(sb, db), pairs))

    amap, bmap = {}, {}
    used_ea, used_eb = set(), set()
    chosen_edges = []
    score = 0

    def pair_gain(pairs):
        g = 0
        seen = set()
        for x, y in pairs:
            if (x, y) in seen:
                continue
            seen.add((x, y))
            if x in amap:
                if amap[x] != y:
                    return None
                continue
            if y in bmap:
                return None
            g += policy.weight(a_actors[x].component)
        return g

    remaining_v = list(vnodes)
    remaining_e = list(enodes)
    while True:
        best = None
        for ea, eb, pairs in remaining_e:
            if ea in used_ea or eb in used_eb:
                continue
            g = pair_gain(pairs)
            if g is None:
                continue
            cand = (-(g + w_e), 0, ea, eb, pairs)
            if best is None or cand[:4] < best[:4]:
                best = cand
        for an, bn in remaining_v:
            if an in amap or bn in bmap:
                continue
            g = policy.weight(a_actors[an].component)
            cand = (-g, 1, an, bn, ((an, bn),))
            if best is None or cand[:4] < best[:4]:
                best = cand
        if best is None:
            break
        neg, is_v, x, y, pairs = best
        score += -neg
        for p, q in pairs:
            amap[p] = q
            bmap[q] = p
        if not is_v:
            used_ea.add(x)
            used_eb.add(y)
            chosen_edges.append((x, y))
            remaining_e = [e for e in remaining_e if e[0] != x and e[1] != y]
        remaining_v = [v for v in remaining_v if v[0] not in amap and v[1] not in bmap]

    # edges implied by the final vertex map but not picked explicitly
    picked_a = {e[0] for e in chosen_edges}
    for ea, eb, pairs in enodes:
        if ea in picked_a or eb in used_eb:
            continue
        if all(amap.get(p) == q for p, q in pairs):
            chosen_edges.append((ea, eb))
            picked_a.add(ea)
            used_eb.add(eb)
            score += w_e
    return Correspondence(dict(sorted(amap.items())), sorted(chosen_edges), score)


# ---------------------------------------------------------------------------
# merging


def single(net: DataflowNetwork) -> MultiDataflow:
    """Wrap one flattened network as a one-configuration substrate."""
    if not is_flat(net):
        raise MergeError(f"network '{net.name}' must be flattened before merging", net.name)
    return MultiDataflow(
        net,
        (net.name,),
        {a.name: frozenset({0}) for a in net.actors},
        {p.name: frozenset({0}) for p in net.ports},
        {c.key: frozenset({0}) for c in net.channels},
        {},
    )


def merge_pair(a: MultiDataflow, b: DataflowNetwork, policy: MergePolicy = MergePolicy(),
               name: Optional[str] = None) -> MultiDataflow:
    """Fold network ``b`` into the substrate ``a`` as a new configuration."""
    if not is_flat(b):
        raise MergeError(f"network '{b.name}' must be flattened before merging", b.name)
    if b.name in a.configs:
        raise MergeError(f"configuration '{b.name}' is already merged", b.name)
    w = _Builder.from_multi(a)
    if name is not None:
        w.name = name
    k = len(w.configs)
    w.configs.append(b.name)
    for bits in w.selectors.values():
        bits.append(0)

    for p in b.ports:
        old = w.ports.get(p.name)
        if old is None:
            w.ports[p.name] = p
            w.port_prov[p.name] = {k}
        elif (old.direction, old.width) != (p.direction, p.width):
            raise MergeError(
                f"boundary port '{p.name}' of '{b.name}' conflicts with an earlier network "
                f"({p.direction}[{p.width}] vs {old.direction}[{old.width}])", p.name)
        else:
            w.port_prov[p.name].add(k)

    if policy.algorithm == HEURISTIC:
        b2a = heuristic_mapping(w, b, policy)
    else:
        b2a = build_moreano_mapping(w, b, policy).b_to_a()

    for bx in b.actors:
        if bx.name in b2a:
            w.actor_prov[b2a[bx.name]].add(k)
            continue
        new = bx.name
        if new in w.actors or new in b2a.values():
            new = f"{b.name}_{bx.name}"
            i = 2
            while new in w.actors:
                new = f"{b.name}_{bx.name}_{i}"
                i += 1
        b2a[bx.name] = new
        w.actors[new] = Actor(new, bx.component, bx.ports, bx.kind)
        w.actor_prov[new] = {k}

    def lift(ep: Endpoint) -> Endpoint:
        return ep if ep.actor is None else Endpoint(b2a[ep.actor], ep.port)

    inserted = 0
    for ch in sorted(b.channels, key=channel_sort_key):
        inserted += w.connect(lift(ch.src), lift(ch.dst), ch.depth, k)
    log.debug("merged %s: %d actors shared, %d sboxes inserted", b.name,
              sum(1 for x in b.actors if w.actor_prov[b2a[x.name]] != {k}), inserted)
    return w.freeze()


def merge_all(nets, policy: MergePolicy = MergePolicy(), name: str = "multi_dataflow"):
    """Merge ``N >= 1`` flattened networks; returns ``(MultiDataflow, ConfigurationTable)``."""
    nets = list(nets)
    if not nets:
        raise MergeError("nothing to merge")
    if policy.order == CANONICAL:
        nets = sorted(nets, key=lambda n: n.name)
    m = single(nets[0])
    if len(nets) > 1:
        m = MultiDataflow(m.base.with_(name=name), m.configs, m.actor_prov, m.port_prov,
                          m.channel_prov, m.selectors)
    for net in nets[1:]:
        m = merge_pair(m, net, policy)
    m = place_fifos(m)
    return m, configuration_table(m)


def merge_steps(nets, policy: MergePolicy = MergePolicy(), name: str = "multi_dataflow"):
    """Intermediate substrates of :func:`merge_all`, one per iteration."""
    nets = list(nets)
    if policy.order == CANONICAL:
        nets = sorted(nets, key=lambda n: n.name)
    m = single(nets[0])
    m = MultiDataflow(m.base.with_(name=name), m.configs, m.actor_prov, m.port_prov,
                      m.channel_prov, m.selectors)
    out = []
    for net in nets[1:]:
        m = merge_pair(m, net, policy)
        out.append(m)
    return out


# ---------------------------------------------------------------------------
# FIFO placement


def place_fifos(m: MultiDataflow) -> MultiDataflow:
    """Move buffering off the combinatorial side of every SBox.

    A buffer on the channel into an ``sbox1x2`` moves onto each outgoing
    leg; a buffer on the channel out of an ``sbox2x1`` moves onto each
    incoming leg. Every source-to-sink path keeps its total depth, and
    SBoxes never hold buffers themselves.
    """
    actors = m.base.actor_map
    chans = {c.key: c for c in m.base.channels}
    prov = dict(m.channel_prov)
    out_of = {c.src: c.key for c in m.base.channels}
    into = {c.dst: c.key for c in m.base.channels}

    def kind(ep: Endpoint):
        a = actors.get(ep.actor) if ep.actor is not None else None
        return a.kind if a is not None else None

    def set_depth(key: str, depth: int) -> str:
        c = chans.pop(key)
        nc = Channel(c.src, c.dst, depth)
        chans[nc.key] = nc
        prov[nc.key] = prov.pop(key)
        out_of[nc.src] = nc.key
        into[nc.dst] = nc.key
        return nc.key

    changed = True
    while changed:
        changed = False
        for key in sorted(chans):
            if key not in chans:
                continue
            c = chans[key]
            if c.depth == 0:
                continue
            if kind(c.dst) == SBOX1X2:
                legs = [out_of.get(Endpoint(c.dst.actor, o)) for o in ("out0", "out1")]
            elif kind(c.src) == SBOX2X1:
                legs = [into.get(Endpoint(c.src.actor, i)) for i in ("in0", "in1")]
            else:
                continue
            d = c.depth
            set_depth(key, 0)
            for leg in legs:
                if leg is not None:
                    set_depth(leg, chans[leg].depth + d)
            changed = True
    new_chans = tuple(sorted(chans.values(), key=channel_sort_key))
    if new_chans == tuple(sorted(m.base.channels, key=channel_sort_key)):
        return m
    return MultiDataflow(m.base.with_(channels=new_chans), m.configs, m.actor_prov,
                         m.port_prov, prov, m.selectors)
