"""Dataflow network IR: actors, channels, boundary ports.

Networks are immutable. Builders and passes construct new instances instead
of mutating, so the same network can be shared between concurrent jobs.

A channel endpoint names an actor port, or a network boundary port when
``actor`` is ``None``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property
from typing import Iterable, Optional

ATOMIC = "atomic"
HIERARCHICAL = "hierarchical"
SBOX1X2 = "sbox1x2"
SBOX2X1 = "sbox2x1"
FANOUT = "fanout"
ACTOR_KINDS = (ATOMIC, HIERARCHICAL, SBOX1X2, SBOX2X1, FANOUT)
SBOX_KINDS = (SBOX1X2, SBOX2X1)

IN = "in"
OUT = "out"


class NetworkError(ValueError):
    """Semantic error in a network; ``element`` names the offender."""

    def __init__(self, message: str, element: str = ""):
        super().__init__(message)
        self.element = element


class HierarchyCycleError(NetworkError):
    def __init__(self, chain):
        self.chain = list(chain)
        super().__init__("recursive hierarchy: " + " -> ".join(self.chain), self.chain[-1])


@dataclass(frozen=True)
class Port:
    name: str
    direction: str
    width: int
    # actor ports only: deliberately left unconnected
    open: bool = False

    def signature(self):
        return (self.name, self.direction, self.width)


@dataclass(frozen=True)
class Endpoint:
    actor: Optional[str]
    port: str

    @property
    def is_boundary(self) -> bool:
        return self.actor is None

    def __str__(self):
        return self.port if self.actor is None else f"{self.actor}.{self.port}"


@dataclass(frozen=True)
class Channel:
    src: Endpoint
    dst: Endpoint
    depth: int = 1

    @property
    def key(self) -> str:
        return f"{self.src}->{self.dst}"


@dataclass(frozen=True)
class Actor:
    name: str
    component: str
    ports: tuple = ()
    kind: str = ATOMIC
    subnetwork: Optional["DataflowNetwork"] = None

    def port(self, name: str) -> Optional[Port]:
        for p in self.ports:
            if p.name == name:
                return p
        return None

    def signature(self):
        """Identity used for sharing: component type plus ordered port signature."""
        return (self.component, tuple(p.signature() for p in self.ports))

    @property
    def is_sbox(self) -> bool:
        return self.kind in SBOX_KINDS

    @property
    def inputs(self):
        return [p for p in self.ports if p.direction == IN]

    @property
    def outputs(self):
        return [p for p in self.ports if p.direction == OUT]


@dataclass(frozen=True)
class DataflowNetwork:
    name: str
    actors: tuple = ()
    channels: tuple = ()
    ports: tuple = ()

    @cached_property
    def actor_map(self) -> dict:
        return {a.name: a for a in self.actors}

    @cached_property
    def port_map(self) -> dict:
        return {p.name: p for p in self.ports}

    @cached_property
    def incoming(self) -> dict:
        return {c.dst: c for c in self.channels}

    @cached_property
    def outgoing(self) -> dict:
        return {c.src: c for c in self.channels}

    def actor(self, name: str) -> Actor:
        return self.actor_map[name]

    def endpoint_port(self, ep: Endpoint) -> Optional[Port]:
        """Port object behind an endpoint, or None if it does not exist."""
        if ep.actor is None:
            return self.port_map.get(ep.port)
        a = self.actor_map.get(ep.actor)
        return None if a is None else a.port(ep.port)

    def is_source(self, ep: Endpoint) -> bool:
        p = self.endpoint_port(ep)
        if p is None:
            return False
        # boundary inputs feed the network; actor outputs feed channels
        return (p.direction == IN) if ep.actor is None else (p.direction == OUT)

    @property
    def sboxes(self):
        return [a for a in self.actors if a.is_sbox]

    def with_(self, **kw) -> "DataflowNetwork":
        return replace(self, **kw)


def sbox_ports(kind: str, width: int):
    if kind == SBOX1X2:
        return (Port("in", IN, width), Port("out0", OUT, width), Port("out1", OUT, width),
                Port("sel", IN, 1, open=True))
    if kind == SBOX2X1:
        return (Port("in0", IN, width), Port("in1", IN, width), Port("out", OUT, width),
                Port("sel", IN, 1, open=True))
    raise ValueError(kind)


def sbox_component(kind: str, width: int) -> str:
    """Annotation key of an SBox of the given data width, e.g. ``sbox2x1_16``."""
    return f"{kind}_{width}"


def make_sbox(name: str, kind: str, width: int) -> Actor:
    return Actor(name, sbox_component(kind, width), sbox_ports(kind, width), kind)


# ---------------------------------------------------------------------------
# validation


def validate(net: DataflowNetwork) -> list:
    """Return one human-readable diagnostic per invariant violation."""
    diags = []
    seen = {}
    for a in net.actors:
        seen[a.name] = seen.get(a.name, 0) + 1
    for name, n in sorted(seen.items()):
        if n > 1:
            diags.append(f"duplicate actor name '{name}' ({n} instances)")
    pseen = {}
    for p in net.ports:
        pseen[p.name] = pseen.get(p.name, 0) + 1
        if p.direction not in (IN, OUT):
            diags.append(f"network port '{p.name}' has bad direction '{p.direction}'")
    for name, n in sorted(pseen.items()):
        if n > 1:
            diags.append(f"duplicate network port '{name}'")

    for a in net.actors:
        if a.kind not in ACTOR_KINDS:
            diags.append(f"actor '{a.name}' has unknown kind '{a.kind}'")
            continue
        if a.kind == HIERARCHICAL and a.subnetwork is None:
            diags.append(f"hierarchical actor '{a.name}' has no subnetwork")
        if a.kind != HIERARCHICAL and a.subnetwork is not None:
            diags.append(f"{a.kind} actor '{a.name}' must not carry a subnetwork")
        names = [p.name for p in a.ports]
        for dup in sorted({n for n in names if names.count(n) > 1}):
            diags.append(f"actor '{a.name}' declares port '{dup}' twice")
        if a.is_sbox:
            data_in = [p for p in a.inputs if p.name != "sel"]
            sel = a.port("sel")
            want_in, want_out = (1, 2) if a.kind == SBOX1X2 else (2, 1)
            if len(data_in) != want_in or len(a.outputs) != want_out or sel is None:
                diags.append(f"{a.kind} '{a.name}' must have {want_in} data input(s), "
                             f"{want_out} output(s) and a selector")

    in_count = {}
    out_count = {}
    for c in net.channels:
        sp, dp = net.endpoint_port(c.src), net.endpoint_port(c.dst)
        if sp is None:
            diags.append(f"channel {c.key}: source {c.src} does not exist")
        elif not net.is_source(c.src):
            diags.append(f"channel {c.key}: {c.src} cannot drive a channel")
        if dp is None:
            diags.append(f"channel {c.key}: sink {c.dst} does not exist")
        elif net.is_source(c.dst):
            diags.append(f"channel {c.key}: {c.dst} cannot terminate a channel")
        if sp is not None and dp is not None and sp.width != dp.width:
            diags.append(f"channel {c.key}: width mismatch {c.src}[{sp.width}] -> {c.dst}[{dp.width}]")
        if c.depth < 0:
            diags.append(f"channel {c.key}: negative fifo depth {c.depth}")
        in_count[c.dst] = in_count.get(c.dst, 0) + 1
        out_count[c.src] = out_count.get(c.src, 0) + 1
    for ep, n in sorted(in_count.items(), key=lambda kv: str(kv[0])):
        if n > 1:
            diags.append(f"port {ep} has {n} incoming channels")
    for ep, n in sorted(out_count.items(), key=lambda kv: str(kv[0])):
        if n > 1:
            diags.append(f"port {ep} drives {n} channels (use a fanout actor)")

    # dangling ports: every port is connected or explicitly marked open
    for a in net.actors:
        if a.kind == HIERARCHICAL:
            continue
        for p in a.ports:
            ep = Endpoint(a.name, p.name)
            if p.open:
                continue
            if ep not in in_count and ep not in out_count:
                diags.append(f"port {ep} is unconnected and not marked open")
    for p in net.ports:
        ep = Endpoint(None, p.name)
        if ep not in in_count and ep not in out_count:
            diags.append(f"network port '{p.name}' is unconnected")
    return diags


def check(net: DataflowNetwork) -> DataflowNetwork:
    diags = validate(net)
    if diags:
        raise NetworkError(f"network '{net.name}': " + "; ".join(diags), diags[0])
    return net


# ---------------------------------------------------------------------------
# flattening


def is_flat(net: DataflowNetwork) -> bool:
    return all(a.kind != HIERARCHICAL for a in net.actors)


def flatten(net: DataflowNetwork) -> DataflowNetwork:
    """Explode hierarchical actors into their atomic children.

    Children are renamed ``<parent>_<child>``; a boundary port of the child
    network is spliced out, joining the outer channel with the inner one. A
    spliced channel keeps the larger of the two fifo depths.
    """
    return _flatten(net, ())


def _flatten(net: DataflowNetwork, stack) -> DataflowNetwork:
    if net.name in stack:
        raise HierarchyCycleError(list(stack) + [net.name])
    if is_flat(net):
        return net
    stack = tuple(stack) + (net.name,)

    actors = []
    channels = list(net.channels)
    for a in net.actors:
        if a.kind != HIERARCHICAL:
            actors.append(a)
            continue
        sub = _flatten(a.subnetwork, stack)
        prefix = a.name + "_"
        for child in sub.actors:
            actors.append(replace(child, name=prefix + child.name))

        def lift(ep):
            return Endpoint(None, ep.port) if ep.actor is None else Endpoint(prefix + ep.actor, ep.port)

        # inner channels; those touching the child boundary are kept as
        # half-edges keyed by the boundary port
        inner_in = {}   # boundary input port -> channel from it
        inner_out = {}  # boundary output port -> channel into it
        through = {}
        for c in sub.channels:
            if c.src.actor is None and c.dst.actor is None:
                through[c.src.port] = c
            elif c.src.actor is None:
                inner_in[c.src.port] = c
            elif c.dst.actor is None:
                inner_out[c.dst.port] = c
            else:
                channels.append(Channel(lift(c.src), lift(c.dst), c.depth))
        spliced = []
        for c in channels:
            if c.dst.actor == a.name:
                continue
            if c.src.actor == a.name:
                continue
            spliced.append(c)
        outer_in = {c.dst.port: c for c in channels if c.dst.actor == a.name}
        outer_out = {c.src.port: c for c in channels if c.src.actor == a.name}
        def outer_source(oc):
            # a channel looping from the actor back into itself starts inside
            if oc.src.actor != a.name:
                return oc.src, oc.depth
            ic = inner_out.get(oc.src.port)
            return (lift(ic.src), max(oc.depth, ic.depth)) if ic is not None else (None, 0)

        for port, oc in outer_in.items():
            src, depth = outer_source(oc)
            if src is None:
                continue
            if port in inner_in:
                ic = inner_in[port]
                spliced.append(Channel(src, lift(ic.dst), max(depth, ic.depth)))
            elif port in through:
                tc = through[port]
                out_c = outer_out.get(tc.dst.port)
                if out_c is not None and out_c.dst.actor != a.name:
                    spliced.append(Channel(src, out_c.dst, max(depth, tc.depth, out_c.depth)))
        for port, oc in outer_out.items():
            if oc.dst.actor == a.name:
                continue
            if port in inner_out:
                ic = inner_out[port]
                spliced.append(Channel(lift(ic.src), oc.dst, max(oc.depth, ic.depth)))
        channels = spliced

    names = [x.name for x in actors]
    dups = sorted({n for n in names if names.count(n) > 1})
    if dups:
        raise NetworkError(f"name collision after flattening: {', '.join(dups)}", dups[0])
    return DataflowNetwork(net.name, tuple(actors), tuple(channels), net.ports)


def structurally_equal(a: DataflowNetwork, b: DataflowNetwork) -> bool:
    """Equality up to ordering of actors, channels and ports."""
    return (a.name == b.name
            and sorted(a.actors, key=lambda x: x.name) == sorted(b.actors, key=lambda x: x.name)
            and sorted(a.channels, key=lambda c: c.key) == sorted(b.channels, key=lambda c: c.key)
            and sorted(a.ports, key=lambda p: p.name) == sorted(b.ports, key=lambda p: p.name))


def channel_sort_key(c: Channel):
    return (c.src.actor or "", c.src.port, c.dst.actor or "", c.dst.port)


def canonical(net: DataflowNetwork) -> DataflowNetwork:
    """Same network with actors, channels and ports in deterministic order."""
    return DataflowNetwork(
        net.name,
        tuple(sorted(net.actors, key=lambda a: a.name)),
        tuple(sorted(net.channels, key=channel_sort_key)),
        tuple(net.ports),
    )


def ports_in(net: DataflowNetwork) -> list:
    return [p for p in net.ports if p.direction == IN]


def ports_out(net: DataflowNetwork) -> list:
    return [p for p in net.ports if p.direction == OUT]


def make_network(name: str, actors: Iterable = (), channels: Iterable = (),
                 ports: Iterable = ()) -> DataflowNetwork:
    return DataflowNetwork(name, tuple(actors), tuple(channels), tuple(ports))
