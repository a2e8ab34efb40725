"""Hand-built example networks and a random input-set generator."""
from __future__ import annotations

import random
from dataclasses import dataclass

from .ir import (ATOMIC, FANOUT, HIERARCHICAL, IN, OUT, Actor, Channel, DataflowNetwork,
                 Endpoint, Port, check)


def unary(name: str, component: str, width: int = 16, kind: str = ATOMIC, sub=None) -> Actor:
    return Actor(name, component, (Port("a", IN, width), Port("y", OUT, width)), kind, sub)


def chain(name: str, stages, width: int = 16, src: str = "in", dst: str = "out",
          depth: int = 1) -> DataflowNetwork:
    """``src -> stages[0] -> ... -> dst``; ``stages`` are Actor objects with ports a/y."""
    chans = []
    prev = Endpoint(None, src)
    for a in stages:
        chans.append(Channel(prev, Endpoint(a.name, "a"), depth))
        prev = Endpoint(a.name, "y")
    chans.append(Channel(prev, Endpoint(None, dst), depth))
    ports = (Port(src, IN, width), Port(dst, OUT, width))
    return DataflowNetwork(name, tuple(stages), tuple(chans), ports)


def _sub(name: str, first: str, second: str) -> DataflowNetwork:
    return chain(name, [unary(first, first), unary(second, second)], src="a", dst="y")


def stepwise_networks():
    """Three inputs of the step-by-step merging example, in merge order.

    ``alpha`` and ``gamma`` share actors A and C and each wraps a different
    two-actor sub-network (H, J); ``beta`` is flat and shares only C.
    """
    alpha = chain("alpha", [unary("A", "A"), unary("H", "H", kind=HIERARCHICAL, sub=_sub("h_net", "D", "E")),
                            unary("C", "C")])
    gamma = chain("gamma", [unary("A", "A"), unary("J", "J", kind=HIERARCHICAL, sub=_sub("j_net", "F", "G")),
                            unary("C", "C")])
    beta = chain("beta", [unary("K", "K"), unary("C", "C")], src="in_b")
    return [alpha, gamma, beta]


def cascade_networks(n: int, depth: int = 1):
    """``n`` networks ``in -> P<i> -> S -> out`` all sharing actor S."""
    return [chain(f"net{i}", [unary(f"P{i}", f"P{i}"), unary("S", "S")], depth=depth)
            for i in range(n)]


def roberts_network(width: int = 32) -> DataflowNetwork:
    """Edge-detector-shaped network with ports in_size, in_pel and out_pel."""
    actors = (
        Actor("line_buffer", "line_buffer",
              (Port("size", IN, width), Port("pel", IN, width), Port("win", OUT, width))),
        Actor("gradient", "roberts_grad", (Port("win", IN, width), Port("pel", OUT, width))),
    )
    chans = (
        Channel(Endpoint(None, "in_size"), Endpoint("line_buffer", "size"), 2),
        Channel(Endpoint(None, "in_pel"), Endpoint("line_buffer", "pel"), 16),
        Channel(Endpoint("line_buffer", "win"), Endpoint("gradient", "win"), 4),
        Channel(Endpoint("gradient", "pel"), Endpoint(None, "out_pel"), 16),
    )
    ports = (Port("in_size", IN, width), Port("in_pel", IN, width), Port("out_pel", OUT, width))
    return DataflowNetwork("roberts", actors, chans, ports)


def sobel_network(width: int = 32) -> DataflowNetwork:
    """Sibling of :func:`roberts_network` sharing its line buffer."""
    actors = (
        Actor("line_buffer", "line_buffer",
              (Port("size", IN, width), Port("pel", IN, width), Port("win", OUT, width))),
        Actor("gradient", "sobel_grad", (Port("win", IN, width), Port("pel", OUT, width))),
    )
    chans = (
        Channel(Endpoint(None, "in_size"), Endpoint("line_buffer", "size"), 2),
        Channel(Endpoint(None, "in_pel"), Endpoint("line_buffer", "pel"), 16),
        Channel(Endpoint("line_buffer", "win"), Endpoint("gradient", "win"), 4),
        Channel(Endpoint("gradient", "pel"), Endpoint(None, "out_pel"), 16),
    )
    ports = (Port("in_size", IN, width), Port("in_pel", IN, width), Port("out_pel", OUT, width))
    return DataflowNetwork("sobel", actors, chans, ports)


# ---------------------------------------------------------------------------
# random input sets


@dataclass(frozen=True)
class ComponentShape:
    n_in: int
    n_out: int
    width: int
    kind: str = ATOMIC

    def ports(self):
        ins = tuple(Port(f"i{k}", IN, self.width) for k in range(self.n_in))
        outs = tuple(Port(f"o{k}", OUT, self.width) for k in range(self.n_out))
        return ins + outs


def _shape(rng: random.Random) -> ComponentShape:
    return ComponentShape(rng.choice((1, 1, 2, 2, 3)), rng.choice((1, 1, 1, 2)), rng.choice((8, 16)))


def random_network(rng: random.Random, name: str, n_actors: int, shared: dict,
                   shared_ratio: float, open_prob: float = 0.05) -> DataflowNetwork:
    """One random flat network.

    Each actor draws its component from ``shared`` (type -> shape, common to
    the whole input set) with probability ``shared_ratio``, else from a
    private type. Outputs and inputs of equal width are wired at random;
    leftovers become boundary ports, or are marked open.
    """
    actors = []
    shared_types = sorted(shared)
    for i in range(n_actors):
        if shared_types and rng.random() < shared_ratio:
            comp = rng.choice(shared_types)
            shape = shared[comp]
        elif rng.random() < 0.1:
            w = rng.choice((8, 16))
            comp, shape = f"fanout2_{w}", ComponentShape(1, 2, w, FANOUT)
        else:
            comp, shape = f"{name}_t{i}", _shape(rng)
        actors.append(Actor(f"x{i}", comp, shape.ports(), shape.kind))

    sources, sinks = {}, {}
    for a in actors:
        for p in a.ports:
            (sinks if p.direction == IN else sources).setdefault(p.width, []).append(
                Endpoint(a.name, p.name))
    channels = []
    ports = []
    opened = set()
    counters = {}
    for w in sorted(set(sources) | set(sinks)):
        src = list(sources.get(w, []))
        dst = list(sinks.get(w, []))
        rng.shuffle(src)
        rng.shuffle(dst)
        while src and dst:
            channels.append(Channel(src.pop(), dst.pop(), rng.choice((0, 1, 1, 2, 4))))
        for ep in dst:
            if rng.random() < open_prob:
                opened.add(ep)
                continue
            k = counters.get(("in", w), 0)
            counters[("in", w)] = k + 1
            pname = f"in{w}_{k}"
            ports.append(Port(pname, IN, w))
            channels.append(Channel(Endpoint(None, pname), ep, rng.choice((1, 2))))
        for ep in src:
            if rng.random() < open_prob:
                opened.add(ep)
                continue
            k = counters.get(("out", w), 0)
            counters[("out", w)] = k + 1
            pname = f"out{w}_{k}"
            ports.append(Port(pname, OUT, w))
            channels.append(Channel(ep, Endpoint(None, pname), rng.choice((1, 2))))
    if opened:
        actors = [Actor(a.name, a.component,
                        tuple(Port(p.name, p.direction, p.width, Endpoint(a.name, p.name) in opened)
                              for p in a.ports), a.kind) for a in actors]
    return check(DataflowNetwork(name, tuple(actors), tuple(channels), tuple(ports)))


def random_input_set(rng: random.Random, n_nets: int, min_actors: int = 3, max_actors: int = 30,
                     shared_ratio: float = 0.5, n_shared_types: int = 6):
    shared = {f"s{k}": _shape(rng) for k in range(n_shared_types)}
    return [random_network(rng, f"n{i}", rng.randint(min_actors, max_actors), shared, shared_ratio)
            for i in range(n_nets)]


def wrap_hierarchy(rng: random.Random, net: DataflowNetwork, name: str = "h") -> DataflowNetwork:
    """Move a random actor of ``net`` into a one-actor hierarchical wrapper."""
    if not net.actors:
        return net
    inner = rng.choice(sorted(net.actors, key=lambda a: a.name))
    sub_ports = tuple(Port(p.name, p.direction, p.width) for p in inner.ports if not p.open)
    sub_chans = []
    for p in inner.ports:
        if p.open:
            continue
        if p.direction == IN:
            sub_chans.append(Channel(Endpoint(None, p.name), Endpoint(inner.name, p.name), 0))
        else:
            sub_chans.append(Channel(Endpoint(inner.name, p.name), Endpoint(None, p.name), 0))
    sub = DataflowNetwork(f"{name}_net", (inner,), tuple(sub_chans), sub_ports)
    wrapper = Actor(name, f"{name}_hier", sub_ports, HIERARCHICAL, sub)
    actors = tuple(wrapper if a.name == inner.name else a for a in net.actors)
    chans = tuple(
        Channel(Endpoint(name, c.src.port) if c.src.actor == inner.name else c.src,
                Endpoint(name, c.dst.port) if c.dst.actor == inner.name else c.dst, c.depth)
        for c in net.channels)
    return DataflowNetwork(net.name, actors, chans, net.ports)
