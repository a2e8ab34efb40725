import random
from fractions import Fraction

import mpmath
import networkx as nx
import pytest
from hypothesis import given, strategies as st

from cgrflow.ir import SBOX1X2, SBOX2X1, Channel, Endpoint, flatten, make_network, make_sbox
from cgrflow.merge import merge_all
from cgrflow.profiler import (ComponentAnnotation, Cost, ProfilerError, TechnologyModel,
                              cost_area, cost_critical_path, cost_power, explore, format_table,
                              longest_sbox_cascade, network_cp, partition_key, set_partitions)
from cgrflow.samples import cascade_networks, chain, random_input_set, unary

BELL = [1, 1, 2, 5, 15, 52, 203]


def unit_ann(components, area=1.0, ps=0.5, pd=0.25, cp=2.0):
    return ComponentAnnotation({c: Cost(area, ps, pd, cp) for c in components})


def components_of(nets, widths=(8, 16, 32)):
    comps = {a.component for n in nets for a in n.actors}
    for w in widths:
        comps |= {f"sbox1x2_{w}", f"sbox2x1_{w}"}
    return comps


def random_ann(rng, components):
    return ComponentAnnotation({
        c: Cost(rng.uniform(0, 500), rng.uniform(0, 5), rng.uniform(0, 20), rng.uniform(0.5, 9))
        for c in sorted(components)})


TECH = TechnologyModel({8: (0.07, 0.04), 16: (0.09, 0.05), 32: (0.11, 0.06)})


# --- oracles


def resum(values) -> float:
    """Exact rational sum rounded once."""
    return float(sum((Fraction(v) for v in values), Fraction(0)))


def cascade_oracle(net) -> int:
    g = nx.DiGraph()
    for a in net.sboxes:
        g.add_node(a.name)
    for c in net.channels:
        if c.depth == 0 and g.has_node(c.src.actor or "") and g.has_node(c.dst.actor or ""):
            g.add_edge(c.src.actor, c.dst.actor)
    if not g.nodes:
        return 0
    return len(nx.dag_longest_path(g))


def cp_oracle(cps, n_s, f, g) -> float:
    seq = 0 if n_s == 0 else f * mpmath.log(n_s) + g
    return float(max(max(cps), seq))


# --- cost examples


def test_area_direct_sum():
    net = chain("n", [unary("a", "ta"), unary("b", "tb"), unary("c", "tc")])
    ann = ComponentAnnotation({"ta": Cost(3, 0, 0, 1), "tb": Cost(5, 0, 0, 1), "tc": Cost(7, 0, 0, 1)})
    assert cost_area(net, ann) == 15


def test_empty_network_costs_zero():
    empty = make_network("e")
    ann = ComponentAnnotation({})
    assert cost_area(empty, ann) == 0
    p = cost_power(empty, ann)
    assert (p.static, p.dynamic, p.total) == (0, 0, 0)


def test_power_split():
    net = chain("n", [unary("a", "ta"), unary("b", "tb")])
    ann = ComponentAnnotation({"ta": Cost(0, 1, 2, 1), "tb": Cost(0, 3, 4, 1)})
    p = cost_power(net, ann)
    assert (p.total, p.static, p.dynamic) == (10, 4, 6)


def test_stepwise_unit_area(stepwise_merged):
    m, _ = stepwise_merged
    ann = unit_ann(components_of([m.base]))
    n_real = sum(1 for a in m.base.actors if not a.is_sbox)
    assert cost_area(m, ann) == n_real + 3


def test_missing_annotation_named():
    net = chain("n", [unary("a", "mystery")])
    with pytest.raises(ProfilerError, match="mystery"):
        cost_area(net, ComponentAnnotation({}))


def test_negative_annotation_rejected():
    with pytest.raises(ProfilerError):
        ComponentAnnotation({"x": Cost(-1, 0, 0, 0)})


def test_random_ten_actor_network_matches_resum():
    rng = random.Random(3)
    (net,) = random_input_set(rng, 1, 10, 10)
    ann = random_ann(rng, components_of([net]))
    p = cost_power(net, ann)
    assert p.static == resum(ann[a.component].power_static for a in net.actors)
    assert p.dynamic == resum(ann[a.component].power_dynamic for a in net.actors)


@given(st.integers(0, 10**9))
def test_costs_exact_against_resum(seed):
    rng = random.Random(seed)
    nets = [flatten(x) for x in random_input_set(rng, rng.randint(1, 3), 3, 20, rng.random())]
    m, _ = merge_all(nets)
    ann = random_ann(rng, components_of(nets))
    assert cost_area(m, ann) == resum(ann[a.component].area for a in m.base.actors)
    p = cost_power(m, ann)
    assert p.static == resum(ann[a.component].power_static for a in m.base.actors)
    assert p.dynamic == resum(ann[a.component].power_dynamic for a in m.base.actors)


# --- cascade


def test_no_sboxes_cascade_zero():
    assert longest_sbox_cascade(chain("n", [unary("a", "a")])) == 0


@pytest.mark.parametrize("n", range(2, 7))
def test_worst_case_cascade(n):
    m, _ = merge_all(cascade_networks(n))
    assert longest_sbox_cascade(m) == n - 1 == cascade_oracle(m.base)


def test_sbox_diamond():
    w = 16
    f = make_sbox("f", SBOX1X2, w)
    x = make_sbox("x", SBOX1X2, w)
    j = make_sbox("j", SBOX2X1, w)
    sink = unary("sink", "sink", w)
    chans = [
        Channel(Endpoint("f", "out0"), Endpoint("j", "in0"), 0),
        Channel(Endpoint("f", "out1"), Endpoint("x", "in"), 0),
        Channel(Endpoint("x", "out0"), Endpoint("j", "in1"), 0),
        Channel(Endpoint("j", "out"), Endpoint("sink", "a"), 0),
    ]
    net = make_network("d", [f, x, j, sink], chans)
    n, path = longest_sbox_cascade(net, with_path=True)
    assert n == 3 == cascade_oracle(net)
    assert path == ["f", "x", "j"]


def test_buffered_channel_breaks_cascade():
    a = make_sbox("a", SBOX1X2, 16)
    b = make_sbox("b", SBOX2X1, 16)
    net = make_network("d", [a, b], [Channel(Endpoint("a", "out0"), Endpoint("b", "in0"), 2)])
    assert longest_sbox_cascade(net) == 1


@given(st.integers(0, 10**9))
def test_cascade_matches_graph_oracle(seed):
    rng = random.Random(seed)
    nets = [flatten(x) for x in random_input_set(rng, rng.randint(2, 4), 3, 15, rng.random())]
    m, _ = merge_all(nets)
    assert longest_sbox_cascade(m) == cascade_oracle(m.base)


# --- critical path


def _cascade_of(n):
    # n networks sharing one actor; n = 0 gives a lone unmerged network
    return merge_all(cascade_networks(max(n, 1)))[0]


def test_cp_single_sbox_uses_g_only():
    m = _cascade_of(2)
    t = cost_critical_path(m, [0.5], TechnologyModel({16: (1.0, 2.0)}))
    assert t.n_s == 1
    assert t.cp_seq_sb == 2.0
    assert t.cp == 2.0


def test_cp_static_only():
    m = _cascade_of(0)
    t = cost_critical_path(m, [4.0, 6.5], TECH)
    assert t.n_s == 0 and t.cp_seq_sb == 0
    assert t.cp == 6.5
    assert t.freq_mhz == pytest.approx(153.846, abs=1e-3)


def test_cp_cascade_dominates():
    m = _cascade_of(6)
    t = cost_critical_path(m, [2.0], TechnologyModel({16: (0.8, 1.5)}))
    assert t.n_s == 5
    assert t.cp == pytest.approx(2.7875503, abs=1e-6)
    assert abs(t.cp - cp_oracle([2.0], 5, 0.8, 1.5)) <= 1e-12 * t.cp


def test_cp_missing_width():
    m = _cascade_of(3)
    with pytest.raises(ProfilerError, match="16"):
        cost_critical_path(m, [1.0], TechnologyModel({32: (1, 1)}))


@given(st.integers(0, 10**9))
def test_cp_rule(seed):
    rng = random.Random(seed)
    nets = [flatten(x) for x in random_input_set(rng, rng.randint(1, 4), 3, 15, rng.random())]
    m, _ = merge_all(nets)
    ann = random_ann(rng, components_of(nets))
    cps = [network_cp(n, ann) for n in nets]
    t = cost_critical_path(m, cps, TECH)
    assert t.cp >= t.cp_static and t.cp >= t.cp_seq_sb
    assert t.cp in (t.cp_static, t.cp_seq_sb)
    n_s = cascade_oracle(m.base)
    assert t.n_s == n_s
    if n_s:
        # SBox channels never change width, so each cascade has one width
        widths = [w for w in TECH.rows if cascade_oracle(m.base.with_(actors=tuple(
            a for a in m.base.actors if not a.is_sbox or a.outputs[0].width == w))) == n_s]
        assert any(abs(t.cp - cp_oracle(cps, n_s, *TECH.rows[w])) <= 1e-12 * t.cp for w in widths)


# --- exploration


def _explore_inputs(n, rng):
    nets = [flatten(x) for x in random_input_set(rng, n, 3, 8, 0.6)]
    return nets, random_ann(rng, components_of(nets))


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_bell_counts_and_baseline(n):
    nets, ann = _explore_inputs(n, random.Random(n))
    cands = explore(nets, ann, TECH)
    assert len(cands) == BELL[n]
    base = [c for c in cands if c.is_baseline]
    assert len(base) == 1
    assert all(g.timing.n_s == 0 for g in base[0].groups)
    keys = [c.key for c in cands]
    assert len(set(keys)) == len(keys)


def test_single_network_costs():
    nets, ann = _explore_inputs(1, random.Random(11))
    (c,) = explore(nets, ann, TECH)
    assert c.area == cost_area(nets[0], ann)
    assert c.power == cost_power(nets[0], ann).total


def test_three_networks_recomputed_by_hand():
    rng = random.Random(5)
    nets, ann = _explore_inputs(3, rng)
    cands = explore(nets, ann, TECH)
    by_name = {n.name: n for n in nets}
    for c in cands:
        # groups and partition agree, every network appears once
        flat = sorted(x for g in c.partition for x in g)
        assert flat == sorted(by_name)
        area = resum(g.area for g in c.groups)
        assert c.area == area
        assert c.freq_mhz == min(g.timing.freq_mhz for g in c.groups)
        for g in c.groups:
            m, _ = merge_all([by_name[x] for x in g.members])
            assert g.area == cost_area(m, ann)


def test_sort_keys_and_pareto():
    nets, ann = _explore_inputs(3, random.Random(9))
    for key in ("area", "power", "freq"):
        cands = explore(nets, ann, TECH, sort_by=key)
        vals = [c.area if key == "area" else c.power if key == "power" else -c.freq_mhz
                for c in cands]
        assert vals == sorted(vals)
        assert any(c.pareto for c in cands)
        for c in cands:
            dominated = any(o.area <= c.area and o.power <= c.power and o.freq_mhz >= c.freq_mhz
                            and (o.area, o.power, o.freq_mhz) != (c.area, c.power, c.freq_mhz)
                            for o in cands)
            assert c.pareto == (not dominated)
    assert format_table(cands).count("\n") == len(cands) + 1


def test_enumeration_limit():
    nets = cascade_networks(7)
    ann = unit_ann(components_of(nets))
    with pytest.raises(ProfilerError, match="limit"):
        explore(nets, ann, TECH)
    with pytest.raises(ProfilerError, match="unique"):
        explore([nets[0], nets[0]], ann, TECH)


def test_parallel_workers_same_ranking():
    nets, ann = _explore_inputs(3, random.Random(4))
    one = [c.to_dict() for c in explore(nets, ann, TECH, workers=1)]
    two = [c.to_dict() for c in explore(nets, ann, TECH, workers=2)]
    assert one == two


@given(st.integers(0, 10**9), st.sampled_from([0.5, 2.0, 3.0, 10.0]))
def test_area_scaling(seed, k):
    rng = random.Random(seed)
    nets, ann = _explore_inputs(rng.randint(1, 3), rng)
    scaled = ComponentAnnotation({c: Cost(v.area * k, v.power_static, v.power_dynamic, v.cp)
                                  for c, v in ann.costs.items()})
    a = {c.key: c.area for c in explore(nets, ann, TECH)}
    b = {c.key: c.area for c in explore(nets, scaled, TECH)}
    assert set(a) == set(b)
    for key in a:
        assert b[key] == pytest.approx(a[key] * k, rel=1e-12)
    # scaling rounds, so exact ties may split by an ulp
    best_a = {key for key in a if a[key] == pytest.approx(min(a.values()), rel=1e-12)}
    best_b = {key for key in b if b[key] == pytest.approx(min(b.values()), rel=1e-12)}
    assert best_a == best_b


def test_set_partitions_bell():
    for n in range(7):
        parts = list(set_partitions(range(n)))
        assert len(parts) == BELL[n]
        assert len({partition_key([[str(x) for x in g] for g in p]) for p in parts}) == BELL[n]
