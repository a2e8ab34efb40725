import random
from itertools import permutations

import pytest
from hypothesis import given, strategies as st

from cgrflow.formats import dumps_json, mdf_to_dict
from cgrflow.ir import SBOX1X2, SBOX2X1, Channel, Endpoint, flatten
from cgrflow.merge import (CANONICAL, HEURISTIC, MOREANO, MergeError, MergePolicy,
                           build_moreano_mapping, merge_all, merge_steps, place_fifos)
from cgrflow.multiflow import configuration_table
from cgrflow.profiler import longest_sbox_cascade
from cgrflow.samples import cascade_networks, chain, random_input_set, unary
from cgrflow.verify import extract_configuration, isomorphic_labeled, selector_sensitivity, verify_merge


def real_actors(m):
    return sorted(a.name for a in m.base.actors if not a.is_sbox)


# --- examples


def test_single_network_is_identity():
    net = chain("only", [unary("A", "A"), unary("B", "B")])
    m, ctab = merge_all([net])
    assert m.configs == ("only",)
    assert not m.base.sboxes
    assert list(ctab.rows) == ["only"]
    assert verify_merge(m, ctab, [net]) == []


def test_single_actor_pair_shares_without_sboxes():
    a = chain("a", [unary("X", "X")])
    b = chain("b", [unary("X", "X")])
    m, ctab = merge_all([a, b])
    assert real_actors(m) == ["X"]
    assert not m.base.sboxes


def test_stepwise_counts(stepwise_flat):
    steps = merge_steps(stepwise_flat)
    assert len(steps[0].base.sboxes) == 2
    assert len(steps[1].base.sboxes) == 3
    m, ctab = merge_all(stepwise_flat)
    assert len(ctab.rows) == 3
    assert len(ctab.sboxes) == 3
    # alpha and gamma share A and C, beta shares only C
    assert m.actor_prov["A"] == {0, 1}
    assert m.actor_prov["C"] == {0, 1, 2}
    assert verify_merge(m, ctab, stepwise_flat) == []


def test_identical_networks_need_no_sboxes(stepwise_flat):
    alpha = stepwise_flat[0]
    twin = alpha.with_(name="twin")
    m, ctab = merge_all([alpha, twin])
    assert not m.base.sboxes
    assert real_actors(m) == sorted(a.name for a in alpha.actors)
    e0 = extract_configuration(m, ctab, 0)
    e1 = extract_configuration(m, ctab, 1)
    assert isomorphic_labeled(e0, e1)[0]


def test_fork_inserts_sbox1x2():
    a = chain("a", [unary("A", "A"), unary("B", "B")])
    b = chain("b", [unary("A", "A"), unary("C", "C")])
    m, ctab = merge_all([a, b])
    sb = m.base.actor("sbox_0")
    assert sb.kind == SBOX1X2
    assert Channel(Endpoint("A", "y"), Endpoint("sbox_0", "in"), 0) in m.base.channels
    assert [ctab.bit(c, "sbox_0") for c in (0, 1)] == [0, 1]
    got0 = extract_configuration(m, ctab, 0)
    assert {c.dst.actor for c in got0.channels if c.src.actor == "A"} == {"B"}
    got1 = extract_configuration(m, ctab, 1)
    assert {c.dst.actor for c in got1.channels if c.src.actor == "A"} == {"C"}


def test_join_inserts_sbox2x1():
    a = chain("a", [unary("B", "B"), unary("A", "A")])
    b = chain("b", [unary("C", "C"), unary("A", "A")])
    m, ctab = merge_all([a, b])
    into_a = [c for c in m.base.channels if c.dst == Endpoint("A", "a")]
    assert len(into_a) == 1
    assert m.base.actor(into_a[0].src.actor).kind == SBOX2X1
    assert verify_merge(m, ctab, [a, b]) == []


def test_unflattened_input_rejected(stepwise_flat):
    from cgrflow.samples import stepwise_networks
    with pytest.raises(MergeError):
        merge_all([stepwise_flat[0], stepwise_networks()[1]])


def test_port_conflict_rejected():
    a = chain("a", [unary("A", "A")], width=16)
    b = chain("b", [unary("B", "B", width=8)], width=8)
    with pytest.raises(MergeError, match="conflicts"):
        merge_all([a, b])


def test_canonical_order_sorts_by_name(stepwise_flat):
    m, _ = merge_all(stepwise_flat, MergePolicy(order=CANONICAL))
    assert m.configs == ("alpha", "beta", "gamma")


# --- Moreano mapping


def test_moreano_disjoint_types_empty():
    a = chain("a", [unary("A", "A")], src="p", dst="q")
    b = chain("b", [unary("B", "B")], src="r", dst="s")
    corr = build_moreano_mapping(a, b)
    assert corr.vertices == {} and corr.edges == [] and corr.score == 0


def test_moreano_identical_graphs_full_score(stepwise_flat):
    alpha = stepwise_flat[0]
    corr = build_moreano_mapping(alpha, alpha)
    assert corr.vertices == {a.name: a.name for a in alpha.actors}
    assert corr.score == len(alpha.actors) + len(alpha.channels)


def _exhaustive_best(a, b):
    """Best vertex-plus-edge score over every injective type-consistent map."""
    an = sorted(x.name for x in a.actors)
    bn = sorted(x.name for x in b.actors)
    sig_a = {x.name: x.signature() for x in a.actors}
    sig_b = {x.name: x.signature() for x in b.actors}
    b_edges = {(c.src, c.dst) for c in b.channels}
    best = 0
    slots = bn + [None] * len(an)
    for img in set(permutations(slots, len(an))):
        mp = {x: y for x, y in zip(an, img) if y is not None}
        if any(sig_a[x] != sig_b[y] for x, y in mp.items()):
            continue

        def lift(ep):
            if ep.actor is None:
                return ep
            y = mp.get(ep.actor)
            return None if y is None else Endpoint(y, ep.port)
        score = len(mp)
        for c in a.channels:
            s, d = lift(c.src), lift(c.dst)
            if s is not None and d is not None and (s, d) in b_edges:
                score += 1
        best = max(best, score)
    return best


def test_moreano_shared_middle_segment():
    a = chain("a", [unary("X", "X"), unary("M1", "M1"), unary("M2", "M2"), unary("Y", "Y")])
    b = chain("b", [unary("P", "P"), unary("M1", "M1"), unary("M2", "M2"), unary("Q", "Q")])
    corr = build_moreano_mapping(a, b)
    assert corr.vertices == {"M1": "M1", "M2": "M2"}
    assert corr.score == 3
    assert corr.score == _exhaustive_best(a, b)


@given(st.integers(0, 10**6))
def test_moreano_greedy_vs_exhaustive(seed):
    rng = random.Random(seed)
    a, b = random_input_set(rng, 2, 2, 5, shared_ratio=0.8, n_shared_types=2)
    corr = build_moreano_mapping(a, b)
    best = _exhaustive_best(a, b)
    assert corr.score <= best
    # the mapping is injective and type-consistent
    assert len(set(corr.vertices.values())) == len(corr.vertices)
    for x, y in corr.vertices.items():
        assert a.actor(x).signature() == b.actor(y).signature()


# --- FIFO placement


def test_fifo_fork_legs_inherit_depth():
    a = chain("a", [unary("A", "A"), unary("B", "B")], depth=4)
    b = chain("b", [unary("A", "A"), unary("C", "C")], depth=4)
    m, _ = merge_all([a, b])
    ch = {c.key: c.depth for c in m.base.channels}
    assert ch["A.y->sbox_0.in"] == 0
    assert ch["sbox_0.out0->B.a"] == 4
    assert ch["sbox_0.out1->C.a"] == 4


def test_fifo_join_keeps_upstream_depths():
    a = chain("a", [unary("B", "B"), unary("A", "A")], depth=2)
    b = chain("b", [unary("C", "C"), unary("A", "A")], depth=8)
    m, _ = merge_all([a, b])
    ch = {c.key: c.depth for c in m.base.channels}
    join = next(x.name for x in m.base.sboxes if x.kind == SBOX2X1)
    assert ch[f"B.y->{join}.in0"] == 2
    assert ch[f"C.y->{join}.in1"] == 8
    assert ch[f"{join}.out->A.a"] == 0


def test_fifo_placement_idempotent_without_sboxes():
    net = chain("n", [unary("A", "A")], depth=3)
    m, _ = merge_all([net])
    assert place_fifos(m) is m


# --- properties


def _input_sets(draw_seed, n_min=2, n_max=4):
    rng = random.Random(draw_seed)
    n = rng.randint(n_min, n_max)
    ratio = rng.choice((0.0, 0.3, 0.6, 1.0))
    return [flatten(x) for x in random_input_set(rng, n, 3, 14, shared_ratio=ratio)]


@pytest.mark.parametrize("algorithm", [HEURISTIC, MOREANO])
@given(seed=st.integers(0, 10**9))
def test_oracle_equivalence(algorithm, seed):
    nets = _input_sets(seed)
    m, ctab = merge_all(nets, MergePolicy(algorithm=algorithm))
    assert verify_merge(m, ctab, nets) == []


@given(seed=st.integers(0, 10**9))
def test_monotone_sharing(seed):
    nets = _input_sets(seed)
    m, _ = merge_all(nets)
    n = len(real_actors(m))
    assert n <= sum(len(x.actors) for x in nets)
    assert n >= max(len(x.actors) for x in nets)


def _directional_depths(m):
    """Longest run of joins feeding an actor input and of forks leaving an
    actor output, ignoring buffer depths."""
    net = m.base
    into = {c.dst: c.src for c in net.channels}
    out_of = {}
    for c in net.channels:
        out_of.setdefault(c.src, []).append(c.dst)

    def joins(ep):
        src = into.get(ep)
        if src is None or src.actor is None or net.actor(src.actor).kind != SBOX2X1:
            return 0
        return 1 + max(joins(Endpoint(src.actor, p)) for p in ("in0", "in1"))

    def forks(ep):
        best = 0
        for d in out_of.get(ep, ()):
            if d.actor is not None and net.actor(d.actor).kind == SBOX1X2:
                best = max(best, 1 + max(forks(Endpoint(d.actor, p)) for p in ("out0", "out1")))
        return best

    j = f = 0
    for a in net.actors:
        if a.is_sbox:
            continue
        j = max([j] + [joins(Endpoint(a.name, p.name)) for p in a.inputs])
        f = max([f] + [forks(Endpoint(a.name, p.name)) for p in a.outputs])
    return j, f


@given(seed=st.integers(0, 10**9))
def test_cascade_bound_per_direction(seed):
    nets = _input_sets(seed, 2, 5)
    m, _ = merge_all(nets)
    j, f = _directional_depths(m)
    assert j <= len(nets) - 1
    assert f <= len(nets) - 1
    # a fork run followed by a join run is still bounded by both together
    assert longest_sbox_cascade(m) <= 2 * (len(nets) - 1)


@pytest.mark.parametrize("n", range(2, 7))
def test_cascade_worst_case(n):
    m, _ = merge_all(cascade_networks(n))
    assert longest_sbox_cascade(m) == n - 1


@given(seed=st.integers(0, 10**9))
def test_ctab_complete(seed):
    nets = _input_sets(seed)
    m, ctab = merge_all(nets)
    assert ctab.validate() == []
    for row in ctab.rows.values():
        assert set(row.selectors) == set(m.sbox_names)
    assert ctab == configuration_table(m)


def test_selector_bits_load_bearing_stepwise(stepwise_merged, stepwise_flat):
    m, ctab = stepwise_merged
    rep = selector_sensitivity(m, ctab, stepwise_flat)
    assert rep.checked > 0
    assert rep.ok, rep.insensitive


def test_selector_bits_load_bearing_small_random():
    rng = random.Random(7)
    checked = 0
    for _ in range(40):
        nets = [flatten(x) for x in random_input_set(rng, rng.randint(2, 3), 3, 8, shared_ratio=0.7)]
        m, ctab = merge_all(nets)
        if len(m.sbox_names) > 16:
            continue
        rep = selector_sensitivity(m, ctab, nets)
        checked += rep.checked
        assert rep.ok, rep.insensitive
    assert checked > 0


def test_sbox_naming_follows_insertion(stepwise_merged):
    m, _ = stepwise_merged
    assert m.sbox_names == [f"sbox_{k}" for k in range(len(m.sbox_names))]


@given(seed=st.integers(0, 10**9))
def test_merge_deterministic(seed):
    nets = _input_sets(seed)
    one = dumps_json(mdf_to_dict(merge_all(nets)[0]))
    two = dumps_json(mdf_to_dict(merge_all(list(nets))[0]))
    assert one == two
