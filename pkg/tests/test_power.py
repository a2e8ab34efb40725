import random
from itertools import combinations

import pytest
from hypothesis import given, strategies as st

from cgrflow.ir import FANOUT, flatten
from cgrflow.merge import merge_all
from cgrflow.power import (ASIC, CLOCK, FPGA, POWER, LogicRegionPartition, PowerError, Region,
                           configs_of_condition, element_signatures, emit_power_intent, identify_logic_regions,
                           merge_waste, parse_power_intent, plan_clock_gating, reduce_regions)
from cgrflow.samples import chain, random_input_set, unary


@pytest.fixture(scope="module")
def two_config():
    a = chain("a", [unary("A", "A"), unary("B", "B")])
    b = chain("b", [unary("A", "A"), unary("C", "C")])
    return merge_all([a, b])


def eligible(m, mode):
    return {a.name for a in m.base.actors if mode == POWER or not a.is_sbox}


def check_partition(m, p, mode, homogeneous=True):
    seen = set()
    for r in p.all_regions:
        assert not (seen & set(r.members))
        seen |= set(r.members)
    assert seen == eligible(m, mode)
    sigs = element_signatures(m, mode)
    for r in p.all_regions:
        if homogeneous:
            assert {sigs[e] for e in r.members} == {r.signature}
        # safety: active implies enabled
        for e in r.members:
            for c, bit in enumerate(sigs[e]):
                if bit == "1":
                    assert r.signature[c] == "1"


# --- regions


def test_two_config_regions(two_config):
    m, ctab = two_config
    p = identify_logic_regions(m, ctab, CLOCK)
    assert p.always_on.members == ("A",)
    assert {r.signature: r.members for r in p.regions} == {"10": ("B",), "01": ("C",)}
    check_partition(m, p, CLOCK)


def test_single_config_one_region():
    m, ctab = merge_all([chain("x", [unary("A", "A"), unary("B", "B")])])
    p = identify_logic_regions(m, ctab)
    assert p.regions == ()
    assert p.always_on.signature == "1"
    assert set(p.always_on.members) == {"A", "B"}


def test_stepwise_signatures(stepwise_merged):
    m, ctab = stepwise_merged
    p = identify_logic_regions(m, ctab)
    sigs = element_signatures(m, CLOCK)
    assert sigs["C"] == "111"
    assert sigs["A"] == "110"
    tally = {}
    for a in m.base.actors:
        if a.is_sbox:
            continue
        key = "".join("1" if c in m.actor_prov[a.name] else "0" for c in range(3))
        tally.setdefault(key, set()).add(a.name)
    assert len(p.all_regions) == len(tally)
    assert {r.signature: set(r.members) for r in p.all_regions} == tally


def test_power_mode_includes_sboxes(stepwise_merged):
    m, ctab = stepwise_merged
    p = identify_logic_regions(m, ctab, POWER)
    members = [e for r in p.all_regions for e in r.members]
    for s in m.sbox_names:
        assert members.count(s) == 1
    clock = identify_logic_regions(m, ctab, CLOCK)
    assert not any(s in r.members for r in clock.all_regions for s in m.sbox_names)


def test_fanout_follows_driver():
    rng = random.Random(0)
    for _ in range(50):
        nets = [flatten(x) for x in random_input_set(rng, 3, 5, 15, 0.7)]
        m, _ = merge_all(nets)
        fan = [a for a in m.base.actors if a.kind == FANOUT]
        if not fan:
            continue
        sigs = element_signatures(m, CLOCK)
        for a in fan:
            feeders = [c for c in m.base.channels if c.dst.actor == a.name]
            prov = set().union(*(m.channel_prov[c.key] for c in feeders)) if feeders else set()
            if prov:
                assert sigs[a.name] == "".join("1" if c in prov else "0" for c in range(m.n_configs))
        return
    pytest.skip("no fanout actor generated")


def test_unknown_mode(two_config):
    with pytest.raises(ValueError):
        identify_logic_regions(two_config[0], two_config[1], "nap")


# --- reduction


def _partition(sigs_members, n):
    regions = tuple(Region(i + 1, tuple(mem), sig) for i, (sig, mem) in enumerate(sigs_members))
    return LogicRegionPartition(regions, None, CLOCK, tuple(f"c{i}" for i in range(n)))


def test_reduce_noop_under_budget(two_config):
    p = identify_logic_regions(*two_config)
    assert reduce_regions(p, 2) is p
    assert reduce_regions(p, 5) is p


def test_reduce_three_to_two_picks_least_waste():
    p = _partition([("1100", ["a"]), ("1000", ["b"]), ("0011", ["c"])], 4)
    q = reduce_regions(p, 2)
    assert len(q.regions) == 2
    assert {r.signature for r in q.regions} == {"1100", "0011"}
    # exhaustive pairing: the chosen pair has minimum waste
    wastes = {(i, j): merge_waste(p.regions[i], p.regions[j]) for i, j in combinations(range(3), 2)}
    assert wastes[(0, 1)] == min(wastes.values())


def test_reduce_to_one_ors_everything():
    p = _partition([("100", ["a"]), ("010", ["b"]), ("001", ["c", "d"])], 3)
    q = reduce_regions(p, 1)
    assert len(q.regions) == 1
    assert q.regions[0].signature == "111"
    assert q.regions[0].members == ("a", "b", "c", "d")


def test_reduce_rejects_zero_budget(two_config):
    with pytest.raises(ValueError):
        reduce_regions(identify_logic_regions(*two_config), 0)


@given(st.integers(0, 10**9))
def test_region_invariants_random(seed):
    rng = random.Random(seed)
    nets = [flatten(x) for x in random_input_set(rng, rng.randint(2, 4), 3, 15, rng.random())]
    m, ctab = merge_all(nets)
    for mode in (CLOCK, POWER):
        p = identify_logic_regions(m, ctab, mode)
        check_partition(m, p, mode)
        sigs = {r.signature for r in p.all_regions}
        assert len(sigs) == len(p.all_regions)
        for budget in range(1, len(p.regions) + 1):
            q = reduce_regions(p, budget)
            assert len(q.regions) <= budget
            assert len(q.regions) <= len(p.regions)
            assert q.always_on == p.always_on
            check_partition(m, q, mode, homogeneous=False)


# --- clock gating


def test_gating_asic(two_config):
    p = identify_logic_regions(*two_config)
    plan = plan_clock_gating(p, ASIC)
    assert [c.cell for c in plan.cells] == ["AND", "AND"]
    assert plan.ungated == ("A",)
    enables = {c.members: c.enable for c in plan.cells}
    assert enables == {("B",): "cfg_sel_0", ("C",): "cfg_sel_1"}
    assert plan.clock_of("A") is None
    assert plan.clock_of("B") == "gclk_lr1"


def test_gating_fpga_budget(two_config):
    p = identify_logic_regions(*two_config)
    plan = plan_clock_gating(p, FPGA, budget=32)
    assert [c.cell for c in plan.cells] == ["BUFGCE", "BUFGCE"]
    with pytest.raises(PowerError, match="budget"):
        plan_clock_gating(p, FPGA, budget=1)
    one = plan_clock_gating(reduce_regions(p, 1), FPGA, budget=1)
    assert len(one.cells) == 1
    assert one.cells[0].enable == "cfg_sel_0 | cfg_sel_1"


def test_gating_needs_clock_mode(two_config):
    p = identify_logic_regions(*two_config, mode=POWER)
    with pytest.raises(PowerError):
        plan_clock_gating(p)


# --- power intent


def test_power_intent_two_config(two_config):
    m, ctab = two_config
    p = identify_logic_regions(m, ctab, POWER)
    text = emit_power_intent(p, m)
    doc = parse_power_intent(text)
    doms = doc["domains"]
    assert len(doms) == 3
    assert doms["PD_AON"].default
    switchable = [d for d in doms.values() if not d.default]
    assert len(switchable) == 2
    offs = [configs_of_condition(d.shutoff) for d in switchable]
    # shut-off conditions name complementary configurations
    assert offs[0] | offs[1] == {0, 1} and not offs[0] & offs[1]
    assert set(doms["PD_AON"].instances) == set(p.always_on.members)
    assert text == emit_power_intent(p, m)


def test_power_intent_single_region():
    m, ctab = merge_all([chain("x", [unary("A", "A")])])
    p = identify_logic_regions(m, ctab, POWER)
    doms = parse_power_intent(emit_power_intent(p, m))["domains"]
    assert list(doms) == ["PD_AON"]


def test_power_intent_sboxes_once(stepwise_merged):
    m, ctab = stepwise_merged
    p = identify_logic_regions(m, ctab, POWER)
    doms = parse_power_intent(emit_power_intent(p, m))["domains"]
    inst = [i for d in doms.values() for i in d.instances]
    for s in m.sbox_names:
        assert inst.count(s) == 1


def test_power_intent_needs_power_mode(two_config):
    p = identify_logic_regions(*two_config)
    with pytest.raises(PowerError):
        emit_power_intent(p, two_config[0])


@given(st.integers(0, 10**9))
def test_power_intent_roundtrip(seed):
    rng = random.Random(seed)
    nets = [flatten(x) for x in random_input_set(rng, rng.randint(2, 4), 3, 12, rng.random())]
    m, ctab = merge_all(nets)
    p = identify_logic_regions(m, ctab, POWER)
    doc = parse_power_intent(emit_power_intent(p, m))
    assert doc["design"] == m.base.name
    for r in p.regions:
        d = doc["domains"][f"PD_LR{r.rid}"]
        assert d.instances == r.members
        assert configs_of_condition(d.shutoff) == set(r.active_configs())
