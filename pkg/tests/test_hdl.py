import random
import re

import pytest
from hypothesis import given, strategies as st

from cgrflow.formats import DEFAULT_PROTOCOL, ProtocolSpec, Signal, parse_protocol
from cgrflow.hdl import (FIFO_MODULE, LUT_MODULE, NetlistError, emit_lut_contents, emit_verilog,
                         parse_lut_contents, plan_netlist)
from cgrflow.ir import flatten
from cgrflow.merge import merge_all
from cgrflow.multiflow import ConfigRow, ConfigurationTable
from cgrflow.power import ASIC, FPGA, identify_logic_regions, plan_clock_gating
from cgrflow.samples import chain, random_input_set, unary
from cgrflow.verify import lint_netlist, parse_verilog, recover_adjacency

import golden_cases


def emit(m, ctab, protocol=DEFAULT_PROTOCOL, gating=None):
    return emit_verilog(plan_netlist(m, ctab, protocol, gating))


def expected_adjacency(m):
    return {(str(c.src), str(c.dst)): c.depth for c in m.base.channels}


# --- planning


def test_single_actor_no_lut():
    m, ctab = merge_all([chain("solo", [unary("A", "A")], depth=0)])
    plan = plan_netlist(m, ctab)
    assert [i.name for i in plan.instances] == ["A"]
    assert plan.lut is None
    files = emit_verilog(plan)
    assert f"{LUT_MODULE}.v" not in files
    assert lint_netlist(files) == []


def test_stepwise_lut_shape(stepwise_merged):
    m, ctab = stepwise_merged
    plan = plan_netlist(m, ctab)
    lut = plan.instance("lut")
    assert [p for p, _ in lut.bindings] == ["id", "sel_sbox_0", "sel_sbox_1", "sel_sbox_2"]
    assert next(p for p in plan.ports if p.name == "cfg_id").width == 2
    text = emit(m, ctab)[f"{LUT_MODULE}.v"]
    assert len(re.findall(r"\d+'d\d+: begin", text)) == 3


def test_depth_four_channel_gets_one_fifo():
    m, ctab = merge_all([chain("n", [unary("A", "A")], depth=0)])
    m4, ctab4 = merge_all([chain("n", [unary("A", "A")], depth=4)])
    assert not [i for i in plan_netlist(m, ctab).instances if i.module == FIFO_MODULE]
    fifos = [i for i in plan_netlist(m4, ctab4).instances if i.module == FIFO_MODULE]
    assert len(fifos) == 2
    assert all(dict(f.params)["DEPTH"] == 4 for f in fifos)


def test_wire_naming(edge_merged):
    plan = plan_netlist(*edge_merged)
    names = {w.name for w in plan.wires}
    for role in ("data", "valid", "ack", "full"):
        assert f"w_line_buffer_win_sbox_1_in_{role}" in names


def test_protocol_missing_strobe_rejected(edge_merged):
    bad = ProtocolSpec("nostrobe", (Signal("data", "{port}_data", "port", "forward"),), "clk", "rst")
    with pytest.raises(NetlistError, match="strobe"):
        plan_netlist(*edge_merged, bad)


def test_custom_protocol_xml(edge_merged):
    xml = """<protocol name="vr">
      <clock name="aclk"/><reset name="aresetn"/>
      <signal role="data" direction="forward" name="{port}_tdata" width="port"/>
      <signal role="valid" direction="forward" name="{port}_tvalid" width="1"/>
      <signal role="ready" direction="backward" name="{port}_tready" width="1"/>
    </protocol>"""
    proto = parse_protocol(xml)
    m, ctab = edge_merged
    files = emit(m, ctab, proto)
    assert "in_pel_tdata" in files["top.v"]
    assert lint_netlist(files) == []
    assert recover_adjacency(files, proto)["channels"] == expected_adjacency(m)


# --- lut


def test_lut_single_config_suppressed():
    t = ConfigurationTable({"only": ConfigRow(0, {})}, ())
    text = emit_lut_contents(t)
    assert "output" not in text
    assert parse_lut_contents(text) == {}


@given(st.integers(1, 9), st.integers(0, 12), st.integers(0, 10**9))
def test_lut_roundtrip(n, k, seed):
    rng = random.Random(seed)
    sboxes = tuple(f"sbox_{i}" for i in range(k))
    rows = {f"c{i}": ConfigRow(i, {s: rng.randint(0, 1) for s in sboxes}) for i in range(n)}
    t = ConfigurationTable(rows, sboxes)
    got = parse_lut_contents(emit_lut_contents(t))
    if n > 1 and k:
        assert got == {r.network_id: dict(r.selectors) for r in rows.values()}


# --- emission


def test_selectors_single_driver(stepwise_merged):
    m, ctab = stepwise_merged
    files = emit(m, ctab)
    top = next(mod for mod in parse_verilog(files["top.v"])[0] if mod.name == m.base.name)
    for s in m.sbox_names:
        drivers = [inst for mod, inst, _, b, _ in top.instances
                   for pin, netx in b if netx == [f"sel_{s}"] and mod == LUT_MODULE]
        assert drivers == ["lut"]
    assert lint_netlist(files) == []


def test_gating_asic_and_fpga(stepwise_merged):
    m, ctab = stepwise_merged
    p = identify_logic_regions(m, ctab)
    for target in (ASIC, FPGA):
        plan = plan_clock_gating(p, target)
        files = emit(m, ctab, gating=plan)
        assert lint_netlist(files) == []
        cell = "clock_gate_and" if target == ASIC else "BUFGCE"
        assert files["top.v"].count(f"    {cell} ") == len(plan.cells)
        # gated actors take the region clock
        for c in plan.cells:
            for a in c.members:
                inst = plan_netlist(m, ctab, gating=plan).instance(a)
                assert dict(inst.bindings)["clk"] == c.clock


def test_golden_files():
    got = golden_cases.hdl_files()
    want = {p.relative_to(golden_cases.GOLDEN / "hdl").as_posix(): p.read_text()
            for p in (golden_cases.GOLDEN / "hdl").rglob("*.v")}
    assert got == want


def test_emission_deterministic(edge_merged):
    assert emit(*edge_merged) == emit(*edge_merged)


def test_reverse_parse_edge(edge_merged):
    m, ctab = edge_merged
    rec = recover_adjacency(emit(m, ctab))
    assert rec["channels"] == expected_adjacency(m)
    assert {k for k, v in rec["instances"].items() if v != FIFO_MODULE} == \
        {a.name for a in m.base.actors} | {"lut"}


@given(st.integers(0, 10**9))
def test_random_emission_lints_and_reverses(seed):
    rng = random.Random(seed)
    nets = [flatten(x) for x in random_input_set(rng, rng.randint(1, 4), 3, 12, rng.random())]
    m, ctab = merge_all(nets)
    files = emit(m, ctab)
    assert lint_netlist(files) == []
    assert recover_adjacency(files)["channels"] == expected_adjacency(m)


# --- lint catches real faults


def test_lint_duplicate_driver(edge_merged):
    files = dict(emit(*edge_merged))
    top = files["top.v"]
    line = next(x for x in top.splitlines() if x.strip().startswith("assign w_in_pel"))
    files["top.v"] = top.replace(line, line + "\n" + line, 1)
    diags = lint_netlist(files)
    assert any("2 drivers" in d for d in diags)


def test_lint_width_mismatch(edge_merged):
    files = dict(emit(*edge_merged))
    files["top.v"] = files["top.v"].replace("wire [31:0] w_in_pel_fifo_1_data;",
                                            "wire [15:0] w_in_pel_fifo_1_data;", 1)
    diags = lint_netlist(files)
    assert any("fifo_1.in_data is 32 bits wide, bound to 16 bits" in d for d in diags)
    assert any("assign to 'w_in_pel_fifo_1_data' is 16 bits wide, from 32 bits" in d for d in diags)


def test_lint_unbound_port(edge_merged):
    files = dict(emit(*edge_merged))
    top = files["top.v"]
    start = top.index("    line_buffer line_buffer (")
    end = top.index(");", start)
    body = top[start:end]
    lines = body.splitlines()
    cut = [x for x in lines if ".pel_valid" not in x]
    cut[-1] = cut[-1].rstrip(",")
    files["top.v"] = top.replace(body, "\n".join(cut), 1)
    assert lint_netlist(files) != []


def test_lint_concat_and_slice_widths():
    src = """module t (input clk, input [15:0] a, output [31:0] y, output [7:0] z, output [31:0] q);
    reg [15:0] mem [0:3];
    assign y = {{%d{1'b0}}, a};
    assign z = a[%d:0];
    assign q = {a, mem[1]};
endmodule
"""
    assert lint_netlist({"t.v": src % (16, 7)}) == []
    diags = lint_netlist({"t.v": src % (8, 3)})
    assert any("'y' is 32 bits wide, from 24 bits" in d for d in diags)
    assert any("'z' is 8 bits wide, from 4 bits" in d for d in diags)
