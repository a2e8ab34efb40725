"""Structural Verilog emission for a merged substrate.

Actors are black boxes from an external component library; this module
only wires them. Every channel becomes one wire per protocol signal, named
``w_<src>_<dst>_<role>``. Buffered channels go through a ``fifo_wrapper``
instance, SBoxes through the two width-parameterised templates, and the
selector lines come from a ``config_lut`` driven by the network ID input.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .formats import DEFAULT_PROTOCOL, FORWARD, ProtocolSpec
from .ir import IN, SBOX1X2, SBOX2X1, Endpoint
from .multiflow import ConfigurationTable, MultiDataflow, id_width
from .power import ASIC, GatingPlan, select_line

ID_PORT = "cfg_id"
LUT_MODULE = "config_lut"
LUT_INSTANCE = "lut"
FIFO_MODULE = "fifo_wrapper"
GATE_MODULE = "clock_gate_and"
SBOX_MODULES = {SBOX1X2: "sbox_1x2", SBOX2X1: "sbox_2x1"}

VERILOG_KEYWORDS = frozenset("""
always and assign begin buf case casex casez default defparam disable else end endcase
endfunction endmodule endtask for force forever function if initial inout input integer
localparam module nand negedge nor not or output parameter posedge reg repeat signed
tri wait while wire xor xnor generate endgenerate genvar
""".split())
_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class NetlistError(ValueError):
    pass


def _check_ident(name: str, what: str):
    if not _IDENT.match(name) or name in VERILOG_KEYWORDS:
        raise NetlistError(f"{what} '{name}' is not a legal Verilog identifier")


@dataclass(frozen=True)
class TopPort:
    name: str
    direction: str      # input | output
    width: int


@dataclass(frozen=True)
class Wire:
    name: str
    width: int


@dataclass(frozen=True)
class Instance:
    name: str
    module: str
    params: tuple       # (name, value)
    bindings: tuple     # (port, net); net "" leaves an output unconnected


@dataclass(frozen=True)
class NetlistPlan:
    top: str
    ports: tuple
    wires: tuple
    assigns: tuple      # (lhs, rhs)
    instances: tuple
    protocol: ProtocolSpec
    lut: Optional[ConfigurationTable]
    n_configs: int
    library: tuple      # (component, ((port, direction, width), ...)) for black-box stubs
    gating: Optional[GatingPlan] = None

    def instance(self, name: str) -> Instance:
        for i in self.instances:
            if i.name == name:
                return i
        raise KeyError(name)

    @property
    def modules_used(self) -> set:
        return {i.module for i in self.instances}


# ---------------------------------------------------------------------------
# protocol helpers


def _strobe(protocol: ProtocolSpec):
    strobes = [s for s in protocol.forward if s.role != "data"]
    return strobes


def check_protocol(protocol: ProtocolSpec):
    diags = protocol.validate()
    if protocol.data is None:
        diags.append("protocol has no data signal")
    strobes = _strobe(protocol)
    if len(strobes) != 1:
        diags.append("protocol needs exactly one forward strobe (valid or push)")
    if diags:
        raise NetlistError(f"protocol '{protocol.name}' cannot wire dataflow ports: " + "; ".join(diags))


def idle_value(role: str, bits: int) -> str:
    """Value a signal takes on an unselected SBox leg."""
    one = role == "full"
    if bits == 1:
        return "1'b1" if one else "1'b0"
    return f"{{{bits}{{1'b1}}}}" if one else f"{bits}'d0"


def drain_value(role: str, bits: int) -> str:
    """Backward value for an output nobody reads: accept everything."""
    if role in ("ack", "ready"):
        return "1'b1" if bits == 1 else f"{{{bits}{{1'b1}}}}"
    return "1'b0" if bits == 1 else f"{bits}'d0"


def _ep_tag(ep: Endpoint) -> str:
    return ep.port if ep.actor is None else f"{ep.actor}_{ep.port}"


def wire_name(src: str, dst: str, role: str) -> str:
    return f"w_{src}_{dst}_{role}"


# ---------------------------------------------------------------------------
# planning


def plan_netlist(m: MultiDataflow, ctab: ConfigurationTable, protocol: ProtocolSpec = DEFAULT_PROTOCOL,
                 gating: Optional[GatingPlan] = None) -> NetlistPlan:
    check_protocol(protocol)
    net = m.base
    _check_ident(net.name, "top module")
    clk, rst = protocol.clock, protocol.reset
    sigs = protocol.signals

    ports = [TopPort(clk, "input", 1), TopPort(rst, "input", 1)]
    idw = id_width(m.n_configs)
    if idw:
        ports.append(TopPort(ID_PORT, "input", idw))
    for p in net.ports:
        _check_ident(p.name, "network port")
        for s in sigs:
            fwd_in = (p.direction == IN) == (s.direction == FORWARD)
            ports.append(TopPort(s.name(p.name), "input" if fwd_in else "output", s.bits(p.width)))

    wires: list = []
    assigns: list = []
    # endpoint -> {role: net}; built per channel segment
    bind: dict = {}

    def add_segment(src_tag: str, dst_tag: str, width: int, src, dst):
        for s in sigs:
            w = wire_name(src_tag, dst_tag, s.role)
            wires.append(Wire(w, s.bits(width)))
            bind.setdefault(src, {})[s.role] = w
            bind.setdefault(dst, {})[s.role] = w

    fifos = []
    for ch in sorted(net.channels, key=lambda c: (str(c.src), str(c.dst))):
        width = net.endpoint_port(ch.src).width
        src_tag, dst_tag = _ep_tag(ch.src), _ep_tag(ch.dst)
        if ch.depth > 0:
            fname = f"fifo_{len(fifos)}"
            fifos.append((fname, width, ch.depth))
            add_segment(src_tag, fname, width, ch.src, (fname, "in"))
            add_segment(fname, dst_tag, width, (fname, "out"), ch.dst)
        else:
            add_segment(src_tag, dst_tag, width, ch.src, ch.dst)

    # boundary ports connect to their channel wires through assigns
    for p in net.ports:
        ep = Endpoint(None, p.name)
        nets = bind.get(ep)
        for s in sigs:
            top = s.name(p.name)
            drives_top = (p.direction == IN) != (s.direction == FORWARD)
            if nets is None:
                if drives_top:
                    assigns.append((top, idle_value(s.role, s.bits(p.width))))
                continue
            if drives_top:
                assigns.append((top, nets[s.role]))
            else:
                assigns.append((nets[s.role], top))

    instances = []
    library: dict = {}
    sboxes = m.sbox_names
    lut = ctab if sboxes else None
    for s in sboxes:
        wires.append(Wire(f"sel_{s}", 1))
    if lut is not None:
        b = ([("id", ID_PORT)] if idw else []) + [(f"sel_{s}", f"sel_{s}") for s in sboxes]
        instances.append(Instance(LUT_INSTANCE, LUT_MODULE, (), tuple(b)))

    gate_clock = {}
    if gating is not None:
        for c in range(m.n_configs):
            wires.append(Wire(select_line(c), 1))
            assigns.append((select_line(c), f"({ID_PORT} == {idw}'d{c})" if idw else "1'b1"))
        for cell in gating.cells:
            en = f"en_lr{cell.region}"
            wires.append(Wire(en, 1))
            wires.append(Wire(cell.clock, 1))
            assigns.append((en, cell.enable))
            if gating.target == ASIC:
                instances.append(Instance(cell.name, GATE_MODULE, (),
                                          (("clk", clk), ("en", en), ("gclk", cell.clock))))
            else:
                instances.append(Instance(cell.name, "BUFGCE", (),
                                          (("I", clk), ("CE", en), ("O", cell.clock))))
                library["BUFGCE"] = (("I", "input", 1), ("CE", "input", 1), ("O", "output", 1))
            for a in cell.members:
                gate_clock[a] = cell.clock

    for a in sorted(net.actors, key=lambda a: a.name):
        _check_ident(a.name, "instance")
        if a.is_sbox:
            w = a.outputs[0].width
            b = [("sel", f"sel_{a.name}")]
            for p in a.ports:
                if p.name != "sel":
                    b += _port_bindings(protocol, bind.get(Endpoint(a.name, p.name)), p)
            instances.append(Instance(a.name, SBOX_MODULES[a.kind], (("WIDTH", w),), tuple(b)))
            continue
        _check_ident(a.component, "component")
        b = [("clk", gate_clock.get(a.name, clk)), ("rst", rst)]
        shape = [("clk", "input", 1), ("rst", "input", 1)]
        for p in a.ports:
            b += _port_bindings(protocol, bind.get(Endpoint(a.name, p.name)), p)
            for s in sigs:
                d = "input" if (p.direction == IN) == (s.direction == FORWARD) else "output"
                shape.append((s.name(p.name), d, s.bits(p.width)))
        shape = tuple(shape)
        if library.setdefault(a.component, shape) != shape:
            raise NetlistError(f"component '{a.component}' is used with two different port lists")
        instances.append(Instance(a.name, a.component, (), tuple(b)))

    for fname, width, depth in fifos:
        b = [("clk", clk), ("rst", rst)]
        for side in ("in", "out"):
            nets = bind[(fname, side)]
            b += [(s.name(side), nets[s.role]) for s in sigs]
        instances.append(Instance(fname, FIFO_MODULE, (("WIDTH", width), ("DEPTH", depth)), tuple(b)))

    plan = NetlistPlan(net.name, tuple(ports), tuple(wires), tuple(assigns), tuple(instances),
                       protocol, lut, m.n_configs, tuple(sorted(library.items())), gating)
    diags = check_plan(plan)
    if diags:
        raise NetlistError("; ".join(diags))
    return plan


def _port_bindings(protocol: ProtocolSpec, nets, p) -> list:
    out = []
    for s in protocol.signals:
        pin = s.name(p.name)
        is_input = (p.direction == IN) == (s.direction == FORWARD)
        if nets is not None:
            out.append((pin, nets[s.role]))
        elif not is_input:
            out.append((pin, ""))
        elif p.direction == IN:
            out.append((pin, idle_value(s.role, s.bits(p.width))))
        else:
            out.append((pin, drain_value(s.role, s.bits(p.width))))
    return out


def check_plan(plan: NetlistPlan) -> list:
    """Name uniqueness, single drivers and width agreement at plan level."""
    diags = []
    names = [p.name for p in plan.ports] + [w.name for w in plan.wires] + [i.name for i in plan.instances]
    seen = set()
    for n in names:
        if n in seen:
            diags.append(f"identifier '{n}' declared twice")
        seen.add(n)
    width = {p.name: p.width for p in plan.ports}
    width.update({w.name: w.width for w in plan.wires})
    drivers = {}
    for lhs, _ in plan.assigns:
        drivers[lhs] = drivers.get(lhs, 0) + 1
    shapes = dict(plan.library)
    for inst in plan.instances:
        pdirs = _instance_shape(plan, inst, shapes)
        for pin, netn in inst.bindings:
            if pin not in pdirs:
                diags.append(f"{inst.name}: no port '{pin}' on {inst.module}")
                continue
            d, w = pdirs[pin]
            if netn in width:
                if width[netn] != w:
                    diags.append(f"{inst.name}.{pin}: width {w} bound to {netn}[{width[netn]}]")
                if d == "output":
                    drivers[netn] = drivers.get(netn, 0) + 1
        missing = set(pdirs) - {p for p, _ in inst.bindings}
        if missing:
            diags.append(f"{inst.name}: unbound ports {', '.join(sorted(missing))}")
    for w in plan.wires:
        if drivers.get(w.name, 0) != 1:
            diags.append(f"wire '{w.name}' has {drivers.get(w.name, 0)} drivers")
    return diags


def _instance_shape(plan: NetlistPlan, inst: Instance, shapes: dict) -> dict:
    params = dict(inst.params)
    sigs = plan.protocol.signals
    if inst.module in shapes:
        return {p: (d, w) for p, d, w in shapes[inst.module]}
    if inst.module == LUT_MODULE:
        idw = id_width(plan.n_configs)
        out = {p: ("output", 1) for p, _ in inst.bindings if p.startswith("sel_")}
        if idw:
            out["id"] = ("input", idw)
        return out
    if inst.module == GATE_MODULE:
        return {"clk": ("input", 1), "en": ("input", 1), "gclk": ("output", 1)}
    w = params.get("WIDTH", 1)
    if inst.module == FIFO_MODULE:
        sides = [("in", True), ("out", False)]
        out = {"clk": ("input", 1), "rst": ("input", 1)}
    elif inst.module == SBOX_MODULES[SBOX1X2]:
        sides = [("in", True), ("out0", False), ("out1", False)]
        out = {"sel": ("input", 1)}
    elif inst.module == SBOX_MODULES[SBOX2X1]:
        sides = [("in0", True), ("in1", True), ("out", False)]
        out = {"sel": ("input", 1)}
    else:
        raise NetlistError(f"unknown module '{inst.module}'")
    for side, consumer in sides:
        for s in sigs:
            d = "input" if consumer == (s.direction == FORWARD) else "output"
            out[s.name(side)] = (d, s.bits(w))
    return out


# ---------------------------------------------------------------------------
# text emission


def _range(bits) -> str:
    if bits == 1:
        return ""
    return f"[{bits - 1}:0] "


def _prange(s, param="WIDTH") -> str:
    if s.width == "port":
        return f"[{param}-1:0] "
    return _range(int(s.width))


def _port_decls(decls) -> str:
    return ",\n".join(f"    {d}" for d in decls)


def emit_top(plan: NetlistPlan) -> str:
    lines = [f"// top level of {plan.top}: {plan.n_configs} configuration(s)",
             f"module {plan.top} ("]
    lines.append(_port_decls([f"{p.direction} wire {_range(p.width)}{p.name}" for p in plan.ports]))
    lines.append(");")
    lines.append("")
    for w in plan.wires:
        lines.append(f"    wire {_range(w.width)}{w.name};")
    if plan.assigns:
        lines.append("")
    for lhs, rhs in plan.assigns:
        lines.append(f"    assign {lhs} = {rhs};")
    for inst in plan.instances:
        lines.append("")
        head = f"    {inst.module} "
        if inst.params:
            head += "#(" + ", ".join(f".{k}({v})" for k, v in inst.params) + ") "
        lines.append(head + f"{inst.name} (")
        lines.append(",\n".join(f"        .{p}({n})" for p, n in inst.bindings))
        lines.append("    );")
    lines.append("")
    lines.append("endmodule")
    return "\n".join(lines) + "\n"


def emit_lut_contents(ctab: ConfigurationTable) -> str:
    """``config_lut``: a case block from network ID to selector bits."""
    n = len(ctab.rows)
    idw = id_width(n)
    sboxes = list(ctab.sboxes)
    decls = []
    if idw and sboxes:
        decls.append(f"input wire {_range(idw)}id")
    decls += [f"output reg sel_{s}" for s in sboxes]
    lines = [f"// selector lookup: {n} network id(s), {len(sboxes)} SBox(es)"]
    if not decls:
        lines += [f"module {LUT_MODULE};", "    // no SBoxes: nothing to select", "endmodule"]
        return "\n".join(lines) + "\n"
    lines += [f"module {LUT_MODULE} (", _port_decls(decls), ");", ""]
    lines.append("    always @(*) begin")
    if idw:
        lines.append("        case (id)")
        for name in ctab.names:
            r = ctab.rows[name]
            lines.append(f"            {idw}'d{r.network_id}: begin  // {name}")
            for s in sboxes:
                lines.append(f"                sel_{s} = 1'b{r.selectors[s]};")
            lines.append("            end")
        lines.append("            default: begin  // unused ids: every SBox on leg 0")
        for s in sboxes:
            lines.append(f"                sel_{s} = 1'b0;")
        lines.append("            end")
        lines.append("        endcase")
    else:
        r = ctab.row(0)
        for s in sboxes:
            lines.append(f"        sel_{s} = 1'b{r.selectors[s]};")
    lines.append("    end")
    lines.append("")
    lines.append("endmodule")
    return "\n".join(lines) + "\n"


_ARM = re.compile(r"(\d+)'d(\d+):\s*begin")
_SEL = re.compile(r"sel_(\w+)\s*=\s*1'b([01]);")


def parse_lut_contents(text: str) -> dict:
    """Read the case arms of an emitted lut back: network id -> {sbox: bit}."""
    rows = {}
    current = None
    for line in text.splitlines():
        mt = _ARM.search(line)
        if mt:
            current = rows.setdefault(int(mt.group(2)), {})
            continue
        if "default" in line:
            current = None
            continue
        ms = _SEL.search(line)
        if ms and current is not None:
            current[ms.group(1)] = int(ms.group(2))
    return rows


def _template_ports(protocol: ProtocolSpec, sides) -> list:
    decls = []
    for side, consumer in sides:
        for s in protocol.signals:
            d = "input" if consumer == (s.direction == FORWARD) else "output"
            decls.append(f"{d} wire {_prange(s)}{s.name(side)}")
    return decls


def _idle(s) -> str:
    return idle_value(s.role, 1) if s.width != "port" and int(s.width) == 1 else (
        "{WIDTH{1'b0}}" if s.width == "port" else idle_value(s.role, int(s.width)))


def emit_sbox_1x2(protocol: ProtocolSpec) -> str:
    lines = ["// 1x2 switching box: sel picks the output leg, the other leg idles",
             "module sbox_1x2 #(parameter WIDTH = 32) ("]
    lines.append(_port_decls(["input wire sel"] + _template_ports(
        protocol, [("in", True), ("out0", False), ("out1", False)])))
    lines += [");", ""]
    for s in protocol.forward:
        src = s.name("in")
        if s.role == "data":
            lines.append(f"    assign {s.name('out0')} = {src};")
            lines.append(f"    assign {s.name('out1')} = {src};")
        else:
            lines.append(f"    assign {s.name('out0')} = sel ? {_idle(s)} : {src};")
            lines.append(f"    assign {s.name('out1')} = sel ? {src} : {_idle(s)};")
    for s in protocol.backward:
        lines.append(f"    assign {s.name('in')} = sel ? {s.name('out1')} : {s.name('out0')};")
    lines += ["", "endmodule"]
    return "\n".join(lines) + "\n"


def emit_sbox_2x1(protocol: ProtocolSpec) -> str:
    lines = ["// 2x1 switching box: sel picks the input leg, the other leg idles",
             "module sbox_2x1 #(parameter WIDTH = 32) ("]
    lines.append(_port_decls(["input wire sel"] + _template_ports(
        protocol, [("in0", True), ("in1", True), ("out", False)])))
    lines += [");", ""]
    for s in protocol.forward:
        lines.append(f"    assign {s.name('out')} = sel ? {s.name('in1')} : {s.name('in0')};")
    for s in protocol.backward:
        lines.append(f"    assign {s.name('in0')} = sel ? {_idle(s)} : {s.name('out')};")
        lines.append(f"    assign {s.name('in1')} = sel ? {s.name('out')} : {_idle(s)};")
    lines += ["", "endmodule"]
    return "\n".join(lines) + "\n"


def emit_fifo_wrapper(protocol: ProtocolSpec) -> str:
    check_protocol(protocol)
    strobe = _strobe(protocol)[0]
    data = protocol.data
    accept = []
    for s in protocol.backward:
        if s.role in ("ack", "ready"):
            accept.append(s.name("out"))
        elif s.role == "full":
            accept.append(f"!{s.name('out')}")
    accept_expr = " && ".join(accept) if accept else "1'b1"
    lines = ["// circular buffer between two dataflow ports",
             f"module {FIFO_MODULE} #(parameter WIDTH = 32, parameter DEPTH = 1) ("]
    lines.append(_port_decls(["input wire clk", "input wire rst"] + _template_ports(
        protocol, [("in", True), ("out", False)])))
    lines += [");", "",
              "    localparam AW = (DEPTH > 1) ? $clog2(DEPTH) : 1;",
              "    reg [WIDTH-1:0] mem [0:DEPTH-1];",
              "    reg [AW-1:0] rd_ptr;",
              "    reg [AW-1:0] wr_ptr;",
              "    reg [AW:0] count;",
              "    wire push_ok;",
              "    wire pop_ok;",
              "",
              f"    assign push_ok = {strobe.name('in')} && (count < DEPTH);",
              f"    assign {strobe.name('out')} = (count != 0);",
              f"    assign pop_ok = {strobe.name('out')} && {accept_expr};",
              f"    assign {data.name('out')} = mem[rd_ptr];"]
    for s in protocol.backward:
        if s.role == "ack":
            lines.append(f"    assign {s.name('in')} = push_ok;")
        elif s.role == "ready":
            lines.append(f"    assign {s.name('in')} = (count < DEPTH);")
        elif s.role == "full":
            lines.append(f"    assign {s.name('in')} = (count == DEPTH);")
    lines += ["",
              "    always @(posedge clk) begin",
              "        if (rst) begin",
              "            rd_ptr <= 0;",
              "            wr_ptr <= 0;",
              "            count <= 0;",
              "        end else begin",
              "            if (push_ok) begin",
              f"                mem[wr_ptr] <= {data.name('in')};",
              "                wr_ptr <= (wr_ptr == DEPTH - 1) ? 0 : wr_ptr + 1;",
              "            end",
              "            if (pop_ok)",
              "                rd_ptr <= (rd_ptr == DEPTH - 1) ? 0 : rd_ptr + 1;",
              "            count <= count + push_ok - pop_ok;",
              "        end",
              "    end",
              "",
              "endmodule"]
    return "\n".join(lines) + "\n"


def emit_clock_gate() -> str:
    return "\n".join([
        "// AND-type clock gate; en must only change while clk is low",
        f"module {GATE_MODULE} (",
        "    input wire clk,",
        "    input wire en,",
        "    output wire gclk",
        ");",
        "",
        "    assign gclk = clk & en;",
        "",
        "endmodule",
    ]) + "\n"


def emit_stubs(plan: NetlistPlan) -> str:
    """Empty black-box declarations of the library components, for linting."""
    out = ["// black-box port lists of external library components (lint only)"]
    for comp, ports in plan.library:
        out.append("(* black_box *)")
        out.append(f"module {comp} (")
        out.append(_port_decls([f"{d} wire {_range(w)}{p}" for p, d, w in ports]))
        out.append(");")
        out.append("endmodule")
        out.append("")
    return "\n".join(out)


def emit_verilog(plan: NetlistPlan) -> dict:
    """File name -> text. ``stubs/library_stubs.v`` is not part of the design."""
    files = {"top.v": emit_top(plan)}
    used = plan.modules_used
    if plan.lut is not None and plan.lut.sboxes:
        files[f"{LUT_MODULE}.v"] = emit_lut_contents(plan.lut)
    for kind, mod in SBOX_MODULES.items():
        if mod in used:
            files[f"{mod}.v"] = emit_sbox_1x2(plan.protocol) if kind == SBOX1X2 else emit_sbox_2x1(plan.protocol)
    if FIFO_MODULE in used:
        files[f"{FIFO_MODULE}.v"] = emit_fifo_wrapper(plan.protocol)
    if GATE_MODULE in used:
        files[f"{GATE_MODULE}.v"] = emit_clock_gate()
    files["stubs/library_stubs.v"] = emit_stubs(plan)
    return dict(sorted(files.items()))


def write_files(files: dict, outdir) -> list:
    outdir = Path(outdir)
    written = []
    for name, text in files.items():
        path = outdir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        written.append(path)
    return written
