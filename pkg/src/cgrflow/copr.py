"""Processor-coprocessor collateral: interface-layer HDL, C drivers, Vivado
TCL scripts and the list of extra Xilinx IPs a deployment needs.

Two interface layers are supported. The memory-mapped one (``mm``) has a
register bank, one local-memory segment per data port and a front-end or
back-end per port. The stream one (``stream``) wires AXI4-Stream links to
the core directly and counts output beats to raise ``tlast``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .formats import FORWARD, DEFAULT_PROTOCOL, ProtocolSpec
from .ir import IN
from .multiflow import ConfigurationTable, MultiDataflow, id_width

MM = "mm"
STREAM = "stream"
ARM = "arm"
MICROBLAZE = "microblaze"
DATA = "data"
PARAMETER = "parameter"

DEFAULT_PART = "xc7z020clg400-1"
DEFAULT_BOARD = "digilentinc.com:arty-z7-20:part0:1.0"
DEFAULT_MEM_WORDS = 256

# Xilinx IP names as they appear in the deployment table
IP_INTERCONNECT = "AXI4 Interconnect"
IP_DMA = "AXI DMA"
IP_CDMA = "AXI CDMA"
IP_DATA_FIFO = "AXI4-Stream Data FIFO"
IP_STREAM_FIFO = "AXI-Stream FIFO"

VLNV = {
    "processing_system7": "xilinx.com:ip:processing_system7:5.5",
    "microblaze": "xilinx.com:ip:microblaze:11.0",
    "axi_interconnect": "xilinx.com:ip:axi_interconnect:2.1",
    "axi_cdma": "xilinx.com:ip:axi_cdma:4.1",
    "axi_dma": "xilinx.com:ip:axi_dma:7.1",
    "axis_data_fifo": "xilinx.com:ip:axis_data_fifo:2.0",
    "axi_fifo_mm_s": "xilinx.com:ip:axi_fifo_mm_s:4.2",
}

_C_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class CoprError(ValueError):
    pass


@dataclass(frozen=True)
class DeploymentConfig:
    processor: str = ARM
    coupling: str = MM
    dma: bool = False
    part: str = DEFAULT_PART
    board: str = DEFAULT_BOARD
    port_roles: dict = field(default_factory=dict)    # port -> data | parameter
    mem_words_per_port: int = DEFAULT_MEM_WORDS
    ip_version: str = "1.0"

    def validate(self) -> list:
        diags = []
        if self.processor not in (ARM, MICROBLAZE):
            diags.append(f"unknown processor '{self.processor}'")
        if self.coupling not in (MM, STREAM):
            diags.append(f"unknown coupling '{self.coupling}'")
        w = self.mem_words_per_port
        if w < 2 or w & (w - 1):
            diags.append(f"mem words per port must be a power of two >= 2, got {w}")
        for p, r in self.port_roles.items():
            if r not in (DATA, PARAMETER):
                diags.append(f"port '{p}' has unknown role '{r}'")
        return diags

    @property
    def variant(self) -> str:
        return "mm" if self.coupling == MM else "s"

    @property
    def ip_name(self) -> str:
        return f"{self.variant}_accelerator"


# ---------------------------------------------------------------------------
# additional IPs


def additional_ips(cfg: DeploymentConfig, io_ports) -> list:
    """Extra Xilinx IPs besides processor and coprocessor, as ``(name, count)``.

    ``io_ports`` is ``(inputs, outputs)`` counting data ports only. A couple
    of I/O ports is one input paired with one output; unpaired ports take
    a unit of their own.
    """
    n_in, n_out = io_ports
    per_port = n_in + n_out
    per_couple = max(n_in, n_out)
    out = [(IP_INTERCONNECT, 1)]
    if cfg.coupling == MM:
        if cfg.dma:
            out.append((IP_DMA, 1))
        return out
    if cfg.processor == MICROBLAZE:
        out.append((IP_DATA_FIFO, per_port))
        if cfg.dma:
            out.append((IP_CDMA, per_port))
        return out
    if not cfg.dma:
        out.append((IP_STREAM_FIFO, per_couple))
    else:
        out.append((IP_DATA_FIFO, per_port))
        out.append((IP_CDMA, per_couple))
    return out


def instantiated_ips(cfg: DeploymentConfig, io_ports) -> list:
    """Block-design cells the integration script actually creates.

    Differs from :func:`additional_ips` only in the DMA engine type: the
    drivers program a central DMA for memory-mapped transfers and an AXI
    DMA (MM2S/S2MM) for stream transfers, so those are instantiated.
    """
    out = []
    for name, n in additional_ips(cfg, io_ports):
        if name == IP_DMA and cfg.coupling == MM:
            name = IP_CDMA
        elif name == IP_CDMA and cfg.coupling == STREAM:
            name = IP_DMA
        out.append((name, n))
    return out


# ---------------------------------------------------------------------------
# interface-layer plan


@dataclass(frozen=True)
class Register:
    index: int
    name: str
    role: str           # control | size | param
    port: Optional[str] = None


@dataclass(frozen=True)
class MemSegment:
    index: int          # same as the port's size register
    port: str
    offset: int         # bytes from the memory base
    words: int


@dataclass(frozen=True)
class TilPlan:
    variant: str
    ip_name: str
    registers: tuple
    segments: tuple     # mm only
    front_ends: tuple   # mm: input data ports
    back_ends: tuple    # mm: output data ports
    counters: tuple     # stream: output data ports
    inputs: tuple       # data input ports, declaration order
    outputs: tuple      # data output ports, declaration order
    params: tuple       # parameter ports
    widths: dict
    kernel_ids: dict    # config -> network id
    config_ports: dict  # config -> ports it uses
    mem_words: int
    id_bits: int

    def register(self, port: str, role: str = "size") -> Register:
        for r in self.registers:
            if r.port == port and r.role == role:
                return r
        raise KeyError(port)

    @property
    def driver_ports(self) -> tuple:
        """Ports in driver-argument order: descending register index."""
        return tuple(reversed(self.inputs + self.outputs + self.params))


def classify_ports(m: MultiDataflow, cfg: DeploymentConfig):
    names = {p.name for p in m.base.ports}
    unknown = sorted(set(cfg.port_roles) - names)
    if unknown:
        raise CoprError(f"port roles name unknown ports: {', '.join(unknown)}")
    inputs, outputs, params = [], [], []
    for p in m.base.ports:
        role = cfg.port_roles.get(p.name, DATA)
        if role == PARAMETER:
            if p.direction != IN:
                raise CoprError(f"parameter port '{p.name}' must be an input")
            params.append(p.name)
        elif p.direction == IN:
            inputs.append(p.name)
        else:
            outputs.append(p.name)
    return tuple(inputs), tuple(outputs), tuple(params)


def plan_til(m: MultiDataflow, cfg: DeploymentConfig, ctab: Optional[ConfigurationTable] = None) -> TilPlan:
    diags = cfg.validate()
    if diags:
        raise CoprError("; ".join(diags))
    inputs, outputs, params = classify_ports(m, cfg)
    if not inputs or not outputs:
        raise CoprError("a coprocessor needs at least one input and one output data port")
    widths = {p.name: p.width for p in m.base.ports}
    for p, w in widths.items():
        if w > 32:
            raise CoprError(f"port '{p}' is {w} bits wide; the interface layer moves 32-bit words")
        if not _C_IDENT.match(p):
            raise CoprError(f"port '{p}' is not a C identifier")
    for c in m.configs:
        if not _C_IDENT.match(c):
            raise CoprError(f"configuration '{c}' is not a C identifier")
    if m.n_configs > 256:
        raise CoprError("the control register holds an 8-bit kernel id")

    regs = [Register(0, "ctrl", "control")]
    sized = inputs + outputs if cfg.coupling == MM else outputs
    for p in sized:
        regs.append(Register(len(regs), f"size_{p}", "size", p))
    for p in params:
        regs.append(Register(len(regs), f"param_{p}", "param", p))

    words = cfg.mem_words_per_port
    segments = ()
    if cfg.coupling == MM:
        segments = tuple(MemSegment(i + 1, p, i * words * 4, words) for i, p in enumerate(inputs + outputs))
    kernel_ids = ({name: ctab.rows[name].network_id for name in ctab.rows} if ctab is not None
                  else {c: i for i, c in enumerate(m.configs)})
    order = inputs + outputs + params
    config_ports = {c: tuple(p for p in order if i in m.port_prov.get(p, ()))
                    for i, c in enumerate(m.configs)}
    return TilPlan(
        cfg.coupling, cfg.ip_name, tuple(regs), segments,
        inputs if cfg.coupling == MM else (),
        outputs if cfg.coupling == MM else (),
        outputs if cfg.coupling == STREAM else (),
        inputs, outputs, params, widths, kernel_ids, config_ports, words,
        id_width(m.n_configs),
    )


def control_word(kernel_id: int) -> int:
    """Register 0: kernel id in bits 31..24, start in bit 0 (done is bit 1)."""
    return (kernel_id << 24) | 1


# ---------------------------------------------------------------------------
# drivers


def _macro(s: str) -> str:
    return s.upper()


def _reg(base: str, off: int) -> str:
    return f"*((volatile int*) {base} + (0x{off:02X}>>2))"


def driver_signature(plan: TilPlan, config: str, ip_name: str) -> str:
    ports = [p for p in plan.driver_ports if p in plan.config_ports[config]]
    lines = [f"int {ip_name}_{config}("]
    args = []
    for p in ports:
        args.append(f"\t// port {p}\n\tint size_{p}, int* data_{p}")
    lines.append(",\n".join(args) if args else "\tvoid")
    lines.append(")")
    return "\n".join(lines)


def _stream_unit(plan: TilPlan, cfg: DeploymentConfig, port: str) -> int:
    """Index of the FIFO or DMA serving ``port``."""
    if cfg.processor == ARM:
        # couples: k-th input with k-th output
        if port in plan.inputs:
            return plan.inputs.index(port)
        return plan.outputs.index(port)
    return (plan.inputs + plan.outputs).index(port)


def emit_drivers(plan: TilPlan, cfg: DeploymentConfig, m: MultiDataflow,
                 ctab: Optional[ConfigurationTable] = None) -> dict:
    """Return ``{"<ip>.h": ..., "<ip>.c": ...}``."""
    ip = cfg.ip_name
    IP = _macro(ip)
    cfg_base = f"XPAR_{IP}_0_CFG_BASEADDR"
    mem_base = f"XPAR_{IP}_0_MEM_BASEADDR"

    h = [f"#ifndef {IP}_H", f"#define {IP}_H", "",
         f"/* register map and entry points of {ip} ({plan.variant} coupling) */", "",
         "#ifndef MDC_ADDR_T", "#define MDC_ADDR_T unsigned int", "#endif", "",
         "/* called inside every polling loop; a test harness can step a model here */",
         "#ifndef MDC_WAIT_HOOK", "#define MDC_WAIT_HOOK() do { } while (0)", "#endif", ""]

    def addr_macro(name, default):
        h.extend([f"#ifndef {name}", f"#define {name} ((MDC_ADDR_T) 0x{default:08X})", "#endif"])

    addr_macro(cfg_base, 0x43C00000)
    if plan.variant == MM:
        addr_macro(mem_base, 0x76000000)
    units = set()
    if cfg.dma:
        if plan.variant == MM:
            addr_macro("XPAR_AXI_CDMA_0_BASEADDR", 0x7E200000)
        else:
            units = sorted({_stream_unit(plan, cfg, p) for p in plan.inputs + plan.outputs})
            for k in units:
                addr_macro(f"XPAR_AXI_DMA_{k}_BASEADDR", 0x40400000 + 0x10000 * k)
    elif plan.variant == STREAM:
        units = sorted({_stream_unit(plan, cfg, p) for p in plan.inputs + plan.outputs})
        if cfg.processor == ARM:
            for k in units:
                addr_macro(f"XPAR_AXI_FIFO_{k}_BASEADDR", 0x43C10000 + 0x10000 * k)
        else:
            addr_macro("XPAR_MDC_STREAM_LINK_BASEADDR", 0x44A00000)
            h.extend([
                "/* stream links; override with the processor's stream-link intrinsics */",
                "#ifndef MDC_STREAM_PUT",
                "#define MDC_STREAM_PUT(link, value) "
                "(*((volatile int*) XPAR_MDC_STREAM_LINK_BASEADDR + (link)) = (value))",
                "#endif",
                "#ifndef MDC_STREAM_GET",
                "#define MDC_STREAM_GET(link) (*((volatile int*) XPAR_MDC_STREAM_LINK_BASEADDR + (link)))",
                "#endif",
            ])
    h.append("")
    for r in plan.registers:
        h.append(f"#define {IP}_REG_{_macro(r.name)} {r.index}")
    if plan.variant == MM:
        h.append(f"#define {IP}_MEM_WORDS {plan.mem_words}")
        for s in plan.segments:
            h.append(f"#define {IP}_MEM_{s.index}_OFFSET 0x{s.offset:08X}")
    for c in m.configs:
        h.append(f"#define {IP}_ID_{_macro(c)} {plan.kernel_ids[c]}")
    h.append("")
    for c in m.configs:
        h.append(driver_signature(plan, c, ip) + ";")
        h.append("")
    h.append(f"#endif /* {IP}_H */")

    c_lines = [f'#include "{ip}.h"', ""]
    for conf in m.configs:
        c_lines += _driver_body(plan, cfg, conf, ip, IP, cfg_base, mem_base)
    return {f"{ip}.h": "\n".join(h) + "\n", f"{ip}.c": "\n".join(c_lines)}


def _driver_body(plan, cfg, conf, ip, IP, cfg_base, mem_base) -> list:
    used = plan.config_ports[conf]
    out = [driver_signature(plan, conf, ip) + " {"]
    out.append(f"\tvolatile int* config = (volatile int*) {cfg_base};")
    if plan.variant == MM and not cfg.dma:
        out.append("\tvolatile int* mem;")
    out.append("\tint i;")
    if plan.variant == MM:
        out.append("")
        for p in plan.inputs + plan.outputs:
            if p in used:
                out.append(f"\tif (size_{p} < 0 || size_{p} > {IP}_MEM_WORDS) return -1;")
    out.append("")
    out.append("\t// configure I/O")
    for r in plan.registers:
        if r.role == "size":
            val = f"size_{r.port}" if r.port in used else "0"
            note = "" if r.port in used else f" // port {r.port} unused by {conf}"
            out.append(f"\t*(config + {r.index}) = {val};{note}")
        elif r.role == "param":
            val = f"(size_{r.port} > 0) ? data_{r.port}[0] : 0" if r.port in used else "0"
            out.append(f"\t*(config + {r.index}) = {val};")
    word = f"0x{control_word(plan.kernel_ids[conf]):X}"

    if plan.variant == MM:
        for s in plan.segments:
            if s.port in plan.inputs and s.port in used:
                out.append("")
                out.append(f"\t// send data port {s.port}")
                out += _mm_move(cfg, IP, mem_base, s, s.port, inbound=True)
        out += ["", "\t// start execution", f"\t*(config) = {word};", "",
                "\t// wait for done", "\twhile ((*(config) & 0x2) != 0x2)", "\t\tMDC_WAIT_HOOK();"]
        for s in plan.segments:
            if s.port in plan.outputs and s.port in used:
                out.append("")
                out.append(f"\t// receive data port {s.port}")
                out += _mm_move(cfg, IP, mem_base, s, s.port, inbound=False)
    else:
        out += ["", "\t// start execution", f"\t*(config) = {word};"]
        for p in plan.inputs:
            if p in used:
                out.append("")
                out.append(f"\t// send data port {p}")
                out += _stream_move(plan, cfg, p, inbound=True)
        for p in plan.outputs:
            if p in used:
                out.append("")
                out.append(f"\t// receive data port {p}")
                out += _stream_move(plan, cfg, p, inbound=False)
        out += ["", "\t// wait for done", "\twhile ((*(config) & 0x2) != 0x2)", "\t\tMDC_WAIT_HOOK();"]
    out += ["", "\t(void) i;", "\treturn 0;", "}", ""]
    return out


def _mm_move(cfg, IP, mem_base, seg, port, inbound: bool) -> list:
    local = f"{mem_base} + {IP}_MEM_{seg.index}_OFFSET"
    if not cfg.dma:
        lines = [f"\tmem = (volatile int*) ({local});",
                 f"\tfor (i = 0; i < size_{port}; i++)"]
        lines.append(f"\t\tmem[i] = data_{port}[i];" if inbound else f"\t\tdata_{port}[i] = mem[i];")
        return lines
    base = "XPAR_AXI_CDMA_0_BASEADDR"
    host = f"(int) (MDC_ADDR_T) data_{port}"
    src, dst = (host, f"(int) ({local})") if inbound else (f"(int) ({local})", host)
    return [
        f"\t{_reg(base, 0x04)} = 0x00000002; // verify idle",
        f"\t{_reg(base, 0x18)} = {src}; // src",
        f"\t{_reg(base, 0x20)} = {dst}; // dst",
        f"\t{_reg(base, 0x28)} = size_{port}*4; // size [B]",
        f"\twhile (({_reg(base, 0x04)} & 0x2) != 0x2)",
        "\t\tMDC_WAIT_HOOK();",
    ]


def _stream_move(plan, cfg, port, inbound: bool) -> list:
    k = _stream_unit(plan, cfg, port)
    if cfg.dma:
        base = f"XPAR_AXI_DMA_{k}_BASEADDR"
        host = f"(int) (MDC_ADDR_T) data_{port}"
        if inbound:
            return [
                f"\t{_reg(base, 0x00)} = 0x00000001; // start",
                f"\t{_reg(base, 0x04)} = 0x00000000; // reset idle",
                f"\t{_reg(base, 0x18)} = {host}; // src",
                f"\t{_reg(base, 0x28)} = size_{port}*4; // size [B]",
                f"\twhile (({_reg(base, 0x04)} & 0x2) != 0x2)",
                "\t\tMDC_WAIT_HOOK();",
            ]
        return [
            f"\t{_reg(base, 0x30)} = 0x00000001; // start",
            f"\t{_reg(base, 0x34)} = 0x00000000; // reset idle",
            f"\t{_reg(base, 0x48)} = {host}; // dst",
            f"\t{_reg(base, 0x58)} = size_{port}*4; // size [B]",
            f"\twhile (({_reg(base, 0x34)} & 0x2) != 0x2)",
            "\t\tMDC_WAIT_HOOK();",
        ]
    if cfg.processor == MICROBLAZE:
        if inbound:
            return [f"\tfor (i = 0; i < size_{port}; i++)",
                    f"\t\tMDC_STREAM_PUT({k}, data_{port}[i]);"]
        return [f"\tfor (i = 0; i < size_{port}; i++)",
                f"\t\tdata_{port}[i] = MDC_STREAM_GET({k});"]
    base = f"XPAR_AXI_FIFO_{k}_BASEADDR"
    if inbound:
        return [f"\tfor (i = 0; i < size_{port}; i++)",
                f"\t\t{_reg(base, 0x10)} = data_{port}[i]; // TDFD",
                f"\t{_reg(base, 0x14)} = size_{port}*4; // TLR"]
    return [f"\tfor (i = 0; i < size_{port}; i++) {{",
            f"\t\twhile ({_reg(base, 0x1C)} == 0) // RDFO",
            "\t\t\tMDC_WAIT_HOOK();",
            f"\t\tdata_{port}[i] = {_reg(base, 0x20)}; // RDFD",
            "\t}"]


_SIG = re.compile(r"int\s+(\w+)\(\s*(.*?)\)\s*[;{]", re.S)


def parse_driver_signatures(text: str) -> dict:
    """Function name -> list of ``(type, name)`` parameters, comments dropped."""
    text = re.sub(r"//[^\n]*", "", text)
    text = re.sub(r"/\*.*?\*/", "", text, flags=re.S)
    out = {}
    for mt in _SIG.finditer(text):
        params = []
        body = mt.group(2).strip()
        if body and body != "void":
            for part in body.split(","):
                toks = part.replace("*", " * ").split()
                params.append((" ".join(toks[:-1]).replace(" *", "*"), toks[-1]))
        out[mt.group(1)] = params
    return out


def register_writes(text: str) -> set:
    """Register indices written through ``*(config + k)`` (0 for ``*(config)``)."""
    idx = {int(k) for k in re.findall(r"\*\(config \+ (\d+)\)\s*=", text)}
    if re.search(r"\*\(config\)\s*=", text):
        idx.add(0)
    return idx


# ---------------------------------------------------------------------------
# interface-layer HDL


def _bits(n: int) -> int:
    return max(1, (n - 1).bit_length())


def _accept(protocol: ProtocolSpec, side: str) -> str:
    terms = []
    for s in protocol.backward:
        if s.role in ("ack", "ready"):
            terms.append(s.name(side))
        elif s.role == "full":
            terms.append(f"!{s.name(side)}")
    return " && ".join(terms) if terms else "1'b1"


def _strobe(protocol: ProtocolSpec):
    return [s for s in protocol.forward if s.role != "data"][0]


def _decl(d: str, name: str, bits: int) -> str:
    rng = f"[{bits - 1}:0] " if bits > 1 else ""
    return f"{d} wire {rng}{name}"


def _wire(name: str, bits: int) -> str:
    rng = f"[{bits - 1}:0] " if bits > 1 else ""
    return f"    wire {rng}{name};"


def _module(name: str, decls, body, params: str = "") -> str:
    head = f"module {name} {params}(" if params else f"module {name} ("
    return "\n".join([head, ",\n".join(f"    {d}" for d in decls), ");", ""] + body + ["", "endmodule"]) + "\n"


def _inst(module: str, name: str, bindings, params=()) -> list:
    head = f"    {module} "
    if params:
        head += "#(" + ", ".join(f".{k}({v})" for k, v in params) + ") "
    return [head + f"{name} (", ",\n".join(f"        .{p}({n})" for p, n in bindings), "    );"]


def emit_axil_slave() -> str:
    decls = ["input wire clk", "input wire rstn",
             "input wire [AW-1:0] awaddr", "input wire awvalid", "output wire awready",
             "input wire [31:0] wdata", "input wire wvalid", "output wire wready",
             "output wire [1:0] bresp", "output reg bvalid", "input wire bready",
             "input wire [AW-1:0] araddr", "input wire arvalid", "output wire arready",
             "output reg [31:0] rdata", "output wire [1:0] rresp", "output reg rvalid", "input wire rready",
             "output wire bus_we", "output wire [AW-1:0] bus_waddr", "output wire [31:0] bus_wdata",
             "output wire [AW-1:0] bus_raddr", "input wire [31:0] bus_rdata"]
    body = [
        "    // single-beat slave: a write needs address and data together",
        "    assign awready = awvalid && wvalid && !bvalid;",
        "    assign wready = awready;",
        "    assign bresp = 2'b00;",
        "    assign bus_we = awready;",
        "    assign bus_waddr = awaddr;",
        "    assign bus_wdata = wdata;",
        "    assign arready = arvalid && !rvalid;",
        "    assign rresp = 2'b00;",
        "    assign bus_raddr = araddr;",
        "",
        "    always @(posedge clk) begin",
        "        if (!rstn) begin",
        "            bvalid <= 1'b0;",
        "            rvalid <= 1'b0;",
        "            rdata <= 32'd0;",
        "        end else begin",
        "            if (awready)",
        "                bvalid <= 1'b1;",
        "            else if (bready)",
        "                bvalid <= 1'b0;",
        "            if (arready) begin",
        "                rvalid <= 1'b1;",
        "                rdata <= bus_rdata;",
        "            end else if (rready)",
        "                rvalid <= 1'b0;",
        "        end",
        "    end",
    ]
    return "// AXI4-Lite slave reduced to a register bus\n" + _module(
        "mdc_axil_slave", decls, body, "#(parameter AW = 8) ")


def emit_cfg_regs(plan: TilPlan, aw: int) -> str:
    regs = plan.registers
    decls = ["input wire clk", "input wire rstn", "input wire bus_we",
             f"input wire [{aw - 1}:0] bus_waddr", "input wire [31:0] bus_wdata",
             f"input wire [{aw - 1}:0] bus_raddr", "output wire [31:0] bus_rdata",
             "input wire done", "output wire start", "output wire [7:0] kernel_id"]
    decls += [f"output wire [31:0] {r.name}" for r in regs[1:]]
    body = [f"    reg [31:0] r{r.index};" for r in regs]
    body += ["    reg start_q;", "    reg done_q;", "",
             "    assign start = start_q;",
             "    assign kernel_id = r0[31:24];"]
    body += [f"    assign {r.name} = r{r.index};" for r in regs[1:]]
    mux = "{r0[31:2], done_q, r0[0]}"
    arms = [f"(bus_raddr[{aw - 1}:2] == {r.index}) ? r{r.index} :" for r in regs[1:]]
    body.append("    assign bus_rdata = (bus_raddr[%d:2] == 0) ? %s :" % (aw - 1, mux))
    for a in arms:
        body.append(f"                       {a}")
    body.append("                       32'd0;")
    body += ["", "    always @(posedge clk) begin", "        if (!rstn) begin"]
    body += [f"            r{r.index} <= 32'd0;" for r in regs]
    body += ["            start_q <= 1'b0;", "            done_q <= 1'b0;", "        end else begin",
             f"            start_q <= bus_we && (bus_waddr[{aw - 1}:2] == 0) && bus_wdata[0];"]
    for r in regs:
        body.append(f"            if (bus_we && (bus_waddr[{aw - 1}:2] == {r.index}))")
        body.append(f"                r{r.index} <= bus_wdata;")
    body += ["            if (start_q)", "                done_q <= 1'b0;",
             "            else if (done)", "                done_q <= 1'b1;",
             "        end", "    end"]
    return "// configuration registers: 0 = kernel id/start/done, then sizes and parameters\n" + _module(
        f"{plan.ip_name}_cfg", decls, body)


def emit_local_mem() -> str:
    decls = ["input wire clk",
             "input wire a_we", "input wire [AW-1:0] a_waddr", "input wire [31:0] a_wdata",
             "input wire [AW-1:0] a_raddr", "output wire [31:0] a_rdata",
             "input wire b_we", "input wire [AW-1:0] b_addr", "input wire [31:0] b_wdata",
             "output wire [31:0] b_rdata"]
    body = ["    reg [31:0] mem [0:WORDS-1];", "",
            "    assign a_rdata = mem[a_raddr];",
            "    assign b_rdata = mem[b_addr];", "",
            "    always @(posedge clk) begin",
            "        if (a_we)",
            "            mem[a_waddr] <= a_wdata;",
            "    end", "",
            "    always @(posedge clk) begin",
            "        if (b_we)",
            "            mem[b_addr] <= b_wdata;",
            "    end"]
    return "// one local-memory segment: bus side (a) and core side (b)\n" + _module(
        "mdc_local_mem", decls, body, "#(parameter WORDS = 256, parameter AW = 8) ")


def _sig_decls(protocol: ProtocolSpec, side: str, consumer: bool) -> list:
    out = []
    for s in protocol.signals:
        d = "input" if consumer == (s.direction == FORWARD) else "output"
        rng = "[WIDTH-1:0] " if s.width == "port" else (f"[{int(s.width) - 1}:0] " if int(s.width) > 1 else "")
        out.append(f"{d} wire {rng}{s.name(side)}")
    return out


def emit_front_end(protocol: ProtocolSpec) -> str:
    strobe = _strobe(protocol)
    decls = ["input wire clk", "input wire rstn", "input wire start", "input wire [31:0] size",
             "output wire [AW-1:0] mem_addr", "input wire [31:0] mem_rdata"]
    decls += _sig_decls(protocol, "out", False)
    body = ["    reg [31:0] count;", "    reg active;", "    wire take;", "",
            "    assign mem_addr = count[AW-1:0];",
            f"    assign {protocol.data.name('out')} = mem_rdata[WIDTH-1:0];",
            f"    assign {strobe.name('out')} = active && (count < size);",
            f"    assign take = {strobe.name('out')} && {_accept(protocol, 'out')};", "",
            "    always @(posedge clk) begin",
            "        if (!rstn) begin",
            "            count <= 32'd0;",
            "            active <= 1'b0;",
            "        end else if (start) begin",
            "            count <= 32'd0;",
            "            active <= 1'b1;",
            "        end else if (take)",
            "            count <= count + 1;",
            "    end"]
    return "// streams one memory segment into a core input\n" + _module(
        "mdc_front_end", decls, body, "#(parameter WIDTH = 32, parameter AW = 8) ")


def emit_back_end(protocol: ProtocolSpec) -> str:
    strobe = _strobe(protocol)
    decls = ["input wire clk", "input wire rstn", "input wire start", "input wire [31:0] size",
             "output wire mem_we", "output wire [AW-1:0] mem_addr", "output wire [31:0] mem_wdata"]
    decls += _sig_decls(protocol, "in", True)
    decls.append("output wire done")
    body = ["    reg [31:0] count;", "    reg active;", "    wire room;", "    wire take;", "",
            "    assign room = active && (count < size);",
            f"    assign take = room && {strobe.name('in')};",
            "    assign mem_we = take;",
            "    assign mem_addr = count[AW-1:0];",
            f"    assign mem_wdata = {protocol.data.name('in')};",
            "    assign done = active && (count == size);"]
    for s in protocol.backward:
        val = {"ack": "take", "ready": "room", "full": "!room"}[s.role]
        body.append(f"    assign {s.name('in')} = {val};")
    body += ["",
             "    always @(posedge clk) begin",
             "        if (!rstn) begin",
             "            count <= 32'd0;",
             "            active <= 1'b0;",
             "        end else if (start) begin",
             "            count <= 32'd0;",
             "            active <= 1'b1;",
             "        end else if (take)",
             "            count <= count + 1;",
             "    end"]
    return "// drains a core output into one memory segment\n" + _module(
        "mdc_back_end", decls, body, "#(parameter WIDTH = 32, parameter AW = 8) ")


def emit_out_counter() -> str:
    decls = ["input wire clk", "input wire rstn", "input wire start", "input wire [31:0] size",
             "input wire beat", "output wire last", "output wire done"]
    body = ["    reg [31:0] count;", "    reg active;", "",
            "    assign last = active && (count + 1 == size);",
            "    assign done = active && (count == size);", "",
            "    always @(posedge clk) begin",
            "        if (!rstn) begin",
            "            count <= 32'd0;",
            "            active <= 1'b0;",
            "        end else if (start) begin",
            "            count <= 32'd0;",
            "            active <= 1'b1;",
            "        end else if (beat && active && (count < size))",
            "            count <= count + 1;",
            "    end"]
    return "// counts output beats to mark the last one of a transfer\n" + _module(
        "mdc_out_counter", decls, body)


def _axil_ports(prefix: str, aw: int) -> list:
    return [_decl("input", f"{prefix}_awaddr", aw), _decl("input", f"{prefix}_awvalid", 1),
            _decl("output", f"{prefix}_awready", 1), _decl("input", f"{prefix}_wdata", 32),
            _decl("input", f"{prefix}_wvalid", 1), _decl("output", f"{prefix}_wready", 1),
            _decl("output", f"{prefix}_bresp", 2), _decl("output", f"{prefix}_bvalid", 1),
            _decl("input", f"{prefix}_bready", 1), _decl("input", f"{prefix}_araddr", aw),
            _decl("input", f"{prefix}_arvalid", 1), _decl("output", f"{prefix}_arready", 1),
            _decl("output", f"{prefix}_rdata", 32), _decl("output", f"{prefix}_rresp", 2),
            _decl("output", f"{prefix}_rvalid", 1), _decl("input", f"{prefix}_rready", 1)]


def _axil_inst(prefix: str, aw: int, bus: str) -> list:
    b = [("clk", "s00_axi_aclk"), ("rstn", "s00_axi_aresetn")]
    for sig in ("awaddr", "awvalid", "awready", "wdata", "wvalid", "wready", "bresp", "bvalid",
                "bready", "araddr", "arvalid", "arready", "rdata", "rresp", "rvalid", "rready"):
        b.append((sig, f"{prefix}_{sig}"))
    b += [("bus_we", f"{bus}_we"), ("bus_waddr", f"{bus}_waddr"), ("bus_wdata", f"{bus}_wdata"),
          ("bus_raddr", f"{bus}_raddr"), ("bus_rdata", f"{bus}_rdata")]
    return _inst("mdc_axil_slave", f"{prefix}_if", b, (("AW", aw),))


def emit_til_top(plan: TilPlan, m: MultiDataflow, protocol: ProtocolSpec) -> str:
    ip = plan.ip_name
    aw_reg = max(4, _bits(len(plan.registers) * 4))
    decls = [_decl("input", "s00_axi_aclk", 1), _decl("input", "s00_axi_aresetn", 1)]
    decls += _axil_ports("s00_axi", aw_reg)
    words = plan.mem_words
    wa = _bits(words)
    wb = wa + 2
    sb = _bits(max(2, len(plan.segments)))
    aw_mem = wb + sb
    if plan.variant == MM:
        decls += _axil_ports("s01_axi", aw_mem)
    else:
        for p in plan.inputs:
            decls += [_decl("input", f"s_axis_{p}_tdata", 32), _decl("input", f"s_axis_{p}_tvalid", 1),
                      _decl("output", f"s_axis_{p}_tready", 1)]
        for p in plan.outputs:
            decls += [_decl("output", f"m_axis_{p}_tdata", 32), _decl("output", f"m_axis_{p}_tvalid", 1),
                      _decl("input", f"m_axis_{p}_tready", 1), _decl("output", f"m_axis_{p}_tlast", 1)]

    body = [_wire("rst", 1), _wire("reg_we", 1), _wire("reg_waddr", aw_reg), _wire("reg_wdata", 32),
            _wire("reg_raddr", aw_reg), _wire("reg_rdata", 32),
            _wire("start", 1), _wire("done", 1), _wire("kernel_id", 8)]
    body += [_wire(r.name, 32) for r in plan.registers[1:]]
    # core-side wires, one per protocol signal of every boundary port
    for p in m.base.ports:
        for s in protocol.signals:
            body.append(_wire(f"w_core_{p.name}_{s.role}", s.bits(p.width)))
    if plan.variant == MM:
        body += [_wire("mem_we", 1), _wire("mem_waddr", aw_mem), _wire("mem_wdata", 32),
                 _wire("mem_raddr", aw_mem), _wire("mem_rdata", 32)]
        for sgm in plan.segments:
            i = sgm.index
            body += [_wire(f"seg{i}_we", 1), _wire(f"seg{i}_rdata", 32), _wire(f"seg{i}_b_we", 1),
                     _wire(f"seg{i}_b_addr", wa), _wire(f"seg{i}_b_wdata", 32), _wire(f"seg{i}_b_rdata", 32)]
        body += [_wire(f"done_{p}", 1) for p in plan.outputs]
    else:
        body += [_wire(f"done_{p}", 1) for p in plan.outputs]
    body.append("")
    body.append("    assign rst = !s00_axi_aresetn;")
    body.append("    assign done = " + " && ".join(f"done_{p}" for p in plan.outputs) + ";")
    strobe = _strobe(protocol)
    data = protocol.data

    def core(p, role):
        return f"w_core_{p}_{role}"

    for p in plan.params:
        w = plan.widths[p]
        body.append(f"    assign {core(p, data.role)} = param_{p}[{w - 1}:0];")
        body.append(f"    assign {core(p, strobe.role)} = 1'b1;")
    if plan.variant == MM:
        body.append("    assign mem_rdata = " + "\n                       ".join(
            f"(mem_raddr[{aw_mem - 1}:{wb}] == {k}) ? seg{s.index}_rdata :"
            for k, s in enumerate(plan.segments)) + "\n                       32'd0;")
        for k, s in enumerate(plan.segments):
            body.append(f"    assign seg{s.index}_we = mem_we && (mem_waddr[{aw_mem - 1}:{wb}] == {k});")
            if s.port in plan.inputs:
                body.append(f"    assign seg{s.index}_b_we = 1'b0;")
                body.append(f"    assign seg{s.index}_b_wdata = 32'd0;")
    else:
        for p in plan.inputs:
            w = plan.widths[p]
            body.append(f"    assign {core(p, data.role)} = s_axis_{p}_tdata[{w - 1}:0];")
            body.append(f"    assign {core(p, strobe.role)} = s_axis_{p}_tvalid;")
            terms = []
            for s in protocol.backward:
                if s.role in ("ack", "ready"):
                    terms.append(core(p, s.role))
                elif s.role == "full":
                    terms.append(f"!{core(p, s.role)}")
            ready = " && ".join(terms) if terms else "1'b1"
            body.append(f"    assign s_axis_{p}_tready = {ready};")
        for p in plan.outputs:
            w = plan.widths[p]
            src = core(p, data.role) if w == 32 else f"{{{{{32 - w}{{1'b0}}}}, {core(p, data.role)}}}"
            body.append(f"    assign m_axis_{p}_tdata = {src};")
            body.append(f"    assign m_axis_{p}_tvalid = {core(p, strobe.role)};")
            for s in protocol.backward:
                val = {"ack": f"m_axis_{p}_tvalid && m_axis_{p}_tready", "ready": f"m_axis_{p}_tready",
                       "full": f"!m_axis_{p}_tready"}[s.role]
                body.append(f"    assign {core(p, s.role)} = {val};")
    body.append("")
    body += _axil_inst("s00_axi", aw_reg, "reg")
    body.append("")
    cb = [("clk", "s00_axi_aclk"), ("rstn", "s00_axi_aresetn"), ("bus_we", "reg_we"),
          ("bus_waddr", "reg_waddr"), ("bus_wdata", "reg_wdata"), ("bus_raddr", "reg_raddr"),
          ("bus_rdata", "reg_rdata"), ("done", "done"), ("start", "start"), ("kernel_id", "kernel_id")]
    cb += [(r.name, r.name) for r in plan.registers[1:]]
    body += _inst(f"{ip}_cfg", "cfg", cb)
    if plan.variant == MM:
        body.append("")
        body += _axil_inst("s01_axi", aw_mem, "mem")
        for s in plan.segments:
            i = s.index
            body.append("")
            body += _inst("mdc_local_mem", f"mem{i}", [
                ("clk", "s00_axi_aclk"), ("a_we", f"seg{i}_we"), ("a_waddr", f"mem_waddr[{wb - 1}:2]"),
                ("a_wdata", "mem_wdata"), ("a_raddr", f"mem_raddr[{wb - 1}:2]"), ("a_rdata", f"seg{i}_rdata"),
                ("b_we", f"seg{i}_b_we"), ("b_addr", f"seg{i}_b_addr"), ("b_wdata", f"seg{i}_b_wdata"),
                ("b_rdata", f"seg{i}_b_rdata")], (("WORDS", words), ("AW", wa)))
            body.append("")
            p = s.port
            common = [("clk", "s00_axi_aclk"), ("rstn", "s00_axi_aresetn"), ("start", "start"),
                      ("size", f"size_{p}")]
            if p in plan.inputs:
                b = common + [("mem_addr", f"seg{i}_b_addr"), ("mem_rdata", f"seg{i}_b_rdata")]
                b += [(s2.name("out"), core(p, s2.role)) for s2 in protocol.signals]
                body += _inst("mdc_front_end", f"fe_{p}", b, (("WIDTH", plan.widths[p]), ("AW", wa)))
            else:
                b = common + [("mem_we", f"seg{i}_b_we"), ("mem_addr", f"seg{i}_b_addr"),
                              ("mem_wdata", f"seg{i}_b_wdata")]
                b += [(s2.name("in"), core(p, s2.role)) for s2 in protocol.signals]
                b.append(("done", f"done_{p}"))
                body += _inst("mdc_back_end", f"be_{p}", b, (("WIDTH", plan.widths[p]), ("AW", wa)))
    else:
        for p in plan.outputs:
            body.append("")
            body += _inst("mdc_out_counter", f"cnt_{p}", [
                ("clk", "s00_axi_aclk"), ("rstn", "s00_axi_aresetn"), ("start", "start"),
                ("size", f"size_{p}"), ("beat", f"m_axis_{p}_tvalid && m_axis_{p}_tready"),
                ("last", f"m_axis_{p}_tlast"), ("done", f"done_{p}")])
    body.append("")
    cb = [(protocol.clock, "s00_axi_aclk"), (protocol.reset, "rst")]
    if plan.id_bits:
        cb.append(("cfg_id", f"kernel_id[{plan.id_bits - 1}:0]"))
    for p in m.base.ports:
        cb += [(s.name(p.name), core(p.name, s.role)) for s in protocol.signals]
    body += _inst(m.base.name, "core", cb)
    kind = "memory-mapped" if plan.variant == MM else "stream"
    return f"// {kind} interface layer around {m.base.name}\n" + _module(ip, decls, body)


def emit_til_hdl(plan: TilPlan, m: MultiDataflow, protocol: ProtocolSpec = DEFAULT_PROTOCOL) -> dict:
    aw_reg = max(4, _bits(len(plan.registers) * 4))
    files = {
        f"{plan.ip_name}.v": emit_til_top(plan, m, protocol),
        f"{plan.ip_name}_cfg.v": emit_cfg_regs(plan, aw_reg),
        "mdc_axil_slave.v": emit_axil_slave(),
    }
    if plan.variant == MM:
        files["mdc_local_mem.v"] = emit_local_mem()
        files["mdc_front_end.v"] = emit_front_end(protocol)
        files["mdc_back_end.v"] = emit_back_end(protocol)
    else:
        files["mdc_out_counter.v"] = emit_out_counter()
    return dict(sorted(files.items()))


# ---------------------------------------------------------------------------
# TCL scripts


def _ip_cells(cfg: DeploymentConfig, io_ports) -> list:
    """(cell name, vlnv key) for every glue IP the integration script creates."""
    cells = []
    for name, n in instantiated_ips(cfg, io_ports):
        key = {IP_INTERCONNECT: "axi_interconnect", IP_CDMA: "axi_cdma", IP_DMA: "axi_dma",
               IP_DATA_FIFO: "axis_data_fifo", IP_STREAM_FIFO: "axi_fifo_mm_s"}[name]
        for k in range(n):
            cells.append((f"{key}_{k}", key))
    return cells


def emit_scripts(cfg: DeploymentConfig, plan: TilPlan, hdl_files, driver_files) -> dict:
    ip = cfg.ip_name
    settings = [
        "###########################",
        "# Settings",
        "###########################",
        "",
        "set iproot [file dirname [file normalize [info script]]]/..",
        "set ipdir $iproot/ip",
        "set projdir $iproot/project",
        "set hdl_files_path [list " + " ".join(f"$iproot/hdl/{f}" for f in hdl_files) + "]",
        "",
        "# FPGA device",
        f'set partname "{cfg.part}"',
        f'set boardpart "{cfg.board}"',
        "",
    ]
    gen_ip = ["# IP packaging: run with vivado -mode batch -source generate_ip.tcl"] + settings + [
        "# Design name",
        f'set ip_name "{ip}"',
        "set design $ip_name",
        "",
        "###########################",
        "# Create IP",
        "###########################",
        "",
        "create_project -force $design $ipdir -part $partname",
        "set_property board_part $boardpart [current_project]",
        "set_property target_language Verilog [current_project]",
        "",
        "add_files $hdl_files_path",
        "import_files -force",
        "",
        "# actor library: external HDL components, compiled into their own library",
        "if {[file isdirectory $iproot/lib/caph]} {",
        "    set files [glob -nocomplain -tails -directory $iproot/lib/caph/ *]",
        "    foreach f $files {",
        "        add_files $iproot/lib/caph/$f",
        "        set_property library caph [get_files $iproot/lib/caph/$f]",
        "    }",
        "}",
        "",
        "set_property top $ip_name [current_fileset]",
        "",
        "ipx::package_project -root_dir $ipdir -vendor user.org \\",
        "    -library user -taxonomy AXI_Peripheral",
        "",
        "ipx::add_address_block s00_axi_reg \\",
        "    [ipx::get_memory_maps s00_axi -of_objects [ipx::current_core]]",
    ]
    if plan.variant == MM:
        gen_ip += ["ipx::add_address_block s01_axi_mem \\",
                   "    [ipx::get_memory_maps s01_axi -of_objects [ipx::current_core]]"]
    gen_ip += [
        "",
        "file copy -force $iproot/drivers $ipdir",
        "set drivers_dir drivers",
        "ipx::add_file_group -type software_driver {} [ipx::current_core]",
    ]
    for f in driver_files:
        gen_ip.append(f"ipx::add_file $drivers_dir/{f} "
                      "[ipx::get_file_groups xilinx_softwaredriver -of_objects [ipx::current_core]]")
    gen_ip += [
        "",
        f"set_property version {cfg.ip_version} [ipx::current_core]",
        "set_property core_revision 1 [ipx::current_core]",
        "ipx::create_xgui_files [ipx::current_core]",
        "ipx::update_checksums [ipx::current_core]",
        "ipx::save_core [ipx::current_core]",
        "set_property ip_repo_paths $ipdir [current_project]",
        "update_ip_catalog",
        "close_project",
    ]

    io = (len(plan.inputs), len(plan.outputs))
    top = ["# system integration: run after generate_ip.tcl"] + settings + [
        "# Design name",
        "set design system",
        'set bd_design "design_1"',
        f'set ip_name "{ip}"',
        f'set ip_version "{cfg.ip_version}"',
        "",
        "###########################",
        "# Create Project",
        "###########################",
        "create_project -force $design $projdir -part $partname",
        "set_property board_part $boardpart [current_project]",
        "set_property target_language Verilog [current_project]",
        "set_property ip_repo_paths $ipdir [current_project]",
        "update_ip_catalog -rebuild -scan_changes",
        "",
        "###########################",
        "# Create block design",
        "###########################",
        "create_bd_design $bd_design",
        "",
    ]
    if cfg.processor == ARM:
        proc = "processing_system7_0"
        top += ["# Zynq PS",
                f"create_bd_cell -type ip -vlnv {VLNV['processing_system7']} {proc}",
                "apply_bd_automation -rule xilinx.com:bd_rule:processing_system7 "
                f"-config {{make_external \"FIXED_IO, DDR\"}} [get_bd_cells {proc}]"]
        master = f"/{proc}/M_AXI_GP0"
    else:
        proc = "microblaze_0"
        top += ["# MicroBlaze",
                f"create_bd_cell -type ip -vlnv {VLNV['microblaze']} {proc}",
                "apply_bd_automation -rule xilinx.com:bd_rule:microblaze "
                f"-config {{local_mem \"64KB\" axi_periph \"Enabled\"}} [get_bd_cells {proc}]"]
        master = f"/{proc} (Periph)"
    top += ["",
            "# accelerator IP",
            "create_bd_cell -type ip -vlnv user.org:user:$ip_name:$ip_version ${ip_name}_0",
            "apply_bd_automation -rule xilinx.com:bd_rule:axi4 "
            f"-config {{Master \"{master}\"}} [get_bd_intf_pins ${{ip_name}}_0/s00_axi]"]
    if plan.variant == MM:
        top.append("apply_bd_automation -rule xilinx.com:bd_rule:axi4 "
                   f"-config {{Master \"{master}\"}} [get_bd_intf_pins ${{ip_name}}_0/s01_axi]")
    for cell, key in _ip_cells(cfg, io):
        top += ["", f"# {key}"]
        if key == "axi_interconnect":
            top.append(f"# {cell} is created by the axi4 automation rule above")
            continue
        top.append(f"create_bd_cell -type ip -vlnv {VLNV[key]} {cell}")
        if key in ("axi_cdma", "axi_dma"):
            top.append(f"set_property -dict [list CONFIG.C_INCLUDE_SG {{0}}] [get_bd_cells {cell}]")
            top.append("apply_bd_automation -rule xilinx.com:bd_rule:axi4 "
                       f"-config {{Master \"{master}\"}} [get_bd_intf_pins {cell}/S_AXI_LITE]")
        elif key == "axi_fifo_mm_s":
            top.append("apply_bd_automation -rule xilinx.com:bd_rule:axi4 "
                       f"-config {{Master \"{master}\"}} [get_bd_intf_pins {cell}/S_AXI]")
    if plan.variant == STREAM:
        top += ["", "# stream links"]
        top += _stream_links(cfg, plan)
    top += ["",
            "validate_bd_design",
            "save_bd_design",
            "make_wrapper -files [get_files $projdir/$design.srcs/sources_1/bd/$bd_design/$bd_design.bd] -top",
            "add_files -norecurse $projdir/$design.srcs/sources_1/bd/$bd_design/hdl/${bd_design}_wrapper.v",
            "update_compile_order -fileset sources_1",
            "close_project"]
    return {"generate_ip.tcl": "\n".join(gen_ip) + "\n", "generate_top.tcl": "\n".join(top) + "\n"}


def _stream_links(cfg: DeploymentConfig, plan: TilPlan) -> list:
    out = []
    acc = "${ip_name}_0"
    for p in plan.inputs:
        k = _stream_unit(plan, cfg, p)
        if cfg.dma:
            src = f"axi_dma_{k}/M_AXIS_MM2S"
        elif cfg.processor == ARM:
            src = f"axi_fifo_mm_s_{k}/AXI_STR_TXD"
        else:
            src = f"microblaze_0/M{k}_AXIS"
        if cfg.processor == MICROBLAZE or cfg.dma:
            fifo = f"axis_data_fifo_{(plan.inputs + plan.outputs).index(p)}"
            out.append(f"connect_bd_intf_net [get_bd_intf_pins {src}] [get_bd_intf_pins {fifo}/S_AXIS]")
            src = f"{fifo}/M_AXIS"
        out.append(f"connect_bd_intf_net [get_bd_intf_pins {src}] [get_bd_intf_pins {acc}/s_axis_{p}]")
    for p in plan.outputs:
        k = _stream_unit(plan, cfg, p)
        if cfg.dma:
            dst = f"axi_dma_{k}/S_AXIS_S2MM"
        elif cfg.processor == ARM:
            dst = f"axi_fifo_mm_s_{k}/AXI_STR_RXD"
        else:
            dst = f"microblaze_0/S{k}_AXIS"
        src = f"{acc}/m_axis_{p}"
        if cfg.processor == MICROBLAZE or cfg.dma:
            fifo = f"axis_data_fifo_{(plan.inputs + plan.outputs).index(p)}"
            out.append(f"connect_bd_intf_net [get_bd_intf_pins {src}] [get_bd_intf_pins {fifo}/S_AXIS]")
            src = f"{fifo}/M_AXIS"
        out.append(f"connect_bd_intf_net [get_bd_intf_pins {src}] [get_bd_intf_pins {dst}]")
    return out


def manifest(cfg: DeploymentConfig, plan: TilPlan) -> dict:
    io = (len(plan.inputs), len(plan.outputs))
    return {
        "format": "copr/1",
        "ip_name": cfg.ip_name,
        "processor": cfg.processor,
        "coupling": cfg.coupling,
        "dma": cfg.dma,
        "part": cfg.part,
        "board": cfg.board,
        "io_ports": {"inputs": list(plan.inputs), "outputs": list(plan.outputs),
                     "parameters": list(plan.params)},
        "additional_ips": [{"ip": n, "count": k} for n, k in additional_ips(cfg, io)],
        "instantiated_ips": [{"ip": n, "count": k} for n, k in instantiated_ips(cfg, io)],
        "registers": [{"index": r.index, "name": r.name, "role": r.role} for r in plan.registers],
        "memory_segments": [{"index": s.index, "port": s.port, "offset": s.offset, "words": s.words}
                            for s in plan.segments],
        "kernel_ids": dict(sorted(plan.kernel_ids.items(), key=lambda kv: kv[1])),
    }
