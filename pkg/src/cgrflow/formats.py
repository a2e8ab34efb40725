"""Readers and writers for the on-disk formats.

* ``*.df.json`` / ``*.xdf``: dataflow networks (JSON schema or XDF subset)
* ``*.protocol.xml``: inter-PE communication protocol
* ``*.mdf.json`` / ``*.ctab.json``: merged network and configuration table

Schemas are documented in ``docs/formats.md``.
"""
from __future__ import annotations

import json
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .ir import (ACTOR_KINDS, ATOMIC, HIERARCHICAL, IN, OUT, Actor, Channel, DataflowNetwork,
                 Endpoint, Port, check, channel_sort_key)
from .multiflow import ConfigRow, ConfigurationTable, MultiDataflow

IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
DEFAULT_DEPTH = 1


class ParseError(ValueError):
    """Syntax or schema error with a source position when one is known."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None,
                 source: str = ""):
        where = ""
        if line is not None:
            where = f"{source or '<input>'}:{line}:{column or 0}: "
        super().__init__(where + message)
        self.line = line
        self.column = column


def _ident(value, what: str) -> str:
    if not isinstance(value, str) or not IDENT.match(value):
        raise ParseError(f"invalid {what} identifier {value!r}")
    return value


def _width(value, what: str) -> int:
    try:
        w = int(value)
    except (TypeError, ValueError):
        raise ParseError(f"{what}: width {value!r} is not an integer") from None
    if w <= 0:
        raise ParseError(f"{what}: width must be positive, got {w}")
    return w


def _endpoint(text: str) -> Endpoint:
    if "." in text:
        actor, port = text.split(".", 1)
        return Endpoint(_ident(actor, "actor"), _ident(port, "port"))
    return Endpoint(None, _ident(text, "port"))


def _endpoint_str(ep: Endpoint) -> str:
    return str(ep)


# ---------------------------------------------------------------------------
# JSON networks


def network_from_dict(d: dict, path: str = "$") -> DataflowNetwork:
    if not isinstance(d, dict):
        raise ParseError(f"{path}: expected an object")
    try:
        name = _ident(d["name"], "network")
        ports = tuple(
            Port(_ident(p["name"], "port"), _direction(p["direction"], f"{path}.ports"),
                 _width(p["width"], f"port {p['name']}"))
            for p in d.get("ports", [])
        )
        actors = []
        for i, a in enumerate(d.get("actors", [])):
            apath = f"{path}.actors[{i}]"
            kind = a.get("kind", ATOMIC)
            if kind not in ACTOR_KINDS:
                raise ParseError(f"{apath}: unknown actor kind {kind!r}")
            sub = None
            if "subnetwork" in a:
                sub = network_from_dict(a["subnetwork"], apath + ".subnetwork")
                kind = HIERARCHICAL
            aports = tuple(
                Port(_ident(p["name"], "port"), _direction(p["direction"], apath),
                     _width(p["width"], f"{a['name']}.{p['name']}"), bool(p.get("open", False)))
                for p in a.get("ports", [])
            )
            actors.append(Actor(_ident(a["name"], "actor"), _ident(a["type"], "component type"),
                                aports, kind, sub))
        channels = []
        for i, c in enumerate(d.get("channels", [])):
            depth = int(c.get("depth", DEFAULT_DEPTH))
            channels.append(Channel(_endpoint(c["src"]), _endpoint(c["dst"]), depth))
    except KeyError as e:
        raise ParseError(f"{path}: missing key {e.args[0]!r}") from None
    return DataflowNetwork(name, tuple(actors), tuple(channels), ports)


def _direction(v, where):
    if v not in (IN, OUT):
        raise ParseError(f"{where}: direction must be 'in' or 'out', got {v!r}")
    return v


def network_to_dict(net: DataflowNetwork) -> dict:
    out = {"name": net.name, "ports": [], "actors": [], "channels": []}
    for p in net.ports:
        out["ports"].append({"name": p.name, "direction": p.direction, "width": p.width})
    for a in net.actors:
        ad = {"name": a.name, "type": a.component, "kind": a.kind, "ports": []}
        for p in a.ports:
            pd = {"name": p.name, "direction": p.direction, "width": p.width}
            if p.open:
                pd["open"] = True
            ad["ports"].append(pd)
        if a.subnetwork is not None:
            ad["subnetwork"] = network_to_dict(a.subnetwork)
        out["actors"].append(ad)
    for c in net.channels:
        out["channels"].append({"src": _endpoint_str(c.src), "dst": _endpoint_str(c.dst),
                                "depth": c.depth})
    return out


def _load_json(text: str, source: str = ""):
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, e.lineno, e.colno, source) from None


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


# ---------------------------------------------------------------------------
# XDF subset


def _xdf_port(el, owner: str) -> Port:
    name = _ident(el.get("name"), "port")
    kind = el.get("kind")
    if kind not in ("Input", "Output"):
        raise ParseError(f"{owner}: port '{name}' kind must be Input or Output")
    size = el.get("size")
    if size is None:
        # ORCC style: <Type><Entry name="size"><Expr value=".."/></Entry></Type>
        expr = el.find("./Type/Entry[@name='size']/Expr")
        size = expr.get("value") if expr is not None else None
    if size is None:
        raise ParseError(f"{owner}: port '{name}' has no size")
    return Port(name, IN if kind == "Input" else OUT, _width(size, f"{owner}.{name}"),
                el.get("open", "false").lower() == "true")


def _xdf_network(root, source: str) -> DataflowNetwork:
    if root.tag != "XDF":
        raise ParseError(f"expected <XDF> root, found <{root.tag}>", source=source)
    name = _ident(root.get("name"), "network")
    ports = tuple(_xdf_port(p, name) for p in root.findall("Port"))
    actors = []
    for inst in root.findall("Instance"):
        aname = _ident(inst.get("id"), "instance")
        cls = inst.find("Class")
        if cls is None:
            raise ParseError(f"instance '{aname}' has no <Class>")
        sub_el = inst.find("XDF")
        sub = _xdf_network(sub_el, source) if sub_el is not None else None
        kind = inst.get("kind", HIERARCHICAL if sub is not None else ATOMIC)
        if kind not in ACTOR_KINDS:
            raise ParseError(f"instance '{aname}': unknown kind {kind!r}")
        aports = tuple(_xdf_port(p, aname) for p in inst.findall("Port"))
        actors.append(Actor(aname, _ident(cls.get("name"), "component type"), aports, kind, sub))
    channels = []
    for conn in root.findall("Connection"):
        src = Endpoint(conn.get("src") or None, _ident(conn.get("src-port"), "port"))
        dst = Endpoint(conn.get("dst") or None, _ident(conn.get("dst-port"), "port"))
        depth = DEFAULT_DEPTH
        for attr in conn.findall("Attribute"):
            if attr.get("name") == "bufferSize":
                expr = attr.find("Expr")
                if expr is None or expr.get("value") is None:
                    raise ParseError(f"connection {src}->{dst}: bufferSize without value")
                depth = int(expr.get("value"))
        channels.append(Channel(src, dst, depth))
    return DataflowNetwork(name, tuple(actors), tuple(channels), ports)


def _xdf_port_el(parent, p: Port):
    el = ET.SubElement(parent, "Port", kind="Input" if p.direction == IN else "Output",
                       name=p.name, size=str(p.width))
    if p.open:
        el.set("open", "true")
    return el


def _xdf_build(net: DataflowNetwork, parent=None):
    root = ET.Element("XDF") if parent is None else ET.SubElement(parent, "XDF")
    root.set("name", net.name)
    for p in net.ports:
        _xdf_port_el(root, p)
    for a in net.actors:
        inst = ET.SubElement(root, "Instance", id=a.name, kind=a.kind)
        ET.SubElement(inst, "Class", name=a.component)
        for p in a.ports:
            _xdf_port_el(inst, p)
        if a.subnetwork is not None:
            _xdf_build(a.subnetwork, inst)
    for c in net.channels:
        conn = ET.SubElement(root, "Connection", src=c.src.actor or "", **{"src-port": c.src.port},
                             dst=c.dst.actor or "", **{"dst-port": c.dst.port})
        attr = ET.SubElement(conn, "Attribute", kind="Value", name="bufferSize")
        ET.SubElement(attr, "Expr", kind="Literal", **{"literal-kind": "Integer"}, value=str(c.depth))
    return root


def network_to_xdf(net: DataflowNetwork) -> str:
    root = _xdf_build(net)
    ET.indent(root)
    return '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(root, encoding="unicode") + "\n"


# ---------------------------------------------------------------------------
# public entry points for networks


def parse_network(source: str, fmt: str, *, origin: str = "", validate: bool = True) -> DataflowNetwork:
    """Parse a network document. ``fmt`` is ``"json"`` or ``"xdf"``.

    With ``validate`` the result is checked (see :func:`cgrflow.ir.validate`)
    and a :class:`NetworkError` names the first offending element.
    """
    if fmt == "json":
        net = network_from_dict(_load_json(source, origin))
    elif fmt in ("xdf", "xdf-xml", "xml"):
        try:
            root = ET.fromstring(source)
        except ET.ParseError as e:
            line, col = e.position
            raise ParseError(str(e).split(":")[0], line, col, origin) from None
        net = _xdf_network(root, origin)
    else:
        raise ValueError(f"unknown network format {fmt!r}")
    if validate:
        _check_tree(net)
    return net


def _check_tree(net: DataflowNetwork):
    check(net)
    for a in net.actors:
        if a.subnetwork is not None:
            _check_tree(a.subnetwork)


def serialize_network(net: DataflowNetwork, fmt: str) -> str:
    if fmt == "json":
        return dumps_json(network_to_dict(net))
    if fmt in ("xdf", "xdf-xml", "xml"):
        return network_to_xdf(net)
    raise ValueError(f"unknown network format {fmt!r}")


def format_of(path) -> str:
    p = str(path)
    if p.endswith(".json"):
        return "json"
    if p.endswith(".xdf") or p.endswith(".xml"):
        return "xdf"
    raise ValueError(f"cannot infer network format of {p}")


def load_network(path, validate: bool = True) -> DataflowNetwork:
    path = Path(path)
    return parse_network(path.read_text(), format_of(path), origin=str(path), validate=validate)


# ---------------------------------------------------------------------------
# protocol


FORWARD = "forward"
BACKWARD = "backward"
ROLES = ("data", "valid", "push", "ready", "full", "ack")


@dataclass(frozen=True)
class Signal:
    role: str
    pattern: str      # contains "{port}"
    width: str        # "port" (bus width) or an integer literal
    direction: str    # forward (producer -> consumer) or backward

    def name(self, port: str) -> str:
        return self.pattern.format(port=port)

    def bits(self, port_width: int) -> int:
        return port_width if self.width == "port" else int(self.width)


@dataclass(frozen=True)
class ProtocolSpec:
    name: str
    signals: tuple
    clock: str = "clk"
    reset: str = "rst"
    handshake: str = "generic"

    def role(self, role: str) -> Optional[Signal]:
        for s in self.signals:
            if s.role == role:
                return s
        return None

    @property
    def forward(self):
        return [s for s in self.signals if s.direction == FORWARD]

    @property
    def backward(self):
        return [s for s in self.signals if s.direction == BACKWARD]

    @property
    def data(self) -> Signal:
        return self.role("data")

    @property
    def valid(self) -> Optional[Signal]:
        return self.role("valid") or self.role("push")

    def validate(self) -> list:
        diags = []
        roles = [s.role for s in self.signals]
        if roles.count("data") != 1:
            diags.append("protocol needs exactly one data signal")
        for r in sorted(set(roles)):
            if roles.count(r) > 1:
                diags.append(f"role '{r}' named more than once")
        for s in self.signals:
            if s.role not in ROLES:
                diags.append(f"unknown signal role '{s.role}'")
            if not s.pattern or "{port}" not in s.pattern:
                diags.append(f"signal pattern '{s.pattern}' lacks {{port}}")
            if s.direction not in (FORWARD, BACKWARD):
                diags.append(f"signal '{s.role}' has bad direction '{s.direction}'")
            if s.width != "port" and not str(s.width).isdigit():
                diags.append(f"signal '{s.role}' has bad width rule '{s.width}'")
        if self.data is not None and self.data.direction != FORWARD:
            diags.append("data signal must be forward")
        return diags


DEFAULT_PROTOCOL = ProtocolSpec(
    "rvc_cal",
    (
        Signal("data", "{port}_data", "port", FORWARD),
        Signal("valid", "{port}_valid", "1", FORWARD),
        Signal("ack", "{port}_ack", "1", BACKWARD),
        Signal("full", "{port}_full", "1", BACKWARD),
    ),
    handshake="rvc-cal",
)


def parse_protocol(source: str, origin: str = "") -> ProtocolSpec:
    try:
        root = ET.fromstring(source)
    except ET.ParseError as e:
        line, col = e.position
        raise ParseError(str(e).split(":")[0], line, col, origin) from None
    if root.tag != "protocol":
        raise ParseError(f"expected <protocol> root, found <{root.tag}>", source=origin)
    clock = root.find("clock")
    reset = root.find("reset")
    signals = tuple(
        Signal(s.get("role"), s.get("name"), s.get("width", "1"), s.get("direction", FORWARD))
        for s in root.findall("signal")
    )
    spec = ProtocolSpec(root.get("name", "protocol"), signals,
                        clock.get("name") if clock is not None else "clk",
                        reset.get("name") if reset is not None else "rst",
                        root.get("handshake", "generic"))
    diags = spec.validate()
    if diags:
        raise ParseError("; ".join(diags), source=origin)
    return spec


def protocol_to_xml(p: ProtocolSpec) -> str:
    root = ET.Element("protocol", name=p.name, handshake=p.handshake)
    ET.SubElement(root, "clock", name=p.clock)
    ET.SubElement(root, "reset", name=p.reset)
    for s in p.signals:
        ET.SubElement(root, "signal", role=s.role, name=s.pattern, width=str(s.width),
                      direction=s.direction)
    ET.indent(root)
    return '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(root, encoding="unicode") + "\n"


def load_protocol(path) -> ProtocolSpec:
    path = Path(path)
    return parse_protocol(path.read_text(), str(path))


# ---------------------------------------------------------------------------
# merged network and configuration table


def _prov_list(s) -> list:
    return sorted(s)


def mdf_to_dict(m: MultiDataflow) -> dict:
    base = network_to_dict(m.base)
    base["actors"] = sorted(base["actors"], key=lambda a: a["name"])
    base["channels"] = [
        {"src": str(c.src), "dst": str(c.dst), "depth": c.depth}
        for c in sorted(m.base.channels, key=channel_sort_key)
    ]
    return {
        "format": "mdf/1",
        "configs": list(m.configs),
        "network": base,
        "provenance": {
            "actors": {k: _prov_list(m.actor_prov[k]) for k in sorted(m.actor_prov)},
            "ports": {k: _prov_list(m.port_prov[k]) for k in sorted(m.port_prov)},
            "channels": {k: _prov_list(m.channel_prov[k]) for k in sorted(m.channel_prov)},
        },
        "selectors": {k: list(m.selectors[k]) for k in m.sbox_names},
    }


def mdf_from_dict(d: dict) -> MultiDataflow:
    try:
        if d.get("format") != "mdf/1":
            raise ParseError(f"unsupported mdf format {d.get('format')!r}")
        base = network_from_dict(d["network"], "$.network")
        prov = d["provenance"]
        return MultiDataflow(
            base,
            tuple(d["configs"]),
            {k: frozenset(v) for k, v in prov["actors"].items()},
            {k: frozenset(v) for k, v in prov["ports"].items()},
            {k: frozenset(v) for k, v in prov["channels"].items()},
            {k: tuple(v) for k, v in d.get("selectors", {}).items()},
        )
    except KeyError as e:
        raise ParseError(f"mdf: missing key {e.args[0]!r}") from None


def ctab_to_dict(t: ConfigurationTable) -> dict:
    return {
        "format": "ctab/1",
        "sboxes": list(t.sboxes),
        "rows": [
            {"config": name, "id": t.rows[name].network_id,
             "selectors": {s: t.rows[name].selectors[s] for s in t.sboxes}}
            for name in t.names
        ],
    }


def ctab_from_dict(d: dict) -> ConfigurationTable:
    try:
        if d.get("format") != "ctab/1":
            raise ParseError(f"unsupported ctab format {d.get('format')!r}")
        rows = {r["config"]: ConfigRow(int(r["id"]), dict(r["selectors"])) for r in d["rows"]}
        t = ConfigurationTable(rows, tuple(d["sboxes"]))
    except KeyError as e:
        raise ParseError(f"ctab: missing key {e.args[0]!r}") from None
    diags = t.validate()
    if diags:
        raise ParseError("ctab: " + "; ".join(diags))
    return t


def save_mdf(m: MultiDataflow, path):
    Path(path).write_text(dumps_json(mdf_to_dict(m)))


def load_mdf(path) -> MultiDataflow:
    path = Path(path)
    return mdf_from_dict(_load_json(path.read_text(), str(path)))


def save_ctab(t: ConfigurationTable, path):
    Path(path).write_text(dumps_json(ctab_to_dict(t)))


def load_ctab(path) -> ConfigurationTable:
    path = Path(path)
    return ctab_from_dict(_load_json(path.read_text(), str(path)))
