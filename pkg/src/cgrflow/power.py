"""Logic regions, clock-gating plans and power-intent emission.

An element's activity signature has one character per configuration,
``"1"`` where the element works. Elements with equal signatures form a
logic region; the all-ones region is never gated.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from itertools import combinations
from typing import Optional

from .ir import Endpoint, FANOUT
from .multiflow import ConfigurationTable, MultiDataflow

CLOCK = "clockGating"
POWER = "powerGating"
ASIC = "asic"
FPGA = "fpga"
# global clock buffers on a Zynq-7000 device
DEFAULT_BUFG_BUDGET = 32


class PowerError(ValueError):
    pass


@dataclass(frozen=True)
class Region:
    rid: int
    members: tuple
    signature: str

    @property
    def always_on(self) -> bool:
        return "0" not in self.signature

    def active_configs(self) -> list:
        return [i for i, b in enumerate(self.signature) if b == "1"]


@dataclass(frozen=True)
class LogicRegionPartition:
    regions: tuple               # gateable regions
    always_on: Optional[Region]
    mode: str
    configs: tuple

    @property
    def all_regions(self) -> list:
        return ([self.always_on] if self.always_on is not None else []) + list(self.regions)

    def region_of(self, element: str) -> Region:
        for r in self.all_regions:
            if element in r.members:
                return r
        raise KeyError(element)

    def to_dict(self) -> dict:
        def rd(r):
            return {"id": r.rid, "signature": r.signature, "members": list(r.members)}
        return {
            "format": "lr/1",
            "mode": self.mode,
            "configs": list(self.configs),
            "always_on": rd(self.always_on) if self.always_on is not None else None,
            "regions": [rd(r) for r in self.regions],
        }


def signature_of(prov, n: int) -> str:
    return "".join("1" if c in prov else "0" for c in range(n))


def element_signatures(m: MultiDataflow, mode: str) -> dict:
    """Signature of every gating-eligible element (SBoxes only in power mode)."""
    n = m.n_configs
    sigs = {}
    incoming = m.base.incoming
    for a in m.base.actors:
        if a.is_sbox and mode != POWER:
            continue
        prov = m.actor_prov.get(a.name, frozenset())
        if a.kind == FANOUT:
            # a fanout follows whatever drives it
            feeders = [incoming.get(Endpoint(a.name, p.name)) for p in a.inputs]
            fprov = set()
            for ch in feeders:
                if ch is not None:
                    fprov |= m.channel_prov.get(ch.key, frozenset())
            prov = fprov or prov
        sigs[a.name] = signature_of(prov, n)
    return sigs


def identify_logic_regions(m: MultiDataflow, ctab: Optional[ConfigurationTable] = None,
                           mode: str = CLOCK) -> LogicRegionPartition:
    """Group elements by activity signature: one region per distinct signature."""
    if mode not in (CLOCK, POWER):
        raise ValueError(f"unknown gating mode {mode!r}")
    sigs = element_signatures(m, mode)
    classes = {}
    for name in sorted(sigs):
        classes.setdefault(sigs[name], []).append(name)
    full = "1" * m.n_configs
    always = None
    if full in classes:
        always = Region(0, tuple(classes.pop(full)), full)
    regions = tuple(Region(i + 1, tuple(classes[s]), s)
                    for i, s in enumerate(sorted(classes, reverse=True)))
    return LogicRegionPartition(regions, always, mode, tuple(m.configs))


def _or(a: str, b: str) -> str:
    return "".join("1" if x == "1" or y == "1" else "0" for x, y in zip(a, b))


def merge_waste(r1: Region, r2: Region) -> int:
    """Element-configurations switched on needlessly by merging two regions."""
    merged = _or(r1.signature, r2.signature)
    waste = 0
    for r in (r1, r2):
        extra = sum(1 for x, y in zip(merged, r.signature) if x == "1" and y == "0")
        waste += extra * len(r.members)
    return waste


def hamming(a: str, b: str) -> int:
    return sum(1 for x, y in zip(a, b) if x != y)


def reduce_regions(p: LogicRegionPartition, budget: int) -> LogicRegionPartition:
    """Merge gateable regions until at most ``budget`` remain.

    Each step merges the pair with the least wasted activity, then smallest
    Hamming distance, then lowest region ids. Signatures are ORed, so a
    merged region is enabled whenever any member was.
    """
    if budget < 1:
        raise ValueError("gating budget must be at least 1")
    regions = list(p.regions)
    if len(regions) <= budget:
        return p
    while len(regions) > budget:
        best = min(
            combinations(range(len(regions)), 2),
            key=lambda ij: (merge_waste(regions[ij[0]], regions[ij[1]]),
                            hamming(regions[ij[0]].signature, regions[ij[1]].signature),
                            regions[ij[0]].rid, regions[ij[1]].rid),
        )
        i, j = best
        r1, r2 = regions[i], regions[j]
        merged = Region(min(r1.rid, r2.rid), tuple(sorted(r1.members + r2.members)),
                        _or(r1.signature, r2.signature))
        regions[i] = merged
        del regions[j]
    regions = tuple(Region(k + 1, r.members, r.signature) for k, r in enumerate(regions))
    return LogicRegionPartition(regions, p.always_on, p.mode, p.configs)


# ---------------------------------------------------------------------------
# clock gating


def select_line(c: int) -> str:
    """One-hot decode of the network ID register for configuration ``c``."""
    return f"cfg_sel_{c}"


def enable_expression(signature: str) -> str:
    terms = [select_line(c) for c, b in enumerate(signature) if b == "1"]
    return " | ".join(terms) if terms else "1'b0"


@dataclass(frozen=True)
class GatingCell:
    name: str
    cell: str          # AND (asic) or BUFGCE (fpga)
    region: int
    enable: str        # expression over cfg_sel_<c>
    clock: str         # gated clock net
    members: tuple


@dataclass(frozen=True)
class GatingPlan:
    target: str
    cells: tuple
    ungated: tuple
    n_configs: int

    def clock_of(self, element: str) -> Optional[str]:
        for c in self.cells:
            if element in c.members:
                return c.clock
        return None


def plan_clock_gating(p: LogicRegionPartition, target: str = ASIC,
                      budget: int = DEFAULT_BUFG_BUDGET) -> GatingPlan:
    """One gating cell per gateable region; the always-on region stays ungated.

    FPGA plans need the region count reduced to the BUFG budget first.
    """
    if p.mode != CLOCK:
        raise PowerError("clock gating needs a clock-gating region partition")
    if target not in (ASIC, FPGA):
        raise ValueError(f"unknown target {target!r}")
    if target == FPGA and len(p.regions) > budget:
        raise PowerError(f"{len(p.regions)} gateable regions exceed the budget of {budget} BUFGs; "
                         "run region reduction first")
    cells = tuple(
        GatingCell(f"cg_lr{r.rid}", "AND" if target == ASIC else "BUFGCE", r.rid,
                   enable_expression(r.signature), f"gclk_lr{r.rid}", r.members)
        for r in p.regions
    )
    ungated = p.always_on.members if p.always_on is not None else ()
    return GatingPlan(target, cells, ungated, len(p.configs))


# ---------------------------------------------------------------------------
# power intent (CPF subset)


def emit_power_intent(p: LogicRegionPartition, m: MultiDataflow, design: Optional[str] = None) -> str:
    """CPF-style power intent: a default always-on domain plus one switchable
    domain per gateable region, shut off when none of its configurations is
    selected."""
    if p.mode != POWER:
        raise PowerError("power intent needs a power-gating region partition")
    design = design or m.base.name
    lines = [
        f"# power intent for {design}",
        "# configurations: " + ", ".join(f"{c}={select_line(i)}" for i, c in enumerate(p.configs)),
        "# isolation cells clamp outputs of a domain while it is shut off;",
        "# retention is not requested: regions restart from reset.",
        f"set_design {design}",
    ]
    aon = p.always_on.members if p.always_on is not None else ()
    lines.append("create_power_domain -name PD_AON -default"
                 + (f" -instances {{{' '.join(aon)}}}" if aon else ""))
    for r in p.regions:
        cond = f"!({enable_expression(r.signature)})"
        lines.append(f"create_power_domain -name PD_LR{r.rid} -instances {{{' '.join(r.members)}}} "
                     f"-shutoff_condition {{{cond}}}")
    for r in p.regions:
        lines.append(f"# create_isolation_rule -name iso_lr{r.rid} -from PD_LR{r.rid} "
                     f"-isolation_output low")
    lines.append("end_design")
    return "\n".join(lines) + "\n"


_DOMAIN = re.compile(r"^create_power_domain\s+-name\s+(\S+)(.*)$")


@dataclass(frozen=True)
class PowerDomain:
    name: str
    instances: tuple
    default: bool
    shutoff: Optional[str]


def parse_power_intent(text: str) -> dict:
    """Read back domains written by :func:`emit_power_intent`."""
    domains = {}
    design = None
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("set_design"):
            design = line.split()[1]
            continue
        mt = _DOMAIN.match(line)
        if mt:
            rest = mt.group(2)
            inst = re.search(r"-instances\s+\{([^}]*)\}", rest)
            off = re.search(r"-shutoff_condition\s+\{([^}]*)\}", rest)
            domains[mt.group(1)] = PowerDomain(
                mt.group(1),
                tuple(inst.group(1).split()) if inst else (),
                "-default" in rest,
                off.group(1) if off else None,
            )
    return {"design": design, "domains": domains}


def configs_of_condition(expr: str) -> set:
    """Configuration indices named in an enable or shut-off expression."""
    return {int(x) for x in re.findall(r"cfg_sel_(\d+)", expr)}
