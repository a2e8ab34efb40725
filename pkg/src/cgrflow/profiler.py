"""Structural profiler: cost models and merge design-space exploration.

Area and power are plain sums of back-annotated per-component figures over
every vertex of the merged graph (SBoxes included). The critical path is the
larger of the slowest input network and the delay of the longest SBox
cascade, ``f(b) * ln(N_S) + g(b)``.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import permutations
from pathlib import Path
from typing import Optional

from .formats import ParseError, dumps_json
from .ir import DataflowNetwork
from .merge import CANONICAL, MergePolicy, merge_all
from .multiflow import MultiDataflow


class ProfilerError(ValueError):
    pass


@dataclass(frozen=True)
class Cost:
    area: float
    power_static: float
    power_dynamic: float
    cp: float

    @property
    def power(self) -> float:
        return self.power_static + self.power_dynamic


@dataclass(frozen=True)
class ComponentAnnotation:
    """Back-annotated costs per component type (SBoxes under ``sbox1x2_<b>``
    and ``sbox2x1_<b>``)."""

    costs: dict

    def __post_init__(self):
        for k, c in self.costs.items():
            vals = (c.area, c.power_static, c.power_dynamic, c.cp)
            if any(not math.isfinite(v) or v < 0 for v in vals):
                raise ProfilerError(f"annotation for '{k}' has a negative or non-finite value")

    def __getitem__(self, component: str) -> Cost:
        try:
            return self.costs[component]
        except KeyError:
            raise ProfilerError(f"component type '{component}' is not annotated") from None

    def require(self, components):
        missing = sorted(set(components) - set(self.costs))
        if missing:
            raise ProfilerError("missing annotations for: " + ", ".join(missing))


@dataclass(frozen=True)
class TechnologyModel:
    """``f(b)``, ``g(b)`` cascade coefficients keyed by SBox data width."""

    rows: dict   # width -> (f, g)

    def __post_init__(self):
        for b, (f, g) in self.rows.items():
            if f < 0:
                raise ProfilerError(f"f({b}) must be non-negative")

    def coefficients(self, width: int):
        try:
            return self.rows[width]
        except KeyError:
            raise ProfilerError(f"technology table has no row for bus width {width}") from None


def load_annotations(path) -> ComponentAnnotation:
    d = json.loads(Path(path).read_text())
    try:
        return ComponentAnnotation({
            k: Cost(float(v["area"]), float(v["p_static"]), float(v["p_dynamic"]), float(v["cp"]))
            for k, v in d["components"].items()
        })
    except KeyError as e:
        raise ParseError(f"{path}: missing key {e.args[0]!r}") from None


def annotations_to_dict(ann: ComponentAnnotation) -> dict:
    return {"components": {k: {"area": c.area, "p_static": c.power_static,
                               "p_dynamic": c.power_dynamic, "cp": c.cp}
                           for k, c in sorted(ann.costs.items())}}


def load_technology(path) -> TechnologyModel:
    d = json.loads(Path(path).read_text())
    rows = {}
    for r in d["rows"]:
        b = int(r["b"])
        if b in rows:
            raise ParseError(f"{path}: duplicate technology row for b={b}")
        rows[b] = (float(r["f"]), float(r["g"]))
    return TechnologyModel(rows)


def technology_to_dict(tech: TechnologyModel) -> dict:
    return {"rows": [{"b": b, "f": f, "g": g} for b, (f, g) in sorted(tech.rows.items())]}


# ---------------------------------------------------------------------------
# cost models


def _graph(m):
    return m.base if isinstance(m, MultiDataflow) else m


def cost_area(m, ann: ComponentAnnotation) -> float:
    """Sum of ``a_i`` over every vertex; ``math.fsum`` keeps it exactly rounded."""
    return math.fsum(ann[a.component].area for a in _graph(m).actors)


@dataclass(frozen=True)
class PowerBreakdown:
    static: float
    dynamic: float

    @property
    def total(self) -> float:
        return self.static + self.dynamic


def cost_power(m, ann: ComponentAnnotation) -> PowerBreakdown:
    actors = _graph(m).actors
    return PowerBreakdown(math.fsum(ann[a.component].power_static for a in actors),
                          math.fsum(ann[a.component].power_dynamic for a in actors))


def longest_sbox_cascade(m, with_path: bool = False):
    """Vertices on the longest SBox-only path joined by depth-0 channels."""
    net = _graph(m)
    sboxes = {a.name: a for a in net.sboxes}
    succ = {n: [] for n in sboxes}
    for c in net.channels:
        if c.depth == 0 and c.src.actor in sboxes and c.dst.actor in sboxes:
            succ[c.src.actor].append(c.dst.actor)
    best = {}
    state = {}

    def visit(n):
        if state.get(n) == 1:
            raise ProfilerError(f"combinatorial loop through SBox '{n}'")
        if n in best:
            return best[n]
        state[n] = 1
        tail = max((visit(s) for s in sorted(succ[n])), key=len, default=[])
        state[n] = 2
        best[n] = [n] + tail
        return best[n]

    path = max((visit(n) for n in sorted(sboxes)), key=len, default=[])
    return (len(path), path) if with_path else len(path)


def cascade_width(m) -> Optional[int]:
    net = _graph(m)
    n_s, path = longest_sbox_cascade(net, with_path=True)
    if not path:
        return None
    # data width of the SBoxes on the cascade
    return max(net.actor(n).outputs[0].width for n in path)


def network_cp(net: DataflowNetwork, ann: ComponentAnnotation) -> float:
    """Back-annotated critical path of one input: its slowest component."""
    return max((ann[a.component].cp for a in net.actors), default=0.0)


@dataclass(frozen=True)
class Timing:
    cp_static: float
    cp_seq_sb: float
    n_s: int

    @property
    def cp(self) -> float:
        return max(self.cp_static, self.cp_seq_sb)

    @property
    def freq_mhz(self) -> float:
        if self.cp <= 0:
            raise ProfilerError("critical path is zero; annotate component delays")
        return 1000.0 / self.cp


def cost_critical_path(m, inputs_cp, tech: TechnologyModel) -> Timing:
    """``CP = max(max CP_i, f(b) ln N_S + g(b))``; no cascade means no SBox delay."""
    n_s = longest_sbox_cascade(m)
    cp_static = max(inputs_cp, default=0.0)
    if n_s == 0:
        return Timing(cp_static, 0.0, 0)
    f, g = tech.coefficients(cascade_width(m))
    return Timing(cp_static, f * math.log(n_s) + g, n_s)


# ---------------------------------------------------------------------------
# exploration


def set_partitions(items):
    """All set partitions of ``items`` via restricted growth strings."""
    items = list(items)
    n = len(items)
    if n == 0:
        yield []
        return
    a = [0] * n

    def rec(i, m):
        if i == n:
            groups = [[] for _ in range(m + 1)]
            for k, g in enumerate(a):
                groups[g].append(items[k])
            yield groups
            return
        for g in range(m + 2):
            a[i] = g
            yield from rec(i + 1, max(m, g))

    a[0] = 0
    yield from rec(1, 0)


def partition_key(partition) -> str:
    return "|".join("{" + ",".join(g) + "}" for g in sorted(sorted(g) for g in partition))


@dataclass(frozen=True)
class Limits:
    max_networks: int = 6
    max_order_group: int = 4
    override: bool = False


@dataclass(frozen=True)
class GroupResult:
    members: tuple        # merge order
    area: float
    power_static: float
    power_dynamic: float
    timing: Timing
    actors: int
    sboxes: int

    @property
    def power(self) -> float:
        return self.power_static + self.power_dynamic


@dataclass
class MergeCandidate:
    partition: list            # list of groups, each a list of network names (merge order)
    area: float
    power: float
    power_static: float
    power_dynamic: float
    freq_mhz: float
    groups: list = field(default_factory=list)
    pareto: bool = False

    @property
    def key(self) -> str:
        return partition_key(self.partition)

    @property
    def is_baseline(self) -> bool:
        return all(len(g) == 1 for g in self.partition)

    def to_dict(self) -> dict:
        return {
            "partition": self.key,
            "groups": [
                {"order": list(g.members), "area": g.area, "power": g.power,
                 "cp_static": g.timing.cp_static, "cp_seq_sb": g.timing.cp_seq_sb,
                 "n_s": g.timing.n_s, "cp": g.timing.cp, "freq_mhz": g.timing.freq_mhz,
                 "actors": g.actors, "sboxes": g.sboxes}
                for g in self.groups
            ],
            "area": self.area,
            "power": {"static": self.power_static, "dynamic": self.power_dynamic,
                      "total": self.power},
            "freq_mhz": self.freq_mhz,
            "pareto": self.pareto,
            "baseline": self.is_baseline,
        }


SORT_KEYS = ("area", "power", "freq")


def _cost_group(args):
    nets, ann, tech, policy, name = args
    m, _ = merge_all(nets, policy, name=name)
    p = cost_power(m, ann)
    t = cost_critical_path(m, [network_cp(n, ann) for n in nets], tech)
    return GroupResult(tuple(n.name for n in nets), cost_area(m, ann), p.static, p.dynamic, t,
                       sum(1 for a in m.base.actors if not a.is_sbox), len(m.base.sboxes))


def _metric(key: str, r) -> float:
    if key == "area":
        return r.area
    if key == "power":
        return r.power
    return -r.timing.freq_mhz if isinstance(r, GroupResult) else -r.freq_mhz


def explore(nets, ann: ComponentAnnotation, tech: TechnologyModel,
            policy: MergePolicy = MergePolicy(), limits: Limits = Limits(),
            sort_by: str = "area", workers: int = 1):
    """Cost every set partition of ``nets`` and rank the candidates.

    Groups of a partition are deployed side by side: areas and powers add,
    the system frequency is the slowest group's. Within a group every merge
    order is tried up to ``limits.max_order_group`` members (the best by
    ``sort_by`` is kept); larger groups use the policy's order.
    """
    nets = list(nets)
    if sort_by not in SORT_KEYS:
        raise ValueError(f"sort key must be one of {SORT_KEYS}")
    if len(nets) > limits.max_networks and not limits.override:
        raise ProfilerError(f"{len(nets)} networks exceed the enumeration limit of "
                            f"{limits.max_networks}; pass an override to continue")
    names = [n.name for n in nets]
    if len(set(names)) != len(names):
        raise ProfilerError("input network names must be unique")
    ann.require({a.component for n in nets for a in n.actors})
    by_name = {n.name: n for n in nets}

    partitions = list(set_partitions(names))
    groups = sorted({tuple(g) for p in partitions for g in p}, key=lambda g: (len(g), g))
    jobs = []
    for g in groups:
        if len(g) <= limits.max_order_group:
            orders = list(permutations(g))
        elif policy.order == CANONICAL:
            orders = [tuple(sorted(g))]
        else:
            orders = [g]
        for order in orders:
            jobs.append((g, order))
    args = [([by_name[n] for n in order], ann, tech, policy, "multi_" + "_".join(order))
            for _, order in jobs]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_cost_group, args, chunksize=4))
    else:
        results = [_cost_group(a) for a in args]

    best = {}
    for (g, order), r in zip(jobs, results):
        cur = best.get(g)
        if cur is None or (_metric(sort_by, r), r.members) < (_metric(sort_by, cur), cur.members):
            best[g] = r

    cands = []
    for p in partitions:
        rs = [best[tuple(g)] for g in p]
        cands.append(MergeCandidate(
            [list(r.members) for r in rs],
            math.fsum(r.area for r in rs),
            math.fsum(r.power for r in rs),
            math.fsum(r.power_static for r in rs),
            math.fsum(r.power_dynamic for r in rs),
            min(r.timing.freq_mhz for r in rs),
            rs,
        ))
    _flag_pareto(cands)
    cands.sort(key=lambda c: (_metric(sort_by, c), c.key))
    return cands


def _flag_pareto(cands):
    for c in cands:
        c.pareto = not any(
            o.area <= c.area and o.power <= c.power and o.freq_mhz >= c.freq_mhz
            and (o.area < c.area or o.power < c.power or o.freq_mhz > c.freq_mhz)
            for o in cands
        )


def report_dict(cands, sort_by: str) -> dict:
    return {"format": "dse/1", "sort_by": sort_by, "candidates": [c.to_dict() for c in cands]}


def format_table(cands) -> str:
    rows = [("rank", "partition", "area", "power[mW]", "freq[MHz]", "N_S", "pareto")]
    for i, c in enumerate(cands, 1):
        n_s = max(g.timing.n_s for g in c.groups)
        rows.append((str(i), c.key, f"{c.area:.4g}", f"{c.power:.4g}", f"{c.freq_mhz:.2f}",
                     str(n_s), "*" if c.pareto else ""))
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows]
    return "\n".join(lines) + "\n"


def save_report(cands, sort_by: str, path):
    Path(path).write_text(dumps_json(report_dict(cands, sort_by)))
