"""Merged multi-dataflow network and its configuration table."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

from .ir import DataflowNetwork, Channel


@dataclass(frozen=True)
class MultiDataflow:
    """A merged network plus the provenance of every element.

    Provenance maps actor names, boundary-port names and channel keys to the
    set of configuration indices the element serves. ``selectors`` stores the
    per-configuration selector bit of every SBox (bit ``c`` of the tuple is
    the value in configuration ``c``); the configuration table is a row view
    of the same data.
    """

    base: DataflowNetwork
    configs: tuple
    actor_prov: Mapping = field(default_factory=dict)
    port_prov: Mapping = field(default_factory=dict)
    channel_prov: Mapping = field(default_factory=dict)
    selectors: Mapping = field(default_factory=dict)

    @property
    def n_configs(self) -> int:
        return len(self.configs)

    @cached_property
    def sbox_names(self) -> list:
        """SBox instance names in insertion order (``sbox_<k>``)."""
        return sorted((a.name for a in self.base.sboxes), key=sbox_index)

    def config_index(self, name_or_index) -> int:
        if isinstance(name_or_index, int):
            if not 0 <= name_or_index < self.n_configs:
                raise IndexError(f"configuration {name_or_index} out of range")
            return name_or_index
        return self.configs.index(name_or_index)

    def active_actors(self, c: int) -> list:
        return [a for a in self.base.actors if c in self.actor_prov.get(a.name, ())]

    def prov_of_channel(self, ch: Channel) -> frozenset:
        return self.channel_prov.get(ch.key, frozenset())


def sbox_index(name: str) -> int:
    try:
        return int(name.rsplit("_", 1)[1])
    except (IndexError, ValueError):
        return 1 << 30


@dataclass(frozen=True)
class ConfigRow:
    network_id: int
    selectors: Mapping


@dataclass(frozen=True)
class ConfigurationTable:
    """Rows keyed by configuration name; each row carries its network ID and
    a selector bit for every SBox."""

    rows: Mapping
    sboxes: tuple = ()

    @property
    def names(self) -> list:
        return sorted(self.rows, key=lambda n: self.rows[n].network_id)

    def row(self, c) -> ConfigRow:
        if isinstance(c, int):
            return self.rows[self.names[c]]
        return self.rows[c]

    def bit(self, c, sbox: str) -> int:
        return self.row(c).selectors[sbox]

    def flipped(self, c: int, sbox: str) -> "ConfigurationTable":
        name = self.names[c]
        rows = dict(self.rows)
        sel = dict(rows[name].selectors)
        sel[sbox] ^= 1
        rows[name] = ConfigRow(rows[name].network_id, sel)
        return ConfigurationTable(rows, self.sboxes)

    def validate(self) -> list:
        diags = []
        ids = sorted(r.network_id for r in self.rows.values())
        if ids != list(range(len(ids))):
            diags.append(f"network ids {ids} are not dense from 0")
        for name, r in self.rows.items():
            missing = [s for s in self.sboxes if s not in r.selectors]
            if missing:
                diags.append(f"row '{name}' lacks selectors for {', '.join(missing)}")
            bad = [s for s, v in r.selectors.items() if v not in (0, 1)]
            if bad:
                diags.append(f"row '{name}' has non-binary selectors for {', '.join(bad)}")
        return diags


def configuration_table(m: MultiDataflow) -> ConfigurationTable:
    names = m.sbox_names
    rows = {}
    for c, cname in enumerate(m.configs):
        rows[cname] = ConfigRow(c, {s: m.selectors[s][c] for s in names})
    return ConfigurationTable(rows, tuple(names))


def id_width(n_configs: int) -> int:
    """Bits needed for a network ID: ceil(log2 N), 0 for a single config."""
    return max(0, (n_configs - 1).bit_length())
