"""Command-line driver: parse, flatten, merge, profile, gate and emit.

Exit codes: 0 success, 1 diagnostics (bad input content, failed checks),
2 usage errors (unknown flags, missing files).
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:    # python < 3.11
    import tomli as tomllib

from . import copr, hdl, power
from .formats import (DEFAULT_PROTOCOL, ParseError, dumps_json, load_ctab, load_mdf,
                      load_network, load_protocol, save_ctab, save_mdf)
from .ir import NetworkError, flatten
from .merge import CANONICAL, GIVEN, HEURISTIC, MOREANO, MergePolicy, merge_all
from .profiler import (SORT_KEYS, Limits, ProfilerError, explore, format_table,
                       load_annotations, load_technology, save_report)
from .verify import lint_netlist, verify_merge

log = logging.getLogger("cgrflow")

SUBCOMMANDS = ("merge", "profile", "power", "emit-hdl", "emit-copr", "verify", "all")


class UsageError(Exception):
    pass


class Diagnostics(Exception):
    def __init__(self, lines):
        super().__init__("\n".join(lines))
        self.lines = list(lines)


# ---------------------------------------------------------------------------
# argument parsing


def _add_merge(p):
    p.add_argument("--algorithm", choices=(HEURISTIC, MOREANO), default=HEURISTIC)
    p.add_argument("--order", choices=(GIVEN, CANONICAL), default=GIVEN,
                   help="pairwise merge order of the inputs")


def _add_state(p):
    p.add_argument("--mdf", help="merged network (default: <out>/multi.mdf.json)")
    p.add_argument("--ctab", help="configuration table (default: <out>/ctab.ctab.json)")


def _add_power(p):
    p.add_argument("--power-mode", choices=("none", "clock", "power"), default="none")
    p.add_argument("--gating-budget", type=int, default=None,
                   help="max gateable regions (FPGA default: %d)" % power.DEFAULT_BUFG_BUDGET)
    p.add_argument("--target", choices=(power.ASIC, power.FPGA), default=power.ASIC)


def _add_hdl(p):
    p.add_argument("--protocol", help="protocol XML (default: bundled rvc_cal protocol)")


def _add_copr(p):
    p.add_argument("--processor", choices=(copr.ARM, copr.MICROBLAZE), default=copr.ARM)
    p.add_argument("--coupling", choices=(copr.MM, copr.STREAM), default=copr.MM)
    p.add_argument("--dma", action=argparse.BooleanOptionalAction, default=False)
    p.add_argument("--part", default=copr.DEFAULT_PART)
    p.add_argument("--board", default=copr.DEFAULT_BOARD)
    p.add_argument("--mem-words-per-port", type=int, default=copr.DEFAULT_MEM_WORDS)
    p.add_argument("--port-role", action="append", default=[], metavar="PORT=ROLE",
                   help="data or parameter; repeatable")


def _add_profile(p, required: bool):
    p.add_argument("--ann", required=required, help="component annotations (*.ann.json)")
    p.add_argument("--tech", required=required, help="technology table (*.tech.json)")
    p.add_argument("--sort", choices=SORT_KEYS, default="area")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--override-limit", action="store_true",
                   help="enumerate partitions beyond the default network limit")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cgrflow", description="Coarse-grained reconfigurable datapath generator")
    sub = ap.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--project", help="project file with default flag values (TOML)")
    common.add_argument("-o", "--out", default="out", help="output directory")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("merge", parents=[common], help="merge input networks")
    p.add_argument("inputs", nargs="*")
    _add_merge(p)

    p = sub.add_parser("profile", parents=[common], help="rank merge partitions")
    p.add_argument("inputs", nargs="*")
    _add_merge(p)
    _add_profile(p, required=False)

    p = sub.add_parser("power", parents=[common], help="logic regions, gating plan, power intent")
    _add_state(p)
    _add_power(p)

    p = sub.add_parser("emit-hdl", parents=[common], help="structural netlist of the merged network")
    _add_state(p)
    _add_hdl(p)
    _add_power(p)

    p = sub.add_parser("emit-copr", parents=[common], help="coprocessor HDL, drivers and scripts")
    _add_state(p)
    _add_hdl(p)
    _add_copr(p)

    p = sub.add_parser("verify", parents=[common], help="check extraction and lint emitted HDL")
    p.add_argument("inputs", nargs="*")
    _add_state(p)
    _add_hdl(p)

    p = sub.add_parser("all", parents=[common], help="merge, emit the core, the coprocessor and verify")
    p.add_argument("inputs", nargs="*")
    _add_merge(p)
    _add_hdl(p)
    _add_power(p)
    _add_copr(p)
    _add_profile(p, required=False)
    return ap


def _project_defaults(path: str, sub: argparse.ArgumentParser, command: str) -> dict:
    """Flat keys apply to every subcommand; a ``[<command>]`` table overrides them."""
    try:
        data = tomllib.loads(Path(path).read_text())
    except FileNotFoundError:
        raise UsageError(f"project file not found: {path}") from None
    except tomllib.TOMLDecodeError as e:
        raise UsageError(f"{path}: {e}") from None
    known = {a.dest for a in sub._actions}
    vals = {k: v for k, v in data.items() if not isinstance(v, dict)}
    section = data.get(command, {})
    if not isinstance(section, dict):
        raise UsageError(f"{path}: '{command}' must be a table")
    vals.update(section)
    out = {}
    for k, v in vals.items():
        dest = k.replace("-", "_")
        if dest not in known or dest in ("project", "help"):
            raise UsageError(f"{path}: unknown setting '{k}' for {command}")
        out[dest] = v
    return out


def parse_args(argv):
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.project:
        sub = ap._subparsers._group_actions[0].choices[args.command]
        sub.set_defaults(**_project_defaults(args.project, sub, args.command))
        args = ap.parse_args(argv)
    return args


# ---------------------------------------------------------------------------
# steps


def _out(args) -> Path:
    return Path(args.out)


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    log.info("wrote %s", path)


def _write_files(root: Path, files: dict):
    for name, text in files.items():
        _write(root / name, text)


def _inputs(args):
    if not args.inputs:
        raise UsageError("no input networks given")
    nets = []
    for f in args.inputs:
        if not Path(f).is_file():
            raise UsageError(f"input not found: {f}")
        nets.append(flatten(load_network(f)))
    return nets


def _policy(args) -> MergePolicy:
    return MergePolicy(algorithm=args.algorithm, order=args.order)


def _state(args):
    mdf = Path(args.mdf) if args.mdf else _out(args) / "multi.mdf.json"
    tab = Path(args.ctab) if args.ctab else _out(args) / "ctab.ctab.json"
    for p in (mdf, tab):
        if not p.is_file():
            raise UsageError(f"missing {p}; run 'merge' first or pass --mdf/--ctab")
    return load_mdf(mdf), load_ctab(tab)


def _protocol(args):
    if args.protocol:
        if not Path(args.protocol).is_file():
            raise UsageError(f"protocol file not found: {args.protocol}")
        return load_protocol(args.protocol)
    return DEFAULT_PROTOCOL


def step_merge(args, nets=None):
    nets = nets if nets is not None else _inputs(args)
    m, ctab = merge_all(nets, _policy(args))
    out = _out(args)
    out.mkdir(parents=True, exist_ok=True)
    save_mdf(m, out / "multi.mdf.json")
    save_ctab(ctab, out / "ctab.ctab.json")
    log.info("merged %d networks: %d actors, %d sboxes", len(nets),
             len(m.base.actors), len(m.base.sboxes))
    return m, ctab


def step_profile(args, nets=None):
    if not args.ann or not args.tech:
        raise UsageError("profile needs --ann and --tech")
    for f in (args.ann, args.tech):
        if not Path(f).is_file():
            raise UsageError(f"file not found: {f}")
    nets = nets if nets is not None else _inputs(args)
    cands = explore(nets, load_annotations(args.ann), load_technology(args.tech), _policy(args),
                    Limits(override=args.override_limit), sort_by=args.sort, workers=args.workers)
    out = _out(args)
    out.mkdir(parents=True, exist_ok=True)
    save_report(cands, args.sort, out / "dse.json")
    table = format_table(cands)
    _write(out / "dse.txt", table)
    sys.stdout.write(table)
    return cands


def _partition(args, m, ctab, mode):
    p = power.identify_logic_regions(m, ctab, mode)
    budget = args.gating_budget
    if budget is None and args.target == power.FPGA and mode == power.CLOCK:
        budget = power.DEFAULT_BUFG_BUDGET
    if budget is not None:
        p = power.reduce_regions(p, budget)
    return p, budget


def _gating(args, m, ctab):
    if args.power_mode != "clock":
        return None
    p, budget = _partition(args, m, ctab, power.CLOCK)
    return power.plan_clock_gating(p, args.target, budget or power.DEFAULT_BUFG_BUDGET)


def step_power(args, m=None, ctab=None):
    if m is None:
        m, ctab = _state(args)
    if args.power_mode == "none":
        log.info("power mode is none; nothing to do")
        return None
    mode = power.CLOCK if args.power_mode == "clock" else power.POWER
    p, budget = _partition(args, m, ctab, mode)
    root = _out(args) / "power"
    name = m.base.name
    _write(root / f"{name}.lr.json", dumps_json(p.to_dict()))
    if mode == power.CLOCK:
        plan = power.plan_clock_gating(p, args.target, budget or power.DEFAULT_BUFG_BUDGET)
        _write(root / f"{name}.gating.json", dumps_json({
            "format": "gating/1",
            "target": plan.target,
            "cells": [{"name": c.name, "cell": c.cell, "region": c.region, "enable": c.enable,
                       "clock": c.clock, "members": list(c.members)} for c in plan.cells],
            "ungated": list(plan.ungated),
        }))
    else:
        _write(root / f"{name}.cpf", power.emit_power_intent(p, m))
    return p


def step_emit_hdl(args, m=None, ctab=None):
    if m is None:
        m, ctab = _state(args)
    plan = hdl.plan_netlist(m, ctab, _protocol(args), _gating(args, m, ctab))
    files = hdl.emit_verilog(plan)
    _write_files(_out(args) / "hdl", files)
    return files


def _port_roles(args) -> dict:
    roles = {}
    for item in args.port_role:
        if "=" not in item:
            raise UsageError(f"--port-role expects PORT=ROLE, got '{item}'")
        k, v = item.split("=", 1)
        roles[k.strip()] = v.strip()
    return roles


def deployment(args) -> copr.DeploymentConfig:
    return copr.DeploymentConfig(
        processor=args.processor, coupling=args.coupling, dma=bool(args.dma),
        part=args.part, board=args.board, port_roles=_port_roles(args),
        mem_words_per_port=args.mem_words_per_port)


def step_emit_copr(args, m=None, ctab=None, core=None):
    if m is None:
        m, ctab = _state(args)
    protocol = _protocol(args)
    cfg = deployment(args)
    plan = copr.plan_til(m, cfg, ctab)
    if core is None:
        core = hdl.emit_verilog(hdl.plan_netlist(m, ctab, protocol))
    # the actor stubs only serve the lint; the real library is added at packaging
    hdl_files = {k: v for k, v in core.items() if not k.startswith("stubs/")}
    hdl_files.update(copr.emit_til_hdl(plan, m, protocol))
    hdl_files = dict(sorted(hdl_files.items()))
    drivers = copr.emit_drivers(plan, cfg, m, ctab)
    scripts = copr.emit_scripts(cfg, plan, list(hdl_files), list(drivers))
    root = _out(args) / "copr"
    _write_files(root / "hdl", hdl_files)
    _write_files(root / "drivers", drivers)
    _write_files(root / "scripts", scripts)
    _write(root / "manifest.json", dumps_json(copr.manifest(cfg, plan)))
    return hdl_files


def _read_dir(d: Path) -> dict:
    return {f.relative_to(d).as_posix(): f.read_text() for f in sorted(d.rglob("*.v"))}


def step_verify(args, m=None, ctab=None, nets=None):
    if m is None:
        m, ctab = _state(args)
    if nets is None:
        nets = _inputs(args) if args.inputs else None
    report = {"format": "verify/1", "extraction": None, "lint": {}}
    diags = []
    if nets is not None:
        if len(nets) != m.n_configs:
            raise UsageError(f"{len(nets)} inputs given for {m.n_configs} configurations")
        d = verify_merge(m, ctab, nets)
        report["extraction"] = d
        diags += d
    out = _out(args)
    core = _read_dir(out / "hdl")
    if core:
        d = lint_netlist(core)
        report["lint"]["hdl"] = d
        diags += d
    til = _read_dir(out / "copr" / "hdl")
    if til:
        til.update({k: v for k, v in core.items() if k.startswith("stubs/")})
        d = lint_netlist(til)
        report["lint"]["copr"] = d
        diags += d
    report["ok"] = not diags
    _write(out / "verify.json", dumps_json(report))
    if diags:
        raise Diagnostics(diags)
    return report


def step_all(args):
    nets = _inputs(args)
    m, ctab = step_merge(args, nets)
    if args.ann or args.tech:
        step_profile(args, nets)
    if args.power_mode != "none":
        step_power(args, m, ctab)
    core = step_emit_hdl(args, m, ctab)
    step_emit_copr(args, m, ctab, core)
    return step_verify(args, m, ctab, nets)


STEPS = {
    "merge": step_merge,
    "profile": step_profile,
    "power": step_power,
    "emit-hdl": step_emit_hdl,
    "emit-copr": step_emit_copr,
    "verify": step_verify,
    "all": step_all,
}


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
    except SystemExit as e:     # argparse reports usage errors this way
        return 0 if e.code in (0, None) else 2
    except UsageError as e:
        print(f"cgrflow: {e}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        STEPS[args.command](args)
    except UsageError as e:
        print(f"cgrflow {args.command}: {e}", file=sys.stderr)
        return 2
    except Diagnostics as e:
        for line in e.lines:
            print(line, file=sys.stderr)
        return 1
    except (ParseError, NetworkError, ProfilerError, power.PowerError, hdl.NetlistError,
            copr.CoprError, ValueError) as e:
        print(f"cgrflow {args.command}: {e}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
