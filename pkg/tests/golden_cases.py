"""Inputs and outputs behind the committed golden files.

    python tests/golden_cases.py    # rewrite tests/golden after a reviewed change
"""
from pathlib import Path

from cgrflow import copr, hdl
from cgrflow.merge import merge_all
from cgrflow.samples import roberts_network, sobel_network

GOLDEN = Path(__file__).parent / "golden"


def edge_merge():
    return merge_all([roberts_network(), sobel_network()])


def hdl_files():
    m, ctab = edge_merge()
    return hdl.emit_verilog(hdl.plan_netlist(m, ctab))


def copr_scripts(processor=copr.ARM, coupling=copr.MM, dma=True):
    m, ctab = edge_merge()
    cfg = copr.DeploymentConfig(processor=processor, coupling=coupling, dma=dma)
    plan = copr.plan_til(m, cfg, ctab)
    core = {k: v for k, v in hdl_files().items() if not k.startswith("stubs/")}
    files = dict(sorted({**core, **copr.emit_til_hdl(plan, m)}.items()))
    drivers = copr.emit_drivers(plan, cfg, m, ctab)
    return copr.emit_scripts(cfg, plan, list(files), list(drivers))


CASES = {
    "hdl": hdl_files,
    "scripts_arm_mm_dma": copr_scripts,
    "scripts_microblaze_stream": lambda: copr_scripts(copr.MICROBLAZE, copr.STREAM, False),
}


def write_all():
    for name, make in CASES.items():
        for fname, text in make().items():
            path = GOLDEN / name / fname
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text)


if __name__ == "__main__":
    write_all()
