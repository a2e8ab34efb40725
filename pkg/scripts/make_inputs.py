"""Write the bundled sample inputs under data/.

    python scripts/make_inputs.py [outdir]
"""
import sys
from pathlib import Path

from cgrflow.formats import DEFAULT_PROTOCOL, dumps_json, network_to_xdf, protocol_to_xml
from cgrflow.ir import Actor, IN, OUT, Port, make_network
from cgrflow.samples import stepwise_networks, roberts_network, sobel_network


def prewitt_network(width=32):
    # third edge filter, sharing the line buffer like its siblings
    net = sobel_network(width)
    actors = tuple(a if a.name != "gradient" else
                   Actor("gradient", "prewitt_grad", (Port("win", IN, width), Port("pel", OUT, width)))
                   for a in net.actors)
    return make_network("prewitt", actors, net.channels, net.ports)


# rough 45nm-ish numbers; area in um^2, power in mW, cp in ns
ANNOTATIONS = {
    "A": (1200.0, 0.020, 0.110, 1.10),
    "C": (800.0, 0.012, 0.070, 0.90),
    "D": (1500.0, 0.025, 0.140, 1.30),
    "E": (950.0, 0.015, 0.090, 1.00),
    "F": (1100.0, 0.018, 0.100, 1.20),
    "G": (700.0, 0.011, 0.060, 0.80),
    "K": (2000.0, 0.030, 0.180, 1.60),
    "line_buffer": (5200.0, 0.080, 0.420, 1.40),
    "roberts_grad": (1800.0, 0.028, 0.160, 1.20),
    "sobel_grad": (3100.0, 0.045, 0.270, 1.70),
    "prewitt_grad": (2900.0, 0.042, 0.250, 1.60),
}
SBOX = {16: (60.0, 0.0010, 0.0040, 0.06), 32: (120.0, 0.0020, 0.0080, 0.07)}
TECH = [(16, 0.09, 0.05), (32, 0.11, 0.06)]


def main(outdir="data"):
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    nets = list(stepwise_networks()) + [roberts_network(), sobel_network(), prewitt_network()]
    for n in nets:
        (out / f"{n.name}.xdf").write_text(network_to_xdf(n))
    comps = {k: v for k, v in ANNOTATIONS.items()}
    for b, v in SBOX.items():
        comps[f"sbox1x2_{b}"] = v
        comps[f"sbox2x1_{b}"] = v
    ann = {"components": {k: {"area": a, "p_static": s, "p_dynamic": d, "cp": cp}
                          for k, (a, s, d, cp) in sorted(comps.items())}}
    (out / "lib.ann.json").write_text(dumps_json(ann))
    (out / "t.tech.json").write_text(dumps_json({"rows": [{"b": b, "f": f, "g": g} for b, f, g in TECH]}))
    (out / "rvc_cal.protocol.xml").write_text(protocol_to_xml(DEFAULT_PROTOCOL))
    print("wrote", ", ".join(sorted(p.name for p in out.iterdir())))


if __name__ == "__main__":
    main(*sys.argv[1:])
