"""Compile generated drivers with gcc and run them against a register model.

The harness replaces the register file and the local memory with plain
arrays. Every polling loop calls MDC_WAIT_HOOK(), which steps a toy kernel:
word i of output k is the sum of word i of every input, plus 100 * kernel
id + k. Stream links are modeled by MDC_STREAM_PUT/GET. DMA and AXI-FIFO
variants program peripherals through raw register writes that a plain array
cannot react to, so only the no-DMA variants are run; all variants are
compiled.
"""
import shutil
import subprocess
from pathlib import Path

GCC = shutil.which("gcc")
STRICT = ["-std=c99", "-Wall", "-Wextra", "-Werror", "-pedantic"]
SIZE = 5


def gcc(args, cwd):
    return subprocess.run([GCC] + args, cwd=cwd, capture_output=True, text=True)


_m32 = None


def m32_available(tmp) -> bool:
    """True if gcc can compile freestanding 32-bit objects here."""
    global _m32
    if _m32 is None:
        probe = Path(tmp) / "probe32.c"
        probe.write_text("int f(int x) { return x + 1; }\n")
        _m32 = gcc(["-m32", "-ffreestanding", "-c", probe.name, "-o", "probe32.o"], tmp).returncode == 0
    return _m32


def compile_standalone(files: dict, cfg, tmp) -> list:
    """Errors from compiling the driver as a 64-bit and, if possible, a 32-bit object."""
    for name, text in files.items():
        (Path(tmp) / name).write_text(text)
    src = f"{cfg.ip_name}.c"
    errs = []
    r = gcc(STRICT + ["-ffreestanding", "-DMDC_ADDR_T=unsigned long", "-c", src, "-o", "host.o"], tmp)
    if r.returncode:
        errs.append(r.stderr)
    # on a 32-bit target the default address type is used as is
    if m32_available(tmp):
        r = gcc(STRICT + ["-ffreestanding", "-m32", "-c", src, "-o", "t32.o"], tmp)
        if r.returncode:
            errs.append(r.stderr)
    return errs


HARNESS = r"""
#include <stdio.h>
#include "harness.h"
#include "@IP@.h"

int h_regs[64];
int h_mem[@MEMWORDS@];
static int q[8][256];
static int nq[8];
static int nread[8];
static const int in_link[] = {@INLINKS@};
static const int out_link[] = {@OUTLINKS@};
static const int out_seg[] = {@OUTSEGS@};
static const int in_seg[] = {@INSEGS@};
static const int out_reg[] = {@OUTREGS@};
#define N_IN @NIN@
#define N_OUT @NOUT@

/* toy kernel: word i of output k sums word i of every input,
   plus 100 * kernel id + k */
static int word(int k, int i, int id, int mm)
{
    int j, v = 100 * id + k;
    for (j = 0; j < N_IN; j++) {
        if (mm) {
            if (i < h_regs[1 + j])
                v += h_mem[in_seg[j] * @WORDS@ + i];
        } else if (i < nq[in_link[j]]) {
            v += q[in_link[j]][i];
        }
    }
    return v;
}

void model_step(void)
{
    int id = (h_regs[0] >> 24) & 0xff, k, i;
    if (!(h_regs[0] & 1) || (h_regs[0] & 2))
        return;
    if (@MM@) {
        for (k = 0; k < N_OUT; k++)
            for (i = 0; i < h_regs[out_reg[k]]; i++)
                h_mem[out_seg[k] * @WORDS@ + i] = word(k, i, id, 1);
    }
    h_regs[0] |= 2;
}

void h_put(int link, int v) { q[link][nq[link]++] = v; }

int h_get(int link)
{
    int k;
    for (k = 0; k < N_OUT; k++)
        if (out_link[k] == link)
            return word(k, nread[link]++, (h_regs[0] >> 24) & 0xff, 0);
    return -1;
}

int main(void)
{
    int out[@SIZE@], a[@SIZE@], b[@SIZE@], i, rc;
    for (i = 0; i < @SIZE@; i++) { a[i] = i + 1; b[i] = 3 * i; }
    a[0] = @SIZE@;
    rc = @IP@_@CONF@(@SIZE@, out, @SIZE@, b, 1, a);
    printf("%d", rc);
    for (i = 0; i < @SIZE@; i++)
        printf(" %d", out[i]);
    printf("\n");
    return 0;
}
"""


HARNESS_H = """
extern int h_regs[];
extern int h_mem[];
void model_step(void);
void h_put(int link, int v);
int h_get(int link);
"""


def expected_run(conf_id, size=SIZE):
    a = [size] + [i + 1 for i in range(1, size)]
    b = [3 * i for i in range(size)]
    ins = [a[:1], b]   # in_size carries one word, in_pel carries size words
    out = [sum(x[i] for x in ins if i < len(x)) + 100 * conf_id for i in range(size)]
    return "0 " + " ".join(map(str, out))


def run_driver(cfg, plan, files: dict, conf: str, tmp, size=SIZE) -> str:
    """Build the driver with the harness, run ``<ip>_<conf>`` and return its output line.

    The harness main() is written for the three-port edge example
    (in_size, in_pel -> out_pel).
    """
    tmp = Path(tmp)
    for name, text in files.items():
        (tmp / name).write_text(text)
    order = plan.inputs + plan.outputs
    subs = {
        "@IP@": cfg.ip_name, "@CONF@": conf, "@SIZE@": str(size),
        "@WORDS@": str(plan.mem_words), "@MEMWORDS@": str(plan.mem_words * len(order)),
        "@NIN@": str(len(plan.inputs)), "@NOUT@": str(len(plan.outputs)),
        "@MM@": "1" if plan.variant == "mm" else "0",
        "@INLINKS@": ", ".join(str(order.index(p)) for p in plan.inputs),
        "@OUTLINKS@": ", ".join(str(order.index(p)) for p in plan.outputs),
        "@INSEGS@": ", ".join(str(order.index(p)) for p in plan.inputs),
        "@OUTSEGS@": ", ".join(str(order.index(p)) for p in plan.outputs),
        "@OUTREGS@": ", ".join(str(plan.register(p).index) for p in plan.outputs),
    }
    text = HARNESS
    for k, v in subs.items():
        text = text.replace(k, v)
    (tmp / "harness.c").write_text(text)
    (tmp / "harness.h").write_text(HARNESS_H)
    IP = cfg.ip_name.upper()
    defs = [
        "-DMDC_ADDR_T=unsigned long",
        "-DMDC_WAIT_HOOK()=model_step()",
        "-DMDC_STREAM_PUT(l,v)=h_put(l,v)",
        "-DMDC_STREAM_GET(l)=h_get(l)",
        f"-DXPAR_{IP}_0_CFG_BASEADDR=((unsigned long) h_regs)",
        f"-DXPAR_{IP}_0_MEM_BASEADDR=((unsigned long) h_mem)",
    ]
    r = gcc(STRICT + defs + ["-include", "harness.h", "harness.c", f"{cfg.ip_name}.c", "-o", "run"], tmp)
    if r.returncode:
        raise RuntimeError(r.stderr)
    out = subprocess.run([str(tmp / "run")], capture_output=True, text=True, timeout=10)
    return out.stdout.strip()
