"""Target renderings: cuda-style, opencl-style and a serial reference.

The serial target turns device concepts into plain host code.  Blocks run
in outer loops, threads in inner loops, and each block barrier becomes a
phase split of the thread loop.
"""

from __future__ import annotations

import os
import shutil
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path

from .errors import AccError, error, fail

TARGETS = ("cuda", "opencl", "serial")
AXES = "xyz"


@dataclass(frozen=True)
class TargetProfile:
    name: str
    suffix: str
    sidecar: str  # kernel-source file suffix, or None when kernels live in the main output
    kernel_qualifier: str
    device_qualifier: str  # prefix for hoisted functions
    thread_id: str  # "{axis}"/"{dim}" placeholders
    block_id: str
    block_dim: str
    grid_dim: str
    barrier: str
    shared_decl: str  # "{type} {name}[{size}];"
    global_prefix: str  # address-space qualifier for pointer parameters
    handle_type: str  # device handle type, or None for a typed pointer
    env_arg: str  # leading argument threaded through runtime calls
    alloc: str = "acc_alloc"
    h2d: str = "acc_copy_h2d"
    d2h: str = "acc_copy_d2h"
    free: str = "acc_free"
    launch_syntax: str = ""
    launch_pattern: str = ""

    def call(self, fn, *args):
        lead = [self.env_arg] if self.env_arg else []
        return f"{fn}({', '.join(lead + [str(a) for a in args])})"

    def handle_decl(self, pointer_decl, name):
        if self.handle_type:
            return f"{self.handle_type} {name}"
        return pointer_decl.format(name=name)

    def alloc_expr(self, cast, nbytes):
        if self.handle_type:
            return self.call(self.alloc, nbytes)
        return f"({cast}){self.call(self.alloc, nbytes)}"

    def index(self, template, dim):
        return template.format(axis=AXES[dim], dim=dim)


PROFILES = {
    "cuda": TargetProfile(
        name="cuda", suffix=".cu", sidecar=None,
        kernel_qualifier="__global__ void", device_qualifier="__device__ ",
        thread_id="threadIdx.{axis}", block_id="blockIdx.{axis}",
        block_dim="blockDim.{axis}", grid_dim="gridDim.{axis}",
        barrier="__syncthreads();", shared_decl="__shared__ {type} {name}[{size}];",
        global_prefix="", handle_type=None, env_arg=None,
        launch_syntax="{kernel}<<<{grid}, {block}>>>({args})", launch_pattern=r"<<<",
    ),
    "opencl": TargetProfile(
        name="opencl", suffix=".c", sidecar=".cl",
        kernel_qualifier="__kernel void", device_qualifier="",
        thread_id="(int)get_local_id({dim})", block_id="(int)get_group_id({dim})",
        block_dim="(int)get_local_size({dim})", grid_dim="(int)get_num_groups({dim})",
        barrier="barrier(CLK_LOCAL_MEM_FENCE);", shared_decl="__local {type} {name}[{size}];",
        global_prefix="__global ", handle_type="cl_mem", env_arg="acc_env()",
        launch_syntax="acc_launch({env}, {kernel}, {dims}, {grid}, {block})", launch_pattern=r"\bacc_launch\(",
    ),
    "serial": TargetProfile(
        name="serial", suffix=".c", sidecar=None,
        kernel_qualifier="static void", device_qualifier="static ",
        thread_id="threadIdx.{axis}", block_id="blockIdx.{axis}",
        block_dim="blockDim.{axis}", grid_dim="gridDim.{axis}",
        barrier="/* barrier: thread loop split into phases */", shared_decl="{type} {name}[{size}];",
        global_prefix="", handle_type=None, env_arg=None,
        launch_syntax="{kernel}(accb_b, accb_t, accb_block, accb_grid{args})",
        launch_pattern=r"\b__accb_kernel_\w+\(accb_b\b",
    ),
}


def get_profile(target):
    try:
        return PROFILES[target]
    except KeyError:
        fail("E_TARGET", f"unknown target '{target}' (expected one of {', '.join(TARGETS)})")


# --------------------------------------------------------------------------
# reduction pieces

IDENTITY_LIMITS = {
    "int": ("INT_MIN", "INT_MAX"), "signed": ("INT_MIN", "INT_MAX"), "unsigned int": ("0", "UINT_MAX"),
    "unsigned": ("0", "UINT_MAX"), "short": ("SHRT_MIN", "SHRT_MAX"), "unsigned short": ("0", "USHRT_MAX"),
    "char": ("CHAR_MIN", "CHAR_MAX"), "signed char": ("SCHAR_MIN", "SCHAR_MAX"),
    "unsigned char": ("0", "UCHAR_MAX"), "long": ("LONG_MIN", "LONG_MAX"), "unsigned long": ("0", "ULONG_MAX"),
    "long long": ("LLONG_MIN", "LLONG_MAX"), "unsigned long long": ("0", "ULLONG_MAX"),
    "float": ("-FLT_MAX", "FLT_MAX"), "double": ("-DBL_MAX", "DBL_MAX"), "_Bool": ("0", "1"),
}


def identity(operator, ctype):
    if operator == "+":
        return "0"
    if operator == "*":
        return "1"
    low, high = IDENTITY_LIMITS.get(ctype, ("-DBL_MAX", "DBL_MAX"))
    return low if operator == "max" else high


def combine(operator, a, b):
    if operator in ("+", "*"):
        return f"{a} {operator} {b}"
    cmp = ">" if operator == "max" else "<"
    return f"(({a}) {cmp} ({b}) ? ({a}) : ({b}))"


def _next_pow2(n):
    p = 1
    while p < n:
        p <<= 1
    return p


def _linear(profile, template, dims, extent_template):
    """Row-major linear id over up to two dimensions."""
    parts = profile.index(template, 0)
    if dims > 1:
        parts = f"{parts} + {profile.index(template, 1)} * {profile.index(extent_template, 0)}"
    return parts


def reduction_epilogue(spec, red, profile):
    """Block-local tree reduction writing one partial per block."""
    dims = spec.geometry.dims
    threads = spec.geometry.threads
    tid = _linear(profile, profile.thread_id, dims, profile.block_dim)
    if profile.name == "serial":
        return [f"{red.scratch}[{tid}] = {red.variable};"]
    bid = _linear(profile, profile.block_id, dims, profile.grid_dim)
    first = _next_pow2(threads) // 2
    s = red.scratch
    return [
        "{",
        f"    int accb_tid = {tid};",
        "    int accb_s;",
        f"    {s}[accb_tid] = {red.variable};",
        f"    {profile.barrier}",
        f"    for (accb_s = {first}; accb_s > 0; accb_s >>= 1) {{",
        f"        if (accb_tid < accb_s && accb_tid + accb_s < {threads})",
        f"            {s}[accb_tid] = {combine(red.operator, f'{s}[accb_tid]', f'{s}[accb_tid + accb_s]')};",
        f"        {profile.barrier}",
        "    }",
        "    if (accb_tid == 0)",
        f"        {red.partials}[{bid}] = {s}[0];",
        "}",
    ]


def _serial_phases(spec, red):
    # the barriers of the tree reduction become one thread loop per phase
    threads = spec.geometry.threads
    s = red.scratch
    return [
        f"for (accb_s = {_next_pow2(threads) // 2}; accb_s > 0; accb_s >>= 1)",
        "    for (accb_i = 0; accb_i < accb_s; ++accb_i)",
        f"        if (accb_i + accb_s < {threads})",
        f"            {s}[accb_i] = {combine(red.operator, f'{s}[accb_i]', f'{s}[accb_i + accb_s]')};",
        f"{red.partials}[accb_b.x + accb_b.y * accb_grid.x] = {s}[0];",
    ]


# --------------------------------------------------------------------------
# kernels

def _indent(lines, n=1):
    pad = "    " * n
    return [pad + line if line else line for line in lines]


def kernel_signature(spec, profile):
    params = [p.render(profile.global_prefix if p.kind in ("array", "partials") else "") for p in spec.params]
    if profile.name == "serial":
        params = ["accb_dim3 blockIdx", "accb_dim3 threadIdx", "accb_dim3 blockDim", "accb_dim3 gridDim"] + params
        params += [f"{r.ctype} *{r.scratch}" for r in spec.reductions]
    return f"{profile.kernel_qualifier} {spec.name}({', '.join(params) or 'void'})"


def emit_kernel(spec, profile):
    """Kernel definition text for one KernelSpec."""
    geom = spec.geometry
    out = [kernel_signature(spec, profile), "{"]
    inner = []
    if profile.name != "serial":
        for r in spec.reductions:
            inner.append(profile.shared_decl.format(type=r.ctype, name=r.scratch, size=geom.threads))
    for k, loop in enumerate(geom.loops):
        linear = f"{profile.index(profile.thread_id, k)} + {profile.index(profile.block_id, k)} * " \
                 f"{profile.index(profile.block_dim, k)}"
        inner.append(f"{loop.ctype} {loop.index} = {loop.index_expr(linear)};")
    inner.extend(spec.locals)
    for r in spec.reductions:
        inner.append(f"{r.ctype} {r.variable} = {r.identity};")
    body = spec.body.strip("\n")
    body_lines = [body] if body.strip() else []
    if spec.wrap_continue:
        body_lines = ["do {"] + body_lines + ["} while (0);"]
    if spec.guard:
        inner.append(f"if ({spec.guard}) {{")
    else:
        inner.append("{")
    inner.extend(body_lines)
    inner.append("}")
    for r in spec.reductions:
        inner.extend(reduction_epilogue(spec, r, profile))
    out.extend(_indent(inner))
    out.append("}")
    return "\n".join(out) + "\n"


def emit_launch(spec, profile):
    """Host statements that run one kernel over accb_g0.. blocks."""
    geom = spec.geometry
    dims = geom.dims
    grid = [f"accb_g{k}" for k in range(dims)]
    if profile.name == "cuda":
        g = ", ".join(f"(unsigned)accb_g{k}" for k in range(dims))
        b = ", ".join(str(x) for x in geom.block)
        call = profile.launch_syntax.format(kernel=spec.name, grid="accb_grid", block="accb_block",
                                            args=", ".join(spec.args))
        return [f"dim3 accb_grid({g}), accb_block({b});", f"{call};", "acc_sync();"]
    if profile.name == "opencl":
        lines = [f'cl_kernel accb_k = acc_kernel(acc_env(), "{spec.name}");']
        for n, p in enumerate(spec.params):
            if p.kind in ("array", "partials"):
                lines.append(f"acc_set_arg(accb_k, {n}, sizeof(cl_mem), &{p.host_arg});")
            else:
                lines.append(f"{{ {p.ctype} accb_v = {p.host_arg}; acc_set_arg(accb_k, {n}, sizeof(accb_v), &accb_v); }}")
        lws = ", ".join(str(x) for x in geom.block)
        gws = ", ".join(f"(size_t)accb_g{k} * {b}" for k, b in enumerate(geom.block))
        lines.append(f"size_t accb_lws[{dims}] = {{{lws}}};")
        lines.append(f"size_t accb_gws[{dims}] = {{{gws}}};")
        lines.append(profile.launch_syntax.format(env=profile.env_arg, kernel="accb_k", dims=dims,
                                                  grid="accb_gws", block="accb_lws") + ";")
        return lines
    # serial: blocks outer, threads inner
    gx, gy = (grid + ["1"])[:2]
    bx, by = (list(geom.block) + [1])[:2]
    args = "".join(", " + a for a in spec.args) + "".join(", " + r.scratch for r in spec.reductions)
    call = profile.launch_syntax.format(kernel=spec.name, args=args)
    lines = [
        "accb_dim3 accb_grid, accb_block, accb_b, accb_t;",
        "int accb_s, accb_i;",
        f"accb_grid.x = (int){gx}; accb_grid.y = (int){gy}; accb_grid.z = 1;",
        f"accb_block.x = {bx}; accb_block.y = {by}; accb_block.z = 1;",
        "accb_b.z = 0; accb_t.z = 0;",
        "(void)accb_s; (void)accb_i;",
        "for (accb_b.y = 0; accb_b.y < accb_grid.y; ++accb_b.y)",
        "for (accb_b.x = 0; accb_b.x < accb_grid.x; ++accb_b.x) {",
    ]
    block = [profile.shared_decl.format(type=r.ctype, name=r.scratch, size=geom.threads) for r in spec.reductions]
    block += [
        "for (accb_t.y = 0; accb_t.y < accb_block.y; ++accb_t.y)",
        "    for (accb_t.x = 0; accb_t.x < accb_block.x; ++accb_t.x)",
        f"        {call};",
    ]
    for r in spec.reductions:
        block.extend(_serial_phases(spec, r))
    lines.extend(_indent(block))
    lines.append("}")
    return lines


# --------------------------------------------------------------------------
# runtime preludes

_COMMON_INCLUDES = """\
#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include <math.h>
#include <limits.h>
#include <float.h>
"""

_PRESENT_TABLE = """\
#define ACC_PRESENT_MAX 256
static struct { const void *host; {handle} dev; } acc_present_table[ACC_PRESENT_MAX];
static int acc_present_count = 0;

static void acc_fatal(const char *what)
{
    fprintf(stderr, "accb runtime: %s\\n", what);
    exit(1);
}

static void acc_map({env}const void *host, {handle} dev)
{
    if (acc_present_count == ACC_PRESENT_MAX)
        acc_fatal("too many live device allocations");
    acc_present_table[acc_present_count].host = host;
    acc_present_table[acc_present_count].dev = dev;
    ++acc_present_count;
}

static void acc_unmap({env}const void *host)
{
    int k;
    for (k = acc_present_count - 1; k >= 0; --k) {
        if (acc_present_table[k].host == host) {
            acc_present_table[k] = acc_present_table[--acc_present_count];
            return;
        }
    }
}

static {handle} acc_present_lookup({env}const void *host)
{
    int k;
    for (k = acc_present_count - 1; k >= 0; --k)
        if (acc_present_table[k].host == host)
            return acc_present_table[k].dev;
    acc_fatal("present clause names data that is not on the device");
    return acc_present_table[0].dev;
}
"""

_SERIAL_RUNTIME = """\
typedef struct { int x, y, z; } accb_dim3;

static void *acc_alloc(size_t bytes)
{
    void *p = malloc(bytes ? bytes : 1);
    if (!p)
        acc_fatal("device allocation failed");
    return p;
}

static void acc_copy_h2d(void *dst, const void *src, size_t bytes, size_t offset)
{
    memcpy((char *)dst + offset, (const char *)src + offset, bytes);
}

static void acc_copy_d2h(void *dst, const void *src, size_t bytes, size_t offset)
{
    memcpy((char *)dst + offset, (const char *)src + offset, bytes);
}

static void acc_free(void *p)
{
    free(p);
}
"""

_CUDA_RUNTIME = """\
static void acc_check(cudaError_t err, const char *what)
{
    if (err != cudaSuccess) {
        fprintf(stderr, "accb runtime: %s: %s\\n", what, cudaGetErrorString(err));
        exit(1);
    }
}

static void *acc_alloc(size_t bytes)
{
    void *p = NULL;
    acc_check(cudaMalloc(&p, bytes ? bytes : 1), "cudaMalloc");
    return p;
}

static void acc_copy_h2d(void *dst, const void *src, size_t bytes, size_t offset)
{
    acc_check(cudaMemcpy((char *)dst + offset, (const char *)src + offset, bytes, cudaMemcpyHostToDevice),
              "host to device copy");
}

static void acc_copy_d2h(void *dst, const void *src, size_t bytes, size_t offset)
{
    acc_check(cudaMemcpy((char *)dst + offset, (const char *)src + offset, bytes, cudaMemcpyDeviceToHost),
              "device to host copy");
}

static void acc_free(void *p)
{
    acc_check(cudaFree(p), "cudaFree");
}

static void acc_sync(void)
{
    acc_check(cudaGetLastError(), "kernel launch");
    acc_check(cudaDeviceSynchronize(), "kernel execution");
}
"""

_OPENCL_RUNTIME = """\
struct accb_env {
    cl_device_id device;
    cl_context context;
    cl_command_queue queue;
    cl_program program;
    int ready;
};

static void acc_check(cl_int err, const char *what)
{
    if (err != CL_SUCCESS) {
        fprintf(stderr, "accb runtime: %s failed (%d)\\n", what, (int)err);
        exit(1);
    }
}

/* The kernel file is looked up next to the executable, then in the working directory. */
static char *acc_read_kernels(size_t *length)
{
    char path[4096];
    FILE *f = NULL;
    char *text;
    long n;
    ssize_t k = readlink("/proc/self/exe", path, sizeof path - 1);
    if (k > 0) {
        char *slash;
        path[k] = 0;
        slash = strrchr(path, '/');
        if (slash && (size_t)(slash - path) + 1 + sizeof accb_cl_file < sizeof path) {
            strcpy(slash + 1, accb_cl_file);
            f = fopen(path, "rb");
        }
    }
    if (!f)
        f = fopen(accb_cl_file, "rb");
    if (!f)
        acc_fatal("cannot open the OpenCL kernel file");
    fseek(f, 0, SEEK_END);
    n = ftell(f);
    fseek(f, 0, SEEK_SET);
    text = (char *)malloc((size_t)n + 1);
    if (!text || fread(text, 1, (size_t)n, f) != (size_t)n)
        acc_fatal("cannot read the OpenCL kernel file");
    text[n] = 0;
    fclose(f);
    *length = (size_t)n;
    return text;
}

static accb_env *acc_env(void)
{
    static accb_env env;
    if (!env.ready) {
        cl_platform_id platform;
        cl_uint count = 0;
        cl_int err;
        size_t length;
        const char *source;
        acc_check(clGetPlatformIDs(1, &platform, &count), "clGetPlatformIDs");
        if (count == 0)
            acc_fatal("no OpenCL platform");
        if (clGetDeviceIDs(platform, CL_DEVICE_TYPE_GPU, 1, &env.device, NULL) != CL_SUCCESS)
            acc_check(clGetDeviceIDs(platform, CL_DEVICE_TYPE_ALL, 1, &env.device, NULL), "clGetDeviceIDs");
        env.context = clCreateContext(NULL, 1, &env.device, NULL, NULL, &err);
        acc_check(err, "clCreateContext");
        env.queue = clCreateCommandQueue(env.context, env.device, 0, &err);
        acc_check(err, "clCreateCommandQueue");
        source = acc_read_kernels(&length);
        env.program = clCreateProgramWithSource(env.context, 1, &source, &length, &err);
        acc_check(err, "clCreateProgramWithSource");
        if (clBuildProgram(env.program, 1, &env.device, "", NULL, NULL) != CL_SUCCESS) {
            char log[16384];
            clGetProgramBuildInfo(env.program, env.device, CL_PROGRAM_BUILD_LOG, sizeof log, log, NULL);
            fprintf(stderr, "%s\\n", log);
            acc_fatal("OpenCL kernel build failed");
        }
        env.ready = 1;
    }
    return &env;
}

static cl_mem acc_alloc(accb_env *env, size_t bytes)
{
    cl_int err;
    cl_mem m = clCreateBuffer(env->context, CL_MEM_READ_WRITE, bytes ? bytes : 1, NULL, &err);
    acc_check(err, "clCreateBuffer");
    return m;
}

static void acc_copy_h2d(accb_env *env, cl_mem dst, const void *src, size_t bytes, size_t offset)
{
    if (bytes)
        acc_check(clEnqueueWriteBuffer(env->queue, dst, CL_TRUE, offset, bytes, (const char *)src + offset,
                                       0, NULL, NULL), "host to device copy");
}

static void acc_copy_d2h(accb_env *env, void *dst, cl_mem src, size_t bytes, size_t offset)
{
    if (bytes)
        acc_check(clEnqueueReadBuffer(env->queue, src, CL_TRUE, offset, bytes, (char *)dst + offset,
                                      0, NULL, NULL), "device to host copy");
}

static void acc_free(accb_env *env, cl_mem m)
{
    (void)env;
    clReleaseMemObject(m);
}

static cl_kernel acc_kernel(accb_env *env, const char *name)
{
    cl_int err;
    cl_kernel k = clCreateKernel(env->program, name, &err);
    acc_check(err, "clCreateKernel");
    return k;
}

static void acc_set_arg(cl_kernel k, cl_uint index, size_t size, const void *value)
{
    acc_check(clSetKernelArg(k, index, size, value), "clSetKernelArg");
}

static void acc_launch(accb_env *env, cl_kernel k, cl_uint dims, const size_t *global, const size_t *local)
{
    acc_check(clEnqueueNDRangeKernel(env->queue, k, dims, NULL, global, local, 0, NULL, NULL),
              "clEnqueueNDRangeKernel");
    acc_check(clFinish(env->queue), "clFinish");
    clReleaseKernel(k);
}
"""


def emit_host_runtime(profile, kernel_file=None):
    """Self-contained runtime helpers for the host side of one target."""
    head = [f"/* accb runtime: {profile.name} target */"]
    if profile.name == "opencl":
        head += ["#define CL_TARGET_OPENCL_VERSION 120", "#define CL_USE_DEPRECATED_OPENCL_1_2_APIS"]
    text = "\n".join(head) + "\n" + _COMMON_INCLUDES
    if profile.name == "cuda":
        text += "#include <cuda_runtime.h>\n"
    elif profile.name == "opencl":
        text += "#include <unistd.h>\n#include <CL/cl.h>\n"
        text += f'\nstatic const char accb_cl_file[] = "{kernel_file or "kernels.cl"}";\n'
        text += "typedef struct accb_env accb_env;\n"
    handle = "cl_mem " if profile.name == "opencl" else "void *"
    env = "accb_env *env, " if profile.name == "opencl" else ""
    table = _PRESENT_TABLE.replace("{handle}", handle).replace("{env}", env)
    text += "\n" + table + "\n"
    text += {"serial": _SERIAL_RUNTIME, "cuda": _CUDA_RUNTIME, "opencl": _OPENCL_RUNTIME}[profile.name]
    return text


_CL_MATH = """sqrt fabs exp exp2 log log2 log10 pow sin cos tan asin acos atan atan2 sinh cosh
tanh floor ceil round trunc fmod fmin fmax hypot cbrt copysign rsqrt""".split()


def emit_device_prelude(profile):
    """Header of the OpenCL kernel file; empty for single-file targets."""
    if profile.name != "opencl":
        return ""
    lines = [
        "/* accb kernels: opencl target */",
        "#pragma OPENCL EXTENSION cl_khr_fp64 : enable",
        "#define LLONG_MAX LONG_MAX",
        "#define LLONG_MIN LONG_MIN",
        "#define ULLONG_MAX ULONG_MAX",
    ]
    lines += [f"#define {fn}f {fn}" for fn in _CL_MATH]
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# running serial output

@dataclass(frozen=True)
class RunResult:
    returncode: int
    stdout: str
    stderr: str


def execute_serial(source, compiler="cc", stdin=None, args=(), flags=("-O1",), timeout=60, workdir=None):
    """Compile serial-target output and run it.

    Raises AccError with E_CC when compilation fails and E_RUN when the
    program exits with a nonzero status.
    """
    exe_compiler = shutil.which(compiler)
    if exe_compiler is None:
        fail("E_NOCC", f"compiler '{compiler}' not found")
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        src = Path(tmp) / "prog_ipmacc.c"
        exe = Path(tmp) / "prog"
        src.write_text(source)
        cmd = [exe_compiler, *flags, str(src), "-o", str(exe), "-lm"]
        cc = subprocess.run(cmd, capture_output=True, text=True, timeout=timeout)
        if cc.returncode != 0:
            raise AccError(error("E_CC", f"compilation failed:\n{cc.stderr}", (1, 1)))
        run = subprocess.run([str(exe), *args], input=stdin, capture_output=True, text=True,
                             timeout=timeout, cwd=tmp, env={**os.environ})
        if run.returncode != 0:
            raise AccError(error("E_RUN", f"program exited with status {run.returncode}:\n{run.stderr}", (1, 1)))
        return RunResult(run.returncode, run.stdout, run.stderr)
