import re

import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from accb.accvalidate import check
from accb.backends import emit_host_runtime, emit_kernel, get_profile
from accb.cfront import eval_int, normalize, parse_ast, tokenize
from accb.errors import AccError
from accb.irdoc import build_intermediate, revert
from accb.translate import (
    PARALLELISM_MAPPING, TransferSize, find_nests, hoist_declarations, infer_transfer_size, lower_data_clauses,
    map_parallelism, output_names, resolve_scope, translate_source,
)
from accb.translate.pipeline import assemble_output
from accb.translate.lowering import render_hoisted

from _util import CORPUS, compile_c, have, host_syntax_check, run_exe, run_translated, wrap_main

MATMUL = """#define LEN 64
float a[LEN*LEN], b[LEN*LEN], c[LEN*LEN];
int main(void) {
  int i, j, l;
  float sum;
#pragma acc data copy(a[0:LEN*LEN],b[0:LEN*LEN],c[0:LEN*LEN])
#pragma acc kernels
#pragma acc loop independent
  for(i=0; i<LEN; ++i){
#pragma acc loop independent
    for(j=0; j<LEN; ++j){
      sum=0;
      for(l=0; l<LEN; ++l) sum += a[i*LEN+l]*b[l*LEN+j];
      c[i*LEN+j]=sum;
    }
  }
  return 0;
}
"""


def regions(text):
    src = normalize(tokenize(text))
    ast = parse_ast(src)
    directives, _ = check(src, ast)
    _, table = revert(build_intermediate(src, directives), ast)
    return ast, list(table.values())


def kernels_region(text, k=0):
    ast, rs = regions(text)
    return ast, [r for r in rs if r.kind == "kernels"][k]


def geometry(text, k=0):
    ast, region = kernels_region(text, k)
    nests = find_nests(region, ast, [])
    return [map_parallelism(n, ast) for n in nests]


def codes(text, target="serial"):
    with pytest.raises(AccError) as e:
        translate_source(text, target)
    return e.value.codes


def one_loop(header, body="a[i] = 0;", clauses="", decls="float a[4096];\nint n = 100, m = 3, i;\n"):
    return wrap_main(f"#pragma acc kernels copy(a)\n{{\n#pragma acc loop independent {clauses}\n"
                     f"{header} {body}\n}}", decls=decls)


# ---------------------------------------------------------------- scope

def test_golden_scope_bindings():
    ast, region = kernels_region(MATMUL)
    scope = resolve_scope(region, ast, {"i", "j"})
    kinds = {n: b.kind for n, b in scope.bindings.items()}
    assert {kinds[v] for v in "abc"} == {"array"}
    assert kinds["i"] == kinds["j"] == "loop-index"
    assert kinds["l"] == kinds["sum"] == "scalar"
    assert kinds["LEN"] == "constant"
    a = scope["a"]
    assert a.ctype == "float" and a.size == TransferSize("(LEN*LEN)*4", "0", "(LEN*LEN)*4")


def test_user_function_binding():
    text = ("float dist(float x, float y) { return x > y ? x - y : y - x; }\nfloat a[8];\n" +
            wrap_main("int i;\n#pragma acc kernels copy(a)\n{\n#pragma acc loop independent\n"
                      "for (i = 0; i < 8; i++) a[i] = dist(a[i], 2.0f);\n}", head=""))
    ast, region = kernels_region(text)
    b = resolve_scope(region, ast, {"i"})["dist"]
    assert b.kind == "user-function"
    assert ast.text(b.span).startswith("float dist(float x, float y)")


def test_unbound_identifier():
    text = one_loop("for (i = 0; i < n; i++)", "a[i] = q;")
    with pytest.raises(AccError) as e:
        translate_source(text, "serial")
    assert e.value.codes == ["E_UNBOUND"]
    assert "'q'" in e.value.diagnostics[0].message


def test_inner_declaration_shadows_outer():
    text = wrap_main("int i;\nfloat t = 5.0f;\n#pragma acc kernels copy(a)\n{\n#pragma acc loop independent\n"
                     "for (i = 0; i < 8; i++) { float t = i; a[i] = t; }\n}\nprintf(\"%.1f %.1f\\n\", a[7], t);",
                     decls="float a[8];\n")
    ast, region = kernels_region(text)
    assert resolve_scope(region, ast, {"i"})["t"].kind == "local"
    assert run_translated(text) == "7.0 5.0\n"


@pytest.mark.parametrize("call", ["printf(\"x\")", "undefined_fn(1)", "malloc(4)"])
def test_host_or_unknown_calls_rejected(call):
    assert codes(one_loop("for (i = 0; i < n; i++)", f"a[i] = 0; {call};")) in (["E_UNSUPPORTED"], ["E_UNBOUND"])


def test_parallelism_mapping_table():
    assert PARALLELISM_MAPPING == {"gang": "kernel", "worker": "thread block", "vector": "warp",
                                   "thread": "thread"}


# ---------------------------------------------------------------- transfer sizes

def _array_binding(decls, clause):
    text = wrap_main(f"int i;\n#pragma acc kernels {clause}\n{{\n#pragma acc loop independent\n"
                     "for (i = 0; i < 4; i++) t[i] = 0;\n}", decls=decls)
    ast, region = kernels_region(text)
    scope = resolve_scope(region, ast, {"i"})
    c = region.directive.clauses[0]
    return infer_transfer_size(scope["t"], c, ast)


def test_size_from_bounds():
    assert _array_binding("#define LEN 8\nfloat t[64];\n", "copy(t[0:LEN*LEN])") == \
        TransferSize("(LEN*LEN)*4", "0", "(LEN*LEN)*4")


def test_size_from_fixed_extent():
    assert _array_binding("float t[10];\n", "copy(t)").bytes == "40"


def test_size_with_offset():
    s = _array_binding("double t[100];\n", "copyin(t[2:n])")
    assert (s.bytes, s.offset) == ("(n)*8", "16")


def test_pointer_without_bounds_is_unknown():
    text = ("#include <stdlib.h>\n" +
            wrap_main("int i;\nfloat *t = (float *)malloc(16);\n#pragma acc kernels copy(t)\n{\n"
                      "#pragma acc loop independent\nfor (i = 0; i < 4; i++) t[i] = 0;\n}", head=""))
    ast, region = kernels_region(text)
    scope = resolve_scope(region, ast, {"i"})
    assert infer_transfer_size(scope["t"], region.directive.clauses[0], ast) is None
    assert codes(text) == ["E_SIZE"]


# ---------------------------------------------------------------- geometry

def test_golden_geometry():
    (g,) = geometry(MATMUL)
    assert (g.dims, g.block) == (2, (16, 16))
    assert g.counts == ("LEN", "LEN")
    assert g.grid == ("(LEN + 15) / 16", "(LEN + 15) / 16")
    assert [(d.index, d.lower, d.step) for d in g.loops] == [("i", "0", 1), ("j", "0", 1)]


def test_single_loop_geometry():
    (g,) = geometry(one_loop("for (i = 0; i < n; ++i)"))
    assert (g.dims, g.block, g.grid) == (1, (256,), ("(n + 255) / 256",))


def test_vector_clause_sets_block():
    (g,) = geometry(one_loop("for (i = 0; i < n; ++i)", clauses="vector(128)"))
    assert g.block == (128,)


def test_vector_on_inner_loop_of_2d_nest():
    text = wrap_main("int i, j;\n#pragma acc kernels copy(a)\n{\n#pragma acc loop independent\n"
                     "for (i = 0; i < 8; i++) {\n#pragma acc loop independent vector(32)\n"
                     "for (j = 0; j < 8; j++) a[i*8+j] = 0;\n}\n}", decls="float a[64];\n")
    (g,) = geometry(text)
    assert (g.dims, g.block) == (2, (16, 32))


def test_grid_is_ceiling_of_count():
    for n in (1, 255, 256, 257, 1000, 1000000):
        assert eval_int("(n + 255) / 256".replace("n", str(n))) == -(-n // 256)


@pytest.mark.parametrize("header, count", [
    ("for (i = 0; i < n; i++)", "n"),
    ("for (i = 0; i <= n; i++)", "(n) + 1"),
    ("for (i = 3; i < n; i += 2)", "((n) - (3) + 1) / 2"),
    ("for (i = m; i <= n; i = i + 4)", "((n) - (m) + 4) / 4"),
    ("for (i = 0; n > i; ++i)", "n"),
])
def test_iteration_counts(header, count):
    (g,) = geometry(one_loop(header))
    assert g.counts == (count,)


@pytest.mark.parametrize("header", ["for (i = 0; i < n; i += m)", "for (i = 0; i < n; i--)",
                                    "for (i = 0; i < n; i *= 2)"])
def test_non_constant_step(header):
    assert codes(one_loop(header)) == ["E_STEP"]


def test_decreasing_loop_rejected_at_condition():
    with pytest.raises(AccError) as e:
        translate_source(one_loop("for (i = n; i > 0; i--)"), "serial")
    assert e.value.codes == ["E_UNSUPPORTED"]
    assert "from above" in e.value.diagnostics[0].message


def test_empty_region():
    assert codes(wrap_main("#pragma acc kernels\n{\n}")) == ["E_NOLOOP"]


def test_oversized_block():
    assert codes(one_loop("for (i = 0; i < n; ++i)", clauses="vector(2048)")) == ["E_GEOM"]


def test_region_without_independent_loop_is_single_thread():
    text = one_loop("for (i = 0; i < n; ++i)").replace("#pragma acc loop independent \n", "")
    (g,) = geometry(text)
    assert g.loops == () and g.block == (1,) and g.counts == ("1",)


# ---------------------------------------------------------------- kernels

def test_golden_kernel():
    t = translate_source(MATMUL, "cuda")
    (k,) = t.kernels
    assert k.name == "__accb_kernel_1"
    assert k.args == ("a__dev", "b__dev", "c__dev", "LEN")
    assert [p.kind for p in k.params] == ["array", "array", "array", "scalar"]
    assert k.guard == "(i<LEN) && (j<LEN)"
    text = emit_kernel(k, get_profile("cuda"))
    assert "int i = threadIdx.x + blockIdx.x * blockDim.x;" in text
    assert "int j = threadIdx.y + blockIdx.y * blockDim.y;" in text
    assert re.search(r"sum\s*=\s*0;\s*for\s*\(l=0; l<LEN; \+\+l\)", text)


def test_empty_loop_body():
    t = translate_source(one_loop("for (i = 0; i < n; ++i)", "{}"), "serial")
    (k,) = t.kernels
    assert k.guard == "(i < n)" and k.body.strip() == ""


def test_private_is_local_not_parameter():
    text = one_loop("for (i = 0; i < n; ++i)", "{ tmp = i * 2.0f; a[i] = tmp; }", clauses="private(tmp)",
                    decls="float a[4096];\nint n = 100, i;\nfloat tmp;\n")
    (k,) = translate_source(text, "serial").kernels
    assert "tmp" not in [p.name for p in k.params]
    assert any(re.fullmatch(r"float tmp;", d) for d in k.locals)


def test_value_scalar_written_warns():
    text = one_loop("for (i = 0; i < n; ++i)", "{ a[i] = m; m++; }")
    t = translate_source(text, "serial")
    assert [w.code for w in t.warnings] == ["W_SCALARWRITE"]


def test_array_without_clause():
    text = wrap_main("int i;\n#pragma acc kernels\n{\n#pragma acc loop independent\n"
                     "for (i = 0; i < 4; i++) a[i] = 0;\n}", decls="float a[4];\n")
    assert codes(text) == ["E_NOCLAUSE"]


def test_return_inside_kernel_rejected():
    assert codes(one_loop("for (i = 0; i < n; ++i)", "{ if (i > 3) return 1; a[i] = 0; }")) == ["E_UNSUPPORTED"]


def test_nonrectangular_inner_loop_warns_and_runs_sequentially():
    text = wrap_main("int i, j;\n#pragma acc kernels copy(a)\n{\n#pragma acc loop independent\n"
                     "for (i = 0; i < 8; i++) {\n#pragma acc loop independent\nfor (j = 0; j < i; j++) a[i] += 1;\n}\n}\n"
                     "for (i = 0; i < 8; i++) printf(\"%d \", a[i]);", decls="int a[8];\n")
    t = translate_source(text, "serial")
    assert [w.code for w in t.warnings] == ["W_NONRECT", "W_SEQLOOP"]
    assert t.kernels[0].geometry.dims == 1
    assert run_translated(text).split() == [str(i) for i in range(8)]


def test_multiple_nests_give_multiple_kernels():
    t = translate_source((CORPUS[0].parent / "multi_kernel.c").read_text(), "serial")
    assert [k.name for k in t.kernels] == ["__accb_kernel_0_0", "__accb_kernel_0_1", "__accb_kernel_0_2"]


@pytest.mark.parametrize("path", CORPUS, ids=lambda p: p.stem)
def test_every_parameter_is_used(path):
    for k in translate_source(path.read_text(), "serial").kernels:
        text = " ".join([k.body, k.guard or "", *k.locals, *(d.index for d in k.geometry.loops),
                         *(d.lower for d in k.geometry.loops)])
        for p in k.params:
            if p.kind != "partials":
                assert re.search(rf"\b{re.escape(p.name)}\b", text), (k.name, p.name)


@pytest.mark.skipif(not have("gcc"), reason="gcc not installed")
@pytest.mark.parametrize("path", CORPUS, ids=lambda p: p.stem)
def test_kernels_are_closed(path):
    """A kernel compiles with only the runtime and hoisted declarations in scope."""
    serial = get_profile("serial")
    t = translate_source(path.read_text(), "serial")
    hoisted = "\n".join(render_hoisted(h, serial) for h in t.hoisted)
    for k in t.kernels:
        r = host_syntax_check(emit_host_runtime(serial) + hoisted + "\n" + emit_kernel(k, serial))
        assert r.returncode == 0, r.stderr


# ---------------------------------------------------------------- data clauses

def _clause_counts(block, name):
    lines = [ln for ln in block.splitlines() if re.search(rf"\b{name}(__dev)?\b", ln)]
    count = lambda pat: sum(1 for ln in lines if pat in ln)  # noqa: E731
    return {"alloc": count("acc_alloc("), "h2d": count("acc_copy_h2d("), "d2h": count("acc_copy_d2h("),
            "free": count("acc_free(")}


EXPECTED = {
    "copy": {"alloc": 1, "h2d": 1, "d2h": 1, "free": 1},
    "copyin": {"alloc": 1, "h2d": 1, "d2h": 0, "free": 1},
    "copyout": {"alloc": 1, "h2d": 0, "d2h": 1, "free": 1},
    "create": {"alloc": 1, "h2d": 0, "d2h": 0, "free": 1},
}


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.lists(st.sampled_from(sorted(EXPECTED)), min_size=3, max_size=3),
       st.sampled_from(["serial", "cuda", "opencl"]))
def test_transfer_symmetry(kinds, target):
    clauses = " ".join(f"{k}({v}[0:n])" for k, v in zip(kinds, "pqr"))
    text = wrap_main(f"int i;\n#pragma acc kernels {clauses}\n{{\n#pragma acc loop independent\n"
                     "for (i = 0; i < n; i++) p[i] = q[i] + r[i];\n}",
                     decls="int n = 16;\nfloat p[16], q[16], r[16];\n")
    t = translate_source(text, target, kernel_file="k.cl")
    block = t.regions[0].block
    for k, v in zip(kinds, "pqr"):
        assert _clause_counts(block, v) == EXPECTED[k]


def test_lowering_order_in_region():
    t = translate_source(MATMUL, "serial")
    block = t.regions[0].block
    pos = [block.index(s) for s in ("acc_alloc(", "acc_copy_h2d(", "__accb_region_1();", "acc_copy_d2h(",
                                    "acc_free(")]
    assert pos == sorted(pos)
    assert "a__dev" in block and "c__dev" in block


def test_present_looks_up_without_transfer():
    text = (CORPUS[0].parent / "nested_data.c").read_text()
    t = translate_source(text, "serial")
    kern = [r for r in t.regions if r.kind == "kernels"][0]
    assert kern.block.count("acc_present_lookup(") == 2
    assert _clause_counts(kern.block, "v") == {"alloc": 0, "h2d": 0, "d2h": 0, "free": 0}


def test_present_without_enclosing_allocation():
    text = one_loop("for (i = 0; i < n; ++i)").replace("copy(a)", "present(a)")
    assert codes(text) == ["E_PRESENT"]


def test_lower_data_clauses_direct():
    ast, rs = regions(MATMUL)
    data = rs[0]
    pro, epi = lower_data_clauses(data, resolve_scope(data, ast), get_profile("serial"), ast)
    assert sum("acc_alloc(" in s for s in pro) == 3 and sum("acc_copy_d2h(" in s for s in epi) == 3
    # reverse order on the way out
    assert [s for s in epi if "acc_free(" in s] == ["acc_free(c__dev);", "acc_free(b__dev);", "acc_free(a__dev);"]


# ---------------------------------------------------------------- hoisting

HOIST = """#include <math.h>
typedef struct { float x, y; } point;
static float sq(float x){return x*x;}
float dist(point p, point q) { return sqrtf(sq(p.x - q.x) + sq(p.y - q.y)); }
point pts[16];
float d[16];
int main(void) {
  int i;
  point o;
  o.x = 0; o.y = 0;
#pragma acc kernels copyin(pts) copyout(d)
  {
#pragma acc loop independent
    for (i = 0; i < 16; i++) d[i] = dist(pts[i], o);
  }
  return 0;
}
"""


def test_hoisting_order_types_then_functions():
    t = translate_source(HOIST, "serial")
    assert [(h.kind, h.name) for h in t.hoisted] == [("type", "point"), ("function", "sq"), ("function", "dist")]
    assert "static float sq(float x){return x*x;}" not in t.hoisted[1].text
    assert t.hoisted[1].text.startswith("static float __accb_dev_sq(float x)")


def test_hoisted_function_is_device_qualified():
    t = translate_source(HOIST, "cuda")
    assert "__device__ float __accb_dev_sq(float x){return x*x;}" in t.source
    assert "__accb_dev_dist(pts[i], o)" in t.kernels[0].body


def test_nothing_to_hoist():
    assert translate_source(MATMUL, "serial").hoisted == ()


def test_hoisted_types_move_above_kernels():
    t = translate_source(HOIST, "serial")
    src = t.source
    assert src.count("typedef struct { float x, y; } point;") == 1
    assert src.index("typedef struct { float x, y; } point;") < src.index("static void __accb_kernel_0(")


def test_recursive_function_rejected():
    text = ("int fact(int k) { return k <= 1 ? 1 : k * fact(k - 1); }\nint a[8];\n" +
            wrap_main("int i;\n#pragma acc kernels copy(a)\n{\n#pragma acc loop independent\n"
                      "for (i = 0; i < 8; i++) a[i] = fact(i);\n}", head=""))
    assert codes(text) == ["E_RECURSE"]


def test_hoist_declarations_direct():
    ast, rs = regions(HOIST)
    region = rs[0]
    scope = resolve_scope(region, ast, {"i"})
    names = [h.name for h in hoist_declarations([scope], ast)]
    assert names == ["point", "sq", "dist"]


# ---------------------------------------------------------------- reductions and launches

def test_reduction_max_small():
    text = wrap_main("int i, m = -100;\nint v[3] = {3, -1, 7};\n#pragma acc kernels copyin(v)\n{\n"
                     "#pragma acc loop independent reduction(max:m)\nfor (i = 0; i < 3; i++) m = v[i] > m ? v[i] : m;\n}\n"
                     "printf(\"%d\\n\", m);")
    assert run_translated(text) == "7\n"


def test_reduction_pieces():
    text = wrap_main("int i; long long s = 0;\n#pragma acc kernels\n{\n#pragma acc loop independent reduction(+:s)\n"
                     "for (i = 1; i <= 1024; i++) s += i;\n}\nprintf(\"%lld\\n\", s);")
    t = translate_source(text, "cuda")
    (k,) = t.kernels
    (r,) = k.reductions
    assert (r.operator, r.variable, r.ctype, r.partials, r.identity) == ("+", "s", "long long", "s__partials", "0")
    kern = emit_kernel(k, get_profile("cuda"))
    assert "long long s = 0;" in kern
    assert "s__partials[blockIdx.x] = s__scratch[0];" in kern
    assert kern.count("__syncthreads();") == 2
    host = t.regions[0].block
    assert host.index("s__partials = ") < host.index("<<<") < host.index("acc_copy_d2h(s__host")
    assert "acc_free(s__partials);" in host
    assert run_translated(text) == "524800\n"


def test_zero_trip_reduction_keeps_initial_value():
    text = wrap_main("int i, n = 0; int s = 41;\n#pragma acc kernels\n{\n#pragma acc loop independent reduction(+:s)\n"
                     "for (i = 0; i < n; i++) s += 1;\n}\nprintf(\"%d\\n\", s);")
    t = translate_source(text, "serial")
    assert "if (accb_n0 > 0) {" in t.regions[0].block
    assert run_translated(text) == "41\n"


def test_partials_length_for_a_million_iterations():
    text = wrap_main("int i, n = 1000000; double s = 0;\n#pragma acc kernels\n{\n"
                     "#pragma acc loop independent reduction(+:s)\nfor (i = 0; i < n; i++) s += 1.0;\n}\n"
                     "printf(\"%.1f\\n\", s);")
    t = translate_source(text, "serial")
    (k,) = t.kernels
    assert eval_int(k.geometry.grid[0].replace("n", "1000000")) == 3907
    block = t.regions[0].block
    assert "long long accb_blocks = accb_g0;" in block
    assert "(size_t)accb_blocks * sizeof(double)" in block
    assert run_translated(text) == "1000000.0\n"


def test_bad_reduction_operator():
    text = one_loop("for (i = 0; i < n; ++i)", "m -= 1;", clauses="reduction(-:m)")
    assert codes(text) == ["E_REDOP"]


# ---------------------------------------------------------------- assembly

@pytest.mark.parametrize("target, main, side", [
    ("cuda", "x_ipmacc.cu", None), ("opencl", "x_ipmacc.c", "x_ipmacc.cl"), ("serial", "x_ipmacc.c", None),
])
def test_output_names(target, main, side, tmp_path):
    m, s = output_names(tmp_path / "x.c", target)
    assert m.name == main and (s.name if s else None) == side
    assert m.parent == tmp_path


def test_output_order():
    t = translate_source(HOIST, "serial")
    src = t.source
    marks = ["accb runtime", "declarations used by the kernels", "static void __accb_kernel_0(",
             "/* forward declarations */", "int main(void)"]
    pos = [src.index(m) for m in marks]
    assert pos == sorted(pos)


def test_unreplaced_dummy_is_internal_error():
    t = translate_source(MATMUL, "serial")
    with pytest.raises(AccError) as e:
        assemble_output(t.host + "\n__accb_region_9();\n", t.regions, t.hoisted, t.kernels, get_profile("serial"),
                        None)
    assert e.value.codes == ["E_INTERNAL"]


@pytest.mark.parametrize("target", ["serial", "cuda", "opencl"])
def test_deterministic_output(target):
    text = (CORPUS[0].parent / "hoist_struct.c").read_text()
    a = translate_source(text, target, kernel_file="k.cl")
    b = translate_source(text, target, kernel_file="k.cl")
    assert a.source == b.source and a.kernel_source == b.kernel_source


# ---------------------------------------------------------------- exactly-once, randomized

ONCE = """#include <stdio.h>
#include <stdlib.h>
#define M 2100
int h1[M], h2[M], h3[M], h4[M];
int main(int argc, char **argv) {
  int lb = atoi(argv[1]), ub = atoi(argv[2]);
  int i, k;
#pragma acc kernels copy(h1, h2, h3, h4)
  {
#pragma acc loop independent
    for (i = lb; i < ub; i++) h1[i] += 1;
#pragma acc loop independent vector(32)
    for (i = lb; i <= ub; i += 3) h2[i] += 1;
#pragma acc loop independent vector(1000)
    for (i = lb; ub > i; i = i + 7) h3[i] += 1;
#pragma acc loop independent
    for (i = lb; ub >= i; ++i) h4[i] += 1;
  }
  for (k = 0; k < M; k++)
    if (h1[k] || h2[k] || h3[k] || h4[k]) printf("%d %d %d %d %d\\n", k, h1[k], h2[k], h3[k], h4[k]);
  return 0;
}
"""


def expected_once(lb, ub):
    rows = {}
    for col, rng in enumerate([range(lb, ub), range(lb, ub + 1, 3), range(lb, ub, 7), range(lb, ub + 1)]):
        for k in rng:
            rows.setdefault(k, [0, 0, 0, 0])[col] += 1
    return "".join(f"{k} {' '.join(map(str, v))}\n" for k, v in sorted(rows.items()))


@pytest.fixture(scope="module")
def once_exe(tmp_path_factory):
    return compile_c(translate_source(ONCE, "serial").source, tmp_path_factory.mktemp("once"))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 1000), st.integers(0, 1000))
def test_each_iteration_runs_once(once_exe, lb, width):
    ub = lb + width
    assert run_exe(once_exe, (lb, ub)) == expected_once(lb, ub)
