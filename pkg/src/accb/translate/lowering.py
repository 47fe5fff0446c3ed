"""Host-side lowering: data clauses, hoisted declarations, launches and reductions."""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..accvalidate import DATA_CLAUSES
from ..backends import combine, emit_launch, reduction_epilogue
from ..cfront import FunctionDef, TypeDef, VarDecl
from ..errors import AccError, error, fail
from .kernels import DEVICE_PREFIX, pointer_declarator
from .scope import BUILTINS, HOST_ONLY, _type_key, significant_between

TRANSFER_IN = ("copy", "copyin")
TRANSFER_OUT = ("copy", "copyout")


def _indent(lines, n=1):
    pad = "    " * n
    return [pad + line if line else line for line in lines]


# --------------------------------------------------------------------------
# data clauses

def lower_data_clauses(region, scope, profile, ast):
    """(prologue, epilogue) statement lists for the region's own data clauses."""
    own = region.directive
    outer = region.directives[:-1]
    pro, epi = [], []
    for clause in own.clauses_of(*DATA_CLAUSES):
        for v in clause.variables:
            name = v.name
            handle = f"{name}__dev"
            b = scope.bindings.get(name)
            decl = b.decl if b is not None else ast.lookup(name, own.span[0])
            ptr = pointer_declarator(decl, ast)
            mapped = any(any(x.name == name for c in d.clauses_of(*DATA_CLAUSES) for x in c.variables)
                         for d in outer)
            if clause.kind == "present":
                if not mapped:
                    raise AccError(error("E_PRESENT", f"'{name}' is not present on the device here; no "
                                                      "enclosing data clause allocates it", v.location))
                cast = ptr.format(name="")
                lookup = profile.call("acc_present_lookup", name)
                value = lookup if profile.handle_type else f"({cast}){lookup}"
                pro.append(f"{profile.handle_decl(ptr, handle)} = {value};")
                continue
            if mapped:
                pro.append(f"/* {name}: already on the device */")
                continue
            size = b.size if b is not None else None
            if size is None:
                raise AccError(error("E_SIZE", f"cannot determine the size of '{name}'; give explicit "
                                               f"bounds such as {name}[0:n]", v.location))
            cast = ptr.format(name="")
            pro.append(f"{profile.handle_decl(ptr, handle)} = {profile.alloc_expr(cast, size.alloc)};")
            pro.append(profile.call("acc_map", name, handle) + ";")
            if clause.kind in TRANSFER_IN:
                pro.append(profile.call(profile.h2d, handle, name, size.bytes, size.offset) + ";")
            tail = []
            if clause.kind in TRANSFER_OUT:
                tail.append(profile.call(profile.d2h, name, handle, size.bytes, size.offset) + ";")
            tail.append(profile.call("acc_unmap", name) + ";")
            tail.append(profile.call(profile.free, handle) + ";")
            epi[:0] = tail
    return pro, epi


# --------------------------------------------------------------------------
# hoisting

@dataclass(frozen=True)
class HoistedDecl:
    kind: str  # type | function
    name: str
    text: str
    span: tuple


def hoist_declarations(scopes, ast):
    """User types and functions reached from the kernels, dependency-ordered.

    Types come first.  Function copies are renamed with a device prefix and
    have numeric macros substituted, so they compile without the host part.
    """
    if not isinstance(scopes, (list, tuple)):
        scopes = [scopes]
    tokens = ast.tokens
    types, funcs = [], []
    seen_types, state = set(), {}

    def visit_type(td):
        if td.span in seen_types:
            return
        seen_types.add(td.span)
        for ref in td.refs:
            if ref in ast.types:
                visit_type(ast.types[ref])
        types.append(td)

    def visit_func(fn, where):
        if state.get(fn.name) == "done":
            return
        if state.get(fn.name) == "active":
            fail("E_RECURSE", f"function '{fn.name}' is recursive and cannot be called from a kernel",
                 ast.source.original_location(fn.position))
        state[fn.name] = "active"
        for kind, obj in _function_deps(fn, ast):
            if kind == "type":
                visit_type(obj)
            else:
                visit_func(obj, fn)
        state[fn.name] = "done"
        funcs.append(fn)

    for scope in scopes:
        for b in scope.bindings.values():
            if b.kind == "user-type":
                visit_type(b.decl)
        for b in scope.bindings.values():
            if b.kind == "user-function":
                visit_func(b.decl, None)
    names = {f.name for f in funcs}
    out = [HoistedDecl("type", "/".join(td.names), _substitute(tokens, td.span, ast, names), td.span)
           for td in types]
    out += [HoistedDecl("function", fn.name, _substitute(tokens, fn.span, ast, names), fn.span) for fn in funcs]
    return out


def _function_deps(fn, ast):
    tokens = ast.tokens
    sig = significant_between(tokens, fn.span[0], fn.span[1])
    deps = []
    for n, k in enumerate(sig):
        t = tokens[k]
        key = _type_key(tokens, sig, n)
        if key is not None and key in ast.types:
            deps.append(("type", ast.types[key]))
            continue
        if t.kind != "identifier" or (n > 0 and tokens[sig[n - 1]].text in (".", "->", "struct", "union", "enum")):
            continue
        name = t.text
        loc = ast.source.original_location(k)
        decl = ast.lookup(name, k)
        if name == fn.name and k == fn.position:
            continue
        if isinstance(decl, VarDecl):
            if decl.storage == "global":
                fail("E_UNSUPPORTED", f"function '{fn.name}' uses global variable '{name}' and cannot be "
                                      "called from a kernel", loc)
        elif isinstance(decl, FunctionDef):
            deps.append(("function", decl))
        elif isinstance(decl, TypeDef):
            deps.append(("type", decl))
        elif name in ast.constants or name in BUILTINS:
            continue
        elif name in HOST_ONLY or name in ast.prototypes:
            fail("E_UNSUPPORTED", f"function '{fn.name}' calls '{name}', which cannot run in a kernel", loc)
        elif name not in ast.type_names:
            fail("E_UNBOUND", f"'{name}' is not declared", loc)
    return deps


def _substitute(tokens, span, ast, renamed):
    out = []
    prev = None
    for k in range(span[0], span[1]):
        t = tokens[k]
        text = t.text
        if t.kind == "identifier" and prev not in (".", "->"):
            if text in renamed:
                text = DEVICE_PREFIX + text
            elif text in ast.constants:
                text = f"({ast.constants[text]})"
        if t.significant:
            prev = t.text
        out.append(text)
    return "".join(out)


_STORAGE = re.compile(r"^\s*(?:(?:static|inline|extern|__inline__|__inline)\s+)+")


def render_hoisted(decl, profile):
    if decl.kind == "function":
        # the target qualifier replaces any host storage class
        return profile.device_qualifier + _STORAGE.sub("", decl.text)
    return decl.text


# --------------------------------------------------------------------------
# reductions and launches

def lower_reduction(spec, reduction, profile):
    """(kernel epilogue lines, host merge lines) for one reduction variable."""
    epilogue = reduction_epilogue(spec, reduction, profile)
    r = reduction
    host = f"{r.variable}__host"
    nbytes = f"(size_t)accb_blocks * sizeof({r.ctype})"
    merge = [
        "{",
        f"    {r.ctype} *{host} = ({r.ctype} *)malloc({nbytes});",
        "    long long accb_k;",
        f"    {profile.call(profile.d2h, host, r.partials, nbytes, 0)};",
        "    for (accb_k = 0; accb_k < accb_blocks; ++accb_k)",
        f"        {r.variable} = {combine(r.operator, r.variable, f'{host}[accb_k]')};",
        f"    free({host});",
        "}",
        f"{profile.call(profile.free, r.partials)};",
    ]
    return epilogue, merge


def lower_kernel_launch(spec, profile):
    """Host block: iteration counts, zero-trip skip, partials, launch, merge."""
    geom = spec.geometry
    lines = [f"/* launch {spec.name} */", "{"]
    inner = []
    for k, n in enumerate(geom.counts):
        inner.append(f"long long accb_n{k} = {n if n == '1' else f'({n})'};")
    nonzero = " && ".join(f"accb_n{k} > 0" for k in range(len(geom.counts)))
    inner.append(f"if ({nonzero}) {{")
    body = []
    for k, b in enumerate(geom.block):
        body.append(f"long long accb_g{k} = (accb_n{k} + {b - 1}) / {b};" if b > 1 else
                    f"long long accb_g{k} = accb_n{k};")
    if spec.reductions:
        blocks = " * ".join(f"accb_g{k}" for k in range(len(geom.block)))
        body.append(f"long long accb_blocks = {blocks};")
    merges = []
    for r in spec.reductions:
        nbytes = f"(size_t)accb_blocks * sizeof({r.ctype})"
        cast = f"{r.ctype} *"
        if profile.handle_type:
            body.append(f"{profile.handle_type} {r.partials} = {profile.alloc_expr(cast, nbytes)};")
        else:
            body.append(f"{r.ctype} *{r.partials} = {profile.alloc_expr(cast, nbytes)};")
        merges.extend(lower_reduction(spec, r, profile)[1])
    body.append("{")
    body.extend(_indent(emit_launch(spec, profile)))
    body.append("}")
    body.extend(merges)
    inner.extend(_indent(body))
    inner.append("}")
    lines.extend(_indent(inner))
    lines.append("}")
    return lines


def lower_region(region, scope, specs, profile, ast):
    """Full replacement text for one region's dummy call."""
    from ..irdoc import render

    pro, epi = lower_data_clauses(region, scope, profile, ast)
    lines = [f"/* accelerator region {region.id}: {region.kind} */", "{"]
    inner = list(pro)
    if region.kind == "data":
        inner.append(render(region.body).strip("\n"))
    else:
        for spec in specs:
            inner.extend(lower_kernel_launch(spec, profile))
    inner.extend(epi)
    lines.extend(_indent(inner))
    lines.append("}")
    return "\n".join(lines)
