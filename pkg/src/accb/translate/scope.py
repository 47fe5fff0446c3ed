"""Identifier binding for accelerator regions and transfer-size inference."""

from __future__ import annotations

from ..accvalidate import DATA_CLAUSES
from ..cfront import LIBRARY_TYPES, FunctionDef, TypeDef, VarDecl, eval_int, sizeof_base
from ..errors import AccError, error
from .model import Binding, ScopeBindings, TransferSize

# callable or referable on every target without hoisting
BUILTINS = frozenset(
    """sqrt sqrtf fabs fabsf exp expf exp2 exp2f log logf log2 log2f log10 log10f
    pow powf sin sinf cos cosf tan tanf asin asinf acos acosf atan atanf atan2
    atan2f sinh sinhf cosh coshf tanh tanhf floor floorf ceil ceilf round roundf
    trunc truncf fmod fmodf fmin fminf fmax fmaxf abs rsqrt rsqrtf hypot hypotf
    cbrt cbrtf copysign copysignf NULL INT_MAX INT_MIN UINT_MAX LONG_MAX LONG_MIN
    ULONG_MAX LLONG_MAX LLONG_MIN SHRT_MAX SHRT_MIN CHAR_MAX CHAR_MIN FLT_MAX FLT_MIN
    FLT_EPSILON DBL_MAX DBL_MIN DBL_EPSILON M_PI M_E""".split()
)

# host library calls that cannot run inside a kernel
HOST_ONLY = frozenset(
    """printf fprintf sprintf snprintf puts fputs putchar scanf fscanf sscanf
    getchar fgets fopen fclose fread fwrite fflush malloc calloc realloc free
    exit abort atexit rand srand time clock memcpy memset memmove strlen strcpy
    strcmp strcat system getenv perror""".split()
)


def significant_between(tokens, a, b):
    """Indices of significant, non-pragma tokens in [a, b)."""
    return [k for k in range(a, b) if tokens[k].significant and tokens[k].kind != "pragma"]


def _type_key(tokens, sig, n):
    t = tokens[sig[n]]
    if t.text in ("struct", "union", "enum") and n + 1 < len(sig) and tokens[sig[n + 1]].kind == "identifier":
        return f"{t.text} {tokens[sig[n + 1]].text}"
    return None


def _unit_size(base, depth):
    if depth > 0:
        return f"sizeof({base} {'*' * depth})"
    known = sizeof_base(base)
    return str(known) if known is not None else f"sizeof({base})"


def element_size(decl, ast=None):
    """Size expression of one element of the array's first dimension."""
    if decl.extents:
        unit, inner = _unit_size(decl.base, decl.pointer), decl.extents[1:]
    else:
        unit, inner = _unit_size(decl.base, decl.pointer - 1), ()
    if not inner:
        return unit
    consts = ast.constants if ast is not None else None
    values = [eval_int(e, consts) for e in inner]
    if eval_int(unit) is not None and all(v is not None for v in values):
        n = eval_int(unit)
        for v in values:
            n *= v
        return str(n)
    return "*".join([f"({e})" for e in inner] + [unit])


def _scaled(count, esz):
    n, e = eval_int(count), eval_int(esz)
    if n is not None and e is not None:
        return str(n * e)
    return f"({count})*{esz}"


def infer_transfer_size(binding, clause, ast=None):
    """Bytes, offset and allocation extent for one data-clause variable.

    Explicit ``[start:n]`` bounds win; otherwise only fixed-size arrays have
    a known size.  Returns None when the size cannot be determined.
    """
    decl = binding.decl
    bounds = None
    if clause is not None:
        for v in clause.variables:
            if v.name == binding.name:
                bounds = v.bounds
    if bounds is not None:
        esz = element_size(decl, ast)
        nbytes = _scaled(bounds.count, esz)
        if eval_int(bounds.start) == 0:
            return TransferSize(nbytes, "0", nbytes)
        return TransferSize(nbytes, _scaled(bounds.start, esz), _scaled(f"({bounds.start})+({bounds.count})", esz))
    if binding.fixed_size:
        extents = decl.extents
        count = extents[0] if len(extents) == 1 else "*".join(f"({e})" for e in extents)
        nbytes = _scaled(count, _unit_size(decl.base, decl.pointer))
        return TransferSize(nbytes, "0", nbytes)
    return None


def data_clause_for(name, directives):
    """Innermost (directive, clause) that maps ``name``, or (None, None)."""
    for d in reversed(directives):
        for c in d.clauses_of(*DATA_CLAUSES):
            if any(v.name == name for v in c.variables):
                return d, c
    return None, None


def resolve_scope(region, ast, loop_indices=()):
    """Bind every identifier used in a region.

    Only the global scope and the enclosing function's scope are searched,
    innermost declaration first.  ``loop_indices`` names the indices of the
    parallel loops, which bind as loop-index rather than scalar.
    """
    tokens = ast.tokens
    start, end = region.directive.span
    bindings = {}
    errors = []

    def add(b):
        if b.name not in bindings:
            bindings[b.name] = b

    if region.kind == "data":
        positions = []
    else:
        positions = significant_between(tokens, start + 1, end)
    for d in region.directives:
        for c in d.clauses:
            for v in c.variables:
                decl = ast.lookup(v.name, d.span[0])
                if decl is None:
                    errors.append(error("E_UNBOUND", f"'{v.name}' is not declared", v.location))
                elif isinstance(decl, VarDecl) and d is region.directive:
                    add(_var_binding(v.name, decl, region, ast, v.location))
    sig = positions
    for n, k in enumerate(sig):
        tok = tokens[k]
        if tok.kind != "identifier":
            key = _type_key(tokens, sig, n)
            if key is not None and key in ast.types:
                add(Binding(key, "user-type", decl=ast.types[key], span=ast.types[key].span, location=tok.location))
            continue
        prev = tokens[sig[n - 1]].text if n > 0 else None
        if prev in (".", "->", "struct", "union", "enum"):
            continue
        name = tok.text
        if name in bindings:
            continue
        location = ast.source.original_location(k)
        is_call = n + 1 < len(sig) and tokens[sig[n + 1]].text == "("
        decl = ast.lookup(name, k)
        if isinstance(decl, VarDecl):
            if decl.typedef is not None:
                errors.append(error("E_UNSUPPORTED", f"type '{name}' is defined inside a function and "
                                                     "cannot be used in a kernel", location))
            elif name in loop_indices:
                add(Binding(name, "loop-index", decl.ctype(), decl, location=location))
            elif start < decl.position < end:
                add(Binding(name, "local", decl.ctype(), decl, decl.extents, location=location))
            else:
                add(_var_binding(name, decl, region, ast, location))
        elif isinstance(decl, FunctionDef):
            add(Binding(name, "user-function", decl=decl, span=decl.span, location=location))
        elif isinstance(decl, TypeDef):
            add(Binding(name, "user-type", decl=decl, span=decl.span, location=location))
        elif name in ast.constants:
            add(Binding(name, "constant", constant_type(ast.constants[name]), location=location))
        elif name in BUILTINS or name in LIBRARY_TYPES:
            add(Binding(name, "builtin", location=location))
        elif is_call and (name in HOST_ONLY or name in ast.prototypes):
            why = "host library function" if name in HOST_ONLY else "function without a definition in this file"
            errors.append(error("E_UNSUPPORTED", f"call to {why} '{name}' inside a kernels region", location))
        elif is_call:
            errors.append(error("E_UNSUPPORTED", f"call to unbound function '{name}' inside a kernels region",
                                location))
        else:
            errors.append(error("E_UNBOUND", f"'{name}' is not declared", location))
    if errors:
        raise AccError(_first_per_name(errors))
    for b in list(bindings.values()):
        if b.kind in ("array", "scalar", "local") and b.decl is not None:
            for key in _base_type_keys(b.decl.base):
                if key in ast.types:
                    add(Binding(key, "user-type", decl=ast.types[key], span=ast.types[key].span,
                                location=b.location))
    return ScopeBindings(region, bindings)


def _first_per_name(diags):
    seen, out = set(), []
    for d in diags:
        key = (d.code, d.message)
        if key not in seen:
            seen.add(key)
            out.append(d)
    return out


def _base_type_keys(base):
    words = base.split()
    if len(words) == 2 and words[0] in ("struct", "union", "enum"):
        return [base]
    return [w for w in words]


def _var_binding(name, decl, region, ast, location):
    if decl.is_array:
        b = Binding(name, "array", decl.base, decl, decl.extents, decl.fixed_size, location=location)
        _, clause = data_clause_for(name, region.directives)
        if clause is not None:
            b = Binding(name, "array", decl.base, decl, decl.extents, decl.fixed_size,
                        infer_transfer_size(b, clause, ast), location=location)
        return b
    return Binding(name, "scalar", decl.ctype(), decl, location=location)


def constant_type(value):
    """C type for a numeric macro value."""
    n = eval_int(value)
    if n is not None:
        return "int" if -2**31 <= n < 2**31 else "long long"
    text = value.strip("() ")
    if text[-1:] in "fF" and not text.lower().startswith("0x"):
        return "float"
    return "double"
