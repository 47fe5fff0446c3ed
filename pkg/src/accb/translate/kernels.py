"""Parallel-loop discovery, launch geometry and kernel outlining."""

from __future__ import annotations

from dataclasses import dataclass

from ..backends import identity
from ..cfront import Block, DoWhile, For, PragmaStmt, Simple, Switch, VarDecl, While, children, render, walk
from ..errors import AccError, error, fail, warning
from ..irdoc import PragmaTag, iter_tags
from .model import DEFAULT_BLOCK, MAX_BLOCK_THREADS, KernelParam, KernelSpec, LaunchGeometry, LoopDim, Reduction
from .scope import data_clause_for, significant_between

DEVICE_PREFIX = "__accb_dev_"
ASSIGN_OPS = frozenset("= += -= *= /= %= &= |= ^= <<= >>=".split())


@dataclass
class Nest:
    """One kernel's worth of a kernels region."""

    stmt: object  # statement the kernel replaces
    loops: list  # [(For, loop directives)] for each parallel dimension
    directives: dict  # pragma token index -> loop DirectiveNode inside the region

    @property
    def body(self):
        if not self.loops:
            return self.stmt
        return self.loops[-1][0].body


def loop_directives(region):
    return {t.directive.span[0]: t.directive for t in iter_tags(region.body)
            if isinstance(t, PragmaTag) and t.directive.kind == "loop"}


def _loop_chain(stmt, dirs):
    chain = []
    while isinstance(stmt, PragmaStmt) and stmt.tok in dirs:
        chain.append(dirs[stmt.tok])
        stmt = stmt.stmt
    if chain and isinstance(stmt, For):
        return stmt, chain
    return None, chain


def _unwrap(stmt):
    while isinstance(stmt, Block):
        items = [s for s in stmt.items if not (isinstance(s, Simple) and s.kind == "empty")]
        if len(items) != 1:
            break
        stmt = items[0]
    return stmt


def find_nests(region, ast, warnings=None):
    """Split a kernels region into parallel loop nests.

    A region is either a sequence of ``loop independent`` nests, one kernel
    each, or code without independent loops, which becomes one
    single-thread kernel.
    """
    warnings = [] if warnings is None else warnings
    tokens = ast.tokens
    dirs = loop_directives(region)
    node = ast.statement_at(region.position)
    stmt = node.stmt
    location = region.directive.location
    items = stmt.items if isinstance(stmt, Block) else [stmt]
    items = [s for s in items if not (isinstance(s, Simple) and s.kind in ("empty", "preproc"))]
    if not items:
        fail("E_NOLOOP", "kernels region contains no statements", location)
    nests = []
    parallel = []
    for item in items:
        loop, chain = _loop_chain(_unwrap(item), dirs)
        parallel.append(loop is not None and any(d.independent for d in chain))
    if all(parallel):
        for item in items:
            loop, chain = _loop_chain(_unwrap(item), dirs)
            nest = Nest(item, [(loop, chain)], dirs)
            inner, inner_chain = _loop_chain(_unwrap(loop.body), dirs)
            if inner is not None and any(d.independent for d in inner_chain):
                index = _header_index(loop, ast)
                init_cond = {tokens[k].text for k in list(range(*inner.init)) + list(range(*inner.cond))
                             if tokens[k].kind == "identifier"}
                if index in init_cond:
                    warnings.append(warning("W_NONRECT", "inner loop bounds depend on the outer index; "
                                                         "it runs sequentially in each thread",
                                            inner_chain[0].location))
                else:
                    nest.loops.append((inner, inner_chain))
            used = {id(f) for f, _ in nest.loops}
            for s in walk(nest.body):
                if isinstance(s, PragmaStmt) and s.tok in dirs and dirs[s.tok].independent \
                        and isinstance(s.stmt, For) and id(s.stmt) not in used:
                    ancestors = sum(1 for d in dirs.values() if d.independent and d.span[0] < s.tok < d.span[1])
                    if ancestors < 2:  # deeper nests already carry W_DEEPNEST
                        warnings.append(warning("W_SEQLOOP", "independent loop is not perfectly nested and "
                                                             "runs sequentially in each thread",
                                                dirs[s.tok].location))
            nests.append(nest)
        return nests
    if any(d.independent for d in dirs.values()):
        bad = items[parallel.index(False)]
        fail("E_UNSUPPORTED", "a kernels region with independent loops may contain only loop nests; "
                              "move other statements out of the region",
             ast.source.original_location(bad.start))
    return [Nest(stmt, [], dirs)]


def _sig(tokens, span):
    return [k for k in range(*span) if tokens[k].significant]


def _header_index(loop, ast):
    tokens = ast.tokens
    init = _sig(tokens, loop.init)
    eqs = [n for n, k in enumerate(init) if tokens[k].text == "="]
    return tokens[init[eqs[0] - 1]].text if len(eqs) == 1 and eqs[0] > 0 else None


def parse_loop_header(loop, ast):
    """LoopDim for a parallel ``for`` header."""
    tokens = ast.tokens
    location = ast.source.original_location(loop.start)

    def text(ks):
        return render(tokens[ks[0]:ks[-1] + 1]).strip() if ks else ""

    init = _sig(tokens, loop.init)
    eqs = [n for n, k in enumerate(init) if tokens[k].text == "="]
    if len(eqs) != 1 or eqs[0] == 0 or tokens[init[eqs[0] - 1]].kind != "identifier":
        fail("E_UNSUPPORTED", "a parallel loop must start with 'index = lower'", location)
    e = eqs[0]
    index = tokens[init[e - 1]].text
    lower = text(init[e + 1:])
    if e > 1:
        ctype = " ".join(tokens[k].text for k in init[:e - 1] if tokens[k].text not in ("const", "register"))
    else:
        decl = ast.lookup(index, loop.start)
        ctype = decl.ctype() if isinstance(decl, VarDecl) else "int"

    cond = _sig(tokens, loop.cond)
    rel = [n for n, k in enumerate(cond) if tokens[k].text in ("<", "<=", ">", ">=")]
    depth_ok = [n for n in rel if _depth(tokens, cond, n) == 0]
    if len(depth_ok) != 1:
        fail("E_UNSUPPORTED", "a parallel loop condition must compare the index with <, <=, > or >=", location)
    r = depth_ok[0]
    op = tokens[cond[r]].text
    left, right = cond[:r], cond[r + 1:]
    if len(left) == 1 and tokens[left[0]].text == index and op in ("<", "<="):
        upper, inclusive = text(right), op == "<="
    elif len(right) == 1 and tokens[right[0]].text == index and op in (">", ">="):
        upper, inclusive = text(left), op == ">="
    else:
        fail("E_UNSUPPORTED", f"a parallel loop condition must bound '{index}' from above", location)
    if index in {tokens[k].text for k in (right if op in ("<", "<=") else left)}:
        fail("E_UNSUPPORTED", "the loop bound may not depend on the index", location)

    step = _parse_step(tokens, _sig(tokens, loop.step), index, ast)
    if step is None:
        fail("E_STEP", f"parallel loop step must increase '{index}' by a positive compile-time constant",
             location)
    if lower == "0" and step == 1:
        count = f"({upper}) + 1" if inclusive else upper
    else:
        extra = step if inclusive else step - 1
        count = f"(({upper}) - ({lower}) + {extra}) / {step}"
    return LoopDim(index, ctype, lower, upper, inclusive, step, text(cond), count)


def _depth(tokens, ks, n):
    depth = 0
    for k in ks[:n]:
        if tokens[k].text in ("(", "["):
            depth += 1
        elif tokens[k].text in (")", "]"):
            depth -= 1
    return depth


def _parse_step(tokens, ks, index, ast):
    t = [tokens[k].text for k in ks]
    if t in ([index, "++"], ["++", index]):
        return 1
    value = None
    if len(t) >= 3 and t[0] == index and t[1] == "+=":
        value = ast.eval(" ".join(t[2:]))
    elif len(t) >= 5 and t[0] == index and t[1] == "=" and t[2] == index and t[3] == "+":
        value = ast.eval(" ".join(t[4:]))
    elif len(t) >= 5 and t[0] == index and t[1] == "=" and t[-1] == index and t[-2] == "+":
        value = ast.eval(" ".join(t[2:-2]))
    return value if value is not None and value > 0 else None


def map_parallelism(nest, ast):
    """Launch geometry for one nest: 1-D or 2-D, block extents from defaults or vector(k)."""
    if not nest.loops:
        return LaunchGeometry(1, (1,), ())
    loops = tuple(parse_loop_header(loop, ast) for loop, _ in nest.loops)
    block = list(DEFAULT_BLOCK[len(loops)])
    for k, (_, chain) in enumerate(nest.loops):
        for d in chain:
            for c in d.clauses_of("vector"):
                if c.size is not None:
                    block[k] = ast.eval(c.size)
    total = 1
    for b in block:
        total *= b
    if total > MAX_BLOCK_THREADS:
        fail("E_GEOM", f"block of {' x '.join(map(str, block))} threads exceeds {MAX_BLOCK_THREADS}",
             nest.loops[0][1][0].location)
    return LaunchGeometry(len(loops), tuple(block), loops)


def pointer_declarator(decl, ast):
    """Declarator template (with ``{name}``) for a pointer to the array's rows."""
    if decl.extents:
        depth, inner = decl.pointer, decl.extents[1:]
    else:
        depth, inner = decl.pointer - 1, ()
    base = decl.base + (" " + "*" * depth if depth else "")
    if inner:
        dims = "".join(f"[{_subst(e, ast)}]" for e in inner)
        return f"{base} (*{{name}}){dims}"
    return f"{base} *{{name}}"


def _subst(text, ast):
    value = ast.eval(text)
    return str(value) if value is not None else text


def local_declaration(decl, ast, name=None):
    dims = "".join(f"[{_subst(e, ast)}]" for e in decl.extents)
    return f"{decl.ctype()} {name or decl.name}{dims};"


def construct_kernel(region, nest, scope, geom, ast, name, hoisted=(), warnings=None):
    """Outline one nest into a KernelSpec."""
    warnings = [] if warnings is None else warnings
    tokens = ast.tokens
    dirs = nest.directives
    body = nest.body
    if nest.loops:
        lo, hi = body.start + 1, body.end - 1  # inside the braces
    else:
        lo, hi = body.start, body.end

    # clauses
    privates, reductions = {}, []
    parallel_dirs = {id(d) for _, chain in nest.loops for d in chain}
    for d in dirs.values():
        if not (nest.stmt.start <= d.span[0] < nest.stmt.end):
            continue
        for c in d.clauses_of("private"):
            for v in c.variables:
                privates.setdefault(v.name, c)
        for c in d.clauses_of("reduction"):
            if id(d) not in parallel_dirs:
                fail("E_UNSUPPORTED", "reduction is supported only on loops mapped to the launch geometry",
                     c.location)
            for v in c.variables:
                decl = ast.lookup(v.name, d.span[0])
                reductions.append(Reduction(c.operator, v.name, decl.ctype(), f"{v.name}__partials",
                                            f"{v.name}__scratch", identity(c.operator, decl.ctype())))
    red_names = {r.variable for r in reductions}
    indices = {loop.index for loop in geom.loops}

    # jumps
    wrap = False
    for word, s in _flat_jumps(tokens, body):
        loc = ast.source.original_location(s.start)
        if word == "return":
            fail("E_UNSUPPORTED", "'return' inside a kernels region", loc)
        if word == "continue" and nest.loops:
            wrap = True
        elif word == "break":
            fail("E_UNSUPPORTED", "'break' out of a parallel loop", loc)

    # token rewriting
    replace = {}
    decl_tokens = set()
    for s in walk(body):
        if isinstance(s, Simple) and s.kind == "decl" and lo <= s.start < hi:
            decl_tokens.update(range(s.start, s.end))
    for k in range(lo, hi):
        t = tokens[k]
        if t.kind == "pragma" and t.is_pragma("acc"):
            replace[k] = "/* acc loop: sequential */"
        elif t.kind == "identifier":
            b = scope.bindings.get(t.text)
            if b is None or _is_member(tokens, k):
                continue
            if b.kind == "user-function" and t.text in hoisted:
                replace[k] = DEVICE_PREFIX + t.text
            elif b.kind == "constant" and k in decl_tokens:
                replace[k] = f"({ast.constants[t.text]})"

    # free identifiers, in scan order: loop headers first, then the body
    order = []
    for loop, _ in nest.loops:
        order += significant_between(tokens, loop.init[0], loop.init[1])
        order += significant_between(tokens, loop.cond[0], loop.cond[1])
    order += [k for k in significant_between(tokens, lo, hi) if k not in replace]
    arrays, scalars, locals_ = [], [], []
    seen = set()
    for k in order:
        t = tokens[k]
        if t.kind != "identifier" or _is_member(tokens, k) or t.text in seen:
            continue
        n = t.text
        b = scope.bindings.get(n)
        if b is None or n in indices:
            continue
        seen.add(n)
        # an index of another nest is an ordinary scalar here
        kind = "scalar" if b.kind == "loop-index" else b.kind
        if kind == "array":
            if n in privates:
                locals_.append(local_declaration(b.decl, ast))
                continue
            d, _ = data_clause_for(n, region.directives)
            if d is None:
                raise AccError(error("E_NOCLAUSE", f"array '{n}' is used in a kernels region without a "
                                                   "data clause", b.location))
            arrays.append(KernelParam(n, "array", pointer_declarator(b.decl, ast), f"{n}__dev", b.ctype))
        elif kind == "scalar":
            if n in red_names:
                continue
            if n in privates or _next_text(tokens, k) == "=":
                locals_.append(local_declaration(b.decl, ast))
                continue
            if _written(tokens, n, lo, hi):
                warnings.append(warning("W_SCALARWRITE", f"'{n}' is passed to the kernel by value; writes to "
                                                         "it are not visible on the host", b.location))
            scalars.append(KernelParam(n, "scalar", f"{b.ctype} {{name}}", n, b.ctype))
        elif kind == "constant":
            scalars.append(KernelParam(n, "scalar", f"{b.ctype} {{name}}", n, b.ctype))
    for n, c in privates.items():
        if n not in seen and n not in indices:
            decl = ast.lookup(n, region.position)
            if isinstance(decl, VarDecl):
                locals_.append(local_declaration(decl, ast))
    partials = [KernelParam(r.partials, "partials", f"{r.ctype} *{{name}}", r.partials, r.ctype)
                for r in reductions]

    text = "".join(replace.get(k, tokens[k].text) for k in range(lo, hi))
    guard = " && ".join(f"({loop.cond})" for loop in geom.loops) if geom.loops else None
    return KernelSpec(
        name=name,
        params=tuple(arrays + scalars + partials),
        locals=tuple(locals_),
        body=text,
        guard=guard,
        geometry=geom,
        reductions=tuple(reductions),
        hoisted=tuple(hoisted),
        wrap_continue=wrap,
        region=region.id,
    )


def _flat_jumps(tokens, stmt):
    """(word, stmt) for every return, and for break/continue that leave ``stmt`` itself."""
    out = []

    def visit(s, nested):
        if isinstance(s, Simple) and s.kind == "jump":
            word = tokens[s.start].text
            if word == "return" or not nested:
                out.append((word, s))
        nested = nested or isinstance(s, (For, While, DoWhile, Switch))
        for c in children(s):
            visit(c, nested)

    visit(stmt, False)
    return out


def _is_member(tokens, k):
    j = k - 1
    while j >= 0 and not tokens[j].significant:
        j -= 1
    return j >= 0 and tokens[j].text in (".", "->")


def _next_text(tokens, k):
    j = k + 1
    while j < len(tokens) and not tokens[j].significant:
        j += 1
    return tokens[j].text if j < len(tokens) else None


def _written(tokens, name, lo, hi):
    for k in range(lo, hi):
        if tokens[k].kind == "identifier" and tokens[k].text == name and not _is_member(tokens, k):
            nxt = _next_text(tokens, k)
            j = k - 1
            while j >= 0 and not tokens[j].significant:
                j -= 1
            if nxt in ASSIGN_OPS or nxt in ("++", "--") or tokens[j].text in ("++", "--"):
                return True
    return False
