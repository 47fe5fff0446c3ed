"""OpenACC directive scanning and validation.

Only the ``data``, ``kernels`` and ``loop`` directives are accepted.  Clause
legality per directive:

==========  ===========================================================
directive   admitted clauses
==========  ===========================================================
data        copy copyin copyout create present
kernels     copy copyin copyout create present
loop        independent private reduction gang worker vector
==========  ===========================================================
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .cfront import ARITHMETIC, For, PragmaStmt, VarDecl, children, parse_statements, tokenize
from .errors import AccError, error, warning

DATA_CLAUSES = ("copy", "copyin", "copyout", "create", "present")
LOOP_CLAUSES = ("independent", "private", "reduction", "gang", "worker", "vector")
CLAUSES = DATA_CLAUSES + LOOP_CLAUSES
LEGAL = {
    "data": frozenset(DATA_CLAUSES),
    "kernels": frozenset(DATA_CLAUSES),
    "loop": frozenset(LOOP_CLAUSES),
}
REDUCTION_OPS = ("+", "*", "max", "min")
SINGLE = frozenset(("independent", "gang", "worker", "vector"))
UNSUPPORTED = frozenset(
    """parallel update cache routine async wait enter exit host_data declare
    atomic serial init shutdown set""".split()
)


@dataclass(frozen=True)
class SubarrayBounds:
    start: str
    count: str


@dataclass(frozen=True)
class ClauseVar:
    name: str
    bounds: SubarrayBounds = None
    location: tuple = (0, 0)


@dataclass(frozen=True)
class Clause:
    kind: str
    variables: tuple = ()
    operator: str = None
    size: str = None
    location: tuple = (0, 0)


@dataclass(frozen=True)
class DirectiveNode:
    kind: str
    clauses: tuple
    location: tuple
    span: tuple  # (pragma token index, end of attached statement) in normalized tokens
    text: str

    def clauses_of(self, *kinds):
        return [c for c in self.clauses if c.kind in kinds]

    def has(self, kind):
        return any(c.kind == kind for c in self.clauses)

    @property
    def independent(self):
        return self.kind == "loop" and self.has("independent")


def _clean(text):
    """Blank out comments and line continuations without moving columns."""
    text = text.replace("\\\r\n", "   ").replace("\\\n", "  ")
    return re.sub(r"/\*.*?\*/|//.*", lambda m: " " * len(m.group()), text, flags=re.DOTALL)


def parse_directive(text, location=(1, 1)):
    """Parse one ``#pragma acc`` line into ``(kind, clauses)``.

    Raises AccError with E_DIRECTIVE, E_UNSUPPORTED, E_CLAUSE or E_REDOP.
    """
    line0, col0 = location
    cleaned = _clean(text)
    head = re.match(r"#\s*pragma\b", cleaned)
    offset = head.end() if head else 0
    toks = [t for t in tokenize(cleaned[offset:]) if t.significant]

    def at(tok):
        return (line0, col0 + offset + tok.col - 1) if tok is not None else location

    if not toks or toks[0].text != "acc" or len(toks) < 2:
        raise AccError(error("E_DIRECTIVE", "missing OpenACC directive name", location))
    k = 1
    name_tok = toks[k]
    name = name_tok.text
    if name in UNSUPPORTED:
        raise AccError(error("E_UNSUPPORTED", f"directive '{name}' is not supported", at(name_tok)))
    if name not in LEGAL:
        raise AccError(error("E_DIRECTIVE", f"unknown OpenACC directive '{name}'", at(name_tok)))
    rest = toks[k + 1:]
    if name == "kernels" and rest and rest[0].text == "loop":
        raise AccError(error("E_UNSUPPORTED", "combined 'kernels loop' construct is not supported; "
                             "use separate kernels and loop directives", at(rest[0])))
    clauses = []
    i = 0
    while i < len(rest):
        tok = rest[i]
        if tok.text == ",":
            i += 1
            continue
        if tok.kind not in ("identifier", "keyword"):
            raise AccError(error("E_CLAUSE", f"unexpected '{tok.text}' in directive", at(tok)))
        cname = tok.text
        args = None
        if i + 1 < len(rest) and rest[i + 1].text == "(":
            close = _match(rest, i + 1)
            if close is None:
                raise AccError(error("E_CLAUSE", f"unclosed argument list for '{cname}'", at(tok)))
            args = rest[i + 2:close]
            i = close + 1
        else:
            i += 1
        if cname not in CLAUSES:
            raise AccError(error("E_CLAUSE", f"unknown clause '{cname}'", at(tok)))
        if cname in SINGLE and any(c.kind == cname for c in clauses):
            raise AccError(error("E_CLAUSE", f"clause '{cname}' given more than once", at(tok)))
        clauses.append(_clause(cname, args, at(tok), at))
    return name, tuple(clauses)


def _match(toks, i):
    depth = 0
    for j in range(i, len(toks)):
        if toks[j].text in "([{":
            depth += 1
        elif toks[j].text in ")]}":
            depth -= 1
            if depth == 0:
                return j
    return None


def _split(toks, sep):
    parts, cur, depth = [], [], 0
    for t in toks:
        if t.text in ("(", "[", "{"):
            depth += 1
        elif t.text in (")", "]", "}"):
            depth -= 1
        if t.text == sep and depth == 0:
            parts.append(cur)
            cur = []
        else:
            cur.append(t)
    parts.append(cur)
    return parts


def _join(toks):
    out = ""
    prev = None
    for t in toks:
        if prev is not None and t.col > prev.col + len(prev.text):
            out += " "
        out += t.text
        prev = t
    return out


def _clause(name, args, location, at):
    def bad(msg):
        return AccError(error("E_CLAUSE", msg, location))

    if name == "independent":
        if args is not None:
            raise bad("'independent' takes no arguments")
        return Clause(name, location=location)
    if name in ("gang", "worker", "vector"):
        if args is not None and not args:
            raise bad(f"empty size for '{name}'")
        return Clause(name, size=_join(args) if args else None, location=location)
    if args is None or not args:
        raise bad(f"'{name}' requires a variable list")
    operator = None
    if name == "reduction":
        parts = _split(args, ":")
        if len(parts) != 2 or not parts[0]:
            raise bad("reduction clause must have the form reduction(op:list)")
        operator = _join(parts[0])
        if operator not in REDUCTION_OPS:
            raise AccError(error("E_REDOP", f"unsupported reduction operator '{operator}'", at(parts[0][0])))
        args = parts[1]
    variables = []
    for item in _split(args, ","):
        if not item or item[0].kind != "identifier":
            raise bad(f"malformed variable list in '{name}'")
        bounds = None
        if len(item) > 1:
            if item[1].text != "[" or _match(item, 1) != len(item) - 1 or name in ("reduction", "private"):
                raise bad(f"malformed variable '{_join(item)}' in '{name}'")
            inner = _split(item[2:-1], ":")
            if len(inner) != 2 or not inner[1]:
                raise bad(f"subarray must have the form {item[0].text}[start:count]")
            bounds = SubarrayBounds(_join(inner[0]) or "0", _join(inner[1]))
        variables.append(ClauseVar(item[0].text, bounds, at(item[0])))
    return Clause(name, tuple(variables), operator, location=location)


def scan_directives(src):
    """Every ``#pragma acc`` line of a normalized source as a DirectiveNode.

    All malformed directives are reported together in one AccError.
    """
    attached = {}
    for body in parse_statements(src):
        _collect_pragmas(body, attached)
    directives, errors = [], []
    for index, tok in enumerate(src.tokens):
        if not tok.is_pragma("acc"):
            continue
        location = src.original_location(index)
        try:
            kind, clauses = parse_directive(tok.text, location)
        except AccError as exc:
            errors.extend(exc.diagnostics[:1])
            continue
        stmt = attached.get(index)
        if stmt is None:
            errors.append(error("E_ATTACH", f"'{kind}' directive is not followed by a statement "
                                            "inside a function", location))
            continue
        directives.append(DirectiveNode(kind, clauses, location, (index, stmt.end), tok.text))
    if errors:
        raise AccError(errors)
    return directives


def _collect_pragmas(stmt, out):
    if isinstance(stmt, PragmaStmt) and stmt.stmt is not None:
        out[stmt.tok] = stmt.stmt
    for child in children(stmt):
        _collect_pragmas(child, out)


def attached_statement(directive, ast):
    node = ast.statement_at(directive.span[0])
    return node.stmt if isinstance(node, PragmaStmt) else None


def enclosing(directive, directives):
    """Directives whose attached span strictly contains ``directive``, outermost first."""
    return [
        d for d in directives
        if d is not directive and d.span[0] < directive.span[0] and directive.span[1] <= d.span[1]
    ]


def validate(directives, ast):
    """Check clause legality, nesting and variable kinds; return diagnostics."""
    diags = []
    for d in directives:
        outer = enclosing(d, directives)
        for c in d.clauses:
            if c.kind not in LEGAL[d.kind]:
                diags.append(error("E_CLAUSE", f"clause '{c.kind}' is not allowed on '{d.kind}'", c.location))
        if d.kind in ("kernels", "data") and any(o.kind == "kernels" for o in outer):
            diags.append(error("E_NEST", f"'{d.kind}' directive nested inside a kernels region", d.location))
        if d.kind == "loop":
            if not any(o.kind == "kernels" for o in outer):
                diags.append(error("E_NEST", "'loop' directive outside a kernels region", d.location))
            if not isinstance(attached_statement(d, ast), For):
                diags.append(error("E_ATTACH", "'loop' directive must precede a for statement", d.location))
            if d.independent:
                kernels = [o for o in outer if o.kind == "kernels"]
                depth = sum(1 for o in outer if o.independent and (not kernels or o.span[0] > kernels[-1].span[0]))
                if depth >= 2:
                    diags.append(warning("W_DEEPNEST", "independent loop nested deeper than two levels "
                                                       "runs sequentially in each thread", d.location))
        seen = set()
        position = d.span[0]
        for c in d.clauses:
            for v in c.variables:
                decl = ast.lookup(v.name, position)
                if decl is None:
                    diags.append(error("E_UNBOUND", f"'{v.name}' is not declared", v.location))
                    continue
                if c.kind == "reduction":
                    if not isinstance(decl, VarDecl) or decl.is_array or decl.base not in ARITHMETIC:
                        diags.append(error("E_REDTYPE", f"reduction target '{v.name}' must be an "
                                                        "arithmetic scalar", v.location))
                elif c.kind in DATA_CLAUSES:
                    if not isinstance(decl, VarDecl) or not decl.is_array:
                        diags.append(error("E_CLAUSE", f"data clause variable '{v.name}' must be an "
                                                       "array or pointer", v.location))
                    if v.name in seen:
                        diags.append(error("E_CLAUSE", f"'{v.name}' appears in more than one data clause",
                                           v.location))
                    seen.add(v.name)
            if c.kind == "vector" and c.size is not None:
                value = ast.eval(c.size)
                if value is None or value <= 0:
                    diags.append(error("E_CLAUSE", "vector length must be a positive integer constant",
                                       c.location))
    return sorted(set(diags))


def check(src, ast):
    """Scan and validate; raise on any error, return (directives, warnings)."""
    directives = scan_directives(src)
    diags = validate(directives, ast)
    errors = [d for d in diags if d.is_error]
    if errors:
        raise AccError(errors)
    return directives, diags
