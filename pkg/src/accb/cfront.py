"""C-subset frontend: tokenizer, constant substitution, normalization and AST.

The token stream is lossless: joining every token's ``text`` reproduces the
input exactly.  Everything downstream works on token indices into the
normalized stream, so statement nodes and declarations carry full-token
spans ``[start, end)`` rather than character offsets.
"""

from __future__ import annotations

import ast as pyast
import re
from dataclasses import dataclass, field

from .errors import AccError, error, fail

KEYWORDS = frozenset(
    """auto break case char const continue default do double else enum extern
    float for goto if inline int long register restrict return short signed
    sizeof static struct switch typedef union unsigned void volatile while
    _Bool""".split()
)

STORAGE = frozenset({"static", "extern", "register", "auto", "typedef", "inline"})
QUALIFIERS = frozenset({"const", "volatile", "restrict"})
BASE_TYPES = frozenset(
    {"void", "char", "short", "int", "long", "float", "double", "signed", "unsigned", "_Bool"}
)
# typedef names normally supplied by headers, which are never expanded here
LIBRARY_TYPES = frozenset(
    """size_t ssize_t ptrdiff_t FILE int8_t int16_t int32_t int64_t uint8_t
    uint16_t uint32_t uint64_t intptr_t uintptr_t bool""".split()
)

TRIVIA = frozenset({"whitespace", "comment"})

_PUNCTUATORS = sorted(
    """... <<= >>= -> ++ -- << >> <= >= == != && || *= /= %= += -= &= ^= |= ##
    [ ] ( ) { } . & * + - ~ ! / % < > ^ | ? : ; = , #""".split(),
    key=len,
    reverse=True,
)

_TOKEN_RE = re.compile(
    r"""
    (?P<whitespace>(?:[ \t\r\n\f\v]|\\\r?\n)+)
  | (?P<linecomment>//[^\n]*)
  | (?P<blockcomment>/\*.*?\*/)
  | (?P<openblock>/\*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<badstring>"(?:[^"\\\n]|\\.)*)
  | (?P<char>'(?:[^'\\\n]|\\.)*')
  | (?P<badchar>'(?:[^'\\\n]|\\.)*)
  | (?P<number>\.?[0-9](?:[eEpP][+-]|[0-9a-zA-Z_.])*)
  | (?P<identifier>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<punct>"""
    + "|".join(re.escape(p) for p in _PUNCTUATORS)
    + r""")
  | (?P<other>.)
    """,
    re.VERBOSE | re.DOTALL,
)

_DIRECTIVE_RE = re.compile(r"#(?:[^\n\\]|\\.|\\\n)*", re.DOTALL)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int

    @property
    def location(self):
        return (self.line, self.col)

    @property
    def significant(self):
        return self.kind not in TRIVIA

    def is_pragma(self, namespace=None):
        if self.kind != "pragma":
            return False
        if namespace is None:
            return True
        words = self.text[1:].split()
        return len(words) >= 2 and words[1] == namespace


def _advance(line, col, text):
    nl = text.count("\n")
    if nl:
        return line + nl, len(text) - text.rfind("\n")
    return line, col + len(text)


def tokenize(source):
    """Split C source into a lossless token list.

    Preprocessor lines are kept whole; ``#pragma`` lines become a single
    ``pragma`` token (backslash continuations included), every other
    directive a ``preprocessor`` token.
    """
    if isinstance(source, bytes):
        source = source.decode("utf-8", "surrogateescape")
    tokens = []
    pos, line, col = 0, 1, 1
    at_line_start = True
    n = len(source)
    while pos < n:
        if source[pos] == "#" and at_line_start:
            m = _DIRECTIVE_RE.match(source, pos)
            text = m.group()
            kind = "pragma" if re.match(r"#\s*pragma\b", text) else "preprocessor"
            tokens.append(Token(kind, text, line, col))
            line, col = _advance(line, col, text)
            pos = m.end()
            at_line_start = False
            continue
        m = _TOKEN_RE.match(source, pos)
        group = m.lastgroup
        text = m.group()
        if group == "openblock":
            fail("E_LEX", "unterminated block comment", (line, col))
        if group == "badstring":
            fail("E_LEX", "unterminated string literal", (line, col))
        if group == "badchar":
            fail("E_LEX", "unterminated character literal", (line, col))
        if group == "whitespace":
            kind = "whitespace"
        elif group in ("linecomment", "blockcomment"):
            kind = "comment"
        elif group in ("string", "char", "number"):
            kind = "literal"
        elif group == "identifier":
            kind = "keyword" if text in KEYWORDS else "identifier"
        else:
            kind = "punctuator"
        tokens.append(Token(kind, text, line, col))
        if kind == "whitespace":
            at_line_start = at_line_start or "\n" in text
        elif kind != "comment":
            at_line_start = False
        line, col = _advance(line, col, text)
        pos = m.end()
    return tokens


def render(tokens):
    return "".join(t.text for t in tokens)


# --------------------------------------------------------------------------
# integer constant expressions

_INT_RE = re.compile(r"(0[xX][0-9a-fA-F]+|0[0-7]*|[1-9][0-9]*)[uUlL]*$")


def parse_int_literal(text):
    m = _INT_RE.match(text)
    if not m:
        return None
    body = m.group(1)
    if body.lower().startswith("0x"):
        return int(body, 16)
    if body.startswith("0") and len(body) > 1:
        return int(body, 8)
    return int(body)


def _c_div(a, b):
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


_BINOPS = {
    pyast.Add: lambda a, b: a + b,
    pyast.Sub: lambda a, b: a - b,
    pyast.Mult: lambda a, b: a * b,
    pyast.FloorDiv: _c_div,
    pyast.Mod: lambda a, b: a - _c_div(a, b) * b,
    pyast.LShift: lambda a, b: a << b,
    pyast.RShift: lambda a, b: a >> b,
    pyast.BitAnd: lambda a, b: a & b,
    pyast.BitOr: lambda a, b: a | b,
    pyast.BitXor: lambda a, b: a ^ b,
}


def eval_int(text, constants=None):
    """Evaluate a C integer constant expression made of literals.

    Identifiers found in ``constants`` (name -> replacement text) are
    substituted first.  Returns None when the text is not such an expression
    (other identifiers, floating literals, calls...).
    """
    if constants:
        text = substitute_constants(text, constants)
    try:
        toks = [t for t in tokenize(text) if t.significant]
    except AccError:
        return None
    if not toks:
        return None
    parts = []
    for t in toks:
        if t.kind == "literal":
            value = parse_int_literal(t.text)
            if value is None:
                return None
            parts.append(str(value))
        elif t.kind == "punctuator" and t.text in "+-*/%()<<>>&|^~":
            parts.append("//" if t.text == "/" else t.text)
        else:
            return None
    try:
        tree = pyast.parse(" ".join(parts), mode="eval")
        return _eval_node(tree.body)
    except (SyntaxError, ZeroDivisionError, ValueError, TypeError):
        return None


def _eval_node(node):
    if isinstance(node, pyast.Constant) and isinstance(node.value, int):
        return node.value
    if isinstance(node, pyast.UnaryOp):
        v = _eval_node(node.operand)
        if isinstance(node.op, pyast.USub):
            return -v
        if isinstance(node.op, pyast.UAdd):
            return v
        if isinstance(node.op, pyast.Invert):
            return ~v
    if isinstance(node, pyast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval_node(node.left), _eval_node(node.right))
    raise ValueError("not an integer constant expression")


# --------------------------------------------------------------------------
# constant substitution

_DEFINE_RE = re.compile(r"#\s*define\s+([A-Za-z_]\w*)(?!\()\s*(.*)$", re.DOTALL)
_UNDEF_RE = re.compile(r"#\s*undef\s+([A-Za-z_]\w*)")


def _track_define(text, table):
    m = _DEFINE_RE.match(text)
    if m:
        value = _constant_replacement(m.group(2), table)
        if value is not None:
            table[m.group(1)] = value
        else:
            table.pop(m.group(1), None)
    m = _UNDEF_RE.match(text)
    if m:
        table.pop(m.group(1), None)


def constant_table(tokens):
    """Numeric object-like macros live at the end of a token stream."""
    table = {}
    for tok in tokens:
        if tok.kind == "preprocessor":
            _track_define(tok.text, table)
    return table


def substitute_constants(text, table):
    """Replace constant macro names in an expression by their values."""
    toks = tokenize(text)
    return "".join(table[t.text] if t.kind == "identifier" and t.text in table else t.text for t in toks)


def expand_constants(source):
    """Substitute object-like ``#define NAME <numeric constant>`` macros.

    Only macros whose replacement is built from numeric literals, operators,
    parentheses and previously substituted names are expanded.  The
    ``#define`` lines themselves are kept.  Returns ``(text, table)``.
    """
    tokens = tokenize(source)
    table = {}
    out = []
    for tok in tokens:
        if tok.kind == "preprocessor":
            _track_define(tok.text, table)
            out.append(tok.text)
        elif tok.kind == "pragma":
            out.append(_substitute_pragma(tok.text, table))
        elif tok.kind == "identifier" and tok.text in table:
            out.append(table[tok.text])
        else:
            out.append(tok.text)
    return "".join(out), table


def _constant_replacement(body, table):
    body = re.sub(r"/\*.*?\*/|//.*", " ", body.replace("\\\n", " ")).strip()
    if not body:
        return None
    try:
        toks = [t for t in tokenize(body) if t.significant]
    except AccError:
        return None
    parts = []
    for t in toks:
        if t.kind == "literal" and t.text[0] not in "'\"":
            parts.append(t.text)
        elif t.kind == "identifier" and t.text in table:
            parts.append(table[t.text])
        elif t.kind == "punctuator" and t.text in "+-*/%()<<>>&|^~.":
            parts.append(t.text)
        else:
            return None
    text = "".join(parts)
    return text if len(toks) == 1 else f"({text})"


def _substitute_pragma(text, table):
    if not table:
        return text
    head, _, rest = text.partition("pragma")
    toks = tokenize(rest)
    return head + "pragma" + "".join(
        table[t.text] if t.kind == "identifier" and t.text in table else t.text for t in toks
    )


# --------------------------------------------------------------------------
# statement trees

@dataclass(eq=False)
class Stmt:
    start: int
    end: int


@dataclass(eq=False)
class Block(Stmt):
    items: list = field(default_factory=list)


@dataclass(eq=False)
class If(Stmt):
    rparen: int = 0
    cond: tuple = (0, 0)
    then: Stmt = None
    else_tok: int = None
    orelse: Stmt = None


@dataclass(eq=False)
class For(Stmt):
    lparen: int = 0
    rparen: int = 0
    init: tuple = (0, 0)
    cond: tuple = (0, 0)
    step: tuple = (0, 0)
    body: Stmt = None


@dataclass(eq=False)
class While(Stmt):
    rparen: int = 0
    cond: tuple = (0, 0)
    body: Stmt = None


@dataclass(eq=False)
class DoWhile(Stmt):
    do_tok: int = 0
    body: Stmt = None
    cond: tuple = (0, 0)


@dataclass(eq=False)
class Switch(Stmt):
    rparen: int = 0
    cond: tuple = (0, 0)
    body: Stmt = None


@dataclass(eq=False)
class PragmaStmt(Stmt):
    tok: int = 0
    stmt: Stmt = None


@dataclass(eq=False)
class Simple(Stmt):
    """Expression, declaration, jump, label, empty or preprocessor statement."""

    kind: str = "expr"
    decl: object = None


def children(stmt):
    if isinstance(stmt, Block):
        return list(stmt.items)
    if isinstance(stmt, If):
        return [s for s in (stmt.then, stmt.orelse) if s is not None]
    if isinstance(stmt, (For, While, DoWhile, Switch)):
        return [stmt.body]
    if isinstance(stmt, PragmaStmt):
        return [stmt.stmt] if stmt.stmt is not None else []
    return []


def walk(stmt):
    yield stmt
    for child in children(stmt):
        yield from walk(child)


_OPENERS = {"(": ")", "[": "]", "{": "}"}
_CLOSERS = {")", "]", "}"}


class _Parser:
    """Recursive-descent statement parser over significant tokens."""

    def __init__(self, tokens, type_names=None, declarations=False):
        self.tokens = tokens
        self.sig = [i for i, t in enumerate(tokens) if t.significant]
        self.type_names = set(LIBRARY_TYPES if type_names is None else type_names)
        self.declarations = declarations

    # helpers over significant positions
    def tok(self, p):
        return self.tokens[self.sig[p]] if p < len(self.sig) else None

    def text(self, p):
        t = self.tok(p)
        return t.text if t is not None else None

    def idx(self, p):
        return self.sig[p] if p < len(self.sig) else len(self.tokens)

    def after(self, p):
        """Full index just past significant token p."""
        return self.sig[p] + 1

    def loc(self, p):
        t = self.tok(p)
        if t is None:
            last = self.tokens[-1] if self.tokens else Token("whitespace", "", 1, 1)
            return _advance(last.line, last.col, last.text)
        return t.location

    def expect(self, p, text):
        if self.text(p) != text:
            found = self.text(p)
            fail("E_PARSE", f"expected '{text}'" + (f", found '{found}'" if found else " at end of input"), self.loc(p))
        return p + 1

    def match(self, p):
        """Position of the closer matching the opener at p."""
        stack = []
        q = p
        while q < len(self.sig):
            t = self.tok(q)
            if t.kind == "punctuator":
                if t.text in _OPENERS:
                    stack.append((t.text, q))
                elif t.text in _CLOSERS:
                    if not stack or _OPENERS[stack[-1][0]] != t.text:
                        fail("E_PARSE", f"unbalanced '{t.text}'", t.location)
                    stack.pop()
                    if not stack:
                        return q
            q += 1
        fail("E_PARSE", f"unclosed '{self.text(stack[-1][1])}'", self.loc(stack[-1][1]))

    def span(self, p_lo, p_hi):
        """Full-index span covering significant positions [p_lo, p_hi)."""
        if p_lo >= p_hi:
            at = self.idx(p_lo)
            return (at, at)
        return (self.sig[p_lo], self.sig[p_hi - 1] + 1)

    # statements
    def statement(self, p):
        t = self.tok(p)
        if t is None:
            fail("E_PARSE", "expected a statement at end of input", self.loc(p))
        text = t.text
        if t.kind == "punctuator":
            if text == "{":
                return self.block(p)
            if text == ";":
                return Simple(self.sig[p], self.after(p), "empty"), p + 1
            if text == "}":
                fail("E_PARSE", "unexpected '}'", t.location)
        if t.kind == "pragma":
            nxt = self.tok(p + 1)
            if nxt is None or nxt.text == "}" or nxt.kind in ("pragma", "preprocessor") and not t.is_pragma("acc"):
                return PragmaStmt(self.sig[p], self.after(p), self.sig[p], None), p + 1
            body, q = self.statement(p + 1)
            return PragmaStmt(self.sig[p], body.end, self.sig[p], body), q
        if t.kind == "preprocessor":
            return Simple(self.sig[p], self.after(p), "preproc"), p + 1
        if t.kind == "keyword":
            if text == "if":
                return self.if_stmt(p)
            if text == "for":
                return self.for_stmt(p)
            if text == "while":
                lp = self.expect(p + 1, "(") - 1
                rp = self.match(lp)
                body, q = self.statement(rp + 1)
                return While(self.sig[p], body.end, self.sig[rp], self.span(lp + 1, rp), body), q
            if text == "do":
                body, q = self.statement(p + 1)
                if self.text(q) != "while":
                    fail("E_PARSE", "expected 'while' after do body", self.loc(q))
                lp = self.expect(q + 1, "(") - 1
                rp = self.match(lp)
                end = self.expect(rp + 1, ";")
                return DoWhile(self.sig[p], self.after(end - 1), self.sig[p], body, self.span(lp + 1, rp)), end
            if text == "switch":
                lp = self.expect(p + 1, "(") - 1
                rp = self.match(lp)
                body, q = self.statement(rp + 1)
                return Switch(self.sig[p], body.end, self.sig[rp], self.span(lp + 1, rp), body), q
            if text == "goto":
                if self.declarations:
                    fail("E_PARSE", "'goto' is outside the supported C subset", t.location)
                return self.simple(p, "jump")
            if text in ("return", "break", "continue"):
                return self.simple(p, "jump")
            if text in ("case", "default"):
                q = p + 1
                while self.text(q) not in (":", None):
                    q = self.match(q) + 1 if self.text(q) in _OPENERS else q + 1
                self.expect(q, ":")
                return Simple(self.sig[p], self.after(q), "label"), q + 1
        if t.kind == "identifier" and self.text(p + 1) == ":":
            return Simple(self.sig[p], self.after(p + 1), "label"), p + 2
        if self.declarations and self.is_decl_start(p):
            stmt, q = self.simple(p, "decl")
            stmt.decl = self.declaration(p, q - 1)
            if stmt.decl.is_typedef:
                self.type_names.update(d.name for d in stmt.decl.declarators)
            return stmt, q
        return self.simple(p, "expr")

    def simple(self, p, kind):
        q = p
        while True:
            t = self.tok(q)
            if t is None:
                fail("E_PARSE", "expected ';' at end of input", self.loc(q))
            if t.kind == "punctuator":
                if t.text == ";":
                    return Simple(self.sig[p], self.after(q), kind), q + 1
                if t.text in _OPENERS:
                    q = self.match(q) + 1
                    continue
                if t.text in _CLOSERS:
                    fail("E_PARSE", f"expected ';' before '{t.text}'", t.location)
            q += 1

    def block(self, p):
        close = self.match(p)
        items = []
        q = p + 1
        while q < close:
            stmt, q = self.statement(q)
            items.append(stmt)
        if q != close:
            fail("E_PARSE", "statement runs past end of block", self.loc(close))
        return Block(self.sig[p], self.after(close), items), close + 1

    def if_stmt(self, p):
        lp = self.expect(p + 1, "(") - 1
        rp = self.match(lp)
        then, q = self.statement(rp + 1)
        node = If(self.sig[p], then.end, self.sig[rp], self.span(lp + 1, rp), then)
        if self.text(q) == "else":
            orelse, q2 = self.statement(q + 1)
            node.else_tok = self.sig[q]
            node.orelse = orelse
            node.end = orelse.end
            q = q2
        return node, q

    def for_stmt(self, p):
        lp = self.expect(p + 1, "(") - 1
        rp = self.match(lp)
        semis = []
        q = lp + 1
        while q < rp:
            t = self.text(q)
            if t in _OPENERS:
                q = self.match(q) + 1
                continue
            if t == ";":
                semis.append(q)
            q += 1
        if len(semis) != 2:
            fail("E_PARSE", "malformed for-loop header", self.loc(lp))
        body, q = self.statement(rp + 1)
        return (
            For(
                self.sig[p],
                body.end,
                self.sig[lp],
                self.sig[rp],
                self.span(lp + 1, semis[0]),
                self.span(semis[0] + 1, semis[1]),
                self.span(semis[1] + 1, rp),
                body,
            ),
            q,
        )

    # declarations
    def is_decl_start(self, p):
        t = self.tok(p)
        if t.kind == "keyword":
            return t.text in STORAGE or t.text in QUALIFIERS or t.text in BASE_TYPES or t.text in (
                "struct", "union", "enum")
        if t.kind == "identifier" and t.text in self.type_names:
            nxt = self.tok(p + 1)
            return nxt is not None and (nxt.kind == "identifier" or nxt.text in ("*", "("))
        return False

    def declaration(self, p, p_end):
        """Parse the declaration in significant positions [p, p_end)."""
        start = p
        storage, quals, words = set(), set(), []
        struct = None
        while p < p_end:
            t = self.tok(p)
            if t.text in STORAGE:
                storage.add(t.text)
            elif t.text in QUALIFIERS:
                quals.add(t.text)
            elif t.text in ("struct", "union", "enum"):
                kw, tag = t.text, None
                if self.tok(p + 1).kind == "identifier":
                    tag = self.text(p + 1)
                    p += 1
                if self.text(p + 1) == "{":
                    close = self.match(p + 1)
                    struct = (kw, tag, self.span(p + 1, close + 1))
                    p = close
                words.append(f"{kw} {tag}" if tag else f"{kw} <anonymous>")
            elif t.text in BASE_TYPES:
                words.append(t.text)
            elif t.kind == "identifier" and t.text in self.type_names and not words:
                words.append(t.text)
            elif t.text == "__attribute__":
                p = self.match(p + 1)
            else:
                break
            p += 1
        if not words:
            if not (storage or quals):
                fail("E_PARSE", "expected a type specifier", self.loc(start))
            words = ["int"]
        base = canonical_base(words)
        declarators = []
        while p < p_end:
            d, p = self.declarator(p, p_end)
            declarators.append(d)
            if p < p_end:
                if self.text(p) != ",":
                    fail("E_PARSE", f"unexpected '{self.text(p)}' in declaration", self.loc(p))
                p += 1
        return Declaration(
            base=base,
            storage=frozenset(storage),
            qualifiers=frozenset(quals),
            declarators=declarators,
            struct=struct,
            span=self.span(start, p_end + 1 if self.text(p_end) == ";" else p_end),
        )

    def declarator(self, p, p_end, abstract=False):
        pointer = 0
        while self.text(p) == "*" or (pointer and self.text(p) in QUALIFIERS):
            if self.text(p) == "*":
                pointer += 1
            p += 1
        name, name_idx, funcptr = None, None, False
        if self.text(p) == "(" and self.text(p + 1) == "*":
            close = self.match(p)
            for q in range(p, close):
                if self.tok(q).kind == "identifier":
                    name, name_idx = self.text(q), self.sig[q]
            funcptr = True
            p = close + 1
        elif p < p_end and self.tok(p).kind == "identifier":
            name, name_idx = self.text(p), self.sig[p]
            p += 1
        elif not abstract:
            fail("E_PARSE", "expected a declarator name", self.loc(p))
        extents, params, variadic = [], None, False
        while p < p_end and self.text(p) in ("[", "("):
            close = self.match(p)
            if self.text(p) == "[":
                extents.append(self.source(p + 1, close).strip())
            elif funcptr:
                pass
            else:
                params, variadic = self.parameters(p + 1, close)
            p = close + 1
        init = None
        if p < p_end and self.text(p) == "=":
            q = p + 1
            while q < p_end and self.text(q) != ",":
                q = self.match(q) + 1 if self.text(q) in _OPENERS else q + 1
            init = self.span(p + 1, q)
            p = q
        while p < p_end and self.text(p) == "__attribute__":
            p = self.match(p + 1) + 1
        return (
            Declarator(name, name_idx, pointer, tuple(extents), params, variadic, init, funcptr),
            p,
        )

    def parameters(self, p, close):
        if self.text(p) == "void" and p + 1 == close:
            return [], False
        params, variadic = [], False
        while p < close:
            q = p
            while q < close and self.text(q) != ",":
                q = self.match(q) + 1 if self.text(q) in _OPENERS else q + 1
            if self.text(p) == "...":
                variadic = True
            else:
                params.append(self.parameter(p, q))
            p = q + 1
        return params, variadic

    def parameter(self, p, q):
        quals, words = set(), []
        while p < q:
            t = self.tok(p)
            if t.text in QUALIFIERS or t.text == "register":
                quals.add(t.text)
            elif t.text in ("struct", "union", "enum"):
                words.append(f"{t.text} {self.text(p + 1)}")
                p += 1
            elif t.text in BASE_TYPES:
                words.append(t.text)
            elif t.kind == "identifier" and t.text in self.type_names and not words:
                words.append(t.text)
            else:
                break
            p += 1
        if not words:
            fail("E_PARSE", "expected a parameter type", self.loc(p))
        d, _ = self.declarator(p, q, abstract=True)
        return (canonical_base(words), frozenset(quals), d)

    def source(self, p_lo, p_hi):
        a, b = self.span(p_lo, p_hi)
        return render(self.tokens[a:b])

    # top level
    def translation_unit(self):
        """Split the unit into top-level items.

        Returns a list of ``(kind, p_start, p_end, body)`` where kind is one of
        function / declaration / pragma / preprocessor, and body is the
        parsed function Block (functions only).
        """
        p = 0
        n = len(self.sig)
        while p < n:
            t = self.tok(p)
            if t.kind in ("pragma", "preprocessor"):
                yield (t.kind, p, p + 1, None)
                p += 1
                continue
            q = p
            while True:
                tq = self.tok(q)
                if tq is None:
                    fail("E_PARSE", "expected ';' at end of input", self.loc(q))
                if tq.text == ";":
                    yield ("declaration", p, q + 1, None)
                    p = q + 1
                    break
                if tq.text == "{" and q > p and self.text(q - 1) == ")":
                    body, after = self.block(q)
                    yield ("function", p, after, body)
                    p = after
                    break
                if tq.text in _OPENERS:
                    q = self.match(q) + 1
                    continue
                if tq.text in _CLOSERS:
                    fail("E_PARSE", f"unbalanced '{tq.text}'", tq.location)
                if tq.kind in ("pragma", "preprocessor") and q > p:
                    fail("E_PARSE", "directive inside a declaration", tq.location)
                q += 1


def canonical_base(words):
    words = [w for w in words]
    if words in (["unsigned"], ["signed"]):
        words.append("int")
    if len(words) > 1 and "int" in words and any(w in ("short", "long") for w in words):
        words.remove("int")
    if words == ["signed", "int"]:
        words = ["int"]
    return " ".join(words)


# --------------------------------------------------------------------------
# normalization

@dataclass(frozen=True)
class NormalizedSource:
    text: str
    tokens: tuple
    provenance: tuple  # normalized index -> original index, or None when inserted
    original: tuple

    def original_location(self, index):
        """Original (line, col) for a normalized token index."""
        index = min(index, len(self.tokens) - 1)
        while index >= 0:
            orig = self.provenance[index]
            if orig is not None:
                return self.original[orig].location
            index -= 1
        return (1, 1)

    def location(self, index):
        return self.original_location(index)


def normalize(tokens):
    """Brace every if/else/while/for/do body.

    Inserted tokens are brace punctuators, each preceded by a single-space
    whitespace token.  ``else if`` chains keep their shape.
    """
    tokens = list(tokens)
    parser = _Parser(tokens)
    inserts = {}  # full index -> list of (key, [tokens])

    def brace(body, after):
        if isinstance(body, Block):
            return
        inserts.setdefault(after + 1, []).append(((0, 0), ["open"]))
        inserts.setdefault(body.end, []).append(((1, -after), ["close"]))

    def visit(stmt):
        if isinstance(stmt, If):
            brace(stmt.then, stmt.rparen)
            if stmt.orelse is not None and not isinstance(stmt.orelse, (Block, If)):
                brace(stmt.orelse, stmt.else_tok)
        elif isinstance(stmt, (For, While)):
            brace(stmt.body, stmt.rparen)
        elif isinstance(stmt, DoWhile):
            brace(stmt.body, stmt.do_tok)
        for child in children(stmt):
            visit(child)

    for kind, _, _, body in parser.translation_unit():
        if kind == "function":
            visit(body)

    out, prov = [], []
    for i in range(len(tokens) + 1):
        for _, what in sorted(inserts.get(i, []), key=lambda e: e[0]):
            piece = [(" ", "whitespace"), ("{", "punctuator")] if what == ["open"] else [
                (" ", "whitespace"), ("}", "punctuator")]
            for text, kind in piece:
                out.append((kind, text))
                prov.append(None)
        if i < len(tokens):
            out.append((tokens[i].kind, tokens[i].text))
            prov.append(i)
    relocated = []
    line, col = 1, 1
    for kind, text in out:
        relocated.append(Token(kind, text, line, col))
        line, col = _advance(line, col, text)
    return NormalizedSource(render(relocated), tuple(relocated), tuple(prov), tuple(tokens))


def normalize_text(source):
    return normalize(tokenize(source))


# --------------------------------------------------------------------------
# AST

@dataclass(frozen=True)
class Declarator:
    name: str
    name_index: int
    pointer: int
    extents: tuple
    params: list
    variadic: bool
    init: tuple
    funcptr: bool = False


@dataclass(frozen=True)
class Declaration:
    base: str
    storage: frozenset
    qualifiers: frozenset
    declarators: list
    struct: tuple
    span: tuple

    @property
    def is_typedef(self):
        return "typedef" in self.storage


_SIZES = {
    "char": 1, "signed char": 1, "unsigned char": 1, "_Bool": 1, "bool": 1,
    "short": 2, "unsigned short": 2, "int": 4, "unsigned int": 4, "float": 4,
    "long": 8, "unsigned long": 8, "long long": 8, "unsigned long long": 8,
    "double": 8, "long double": 16, "size_t": 8, "int8_t": 1, "uint8_t": 1,
    "int16_t": 2, "uint16_t": 2, "int32_t": 4, "uint32_t": 4, "int64_t": 8,
    "uint64_t": 8,
}

ARITHMETIC = frozenset(_SIZES) - {"long double"}


def sizeof_base(base):
    """Size in bytes of a base type, or None when it is not a builtin."""
    return _SIZES.get(base)


@dataclass(frozen=True)
class VarDecl:
    name: str
    base: str
    pointer: int
    extents: tuple
    position: int
    scope: tuple
    storage: str  # global | local | param
    qualifiers: frozenset = frozenset()
    funcptr: bool = False
    typedef: str = None
    fixed_size: bool = False  # every extent is an integer constant expression

    @property
    def is_array(self):
        return self.pointer > 0 or bool(self.extents)

    @property
    def element_type(self):
        if self.extents:
            return self.base + " *" * self.pointer if self.pointer else self.base
        if self.pointer:
            return self.base + " *" * (self.pointer - 1) if self.pointer > 1 else self.base
        return self.base

    def ctype(self):
        """Scalar C type text (base plus pointer stars)."""
        return self.base + (" " + "*" * self.pointer if self.pointer else "")


@dataclass(frozen=True)
class FunctionDef:
    name: str
    base: str
    pointer: int
    params: tuple
    span: tuple
    position: int
    body: Block = field(compare=False, repr=False)
    text: str = field(compare=False, repr=False)


@dataclass(frozen=True)
class TypeDef:
    names: tuple
    span: tuple
    text: str
    refs: tuple  # other type names mentioned in the definition


@dataclass
class Ast:
    source: NormalizedSource
    items: list
    functions: dict
    globals: dict
    types: dict
    prototypes: dict
    locals: dict
    type_names: frozenset
    constants: dict = field(default_factory=dict)

    def eval(self, text):
        return eval_int(text, self.constants)

    @property
    def tokens(self):
        return self.source.tokens

    def function_at(self, position):
        for func in self.functions.values():
            if func.span[0] <= position < func.span[1]:
                return func
        return None

    def lookup(self, name, position):
        """Innermost declaration of ``name`` visible at a token index."""
        func = self.function_at(position)
        if func is not None:
            best = None
            for d in self.locals.get(func.name, ()):
                if d.name == name and d.position <= position and d.scope[0] <= position < d.scope[1]:
                    if best is None or d.position > best.position:
                        best = d
            if best is not None:
                return best
            for p in func.params:
                if p.name == name:
                    return p
        g = [d for d in self.globals.get(name, ()) if d.position <= position]
        if g:
            return g[-1]
        if name in self.types and self.types[name].span[0] < position:
            return self.types[name]
        if name in self.functions:
            return self.functions[name]
        return None

    def statement_at(self, position):
        func = self.function_at(position)
        if func is None:
            return None
        for stmt in walk(func.body):
            if stmt.start == position:
                return stmt
        return None

    def text(self, span):
        return render(self.tokens[span[0]:span[1]])


def _type_refs(tokens, span, own, type_names):
    refs = []
    toks = tokens[span[0]:span[1]]
    sig = [t for t in toks if t.significant]
    for k, t in enumerate(sig):
        name = None
        if t.text in ("struct", "union", "enum") and k + 1 < len(sig) and sig[k + 1].kind == "identifier":
            name = f"{t.text} {sig[k + 1].text}"
        elif t.kind == "identifier" and t.text in type_names and (k == 0 or sig[k - 1].text not in (
                ".", "->", "struct", "union", "enum")):
            name = t.text
        if name and name not in own and name not in refs:
            refs.append(name)
    return tuple(refs)


def parse_ast(src):
    """Declaration-level AST of a normalized translation unit."""
    tokens = list(src.tokens)
    parser = _Parser(tokens, declarations=True)
    functions, globals_, types, prototypes, locals_ = {}, {}, {}, {}, {}
    items = []
    initialized = set()
    constants = constant_table(tokens)

    def fixed(pointer, extents):
        return pointer == 0 and bool(extents) and all(eval_int(e, constants) is not None for e in extents)

    def loc(index):
        return src.original_location(index)

    def add_type(decl, names):
        names = tuple(n for n in names if n)
        if not names:
            return
        span = decl.span
        td = TypeDef(names, span, render(tokens[span[0]:span[1]]),
                     _type_refs(tokens, span, names, parser.type_names | set(types)))
        for n in names:
            if n in types:
                raise AccError(error("E_DUP", f"duplicate definition of type '{n}'", loc(span[0])))
            types[n] = td

    for kind, p, q, body in parser.translation_unit():
        span = parser.span(p, q)
        if kind in ("pragma", "preprocessor"):
            items.append((kind, None, span))
            continue
        if kind == "function":
            brace = body.start
            p_brace = parser.sig.index(brace)
            decl = parser.declaration(p, p_brace)
            if len(decl.declarators) != 1 or decl.declarators[0].params is None:
                fail("E_PARSE", "malformed function definition", loc(span[0]))
            d = decl.declarators[0]
            if d.variadic:
                fail("E_PARSE", "variadic functions are outside the supported C subset", loc(d.name_index))
            if d.name in functions:
                raise AccError(error("E_DUP", f"duplicate definition of function '{d.name}'", loc(d.name_index)))
            params = tuple(
                _param_decl(base, quals, pd, span) for base, quals, pd in d.params if pd.name)
            func = FunctionDef(d.name, decl.base, d.pointer, params, span, d.name_index, body,
                               render(tokens[span[0]:span[1]]))
            functions[d.name] = func
            locals_[d.name] = _collect_locals(body, parser, fixed)
            items.append(("function", d.name, span))
            continue
        decl = parser.declaration(p, q - 1)
        if decl.struct is not None:
            kw, tag, _ = decl.struct
            names = [f"{kw} {tag}"] if tag else []
            if decl.is_typedef:
                names += [d.name for d in decl.declarators]
            add_type(decl, names)
        elif decl.is_typedef:
            add_type(decl, [d.name for d in decl.declarators])
        if decl.is_typedef:
            parser.type_names.update(d.name for d in decl.declarators)
            items.append(("typedef", tuple(d.name for d in decl.declarators), span))
            continue
        for d in decl.declarators:
            if d.params is not None and not d.funcptr:
                prototypes[d.name] = (decl.base, d.pointer, d.params)
                items.append(("prototype", d.name, span))
                continue
            if d.init is not None and "extern" not in decl.storage:
                if d.name in initialized:
                    raise AccError(error("E_DUP", f"duplicate definition of '{d.name}'", loc(d.name_index)))
                initialized.add(d.name)
            globals_.setdefault(d.name, []).append(
                VarDecl(d.name, decl.base, d.pointer, d.extents, d.name_index, (0, len(tokens)),
                        "global", decl.qualifiers, d.funcptr, fixed_size=fixed(d.pointer, d.extents)))
            items.append(("variable", d.name, span))
        if not decl.declarators and decl.struct is not None:
            items.append(("struct", decl.struct[1], span))
    return Ast(src, items, functions, globals_, types, prototypes, locals_, frozenset(parser.type_names),
               constants)


def _param_decl(base, quals, d, scope):
    pointer, extents = d.pointer, d.extents
    if extents:
        # array parameters decay to pointers
        pointer, extents = pointer + 1, extents[1:]
    return VarDecl(d.name, base, pointer, extents, d.name_index, scope, "param", quals, d.funcptr)


def _collect_locals(body, parser, fixed):
    out = []

    def add(decl, scope_end):
        for d in decl.declarators:
            if d.params is not None and not d.funcptr:
                continue
            out.append(VarDecl(d.name, decl.base, d.pointer, d.extents, d.name_index,
                               (d.name_index, scope_end), "local", decl.qualifiers, d.funcptr,
                               typedef=d.name if decl.is_typedef else None,
                               fixed_size=fixed(d.pointer, d.extents)))

    def visit(stmt, scope_end):
        if isinstance(stmt, Block):
            for item in stmt.items:
                visit(item, stmt.end)
            return
        if isinstance(stmt, Simple) and stmt.decl is not None:
            add(stmt.decl, scope_end)
            return
        if isinstance(stmt, For):
            a, b = stmt.init
            p_lo = parser.sig.index(a) if a < b else None
            if p_lo is not None and parser.is_decl_start(p_lo):
                p_hi = parser.sig.index(b - 1) + 1
                add(parser.declaration(p_lo, p_hi), stmt.end)
            visit(stmt.body, stmt.end)
            return
        for child in children(stmt):
            visit(child, scope_end)

    visit(body, body.end)
    return out


def parse_statements(src, declarations=False):
    """Function bodies of a normalized source, keyed by their brace index."""
    parser = _Parser(list(src.tokens), declarations=declarations)
    return [body for kind, _, _, body in parser.translation_unit() if kind == "function"]


def statement_parser(tokens, type_names=None):
    """A declaration-aware parser for standalone token lists (region bodies)."""
    return _Parser(list(tokens), type_names=type_names, declarations=True)
