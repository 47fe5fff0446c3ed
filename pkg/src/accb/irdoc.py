"""Three-tag intermediate document and the region/host split.

The document is an ordered tuple of tags, each one of ``CCodeTag``,
``PragmaTag`` or ``ForLoopTag``.  Rendering the tags in order gives back
the normalized source byte for byte.
"""

from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field, replace

from .accvalidate import DirectiveNode, parse_directive
from .cfront import For, PragmaStmt, children, parse_statements, render as render_tokens
from .errors import fail


@dataclass(frozen=True)
class CCodeTag:
    text: str


@dataclass(frozen=True)
class PragmaTag:
    directive: DirectiveNode
    children: tuple = ()

    @property
    def text(self):
        return self.directive.text


@dataclass(frozen=True)
class ForLoopTag:
    head: str  # verbatim text from 'for' up to the body
    init: str
    cond: str
    step: str
    body: tuple = ()
    directive: DirectiveNode = None


TAG_KINDS = (CCodeTag, PragmaTag, ForLoopTag)


@dataclass(frozen=True)
class IrDocument:
    tags: tuple

    def render(self):
        return render(self.tags)


def render(tags):
    out = []
    for tag in tags:
        if isinstance(tag, CCodeTag):
            out.append(tag.text)
        elif isinstance(tag, PragmaTag):
            out.append(tag.directive.text)
            out.append(render(tag.children))
        else:
            out.append(tag.head)
            out.append(render(tag.body))
    return "".join(out)


def iter_tags(tags):
    for tag in tags:
        yield tag
        if isinstance(tag, PragmaTag):
            yield from iter_tags(tag.children)
        elif isinstance(tag, ForLoopTag):
            yield from iter_tags(tag.body)


# --------------------------------------------------------------------------
# building

def build_intermediate(src, directives):
    by_index = {d.span[0]: d for d in directives}
    tokens = src.tokens

    def interesting(stmt):
        if isinstance(stmt, For):
            return [stmt]
        if isinstance(stmt, PragmaStmt) and tokens[stmt.tok].is_pragma("acc"):
            if stmt.tok not in by_index:
                fail("E_INTERNAL", "directive has no attached statement", src.original_location(stmt.tok))
            return [stmt]
        out = []
        for child in children(stmt):
            out.extend(interesting(child))
        return out

    def text(a, b):
        return render_tokens(tokens[a:b])

    def emit(a, b, nodes, governing=None):
        tags = []
        pos = a
        for node in nodes:
            if node.start > pos:
                tags.append(CCodeTag(text(pos, node.start)))
            tags.append(make(node, governing))
            pos = node.end
        if b > pos:
            tags.append(CCodeTag(text(pos, b)))
        return tuple(tags)

    def make(node, governing):
        if isinstance(node, For):
            d = governing if governing is not None and governing.span[1] == node.end else None
            body = node.body
            return ForLoopTag(
                head=text(node.start, body.start),
                init=text(*node.init).strip(),
                cond=text(*node.cond).strip(),
                step=text(*node.step).strip(),
                body=emit(body.start, body.end, interesting_children(body)),
                directive=d,
            )
        d = by_index[node.tok]
        inner = interesting(node.stmt)
        gov = d if d.kind == "loop" else None
        return PragmaTag(d, emit(node.tok + 1, node.end, inner, gov))

    def interesting_children(stmt):
        return [n for child in children(stmt) for n in interesting(child)]

    nodes = []
    for body in parse_statements(src):
        nodes.extend(interesting(body))
    return IrDocument(emit(0, len(tokens), nodes))


# --------------------------------------------------------------------------
# XML form

def _esc_text(s):
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace("\r", "&#13;")


def _esc_attr(s):
    return (_esc_text(s).replace('"', "&quot;").replace("\n", "&#10;").replace("\t", "&#9;"))


def serialize_ir(doc):
    out = ["<accir>"]

    def emit(tags):
        for tag in tags:
            if isinstance(tag, CCodeTag):
                out.append(f"<ccode>{_esc_text(tag.text)}</ccode>")
            elif isinstance(tag, PragmaTag):
                d = tag.directive
                out.append(
                    f'<pragma directive="{d.kind}" text="{_esc_attr(d.text)}" line="{d.location[0]}" '
                    f'col="{d.location[1]}" start="{d.span[0]}" end="{d.span[1]}">'
                )
                emit(tag.children)
                out.append("</pragma>")
            else:
                governed = ' governed="1"' if tag.directive is not None else ""
                out.append(
                    f'<forloop head="{_esc_attr(tag.head)}" init="{_esc_attr(tag.init)}" '
                    f'cond="{_esc_attr(tag.cond)}" step="{_esc_attr(tag.step)}"{governed}>'
                )
                emit(tag.body)
                out.append("</forloop>")

    emit(doc.tags)
    out.append("</accir>")
    return "".join(out)


def deserialize_ir(text):
    root = ET.fromstring(text)
    if root.tag != "accir":
        raise ValueError("not an accir document")

    def tags(elem, parent_directive=None):
        out = []
        for child in elem:
            if child.tag == "ccode":
                out.append(CCodeTag(child.text or ""))
            elif child.tag == "pragma":
                location = (int(child.get("line")), int(child.get("col")))
                ptext = child.get("text")
                kind, clauses = parse_directive(ptext, location)
                if kind != child.get("directive"):
                    raise ValueError(f"directive attribute {child.get('directive')!r} does not match text")
                d = DirectiveNode(kind, clauses, location, (int(child.get("start")), int(child.get("end"))), ptext)
                out.append(PragmaTag(d, tags(child, d)))
            elif child.tag == "forloop":
                governed = child.get("governed") == "1"
                out.append(ForLoopTag(child.get("head"), child.get("init"), child.get("cond"),
                                      child.get("step"), tags(child), parent_directive if governed else None))
            else:
                raise ValueError(f"unknown element <{child.tag}>")
        return tuple(out)

    return IrDocument(tags(root))


# --------------------------------------------------------------------------
# regions

DUMMY_RE = re.compile(r"__accb_region_(\d+)\(\);")


def dummy_name(region_id):
    return f"__accb_region_{region_id}"


@dataclass(frozen=True)
class Region:
    id: int
    kind: str
    dummy: str
    directives: tuple  # enclosing acc directives, outermost first, ending with this region's own
    body: tuple
    function: str = None
    parent: int = None
    children: tuple = field(default=())

    @property
    def directive(self):
        return self.directives[-1]

    @property
    def position(self):
        return self.directive.span[0]

    @property
    def call(self):
        return f"{self.dummy}();"

    def render(self):
        return self.directive.text + render(self.body)


def revert(doc, ast=None):
    """Flatten the document to host text with one dummy call per region.

    Returns ``(host_text, table)`` where ``table`` maps dummy names to
    Regions in id order.  A data region keeps the kernels regions it contains
    as nested dummy calls inside its body.
    """
    table = {}

    def transform(tags, stack, parent):
        out = []
        for tag in tags:
            if isinstance(tag, PragmaTag) and tag.directive.kind in ("data", "kernels"):
                rid = len(table)
                name = dummy_name(rid)
                table[name] = None  # reserve the slot so ids follow source order
                own = stack + (tag.directive,)
                body = transform(tag.children, own, rid)
                func = None
                if ast is not None:
                    f = ast.function_at(tag.directive.span[0])
                    func = f.name if f is not None else None
                table[name] = Region(rid, tag.directive.kind, name, own, body, func, parent)
                out.append(CCodeTag(f"{name}();"))
            elif isinstance(tag, PragmaTag):
                out.append(PragmaTag(tag.directive, transform(tag.children, stack + (tag.directive,), parent)))
            elif isinstance(tag, ForLoopTag):
                body = transform(tag.body, stack, parent)
                out.append(ForLoopTag(tag.head, tag.init, tag.cond, tag.step, body, tag.directive))
            else:
                out.append(tag)
        return tuple(_merge(out))

    host = render(transform(doc.tags, (), None))
    for name, region in table.items():
        kids = tuple(r.id for r in table.values() if r.parent == region.id)
        table[name] = replace(region, children=kids)
    return host, table


def _merge(tags):
    out = []
    for tag in tags:
        if isinstance(tag, CCodeTag) and out and isinstance(out[-1], CCodeTag):
            out[-1] = CCodeTag(out[-1].text + tag.text)
        else:
            out.append(tag)
    return out


def reinline(host, table):
    """Splice every region back at its dummy call (inverse of revert)."""

    def expand(text):
        def sub(m):
            region = table[dummy_name(int(m.group(1)))]
            return expand(region.render())

        return DUMMY_RE.sub(sub, text)

    return expand(host)
