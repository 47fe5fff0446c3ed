"""Whole-file translation: front end, regions, lowering and final assembly."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from ..accvalidate import check
from ..backends import emit_device_prelude, emit_host_runtime, emit_kernel, get_profile, kernel_signature
from ..cfront import normalize, parse_ast, tokenize
from ..errors import fail
from ..irdoc import DUMMY_RE, build_intermediate, revert
from .kernels import construct_kernel, find_nests, map_parallelism
from .lowering import hoist_declarations, lower_region, render_hoisted
from .model import LoweredRegion
from .scope import resolve_scope

OUTPUT_TAG = "_ipmacc"


def output_names(input_path, target):
    """Main output path and optional kernel sidecar for an input file."""
    profile = get_profile(target)
    path = Path(input_path)
    stem = path.with_name(path.stem + OUTPUT_TAG)
    main = stem.with_suffix(profile.suffix)
    side = stem.with_suffix(profile.sidecar) if profile.sidecar else None
    return main, side


@dataclass
class Translation:
    target: str
    source: str
    kernel_source: str  # OpenCL kernel file text, None for single-file targets
    regions: tuple
    kernels: tuple
    hoisted: tuple
    warnings: tuple
    ir: object
    host: str
    table: dict = field(repr=False, default_factory=dict)


def translate_source(text, target="cuda", kernel_file=None):
    """Translate one OpenACC C translation unit for ``target``."""
    profile = get_profile(target)
    src = normalize(tokenize(text))
    ast = parse_ast(src)
    directives, diags = check(src, ast)
    warnings = list(diags)
    doc = build_intermediate(src, directives)
    host, table = revert(doc, ast)

    prepared = {}
    kernel_scopes = []
    for region in table.values():
        if region.kind == "kernels":
            nests = find_nests(region, ast, warnings)
            geoms = [map_parallelism(n, ast) for n in nests]
            indices = {loop.index for g in geoms for loop in g.loops}
            scope = resolve_scope(region, ast, indices)
            kernel_scopes.append(scope)
            prepared[region.id] = (scope, nests, geoms)
        else:
            prepared[region.id] = (resolve_scope(region, ast), [], [])
    hoisted = hoist_declarations(kernel_scopes, ast)
    device_functions = {h.name for h in hoisted if h.kind == "function"}

    lowered, kernels = [], []
    for region in table.values():
        scope, nests, geoms = prepared[region.id]
        specs = []
        for k, (nest, geom) in enumerate(zip(nests, geoms)):
            name = f"__accb_kernel_{region.id}" if len(nests) == 1 else f"__accb_kernel_{region.id}_{k}"
            specs.append(construct_kernel(region, nest, scope, geom, ast, name, device_functions, warnings))
        block = lower_region(region, scope, specs, profile, ast)
        lowered.append(LoweredRegion(region.id, region.kind, region.dummy, block, tuple(s.name for s in specs)))
        kernels.extend(specs)

    source, kernel_source = assemble_output(host, lowered, hoisted, kernels, profile, ast, kernel_file)
    return Translation(target, source, kernel_source, tuple(lowered), tuple(kernels), tuple(hoisted),
                       tuple(sorted(set(warnings))), doc, host, table)


def _splice(host, lowered):
    blocks = {r.dummy: r.block for r in lowered}

    def sub(m):
        name = f"__accb_region_{m.group(1)}"
        if name not in blocks:
            return m.group(0)
        line_start = host_text.rfind("\n", 0, m.start()) + 1
        lead = host_text[line_start:m.start()]
        pad = lead if not lead.strip() else ""
        return blocks[name].replace("\n", "\n" + pad)

    host_text = host
    for _ in range(len(lowered) + 1):
        new = DUMMY_RE.sub(sub, host_text)
        if new == host_text:
            break
        host_text = new
    leftover = DUMMY_RE.search(host_text)
    if leftover:
        fail("E_INTERNAL", f"dummy call '{leftover.group(0)}' was not replaced")
    return host_text


def assemble_output(host, lowered, hoisted, kernels, profile, ast=None, kernel_file=None):
    """Final text: prelude, hoisted declarations, kernels, forward declarations, host.

    Returns ``(main_source, kernel_source)``; ``kernel_source`` is only set
    for targets that compile kernels from a separate file.
    """
    if profile.sidecar is None:
        # types move above the kernels, which are emitted before the host code
        for h in hoisted:
            if h.kind == "type":
                original = ast.text(h.span) if ast is not None else None
                if original is None or original not in host:
                    fail("E_INTERNAL", f"type '{h.name}' could not be moved above the kernels")
                host = host.replace(original, f"/* type {h.name} moved above the kernels */", 1)
    host = _splice(host, lowered)
    hoisted_text = "\n\n".join(render_hoisted(h, profile) for h in hoisted)
    kernel_text = "\n".join(emit_kernel(k, profile) for k in kernels)
    parts = [emit_host_runtime(profile, kernel_file)]
    if profile.sidecar is None:
        if hoisted_text:
            parts.append("/* declarations used by the kernels */\n" + hoisted_text + "\n")
        if kernel_text:
            parts.append(kernel_text)
        if kernels:
            parts.append("/* forward declarations */\n" + "".join(
                kernel_signature(k, profile) + ";\n" for k in kernels))
        parts.append(host)
        return "\n".join(parts), None
    names = "".join(f"/*   {k.name} */\n" for k in kernels)
    if kernels:
        parts.append(f"/* kernels built at run time from {kernel_file or 'kernels.cl'}: */\n" + names)
    parts.append(host)
    side = [emit_device_prelude(profile)]
    if hoisted_text:
        side.append(hoisted_text + "\n")
    side.append(kernel_text)
    return "\n".join(parts), "\n".join(side)


def translate_file(path, target="cuda", output=None):
    """Translate ``path``; returns (Translation, main path, sidecar path)."""
    main, side = output_names(path, target)
    if output is not None:
        main = Path(output)
        side = main.with_suffix(".cl") if side is not None else None
    text = Path(path).read_text()
    result = translate_source(text, target, kernel_file=side.name if side else None)
    return result, main, side


def strip_comments(text):
    return re.sub(r"/\*.*?\*/|//[^\n]*", "", text, flags=re.DOTALL)
