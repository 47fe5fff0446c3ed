"""Static accounting of launch, transfer and allocation sites in emitted code."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

ALLOC = re.compile(r"\bacc_alloc\(")
H2D = re.compile(r"\bacc_copy_h2d\(")
D2H = re.compile(r"\bacc_copy_d2h\(")
PARTIALS = "__partials"

FIELDS = ("launches", "h2d", "d2h", "alloc", "reductions")


@dataclass
class RegionCounts:
    region: int
    kind: str
    launches: int = 0
    h2d: int = 0
    d2h: int = 0
    alloc: int = 0
    reductions: int = 0
    overhead_alloc: int = 0
    overhead_d2h: int = 0

    def as_dict(self):
        return {f: getattr(self, f) for f in FIELDS}


@dataclass
class TranslationReport:
    target: str
    regions: list = field(default_factory=list)

    def total(self, name):
        return sum(getattr(r, name) for r in self.regions)

    @property
    def totals(self):
        return {f: self.total(f) for f in FIELDS}

    def lines(self):
        out = ["== translation report ==", f"target: {self.target}", f"regions: {len(self.regions)}"]
        for r in self.regions:
            counts = " ".join(f"{k}={v}" for k, v in r.as_dict().items())
            out.append(f"region {r.region} ({r.kind}): {counts}")
        for k, v in self.totals.items():
            out.append(f"{k}: {v}")
        out.append(f"reduction-overhead: alloc={self.total('overhead_alloc')} d2h={self.total('overhead_d2h')}")
        return out

    def format(self):
        return "\n".join(self.lines()) + "\n"


def count_sites(text, launch_pattern):
    """Counts for one block of emitted host code; partial-result traffic is split out."""
    c = RegionCounts(-1, "")
    launch = re.compile(launch_pattern)
    for line in text.splitlines():
        overhead = PARTIALS in line
        n_alloc = len(ALLOC.findall(line))
        n_d2h = len(D2H.findall(line))
        if overhead:
            c.overhead_alloc += n_alloc
            c.overhead_d2h += n_d2h
            c.reductions += n_alloc
        else:
            c.alloc += n_alloc
            c.d2h += n_d2h
        c.h2d += len(H2D.findall(line))
        c.launches += len(launch.findall(line))
    return c


def report(translation, profile=None):
    """Report built from each lowered region's emitted block."""
    from .backends import get_profile

    profile = profile or get_profile(translation.target)
    rep = TranslationReport(translation.target)
    for region in translation.regions:
        c = count_sites(region.block, profile.launch_pattern)
        c.region, c.kind = region.id, region.kind
        rep.regions.append(c)
    return rep
