"""Value types shared by the lowering passes and the backends."""

from __future__ import annotations

from dataclasses import dataclass, field

# OpenACC parallelism level -> execution-model unit
PARALLELISM_MAPPING = {
    "gang": "kernel",
    "worker": "thread block",
    "vector": "warp",
    "thread": "thread",
}

DEFAULT_BLOCK = {1: (256,), 2: (16, 16)}
MAX_BLOCK_THREADS = 1024
AXES = "xyz"


@dataclass(frozen=True)
class Binding:
    name: str
    kind: str  # scalar | array | constant | user-function | user-type | loop-index | local | builtin
    ctype: str = None
    decl: object = None
    extents: tuple = ()
    fixed_size: bool = False
    size: object = None  # TransferSize for arrays named in a data clause
    span: tuple = None
    location: tuple = (1, 1)  # first use inside the region


@dataclass
class ScopeBindings:
    region: object
    bindings: dict = field(default_factory=dict)  # name -> Binding, first-appearance order

    def __getitem__(self, name):
        return self.bindings[name]

    def __contains__(self, name):
        return name in self.bindings

    def of_kind(self, *kinds):
        return [b for b in self.bindings.values() if b.kind in kinds]


@dataclass(frozen=True)
class TransferSize:
    bytes: str
    offset: str
    alloc: str


@dataclass(frozen=True)
class LoopDim:
    index: str
    ctype: str
    lower: str
    upper: str
    inclusive: bool
    step: int
    cond: str  # original loop condition, reused as the guard
    count: str  # iteration count, evaluated on the host

    def index_expr(self, linear):
        if self.lower == "0" and self.step == 1:
            return linear
        step = "" if self.step == 1 else f"{self.step} * "
        return f"({self.lower}) + {step}({linear})"


@dataclass(frozen=True)
class LaunchGeometry:
    dims: int
    block: tuple
    loops: tuple = ()  # one LoopDim per parallel dimension; empty for a single-thread kernel

    @property
    def counts(self):
        return tuple(loop.count for loop in self.loops) or ("1",)

    @property
    def grid(self):
        return tuple(f"({n} + {b - 1}) / {b}" if b > 1 else n for n, b in zip(self.counts, self.block))

    @property
    def threads(self):
        n = 1
        for b in self.block:
            n *= b
        return n


@dataclass(frozen=True)
class KernelParam:
    name: str
    kind: str  # array | scalar | partials
    decl: str  # declarator template with "{name}" where the name goes
    host_arg: str
    ctype: str  # value type for scalars, element type for arrays

    def render(self, prefix=""):
        return prefix + self.decl.format(name=self.name)


@dataclass(frozen=True)
class Reduction:
    operator: str
    variable: str
    ctype: str
    partials: str
    scratch: str
    identity: str


@dataclass(frozen=True)
class KernelSpec:
    name: str
    params: tuple
    locals: tuple  # declaration statements placed at the top of the kernel
    body: str
    guard: str
    geometry: LaunchGeometry
    reductions: tuple = ()
    hoisted: tuple = ()
    wrap_continue: bool = False
    region: int = 0

    @property
    def args(self):
        return tuple(p.host_arg for p in self.params)


@dataclass(frozen=True)
class LoweredRegion:
    id: int
    kind: str
    dummy: str
    block: str  # own lowered text; nested regions still appear as dummy calls
    kernels: tuple = ()
