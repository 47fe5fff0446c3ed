"""Region lowering: scope, kernels, data clauses, hoisting, launches, assembly."""

from .kernels import Nest, construct_kernel, find_nests, map_parallelism, parse_loop_header
from .lowering import (
    HoistedDecl,
    hoist_declarations,
    lower_data_clauses,
    lower_kernel_launch,
    lower_reduction,
    lower_region,
)
from .model import (
    PARALLELISM_MAPPING,
    Binding,
    KernelParam,
    KernelSpec,
    LaunchGeometry,
    LoopDim,
    LoweredRegion,
    Reduction,
    ScopeBindings,
    TransferSize,
)
from .pipeline import Translation, assemble_output, output_names, translate_file, translate_source
from .scope import infer_transfer_size, resolve_scope

__all__ = [
    "PARALLELISM_MAPPING", "Binding", "HoistedDecl", "KernelParam", "KernelSpec", "LaunchGeometry",
    "LoopDim", "LoweredRegion", "Nest", "Reduction", "ScopeBindings", "TransferSize", "Translation",
    "assemble_output", "construct_kernel", "find_nests", "hoist_declarations", "infer_transfer_size",
    "lower_data_clauses", "lower_kernel_launch", "lower_reduction", "lower_region", "map_parallelism",
    "output_names", "parse_loop_header", "resolve_scope", "translate_file", "translate_source",
]
