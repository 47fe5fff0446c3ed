"""accb: translate OpenACC-annotated C into CUDA, OpenCL or serial C sources."""

from .errors import AccError, Diagnostic
from .translate import Translation, output_names, translate_source

__version__ = "0.1.0"

__all__ = ["AccError", "Diagnostic", "Translation", "output_names", "translate_source", "__version__"]
