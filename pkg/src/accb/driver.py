"""Command-line driver: translate, write the artifacts, optionally compile."""

from __future__ import annotations

import argparse
import os
import shutil
import subprocess
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .backends import TARGETS
from .errors import AccError, error, fail
from .irdoc import serialize_ir
from .report import TranslationReport, report
from .translate import output_names, translate_source

EXIT_OK, EXIT_DIAG, EXIT_USAGE, EXIT_CC = 0, 1, 2, 3
ENV_TARGET = "ACCB_TARGET"
DEFAULT_TARGET = "cuda"


@dataclass
class DriverConfig:
    input: Path
    target: str = DEFAULT_TARGET
    output: Path | None = None
    src_only: bool = False
    keep_ir: bool = False
    device_compiler: str = "nvcc"
    host_compiler: str = "g++"
    verbose: bool = False
    report_figure: Path | None = None
    passthrough: list = field(default_factory=list)

    @property
    def compiler(self):
        return self.device_compiler if self.target == "cuda" else self.host_compiler


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def build_parser():
    p = _Parser(prog="accb", description="Translate OpenACC C into CUDA, OpenCL or serial C.")
    p.add_argument("input", help="C source file with OpenACC directives")
    p.add_argument("--target", help=f"one of {', '.join(TARGETS)} (default: ${ENV_TARGET} or {DEFAULT_TARGET})")
    p.add_argument("-o", dest="output", help="generated source with --src-only, compiled artifact otherwise")
    p.add_argument("--src-only", action="store_true", help="stop after writing the generated source")
    p.add_argument("--keep-ir", action="store_true", help="also write the intermediate document as XML")
    p.add_argument("--device-compiler", default="nvcc", help="compiler for the cuda target")
    p.add_argument("--host-compiler", default="g++", help="compiler for the opencl and serial targets")
    p.add_argument("--verbose", "-v", action="store_true", help="print the translation report")
    p.add_argument("--report-figure", metavar="PATH", help="save a bar chart of per-region site counts")
    return p


def parse_config(argv, environ=None):
    """DriverConfig from argv; raises _UsageError on bad flags or values."""
    environ = os.environ if environ is None else environ
    argv = list(argv)
    passthrough = []
    if "--" in argv:
        cut = argv.index("--")
        argv, passthrough = argv[:cut], argv[cut + 1:]
    ns = build_parser().parse_args(argv)
    if ns.target is not None:
        target, source = ns.target, "--target"
    else:
        target, source = environ.get(ENV_TARGET) or DEFAULT_TARGET, ENV_TARGET
    if target not in TARGETS:
        raise _UsageError(f"{source}: unknown target '{target}' (choose from {', '.join(TARGETS)})")
    return DriverConfig(
        input=Path(ns.input), target=target, output=Path(ns.output) if ns.output else None,
        src_only=ns.src_only, keep_ir=ns.keep_ir, device_compiler=ns.device_compiler,
        host_compiler=ns.host_compiler, verbose=ns.verbose,
        report_figure=Path(ns.report_figure) if ns.report_figure else None, passthrough=passthrough)


def compiler_command(cfg, generated, artifact):
    cmd = [cfg.compiler, str(generated), "-o", str(artifact)]
    if cfg.target == "opencl":
        cmd.append("-lOpenCL")
    elif cfg.target == "serial":
        cmd.append("-lm")
    return cmd + list(cfg.passthrough)


def invoke_system_compiler(cfg, generated, artifact=None):
    """Compile the generated source; returns the artifact path."""
    generated = Path(generated)
    if artifact is None:
        artifact = cfg.output or generated.with_name(cfg.input.stem)
    if shutil.which(cfg.compiler) is None:
        fail("E_NOCC", f"compiler '{cfg.compiler}' was not found")
    cmd = compiler_command(cfg, generated, artifact)
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        fail("E_CC", f"'{' '.join(cmd)}' failed with status {proc.returncode}:\n{proc.stderr.rstrip()}")
    return Path(artifact)


def _emit(diags, name, stream):
    for d in diags:
        print(d.format(name), file=stream)


def run_cli(argv=None, environ=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv, environ)
    except _UsageError as e:
        print(f"accb: usage error: {e}", file=stderr)
        return EXIT_USAGE
    name = str(cfg.input)
    try:
        text = cfg.input.read_text()
    except OSError as e:
        _emit([error("E_IO", f"cannot read input: {e.strerror}", (1, 1))], name, stderr)
        return EXIT_DIAG

    main, side = output_names(cfg.input, cfg.target)
    if cfg.src_only and cfg.output is not None:
        main = cfg.output
        side = main.with_suffix(".cl") if side is not None else None
    try:
        result = translate_source(text, cfg.target, kernel_file=side.name if side else None)
    except AccError as e:
        _emit(e.diagnostics, name, stderr)
        return EXIT_DIAG
    _emit(result.warnings, name, stderr)

    main.write_text(result.source)
    if side is not None:
        side.write_text(result.kernel_source)
    if cfg.keep_ir:
        main.with_name(cfg.input.stem + ".accir.xml").write_text(serialize_ir(result.ir))
    rep: TranslationReport = report(result)
    if cfg.verbose:
        stdout.write(rep.format())
    if cfg.report_figure is not None:
        from .plotting import plot_report

        plot_report(rep, cfg.report_figure)

    if cfg.src_only:
        return EXIT_OK
    try:
        artifact = invoke_system_compiler(cfg, main)
    except AccError as e:
        _emit(e.diagnostics, name, stderr)
        return EXIT_CC
    if cfg.verbose:
        print(f"artifact: {artifact}", file=stdout)
    return EXIT_OK


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
