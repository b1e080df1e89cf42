"""Command line front end.

Exit codes: 0 for success (a globally eulerian configuration, or a finished
computation), 2 for a mathematical obstruction, 1 for usage, input/output and
numerical failures.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field

from . import __version__
from .form_field import (
    BUILTINS,
    DimensionError,
    MaskSpec,
    VanishingForm,
    builtin,
    closing_multiplier,
    grid_csv,
    header_json,
    sample,
    wedge_residual,
)
from .expr import EvalError, ExprSyntaxError
from .graph_core import (
    EulerianCertificate,
    ExhaustionLimit,
    GraphicalConfiguration,
    SchemaError,
    parse_configuration,
    solve_global,
    to_dot,
    validate,
    verdict,
)
from .leaf_space import (
    DEFAULT_ANGLE,
    DEFAULT_RATIO,
    DEFAULT_TUBE,
    AmbiguityError,
    CoverageFailure,
    analyze,
    refinement_check,
    render_leaves_svg,
)
from .multiplier import BLEND, RESIDUAL_THRESHOLD, construct
from .surface_synth import EndpointError, render_svg, synthesize

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_OBSTRUCTION = 2


class UsageError(Exception):
    pass


def dumps(doc) -> str:
    """Canonical JSON: sorted keys, two-space indent, trailing newline."""
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _sha256(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


@dataclass
class RunManifest:
    command: str
    flags: dict
    inputs: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    version: str = __version__

    def to_dict(self) -> dict:
        return {"command": self.command, "flags": self.flags, "inputs": self.inputs,
                "outputs": sorted(self.outputs), "version": self.version}


class _Writer:
    """Writes text files and records them in a manifest."""

    def __init__(self, manifest: RunManifest, base: str | None = None):
        self.manifest = manifest
        self.base = base

    def write(self, path: str, text: str):
        full = os.path.join(self.base, path) if self.base else path
        parent = os.path.dirname(full)
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(full, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        self.manifest.outputs.append(path)


def _form_hash(form) -> str:
    return hashlib.sha256(header_json(form).encode()).hexdigest()


def _flags(args) -> dict:
    skip = {"func", "handler"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _load_config(path: str) -> GraphicalConfiguration:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}") from None
    config = parse_configuration(doc)
    problems = validate(config)
    if problems:
        raise UsageError(f"{path}: invalid configuration: " + "; ".join(problems))
    return config


# ---------------------------------------------------------------------------
# form flags


def _floats(text: str, name: str, sizes) -> tuple:
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"{name}: expected comma separated numbers, got {text!r}") from None
    if len(vals) not in sizes:
        raise UsageError(f"{name}: expected {' or '.join(map(str, sizes))} numbers, got {len(vals)}")
    return vals


def _ints(text: str, name: str, sizes) -> tuple:
    vals = _floats(text, name, sizes)
    if any(v != int(v) or v < 3 for v in vals):
        raise UsageError(f"{name}: node counts must be integers >= 3")
    return tuple(int(v) for v in vals)


def add_form_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("one-form")
    g.add_argument("--builtin", choices=sorted(BUILTINS), help="use a built-in form")
    g.add_argument("--gx", help="dx component expression")
    g.add_argument("--gy", help="dy component expression")
    g.add_argument("--gz", help="dz component expression (3D forms)")
    g.add_argument("--box", help='bounds "x0,x1,y0,y1[,z0,z1]" (default: unit cube [-1,1])')
    g.add_argument("--n", help='node counts "nx,ny[,nz]" (default 65 per axis, or the built-in grid)')
    g.add_argument("--slit", action="append", default=[], metavar="X0,Y0,X1,Y1",
                   help="remove nodes within half a step of a segment (repeatable)")
    g.add_argument("--hole", action="append", default=[], metavar="CX,CY,R",
                   help="remove a disc, or a tube along z in 3D (repeatable)")


def form_from_args(args):
    slits = tuple(_floats(s, "--slit", (4,)) for s in args.slit)
    holes = tuple(_floats(s, "--hole", (3,)) for s in args.hole)
    if args.builtin:
        if args.gx or args.gy or args.gz or args.box:
            raise UsageError("--builtin cannot be combined with --gx/--gy/--gz/--box")
        b = builtin(args.builtin)
        counts = _ints(args.n, "--n", (len(b.counts),)) if args.n else b.counts
        mask = MaskSpec(b.mask.slits + slits, b.mask.discs + holes)
        return sample(b.exprs, b.box, counts, mask)
    if args.gx is None or args.gy is None:
        raise UsageError("give --builtin or at least --gx and --gy")
    exprs = [args.gx, args.gy] + ([args.gz] if args.gz is not None else [])
    dim = len(exprs)
    box = _floats(args.box, "--box", (2 * dim,)) if args.box else (-1.0, 1.0) * dim
    counts = _ints(args.n, "--n", (dim,)) if args.n else (65,) * dim
    return sample(exprs, box, counts, MaskSpec(slits, holes))


# ---------------------------------------------------------------------------
# commands


def _result_doc(config, result) -> dict:
    doc = result.to_dict()
    doc["verdict"] = verdict(config, result)
    return doc


def cmd_check(args) -> int:
    manifest = RunManifest("check", _flags(args), {args.config: _sha256(args.config)}
                           if os.path.exists(args.config) else {})
    config = _load_config(args.config)
    result = solve_global(config)
    doc = _result_doc(config, result)
    out = _Writer(manifest)
    print(doc["verdict"])
    if not isinstance(result, EulerianCertificate):
        print(f"obstruction: {result.kind}")
    if args.certificate:
        out.write(args.certificate, dumps(doc))
    else:
        sys.stdout.write(dumps(doc))
    if args.dot:
        out.write(args.dot, to_dot(config, result))
    if args.manifest:
        out.write(args.manifest, dumps(manifest.to_dict()))
    return EXIT_OK if isinstance(result, EulerianCertificate) else EXIT_OBSTRUCTION


def cmd_synthesize(args) -> int:
    manifest = RunManifest("synthesize", _flags(args), {args.config: _sha256(args.config)}
                           if os.path.exists(args.config) else {})
    config = _load_config(args.config)
    result = solve_global(config)
    if isinstance(result, EulerianCertificate):
        orientation = result.orientation
    else:
        orientation = {e.id: tuple(e.ends) for e in config.edges}
    try:
        complex_ = synthesize(config, orientation)
    except EndpointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OBSTRUCTION
    out = _Writer(manifest)
    out.write(args.out, complex_.to_json())
    if args.svg:
        out.write(args.svg, render_svg(complex_))
    flips = sum(1 for i in complex_.identifications if i.flip)
    print(f"strips: {len(complex_.strips)}, identifications: {len(complex_.identifications)}, "
          f"flipped: {flips}")
    if args.manifest:
        out.write(args.manifest, dumps(manifest.to_dict()))
    return EXIT_OK


def cmd_analyze(args) -> int:
    form = form_from_args(args)
    if form.dim != 2:
        raise UsageError("analyze needs a planar form (no --gz)")
    manifest = RunManifest("analyze", _flags(args), {"form": _form_hash(form)})
    out = _Writer(manifest, args.out)
    options = dict(spacing=args.spacing * form.h if args.spacing else None, tube=args.tube,
                   angle=args.angle, ratio=args.ratio, fastpath=not args.no_fastpath)
    graph = analyze(form, **options)
    config = graph.configuration
    doc = config.to_dict()
    out.write("config.json", dumps(doc))
    out.write("charts.json", dumps(graph.charts_json()))
    out.write("leaves.svg", render_leaves_svg(graph))
    result = solve_global(config)
    out.write("result.json", dumps(_result_doc(config, result)))
    label = verdict(config, result)
    route = f"fast path ({graph.fastpath})" if graph.fastpath else "traced"
    print(f"leaf space: {len(config.vertices)} vertices, {len(config.edges)} edges, {route}")
    for w in graph.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if args.refine:
        stable, _ = refinement_check(graph, **options)
        if not stable:
            print("warning: configuration changes when the grid step is halved (unstable)",
                  file=sys.stderr)
        else:
            print("refinement: stable")
    print(label)
    code = EXIT_OK
    if isinstance(result, EulerianCertificate):
        mult = construct(graph, result, args.beta, args.threshold)
        out.write("f.csv", grid_csv(form, mult.f))
        out.write("lambda.csv", grid_csv(form, mult.lam))
        out.write("report.json", dumps(mult.report))
        rep = mult.report
        print(f"multiplier: min|grad f| = {rep['min_abs_grad_f']:.3e}, "
              f"min|lambda| = {rep['min_abs_lambda']:.3e}, "
              f"max residual = {rep['max_rel_residual']:.3e}, "
              f"{'passed' if rep['passed'] else 'FAILED'}")
        if not rep["passed"]:
            w = rep["worst_node"]
            print(f"error: verification failed ({w['reason']}) at node {w['index']}", file=sys.stderr)
            code = EXIT_FAILURE
    else:
        print(f"obstruction: {result.kind}")
        code = EXIT_OBSTRUCTION
    out.write("manifest.json", dumps(manifest.to_dict()))
    return code


def cmd_wedge(args) -> int:
    form = form_from_args(args)
    res = wedge_residual(form)
    print(f"max |w ^ dw| = {res.max_abs:.6e} on {form.counts} nodes")
    return EXIT_OK


def cmd_close(args) -> int:
    form = form_from_args(args)
    pin = _ints(args.pin, "--pin", (form.dim,)) if args.pin else None
    res = closing_multiplier(form, pin=pin, threshold=args.threshold)
    state = "feasible" if res.feasible else "infeasible"
    print(f"closing multiplier: {state}, relative residual = {res.residual:.6e}")
    if res.lam is not None and args.out:
        manifest = RunManifest("forms close", _flags(args), {"form": _form_hash(form)})
        _Writer(manifest).write(args.out, grid_csv(form, res.lam))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="foliagraph",
                                description="Euler multipliers for codimension-one foliations.")
    p.add_argument("--version", action="version", version=f"foliagraph {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="decide whether a configuration is globally eulerian")
    c.add_argument("config", help="configuration JSON file")
    c.add_argument("--certificate", help="write the certificate or obstruction JSON here")
    c.add_argument("--dot", help="write a DOT drawing of the macrograph here")
    c.add_argument("--manifest", help="write a run manifest JSON here")
    c.set_defaults(handler=cmd_check)

    s = sub.add_parser("synthesize", help="glue a strip complex realizing a configuration")
    s.add_argument("config", help="configuration JSON file")
    s.add_argument("--out", default="complex.json", help="strip complex JSON (default complex.json)")
    s.add_argument("--svg", help="write an SVG drawing of the strips here")
    s.add_argument("--manifest", help="write a run manifest JSON here")
    s.set_defaults(handler=cmd_synthesize)

    a = sub.add_parser("analyze", help="leaf space, verdict and multiplier of a planar form")
    add_form_flags(a)
    a.add_argument("--out", default="out", help="output directory (default out)")
    a.add_argument("--spacing", type=float, help="transversal seed spacing in grid steps (default 8)")
    a.add_argument("--tube", type=float, default=DEFAULT_TUBE,
                   help=f"merge tube radius in grid steps (default {DEFAULT_TUBE})")
    a.add_argument("--angle", type=float, default=DEFAULT_ANGLE,
                   help=f"merge angle tolerance in degrees (default {DEFAULT_ANGLE})")
    a.add_argument("--ratio", type=float, default=DEFAULT_RATIO,
                   help=f"required decrease ratio of normal-path integrals (default {DEFAULT_RATIO})")
    a.add_argument("--beta", type=float, default=BLEND,
                   help=f"chart fraction used by the vertex blend (default {BLEND})")
    a.add_argument("--threshold", type=float, default=RESIDUAL_THRESHOLD,
                   help=f"verification residual threshold (default {RESIDUAL_THRESHOLD})")
    a.add_argument("--no-fastpath", action="store_true", help="always trace leaves")
    a.add_argument("--refine", action="store_true",
                   help="re-analyze with half the grid step and warn if the configuration changes")
    a.set_defaults(handler=cmd_analyze)

    f = sub.add_parser("forms", help="numerical checks on sampled forms")
    fsub = f.add_subparsers(dest="forms_command", required=True)
    w = fsub.add_parser("wedge", help="Frobenius residual max |w ^ dw| of a 3D form")
    add_form_flags(w)
    w.set_defaults(handler=cmd_wedge)
    cl = fsub.add_parser("close", help="solve w ^ d(lambda) = dw by least squares")
    add_form_flags(cl)
    cl.add_argument("--out", default="lambda.csv", help="lambda grid CSV (default lambda.csv)")
    cl.add_argument("--pin", help="node index where lambda is pinned to 0 (default: first node)")
    cl.add_argument("--threshold", type=float, default=1e-3,
                    help="relative residual above which the equation is infeasible (default 1e-3)")
    cl.set_defaults(handler=cmd_close)
    return p


_LIST_FLAGS = ("--box", "--slit", "--hole", "--n", "--pin")
_EXPR_FLAGS = ("--gx", "--gy", "--gz")


def _attach_values(argv):
    """Join ``--box -1,1,...`` into ``--box=-1,1,...`` so argparse keeps negative values.

    Number lists are joined when they start with ``-`` and a digit or dot;
    expressions are joined unless the next token is another long flag.
    """
    out = []
    it = iter(argv)
    for tok in it:
        if tok not in _LIST_FLAGS + _EXPR_FLAGS:
            out.append(tok)
            continue
        nxt = next(it, None)
        if nxt is None:
            out.append(tok)
        elif not nxt.startswith("-"):
            out.extend([tok, nxt])
        elif tok in _EXPR_FLAGS and not nxt.startswith("--"):
            out.append(f"{tok}={nxt}")
        elif tok in _LIST_FLAGS and (nxt[1:2].isdigit() or nxt[1:2] == "."):
            out.append(f"{tok}={nxt}")
        else:
            out.extend([tok, nxt])
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = _attach_values(sys.argv[1:] if argv is None else list(argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; 2 is reserved for obstructions
        return EXIT_OK if exc.code in (0, None) else EXIT_FAILURE
    handler = args.handler
    try:
        return handler(args)
    except SchemaError as exc:
        print(f"schema error at {exc.path}: {exc.message}", file=sys.stderr)
    except (UsageError, OSError, ExprSyntaxError, EvalError, VanishingForm, DimensionError,
            KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    except (AmbiguityError, CoverageFailure, ExhaustionLimit, RuntimeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
    return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
