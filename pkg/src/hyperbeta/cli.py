"""Command-line surface: sampling, fitting, inference, testing, studies.

Subcommands: ``sample``, ``fit``, ``ci``, ``test``, ``power``, ``qq``,
``coverage``, ``rate``, ``gamma-gap``.  Exit codes: 0 success, 2 argument
error, 3 numerical / non-convergence, 4 I/O.  Every error path prints a
single ``hyperbeta: <category>: <reason>`` line to stderr.

The default seed is the documented constant 1729; the environment
variable ``HYPERBETA_SEED`` overrides it, and ``--seed`` overrides both.
Identical invocations are byte-identical: the same seed always produces
the same CSV and JSON bytes.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .core import (
    ArgumentError,
    HyperbetaError,
    LayeredParams,
    NumericalError,
    derive_stream_seed,
)
from .estimator import FitConfig, FitResult, fit_all_layers, fit_layer
from .experiments import ExperimentSpec, render_figure, run_experiment
from .goftest import linf_test, lr_statistic, lr_test
from .inference import attach_stderr, confidence_set, intervals_to_csv
from .sampler import degrees_from_csv, degrees_to_csv, edges_to_csv, sample_layered

__all__ = ["main", "DEFAULT_SEED"]

DEFAULT_SEED = 1729


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so errors share one format."""

    def error(self, message):
        raise ArgumentError(message)


# ----------------------------------------------------------------------
# Structured text files: parameters and experiment specs
# ----------------------------------------------------------------------

def _strip(line: str) -> str:
    return line.split("#", 1)[0].strip()


def _parse_kv_lines(text: str):
    """Yield ('key', 'value') pairs and ('[layer', s) section markers."""
    for raw in text.splitlines():
        line = _strip(raw)
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            inner = line[1:-1].strip()
            parts = inner.split()
            if len(parts) != 2 or parts[0] != "layer":
                raise ArgumentError(f"malformed section header {line!r}")
            yield "[layer", int(parts[1])
        elif "=" in line:
            key, val = line.split("=", 1)
            yield key.strip().lower().replace("_", "-"), val.strip()
        else:
            raise ArgumentError(f"malformed line {line!r}")


def _floats(text: str) -> list[float]:
    return [float(tok) for tok in text.replace(",", " ").split()]


def parse_params_text(text: str) -> LayeredParams:
    """Parameter file: top-level ``n`` (and optional ``bound``), then one
    ``[layer s]`` block per layer holding ``beta`` or ``beta-const``."""
    n = None
    bound = None
    layer_specs: dict[int, tuple[str, str]] = {}
    current: int | None = None
    for key, val in _parse_kv_lines(text):
        if key == "[layer":
            current = int(val)
            if current in layer_specs:
                raise ArgumentError(f"duplicate layer block {current}")
            layer_specs[current] = ("beta-const", "0")
            continue
        if current is None:
            if key == "n":
                n = int(val)
            elif key == "bound":
                bound = float(val)
            else:
                raise ArgumentError(f"unknown top-level key {key!r}")
        else:
            if key not in ("beta", "beta-const"):
                raise ArgumentError(f"unknown layer key {key!r}")
            layer_specs[current] = (key, val)
    if n is None:
        raise ArgumentError("parameter file must set n")
    if not layer_specs:
        raise ArgumentError("parameter file has no layer blocks")
    layers = {}
    for s, (key, val) in layer_specs.items():
        if key == "beta-const":
            layers[s] = np.full(n, float(val))
        else:
            vec = np.array(_floats(val))
            if vec.shape != (n,):
                raise ArgumentError(f"layer {s} beta has {vec.size} entries, expected {n}")
            layers[s] = vec
    return LayeredParams(n=n, r=max(layers), layers=layers, bound=bound)


_SPEC_KEYS = {
    "kind": str, "n": int, "replicates": int, "seed": int, "alpha": float,
    "beta-const": float, "coordinate": int, "sigma-mode": str, "threads": int,
}


def parse_experiment_spec_text(text: str, kind: str | None = None) -> ExperimentSpec:
    """Experiment spec file: flat ``key = value`` lines (see README)."""
    fields: dict = {}
    for key, val in _parse_kv_lines(text):
        if key == "[layer":
            raise ArgumentError("experiment spec files take no layer blocks")
        if key == "s":
            toks = val.replace(",", " ").split()
            fields["s"] = tuple(int(t) for t in toks) if len(toks) > 1 else int(toks[0])
        elif key == "signal-grid":
            fields["signal_grid"] = tuple(_floats(val))
        elif key == "n-grid":
            fields["n_grid"] = tuple(int(t) for t in val.replace(",", " ").split())
        elif key == "fresh-direction":
            fields["fresh_direction"] = val.lower() in ("1", "true", "yes")
        elif key in _SPEC_KEYS:
            name = {"seed": "master_seed", "threads": "workers"}.get(
                key, key.replace("-", "_")
            )
            fields[name] = _SPEC_KEYS[key](val)
        else:
            raise ArgumentError(f"unknown experiment spec key {key!r}")
    if kind is not None:
        if "kind" in fields and fields["kind"] != kind:
            raise ArgumentError(
                f"spec file kind {fields['kind']!r} does not match subcommand {kind!r}"
            )
        fields["kind"] = kind
    return ExperimentSpec(**fields)


# ----------------------------------------------------------------------
# Shared helpers
# ----------------------------------------------------------------------

def _resolve_seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("HYPERBETA_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ArgumentError(f"HYPERBETA_SEED must be an integer, got {env!r}") from None
    return DEFAULT_SEED


def _params_from_args(args) -> LayeredParams:
    if args.params is not None:
        with open(args.params) as fh:
            return parse_params_text(fh.read())
    if args.n is None or args.layers is None:
        raise ArgumentError("either --params or both --n and --layers are required")
    sizes = [int(t) for t in args.layers.split(",")]
    return LayeredParams.constant(args.n, sizes, value=args.beta_const)


def _fit_config_from_args(args) -> FitConfig:
    return FitConfig(
        tol_grad=args.tol_grad,
        max_iters=args.max_iters,
        damping=args.damping,
        newton_switch_iters=args.newton_switch,
        bound_M=args.bound_m,
    )


def _write_text(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _load_degrees(path: str):
    with open(path) as fh:
        return degrees_from_csv(fh.read())


def _add_fit_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tol-grad", type=float, default=1e-8,
                   help="gradient tolerance relative to n^(s-1)")
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--damping", type=float, default=1.0)
    p.add_argument("--newton-switch", type=int, default=200,
                   help="fixed-point iterations before the Newton fallback")
    p.add_argument("--bound-m", type=float, default=None,
                   help="declared sup-norm bound; estimates beyond it warn")


# ----------------------------------------------------------------------
# Subcommands
# ----------------------------------------------------------------------

def cmd_sample(args) -> int:
    params = _params_from_args(args)
    seed = derive_stream_seed(_resolve_seed(args), args.replicate)
    retain = args.edges_out is not None
    samples = sample_layered(params, seed, retain_edges=retain)
    _write_text(args.out, degrees_to_csv(samples))
    if retain:
        _write_text(args.edges_out, edges_to_csv(samples))
    return 0


def cmd_fit(args) -> int:
    samples = _load_degrees(args.degrees)
    config = _fit_config_from_args(args)
    results = fit_all_layers(samples, config)
    payload: dict[str, dict] = {}
    failed = False
    for s, res in sorted(results.items()):
        if isinstance(res, FitResult):
            if res.converged:
                attach_stderr(res)
            else:
                failed = True
            payload[str(s)] = res.to_dict()
        else:
            failed = True
            payload[str(s)] = {"error": str(res)}
    _write_text(args.out, json.dumps({"layers": payload}, indent=2) + "\n")
    return 3 if failed else 0


def _parse_queries(tokens: list[str]) -> dict[int, list[int]]:
    queries: dict[int, list[int]] = {}
    for tok in tokens:
        if ":" not in tok:
            raise ArgumentError(f"query {tok!r} is not of the form s:v1,v2,...")
        s_part, v_part = tok.split(":", 1)
        verts = [int(v) for v in v_part.split(",") if v]
        if not verts:
            raise ArgumentError(f"query {tok!r} lists no vertices")
        queries.setdefault(int(s_part), []).extend(verts)
    return queries


def cmd_ci(args) -> int:
    samples = _load_degrees(args.degrees)
    queries = _parse_queries(args.query)
    config = _fit_config_from_args(args)
    fits: dict[int, FitResult] = {}
    for s in queries:
        if s not in samples:
            raise ArgumentError(f"degrees file has no layer {s}")
        fits[s] = fit_layer(samples[s], config)
    truth = None
    if args.params is not None:
        with open(args.params) as fh:
            truth = parse_params_text(fh.read())
    report = confidence_set(fits, queries, alpha=args.alpha, true_params=truth)
    _write_text(args.out, report.to_json() + "\n")
    if args.intervals_csv is not None:
        _write_text(args.intervals_csv, intervals_to_csv(report))
    return 0


def cmd_test(args) -> int:
    samples = _load_degrees(args.degrees)
    if args.layer not in samples:
        raise ArgumentError(f"degrees file has no layer {args.layer}")
    sample = samples[args.layer]
    if args.gamma_file is not None:
        with open(args.gamma_file) as fh:
            gamma = np.array(_floats(fh.read()))
    else:
        gamma = np.full(sample.n, args.gamma_const)
    config = _fit_config_from_args(args)
    fit = fit_layer(sample, config)
    if args.method == "lr":
        report = lr_test(lr_statistic(sample, gamma, fit), args.alpha)
    else:
        report = linf_test(
            sample, gamma, fit, alpha=args.alpha,
            calibration=args.cutoff_constant if args.cutoff_constant is not None
            else "monte-carlo",
            calibration_replicates=args.calibration_replicates,
            seed=_resolve_seed(args),
            fit_config=config,
        )
    _write_text(args.out, report.to_json() + "\n")
    return 0


def _spec_from_args(args, kind: str) -> ExperimentSpec:
    if args.spec is not None:
        with open(args.spec) as fh:
            spec = parse_experiment_spec_text(fh.read(), kind=kind)
        if args.threads is not None:
            spec = ExperimentSpec(**{**spec.__dict__, "workers": args.threads})
        return spec
    fields: dict = {
        "kind": kind,
        "replicates": args.replicates,
        "master_seed": _resolve_seed(args),
        "alpha": args.alpha,
        "beta_const": args.beta_const,
        "workers": args.threads,
    }
    if kind in ("qq", "coverage", "power", "null_calibration"):
        if args.n is None:
            raise ArgumentError(f"{kind} requires --n")
        fields["n"] = args.n
    if kind in ("rate", "gamma_gap"):
        if args.n_grid is None:
            raise ArgumentError(f"{kind} requires --n-grid")
        fields["n_grid"] = tuple(int(t) for t in args.n_grid.split(","))
    if kind == "power":
        sizes = tuple(int(t) for t in args.s.split(","))
        fields["s"] = sizes if len(sizes) > 1 else sizes[0]
        if args.signal_grid is not None:
            fields["signal_grid"] = tuple(float(t) for t in args.signal_grid.split(","))
        else:
            fields["signal_grid"] = tuple(
                float(x) for x in np.linspace(0.0, 1.0, args.grid_points)
            )
        fields["fresh_direction"] = not args.fixed_direction
    else:
        fields["s"] = int(args.s)
    if kind == "qq":
        fields["sigma_mode"] = args.sigma_mode
    if kind in ("qq", "coverage"):
        fields["coordinate"] = args.coordinate
    return ExperimentSpec(**fields)


def _cmd_experiment(args, kind: str) -> int:
    spec = _spec_from_args(args, kind)
    result = run_experiment(spec)
    _write_text(args.out, result.to_csv())
    if args.plot:
        if args.out is None:
            raise ArgumentError("--plot requires --out to place the figure")
        fig_path = os.path.splitext(args.out)[0] + ".svg"
        render_figure(result, fig_path)
    if args.out is not None:
        for attr in ("ks_distance", "coverage", "size", "excluded"):
            if hasattr(result, attr):
                print(f"{attr}={getattr(result, attr)}")
    return 0


# ----------------------------------------------------------------------
# Parser assembly
# ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hyperbeta",
                     description="layered hypergraph beta-model toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw a hypergraph, write degree CSV")
    p.add_argument("--params", help="parameter file with layer blocks")
    p.add_argument("--n", type=int)
    p.add_argument("--layers", help="comma-separated layer sizes, e.g. 2,3")
    p.add_argument("--beta-const", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--replicate", type=int, default=0,
                   help="replicate index folded into the stream derivation")
    p.add_argument("--out", help="degree CSV path (default: stdout)")
    p.add_argument("--edges-out", help="also retain edges and write them here")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("fit", help="fit all layers in a degree CSV")
    p.add_argument("--degrees", required=True)
    p.add_argument("--out", help="JSON path (default: stdout)")
    _add_fit_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("ci", help="confidence set for queried coordinates")
    p.add_argument("--degrees", required=True)
    p.add_argument("--query", action="append", required=True,
                   metavar="S:V1,V2", help="layer and vertices; repeatable")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--params", help="true parameters (enables covered flag)")
    p.add_argument("--out", help="JSON path (default: stdout)")
    p.add_argument("--intervals-csv", help="also write the interval table")
    _add_fit_flags(p)
    p.set_defaults(func=cmd_ci)

    p = sub.add_parser("test", help="goodness-of-fit test for one layer")
    p.add_argument("--degrees", required=True)
    p.add_argument("--layer", type=int, required=True)
    p.add_argument("--gamma-const", type=float, default=0.0)
    p.add_argument("--gamma-file", help="whitespace-separated null vector")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--method", choices=("lr", "linf"), default="lr")
    p.add_argument("--cutoff-constant", type=float, default=None,
                   help="analytic sup-norm cutoff constant (default: calibrate)")
    p.add_argument("--calibration-replicates", type=int, default=200)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", help="JSON path (default: stdout)")
    _add_fit_flags(p)
    p.set_defaults(func=cmd_test)

    experiment_kinds = {
        "qq": "qq", "coverage": "coverage", "power": "power",
        "rate": "rate", "gamma-gap": "gamma_gap",
    }
    for name, kind in experiment_kinds.items():
        p = sub.add_parser(name, help=f"run the {name} study, write CSV")
        p.add_argument("--spec", help="experiment spec file (overrides flags)")
        p.add_argument("--n", type=int)
        p.add_argument("--s", default="3",
                       help="layer size; comma list allowed for power")
        p.add_argument("--replicates", type=int, default=200)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--alpha", type=float, default=0.05)
        p.add_argument("--beta-const", type=float, default=0.0)
        p.add_argument("--coordinate", type=int, default=0)
        p.add_argument("--sigma-mode", choices=("plugin", "oracle"), default="plugin")
        p.add_argument("--signal-grid", help="comma-separated signal magnitudes")
        p.add_argument("--grid-points", type=int, default=10,
                       help="uniform signal grid size on [0,1] when no explicit grid")
        p.add_argument("--fixed-direction", action="store_true",
                       help="draw one sphere direction per signal level instead "
                            "of per replicate")
        p.add_argument("--n-grid", help="comma-separated n values (rate, gamma-gap)")
        p.add_argument("--threads", type=int, default=None,
                       help="replicate parallelism cap (default: all cores)")
        p.add_argument("--out", help="CSV path (default: stdout)")
        p.add_argument("--plot", action="store_true",
                       help="render an SVG figure next to the CSV")
        p.set_defaults(func=lambda a, k=kind: _cmd_experiment(a, k))
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ArgumentError as exc:
        print(f"hyperbeta: argument: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"hyperbeta: numerical: {exc}", file=sys.stderr)
        return 3
    except HyperbetaError as exc:
        print(f"hyperbeta: error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"hyperbeta: io: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
