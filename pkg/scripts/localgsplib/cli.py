import argparse
import io
import json
import logging
import sys
from dataclasses import asdict
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from . import __version__
from .config import configure_logging, get_default_seed, get_workers
from .distribution import BallDistribution, pushforward
from .errors import EXIT_INTERNAL, EXIT_OK, LocalGspError, UsageError
from .filters import Filter, FilterError, apply_filter, mse_summary_global, mse_summary_local
from .graph import (
    Graph,
    build_gso,
    complete_graph,
    cycle_graph,
    extract_rooted_ball,
    path_graph,
    random_bounded_degree_graph,
    sine_signal,
    star_graph,
)
from .graphing import convergence_experiment, graphing_distribution, graphing_moment, load_graphing
from .graphio import graph_to_dict, load_graph
from .report import build_metadata, emit_histogram, histogram_frame, save_json, write_csv
from .spectral import moment_local, moment_via_distribution, psd
from .transport import tighter_bound, transfer_bound, wasserstein1

logger = logging.getLogger("localgsp")

INTERNAL_ARGS = ("func", "verbose", "workers")


def _metadata(args: argparse.Namespace, seed: Optional[int] = None) -> Dict[str, Any]:
    inputs = {key: value for key, value in vars(args).items() if key not in INTERNAL_ARGS}
    return build_metadata(args.command, inputs, seed)


def _print_value(value: float):
    print(repr(float(value)))


def _emit_json(payload: Dict[str, Any], out: Optional[str]):
    if out:
        save_json(out, payload)
    else:
        print(json.dumps(payload, indent=2))


def _emit_frame(frame: pd.DataFrame, out: Optional[str], metadata: Dict[str, Any]):
    if out:
        write_csv(frame, out, metadata)
    else:
        buffer = io.StringIO()
        buffer.write("# " + json.dumps(metadata, sort_keys=True) + "\n")
        frame.to_csv(buffer, index=False, lineterminator="\n")
        sys.stdout.write(buffer.getvalue())


def _load_signal_graph(args: argparse.Namespace) -> Graph:
    return load_graph(args.graph, getattr(args, "signal", None))


def command_generate(args: argparse.Namespace):
    if args.kind == "random":
        if args.degree is None:
            raise UsageError("--kind random needs --degree")
        G = random_bounded_degree_graph(args.n, args.degree, args.seed, signal_bound=None)
    else:
        builders: Dict[str, Callable[[int], Graph]] = {
            "cycle": cycle_graph,
            "path": path_graph,
            "star": star_graph,
            "complete": complete_graph,
        }
        G = builders[args.kind](args.n)
    if args.signal == "zero":
        signal = np.zeros(G.n)
    elif args.signal == "sin":
        signal = sine_signal(G.n)
    else:
        signal = np.random.default_rng(args.seed).uniform(-1.0, 1.0, G.n)
    G = G.with_signal(signal)
    _emit_json(dict(graph_to_dict(G), metadata=_metadata(args, args.seed)), args.out)


def command_dist(args: argparse.Namespace):
    _check_order(args.K)
    G = _load_signal_graph(args)
    dist = pushforward(G, args.K, glue_zero_weights=args.glue_zero_weights, workers=args.workers)
    metadata = _metadata(args)
    if args.histogram:
        emit_histogram(dist, args.histogram, metadata)
    payload = dist.to_dict()
    payload["metadata"] = metadata
    _emit_json(payload, args.out)


def command_filter(args: argparse.Namespace):
    G = _load_signal_graph(args)
    f = Filter.load(args.filter)
    y = apply_filter(f, build_gso(G, f.gso_kind), G.signal_or_zero())
    _emit_json({"signal": y.tolist(), "metadata": _metadata(args)}, args.out)


def _check_order(K: int):
    if K < 0:
        raise UsageError(f"--K must be nonnegative, got {K}")


def command_mse(args: argparse.Namespace):
    G = _load_signal_graph(args)
    f = Filter.load(args.filter)
    if args.method == "global":
        _print_value(mse_summary_global(f, args.sigma2, G))
    else:
        if G.signal is None:
            raise FilterError("The MSE summary needs a signal")
        dist = pushforward(G, 2 * f.order, workers=args.workers)
        _print_value(dist.expectation(lambda ball: mse_summary_local(f, args.sigma2, ball)))


def command_psd(args: argparse.Namespace):
    G = _load_signal_graph(args)
    _emit_frame(psd(G).to_frame(), args.out, _metadata(args))


def command_moments(args: argparse.Namespace):
    _check_order(args.K)
    G = _load_signal_graph(args)
    if args.method == "spectral":
        value = psd(G).moment(args.K)
    elif args.method == "local":
        if G.signal is None:
            logger.warning("Graph %s has no signal, using the zero signal", G.name)
        value = float(np.mean([moment_local(extract_rooted_ball(G, v, args.K)) for v in range(G.n)]))
    else:
        value = moment_via_distribution(pushforward(G, args.K, workers=args.workers))
    _print_value(value)


def _load_pair(args: argparse.Namespace):
    return BallDistribution.load(args.a), BallDistribution.load(args.b)


def command_wasserstein(args: argparse.Namespace):
    mu, nu = _load_pair(args)
    distance, plan = wasserstein1(mu, nu, args.C, args.workers)
    if args.plan:
        write_csv(plan.to_frame(), args.plan, _metadata(args))
    _print_value(distance)


def command_transfer_bound(args: argparse.Namespace):
    mu, nu = _load_pair(args)
    if args.tighter:
        _print_value(tighter_bound(mu, nu, args.L, args.A, args.grid, workers=args.workers))
    else:
        _print_value(transfer_bound(mu, nu, args.L, args.workers))


def command_graphing_sample(args: argparse.Namespace):
    _check_order(args.K)
    g = load_graphing(args.spec)
    dist = graphing_distribution(g, args.K, args.samples, args.seed, args.exhaustive, args.workers)
    metadata = _metadata(args, args.seed)
    if args.out:
        emit_histogram(dist, args.out, metadata)
    else:
        _emit_frame(histogram_frame(dist), None, metadata)


def command_graphing_moments(args: argparse.Namespace):
    _check_order(args.K)
    g = load_graphing(args.spec)
    estimates = [graphing_moment(g, k, args.samples, args.seed, args.workers) for k in range(args.K + 1)]
    columns = ["K", "value", "stderr", "samples", "seed"]
    frame = pd.DataFrame([asdict(estimate) for estimate in estimates], columns=columns)
    _emit_frame(frame, args.out, _metadata(args, args.seed))


def command_graphing_converge(args: argparse.Namespace):
    _check_order(args.K)
    if not args.graphs:
        raise UsageError("converge needs at least one graph in --graphs")
    g = load_graphing(args.spec)
    sequence = [load_graph(path) for path in args.graphs]
    report = convergence_experiment(
        sequence,
        g,
        args.K,
        args.C,
        args.samples,
        args.seed,
        exhaustive=args.exhaustive,
        workers=args.workers,
        progress=args.verbose,
    )
    _emit_frame(report.frame, args.out, _metadata(args, args.seed))


def _add_graph_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--graph", required=True, help="Graph file, JSON or a TSV edge list")
    parser.add_argument("--signal", help="Optional. Signal file with one value per line, for TSV graphs")


def _add_graphing_arguments(parser: argparse.ArgumentParser, converge: bool = False):
    parser.add_argument("--spec", required=True, help="Graphing spec JSON")
    parser.add_argument("--K", type=int, required=True, help="Ball depth")
    parser.add_argument("--samples", type=int, default=1000, help="Number of sampled balls")
    parser.add_argument("--seed", type=int, default=get_default_seed(), help="Random seed")
    parser.add_argument("--out", help="Optional. Output CSV, stdout when omitted")
    parser.add_argument(
        "--exhaustive", action="store_true", help="Take one ball per interval (finite-derived graphings only)"
    )
    if converge:
        parser.add_argument("--graphs", nargs="+", default=[], help="Graph sequence to compare with the graphing")
        parser.add_argument("--C", type=float, default=1.0, help="Ground metric parameter")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--verbose", "-v", action="store_true", help="Verbose output")
    common.add_argument("--workers", type=int, default=get_workers(), help="Worker threads for per-node maps")

    parser = argparse.ArgumentParser(
        prog="localgsp",
        description="Graph signal processing through distributions of rooted balls",
        epilog="Example: localgsp dist --graph data/fig1.json --K 1 --histogram fig1.csv",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    generate = commands.add_parser("generate", parents=[common], help="Generate a graph with a signal")
    generate.add_argument("--kind", required=True, choices=["cycle", "path", "star", "complete", "random"])
    generate.add_argument("--n", type=int, required=True, help="Node count (leaf count for stars)")
    generate.add_argument("--degree", type=int, help="Degree bound for random graphs")
    generate.add_argument("--signal", choices=["zero", "sin", "random"], default="zero")
    generate.add_argument("--seed", type=int, default=get_default_seed(), help="Random seed")
    generate.add_argument("--out", help="Optional. Output graph JSON, stdout when omitted")
    generate.set_defaults(func=command_generate)

    dist = commands.add_parser("dist", parents=[common], help="Rooted-ball distribution of a graph")
    _add_graph_arguments(dist)
    dist.add_argument("--K", type=int, required=True, help="Ball depth")
    dist.add_argument("--out", help="Optional. Output distribution JSON, stdout when omitted")
    dist.add_argument("--histogram", help="Optional. Histogram CSV, with a sidecar JSON of canonical codes")
    dist.add_argument("--glue-zero-weights", action="store_true", help="Treat zero-weight edges as absent")
    dist.set_defaults(func=command_dist)

    filt = commands.add_parser("filter", parents=[common], help="Apply a polynomial graph filter")
    _add_graph_arguments(filt)
    filt.add_argument("--filter", required=True, help="Filter JSON")
    filt.add_argument("--out", help="Optional. Output signal JSON, stdout when omitted")
    filt.set_defaults(func=command_filter)

    mse = commands.add_parser("mse", parents=[common], help="Mean squared error summary of a denoising filter")
    _add_graph_arguments(mse)
    mse.add_argument("--filter", required=True, help="Filter JSON")
    mse.add_argument("--sigma2", type=float, required=True, help="Noise variance")
    mse.add_argument("--method", choices=["global", "local"], default="global")
    mse.set_defaults(func=command_mse)

    spectrum = commands.add_parser("psd", parents=[common], help="Normalized power spectral distribution")
    _add_graph_arguments(spectrum)
    spectrum.add_argument("--out", help="Optional. Output CSV, stdout when omitted")
    spectrum.set_defaults(func=command_psd)

    moments = commands.add_parser("moments", parents=[common], help="Spectral moment of the graph signal")
    _add_graph_arguments(moments)
    moments.add_argument("--K", type=int, required=True, help="Moment order")
    moments.add_argument("--method", choices=["spectral", "local", "dist"], default="spectral")
    moments.set_defaults(func=command_moments)

    wasserstein = commands.add_parser("wasserstein", parents=[common], help="1-Wasserstein distance")
    wasserstein.add_argument("--a", required=True, help="First distribution JSON")
    wasserstein.add_argument("--b", required=True, help="Second distribution JSON")
    wasserstein.add_argument("--C", type=float, default=1.0, help="Ground metric parameter")
    wasserstein.add_argument("--plan", help="Optional. Write the optimal transport plan to this CSV")
    wasserstein.set_defaults(func=command_wasserstein)

    bound = commands.add_parser("transfer-bound", parents=[common], help="Transferability bound")
    bound.add_argument("--a", required=True, help="First distribution JSON")
    bound.add_argument("--b", required=True, help="Second distribution JSON")
    bound.add_argument("--L", type=float, required=True, help="Lipschitz constant of the summary")
    bound.add_argument("--tighter", action="store_true", help="Minimize over the ground metric scale")
    bound.add_argument("--A", type=float, default=1.0, help="Range width of the summary, with --tighter")
    bound.add_argument("--grid", type=int, default=64, help="Grid size, with --tighter")
    bound.set_defaults(func=command_transfer_bound)

    graphing = commands.add_parser("graphing", help="Graphing experiments")
    graphing_commands = graphing.add_subparsers(dest="graphing_command", required=True)
    sample = graphing_commands.add_parser("sample", parents=[common], help="Histogram of sampled balls")
    _add_graphing_arguments(sample)
    sample.set_defaults(func=command_graphing_sample)
    estimate = graphing_commands.add_parser("moments", parents=[common], help="Monte-Carlo spectral moments")
    _add_graphing_arguments(estimate)
    estimate.set_defaults(func=command_graphing_moments)
    converge = graphing_commands.add_parser("converge", parents=[common], help="Compare a graph sequence")
    _add_graphing_arguments(converge, converge=True)
    converge.set_defaults(func=command_graphing_converge)

    alias = commands.add_parser("converge", parents=[common], help="Same as graphing converge")
    _add_graphing_arguments(alias, converge=True)
    alias.set_defaults(func=command_graphing_converge)
    return parser


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as error:
        return int(error.code or EXIT_OK)
    configure_logging(args.verbose)
    try:
        args.func(args)
    except LocalGspError as error:
        print(f"{type(error).__name__}: {error.message}", file=sys.stderr)
        return error.exit_code
    except Exception:
        logger.exception("Internal error while running %s", args.command)
        return EXIT_INTERNAL
    return EXIT_OK


def main():
    sys.exit(run())
