"""Command-line entry point.

Subcommands map onto the library: ``check`` (full N-1 verdict),
``enumerate`` (k-switchover trees), ``loadflow`` (single configuration
check), ``qubo`` (export the combined formulation), ``anneal`` (sample it)
and ``grover`` (amplified search for one failing edge).

Exit codes: 0 success / secure, 2 insecure network (``check`` only),
1 bad input or usage.  Stochastic commands require a seed, either via
``--seed`` or the ``GRIDSEC_SEED`` environment variable, and echo it in
the output so every run can be reproduced.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

from . import anneal, classical, grover, loadflow, n1qubo, network as net

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INSECURE = 2


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_ERROR


def _load(path: str) -> net.Network:
    with open(path, "r", encoding="utf-8") as handle:
        return net.parse_network(handle.read())


def _seed_from(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("GRIDSEC_SEED")
    if env is not None:
        return int(env)
    raise ValueError("stochastic command needs --seed or GRIDSEC_SEED")


def _weights_from(args) -> n1qubo.PenaltyWeights:
    if not getattr(args, "weights", None):
        return n1qubo.PenaltyWeights()
    raw = json.loads(args.weights)
    allowed = {"dw", "root", "con", "ind", "u_real", "u_imag", "current", "aux"}
    unknown = set(raw) - allowed
    if unknown:
        raise ValueError(f"unknown weight keys {sorted(unknown)}; allowed: {sorted(allowed)}")
    return n1qubo.PenaltyWeights(**raw)


def _write(path: str | None, content: str, label: str) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(content)
        print(f"{label} written to {path}")
    else:
        sys.stdout.write(content)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_check(args) -> int:
    grid = _load(args.network)
    report = classical.check_n1(grid, args.k_max)
    if args.format == "json":
        print(report.to_json())
    else:
        print(f"{'edge':>6}  {'status':<10} {'k':>3}  witness")
        for eid, verdict in sorted(report.per_edge.items()):
            witness = ""
            if verdict.witness is not None:
                on = ",".join(map(str, sorted(verdict.witness.activate)))
                off = ",".join(map(str, sorted(verdict.witness.deactivate)))
                witness = f"on[{on}] off[{off}]"
            print(f"{eid:>6}  {verdict.status:<10} {verdict.k or '-':>3}  {witness}")
        single = sum(1 for v in report.per_edge.values() if v.k == 1)
        print(f"single-switchover coverage: {single}/{len(report.per_edge)} active edges")
        print(f"overall: {'SECURE' if report.overall else 'INSECURE'} "
              f"({report.loadflow_calls} load-flow calls)")
    return EXIT_OK if report.overall else EXIT_INSECURE


def cmd_enumerate(args) -> int:
    grid = _load(args.network)
    restrict = frozenset({args.failing_edge}) if args.failing_edge is not None else None
    listing = classical.enumerate_reconfigurations(
        grid, grid.initial_configuration(), args.k, restrict_to=restrict
    )
    if args.format == "json":
        print(json.dumps([switch.as_dict() for switch, _ in listing], indent=2))
    else:
        for idx, (switch, _) in enumerate(listing):
            on = ",".join(map(str, sorted(switch.activate)))
            off = ",".join(map(str, sorted(switch.deactivate)))
            print(f"{idx:>4}: on[{on}] off[{off}]")
        print(f"{len(listing)} reconfigurations (k={args.k})")
    return EXIT_OK


def cmd_loadflow(args) -> int:
    grid = _load(args.network)
    cfg = grid.initial_configuration()
    if args.activate or args.deactivate:
        unknown = (set(args.activate) | set(args.deactivate)) - set(grid.edge_by_id)
        if unknown:
            return _fail(f"unknown edge ids {sorted(unknown)}")
        cfg = net.Configuration(cfg.edges - set(args.deactivate) | set(args.activate))
    if not net.is_spanning_tree(grid, cfg):
        return _fail("configuration is not a spanning tree")
    report = loadflow.evaluate_configuration(grid, cfg, args.tol)
    if args.format == "json":
        print(json.dumps(report.as_dict(), indent=2))
    else:
        solution = loadflow.solve_loadflow(loadflow.assemble_system(grid, cfg))
        for nid in sorted(solution.u):
            u = solution.u[nid]
            print(f"node {nid:>4}: |U| = {abs(u):12.3f} V  ({u.real:.3f} {u.imag:+.3f}j)")
        for eid in sorted(report.currents):
            i = report.currents[eid]
            print(f"edge {eid:>4}: |I| = {abs(i):12.3f} A")
        print("compliant" if report.compliant else f"violations: "
              f"{len(report.voltage_violations)} voltage, {len(report.current_violations)} current")
    return EXIT_OK


def cmd_qubo(args) -> int:
    grid = _load(args.network)
    weights = _weights_from(args)
    if args.tree_only:
        levels = args.height or n1qubo.default_levels(grid, args.failing_edge)
        qubo, layout = n1qubo.build_tree_qubo(
            grid, levels, weights=weights, failing_edge=args.failing_edge
        )
        labels = layout.labels
        layout_doc = {
            "kind": "tree",
            "levels": layout.levels,
            "failing_edge": layout.failing_edge,
            "variables": {str(i): label for i, label in enumerate(labels)},
        }
    else:
        qubo, layout = n1qubo.build_n1_qubo(
            grid,
            failing_edge=args.failing_edge,
            levels=args.height,
            bits_real=args.bits_u,
            bits_imag=args.bits_ui,
            bits_current=args.bits_i,
            weights=weights,
        )
        labels = layout.labels
        layout_doc = {
            "kind": "n1",
            "levels": layout.tree.levels,
            "failing_edge": layout.tree.failing_edge,
            "bits": {"u_real": args.bits_u, "u_imag": args.bits_ui, "current": args.bits_i},
            "group_weights": layout.weights,
            "variables": {str(i): label for i, label in enumerate(labels)},
        }
    _write(args.out, qubo.dumps(labels=labels), "QUBO")
    if args.layout_out:
        _write(args.layout_out, json.dumps(layout_doc, indent=2) + "\n", "layout")
    print(f"variables: {qubo.n}", file=sys.stderr)
    return EXIT_OK


def cmd_anneal(args) -> int:
    grid = _load(args.network)
    seed = _seed_from(args)
    weights = _weights_from(args)
    if args.tree_only:
        levels = args.height or n1qubo.default_levels(grid, args.failing_edge)
        qubo, layout = n1qubo.build_tree_qubo(
            grid, levels, weights=weights, failing_edge=args.failing_edge
        )
    else:
        qubo, layout = n1qubo.build_n1_qubo(
            grid,
            failing_edge=args.failing_edge,
            levels=args.height,
            bits_real=args.bits_u,
            bits_imag=args.bits_ui,
            bits_current=args.bits_i,
            weights=weights,
        )
    beta_range = None
    if (args.beta_min is None) != (args.beta_max is None):
        return _fail("--beta-min and --beta-max must be given together")
    if args.beta_min is not None:
        beta_range = (args.beta_min, args.beta_max)
    schedule = anneal.AnnealSchedule(
        seed=seed,
        reads=args.reads,
        sweeps=args.sweeps,
        sweeps_per_beta=args.sweeps_per_beta,
        beta_range=beta_range,
    )
    samples = anneal.simulated_annealing(qubo, schedule)
    if args.post_process:
        samples = anneal.post_process(qubo, samples)
    histogram = anneal.energy_histogram(qubo, samples, layout)
    if args.histogram_out:
        _write(args.histogram_out, histogram.to_csv(), "histogram")
    if args.samples_out:
        lines = ["energy,multiplicity,feasible,configuration"]
        for bits, energy, mult in samples:
            decoded = n1qubo.decode_solution(bits, layout)
            cfg = "-"
            if decoded.configuration is not None:
                cfg = " ".join(map(str, decoded.configuration.sorted()))
            lines.append(f"{energy!r},{mult},{int(decoded.feasible)},{cfg}")
        _write(args.samples_out, "\n".join(lines) + "\n", "samples")
    best_bits, best_energy = samples.first
    decoded = n1qubo.decode_solution(best_bits, layout)
    if args.format == "json":
        print(json.dumps({
            "seed": seed,
            "reads": samples.total_reads,
            "best_energy": best_energy,
            "best_feasible": decoded.feasible,
            "best_configuration": (
                sorted(decoded.configuration.edges) if decoded.configuration else None
            ),
            "histogram": histogram.as_dict(),
        }, indent=2))
        return EXIT_OK
    print(f"seed: {seed}")
    print(f"reads: {samples.total_reads}, distinct states: {len(samples)}")
    print(f"best energy: {best_energy!r} ({'feasible' if decoded.feasible else 'infeasible'})")
    if decoded.configuration is not None:
        print(f"best configuration: {sorted(decoded.configuration.edges)}")
    return EXIT_OK


def cmd_grover(args) -> int:
    grid = _load(args.network)
    seed = _seed_from(args)
    space = grover.index_reconfigurations(grid, args.failing_edge, args.k)
    oracle = grover.make_oracle(grid, space)
    result = grover.grover_search(space, oracle, iterations=args.iterations, seed=seed)
    if args.distribution_out:
        buffer = io.StringIO()
        writer = csv.writer(buffer)
        writer.writerow(["id", "probability", "switchover_json"])
        for candidate_id, probability in enumerate(result.distribution):
            payload = json.dumps(space.switchover(candidate_id).as_dict())
            writer.writerow([candidate_id, repr(float(probability)), payload])
        _write(args.distribution_out, buffer.getvalue(), "distribution")
    marked = oracle.marked_ids()
    print(f"seed: {seed}")
    print(f"candidates: {space.size}, marked: {len(marked)}")
    print(f"iterations: {result.iterations}, oracle queries: {result.queries}")
    switch = result.switchover
    on = ",".join(map(str, sorted(switch.activate)))
    off = ",".join(map(str, sorted(switch.deactivate)))
    print(f"sampled id {result.sampled_id}: on[{on}] off[{off}]")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridsec",
        description="N-1 security toolkit for medium-voltage grid graphs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=False):
        p.add_argument("--network", required=True, help="network JSON file")
        p.add_argument("--format", choices=("text", "json"), default="text")
        if seed:
            p.add_argument("--seed", type=int, default=None,
                           help="RNG seed (falls back to GRIDSEC_SEED)")

    def qubo_params(p):
        p.add_argument("--failing-edge", type=int, default=None)
        p.add_argument("--height", type=int, default=None,
                       help="depth levels of the rooted-tree encoding")
        p.add_argument("--bits-u", type=int, default=4, help="bits per real voltage")
        p.add_argument("--bits-ui", type=int, default=4, help="bits per imaginary voltage")
        p.add_argument("--bits-i", type=int, default=4, help="bits per branch current")
        p.add_argument("--weights", default=None,
                       help='JSON object of penalty weights, e.g. {"dw": 20}')
        p.add_argument("--tree-only", action="store_true",
                       help="omit the load-flow penalty groups")

    p = sub.add_parser("check", help="full N-1 verdict")
    common(p)
    p.add_argument("--k-max", type=int, default=1)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("enumerate", help="list k-switchover reconfigurations")
    common(p)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--failing-edge", type=int, default=None,
                   help="restrict to trees deactivating this edge")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("loadflow", help="solve and check one configuration")
    common(p)
    p.add_argument("--activate", type=int, nargs="*", default=[])
    p.add_argument("--deactivate", type=int, nargs="*", default=[])
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_loadflow)

    p = sub.add_parser("qubo", help="export the QUBO and its variable layout")
    common(p)
    qubo_params(p)
    p.add_argument("--out", default=None, help="QUBO text file (default stdout)")
    p.add_argument("--layout-out", default=None, help="layout sidecar JSON")
    p.set_defaults(func=cmd_qubo)

    p = sub.add_parser("anneal", help="sample the QUBO with simulated annealing")
    common(p, seed=True)
    qubo_params(p)
    p.add_argument("--reads", type=int, default=100)
    p.add_argument("--sweeps", type=int, default=10_000)
    p.add_argument("--sweeps-per-beta", type=int, default=20)
    p.add_argument("--beta-min", type=float, default=None,
                   help="cooling window start (default: automatic range)")
    p.add_argument("--beta-max", type=float, default=None,
                   help="cooling window end")
    p.add_argument("--post-process", action="store_true",
                   help="steepest descent on every read")
    p.add_argument("--samples-out", default=None)
    p.add_argument("--histogram-out", default=None)
    p.set_defaults(func=cmd_anneal)

    p = sub.add_parser("grover", help="amplitude-amplification search")
    common(p, seed=True)
    p.add_argument("--failing-edge", type=int, required=True)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--iterations", type=int, default=None,
                   help="fixed iteration count (default: unknown-count schedule)")
    p.add_argument("--distribution-out", default=None)
    p.set_defaults(func=cmd_grover)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        return _fail(f"cannot read {exc.filename}")
    except (net.NetworkError, grover.SearchSpaceError, ValueError, json.JSONDecodeError) as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
