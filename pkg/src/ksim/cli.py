"""Command-line front end.

Subcommands: opt, demand, run, bench, verify, probe-demand.  A JSON config
file may supply any long-option value under its flag name (dashes or
underscores); explicit flags win.  Exit codes: 0 all good, 2 a verification
check failed, 1 usage or file errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from . import __version__
from .files import ParseError, load_configuration, load_hst, load_metric, load_requests
from .generators import parse_generator
from .harness import (default_initial, probe_demand_monotonicity, render_rational,
                      reports_to_csv, run_trials)
from .metric import build_uniform
from .offline import demand as demand_op, opt_cost
from .verify import checks_to_csv, run_ama_suite, run_contract_suite, run_lower_bound_suite

USAGE_ERROR = 1
CHECK_FAILURE = 2


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; this tool reserves 2 for check failures
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliError(message)


# options a command cannot run without; enforced after the config file is
# merged, so the config may supply them and explicit flags still win
_REQUIRED = {
    "opt": ("metric", "servers", "requests"),
    "demand": ("metric", "delta", "requests"),
    "run": ("hst", "k", "gen"),
    "bench": ("hst", "k", "trials", "out"),
    "verify": (),
    "probe-demand": ("delta",),
}


def _build_parser() -> _Parser:
    parser = _Parser(prog="ksim")
    parser.add_argument("--version", action="version", version=f"ksim {__version__}")
    parser.add_argument("--config", help="JSON file with default option values")
    sub = parser.add_subparsers(dest="command", required=True)

    p_opt = sub.add_parser("opt", help="offline optimum for a request file")
    p_opt.add_argument("--metric")
    p_opt.add_argument("--servers", type=int)
    p_opt.add_argument("--requests")
    p_opt.add_argument("--initial", help="file with the fixed starting configuration")

    p_dem = sub.add_parser("demand", help="block demand of a request file")
    p_dem.add_argument("--metric")
    p_dem.add_argument("--delta", help="separation cost, integer or p/q")
    p_dem.add_argument("--requests")

    p_run = sub.add_parser("run", help="one seeded online run")
    p_run.add_argument("--hst")
    p_run.add_argument("--k", type=int)
    p_run.add_argument("--algo", choices=["marking", "algox"], default="algox")
    p_run.add_argument("--gen", help="kind[:key=value,...]")
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--length", type=int, default=50)
    p_run.add_argument("--events", help="write the event log here (algox only)")

    p_bench = sub.add_parser("bench", help="seeded trial batch, CSV out")
    p_bench.add_argument("--hst")
    p_bench.add_argument("--k", type=int)
    p_bench.add_argument("--algo", choices=["marking", "algox"], default="algox")
    p_bench.add_argument("--gen", default="uniform_random")
    p_bench.add_argument("--trials", type=int)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--length", type=int, default=50)
    p_bench.add_argument("--out")

    p_ver = sub.add_parser("verify", help="run a verification suite")
    p_ver.add_argument("--suite", choices=["all", "ama", "lower", "contract"],
                       default="all")
    p_ver.add_argument("--runs", type=int, default=20,
                       help="runs per desk instance for the lower-bound suite")
    p_ver.add_argument("--seeds", type=int, default=2000,
                       help="seed count for the expectation suites")
    p_ver.add_argument("--seed", type=int, default=0)
    p_ver.add_argument("--out", help="write check reports as CSV here")

    p_probe = sub.add_parser("probe-demand", help="prefix-demand step behaviour")
    p_probe.add_argument("--points", type=int, default=3)
    p_probe.add_argument("--d", default="1", help="uniform block distance")
    p_probe.add_argument("--delta")
    p_probe.add_argument("--max-len", type=int, default=6)
    return parser


def _apply_config(parser: _Parser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not args.config:
        return args
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            defaults = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"config file: {exc}")
    if not isinstance(defaults, dict):
        raise CliError("config file must hold a JSON object")
    explicit = {a.lstrip("-").split("=")[0].replace("-", "_") for a in argv
                if a.startswith("--")}
    for key, value in defaults.items():
        attr = key.replace("-", "_")
        if hasattr(args, attr) and attr not in explicit:
            setattr(args, attr, value)
    return args


def _check_required(args) -> None:
    missing = [name for name in _REQUIRED[args.command]
               if getattr(args, name.replace("-", "_"), None) is None]
    if missing:
        raise CliError(f"{args.command}: missing required option(s): "
                       + ", ".join(f"--{m}" for m in missing))


def _cmd_opt(args) -> int:
    metric = load_metric(args.metric)
    rho = load_requests(args.requests, metric.n)
    initial = None
    if args.initial:
        initial = load_configuration(args.initial, metric.n)
    result = opt_cost(metric, args.servers, rho, initial=initial)
    print(f"cost {render_rational(result.cost)}")
    if result.config is not None:
        print("config " + " ".join(str(p) for p in sorted(result.config)))
    return 0


def _cmd_demand(args) -> int:
    metric = load_metric(args.metric)
    rho = load_requests(args.requests, metric.n)
    delta = Fraction(args.delta)
    print(f"demand {demand_op(metric, delta, rho)}")
    return 0


def _run_reports(args, trials: int):
    space = load_hst(args.hst)
    gen = parse_generator(args.gen, length=args.length, seed=args.seed ^ 0x5EED)
    return run_trials(space, args.k, args.algo, gen, trials, args.seed), space, gen


def _cmd_run(args) -> int:
    space = load_hst(args.hst)
    gen = parse_generator(args.gen, length=args.length, seed=args.seed ^ 0x5EED)
    events = None
    sink = None
    if args.events:
        if args.algo != "algox" or space.height < 2:
            print("events are only produced by shell (algox) runs", file=sys.stderr)
        else:
            events = open(args.events, "w", encoding="utf-8")
            sink = lambda line: events.write(line + "\n")
    try:
        if sink is not None:
            from .generators import generate
            from .harness import run_shell
            from .metric import decompose
            from .shell import make_node_handle, node_decompositions
            from .marking import Marking

            dec = decompose(space, 0)
            decs = node_decompositions(space)
            children = space.children[0]

            def factory(block, points, config, m, sub_seed):
                if space.is_leaf(children[block]):
                    sub = Marking(m, (), sub_seed, points=points)
                    sub.reset(config)
                    return sub
                handle = make_node_handle(space, children[block], sub_seed, decs)
                handle.reset(config)
                return handle

            seq = generate(gen, space)
            rec = run_shell(dec, args.k, default_initial(args.k), seq, args.seed,
                            sub_factory=factory, event_sink=sink)
            total = rec.total_inner + rec.total_jump
            print(f"total {render_rational(total)}")
            print(f"inner {render_rational(rec.total_inner)}")
            print(f"jump {render_rational(rec.total_jump)}")
            print(f"phases {len(rec.phase_logs)}")
            return 0
        reports = run_trials(space, args.k, args.algo, gen, 1, args.seed)
    finally:
        if events is not None:
            events.close()
    rep = reports[0]
    print(f"total {render_rational(rep.total)}")
    print(f"inner {render_rational(rep.inner)}")
    print(f"jump {render_rational(rep.jump)}")
    print(f"opt {render_rational(rep.opt)}")
    print(f"ratio {render_rational(rep.ratio)}")
    print(f"phases {rep.phases}")
    print(f"m_sum {rep.m_sum}")
    return 0


def _cmd_bench(args) -> int:
    reports, _, _ = _run_reports(args, args.trials)
    csv_text = reports_to_csv(reports)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        fh.write(csv_text)
    print(f"wrote {len(reports)} trials to {args.out}")
    return 0


def _cmd_verify(args) -> int:
    all_reports = []
    ok = True
    if args.suite in ("all", "lower"):
        reports, passed = run_lower_bound_suite(runs_per_instance=args.runs,
                                          base_seed=args.seed ^ 0xA5)
        all_reports.extend(reports)
        ok = ok and passed
        print(f"lower: {sum(r.passed for r in reports)}/{len(reports)} checks passed")
    if args.suite in ("all", "ama"):
        reports, passed = run_ama_suite(seeds=args.seeds, base_seed=args.seed ^ 0xB6)
        all_reports.extend(reports)
        ok = ok and passed
        print(f"ama: {sum(r.passed for r in reports)}/{len(reports)} checks passed "
              f"(hard limit {'ok' if passed else 'EXCEEDED'})")
    if args.suite in ("all", "contract"):
        reports, passed = run_contract_suite(seeds=args.seeds,
                                             base_seed=args.seed ^ 0xC7)
        all_reports.extend(reports)
        ok = ok and passed
        print(f"contract: {sum(r.passed for r in reports)}/{len(reports)} checks passed")
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(checks_to_csv(all_reports))
    if not ok:
        failing = [r for r in all_reports if not r.passed and not r.advisory]
        for r in failing[:10]:
            print(f"FAILED {r.name} phase={r.phase} lhs={r.lhs} rhs={r.rhs} "
                  f"context={r.context}", file=sys.stderr)
        return CHECK_FAILURE
    return 0


def _cmd_probe(args) -> int:
    metric = build_uniform(args.points, Fraction(args.d))
    summary = probe_demand_monotonicity(metric, Fraction(args.delta),
                                        max_len=args.max_len)
    print(f"sequences {summary.sequences}")
    print(f"prefixes {summary.prefixes}")
    print(f"decreases {summary.decreases}")
    print(f"max_step {summary.max_step}")
    print(summary.verdict)
    return 0


_COMMANDS = {
    "opt": _cmd_opt,
    "demand": _cmd_demand,
    "run": _cmd_run,
    "bench": _cmd_bench,
    "verify": _cmd_verify,
    "probe-demand": _cmd_probe,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        args = _apply_config(parser, argv)
        _check_required(args)
        # config values arrive as JSON scalars; normalize the integer options
        for attr in ("servers", "k", "trials", "seed", "length", "runs",
                     "seeds", "points", "max_len"):
            if getattr(args, attr, None) is not None:
                setattr(args, attr, int(getattr(args, attr)))
        return _COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (ParseError, OSError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
