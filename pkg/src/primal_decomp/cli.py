"""Command-line experiment driver.

    primal-decomp run [CONFIG] [--out trace.csv] [--figure fig.png] [--seed N]
    primal-decomp reference [CONFIG] [--seed N]
    primal-decomp validate [CONFIG] [--seed N]

Exit codes: 0 success, 1 configuration error, 2 generation failure or
infeasible instance, 3 numerical or validation failure.
"""
import argparse
import csv
import dataclasses
import io
import sys
import time

from .config import Config, load_config
from .errors import ConfigError, GenerationError, NumericalFailure, RefusalError
from .graph import generate_erdos_renyi
from .problem import (auto_grid_resolution, centralized_reference, generate_instance, grid_oracle,
                      slater_check)
from .runtime import run
from .validation import run_all

EXIT_OK, EXIT_CONFIG, EXIT_GENERATION, EXIT_NUMERICAL = 0, 1, 2, 3

CSV_COLUMNS = ("t", "alpha", "cost_true", "cost_relaxed_est", "cost_err_abs", "coupling_violation",
               "alloc_residual", "max_rho", "mu_min", "mu_max", "eps_hat")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, int):
        return str(v)
    return format(float(v), ".17g")


def write_trace_csv(trace, fh):
    writer = csv.writer(fh)
    writer.writerow(CSV_COLUMNS)
    for row in trace.rows:
        writer.writerow([_fmt(getattr(row, c)) for c in CSV_COLUMNS])


def trace_csv_text(trace):
    buf = io.StringIO(newline="")
    write_trace_csv(trace, buf)
    return buf.getvalue()


def _with_seed(cfg: Config, seed):
    if seed is not None:
        cfg.run = dataclasses.replace(cfg.run, seed=seed)
    return cfg


def build(cfg: Config):
    """Instance and graph for the configured seed."""
    inst = generate_instance(cfg.instance, cfg.seed)
    graph = generate_erdos_renyi(inst.n_agents, cfg.edge_prob, cfg.seed, cfg.max_retries)
    return inst, graph


def _fail(code, exc):
    print(f"error: {exc}", file=sys.stderr)
    return code


def _guard(body):
    try:
        return body()
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, exc)
    except GenerationError as exc:
        return _fail(EXIT_GENERATION, exc)
    except NumericalFailure as exc:
        return _fail(EXIT_NUMERICAL, exc)


def cmd_run(config_path, out_path=None, seed_override=None, figure_path=None):
    def body():
        cfg = _with_seed(load_config(config_path), seed_override)
        out = out_path or cfg.csv
        figure = figure_path or cfg.figure
        if figure is not None:
            try:
                from . import plotting
                plotting._pyplot()
            except ImportError as exc:
                raise ConfigError(str(exc)) from None
        inst, graph = build(cfg)
        ref = centralized_reference(inst)
        start = time.perf_counter()
        trace = run(inst, graph, cfg.run, f_star=ref.f_star)
        elapsed = time.perf_counter() - start
        if out is None:
            write_trace_csv(trace, sys.stdout)
            summary_stream = sys.stderr
        else:
            with open(out, "w", newline="", encoding="utf-8") as fh:
                write_trace_csv(trace, fh)
            summary_stream = sys.stdout
        if figure is not None:
            plotting.render_trace(trace, figure)
        final = trace.rows[-1].cost_err_abs if trace.rows else float("nan")
        rel = final / max(1.0, abs(ref.f_star))
        print(f"rounds={len(trace)} f_star={ref.f_star:.10g} final_cost_err_abs={final:.6g} "
              f"final_rel_err={rel:.6g} runtime_s={elapsed:.2f}", file=summary_stream)
        return EXIT_OK
    return _guard(body)


def cmd_reference(config_path, seed_override=None):
    def body():
        cfg = _with_seed(load_config(config_path), seed_override)
        inst = generate_instance(cfg.instance, cfg.seed)
        ref = centralized_reference(inst)
        print(f"f_star={ref.f_star:.17g}")
        print(f"lambda_star={ref.lambda_star:.17g}")
        print(f"M={inst.penalty:.17g}")
        print(f"slater_margin={slater_check(inst):.17g}")
        if sum(a.dim for a in inst.agents) <= 4:
            res = auto_grid_resolution(inst)
            try:
                grid = grid_oracle(inst, res)
            except RefusalError as exc:
                print(f"grid_check=skipped ({exc})")
            else:
                print(f"grid_f_star={grid.f_star:.17g}")
                print(f"grid_resolution={res:.6g}")
                print(f"grid_gap={abs(grid.f_star - ref.f_star):.3g}")
        return EXIT_OK
    return _guard(body)


def cmd_validate(config_path, seed_override=None):
    def body():
        cfg = _with_seed(load_config(config_path), seed_override)
        inst, graph = build(cfg)
        results = run_all(cfg, inst, graph, cfg.seed)
        for r in results:
            print(r.line())
        failed = [r.name for r in results if not r.passed]
        print(f"{len(results) - len(failed)}/{len(results)} suites passed")
        return EXIT_NUMERICAL if failed else EXIT_OK
    return _guard(body)


class _Parser(argparse.ArgumentParser):
    # usage errors are configuration errors (argparse would exit with 2)
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _parser():
    p = _Parser(prog="primal-decomp", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, helptext in (("run", "run the algorithm and write the per-round trace"),
                           ("reference", "print the centralized reference solution"),
                           ("validate", "run the property suites")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("config", nargs="?", default=None, help="configuration file (defaults if omitted)")
        sp.add_argument("--seed", type=int, default=None, help="override the configured seed")
        if name == "run":
            sp.add_argument("--out", default=None, help="CSV path (standard output if omitted)")
            sp.add_argument("--figure", default=None, help="also render a figure (needs matplotlib)")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        return _fail(EXIT_CONFIG, "--seed must be a 64-bit unsigned integer")
    if args.command == "run":
        return cmd_run(args.config, args.out, args.seed, args.figure)
    if args.command == "reference":
        return cmd_reference(args.config, args.seed)
    return cmd_validate(args.config, args.seed)


if __name__ == "__main__":
    sys.exit(main())
