"""Command-line experiment runner.

Exit codes: 0 success, 1 invalid config or usage, 2 flagged numerical
instability.
"""
from __future__ import annotations

import argparse
import json
import sys

from . import experiments
from .config import ConfigError, load

EPILOG = f"""\
config files are TOML, one experiment per file, e.g.

  kind = "symbol-table"
  name = "symbols"
  seed = 0
  [[symbols]]
  kind = "stable"
  beta = 0.5
  [grids]
  lam = [0.5, 1.0, 2.0, 4.0]

sections: [generator] l, ell, regime, robin_c, alpha, eta, eps, n_cells,
layer_cells, ns; [mc] n_paths, dt, ds, x0, workers, t_max, estimator;
[grids] lam, t, mu, c, x; [thresholds] metric = value.

results.csv columns by kind:
""" + "\n".join(f"  {k:16s} {', '.join(v)}" for k, v in experiments.COLUMNS.items()) + f"""

outputs go to --out, else output_dir from the config, else
${experiments.OUTPUT_ENV}/<name>-<hash>, else ./fracmosco-runs/<name>-<hash>.
exit codes: 0 ok, 1 invalid config or usage, 2 flagged numerical instability.
"""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fracmosco", description="Run time-fractional diffusion experiments.", epilog=EPILOG,
                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    r = sub.add_parser("run", help="run one experiment config or built-in suite", epilog=EPILOG,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("config", nargs="?", help="TOML config file")
    src.add_argument("--suite", help="name of a built-in suite")
    r.add_argument("--out", help="output directory")
    ls = sub.add_parser("list", help="list built-in suites")
    ls.add_argument("--json", action="store_true", help="machine-readable output")
    v = sub.add_parser("validate", help="check a config without running it")
    v.add_argument("config")
    d = sub.add_parser("dump-suite", help="print a built-in suite as a TOML config")
    d.add_argument("suite")
    return p


def _report_errors(exc: ConfigError) -> int:
    print("invalid config:", file=sys.stderr)
    for key, msg in exc.errors:
        print(f"  {key}: {msg}", file=sys.stderr)
    return 1


def _load(args):
    if getattr(args, "suite", None):
        return experiments.suite_config(args.suite)
    return load(args.config)


def cmd_list(args) -> int:
    items = [{"name": k, "description": d, "expected_runtime": t, "kind": c["kind"]}
             for k, (d, t, c) in experiments.SUITES.items()]
    if args.json:
        print(json.dumps(items, indent=1))
        return 0
    w = max(len(i["name"]) for i in items)
    for i in items:
        print(f"{i['name']:{w}s}  {i['expected_runtime']:>6s}  {i['description']}")
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "list":
        return cmd_list(args)
    if args.command == "dump-suite":
        from .config import dumps
        try:
            print(dumps(experiments.suite_config(args.suite)), end="")
        except KeyError as exc:
            print(exc.args[0], file=sys.stderr)
            return 1
        return 0
    try:
        cfg = _load(args)
    except ConfigError as exc:
        return _report_errors(exc)
    except KeyError as exc:
        print(exc.args[0], file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 1
    if args.command == "validate":
        print(f"ok: {cfg.kind} '{cfg.name}' hash {cfg.hash()}")
        return 0
    out, outcome = experiments.execute(cfg, args.out)
    print(f"wrote {out}/results.csv ({len(outcome.rows)} rows)")
    if outcome.flagged:
        print("numerical instability flagged; see metadata.json", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
