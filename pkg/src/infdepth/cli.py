"""Command-line entry point: ``infdepth list`` and ``infdepth run <experiment>``.

Exit status is 0 when every rule of the report passes, 2 when at least one
rule fails and 1 on usage or numerical errors.

Activations are spelled ``name[:p1[:p2]]``: ``relu``, ``identity``,
``piecewise:1.0:-1.0``, ``linear:a:b``, ``smooth_relu:10``,
``exotic:1:0``, ``tanh``, ``gelu``, ``swish``.
"""

from __future__ import annotations

import argparse
import sys

from .errors import InfDepthError
from .experiments import PARAM_KEYS, REGISTRY, catalog_text, run_experiment

EXIT_PASS, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def read_config(path: str) -> dict:
    """Parse a plain ``key = value`` file; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise _UsageError(f"{path}:{lineno}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            key = key.replace("-", "_")
            if key == "dims":
                key = "width"
            if key not in PARAM_KEYS and key not in ("out", "threads"):
                raise _UsageError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = value.strip("\"'")
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="infdepth", description="Monte Carlo checks of infinite-depth ResNet limits")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("list", help="show the experiment catalog")
    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("experiment")
    run.add_argument("--width", "-n", "--dims", dest="width", help="width n (comma list where swept)")
    run.add_argument("--depth", "-L", dest="depth", help="depth L (comma list where swept)")
    run.add_argument("--input-dim", "-d", dest="input_dim")
    run.add_argument("--samples", "-N", dest="samples")
    run.add_argument("--steps", dest="steps", help="Euler steps per unit time (comma list for euler-order)")
    run.add_argument("--seed", dest="seed")
    run.add_argument("--activation", dest="activation", help="name[:p1[:p2]]")
    run.add_argument("--variant", dest="variant",
                     choices=["main", "appendix", "as-stated", "reconciled"])
    run.add_argument("--out", dest="out")
    run.add_argument("--threads", dest="threads")
    run.add_argument("--config", dest="config", help="key = value file; flags take precedence")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command == "list":
            print(catalog_text())
            return EXIT_PASS
        if args.experiment not in REGISTRY:
            raise _UsageError(f"unknown experiment {args.experiment!r}; run 'infdepth list'")
        settings = read_config(args.config) if args.config else {}
        for key in PARAM_KEYS + ("out", "threads"):
            value = getattr(args, key, None)
            if value is not None:
                settings[key] = value
        out_dir = settings.pop("out", ".")
        try:
            threads = int(settings.pop("threads", 1))
        except ValueError as exc:
            raise _UsageError("--threads expects an integer") from exc
        report = run_experiment(args.experiment, settings, out_dir, threads=threads)
    except _UsageError as exc:
        print(f"infdepth: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (InfDepthError, OSError) as exc:
        print(f"infdepth: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    for rule in report["rules"]:
        print(f"{'PASS' if rule['passed'] else 'FAIL'}  {rule['name']}: {rule['detail']}")
    print(f"verdict: {report['verdict']}  ({out_dir}/{args.experiment}.report.json)")
    return EXIT_PASS if report["verdict"] == "pass" else EXIT_FAIL
