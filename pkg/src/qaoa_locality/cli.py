"""Command line entry point: ``qaoa-locality <subcommand> [--key value ...]``.

Parameters come from an optional JSON config, then ``--set key=value`` or
``--key value`` pairs; values are parsed as JSON when possible. Exit status is
0 on full success, 1 when a check fails, 2 for invalid configuration and 3
when the experiment raised.
"""
from __future__ import annotations

import argparse
import json
import sys

from .errors import ConfigError, ExperimentError, HarnessBusyError
from .harness import SCHEMAS, ExperimentConfig, run

SUBCOMMANDS = {
    "sample-graph": "sample_graph",
    "qaoa-expect": "qaoa_expect",
    "qaoa-plus-sample": "qaoa_plus_sample",
    "p15-optimize": "p15_optimize",
    "p15-scan": "p15_scan",
    "ogp-scan": "ogp_scan",
    "far-lemma": "verify_far_lemma",
    "lightcone-check": "lightcone_check",
    "branching": "branching",
    "neighborhood-tail": "neighborhood_tail",
    "concentration": "concentration",
    "count-mvg": "count_mvg",
    "reproduce-paper": "reproduce_paper",
}


def _value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _global_flags(parser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=default, help="JSON experiment config")
    parser.add_argument("--seed", type=int, default=default, help="master seed (u64)")
    parser.add_argument("--out", default=default, help="output directory")
    parser.add_argument("--threads", type=int, default=default,
                        help="worker processes for light-cone sweeps")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qaoa-locality", description=__doc__.splitlines()[0])
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, kind in SUBCOMMANDS.items():
        keys = ", ".join(sorted(SCHEMAS[kind]))
        sp = sub.add_parser(name, help=f"run {kind}", description=f"keys: {keys}")
        _global_flags(sp, suppress=True)
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one parameter (repeatable)")
    return parser


def parse(argv=None):
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    overrides = {}
    for item in args.set:
        if "=" not in item:
            parser.error(f"--set expects KEY=VALUE, got {item!r}")
        key, val = item.split("=", 1)
        overrides[key.strip().replace("-", "_")] = _value(val)
    k = 0
    while k < len(extra):
        tok = extra[k]
        if not tok.startswith("--"):
            parser.error(f"unexpected argument {tok!r}")
        if "=" in tok:
            key, val = tok[2:].split("=", 1)
            k += 1
        else:
            if k + 1 >= len(extra):
                parser.error(f"{tok} needs a value")
            key, val = tok[2:], extra[k + 1]
            k += 2
        overrides[key.replace("-", "_")] = _value(val)
    return args, overrides


def make_config(args, overrides) -> ExperimentConfig:
    kind = SUBCOMMANDS[args.command]
    data = {}
    if args.config:
        with open(args.config) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError([f"{args.config}: invalid JSON: {exc}"]) from exc
        given = data.get("kind", kind)
        if given.replace("-", "_") not in (kind, args.command.replace("-", "_")):
            raise ConfigError([f"config kind {given!r} does not match subcommand {args.command!r}"])
    data.update(overrides)
    data["kind"] = kind
    if args.seed is not None:
        data["seed"] = args.seed
    if args.out is not None:
        data["out"] = args.out
    elif "out" not in data:
        data["out"] = f"runs/{kind}"
    if args.threads is not None and "threads" in SCHEMAS[kind]:
        data["threads"] = args.threads
    return ExperimentConfig.from_dict(data)


def _summary(payload: dict) -> str:
    short = {k: v for k, v in payload.items()
             if not (isinstance(v, list) and len(v) > 20) and k != "rows"}
    return json.dumps(short, indent=2, sort_keys=True, default=str)


def main(argv=None) -> int:
    args, overrides = parse(argv)
    try:
        cfg = make_config(args, overrides)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return 2
    try:
        record = run(cfg, log=print)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return 2
    except HarnessBusyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ExperimentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    if cfg.kind != "reproduce_paper":
        print(_summary(record.payload))
    else:
        counts = record.payload["counts"]
        print(f"{counts['PASS']} passed, {counts['FAIL']} failed, {counts['SKIPPED']} skipped")
    print(f"record: {cfg.out}/record.json", file=sys.stderr)
    return 0 if record.passed else 1


if __name__ == "__main__":
    sys.exit(main())
