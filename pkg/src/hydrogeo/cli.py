"""``hydrogeo`` command line: ``run``, ``suite`` and ``oracle`` on a scenario file.

Exit codes: 0 success, 2 config error, 3 numeric failure, 4 identity-suite failure.
Errors are reported as one JSON object on stdout.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys

from .config import load_config
from .errors import ConfigError, HydrogeoError
from .runner import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, run_scenario


def _error(kind, exc, code, scenario=None):
    print(json.dumps({"status": "error", "error": kind, "message": str(exc),
                      "exit_code": code, "scenario": scenario}))
    return code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hydrogeo", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the scenario described by a config file")
    run.add_argument("config")
    run.add_argument("--out", help="output directory (overrides out_dir)")
    run.add_argument("--seed", type=int, help="override the scenario seed")
    for name, kind in (("suite", "identity_suite"), ("oracle", "oracle")):
        sp = sub.add_parser(name, help=f"run the config as kind={kind}")
        sp.add_argument("config")
        sp.add_argument("--out")
        sp.add_argument("--seed", type=int)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        s = load_config(args.config)
        if args.command == "suite" and s.kind != "identity_suite":
            raise ConfigError(f"'suite' needs kind = identity_suite, config has {s.kind!r}")
        if args.command == "oracle" and s.kind != "oracle":
            raise ConfigError(f"'oracle' needs kind = oracle, config has {s.kind!r}")
    except OSError as exc:
        return _error("ConfigError", exc, EXIT_CONFIG)
    except ConfigError as exc:
        return _error("ConfigError", exc, EXIT_CONFIG)
    if args.seed is not None:
        s = dataclasses.replace(s, seed=args.seed)
    try:
        manifest = run_scenario(s, args.out)
    except HydrogeoError as exc:
        return _error(type(exc).__name__, exc, EXIT_NUMERIC, s.kind)
    print(json.dumps({"status": manifest.status, "exit_code": manifest.exit_code,
                      "out_dir": args.out or s.out_dir,
                      "files": [f["path"] for f in manifest.files]}))
    return manifest.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
