"""Command-line entry point: ``ibpdn <experiment> [--config cfg.json] [--flag value ...] [--out path]``."""

from __future__ import annotations

import argparse
import json
import sys
import typing
from dataclasses import fields
from pathlib import Path

from .experiments import CSV_FIELDS, EXPERIMENTS, ExperimentConfig, format_csv, run

EPILOG = """\
CSV columns per experiment:
""" + "\n".join(f"  {name}: {', '.join(cols)}" for name, cols in CSV_FIELDS.items()) + """

JSON experiments: solve (RecoveryResult plus error and certificate),
constants (delta_2k, delta_s2k, mu, condition_ok, C, D, delta_prime, D_tilde),
rip (order_q, radius, method, is_lower_bound).

Settings come from the config JSON, then from flags; flags win.
List-valued flags take comma-separated values (--epsilons 0,0.01,0.1).
"""


def _list_parser(item):
    def parse(text):
        return [item(v) for v in text.split(",") if v.strip()]
    return parse


def _bool(text):
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


_LIST_ITEM = {"epsilons": float, "m_values": int, "k_values": int, "t_indices": int}
_SCALAR = {int: int, float: float, str: str, bool: _bool}


def _flag_type(f):
    if f.name in _LIST_ITEM:
        return _list_parser(_LIST_ITEM[f.name])
    hint = typing.get_type_hints(ExperimentConfig)[f.name]
    args = [a for a in typing.get_args(hint) if a is not type(None)]
    return _SCALAR[args[0] if args else hint]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ibpdn", description=__doc__, epilog=EPILOG,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", type=Path, help="JSON file with ExperimentConfig fields")
    p.add_argument("--out", type=Path, dest="output_path", default=argparse.SUPPRESS,
                   help="output file (CSV or JSON); stdout when omitted")
    for f in fields(ExperimentConfig):
        if f.name in ("experiment", "output_path"):
            continue
        p.add_argument(f"--{f.name}", type=_flag_type(f), default=argparse.SUPPRESS)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = vars(parser.parse_args(argv))
    settings = {}
    cfg_path = args.pop("config", None)
    try:
        if cfg_path is not None:
            settings.update(json.loads(cfg_path.read_text()))
        settings.update(args)
        if settings.get("output_path") is not None:
            settings["output_path"] = str(settings["output_path"])
        cfg = ExperimentConfig.from_dict(settings)
    except (OSError, ValueError, TypeError) as exc:
        print(f"ibpdn: invalid configuration: {exc}", file=sys.stderr)
        return 2

    try:
        out = run(cfg)
    except (ValueError, ArithmeticError) as exc:
        print(f"ibpdn: {cfg.experiment} failed: {exc}", file=sys.stderr)
        return 1
    text = json.dumps(out, indent=2) + "\n" if isinstance(out, dict) else format_csv(*out)
    if cfg.output_path:
        Path(cfg.output_path).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
