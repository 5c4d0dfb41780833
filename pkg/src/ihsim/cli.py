"""``ihsim`` command line entry point.

Exit codes: 0 success, 2 configuration validation failure, 3 runtime guard
violation.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import GuardError, ValidationError
from .harness.config import Experiment, config_from_dict, load_config
from .harness.experiments import run_experiment

log = logging.getLogger("ihsim")

EXIT_OK, EXIT_CONFIG, EXIT_GUARD = 0, 2, 3


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ihsim", description="Information-harvesting simulator experiments.")
    p.add_argument("experiment", choices=[e.value for e in Experiment])
    p.add_argument("--config", help="JSON config with flat dotted keys (defaults when omitted)")
    p.add_argument("--seed", type=_u64, required=True)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--trials", type=int)
    p.add_argument("--ocr", type=_floats, help="comma-separated OCR list")
    p.add_argument("--k", type=_ints, help="comma-separated active-antenna counts")
    p.add_argument("--d", type=_floats, help="comma-separated distances in metres")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config) if args.config else config_from_dict({})
        data = cfg.to_dict()
        data.update({"experiment": args.experiment, "seed": args.seed, "out": args.out})
        if args.trials is not None:
            data["trials"] = args.trials
        if args.ocr is not None:
            data["sweep.ocr"] = args.ocr
        if args.k is not None:
            data["sweep.k"] = args.k
        if args.d is not None:
            data["sweep.d_m"] = args.d
        cfg = config_from_dict(data)
    except ValidationError as exc:
        print(f"ihsim: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"ihsim: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        written = run_experiment(cfg, args.out)
    except GuardError as exc:
        print(f"ihsim: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except ValidationError as exc:
        print(f"ihsim: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for path in written:
        log.info("wrote %s", path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
