"""Command-line entrypoint for the renormalization lab."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any

from .config import ExperimentConfig, load_config, parse_config
from .errors import ConfigError, LabError
from .executor import EXIT_FAILURE, LOG_NAME, run
from .numerics import PROFILES, configure_precision

LOGGER = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
TUNE_KEYS = ("omega", "rho_check")


def _add_family_options(parser: argparse.ArgumentParser, *, second: bool = False) -> None:
    parser.add_argument("--c", type=float, default=None, help="Family parameter of the (first) lift.")
    if second:
        parser.add_argument("--c-prime", dest="c_prime", type=float, default=None, help="Second family parameter.")


def _add_word_option(parser: argparse.ArgumentParser, flag: str = "--cf") -> None:
    parser.add_argument(
        flag,
        dest="cf",
        default=None,
        help="Continued-fraction word, e.g. '1', '(1,2)' or '2,(1)'; a bare list is the period.",
    )


def _add_steps_option(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--steps", type=int, default=None, help="Number of renormalization steps.")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pair-renorm-lab",
        description="Renormalization experiments on critical commuting pairs.",
    )
    parser.add_argument("--config", type=Path, default=None, help="TOML experiment configuration.")
    parser.add_argument("--out", default=None, help="Directory for artifacts, reports and run.log.")
    parser.add_argument("--precision", choices=sorted(PROFILES), default=None, help="Working precision.")
    parser.add_argument("--seed", type=int, default=None, help="Seed for parameter-noise injection.")
    subparsers = parser.add_subparsers(dest="subcommand", required=True)

    tune = subparsers.add_parser("tune", help="Tune omega so the lift has the target rotation number.")
    _add_family_options(tune)
    _add_word_option(tune)
    tune.add_argument("--tol", type=float, default=None, help="Tolerance on the rotation number.")

    extract = subparsers.add_parser("extract-pair", help="Tune a lift and write its normalized pair.")
    _add_family_options(extract)
    _add_word_option(extract)
    extract.add_argument("--tol", type=float, default=None, help="Tuning tolerance.")
    extract.add_argument("--rigid", type=float, default=None, help="Extract from the rotation by THETA instead.")

    orbit = subparsers.add_parser("renorm-orbit", help="Renormalize a stored pair repeatedly.")
    orbit.add_argument("--pair", default=None, help="Pair JSON document.")
    _add_steps_option(orbit)
    orbit.add_argument(
        "--out", dest="orbit_out", default=None, help="Orbit CSV path; its directory receives the other artifacts."
    )

    universality = subparsers.add_parser("universality", help="Compare orbits of two families.")
    _add_family_options(universality, second=True)
    _add_word_option(universality)
    _add_steps_option(universality)

    shift = subparsers.add_parser("shift-demo", help="Check that heights spell a periodic word.")
    _add_word_option(shift, "--word")
    _add_steps_option(shift)
    _add_family_options(shift)

    scaling = subparsers.add_parser("scaling", help="Scaling ratios of two families and reference values.")
    _add_family_options(scaling, second=True)
    _add_steps_option(scaling)

    stable = subparsers.add_parser("stable-set", help="Orbits that reach the same tail at different times.")
    _add_word_option(stable)
    stable.add_argument("--preperiod", default=None, help="Finite word prepended to the periodic tail.")
    _add_steps_option(stable)
    _add_family_options(stable)

    validate = subparsers.add_parser("validate-pair", help="Check the pair axioms of a stored pair.")
    validate.add_argument("--pair", default=None, help="Pair JSON document.")
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    fields = set(ExperimentConfig.model_fields)
    values = {key: value for key, value in vars(args).items() if key in fields}
    if getattr(args, "orbit_out", None) is not None:
        values["out"] = args.orbit_out
    return {key: value for key, value in values.items() if value is not None}


def _configure_logging(output_dir: Path) -> list[logging.Handler]:
    output_dir.mkdir(parents=True, exist_ok=True)
    file_handler = logging.FileHandler(output_dir / LOG_NAME, mode="w", encoding="utf-8")
    file_handler.setLevel(logging.INFO)
    file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
    stderr_handler = logging.StreamHandler(sys.stderr)
    stderr_handler.setLevel(logging.WARNING)
    stderr_handler.setFormatter(logging.Formatter("[%(levelname)s] %(message)s"))

    root = logging.getLogger()
    root.setLevel(logging.INFO)
    root.addHandler(file_handler)
    root.addHandler(stderr_handler)
    return [file_handler, stderr_handler]


def _release_logging(handlers: list[logging.Handler]) -> None:
    root = logging.getLogger()
    for handler in handlers:
        root.removeHandler(handler)
        handler.close()


def _fail(payload: dict[str, Any]) -> int:
    print(json.dumps(payload, ensure_ascii=False), file=sys.stderr)
    return EXIT_FAILURE


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    overrides = _overrides(args)
    try:
        if args.config is not None:
            cfg = load_config(args.config.expanduser(), overrides)
        else:
            cfg = parse_config("", overrides)
    except ConfigError as exc:
        return _fail(exc.to_payload())

    try:
        configure_precision(cfg.precision)
    except ValueError as exc:
        return _fail(LabError(str(exc)).to_payload())

    handlers = _configure_logging(cfg.out_dir)
    try:
        LOGGER.info("running %s with precision %s into %s", cfg.subcommand, cfg.precision, cfg.out_dir)
        result = run(cfg)
    finally:
        _release_logging(handlers)

    if result.exit_code != 0:
        return _fail(result.error or {})
    printed: dict[str, Any] = {"out": str(result.output_dir), "contentHash": result.content_hash}
    if cfg.subcommand == "tune":
        printed.update({key: result.limits[key] for key in TUNE_KEYS})
    print(json.dumps(printed))
    return result.exit_code


if __name__ == "__main__":  # pragma: no cover - manual invocation
    sys.exit(main())
