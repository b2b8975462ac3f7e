"""Command-line front end: codebook reports, block encode/decode and analysis sweeps.

Exit codes: 0 success, 2 usage error, 3 data error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

from .analysis import EnumerationBudgetExceeded, divergence_base, optimize_m, shortest_length
from .bitfile import BitFileError, BitFileFormat, read_bits, write_bits
from .codebook import CodebookSpec, CodebookSpecError, CodewordError
from .coder import CodingError, decode_blocks, encode_blocks
from .config import get_settings
from .logging_config import setup_logging
from .results import render_rows, write_rows
from .schemas import (
    OPTIMIZABLE_KINDS,
    CodebookReport,
    DmKind,
    KindSpec,
    McConfig,
    Objective,
    TargetDistribution,
    TargetReport,
)
from .tasks import row_payload, run_rows


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3


class UsageError(ValueError):
    """Bad command-line arguments detected after parsing."""


def parse_int_list(text: str) -> list[int]:
    """Parse ``"4"``, ``"10,20,30"`` or ``"start:stop:step"`` (stop inclusive), mixable with commas."""

    values: list[int] = []
    for part in (piece.strip() for piece in text.split(",")):
        if not part:
            continue
        try:
            if ":" in part:
                fields = [int(field) for field in part.split(":")]
                if len(fields) not in (2, 3):
                    raise ValueError
                start, stop = fields[0], fields[1]
                step = fields[2] if len(fields) == 3 else 1
                if step <= 0 or stop < start:
                    raise ValueError
                values.extend(range(start, stop + 1, step))
            else:
                values.append(int(part))
        except ValueError:
            raise UsageError(f"invalid integer list element {part!r}") from None
    if not values:
        raise UsageError("empty integer list")
    return values


def parse_kinds(text: str, *, optimizable: bool = True) -> list[DmKind]:
    kinds: list[DmKind] = []
    for part in (piece.strip().lower() for piece in text.split(",")):
        if not part:
            continue
        try:
            kind = DmKind(part)
        except ValueError:
            raise UsageError(f"unknown kind {part!r}") from None
        if optimizable and kind not in OPTIMIZABLE_KINDS:
            raise UsageError(f"kind {part!r} cannot be optimised, use cc, 2c or opt")
        kinds.append(kind)
    if not kinds:
        raise UsageError("no kinds given")
    return kinds


def _target(p1: float | None) -> TargetDistribution | None:
    if p1 is None:
        return None
    try:
        return TargetDistribution(p1=p1)
    except ValueError:
        raise UsageError(f"--p1 must lie in [0, 1], got {p1}") from None


def _resolve_spec(args: argparse.Namespace) -> tuple[CodebookSpec, int | None, bool]:
    """Build the codebook named on the command line.

    ``cc``, ``2c`` and ``opt`` without ``--m`` are optimised for ``--p1``.
    """

    kind = DmKind(args.kind)
    weights = parse_int_list(args.weights) if getattr(args, "weights", None) else None
    if kind in OPTIMIZABLE_KINDS and args.m is None:
        target = _target(args.p1)
        if target is None:
            raise UsageError(f"kind {kind.value} needs --m or --p1")
        result = optimize_m(kind, args.n, target)
        return result.spec, result.m_star, result.mirrored
    try:
        kind_spec = KindSpec(kind=kind, m=args.m, m_low=args.m_low, m_high=args.m_high, weights=weights)
    except ValueError as exc:
        raise UsageError(str(exc).splitlines()[-1]) from None
    return kind_spec.build(args.n), args.m, False


def _report(spec: CodebookSpec, kind: DmKind, t: TargetDistribution, m_star: int | None, mirrored: bool) -> CodebookReport:
    return CodebookReport(
        n=spec.n,
        kind=kind,
        label=spec.label(),
        weights=list(spec.weights),
        size=str(spec.size),
        k=spec.k,
        rate=spec.k / spec.n,
        div_base=divergence_base(spec, t),
        p1=t.p1,
        m_star=m_star,
        mirrored=mirrored,
    )


def _print_report(report: CodebookReport, as_json: bool) -> None:
    if as_json:
        print(report.model_dump_json(indent=2))
        return
    if report.m_star is not None:
        print(f"m*={report.m_star}")
    print(f"codebook={report.label}")
    print(f"M={report.size}")
    print(f"k={report.k}")
    print(f"rate={report.rate:.12g}")
    print(f"div_base={report.div_base:.12g}")


def cmd_info(args: argparse.Namespace) -> int:
    target = _target(args.p1)
    assert target is not None
    spec, m_star, mirrored = _resolve_spec(args)
    _print_report(_report(spec, DmKind(args.kind), target, m_star, mirrored), args.json)
    return EXIT_OK


def cmd_optimize(args: argparse.Namespace) -> int:
    target = _target(args.p1)
    assert target is not None
    kind = parse_kinds(args.kind)[0]
    if not 0.0 < target.p1 < 1.0:
        raise UsageError("optimize needs 0 < p1 < 1")
    result = optimize_m(kind, args.n, target, args.objective)
    _print_report(_report(result.spec, kind, target, result.m_star, result.mirrored), args.json)
    return EXIT_OK


def cmd_encode(args: argparse.Namespace) -> int:
    spec, _, _ = _resolve_spec(args)
    data = read_bits(args.input, args.format)
    encoded = encode_blocks(spec, data)
    write_bits(args.output, encoded, args.format)
    logger.info("Encoded %d bits into %d bits with %s", len(data), len(encoded), spec.label())
    return EXIT_OK


def cmd_decode(args: argparse.Namespace) -> int:
    spec, _, _ = _resolve_spec(args)
    data = read_bits(args.input, args.format)
    decoded = decode_blocks(spec, data, strict=args.strict)
    write_bits(args.output, decoded, args.format)
    logger.info("Decoded %d bits into %d bits with %s", len(data), len(decoded), spec.label())
    return EXIT_OK


def cmd_analyze(args: argparse.Namespace) -> int:
    settings = get_settings()
    target = _target(args.p1)
    assert target is not None
    if not 0.0 < target.p1 < 1.0:
        raise UsageError("analyze needs 0 < p1 < 1")
    n_values = parse_int_list(args.n)
    kinds = parse_kinds(args.kinds)
    try:
        mc = McConfig(
            samples=args.samples if args.samples is not None else settings.mc_samples,
            seed=args.seed if args.seed is not None else settings.mc_seed,
            workers=args.workers if args.workers is not None else settings.workers,
            budget=args.budget if args.budget is not None else settings.enumeration_budget,
            rel_error=args.rel_error,
            confidence=args.confidence,
        )
    except ValueError as exc:
        raise UsageError(str(exc).splitlines()[-1]) from None
    payloads = [row_payload(n, kind, target, mc) for n in n_values for kind in kinds]
    rows = run_rows(payloads, settings, use_celery=args.celery or None)
    output = args.output
    if output is None and args.save:
        output = settings.results_dir / f"sweep_p1_{target.p1:g}.csv"
    if output:
        path = write_rows(output, rows)
        logger.info("Wrote %d rows to %s", len(rows), path)
    else:
        sys.stdout.write(render_rows(rows))
    return EXIT_OK


def cmd_target(args: argparse.Namespace) -> int:
    target = _target(args.p1)
    assert target is not None
    if not 0.0 < target.p1 < 1.0:
        raise UsageError("target needs 0 < p1 < 1")
    reports = []
    for kind in parse_kinds(args.kinds):
        result = shortest_length(kind, target, args.target, args.n_max, args.objective)
        if result is None:
            reports.append(TargetReport(kind=kind, target_div=args.target))
            continue
        spec = result.spec
        reports.append(
            TargetReport(
                kind=kind,
                target_div=args.target,
                n=spec.n,
                m_star=result.m_star,
                k=spec.k,
                rate=spec.k / spec.n,
                div_base=result.div_base,
            )
        )
    for report in reports:
        if args.json:
            print(report.model_dump_json())
        elif report.n is None:
            print(f"{report.kind.value}: no n <= {args.n_max} reaches {args.target:g}")
        else:
            print(
                f"{report.kind.value}: n={report.n} m*={report.m_star} k={report.k} "
                f"rate={report.rate:.12g} div_base={report.div_base:.6g}"
            )
    return EXIT_OK


def _add_spec_arguments(parser: argparse.ArgumentParser, *, p1_required: bool = False) -> None:
    parser.add_argument("--n", type=int, required=True, help="codeword length")
    parser.add_argument("--kind", choices=[kind.value for kind in DmKind], required=True)
    parser.add_argument("--m", type=int, help="weight parameter for cc, 2c and opt")
    parser.add_argument("--m-low", dest="m_low", type=int, help="lowest weight for range")
    parser.add_argument("--m-high", dest="m_high", type=int, help="highest weight for range")
    parser.add_argument("--weights", help="comma list of weights for set")
    parser.add_argument("--p1", type=float, required=p1_required, help="target probability of a one")


def _add_io_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--in", dest="input", type=Path, required=True)
    parser.add_argument("--out", dest="output", type=Path, required=True)
    parser.add_argument("--format", choices=[fmt.value for fmt in BitFileFormat], default=BitFileFormat.ASCII.value)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mcdm", description="Multi-composition distribution matching toolkit")
    parser.add_argument("--log-level", dest="log_level", help="override MCDM_LOG_LEVEL")
    commands = parser.add_subparsers(dest="command", required=True)

    info = commands.add_parser("info", help="codebook size, input length, rate and base divergence")
    _add_spec_arguments(info, p1_required=True)
    info.add_argument("--json", action="store_true")
    info.set_defaults(handler=cmd_info)

    optimize = commands.add_parser("optimize", help="find the divergence-minimising m*")
    optimize.add_argument("--n", type=int, required=True)
    optimize.add_argument("--kind", choices=[kind.value for kind in OPTIMIZABLE_KINDS], required=True)
    optimize.add_argument("--p1", type=float, required=True)
    optimize.add_argument("--objective", choices=[o.value for o in Objective], default=Objective.ACTUAL.value)
    optimize.add_argument("--json", action="store_true")
    optimize.set_defaults(handler=cmd_optimize)

    encode = commands.add_parser("encode", help="map k-bit blocks to codewords")
    _add_spec_arguments(encode)
    _add_io_arguments(encode)
    encode.set_defaults(handler=cmd_encode)

    decode = commands.add_parser("decode", help="map codewords back to k-bit blocks")
    _add_spec_arguments(decode)
    _add_io_arguments(decode)
    decode.add_argument(
        "--strict",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="reject codewords the encoder never emits (default on)",
    )
    decode.set_defaults(handler=cmd_decode)

    analyze = commands.add_parser("analyze", help="sweep optimised matchers and write a CSV")
    analyze.add_argument("--p1", type=float, required=True)
    analyze.add_argument("--n", required=True, help="e.g. 4, 10,20 or 10:500:10")
    analyze.add_argument("--kinds", default="cc,2c,opt")
    analyze.add_argument("--samples", type=int)
    analyze.add_argument("--seed", type=int)
    analyze.add_argument("--workers", type=int)
    analyze.add_argument("--budget", type=int, help="largest k enumerated exactly")
    analyze.add_argument("--rel-error", dest="rel_error", type=float, help="top up samples to reach this relative error")
    analyze.add_argument("--confidence", type=float, default=0.9)
    analyze.add_argument("--celery", action="store_true", help="dispatch rows to the worker pool")
    analyze.add_argument("--out", dest="output", type=Path)
    analyze.add_argument("--save", action="store_true", help="write the CSV under MCDM_RESULTS_DIR")
    analyze.set_defaults(handler=cmd_analyze)

    target = commands.add_parser("target", help="shortest n reaching a base divergence")
    target.add_argument("--p1", type=float, required=True)
    target.add_argument("--target", type=float, required=True, help="divergence in bits per symbol")
    target.add_argument("--kinds", default="cc,2c,opt")
    target.add_argument("--n-max", dest="n_max", type=int, default=1000)
    target.add_argument("--objective", choices=[o.value for o in Objective], default=Objective.ACTUAL.value)
    target.add_argument("--json", action="store_true")
    target.set_defaults(handler=cmd_target)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args: Any = parser.parse_args(argv)
    setup_logging(args.log_level)
    logger.debug("Running %s", args.command)
    try:
        return args.handler(args)
    except (CodingError, CodewordError, BitFileError, EnumerationBudgetExceeded, OSError) as exc:
        logger.error("%s failed: %s", args.command, exc)
        logger.debug("%s traceback", args.command, exc_info=exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (UsageError, CodebookSpecError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover - CLI helper
    sys.exit(main())
