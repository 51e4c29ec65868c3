"""Command-line entry point.

Exit status: 0 when every finding is no-proxy-use, 2 when any proxy or
potential proxy is reported, 1 on error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .audit import DEFAULT_EPSILONS, AuditConfig, run_audit
from .embedding import embed, estimate_covariance
from .errors import ProxyAuditError
from .report import emit_report

log = logging.getLogger("linproxy")

EXIT_CLEAN, EXIT_ERROR, EXIT_FLAGGED = 0, 1, 2


def _names(text: str) -> tuple[str, ...]:
    return tuple(s.strip() for s in text.split(",") if s.strip())


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(s) for s in _names(text))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _pair(text: str) -> tuple[str, str]:
    parts = _names(text)
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("--protected-pair takes two labels, e.g. W,B")
    return parts


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="linproxy",
        description="Detect proxy use of a protected attribute in a linear regression model.",
    )
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="CSV file with a header row")
    src.add_argument("--covariance", help="square covariance CSV (header row of labels)")
    p.add_argument("--protected", required=True, help="protected attribute column")
    p.add_argument("--protected-pair", type=_pair, help="two labels mapped to 0 and 1, e.g. W,B")
    how = p.add_mutually_exclusive_group(required=True)
    how.add_argument("--target", help="response column to fit by least squares")
    how.add_argument("--model", help="CSV of feature,coefficient rows")
    p.add_argument("--features", type=_names, default=(), help="comma-separated feature columns")
    p.add_argument("--exempt", help="feature whose use is permitted")
    p.add_argument(
        "--epsilons",
        type=_floats,
        default=DEFAULT_EPSILONS,
        help="ascending association thresholds (default 0.01,...,0.10)",
    )
    p.add_argument("--delta", type=float, default=0.05, help="influence threshold")
    p.add_argument("--epsilon-prime", type=float, default=0.05, help="exemption association slack")
    p.add_argument("--format", choices=("json", "csv", "markdown"), default="json")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--timings", action="store_true", help="include phase timings in JSON")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--oracle-check", action="store_true", help=argparse.SUPPRESS)
    return p


def _write(path: str | None, blob: bytes) -> None:
    if path is None:
        sys.stdout.buffer.write(blob)
        sys.stdout.flush()
    else:
        Path(path).write_bytes(blob)


def _emit(report, args) -> None:
    if args.format != "csv":
        _write(args.out, emit_report(report, args.format, timings=args.timings))
        return
    for i, name in enumerate(report.sweeps):
        blob = emit_report(report, "csv", table=name)
        if args.out is None:
            if i:
                sys.stdout.write(f"\n# {name}\n")
            _write(None, blob)
        else:
            out = Path(args.out)
            path = out if name == "general" else out.with_name(f"{out.stem}.{name}{out.suffix}")
            _write(str(path), blob)


def _oracle_check(config: AuditConfig, report) -> None:
    from .dataset import read_table
    from .metrics import LinearModel, Thresholds
    from .oracle import grid_best

    m = report.model
    model = LinearModel(tuple(m.inputs), m.coefficients, m.intercept)
    if len(model.inputs) > 4:
        log.warning("oracle check skipped: more than 4 inputs")
        return
    if config.input_path is None:
        from .embedding import CovarianceMatrix

        sigma = CovarianceMatrix.from_csv(config.covariance_path).select(
            (config.protected,) + model.inputs
        )
    else:
        data = read_table(config.input_path, model.inputs, config.protected, config.protected_pair)
        sigma = estimate_covariance(data, (config.protected,) + model.inputs)
    prob = embed(model, sigma)
    for f in report.findings:
        if f.mode != "general" or f.method != "exact":
            continue
        th = Thresholds(f.epsilon, config.delta)
        best = grid_best(prob, th.epsilon)
        infl = 0.0 if best is None else best.influence
        print(
            f"oracle eps={f.epsilon:g} best_influence={infl:.6f} "
            f"grid_proxy={infl >= th.delta} exact_verdict={f.verdict}",
            file=sys.stderr,
        )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        config = AuditConfig(
            protected=args.protected,
            input_path=args.input,
            protected_pair=args.protected_pair,
            target=args.target,
            model_path=args.model,
            features=args.features,
            exempt=args.exempt,
            epsilons=args.epsilons,
            delta=args.delta,
            epsilon_prime=args.epsilon_prime,
            output_format=args.format,
            seed=args.seed,
            covariance_path=args.covariance,
        )
        report = run_audit(config)
        for phase, seconds in report.timings.items():
            log.info("%s: %.3fs", phase, seconds)
        _emit(report, args)
        if args.oracle_check:
            _oracle_check(config, report)
    except (ProxyAuditError, ValueError, OSError) as exc:
        print(f"linproxy: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_FLAGGED if report.flagged else EXIT_CLEAN


if __name__ == "__main__":
    sys.exit(main())
