"""``simul-latency`` command line: evaluate, simulate, inspect.

Exit codes: 0 success, 1 usage or configuration error, 2 data error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from pathlib import Path
from typing import List, Optional

from .errors import EmptyCorpus, IdNotFound, InvalidRange, LatencyError, ParseError
from .metrics import (
    METRIC_NAMES,
    LatencyRatioMode,
    TimeModel,
    atd,
    corpus_aggregate,
    prepare,
    score_session,
)
from .policy import DEFAULT_RANGES, parse_range, sweep, write_sweep_csv
from .report import inspect_to_tsv, read_jsonl, report_to_json, report_to_tsv
from .trace import DEFAULT_SEG_MS, assign_ca_times, assign_nca_times

logger = logging.getLogger("simul_latency")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _metric_list(text: str) -> List[str]:
    names = [m.strip().upper() for m in text.split(",") if m.strip()]
    bad = [m for m in names if m not in METRIC_NAMES]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"unknown metrics {bad}; choose from {','.join(METRIC_NAMES)}")
    # canonical column order
    return [m for m in METRIC_NAMES if m in names]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="simul-latency", description="Latency metrics for simultaneous translation traces.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    ev = sub.add_parser("evaluate", help="score a JSONL corpus of session traces")
    ev.add_argument("--input", required=True, type=Path)
    ev.add_argument("--time-model", choices=[m.value for m in TimeModel], default="nca")
    ev.add_argument("--ratio", choices=[m.value for m in LatencyRatioMode], default="output")
    ev.add_argument("--metrics", type=_metric_list, default=["AL", "AP", "CW", "ATD"],
                    help="comma-separated subset of al,laal,ap,cw,atd (default al,ap,cw,atd)")
    ev.add_argument("--format", choices=["json", "tsv"], default="json")
    ev.add_argument("--seg-ms", type=float, default=DEFAULT_SEG_MS)
    ev.add_argument("--jobs", type=int, default=1)
    ev.add_argument("--skip-bad", action="store_true",
                    help="quarantine malformed lines into INPUT.bad instead of failing")
    ev.add_argument("--out", type=Path, help="write the report here instead of stdout")

    sim = sub.add_parser("simulate", help="run a simulated AL/ATD sweep")
    sim.add_argument("--case", required=True, choices=sorted(DEFAULT_RANGES))
    sim.add_argument("--policies", default="wait,chunk", help="wait,chunk (cases 1-3 only)")
    sim.add_argument("--range", "--k", "--L1", "--L2", dest="range", default=None,
                     help="parameter range A..B (k for cases 1-3, L1/L2 for cases 4/5)")
    sim.add_argument("--with-ap-cw", action="store_true", help="add AP and CW columns")
    sim.add_argument("--out", type=Path, help="CSV path (stdout if omitted)")

    ins = sub.add_parser("inspect", help="print per-token ATD correspondences for one session")
    ins.add_argument("--input", required=True, type=Path)
    ins.add_argument("--id", required=True)
    ins.add_argument("--time-model", choices=[m.value for m in TimeModel], default="nca")
    ins.add_argument("--seg-ms", type=float, default=DEFAULT_SEG_MS)
    return parser


def _emit(text: str, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")


def cmd_evaluate(args) -> int:
    if args.jobs < 1:
        raise UsageError("--jobs must be positive")
    if args.seg_ms <= 0:
        raise UsageError("--seg-ms must be positive")
    if not args.input.exists():
        raise FileNotFoundError(args.input)

    bad: list = []
    sessions = read_jsonl(args.input, skip_bad=args.skip_bad, bad=bad)
    if bad:
        sidecar = args.input.with_name(args.input.name + ".bad")
        with open(sidecar, "w", encoding="utf-8") as fh:
            for line_no, raw, msg in bad:
                fh.write(raw + "\n")
                logger.warning("line %d quarantined: %s", line_no, msg)
        logger.warning("%d malformed line(s) written to %s", len(bad), sidecar)
    if not sessions:
        raise EmptyCorpus(f"{args.input}: no sessions")
    if args.time_model == "ca":
        missing = [t.id for _, t in sessions if not t.has_timestamps]
        if missing:
            raise UsageError(f"--time-model ca needs timestamps on every event; missing in {missing[:5]}")

    score = partial(
        score_session,
        metrics=args.metrics,
        time_model=args.time_model,
        ratio=args.ratio,
        seg_ms=args.seg_ms,
    )
    traces = [t for _, t in sessions]
    if args.jobs == 1:
        results = [score(t) for t in traces]
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(score, traces, chunksize=max(1, len(traces) // (4 * args.jobs))))
    for (line_no, _), res in zip(sessions, results):
        res.line_no = line_no
        if not res.ok:
            logger.info("line %d (%s) excluded: %s", line_no, res.id, res.error)

    report = corpus_aggregate(results, metrics=args.metrics)
    if args.format == "json":
        text = report_to_json(report, time_model=args.time_model, ratio=args.ratio)
    else:
        text = report_to_tsv(report)
    _emit(text, args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    param_range = parse_range(args.range) if args.range else None
    result = sweep(args.case, policies=policies, param_range=param_range)
    if args.out is None:
        write_sweep_csv(result, sys.stdout, with_ap_cw=args.with_ap_cw)
    else:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            write_sweep_csv(result, fh, with_ap_cw=args.with_ap_cw)
    return EXIT_OK


def cmd_inspect(args) -> int:
    if not args.input.exists():
        raise FileNotFoundError(args.input)
    match = [t for _, t in read_jsonl(args.input) if t.id == args.id]
    if not match:
        raise IdNotFound(f"id {args.id!r} not found in {args.input}")
    ca = args.time_model == "ca"
    chunked = prepare(match[0], args.seg_ms, require_timestamps=ca)
    timed = assign_ca_times(chunked) if ca else assign_nca_times(chunked)
    _, rows = atd(timed)
    sys.stdout.write(inspect_to_tsv(rows))
    return EXIT_OK


COMMANDS = {"evaluate": cmd_evaluate, "simulate": cmd_simulate, "inspect": cmd_inspect}


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, InvalidRange) as exc:
        print(f"simul-latency: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"simul-latency: error: file not found: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, LatencyError) as exc:
        print(f"simul-latency: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"simul-latency: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
