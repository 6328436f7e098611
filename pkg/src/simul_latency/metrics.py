"""Sentence-level latency metrics and corpus aggregation.

CW, AP and AL only look at g(tau); ATD looks at end times and therefore
takes a :class:`TimedSession`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import (
    DivisionByZero,
    EmptyCorpus,
    EmptyOutput,
    EmptySide,
    LatencyError,
    MissingReference,
)
from .trace import (
    DEFAULT_SEG_MS,
    ChunkedSession,
    SessionTrace,
    TimedSession,
    assign_ca_times,
    assign_nca_times,
    delay_function_g,
    derive_chunks,
    ensure_segmented,
    subsegment_speech,
    validate_trace,
)

METRIC_NAMES = ("AL", "LAAL", "AP", "CW", "ATD")


class LatencyRatioMode(str, Enum):
    OUTPUT = "output"
    REFERENCE = "reference"
    LAAL = "laal"


class TimeModel(str, Enum):
    NCA = "nca"
    CA = "ca"


def _check_sides(chunked: ChunkedSession) -> None:
    if chunked.tgt_len == 0:
        raise EmptyOutput(f"{chunked.id}: empty output")
    if chunked.src_len == 0:
        raise EmptySide(f"{chunked.id}: empty input")


def average_cw(chunked: ChunkedSession) -> float:
    """|x| over the number of output positions where g increases."""
    chunked = ensure_segmented(chunked)
    _check_sides(chunked)
    g = delay_function_g(chunked)
    waits = sum(1 for prev, cur in zip((0,) + g, g) if cur > prev)
    if waits == 0:
        raise DivisionByZero(f"{chunked.id}: no output follows a read")
    return chunked.src_len / waits


def average_proportion(chunked: ChunkedSession) -> float:
    chunked = ensure_segmented(chunked)
    _check_sides(chunked)
    g = delay_function_g(chunked)
    return sum(g) / (chunked.src_len * chunked.tgt_len)


def length_ratio(chunked: ChunkedSession, mode: LatencyRatioMode = LatencyRatioMode.OUTPUT) -> float:
    mode = LatencyRatioMode(mode)
    out_len = chunked.tgt_len
    if mode is LatencyRatioMode.OUTPUT:
        num = out_len
    else:
        if not chunked.reference:
            raise MissingReference(f"{chunked.id}: ratio mode {mode.value!r} needs a reference")
        ref_len = len(chunked.reference)
        num = ref_len if mode is LatencyRatioMode.REFERENCE else max(out_len, ref_len)
    return num / chunked.src_len


def average_lagging(
    chunked: ChunkedSession, mode: LatencyRatioMode = LatencyRatioMode.OUTPUT
) -> float:
    """Average lagging behind an ideal policy that keeps pace with ratio r.

    The sum is cut off at the first output emitted after the whole source
    was read. If the source is never fully read before the last output,
    every output is summed. The result can be negative.
    """
    chunked = ensure_segmented(chunked)
    _check_sides(chunked)
    r = length_ratio(chunked, mode)
    g = delay_function_g(chunked)
    src_len = chunked.src_len
    cutoff = next((tau for tau, gv in enumerate(g, start=1) if gv == src_len), len(g))
    lag = sum(g[tau - 1] - (tau - 1) / r for tau in range(1, cutoff + 1))
    return lag / cutoff


@dataclass(frozen=True)
class TokenCorrespondence:
    """Which input sub-segment output y_t is measured against."""

    t: int
    c: int
    s: int
    a: int
    t_out: float
    t_in: float

    @property
    def delay(self) -> float:
        return self.t_out - self.t_in


def correspondences(chunked: ChunkedSession) -> List[Tuple[int, int, int, int]]:
    """(t, c(t), s(t), a(t)) for every output sub-segment."""
    cum_in, cum_out = chunked.cum_in, chunked.cum_out
    rows = []
    for t, c in enumerate(chunked.chunk_index(), start=1):
        s = t - max(cum_out[c - 1] - cum_in[c - 1], 0)
        a = s if s <= cum_in[c] else cum_in[c]
        rows.append((t, c, s, a))
    return rows


def atd(timed: TimedSession) -> Tuple[float, List[TokenCorrespondence]]:
    """Average token delay and the per-token correspondences behind it.

    T(x_0) is taken as 0 for outputs of a leading write chunk.
    """
    chunked = timed.chunking
    if chunked.tgt_len == 0:
        raise EmptyOutput(f"{chunked.id}: empty output")
    rows = []
    for t, c, s, a in correspondences(chunked):
        t_in = timed.in_end[a - 1] if a > 0 else 0
        rows.append(TokenCorrespondence(t, c, s, a, timed.out_end[t - 1], t_in))
    total = sum(row.t_out - row.t_in for row in rows)
    return total / len(rows), rows


# -- per-sentence and corpus evaluation ------------------------------------


@dataclass
class SentenceResult:
    id: str
    values: Dict[str, float] = field(default_factory=dict)
    delays: List[float] = field(default_factory=list)
    error: Optional[str] = None
    line_no: Optional[int] = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class MetricReport:
    sentences: List[SentenceResult]
    corpus: Dict[str, float]
    n: int
    excluded: int
    metrics: Tuple[str, ...] = METRIC_NAMES

    @property
    def per_sentence(self) -> Dict[str, Dict[str, float]]:
        return {s.id: dict(s.values) for s in self.sentences if s.ok}


def prepare(trace: SessionTrace, seg_ms: float = DEFAULT_SEG_MS, require_timestamps: bool = False) -> ChunkedSession:
    trace = validate_trace(trace, require_timestamps=require_timestamps)
    return subsegment_speech(derive_chunks(trace), seg_ms)


def score_session(
    trace: SessionTrace,
    metrics: Sequence[str] = ("AL", "AP", "CW", "ATD"),
    time_model: TimeModel = TimeModel.NCA,
    ratio: LatencyRatioMode = LatencyRatioMode.OUTPUT,
    seg_ms: float = DEFAULT_SEG_MS,
) -> SentenceResult:
    """Evaluate one trace; any metric error is recorded, not raised."""
    result = SentenceResult(id=trace.id)
    time_model = TimeModel(time_model)
    try:
        chunked = prepare(trace, seg_ms, require_timestamps=time_model is TimeModel.CA)
        for name in metrics:
            name = name.upper()
            if name == "AL":
                result.values["AL"] = average_lagging(chunked, ratio)
            elif name == "LAAL":
                result.values["LAAL"] = average_lagging(chunked, LatencyRatioMode.LAAL)
            elif name == "AP":
                result.values["AP"] = average_proportion(chunked)
            elif name == "CW":
                result.values["CW"] = average_cw(chunked)
            elif name == "ATD":
                timed = assign_nca_times(chunked) if time_model is TimeModel.NCA else assign_ca_times(chunked)
                value, rows = atd(timed)
                result.values["ATD"] = value
                result.delays = [r.delay for r in rows]
            else:
                raise ValueError(f"unknown metric {name!r}")
    except LatencyError as exc:
        result.values.clear()
        result.delays = []
        result.error = f"{type(exc).__name__}: {exc}"
    return result


def corpus_aggregate(results: Sequence[SentenceResult], metrics: Optional[Sequence[str]] = None) -> MetricReport:
    """Unweighted mean of every metric over the sentences that scored cleanly.

    A sentence with any error is left out of every mean and counted in
    ``excluded``.
    """
    if not results:
        raise EmptyCorpus("no sentences to aggregate")
    good = [r for r in results if r.ok]
    if metrics is None:
        metrics = tuple(m for m in METRIC_NAMES if any(m in r.values for r in good))
    metrics = tuple(m.upper() for m in metrics)
    corpus = {}
    for m in metrics:
        vals = [r.values[m] for r in good if m in r.values]
        corpus[m] = sum(vals) / len(vals) if vals else float("nan")
    return MetricReport(
        sentences=list(results),
        corpus=corpus,
        n=len(good),
        excluded=len(results) - len(good),
        metrics=metrics,
    )
