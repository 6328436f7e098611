"""Synthetic policies, simulation sweeps and a brute-force ATD oracle."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, TextIO, Tuple

from .errors import InvalidK, InvalidLengths, InvalidRange
from .metrics import atd, average_cw, average_lagging, average_proportion
from .trace import (
    DEFAULT_SEG_MS,
    Action,
    Modality,
    SessionTrace,
    assign_nca_times,
    derive_chunks,
    split_duration,
    validate_trace,
)
from .report import fmt_float


def _check_lengths(src_len: int, tgt_len: int, k: int) -> None:
    if k < 1:
        raise InvalidK(f"k must be >= 1, got {k}")
    if src_len < 1 or tgt_len < 1:
        raise InvalidLengths(f"lengths must be >= 1, got {src_len}/{tgt_len}")


def gen_wait_k(src_len: int, tgt_len: int, k: int) -> SessionTrace:
    """Read k tokens, then alternate WRITE and READ.

    g(tau) = min(tau + k - 1, src_len). Outputs left over once the source
    is exhausted are written back to back; reads left over once the
    output is done trail at the end.
    """
    _check_lengths(src_len, tgt_len, k)
    actions = []
    read = 0
    for tau in range(1, tgt_len + 1):
        need = min(tau + k - 1, src_len)
        actions.append("r" * (need - read))
        read = need
        actions.append("w")
    actions.append("r" * (src_len - read))
    return SessionTrace.from_actions("".join(actions), id=f"wait-{k}_{src_len}-{tgt_len}")


def gen_chunk_k(src_len: int, tgt_len: int, k: int) -> SessionTrace:
    """Alternate runs of k READs and k WRITEs.

    The last input chunk is whatever is left of the source; once the
    source is exhausted every remaining output goes into one final chunk.
    """
    _check_lengths(src_len, tgt_len, k)
    actions = []
    read = written = 0
    while written < tgt_len:
        n_read = min(k, src_len - read)
        read += n_read
        n_write = tgt_len - written if read == src_len else min(k, tgt_len - written)
        written += n_write
        actions.append("r" * n_read + "w" * n_write)
    actions.append("r" * (src_len - read))
    return SessionTrace.from_actions("".join(actions), id=f"chunk-{k}_{src_len}-{tgt_len}")


def gen_two_segment(in_lens: Sequence[int], out_lens: Sequence[int]) -> SessionTrace:
    """Two input segments, each followed by its own output segment.

    An empty first output merges both input segments into one chunk; an
    empty second output leaves the second input segment as trailing reads.
    """
    if len(in_lens) != 2 or len(out_lens) != 2:
        raise InvalidLengths("two-segment policy needs exactly two input and two output lengths")
    if min(in_lens) < 1 or min(out_lens) < 0 or sum(out_lens) == 0:
        raise InvalidLengths(f"invalid two-segment lengths {list(in_lens)} / {list(out_lens)}")
    actions = "r" * in_lens[0] + "w" * out_lens[0] + "r" * in_lens[1] + "w" * out_lens[1]
    name = f"two-segment_({in_lens[0]}+{in_lens[1]})-({out_lens[0]}+{out_lens[1]})"
    return SessionTrace.from_actions(actions, id=name)


def _unit_actions(trace: SessionTrace, seg_ms: float) -> List[Action]:
    """Flatten a trace into one action per sub-segment."""
    units: List[Action] = []
    run: list = []

    def flush():
        if not run:
            return
        modality = trace.src if run[0].is_read else trace.tgt
        if modality is Modality.SPEECH:
            count = len(split_duration(sum(e.ms for e in run), seg_ms))
        else:
            count = len(run)
        units.extend([run[0].action] * count)
        run.clear()

    for ev in trace.events:
        if run and ev.action is not run[-1].action:
            flush()
        run.append(ev)
    flush()
    return units


def oracle_timeline_atd(trace: SessionTrace, seg_ms: float = DEFAULT_SEG_MS) -> float:
    """ATD by explicit step-by-step simulation of the non-computation-aware timeline.

    Inputs arrive one per tick. At every tick the next pending output is
    emitted if every input read before it has arrived and the previous
    output is done. Correspondences come from an input cursor that moves
    one step per output, restarts at each new output chunk behind any
    outputs still owed from earlier chunks, and never passes the inputs
    read so far.
    """
    units = _unit_actions(validate_trace(trace), seg_ms)

    # cursor walk: matched input index and gate for every output
    matched: List[int] = []
    gates: List[int] = []
    reads = writes = 0
    run_start_reads = 0
    cursor = 0
    prev: Optional[Action] = None
    for act in units:
        if act is Action.READ:
            if prev is not Action.READ:
                run_start_reads = reads
            reads += 1
        else:
            if prev is not Action.WRITE:
                owed = max(writes - run_start_reads, 0)
                cursor = writes - owed
            cursor += 1
            matched.append(cursor if cursor <= reads else reads)
            gates.append(reads)
            writes += 1
        prev = act

    if not gates:
        raise InvalidLengths(f"{trace.id}: no output to measure")

    # tick simulation
    emitted: List[int] = []
    tick = 0
    busy_until = 0
    while len(emitted) < len(gates):
        tick += 1
        arrived = tick - 1  # inputs 1..tick-1 have ended before this tick
        nxt = len(emitted)
        if gates[nxt] <= arrived and busy_until < tick:
            emitted.append(tick)
            busy_until = tick

    total = 0
    for t_out, src_idx in zip(emitted, matched):
        total += t_out - src_idx  # input i arrives at tick i, x_0 at 0
    return total / len(emitted)


# -- sweeps ----------------------------------------------------------------

CASES = {
    "case1": (40, 40),
    "case2": (40, 100),
    "case3": (40, 20),
}
DEFAULT_RANGES = {
    "case1": (1, 40),
    "case2": (1, 40),
    "case3": (1, 40),
    "case4": (1, 60),
    "case5": (1, 60),
}
GENERATORS = {"wait": gen_wait_k, "chunk": gen_chunk_k}


@dataclass(frozen=True)
class SweepRow:
    param: int
    policy: str
    AL: float
    ATD: float
    AP: float
    CW: float


@dataclass
class SweepResult:
    case: str
    rows: List[SweepRow]

    def column(self, name: str, policy: Optional[str] = None) -> List[float]:
        return [getattr(r, name) for r in self.rows if policy is None or r.policy == policy]

    def params(self, policy: Optional[str] = None) -> List[int]:
        return self.column("param", policy)


def parse_range(text: str) -> Tuple[int, int]:
    """``"1..40"`` -> (1, 40); a single number is a one-value range."""
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            lo_i, hi_i = int(lo), int(hi)
        else:
            lo_i = hi_i = int(text)
    except ValueError:
        raise InvalidRange(f"cannot parse range {text!r}") from None
    if lo_i < 1 or hi_i < lo_i:
        raise InvalidRange(f"invalid range {lo_i}..{hi_i}")
    return lo_i, hi_i


def case_trace(case: str, param: int, policy: str = "chunk") -> SessionTrace:
    if case in CASES:
        if policy not in GENERATORS:
            raise InvalidRange(f"unknown policy {policy!r}")
        src_len, tgt_len = CASES[case]
        return GENERATORS[policy](src_len, tgt_len, param)
    if case == "case4":
        return gen_two_segment([20, 20], [param, 20])
    if case == "case5":
        return gen_two_segment([20, 20], [20, param])
    raise InvalidRange(f"unknown case {case!r}")


def _score(trace: SessionTrace) -> Tuple[float, float, float, float]:
    chunked = derive_chunks(validate_trace(trace))
    atd_value, _ = atd(assign_nca_times(chunked))
    return average_lagging(chunked), atd_value, average_proportion(chunked), average_cw(chunked)


def sweep(
    case: str,
    policies: Iterable[str] = ("wait", "chunk"),
    param_range: Optional[Tuple[int, int]] = None,
) -> SweepResult:
    """Score AL, NCA ATD, AP and CW for every parameter value of a case.

    Cases 1-3 sweep k for wait-k/chunk-k over 40-40, 40-100 and 40-20
    token pairs. Cases 4 and 5 use a chunk-20 split of a 20+20 input and
    sweep the length of the first or second output segment; ``policies``
    is ignored there.
    """
    if case not in DEFAULT_RANGES:
        raise InvalidRange(f"unknown case {case!r}")
    lo, hi = param_range or DEFAULT_RANGES[case]
    if lo < 1 or hi < lo:
        raise InvalidRange(f"invalid range {lo}..{hi}")
    policies = list(policies) if case in CASES else ["two-segment"]
    for p in policies:
        if case in CASES and p not in GENERATORS:
            raise InvalidRange(f"unknown policy {p!r}")

    rows = []
    for param in range(lo, hi + 1):
        for policy in policies:
            al, atd_value, ap, cw = _score(case_trace(case, param, policy))
            rows.append(SweepRow(param, policy, al, atd_value, ap, cw))
    return SweepResult(case, rows)


def write_sweep_csv(result: SweepResult, out: TextIO, with_ap_cw: bool = False) -> None:
    header = ["param", "policy", "AL", "ATD"] + (["AP", "CW"] if with_ap_cw else [])
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    for r in result.rows:
        row = [r.param, r.policy, fmt_float(r.AL), fmt_float(r.ATD)]
        if with_ap_cw:
            row += [fmt_float(r.AP), fmt_float(r.CW)]
        writer.writerow(row)


def sweep_csv(result: SweepResult, with_ap_cw: bool = False) -> str:
    buf = io.StringIO()
    write_sweep_csv(result, buf, with_ap_cw)
    return buf.getvalue()
