"""Session traces, chunk structure and end-time assignment.

A session is the READ/WRITE action sequence an incremental translation
agent produced for one sentence. Everything downstream works on the
chunked view: chunk ``c`` pairs the maximal run of READs preceding the
``c``-th maximal run of WRITEs with that WRITE run.

Text sides are counted in tokens. Speech sides carry durations in
milliseconds and are cut into fixed-length sub-segments (300 ms by
default) before any counting happens.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence, Tuple, Union

from .errors import (
    EmptyTrace,
    MissingTimestamps,
    MixedUnits,
    NonMonotonicTimestamps,
    NonPositiveSegmentLength,
    TraceError,
)

DEFAULT_SEG_MS = 300.0

Unit = Union[str, float]


class Modality(str, Enum):
    TEXT = "text"
    SPEECH = "speech"


class Action(str, Enum):
    READ = "r"
    WRITE = "w"


class TimeUnit(str, Enum):
    STEP = "step"
    MILLISECOND = "ms"


@dataclass(frozen=True)
class Event:
    """One READ or WRITE.

    Text events carry ``tok`` (whitespace-separated tokens are split during
    validation), speech events carry ``ms``. ``ts`` is the wall-clock end
    time of the event and is only needed for computation-aware timing.
    """

    action: Action
    tok: Optional[str] = None
    ms: Optional[float] = None
    ts: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "action", Action(self.action))

    @property
    def is_read(self) -> bool:
        return self.action is Action.READ


def R(tok: Optional[str] = None, *, ms: Optional[float] = None, ts: Optional[float] = None) -> Event:
    return Event(Action.READ, tok=tok, ms=ms, ts=ts)


def W(tok: Optional[str] = None, *, ms: Optional[float] = None, ts: Optional[float] = None) -> Event:
    return Event(Action.WRITE, tok=tok, ms=ms, ts=ts)


@dataclass(frozen=True)
class SessionTrace:
    id: str
    events: Tuple[Event, ...]
    src: Modality = Modality.TEXT
    tgt: Modality = Modality.TEXT
    reference: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        object.__setattr__(self, "src", Modality(self.src))
        object.__setattr__(self, "tgt", Modality(self.tgt))
        if self.reference is not None:
            object.__setattr__(self, "reference", tuple(self.reference))

    @property
    def has_timestamps(self) -> bool:
        return all(e.ts is not None for e in self.events)

    def actions(self) -> str:
        return "".join(e.action.value for e in self.events)

    @classmethod
    def from_actions(cls, actions: str, id: str = "session", **kwargs) -> "SessionTrace":
        """Build a text trace from a string such as ``"RRRWRW"``.

        Tokens are positional placeholders (``s1``, ``t1``, ...).
        """
        events = []
        n_read = n_write = 0
        for ch in actions.replace(" ", "").lower():
            if ch == "r":
                n_read += 1
                events.append(R(f"s{n_read}"))
            elif ch == "w":
                n_write += 1
                events.append(W(f"t{n_write}"))
            else:
                raise TraceError(f"unknown action {ch!r}")
        return cls(id=id, events=tuple(events), **kwargs)


def _side_modality(trace: SessionTrace, event: Event) -> Modality:
    return trace.src if event.is_read else trace.tgt


def validate_trace(raw: SessionTrace, require_timestamps: bool = False) -> SessionTrace:
    """Check a trace and return its canonical form.

    Canonical text events hold exactly one token; an event carrying several
    whitespace-separated tokens is split in place and every piece keeps the
    original timestamp.
    """
    if not raw.events:
        raise EmptyTrace(f"{raw.id}: trace has no events")

    last_ts = -math.inf
    out = []
    for i, ev in enumerate(raw.events):
        if ev.ts is not None:
            if ev.ts < 0 or math.isnan(ev.ts):
                raise TraceError(f"{raw.id}: event {i} has negative timestamp")
            if ev.ts < last_ts:
                raise NonMonotonicTimestamps(
                    f"{raw.id}: event {i} ts={ev.ts} precedes previous ts={last_ts}"
                )
            last_ts = ev.ts
        elif require_timestamps:
            raise MissingTimestamps(f"{raw.id}: event {i} has no timestamp")

        if _side_modality(raw, ev) is Modality.SPEECH:
            if ev.ms is None:
                raise MixedUnits(f"{raw.id}: speech event {i} has no duration in ms")
            if ev.ms < 0 or math.isnan(ev.ms):
                raise TraceError(f"{raw.id}: event {i} has negative duration")
            out.append(ev)
            continue

        if ev.ms is not None and ev.tok is None:
            raise MixedUnits(f"{raw.id}: text event {i} carries a duration instead of a token")
        if ev.tok is None:
            out.append(ev)
            continue
        pieces = ev.tok.split()
        if not pieces:
            raise TraceError(f"{raw.id}: event {i} has an empty token")
        out.extend(replace(ev, tok=p) for p in pieces)

    return replace(raw, events=tuple(out))


@dataclass(frozen=True)
class Chunk:
    """An (input chunk, output chunk) pair.

    ``src_units``/``tgt_units`` are the sub-segments on each side: tokens
    for text, durations in ms for speech.
    """

    reads: Tuple[Event, ...]
    writes: Tuple[Event, ...]
    src_units: Tuple[Unit, ...]
    tgt_units: Tuple[Unit, ...]


@dataclass(frozen=True)
class ChunkedSession:
    id: str
    chunks: Tuple[Chunk, ...]
    trailing_reads: Tuple[Event, ...]
    trailing_units: Tuple[Unit, ...]
    src: Modality = Modality.TEXT
    tgt: Modality = Modality.TEXT
    reference: Optional[Tuple[str, ...]] = None
    # None while speech sides still hold one unit per raw event
    seg_ms: Optional[float] = None
    cum_in: Tuple[int, ...] = field(init=False, repr=False)
    cum_out: Tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self):
        cum_in, cum_out = [0], [0]
        for ch in self.chunks:
            cum_in.append(cum_in[-1] + len(ch.src_units))
            cum_out.append(cum_out[-1] + len(ch.tgt_units))
        object.__setattr__(self, "cum_in", tuple(cum_in))
        object.__setattr__(self, "cum_out", tuple(cum_out))

    @property
    def is_segmented(self) -> bool:
        has_speech = Modality.SPEECH in (self.src, self.tgt)
        return self.seg_ms is not None or not has_speech

    @property
    def n_chunks(self) -> int:
        return len(self.chunks)

    @property
    def src_len(self) -> int:
        """|x|, trailing reads included."""
        return self.cum_in[-1] + len(self.trailing_units)

    @property
    def tgt_len(self) -> int:
        return self.cum_out[-1]

    def chunk_sizes(self) -> list:
        return [(len(c.src_units), len(c.tgt_units)) for c in self.chunks]

    def chunk_index(self) -> Tuple[int, ...]:
        """Chunk number c(t) (1-based) for every output sub-segment."""
        idx = []
        for c, ch in enumerate(self.chunks, start=1):
            idx.extend([c] * len(ch.tgt_units))
        return tuple(idx)


def _units(events: Sequence[Event], modality: Modality) -> Tuple[Unit, ...]:
    if modality is Modality.SPEECH:
        return tuple(float(e.ms) for e in events)
    return tuple(e.tok if e.tok is not None else "" for e in events)


def derive_chunks(trace: SessionTrace) -> ChunkedSession:
    """Group a validated trace into (read run, write run) chunks.

    A leading write run becomes chunk 1 with an empty input chunk. Reads
    after the last write belong to no chunk.
    """
    chunks = []
    reads: list = []
    writes: list = []
    for ev in trace.events:
        if ev.is_read:
            if writes:
                chunks.append((tuple(reads), tuple(writes)))
                reads, writes = [], []
            reads.append(ev)
        else:
            writes.append(ev)
    if writes:
        chunks.append((tuple(reads), tuple(writes)))
        reads = []

    return ChunkedSession(
        id=trace.id,
        chunks=tuple(
            Chunk(r, w, _units(r, trace.src), _units(w, trace.tgt)) for r, w in chunks
        ),
        trailing_reads=tuple(reads),
        trailing_units=_units(reads, trace.src),
        src=trace.src,
        tgt=trace.tgt,
        reference=trace.reference,
    )


def split_duration(total_ms: float, seg_ms: float = DEFAULT_SEG_MS) -> Tuple[float, ...]:
    """Cut ``total_ms`` into ``seg_ms`` pieces plus a shorter remainder."""
    if not seg_ms > 0:
        raise NonPositiveSegmentLength(f"segment length must be positive, got {seg_ms}")
    if total_ms <= 0:
        return ()
    n_full = int(total_ms // seg_ms)
    rest = total_ms - n_full * seg_ms
    pieces = [float(seg_ms)] * n_full
    if rest > 0:
        pieces.append(rest)
    return tuple(pieces)


def subsegment_speech(chunked: ChunkedSession, seg_ms: float = DEFAULT_SEG_MS) -> ChunkedSession:
    """Re-cut every speech chunk into fixed-length sub-segments.

    Each chunk is cut from its own start, so a chunk of 1000 ms becomes
    300/300/300/100. Text sides pass through untouched. The cut is always
    recomputed from the raw events, so applying it twice is harmless.
    """
    if not seg_ms > 0:
        raise NonPositiveSegmentLength(f"segment length must be positive, got {seg_ms}")

    def cut(events, modality, current):
        if modality is not Modality.SPEECH:
            return current
        return split_duration(sum(float(e.ms) for e in events), seg_ms)

    chunks = tuple(
        replace(
            ch,
            src_units=cut(ch.reads, chunked.src, ch.src_units),
            tgt_units=cut(ch.writes, chunked.tgt, ch.tgt_units),
        )
        for ch in chunked.chunks
    )
    return replace(
        chunked,
        chunks=chunks,
        trailing_units=cut(chunked.trailing_reads, chunked.src, chunked.trailing_units),
        seg_ms=float(seg_ms),
    )


def ensure_segmented(chunked: ChunkedSession) -> ChunkedSession:
    return chunked if chunked.is_segmented else subsegment_speech(chunked)


def delay_function_g(chunked: ChunkedSession) -> Tuple[int, ...]:
    """g(tau) for tau = 1..|y|: source units read before each output unit.

    Returned as a tuple; ``g[tau - 1]`` is g(tau).
    """
    chunked = ensure_segmented(chunked)
    g = []
    for c, ch in enumerate(chunked.chunks, start=1):
        g.extend([chunked.cum_in[c]] * len(ch.tgt_units))
    return tuple(g)


@dataclass(frozen=True)
class TimedSession:
    """End times T(x_i) and T(y_t) under one time model.

    ``in_end[i - 1]`` is T(x_i) for every input sub-segment, trailing ones
    included; ``out_end[t - 1]`` is T(y_t).
    """

    chunking: ChunkedSession
    in_end: Tuple[float, ...]
    out_end: Tuple[float, ...]
    time_unit: TimeUnit


def assign_nca_times(chunked: ChunkedSession) -> TimedSession:
    """Step clock, no computation time.

    Input sub-segment i ends at step i. Output is sequential and the first
    output of chunk c waits for the last input of chunk c; reading goes on
    in parallel with writing.
    """
    chunked = ensure_segmented(chunked)
    in_end = tuple(range(1, chunked.src_len + 1))
    out_end = []
    prev = 0
    for c, ch in enumerate(chunked.chunks, start=1):
        for _ in ch.tgt_units:
            prev = max(prev, chunked.cum_in[c]) + 1
            out_end.append(prev)
    return TimedSession(chunked, in_end, tuple(out_end), TimeUnit.STEP)


def _require_ts(chunked: ChunkedSession, events: Sequence[Event]) -> None:
    if any(e.ts is None for e in events):
        raise MissingTimestamps(
            f"{chunked.id}: computation-aware timing needs a timestamp on every event"
        )


def _playback_ends(writes: Sequence[Event], units: Sequence[float], free_at: float):
    """Map sub-segment boundaries of one speech output chunk to wall-clock.

    Each write event's audio starts playing once it has been generated
    (its ts) and the previous audio has finished. Returns the end times of
    the sub-segments and the time the channel becomes free.
    """
    schedule = []  # (offset_start, offset_end, wall_start)
    offset = 0.0
    for ev in writes:
        start = max(float(ev.ts), free_at)
        schedule.append((offset, offset + ev.ms, start))
        offset += ev.ms
        free_at = start + ev.ms

    ends = []
    pos = 0.0
    j = 0
    for u in units:
        pos += u
        while j < len(schedule) - 1 and pos > schedule[j][1]:
            j += 1
        lo, _, start = schedule[j]
        ends.append(start + (pos - lo))
    return ends, free_at


def assign_ca_times(
    chunked: ChunkedSession,
    src_mod: Optional[Modality] = None,
    tgt_mod: Optional[Modality] = None,
) -> TimedSession:
    """Wall-clock times in ms, computation time included.

    Speech input ends come from the cumulative audio offset; text input
    ends are the READ timestamps. Text output ends are the WRITE
    timestamps (output duration is ignored). Speech output is played
    back sequentially: a chunk starts playing when it has been emitted and
    the previous chunk has finished playing.
    """
    chunked = ensure_segmented(chunked)
    src_mod = Modality(src_mod or chunked.src)
    tgt_mod = Modality(tgt_mod or chunked.tgt)

    read_runs = [ch.reads for ch in chunked.chunks] + [chunked.trailing_reads]
    unit_runs = [ch.src_units for ch in chunked.chunks] + [chunked.trailing_units]
    in_end: list = []
    if src_mod is Modality.SPEECH:
        offset = 0.0
        for reads, units in zip(read_runs, unit_runs):
            pos = offset
            for u in units:
                pos += u
                in_end.append(pos)
            offset += sum(float(e.ms) for e in reads)
    else:
        for reads in read_runs:
            _require_ts(chunked, reads)
            in_end.extend(float(e.ts) for e in reads)

    out_end: list = []
    free_at = 0.0
    for ch in chunked.chunks:
        _require_ts(chunked, ch.writes)
        if tgt_mod is Modality.SPEECH:
            ends, free_at = _playback_ends(ch.writes, ch.tgt_units, free_at)
            out_end.extend(ends)
        else:
            out_end.extend(float(e.ts) for e in ch.writes)

    return TimedSession(chunked, tuple(in_end), tuple(out_end), TimeUnit.MILLISECOND)
