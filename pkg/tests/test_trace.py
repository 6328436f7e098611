import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simul_latency.errors import (
    EmptyTrace,
    MissingTimestamps,
    MixedUnits,
    NonMonotonicTimestamps,
    NonPositiveSegmentLength,
)
from simul_latency.policy import gen_chunk_k, gen_wait_k
from simul_latency.trace import (
    Modality,
    R,
    SessionTrace,
    TimeUnit,
    W,
    assign_ca_times,
    assign_nca_times,
    delay_function_g,
    derive_chunks,
    split_duration,
    subsegment_speech,
    validate_trace,
)


def chunked(actions):
    return derive_chunks(validate_trace(SessionTrace.from_actions(actions)))


action_strings = st.lists(st.sampled_from("rw"), min_size=1, max_size=30).map("".join)


# -- validate_trace ---------------------------------------------------------


def test_validate_accepts_canonical_trace():
    trace = SessionTrace("a", (R("x", ts=1), R("y", ts=2), W("z", ts=3)))
    assert validate_trace(trace) == trace


def test_validate_rejects_decreasing_timestamps():
    trace = SessionTrace("a", (W("z", ts=5), R("x", ts=3)))
    with pytest.raises(NonMonotonicTimestamps):
        validate_trace(trace)


def test_validate_splits_multi_token_write():
    trace = SessionTrace("a", (R("x"), W("a b")))
    out = validate_trace(trace)
    assert [(e.action.value, e.tok) for e in out.events] == [("r", "x"), ("w", "a"), ("w", "b")]


def test_split_pieces_keep_timestamp():
    out = validate_trace(SessionTrace("a", (R("x", ts=1), W("a b c", ts=7))))
    assert [e.ts for e in out.events] == [1, 7, 7, 7]


def test_validate_empty():
    with pytest.raises(EmptyTrace):
        validate_trace(SessionTrace("a", ()))


def test_validate_mixed_units():
    speech_read_without_ms = SessionTrace("a", (R("x"), W("y")), src=Modality.SPEECH)
    with pytest.raises(MixedUnits):
        validate_trace(speech_read_without_ms)
    text_read_with_ms = SessionTrace("b", (R(ms=300), W("y")))
    with pytest.raises(MixedUnits):
        validate_trace(text_read_with_ms)


def test_validate_missing_timestamps_only_when_requested():
    trace = SessionTrace("a", (R("x", ts=1), W("y")))
    validate_trace(trace)
    with pytest.raises(MissingTimestamps):
        validate_trace(trace, require_timestamps=True)


# -- derive_chunks -----------------------------------------------------------


def test_chunks_maximal_runs():
    assert chunked("RRRWWWRW").chunk_sizes() == [(3, 3), (1, 1)]


def test_chunks_read_all_then_write():
    assert chunked("RRRRRRRWWWWWWW").chunk_sizes() == [(7, 7)]


def test_chunks_wait3():
    c = chunked("RRRWRWRWRWRWWW")
    assert c.chunk_sizes() == [(3, 1), (1, 1), (1, 1), (1, 1), (1, 3)]
    assert c.n_chunks == 5
    assert c.cum_in == (0, 3, 4, 5, 6, 7)
    assert c.cum_out == (0, 1, 2, 3, 4, 7)


def test_trailing_reads_belong_to_no_chunk():
    c = chunked("RWWRRR")
    assert c.chunk_sizes() == [(1, 2)]
    assert c.src_len == 4
    assert len(c.trailing_reads) == 3


def test_leading_write_run_has_empty_input_chunk():
    c = chunked("WWRW")
    assert c.chunk_sizes() == [(0, 2), (1, 1)]
    assert delay_function_g(c) == (0, 0, 1)


@given(action_strings)
def test_every_output_in_exactly_one_chunk(actions):
    c = chunked(actions)
    assert len(c.chunk_index()) == actions.count("w") == c.tgt_len
    assert c.src_len == actions.count("r")
    assert c.cum_in[0] == c.cum_out[0] == 0
    assert list(c.cum_in) == sorted(c.cum_in)
    assert list(c.cum_out) == sorted(c.cum_out)


# -- g ---------------------------------------------------------------------


def test_g_wait3():
    assert delay_function_g(derive_chunks(gen_wait_k(7, 7, 3))) == (3, 4, 5, 6, 7, 7, 7)


def test_g_chunk3():
    assert delay_function_g(derive_chunks(gen_chunk_k(7, 7, 3))) == (3, 3, 3, 6, 6, 6, 7)


def test_g_read_all():
    assert delay_function_g(chunked("R" * 5 + "W" * 4)) == (5, 5, 5, 5)


@given(action_strings)
def test_g_monotone(actions):
    g = delay_function_g(chunked(actions))
    assert all(a <= b for a, b in zip(g, g[1:]))


# -- speech sub-segments ------------------------------------------------------


@pytest.mark.parametrize(
    "total, expected",
    [(1000, (300, 300, 300, 100)), (300, (300,)), (0, ()), (299.5, (299.5,))],
)
def test_split_duration(total, expected):
    assert split_duration(total, 300) == expected


def test_split_duration_rejects_bad_length():
    with pytest.raises(NonPositiveSegmentLength):
        split_duration(100, 0)


@given(st.integers(0, 100_000), st.integers(1, 2000))
def test_split_duration_conserves_total(total, seg):
    pieces = split_duration(total, seg)
    assert sum(pieces) == total
    assert all(p == seg for p in pieces[:-1])
    assert all(0 < p <= seg for p in pieces)


def speech_session():
    trace = SessionTrace(
        "sp",
        (R(ms=600), R(ms=400), W("a"), W("b"), R(ms=0), W("c"), R(ms=350)),
        src=Modality.SPEECH,
    )
    return derive_chunks(validate_trace(trace))


def test_subsegment_speech_chunks():
    c = subsegment_speech(speech_session(), 300)
    assert [ch.src_units for ch in c.chunks] == [(300.0, 300.0, 300.0, 100.0), ()]
    assert c.trailing_units == (300.0, 50.0)
    assert c.cum_in == (0, 4, 4)
    assert c.src_len == 6


def test_subsegment_speech_is_idempotent():
    once = subsegment_speech(speech_session())
    assert subsegment_speech(once) == once


def test_subsegment_rejects_bad_length():
    with pytest.raises(NonPositiveSegmentLength):
        subsegment_speech(speech_session(), -1)


# -- NCA times --------------------------------------------------------------


@pytest.mark.parametrize("gen", [gen_wait_k, gen_chunk_k])
def test_nca_wait3_chunk3(gen):
    timed = assign_nca_times(derive_chunks(gen(7, 7, 3)))
    assert timed.out_end == (4, 5, 6, 7, 8, 9, 10)
    assert timed.in_end == (1, 2, 3, 4, 5, 6, 7)
    assert timed.time_unit is TimeUnit.STEP


def test_nca_read_all_40():
    timed = assign_nca_times(chunked("R" * 40 + "W" * 40))
    assert timed.out_end == tuple(range(41, 81))


@given(action_strings)
def test_nca_recurrence(actions):
    c = chunked(actions)
    timed = assign_nca_times(c)
    prev = 0
    for t, cidx in enumerate(c.chunk_index(), start=1):
        out = timed.out_end[t - 1]
        assert out >= c.cum_in[cidx] + 1
        if prev >= c.cum_in[cidx]:
            assert out == prev + 1
        prev = out
    assert all(a < b for a, b in zip(timed.out_end, timed.out_end[1:]))
    assert all(isinstance(x, int) and x > 0 for x in timed.in_end + timed.out_end)


# -- CA times ---------------------------------------------------------------


def test_ca_text_target_uses_write_ts():
    trace = SessionTrace("a", (R("x", ts=500), W("y", ts=1200)))
    timed = assign_ca_times(derive_chunks(validate_trace(trace)))
    assert timed.out_end == (1200.0,)
    assert timed.in_end == (500.0,)
    assert timed.time_unit is TimeUnit.MILLISECOND


def test_ca_speech_target_cumulative_playback():
    trace = SessionTrace(
        "a", (R("x", ts=900), W(ms=600, ts=1000)), tgt=Modality.SPEECH
    )
    timed = assign_ca_times(subsegment_speech(derive_chunks(validate_trace(trace))))
    assert timed.out_end == (1300.0, 1600.0)


def test_ca_speech_target_playback_deferred():
    trace = SessionTrace(
        "a",
        (R("x", ts=900), W(ms=600, ts=1000), R("y", ts=1400), W(ms=300, ts=1500)),
        tgt=Modality.SPEECH,
    )
    timed = assign_ca_times(subsegment_speech(derive_chunks(validate_trace(trace))))
    # second chunk waits for the first to finish playing at 1600
    assert timed.out_end == (1300.0, 1600.0, 1900.0)


def test_ca_speech_source_offsets():
    trace = SessionTrace(
        "a",
        (R(ms=700, ts=700), W("a", ts=800), R(ms=400, ts=1100), W("b", ts=1300)),
        src=Modality.SPEECH,
    )
    timed = assign_ca_times(subsegment_speech(derive_chunks(validate_trace(trace))))
    assert timed.in_end == (300.0, 600.0, 700.0, 1000.0, 1100.0)


def test_ca_requires_timestamps():
    c = chunked("RW")
    with pytest.raises(MissingTimestamps):
        assign_ca_times(c)


@settings(max_examples=200)
@given(
    st.lists(
        st.tuples(st.integers(1, 3), st.lists(st.integers(0, 1500), min_size=1, max_size=3), st.integers(0, 2000)),
        min_size=1,
        max_size=6,
    )
)
def test_ca_speech_playback_never_overlaps(chunks):
    events = []
    ts = 0
    for n_reads, durations, gap in chunks:
        for _ in range(n_reads):
            ts += 100
            events.append(R("x", ts=ts))
        ts += gap
        for d in durations:
            events.append(W(ms=d, ts=ts))
    trace = SessionTrace("p", tuple(events), tgt=Modality.SPEECH)
    c = subsegment_speech(derive_chunks(validate_trace(trace)))
    timed = assign_ca_times(c)
    ends = iter(timed.out_end)
    prev_end = 0.0
    for ch in c.chunks:
        chunk_ends = [next(ends) for _ in ch.tgt_units]
        if not chunk_ends:
            continue
        start = chunk_ends[0] - ch.tgt_units[0]
        assert start >= prev_end - 1e-9
        assert start >= max(e.ts for e in ch.writes[:1]) - 1e-9
        prev_end = chunk_ends[-1]
