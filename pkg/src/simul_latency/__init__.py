"""Latency metrics (CW, AP, AL, LAAL, ATD) and policy simulation for simultaneous translation."""

from .errors import *  # noqa: F401,F403
from .metrics import (
    LatencyRatioMode,
    MetricReport,
    SentenceResult,
    TimeModel,
    TokenCorrespondence,
    atd,
    average_cw,
    average_lagging,
    average_proportion,
    corpus_aggregate,
    correspondences,
    score_session,
)
from .policy import (
    SweepResult,
    gen_chunk_k,
    gen_two_segment,
    gen_wait_k,
    oracle_timeline_atd,
    sweep,
)
from .trace import (
    Action,
    Chunk,
    ChunkedSession,
    Event,
    Modality,
    R,
    SessionTrace,
    TimedSession,
    TimeUnit,
    W,
    assign_ca_times,
    assign_nca_times,
    delay_function_g,
    derive_chunks,
    subsegment_speech,
    validate_trace,
)

__version__ = "0.1.0"
