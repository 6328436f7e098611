"""JSONL trace reading and report formatting."""

from __future__ import annotations

import json
import math
from decimal import ROUND_HALF_EVEN, Decimal
from typing import Any, Iterator, List, Optional, Sequence, Tuple

from .errors import ParseError
from .trace import Action, Event, Modality, SessionTrace

_SIX_PLACES = Decimal("0.000001")


def fmt_float(x: float) -> str:
    """Six decimal places, ties rounded to even on the shortest repr."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "NA"
    return str(Decimal(repr(float(x))).quantize(_SIX_PLACES, rounding=ROUND_HALF_EVEN))


def _round(x: Optional[float]) -> Optional[float]:
    if x is None or math.isnan(x):
        return None
    return float(fmt_float(x))


# -- JSONL traces -----------------------------------------------------------


def _number(obj: dict, key: str) -> Optional[float]:
    val = obj.get(key)
    if val is None:
        return None
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ValueError(f"field {key!r} must be a number")
    return float(val)


def _modality(obj: Any, side: str) -> Modality:
    if obj is None:
        return Modality.TEXT
    if not isinstance(obj, dict):
        raise ValueError(f"field {side!r} must be an object")
    try:
        return Modality(obj.get("modality", "text"))
    except ValueError:
        raise ValueError(f"unknown {side} modality {obj.get('modality')!r}") from None


def trace_from_dict(obj: dict, default_id: str = "") -> SessionTrace:
    if not isinstance(obj, dict):
        raise ValueError("session must be a JSON object")
    events = obj.get("events")
    if not isinstance(events, list):
        raise ValueError("field 'events' must be a list")
    parsed = []
    for i, ev in enumerate(events):
        if not isinstance(ev, dict):
            raise ValueError(f"event {i} must be an object")
        try:
            action = Action(str(ev.get("a", "")).lower())
        except ValueError:
            raise ValueError(f"event {i} has invalid action {ev.get('a')!r}") from None
        tok = ev.get("tok")
        if tok is not None and not isinstance(tok, str):
            raise ValueError(f"event {i} field 'tok' must be a string")
        parsed.append(Event(action, tok=tok, ms=_number(ev, "ms"), ts=_number(ev, "ts")))
    ref = obj.get("reference")
    if ref is not None and (not isinstance(ref, list) or not all(isinstance(r, str) for r in ref)):
        raise ValueError("field 'reference' must be a list of strings")
    return SessionTrace(
        id=str(obj.get("id", default_id)),
        events=tuple(parsed),
        src=_modality(obj.get("src"), "src"),
        tgt=_modality(obj.get("tgt"), "tgt"),
        reference=tuple(ref) if ref is not None else None,
    )


def trace_to_dict(trace: SessionTrace) -> dict:
    events = []
    for e in trace.events:
        d: dict = {"a": e.action.value}
        if e.tok is not None:
            d["tok"] = e.tok
        if e.ms is not None:
            d["ms"] = e.ms
        if e.ts is not None:
            d["ts"] = e.ts
        events.append(d)
    out = {
        "id": trace.id,
        "src": {"modality": trace.src.value},
        "tgt": {"modality": trace.tgt.value},
        "events": events,
    }
    if trace.reference is not None:
        out["reference"] = list(trace.reference)
    return out


def iter_jsonl(lines, skip_bad: bool = False, bad: Optional[List[Tuple[int, str, str]]] = None) -> Iterator[Tuple[int, SessionTrace]]:
    """Yield ``(line_no, trace)`` for every non-blank line.

    Malformed lines raise :class:`ParseError` unless ``skip_bad`` is set,
    in which case ``(line_no, raw_line, message)`` is appended to ``bad``.
    """
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            trace = trace_from_dict(json.loads(line), default_id=str(line_no))
        except ValueError as exc:
            if not skip_bad:
                raise ParseError(line_no, str(exc)) from None
            if bad is not None:
                bad.append((line_no, line.rstrip("\n"), str(exc)))
            continue
        yield line_no, trace


def read_jsonl(path, skip_bad: bool = False, bad=None) -> List[Tuple[int, SessionTrace]]:
    with open(path, encoding="utf-8") as fh:
        return list(iter_jsonl(fh, skip_bad=skip_bad, bad=bad))


def write_jsonl(traces: Sequence[SessionTrace], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in traces:
            fh.write(json.dumps(trace_to_dict(t)) + "\n")


# -- reports ---------------------------------------------------------------


def report_to_json(report, time_model: str = "nca", ratio: str = "output") -> str:
    unit = "step" if time_model == "nca" else "ms"
    corpus = {m: _round(report.corpus[m]) for m in report.metrics}
    corpus["n"] = report.n
    corpus["excluded"] = report.excluded
    sentences = []
    excluded = []
    for s in report.sentences:
        if s.ok:
            row = {"id": s.id}
            row.update({m: _round(s.values[m]) for m in report.metrics if m in s.values})
            if "ATD" in s.values:
                row["ATD_delays"] = [_round(d) for d in s.delays]
            sentences.append(row)
        else:
            excluded.append({"id": s.id, "line": s.line_no, "error": s.error})
    doc = {
        "corpus": corpus,
        "time_model": time_model,
        "ratio": ratio,
        "atd_unit": unit,
        "sentences": sentences,
        "excluded": excluded,
    }
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def report_to_tsv(report) -> str:
    lines = ["\t".join(("id",) + tuple(report.metrics))]
    for s in report.sentences:
        if s.ok:
            lines.append("\t".join([s.id] + [fmt_float(s.values[m]) for m in report.metrics]))
    return "\n".join(lines) + "\n"


INSPECT_COLUMNS = ("t", "c", "s", "a", "T_y", "T_x", "delay")


def inspect_to_tsv(rows) -> str:
    out = ["\t".join(INSPECT_COLUMNS)]
    for r in rows:
        out.append(
            "\t".join(
                [str(r.t), str(r.c), str(r.s), str(r.a), fmt_float(r.t_out), fmt_float(r.t_in), fmt_float(r.delay)]
            )
        )
    return "\n".join(out) + "\n"
