"""Trace files (JSON lines) and report files (CSV).

A trace file starts with one metadata object::

    {"schema_version": 1, "exit_layers": [3, 6, 20], "lambda": 0.1,
     "generator": {...} | "external", "switch_index": 500}

followed by one record per line::

    {"id": 0, "conf": {"3": 0.41, "6": 0.77, "20": 0.93}, "ok": {"3": false, "6": true, "20": true}}
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterator

import numpy as np

from .model import (
    ExitProfile,
    RunReport,
    SampleRecord,
    SplitSimError,
    Trace,
    raw_cost_final_layer,
)
from .oracle import OracleResult, pseudo_regret

SCHEMA_VERSION = 1

ROUND_COLUMNS = ("round", "arm", "exited_locally", "reward", "raw_cost", "correct", "cum_regret")
SUMMARY_COLUMNS = (
    "policy",
    "seed",
    "T",
    "accuracy",
    "accuracy_delta_vs_final_pct",
    "cost",
    "cost_delta_vs_final_pct",
    "final_regret",
    "reward",
    "fixed_arm",
)


class TraceFormatError(SplitSimError, ValueError):
    """A trace file violates the format. ``lineno`` is 1-based."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class TraceParseError(TraceFormatError):
    pass


class SchemaVersionError(TraceFormatError):
    pass


class LayerSetMismatchError(TraceFormatError):
    pass


class ConfidenceRangeError(TraceFormatError):
    pass


class SampleIdError(TraceFormatError):
    pass


def _dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def _metadata(trace: Trace) -> dict:
    meta = {
        "schema_version": SCHEMA_VERSION,
        "exit_layers": list(trace.profile.exit_layers),
        "lambda": trace.profile.lam,
        "generator": trace.metadata.get("generator", "external"),
    }
    if "switch_index" in trace.metadata:
        meta["switch_index"] = trace.metadata["switch_index"]
    if trace.metadata.get("clamped"):
        meta["clamped"] = True
    return meta


def write_trace(trace: Trace, path) -> Path:
    """Write ``trace`` as a metadata line plus one line per record."""
    path = Path(path)
    keys = [str(layer) for layer in trace.profile.exit_layers]
    with path.open("w", encoding="utf-8", newline="\n") as f:
        f.write(_dumps(_metadata(trace)) + "\n")
        for sid, conf, ok in zip(trace.ids.tolist(), trace.confidence.tolist(), trace.correct.tolist()):
            f.write(_dumps({"id": sid, "conf": dict(zip(keys, conf)), "ok": dict(zip(keys, ok))}) + "\n")
    return path


def _parse_metadata(line: str) -> tuple[ExitProfile, dict]:
    try:
        meta = json.loads(line)
    except json.JSONDecodeError as e:
        raise TraceParseError(1, f"metadata is not valid JSON ({e.msg})") from None
    if not isinstance(meta, dict):
        raise TraceParseError(1, "metadata must be a JSON object")
    version = meta.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(1, f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
    try:
        profile = ExitProfile(tuple(meta["exit_layers"]), meta["lambda"])
    except KeyError as e:
        raise TraceParseError(1, f"metadata lacks {e.args[0]!r}") from None
    except (TypeError, ValueError) as e:
        raise TraceParseError(1, f"bad exit profile: {e}") from None
    return profile, meta


def _parse_record(line: str, lineno: int, keys: set[str], prev_id: int | None) -> SampleRecord:
    try:
        obj = json.loads(line)
        sid, conf, ok = obj["id"], obj["conf"], obj["ok"]
    except json.JSONDecodeError as e:
        raise TraceParseError(lineno, f"invalid JSON ({e.msg})") from None
    except (KeyError, TypeError):
        raise TraceParseError(lineno, "record needs 'id', 'conf' and 'ok'") from None
    if not isinstance(sid, int) or isinstance(sid, bool) or sid < 0:
        raise SampleIdError(lineno, f"id must be a non-negative integer, got {sid!r}")
    if prev_id is not None and sid <= prev_id:
        raise SampleIdError(lineno, f"id {sid} does not increase on previous id {prev_id}")
    if not isinstance(conf, dict) or not isinstance(ok, dict):
        raise TraceParseError(lineno, "'conf' and 'ok' must be objects")
    if set(conf) != keys or set(ok) != keys:
        extra = sorted((set(conf) | set(ok)) - keys)
        missing = sorted(keys - (set(conf) & set(ok)))
        raise LayerSetMismatchError(lineno, f"layer keys differ from metadata (extra {extra}, missing {missing})")
    values = {}
    for key, c in conf.items():
        if isinstance(c, bool) or not isinstance(c, (int, float)):
            raise TraceParseError(lineno, f"confidence at layer {key} is not a number")
        if not (math.isfinite(c) and 0.0 <= c <= 1.0):
            raise ConfidenceRangeError(lineno, f"confidence {c!r} at layer {key} outside [0, 1]")
        values[int(key)] = float(c)
    flags = {}
    for key, flag in ok.items():
        if not isinstance(flag, bool):
            raise TraceParseError(lineno, f"correct flag at layer {key} is not a boolean")
        flags[int(key)] = flag
    return SampleRecord(sid, values, flags)


def iter_trace(path) -> tuple[ExitProfile, dict, Iterator[SampleRecord]]:
    """Open a trace for streaming: metadata now, validated records lazily."""
    path = Path(path)
    f = path.open("r", encoding="utf-8", newline="")
    first = f.readline()
    if not first:
        f.close()
        raise TraceParseError(1, "empty file")
    try:
        profile, meta = _parse_metadata(first)
    except TraceFormatError:
        f.close()
        raise
    keys = {str(layer) for layer in profile.exit_layers}

    def records() -> Iterator[SampleRecord]:
        prev = None
        with f:
            for lineno, line in enumerate(f, start=2):
                if not line.strip():
                    raise TraceParseError(lineno, "blank line")
                rec = _parse_record(line, lineno, keys, prev)
                prev = rec.sample_id
                yield rec

    return profile, meta, records()


def read_trace(path) -> tuple[ExitProfile, Trace, dict]:
    """Read and validate a whole trace file; the first bad line aborts."""
    profile, meta, records = iter_trace(path)
    layers = profile.exit_layers
    ids, conf, ok = [], [], []
    for rec in records:
        ids.append(rec.sample_id)
        conf.append([rec.confidence[i] for i in layers])
        ok.append([rec.correct[i] for i in layers])
    k = len(layers)
    metadata = {"generator": meta.get("generator", "external")}
    for key in ("switch_index", "clamped"):
        if key in meta:
            metadata[key] = meta[key]
    trace = Trace(
        profile,
        np.array(conf, dtype=np.float64).reshape(len(ids), k),
        np.array(ok, dtype=bool).reshape(len(ids), k),
        ids,
        metadata,
    )
    return profile, trace, meta


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if value is None:
        return ""
    return str(value)


def summary_row(report: RunReport, oracle: OracleResult, regret: np.ndarray | None = None) -> dict:
    """Summary metrics of one run, normalised against the final-layer baseline."""
    if regret is None:
        regret = pseudo_regret(report, oracle)
    n = report.n_rounds
    base_cost = n * raw_cost_final_layer(report.profile)
    cost = report.cumulative_cost
    row = {
        "policy": report.policy,
        "seed": report.seed,
        "T": n,
        "accuracy": report.accuracy,
        "accuracy_delta_vs_final_pct": 100.0 * (report.accuracy - report.final_accuracy),
        "cost": cost,
        "cost_delta_vs_final_pct": 100.0 * (cost - base_cost) / base_cost if base_cost > 0 else 0.0,
        "final_regret": float(regret[-1]) if n else 0.0,
        "reward": report.cumulative_reward,
        "fixed_arm": report.fixed_arm,
    }
    for layer, k in report.pulls.items():
        row[f"pulls_{layer}"] = k
    return row


def write_rounds(report: RunReport, regret: np.ndarray, path) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(ROUND_COLUMNS)
        for t, (a, loc, r, c, ok, g) in enumerate(
            zip(report.arms.tolist(), report.exited_locally.tolist(), report.rewards.tolist(),
                report.raw_costs.tolist(), report.correct.tolist(), regret.tolist()),
            start=1,
        ):
            w.writerow((t, a, _fmt(loc), _fmt(r), _fmt(c), _fmt(ok), _fmt(g)))
    return path


def write_report(report: RunReport, oracle: OracleResult, path) -> dict:
    """Write the per-round CSV of ``report`` to ``path`` and return its summary row."""
    regret = pseudo_regret(report, oracle)
    write_rounds(report, regret, path)
    return summary_row(report, oracle, regret)


def read_rounds(path) -> dict[str, np.ndarray]:
    """Parse a per-round CSV back into column arrays."""
    with Path(path).open(encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if tuple(header) != ROUND_COLUMNS:
            raise SplitSimError(f"unexpected per-round header {header}")
        rows = list(reader)
    cols = list(zip(*rows)) if rows else [()] * len(ROUND_COLUMNS)
    return {
        "round": np.array(cols[0], dtype=np.int64),
        "arm": np.array(cols[1], dtype=np.int64),
        "exited_locally": np.array([v == "1" for v in cols[2]], dtype=bool),
        "reward": np.array([float(v) for v in cols[3]], dtype=np.float64),
        "raw_cost": np.array([float(v) for v in cols[4]], dtype=np.float64),
        "correct": np.array([v == "1" for v in cols[5]], dtype=bool),
        "cum_regret": np.array([float(v) for v in cols[6]], dtype=np.float64),
    }


def summary_columns(rows: list[dict]) -> list[str]:
    """Fixed leading columns, then extra keys in first-seen order (pulls per arm last)."""
    extras: list[str] = []
    for row in rows:
        for key in row:
            if key not in SUMMARY_COLUMNS and key not in extras:
                extras.append(key)
    pulls = [k for k in extras if k.startswith("pulls_")]
    pulls.sort(key=lambda k: int(k.split("_", 1)[1]))
    others = [k for k in extras if not k.startswith("pulls_")]
    return [*others, *SUMMARY_COLUMNS, *pulls] if others else [*SUMMARY_COLUMNS, *pulls]


def write_csv(rows: list[dict], path, columns: list[str] | None = None) -> Path:
    path = Path(path)
    columns = columns or summary_columns(rows)
    with path.open("w", encoding="utf-8", newline="") as f:
        f.write(format_csv(rows, columns))
    return path


def format_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def read_csv(path) -> list[dict[str, str]]:
    with Path(path).open(encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))
