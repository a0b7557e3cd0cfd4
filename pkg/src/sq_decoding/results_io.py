from __future__ import annotations

import csv
import dataclasses
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

from .core import InputError
from .search_stats import RankStat

RESULTS_FORMAT = "sq-decoding-results"
RESULTS_VERSION = 1


def ensure_dir(path: Path) -> None:
    path.mkdir(parents=True, exist_ok=True)


def write_json(path: Path, data: object) -> None:
    ensure_dir(path.parent)
    path.write_text(json.dumps(data, indent=2, sort_keys=False) + "\n", encoding="utf-8")


def write_jsonl(path: Path, rows: Iterable[dict[str, Any]]) -> None:
    ensure_dir(path.parent)
    with path.open("w", encoding="utf-8", newline="\n") as f:
        for row in rows:
            f.write(json.dumps(row, sort_keys=False) + "\n")


def read_jsonl(path: Path) -> list[dict[str, Any]]:
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise InputError(f"File not found: {path}") from None
    except UnicodeDecodeError as e:
        raise InputError(f"{path} is not valid UTF-8: {e.reason} at byte {e.start}") from None
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as e:
            raise InputError(f"{path}:{lineno}: invalid JSON ({e.msg})") from e
        if not isinstance(row, dict):
            raise InputError(f"{path}:{lineno}: expected a JSON object")
        rows.append(row)
    return rows


def file_header(kind: str, **fields: Any) -> dict[str, Any]:
    return {"type": "header", "format": RESULTS_FORMAT, "version": RESULTS_VERSION, "kind": kind, **fields}


@dataclasses.dataclass(frozen=True)
class ResultRecord:
    line: int
    source: list[str]
    output: list[str]
    score: float
    cum_logprob: float
    steps: int
    fallback: bool
    rank_score_trace: list[list[float]] | None = None
    elapsed_ms: float | None = None

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "type": "record",
            "line": self.line,
            "source": list(self.source),
            "output": list(self.output),
            "score": self.score,
            "cum_logprob": self.cum_logprob,
            "steps": self.steps,
            "fallback": self.fallback,
        }
        if self.rank_score_trace is not None:
            out["rank_score_trace"] = [list(row) for row in self.rank_score_trace]
        if self.elapsed_ms is not None:
            out["elapsed_ms"] = self.elapsed_ms
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ResultRecord:
        try:
            trace = data.get("rank_score_trace")
            elapsed = data.get("elapsed_ms")
            return cls(
                line=int(data["line"]),
                source=[str(t) for t in data["source"]],
                output=[str(t) for t in data["output"]],
                score=float(data["score"]),
                cum_logprob=float(data["cum_logprob"]),
                steps=int(data["steps"]),
                fallback=bool(data["fallback"]),
                rank_score_trace=None if trace is None else [[float(x) for x in row] for row in trace],
                elapsed_ms=None if elapsed is None else float(elapsed),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise InputError(f"Invalid result record: {e}") from e


def normalized_score(record: ResultRecord) -> float:
    # lambda = 1, the same quantity sweep ranks by; -inf for an empty fallback.
    if not record.output:
        return -math.inf
    return record.cum_logprob / float(len(record.output))


def results_footer(records: Sequence[ResultRecord]) -> dict[str, Any]:
    n = len(records)
    footer: dict[str, Any] = {
        "type": "footer",
        "sentences": n,
        "mean_steps": (sum(r.steps for r in records) / n) if n else 0.0,
        "mean_score": (sum(r.score for r in records) / n) if n else 0.0,
        "mean_normalized_score": (sum(normalized_score(r) for r in records) / n) if n else 0.0,
        "fallbacks": sum(1 for r in records if r.fallback),
    }
    timed = [r.elapsed_ms for r in records if r.elapsed_ms is not None]
    if timed:
        footer["mean_time_ms"] = sum(timed) / len(timed)
    return footer


def write_results(path: Path, header: dict[str, Any], records: Sequence[ResultRecord]) -> None:
    write_jsonl(path, [header, *(r.to_dict() for r in records), results_footer(records)])


@dataclasses.dataclass(frozen=True)
class ResultsFile:
    header: dict[str, Any]
    records: list[ResultRecord]
    footer: dict[str, Any]


def read_results(path: Path) -> ResultsFile:
    rows = read_jsonl(path)
    if not rows or rows[0].get("type") != "header" or rows[0].get("format") != RESULTS_FORMAT:
        raise InputError(f"{path}: not a results file (missing {RESULTS_FORMAT} header line)")
    if rows[0].get("version") != RESULTS_VERSION:
        raise InputError(f"{path}: unsupported results version {rows[0].get('version')!r}")
    records = [ResultRecord.from_dict(r) for r in rows if r.get("type") == "record"]
    footers = [r for r in rows if r.get("type") == "footer"]
    return ResultsFile(header=rows[0], records=records, footer=footers[-1] if footers else results_footer(records))


def write_rank_stats_csv(path: Path, stats: Sequence[RankStat]) -> None:
    ensure_dir(path.parent)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["step", "rank", "mean_score", "count"])
        for s in stats:
            writer.writerow([s.step, s.rank, repr(s.mean_score), s.count])


def write_table_csv(path: Path, rows: Sequence[dict[str, Any]]) -> None:
    if not rows:
        return
    ensure_dir(path.parent)
    fieldnames: list[str] = []
    for r in rows:
        for k in r.keys():
            if k not in fieldnames:
                fieldnames.append(k)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow(r)
