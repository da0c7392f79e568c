"""Trial logs: JSONL serialization, summary statistics, and comparison.

A trial log is one JSONL document: a header line, one record line per
broadcast frame, and a final outcome line. Serialization goes through
:func:`ottwin.serialize.canonical_dumps`, so a log re-serialized after a
round-trip is byte-identical — replay verification depends on that.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence, Union

from .serialize import canonical_dumps

LOG_SCHEMA_VERSION = 1
BROADCAST_HZ = 60  # record cadence; physics runs faster


class LogError(ValueError):
    """Raised for malformed or empty trial logs."""


@dataclass(frozen=True)
class TrialLog:
    header: dict
    records: tuple[dict, ...]
    outcome: dict

    def to_jsonl(self) -> str:
        lines = [canonical_dumps(self.header)]
        lines.extend(canonical_dumps(r) for r in self.records)
        lines.append(canonical_dumps(self.outcome))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "TrialLog":
        rows = []
        for i, line in enumerate(text.splitlines()):
            if not line.strip():
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise LogError(f"line {i + 1}: invalid JSON: {e.msg}") from e
        if len(rows) < 2:
            raise LogError("log needs at least a header and an outcome line")
        header, *records, outcome = rows
        if header.get("type") != "header":
            raise LogError("first line must be the header")
        if outcome.get("type") != "outcome":
            raise LogError("last line must be the outcome")
        for r in records:
            if r.get("type") != "record":
                raise LogError(f"unexpected line type {r.get('type')!r} in record block")
        return cls(header=header, records=tuple(records), outcome=outcome)

    def write(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_jsonl())

    @classmethod
    def read(cls, path: Union[str, Path]) -> "TrialLog":
        return cls.from_jsonl(Path(path).read_text())

    def iter_events(self) -> Iterator[dict]:
        """All input/control events across records, in tick order."""
        for rec in self.records:
            yield from rec.get("events", ())

    @property
    def success(self) -> bool:
        return bool(self.outcome.get("success"))


@dataclass(frozen=True)
class TrialSummary:
    n_trials: int
    n_records: int
    success_rate: float
    contact_mean: float
    contact_sd: float
    distance_mean: float
    distance_sd: float


def summarize(logs: Sequence[TrialLog]) -> TrialSummary:
    """Pool per-record metrics across trials; SDs are population SDs."""
    if not logs:
        raise LogError("cannot summarize zero trials")
    contact: list[float] = []
    distance: list[float] = []
    successes = 0
    for log in logs:
        for rec in log.records:
            contact.append(rec["contact_force"])
            d = rec["trap_distance"]
            if d is not None:  # null when the scenario has no assigned trap
                distance.append(d)
        successes += 1 if log.success else 0
    if not contact or not distance:
        raise LogError("cannot summarize logs with no records")
    return TrialSummary(
        n_trials=len(logs),
        n_records=len(contact),
        success_rate=successes / len(logs),
        contact_mean=statistics.fmean(contact),
        contact_sd=statistics.pstdev(contact),
        distance_mean=statistics.fmean(distance),
        distance_sd=statistics.pstdev(distance),
    )


def _reduction(a: float, b: float) -> float:
    if a == 0.0:
        return 0.0
    return (a - b) / a


@dataclass(frozen=True)
class SummaryComparison:
    """Relative reductions from condition A to condition B: (A - B) / A."""

    contact_mean_reduction: float
    contact_sd_reduction: float
    distance_mean_reduction: float
    distance_sd_reduction: float


def compare(a: TrialSummary, b: TrialSummary) -> SummaryComparison:
    return SummaryComparison(
        contact_mean_reduction=_reduction(a.contact_mean, b.contact_mean),
        contact_sd_reduction=_reduction(a.contact_sd, b.contact_sd),
        distance_mean_reduction=_reduction(a.distance_mean, b.distance_mean),
        distance_sd_reduction=_reduction(a.distance_sd, b.distance_sd),
    )
