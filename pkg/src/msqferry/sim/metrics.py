from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np


@dataclass
class MessageRecord:
    id: int
    source: int
    terminal: int
    created_at: float
    delivered_at: float | None = None
    hops: int = 0
    status: str = "in_flight"  # in_flight | delivered | stranded


@dataclass
class EventLog:
    rows: list[tuple[float, int, str, dict]] = field(default_factory=list)

    def add(self, time: float, kind: str, **detail) -> None:
        self.rows.append((time, len(self.rows), kind, detail))

    def kinds(self, *kinds: str) -> list[tuple[float, int, str, dict]]:
        return [r for r in self.rows if r[2] in kinds]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "seq", "kind", "detail"])
        for t, seq, kind, detail in self.rows:
            w.writerow([repr(float(t)), seq, kind, json.dumps(detail, sort_keys=True)])
        return buf.getvalue()


@dataclass
class Metrics:
    mode: str
    horizon: float
    warmup: float
    messages: list[MessageRecord]
    events: EventLog
    queue_time_avg: dict[str, float]
    service_rate_avg: float
    demands: dict[tuple[int, int], float]
    extra: dict = field(default_factory=dict)

    @property
    def generated(self) -> int:
        return len(self.messages)

    @property
    def delivered(self) -> int:
        return sum(m.status == "delivered" for m in self.messages)

    @property
    def in_flight(self) -> int:
        return sum(m.status == "in_flight" for m in self.messages)

    @property
    def stranded(self) -> int:
        return sum(m.status == "stranded" for m in self.messages)

    def delays(self, pair: tuple[int, int] | None = None) -> np.ndarray:
        return np.array([m.delivered_at - m.created_at for m in self.messages
                         if m.status == "delivered" and m.created_at >= self.warmup
                         and (pair is None or (m.source, m.terminal) == pair)])

    def mean_delay(self, pair: tuple[int, int] | None = None) -> float:
        d = self.delays(pair)
        return float(d.mean()) if d.size else float("nan")

    def undelivered_before(self, cutoff: float) -> list[MessageRecord]:
        return [m for m in self.messages if m.created_at < cutoff and m.status != "delivered"]

    def pair_stats(self) -> dict[str, dict]:
        out = {}
        for pair in sorted({(m.source, m.terminal) for m in self.messages}):
            d = self.delays(pair)
            if d.size == 0:
                continue
            out[f"{pair[0]},{pair[1]}"] = {
                "count": int(d.size), "mean": float(d.mean()),
                "p50": float(np.percentile(d, 50)), "p90": float(np.percentile(d, 90)),
                "p99": float(np.percentile(d, 99))}
        return out

    def realized_cost(self) -> dict[str, float]:
        """Rate-weighted mean delay plus the time-averaged total service rate."""
        delay_term = 0.0
        for pair, rate in sorted(self.demands.items()):
            d = self.delays(pair)
            if d.size:
                delay_term += rate * float(d.mean())
        return {"delay_term": delay_term, "service_term": self.service_rate_avg,
                "total": delay_term + self.service_rate_avg}

    def as_dict(self) -> dict:
        d = self.delays()
        return {
            "mode": self.mode,
            "horizon": self.horizon,
            "warmup": self.warmup,
            "generated": self.generated,
            "delivered": self.delivered,
            "in_flight": self.in_flight,
            "stranded": self.stranded,
            "mean_delay": float(d.mean()) if d.size else None,
            "delay_percentiles": ({p: float(np.percentile(d, int(p[1:])))
                                   for p in ("p50", "p90", "p99")} if d.size else {}),
            "pairs": self.pair_stats(),
            "queue_time_avg": dict(sorted(self.queue_time_avg.items())),
            "realized_cost": self.realized_cost(),
            "recovery_timeline": [{"time": t, "kind": k, **det} for t, _, k, det in
                                  self.events.kinds("unify", "redivide", "growth_complete",
                                                    "node_failure_detected", "ferry_failure_detected",
                                                    "ferry_replaced")],
            **self.extra,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, indent=1)

    def messages_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["id", "s", "t", "created_at", "delivered_at", "hops", "status"])
        for m in self.messages:
            w.writerow([m.id, m.source, m.terminal, repr(m.created_at),
                        "" if m.delivered_at is None else repr(m.delivered_at), m.hops, m.status])
        return buf.getvalue()
