"""Feedback-driven rule refinement.

Two loops feed the rule base: frames the fine stage cleared after a coarse
escalation (F2C) are re-captioned and re-generalized into sharper normal
rules; operator-validated anomalies (UIL) can contribute new anomaly-side
rules. Pending items persist in a JSONL append log.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

from . import backends as be
from .cascade import VerdictRecord
from .errors import AlreadyDecided, SchemaVersionMismatch, UnknownItem
from .frames import Frame, encode_png
from .induction import Description, Segment, generalize_rules
from .rulebase import Rule, RuleBase, add_custom_rule, add_rules

FEEDBACK_SCHEMA = "cerberus-feedback/1"


@dataclass
class FeedbackItem:
    id: str
    frame_id: str
    kind: str  # f2c_candidate | uil_pending
    evidence: dict = field(default_factory=dict)
    status: str = "pending"  # pending | applied | rejected
    created_at: float = field(default_factory=time.time)


def _evidence(record: VerdictRecord) -> dict:
    return {
        "caption": record.stage2_caption,
        "stage1_score": record.stage1.score if record.stage1 else None,
        "stage2_score": record.stage2.score if record.stage2 else None,
        "anomaly_score": record.anomaly_score,
    }


def collect_f2c(records: list[VerdictRecord]) -> list[FeedbackItem]:
    """Frames flagged suspicious by stage 1 but cleared by stage 2."""
    items = []
    for r in records:
        if (r.stage1 is not None and r.stage1.verdict == "abnormal"
                and r.stage2 is not None and r.stage2.verdict == "normal"):
            items.append(FeedbackItem(id=f"f2c:{r.frame_id}", frame_id=r.frame_id,
                                      kind="f2c_candidate", evidence=_evidence(r)))
    return items


def enqueue_uil(records: list[VerdictRecord]) -> list[FeedbackItem]:
    """Final-abnormal frames queued for operator validation."""
    return [
        FeedbackItem(id=f"uil:{r.frame_id}", frame_id=r.frame_id,
                     kind="uil_pending", evidence=_evidence(r))
        for r in records if r.final_label == "abnormal"
    ]


class FeedbackQueue:
    """Durable item store backed by a JSONL append log.

    Single-writer: every state change appends one event; replaying the log
    reconstructs the full queue on restart.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path else None
        self.items: dict[str, FeedbackItem] = {}
        if self.path and self.path.exists():
            self._replay()

    def _replay(self) -> None:
        for line in self.path.read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line:
                continue
            event = json.loads(line)
            if event.get("schema") != FEEDBACK_SCHEMA:
                raise SchemaVersionMismatch(
                    f"expected {FEEDBACK_SCHEMA}, got {event.get('schema')!r}")
            if event["event"] == "add":
                d = event["item"]
                self.items[d["id"]] = FeedbackItem(**d)
            elif event["event"] == "update":
                item = self.items[event["id"]]
                item.status = event["status"]
                item.kind = event.get("kind", item.kind)

    def _append(self, event: dict) -> None:
        if self.path is None:
            return
        event["schema"] = FEEDBACK_SCHEMA
        with open(self.path, "a", encoding="utf-8") as f:
            f.write(json.dumps(event) + "\n")

    def add_items(self, items: list[FeedbackItem]) -> int:
        """Insert new items; ids already present are skipped."""
        added = 0
        for item in items:
            if item.id in self.items:
                continue
            self.items[item.id] = item
            self._append({"event": "add", "item": asdict(item)})
            added += 1
        return added

    def get(self, item_id: str) -> FeedbackItem:
        if item_id not in self.items:
            raise UnknownItem(item_id)
        return self.items[item_id]

    def pending(self, kind: str | None = None) -> list[FeedbackItem]:
        out = [i for i in self.items.values() if i.status == "pending"]
        if kind is not None:
            out = [i for i in out if i.kind == kind]
        return sorted(out, key=lambda i: (i.created_at, i.id))

    def update(self, item_id: str, status: str, kind: str | None = None) -> None:
        item = self.get(item_id)
        item.status = status
        if kind is not None:
            item.kind = kind
        self._append({"event": "update", "id": item_id, "status": status,
                      **({"kind": kind} if kind else {})})


def apply_f2c(rulebase: RuleBase, queue: FeedbackQueue,
              frames_by_id: dict[str, Frame],
              backend_set: be.BackendSet) -> RuleBase:
    """Re-caption F2C frames, re-generalize, merge the refined rules.

    No pending items means no version bump: re-application is a no-op.
    Backend failure leaves everything pending.
    """
    items = [i for i in queue.pending("f2c_candidate") if i.frame_id in frames_by_id]
    if not items:
        return rulebase
    descriptions = []
    for item in items:
        frame = frames_by_id[item.frame_id]
        caption = backend_set.captioner.caption(
            [encode_png(frame.load())], be.DESC_PROMPT, frame_id=frame.frame_id)
        segment = Segment(scene_id=frame.scene_id, frame_ids=(frame.frame_id,))
        descriptions.append(Description(segment=segment, text=caption))
    rules = generalize_rules(descriptions, backend_set.rule_llm,
                             created_version=rulebase.version + 1)
    refined = [Rule(text=r.text, source="f2c_refined",
                    created_version=r.created_version) for r in rules]
    updated = add_rules(rulebase, refined, kind="normal")
    for item in items:
        queue.update(item.id, "applied")
    return updated


def apply_uil(rulebase: RuleBase, queue: FeedbackQueue, item_id: str,
              decision: str, rule_text: str | None = None) -> RuleBase:
    """Resolve one operator decision.

    confirm with text adds an anomaly rule (version bump); confirm without
    text just closes the item; reject routes the false positive into the
    F2C pool.
    """
    item = queue.get(item_id)
    if item.status != "pending" or item.kind != "uil_pending":
        raise AlreadyDecided(item_id)
    if decision == "confirm":
        if rule_text:
            rulebase = add_custom_rule(rulebase, rule_text, kind="anomaly")
        queue.update(item_id, "applied")
        return rulebase
    if decision == "reject":
        # a rejected anomaly is exactly a "suspicious but normal" frame:
        # it stays pending but routes into the F2C pool
        queue.update(item_id, "pending", kind="f2c_candidate")
        return rulebase
    raise ValueError(f"unknown decision: {decision}")
