"""Versioned rule store and candidate pool construction.

The rule base holds three candidate sources: induced normal rules, a large
list of perturbed action labels, and operator-authored anomaly rules. Every
mutation bumps the version by exactly one; scoring always consumes an
immutable pool snapshot built from a specific version.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Iterable

from .errors import (
    DuplicateRule,
    EmptyPerturbedSet,
    EmptyRuleText,
    SchemaVersionMismatch,
)

RULEBASE_SCHEMA = "cerberus-rulebase/1"

NORMAL_TEMPLATE = "The normal scene depicts {r}."
ANOMALY_TEMPLATE = "The scene depicts {r}."


@dataclass(frozen=True)
class Rule:
    text: str
    source: str  # induced | custom | f2c_refined
    created_version: int

    def __post_init__(self):
        if not self.text.strip():
            raise EmptyRuleText("rule text is empty")
        if self.created_version < 1:
            raise ValueError("created_version must be >= 1")


@dataclass(frozen=True)
class Candidate:
    id: int
    text: str
    polarity: int  # +1 normal-side, -1 anomaly-side
    origin: str  # normal_rule | perturbed_label | custom_anomaly


@dataclass(frozen=True)
class PoolParams:
    k: int = 5
    tau1: float = 0.0
    tau2: float = 0.0
    epsilon_motion: float = 7e-4
    alpha_prompt: float = 1.2e-3
    segment_len: int = 8

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not (0 <= self.epsilon_motion < self.alpha_prompt):
            raise ValueError("need 0 <= epsilon_motion < alpha_prompt")


@dataclass(frozen=True)
class RuleBase:
    version: int = 1
    normal_rules: tuple[Rule, ...] = ()
    perturbed_labels: tuple[str, ...] = ()
    custom_anomaly_rules: tuple[Rule, ...] = ()
    params: PoolParams = field(default_factory=PoolParams)


@dataclass(frozen=True)
class CandidatePool:
    candidates: tuple[Candidate, ...]
    rulebase_version: int

    @property
    def texts(self) -> list[str]:
        return [c.text for c in self.candidates]

    @property
    def polarities(self) -> list[int]:
        return [c.polarity for c in self.candidates]


def normalize_text(text: str) -> str:
    """Lowercase + whitespace collapse, used for dedup only."""
    return re.sub(r"\s+", " ", text.strip().lower())


def build_candidate_pool(rulebase: RuleBase) -> CandidatePool:
    """Expand the rule base into the templated candidate pool.

    Order: normal rules, then custom anomaly rules, then perturbed labels.
    Ids are dense insertion indices.
    """
    if not rulebase.perturbed_labels:
        raise EmptyPerturbedSet("perturbed_labels is empty; pool would have no anomaly side")
    candidates: list[Candidate] = []
    for rule in rulebase.normal_rules:
        candidates.append(Candidate(
            id=len(candidates),
            text=NORMAL_TEMPLATE.format(r=rule.text),
            polarity=+1,
            origin="normal_rule",
        ))
    for rule in rulebase.custom_anomaly_rules:
        candidates.append(Candidate(
            id=len(candidates),
            text=ANOMALY_TEMPLATE.format(r=rule.text),
            polarity=-1,
            origin="custom_anomaly",
        ))
    for label in rulebase.perturbed_labels:
        candidates.append(Candidate(
            id=len(candidates),
            text=ANOMALY_TEMPLATE.format(r=label),
            polarity=-1,
            origin="perturbed_label",
        ))
    return CandidatePool(candidates=tuple(candidates), rulebase_version=rulebase.version)


def add_rules(rulebase: RuleBase, rules: Iterable[Rule], kind: str = "normal") -> RuleBase:
    """Append rules (deduplicated) and bump the version once.

    Rules whose normalized text already exists in the target list are
    silently skipped; the version bump happens regardless so callers can
    rely on monotonicity.
    """
    if kind not in ("normal", "anomaly"):
        raise ValueError(f"unknown rule kind: {kind}")
    target = rulebase.normal_rules if kind == "normal" else rulebase.custom_anomaly_rules
    seen = {normalize_text(r.text) for r in target}
    added = []
    for rule in rules:
        key = normalize_text(rule.text)
        if key in seen:
            continue
        seen.add(key)
        added.append(replace(rule, created_version=rulebase.version + 1))
    new_list = target + tuple(added)
    if kind == "normal":
        return replace(rulebase, version=rulebase.version + 1, normal_rules=new_list)
    return replace(rulebase, version=rulebase.version + 1, custom_anomaly_rules=new_list)


def add_custom_rule(rulebase: RuleBase, text: str, kind: str = "anomaly") -> RuleBase:
    """Add one operator-authored rule; duplicates are rejected."""
    if not text.strip():
        raise EmptyRuleText("rule text is empty")
    if kind not in ("anomaly", "normal"):
        raise ValueError(f"unknown rule kind: {kind}")
    target = rulebase.normal_rules if kind == "normal" else rulebase.custom_anomaly_rules
    key = normalize_text(text)
    if any(normalize_text(r.text) == key for r in target):
        raise DuplicateRule(text)
    rule = Rule(text=text.strip(), source="custom", created_version=rulebase.version + 1)
    if kind == "normal":
        return replace(rulebase, version=rulebase.version + 1,
                       normal_rules=rulebase.normal_rules + (rule,))
    return replace(rulebase, version=rulebase.version + 1,
                   custom_anomaly_rules=rulebase.custom_anomaly_rules + (rule,))


# --- persistence ------------------------------------------------------------

def _rule_to_dict(rule: Rule) -> dict:
    return {"text": rule.text, "source": rule.source, "created_version": rule.created_version}


def _rule_from_dict(d: dict) -> Rule:
    return Rule(text=d["text"], source=d["source"], created_version=d["created_version"])


def save_rulebase(rulebase: RuleBase, path: str | Path) -> None:
    doc = {
        "schema": RULEBASE_SCHEMA,
        "version": rulebase.version,
        "params": {
            "k": rulebase.params.k,
            "tau1": rulebase.params.tau1,
            "tau2": rulebase.params.tau2,
            "epsilon_motion": rulebase.params.epsilon_motion,
            "alpha_prompt": rulebase.params.alpha_prompt,
            "segment_len": rulebase.params.segment_len,
        },
        "normal_rules": [_rule_to_dict(r) for r in rulebase.normal_rules],
        "custom_anomaly_rules": [_rule_to_dict(r) for r in rulebase.custom_anomaly_rules],
        "perturbed_labels": list(rulebase.perturbed_labels),
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_rulebase(path: str | Path) -> RuleBase:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("schema") != RULEBASE_SCHEMA:
        raise SchemaVersionMismatch(f"expected {RULEBASE_SCHEMA}, got {doc.get('schema')!r}")
    p = doc["params"]
    return RuleBase(
        version=doc["version"],
        normal_rules=tuple(_rule_from_dict(d) for d in doc["normal_rules"]),
        custom_anomaly_rules=tuple(_rule_from_dict(d) for d in doc["custom_anomaly_rules"]),
        perturbed_labels=tuple(doc["perturbed_labels"]),
        params=PoolParams(
            k=p["k"], tau1=p["tau1"], tau2=p["tau2"],
            epsilon_motion=p["epsilon_motion"], alpha_prompt=p["alpha_prompt"],
            segment_len=p["segment_len"],
        ),
    )


def load_perturbed_labels(path: str | Path | None = None) -> tuple[str, ...]:
    """Read a label list: one label per line, '#' comments and blanks skipped.

    With no path, the bundled 339-label list ships as the default.
    """
    if path is None:
        text = resources.files("cerberus.data").joinpath("perturbed_labels.txt").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    labels = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        labels.append(line)
    return tuple(labels)
