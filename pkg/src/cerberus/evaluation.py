"""Metrics and dataset tooling: AUC, precision/recall, filtering
proportion, stratified normal-frame duplication, and benchmark runs."""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cascade import CascadeConfig, VerdictRecord, escalation_fraction, model_throughput, process_stream
from .errors import EmptyInput, LengthMismatch, RatioNotReducible, SchemaVersionMismatch, SingleClass
from .frames import Frame

MANIFEST_SCHEMA = "cerberus-manifest/1"
REPORT_SCHEMA = "cerberus-report/1"


@dataclass(frozen=True)
class ManifestEntry:
    frame_id: str
    path: str
    label: int  # 0 normal, 1 abnormal
    scene: str
    seq: int


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry]

    @property
    def anomaly_ratio(self) -> float:
        if not self.entries:
            return 0.0
        return sum(e.label for e in self.entries) / len(self.entries)


@dataclass
class MetricsReport:
    auc: float
    precision: float
    recall: float
    filtering_proportion: float
    filtering_valid: bool
    coarse_recall: float
    throughput_fps: float
    overhead_s: float
    rho_measured: float
    modeled_fps: float


def auc(scores, labels) -> float:
    """Mann-Whitney AUC with tied ranks: P(anom > norm) + 0.5 * P(tie)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape[0] != labels.shape[0]:
        raise LengthMismatch(f"{scores.shape[0]} scores vs {labels.shape[0]} labels")
    n_pos = int(labels.sum())
    n_neg = int(labels.shape[0] - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("AUC needs both classes present")
    # average ranks (1-based) with midrank ties
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores), dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    rank_sum_pos = float(ranks[labels == 1].sum())
    u = rank_sum_pos - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def precision_recall(final_labels, truth) -> tuple[float, float]:
    """Precision defaults to 1.0 when nothing is predicted positive."""
    if len(final_labels) != len(truth):
        raise LengthMismatch(f"{len(final_labels)} vs {len(truth)}")
    pred = [1 if l in (1, "abnormal") else 0 for l in final_labels]
    tp = sum(1 for p, t in zip(pred, truth) if p == 1 and t == 1)
    fp = sum(1 for p, t in zip(pred, truth) if p == 1 and t == 0)
    fn = sum(1 for p, t in zip(pred, truth) if p == 0 and t == 1)
    precision = tp / (tp + fp) if (tp + fp) > 0 else 1.0
    recall = tp / (tp + fn) if (tp + fn) > 0 else 1.0
    return precision, recall


def filtering_proportion(records: list[VerdictRecord]) -> float:
    """Share of frames removed before the fine stage: static + stage-1 normal."""
    if not records:
        raise EmptyInput("no records")
    filtered = sum(
        1 for r in records
        if r.gate == "static"
        or (r.stage1 is not None and r.stage1.verdict == "normal")
    )
    return filtered / len(records)


def coarse_recall(records: list[VerdictRecord], truth) -> float:
    """Fraction of true anomalies that survive to escalation.

    A frame survives when the gate passes it and stage 1 either flags it or
    fails (fail-open). Defined 1.0 when there are no true anomalies.
    """
    if len(records) != len(truth):
        raise LengthMismatch(f"{len(records)} vs {len(truth)}")
    survived = 0
    total = 0
    for r, t in zip(records, truth):
        if t != 1:
            continue
        total += 1
        if r.gate == "active" and (
                r.stage1 is None
                or r.stage1.verdict == "abnormal"
                or "stage1_error" in r.flags):
            survived += 1
    return survived / total if total else 1.0


def duplicate_normals(manifest: DatasetManifest, target_ratio: float) -> DatasetManifest:
    """Stratified normal-frame duplication down to a target anomaly ratio.

    Anomaly entries are untouched; each normal entry is replicated to
    floor(m) or ceil(m) total copies (extras handed out round-robin), with
    duplicates placed right after their original so per-scene ordering is
    preserved. Seq indices are renumbered per scene afterwards.
    """
    anomalies = sum(e.label for e in manifest.entries)
    normals = [e for e in manifest.entries if e.label == 0]
    current = manifest.anomaly_ratio
    if anomalies == 0:
        raise RatioNotReducible("manifest has no anomalies")
    if not (0.0 < target_ratio <= current):
        raise RatioNotReducible(
            f"target {target_ratio} not below current ratio {current}")
    target_normals = round(anomalies * (1.0 - target_ratio) / target_ratio)
    base, extra = divmod(target_normals, len(normals))
    copies = {}
    for i, e in enumerate(normals):
        copies[e.frame_id] = base + (1 if i < extra else 0)

    expanded: list[ManifestEntry] = []
    for e in manifest.entries:
        if e.label == 1:
            expanded.append(e)
            continue
        n = copies[e.frame_id]
        for c in range(n):
            fid = e.frame_id if c == 0 else f"{e.frame_id}#dup{c}"
            expanded.append(ManifestEntry(frame_id=fid, path=e.path, label=0,
                                          scene=e.scene, seq=e.seq))
    # renumber seq contiguously per scene, in expanded order
    counters: dict[str, int] = {}
    renumbered = []
    for e in expanded:
        idx = counters.get(e.scene, 0)
        counters[e.scene] = idx + 1
        renumbered.append(ManifestEntry(frame_id=e.frame_id, path=e.path,
                                        label=e.label, scene=e.scene, seq=idx))
    result = DatasetManifest(entries=renumbered)
    achieved = result.anomaly_ratio
    if abs(achieved - target_ratio) > 1e-3:  # 0.1 percentage points
        raise RatioNotReducible(
            f"achieved ratio {achieved:.4f} misses target {target_ratio:.4f}")
    return result


def frames_from_manifest(manifest: DatasetManifest,
                         images: dict[str, np.ndarray] | None = None) -> list[Frame]:
    """Materialize Frame handles; `images` maps path -> array for in-memory runs."""
    frames = []
    for e in manifest.entries:
        image = images.get(e.path) if images else None
        frames.append(Frame(frame_id=e.frame_id, scene_id=e.scene, seq=e.seq,
                            path=None if image is not None else Path(e.path),
                            image=image, label=e.label))
    return frames


def compute_report(records: list[VerdictRecord], truth,
                   wall_seconds: float) -> MetricsReport:
    scores = [r.anomaly_score for r in records]
    final = [r.final_label for r in records]
    precision, recall = precision_recall(final, truth)
    filt = filtering_proportion(records)
    crecall = coarse_recall(records, truth)
    rho = escalation_fraction(records)
    overhead = sum(sum(r.timings.values()) for r in records)
    # mean measured stage latencies feed the analytic throughput model
    s1_times = [r.timings["stage1"] for r in records if "stage1" in r.timings]
    s2_times = [r.timings["stage2"] for r in records if "stage2" in r.timings]
    gate_times = [r.timings["gate"] for r in records if "gate" in r.timings]
    t_coarse = (np.mean(gate_times) if gate_times else 0.0) + \
               (np.mean(s1_times) if s1_times else 0.0)
    t_fine = np.mean(s2_times) if s2_times else 0.0
    modeled = (model_throughput(float(t_coarse), float(t_fine), rho)
               if t_coarse > 0 and t_fine > 0 else 0.0)
    try:
        auc_value = auc(scores, truth)
    except SingleClass:
        auc_value = float("nan")  # a one-class stream has no ranking metric
    return MetricsReport(
        auc=auc_value,
        precision=precision,
        recall=recall,
        filtering_proportion=filt,
        filtering_valid=crecall >= 0.95,
        coarse_recall=crecall,
        throughput_fps=len(records) / wall_seconds if wall_seconds > 0 else 0.0,
        overhead_s=float(overhead),
        rho_measured=rho,
        modeled_fps=float(modeled),
    )


def run_benchmark(frames: list[Frame], config: CascadeConfig) -> tuple[MetricsReport, list[VerdictRecord]]:
    """Process the stream end to end and measure everything."""
    if not frames:
        raise EmptyInput("empty manifest")
    truth = [f.label or 0 for f in frames]
    config.pool_embeddings()  # build the pool outside the timed window
    t0 = time.perf_counter()
    records = process_stream(frames, config)
    wall = time.perf_counter() - t0
    return compute_report(records, truth, wall), records


# --- persistence ------------------------------------------------------------

def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for e in manifest.entries:
            f.write(json.dumps({
                "schema": MANIFEST_SCHEMA, "frame_id": e.frame_id, "path": e.path,
                "label": e.label, "scene": e.scene, "seq": e.seq}) + "\n")


def load_manifest(path: str | Path) -> DatasetManifest:
    entries = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            if d.get("schema") != MANIFEST_SCHEMA:
                raise SchemaVersionMismatch(
                    f"expected {MANIFEST_SCHEMA}, got {d.get('schema')!r}")
            entries.append(ManifestEntry(frame_id=d["frame_id"], path=d["path"],
                                         label=d["label"], scene=d["scene"],
                                         seq=d["seq"]))
    return DatasetManifest(entries=entries)


def save_report(report: MetricsReport, path: str | Path) -> None:
    doc = {"schema": REPORT_SCHEMA, **report.__dict__}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_report(path: str | Path) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("schema") != REPORT_SCHEMA:
        raise SchemaVersionMismatch(f"expected {REPORT_SCHEMA}, got {doc.get('schema')!r}")
    return doc
