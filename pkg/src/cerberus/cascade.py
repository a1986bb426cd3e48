"""Online two-stage pipeline: motion gate, coarse deviation check, fine
caption-based confirmation.

Stage 1 embeds the prompted frame and scores it against the candidate pool;
frames it flags suspicious escalate to stage 2, which captions the frame
and scores the caption in text space. A static frame never leaves the gate.
"""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import backends as be
from .errors import BadParams
from .frames import Frame, encode_png, to_gray
from .motion import MotionField, PromptedFrame, gate as motion_gate, prompt_frame
from .rulebase import CandidatePool, RuleBase, build_candidate_pool
from .scoring import HealthResult, health_score, logistic, with_verdict

logger = logging.getLogger(__name__)

VERDICT_SCHEMA = "cerberus-verdict/1"

MODES = ("both", "coarse_only", "fine_only")


@dataclass
class CascadeConfig:
    rulebase: RuleBase
    backend_set: be.BackendSet
    mode: str = "both"
    recall_target: float = 0.95
    dump_dir: Path | None = None
    pixel_threshold: float = 10.0 / 255.0
    min_area: int = 25

    # pool snapshot, built once per rulebase version
    _pool: CandidatePool | None = field(default=None, repr=False)
    _pool_matrix: np.ndarray | None = field(default=None, repr=False)
    _pool_polarities: list[int] | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode: {self.mode}")
        if not (0.0 < self.recall_target < 1.0):
            raise ValueError("recall_target must be in (0, 1)")

    def pool(self) -> CandidatePool:
        if self._pool is None or self._pool.rulebase_version != self.rulebase.version:
            self._pool = build_candidate_pool(self.rulebase)
            vectors = self.backend_set.text_embedder.embed_texts(self._pool.texts)
            self._pool_matrix = np.vstack(vectors)
            self._pool_polarities = self._pool.polarities
        return self._pool

    def pool_embeddings(self) -> tuple[np.ndarray, list[int]]:
        self.pool()
        return self._pool_matrix, self._pool_polarities


@dataclass
class VerdictRecord:
    frame_id: str
    scene_id: str
    seq: int
    gate: str  # static | active
    p: float
    stage1: HealthResult | None = None
    stage2_caption: str | None = None
    stage2: HealthResult | None = None
    final_label: str = "normal"
    anomaly_score: float = 0.0
    timings: dict[str, float] = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)


def anomaly_score(record: VerdictRecord, tau1: float = 0.0, tau2: float = 0.0) -> float:
    """Tiered score for cross-stage ranking; higher means more anomalous.

    Static frames score 0. Frames cleared at stage 1 score 1 + sigmoid of
    the threshold margin. Frames that reached stage 2 (or were finally
    judged abnormal by stage 1 alone) occupy the top tier at 2 + sigmoid.
    """
    if record.gate == "static":
        return 0.0
    if record.stage2 is not None:
        return 2.0 + logistic(tau2 - record.stage2.score)
    if record.stage1 is not None:
        if record.stage1.verdict == "abnormal":
            # final abnormal with no fine stage (coarse_only, or unverified)
            return 2.0 + logistic(tau1 - record.stage1.score)
        return 1.0 + logistic(tau1 - record.stage1.score)
    # stage-1 backend failure escalated without a score
    return 2.0 + 0.5


def stage1(prompted: PromptedFrame, pool_matrix: np.ndarray, polarities: list[int],
           image_embedder: be.ImageEmbedder, k: int, tau1: float) -> HealthResult:
    vec = image_embedder.embed_image(prompted)
    return with_verdict(health_score(vec, pool_matrix, polarities, k), tau1)


def stage2(frame: Frame, image: np.ndarray, pool_matrix: np.ndarray,
           polarities: list[int], captioner: be.Captioner,
           text_embedder: be.TextEmbedder, k: int, tau2: float) -> tuple[str, HealthResult]:
    caption = captioner.caption([encode_png(image)], be.DESC_PROMPT,
                                frame_id=frame.frame_id)
    vec = text_embedder.embed_texts([caption])[0]
    return caption, with_verdict(health_score(vec, pool_matrix, polarities, k), tau2)


def process_stream(frames: list[Frame], config: CascadeConfig) -> list[VerdictRecord]:
    """Run the cascade over an ordered frame stream.

    Per-frame backend errors are recorded on the frame's record and the
    stream continues: a stage-1 failure escalates (fail open), a stage-2
    failure marks the frame abnormal/unverified (fail closed).
    """
    params = config.rulebase.params
    pool_matrix, polarities = config.pool_embeddings()
    bs = config.backend_set
    records: list[VerdictRecord] = []
    prev_gray: dict[str, np.ndarray] = {}

    for frame in frames:
        record = VerdictRecord(frame_id=frame.frame_id, scene_id=frame.scene_id,
                               seq=frame.seq, gate="active", p=0.0)

        if config.mode == "fine_only":
            _run_stage2(frame, frame.load(), record, config, pool_matrix, polarities)
            record.anomaly_score = anomaly_score(record, params.tau1, params.tau2)
            records.append(record)
            continue

        t0 = time.perf_counter()
        gray = to_gray(frame.load())
        prev = prev_gray.get(frame.scene_id)
        prev_gray[frame.scene_id] = gray
        fld: MotionField | None
        if prev is None:
            fld = None  # first frame of a scene: no predecessor, treated static
        else:
            fld = motion_gate(prev, gray, params.epsilon_motion)
        if fld is None:
            record.gate = "static"
            record.p = 0.0 if prev is None else float(np.abs(gray - prev).mean())
            record.final_label = "normal"
            record.timings["gate"] = time.perf_counter() - t0
            record.anomaly_score = anomaly_score(record, params.tau1, params.tau2)
            records.append(record)
            continue

        record.p = fld.proportion
        prompted = prompt_frame(frame, fld, params.epsilon_motion, params.alpha_prompt,
                                config.pixel_threshold, config.min_area)
        record.timings["gate"] = time.perf_counter() - t0
        if config.dump_dir is not None:
            _dump_prompted(config.dump_dir, frame.frame_id, prompted)

        t1 = time.perf_counter()
        escalate = False
        try:
            record.stage1 = stage1(prompted, pool_matrix, polarities,
                                   bs.image_embedder, params.k, params.tau1)
            escalate = record.stage1.verdict == "abnormal"
            record.final_label = record.stage1.verdict
        except Exception as e:
            logger.warning("stage1 failed for %s: %s", frame.frame_id, e)
            record.flags.append("stage1_error")
            escalate = True  # fail open
        record.timings["stage1"] = time.perf_counter() - t1

        if config.mode == "both" and escalate:
            _run_stage2(frame, prompted.rendered, record, config, pool_matrix, polarities)

        record.anomaly_score = anomaly_score(record, params.tau1, params.tau2)
        records.append(record)
    return records


def _run_stage2(frame: Frame, image: np.ndarray, record: VerdictRecord,
                config: CascadeConfig, pool_matrix: np.ndarray,
                polarities: list[int]) -> None:
    params = config.rulebase.params
    t2 = time.perf_counter()
    try:
        caption, result = stage2(frame, image, pool_matrix, polarities,
                                 config.backend_set.captioner,
                                 config.backend_set.text_embedder,
                                 params.k, params.tau2)
        record.stage2_caption = caption
        record.stage2 = result
        record.final_label = result.verdict
    except Exception as e:
        logger.warning("stage2 failed for %s: %s", frame.frame_id, e)
        record.flags.append("unverified")
        record.final_label = "abnormal"  # fail closed at the last stage
    record.timings["stage2"] = time.perf_counter() - t2


def _dump_prompted(dump_dir: Path, frame_id: str, prompted: PromptedFrame) -> None:
    dump_dir = Path(dump_dir)
    dump_dir.mkdir(parents=True, exist_ok=True)
    (dump_dir / f"{frame_id}.png").write_bytes(encode_png(prompted.rendered))


def escalation_fraction(records: list[VerdictRecord]) -> float:
    """rho: stage-2 invocations over gate-active frames."""
    active = [r for r in records if r.gate == "active"]
    if not active:
        return 0.0
    escalated = sum(1 for r in active if r.stage2 is not None or "unverified" in r.flags)
    return escalated / len(active)


def model_throughput(t_coarse: float, t_fine: float, rho: float) -> float:
    """fps = 1 / (T_C + rho * T_F)."""
    if t_coarse <= 0 or t_fine <= 0 or not (0.0 <= rho <= 1.0):
        raise BadParams(f"t_coarse={t_coarse}, t_fine={t_fine}, rho={rho}")
    return 1.0 / (t_coarse + rho * t_fine)


# --- verdict persistence ----------------------------------------------------

def _health_to_dict(h: HealthResult | None):
    if h is None:
        return None
    return {
        "score": h.score,
        "verdict": h.verdict,
        "topk": [{"id": sc.candidate_id, "sim": sc.sim, "weight": sc.weight}
                 for sc in h.topk],
    }


def _health_from_dict(d) -> HealthResult | None:
    if d is None:
        return None
    from .scoring import ScoredCandidate
    return HealthResult(
        score=d["score"],
        topk=tuple(ScoredCandidate(sc["id"], sc["sim"], sc["weight"]) for sc in d["topk"]),
        verdict=d["verdict"],
    )


def record_to_dict(record: VerdictRecord) -> dict:
    return {
        "schema": VERDICT_SCHEMA,
        "frame_id": record.frame_id,
        "scene_id": record.scene_id,
        "seq": record.seq,
        "gate": record.gate,
        "p": record.p,
        "stage1": _health_to_dict(record.stage1),
        "stage2_caption": record.stage2_caption,
        "stage2": _health_to_dict(record.stage2),
        "final_label": record.final_label,
        "anomaly_score": record.anomaly_score,
        "timings": record.timings,
        "flags": record.flags,
    }


def record_from_dict(d: dict) -> VerdictRecord:
    if d.get("schema") != VERDICT_SCHEMA:
        from .errors import SchemaVersionMismatch
        raise SchemaVersionMismatch(f"expected {VERDICT_SCHEMA}, got {d.get('schema')!r}")
    return VerdictRecord(
        frame_id=d["frame_id"], scene_id=d["scene_id"], seq=d["seq"],
        gate=d["gate"], p=d["p"],
        stage1=_health_from_dict(d["stage1"]),
        stage2_caption=d["stage2_caption"],
        stage2=_health_from_dict(d["stage2"]),
        final_label=d["final_label"],
        anomaly_score=d["anomaly_score"],
        timings=d["timings"],
        flags=d["flags"],
    )


def save_verdicts(records: list[VerdictRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            f.write(json.dumps(record_to_dict(r)) + "\n")


def load_verdicts(path: str | Path) -> list[VerdictRecord]:
    records = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                records.append(record_from_dict(json.loads(line)))
    return records
