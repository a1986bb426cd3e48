"""Offline rule induction: segment normal video, caption, generalize.

Produces a version-1 rule base with the configured perturbed label list
attached. Deterministic given scripted backends.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from . import backends as be
from .errors import BackendUnavailable, EmptyInput, UnparseableResponse
from .frames import Frame, encode_png
from .rulebase import PoolParams, Rule, RuleBase, load_perturbed_labels, normalize_text

logger = logging.getLogger(__name__)

DEFAULT_SEGMENT_LEN = 8
DEFAULT_STRIDE = 8


@dataclass(frozen=True)
class Segment:
    scene_id: str
    frame_ids: tuple[str, ...]

    @property
    def length(self) -> int:
        return len(self.frame_ids)


@dataclass(frozen=True)
class Description:
    segment: Segment
    text: str
    model_id: str = "mock"


def extract_segments(frames: list[Frame], segment_len: int = DEFAULT_SEGMENT_LEN,
                     stride: int = DEFAULT_STRIDE) -> list[Segment]:
    """Consecutive windows per scene; trailing partial windows are dropped."""
    if segment_len < 1 or stride < 1:
        raise ValueError("segment_len and stride must be >= 1")
    if not frames:
        raise EmptyInput("no frames")
    # group by scene, preserving input order; windows never cross scenes
    by_scene: dict[str, list[Frame]] = {}
    for f in frames:
        by_scene.setdefault(f.scene_id, []).append(f)
    segments = []
    for scene_id, scene_frames in by_scene.items():
        for start in range(0, len(scene_frames) - segment_len + 1, stride):
            window = scene_frames[start:start + segment_len]
            segments.append(Segment(
                scene_id=scene_id,
                frame_ids=tuple(f.frame_id for f in window),
            ))
    return segments


def describe_segments(segments: list[Segment], captioner: be.Captioner,
                      frames_by_id: dict[str, Frame],
                      max_in_flight: int = 4) -> list[Description]:
    """One caption per segment with the description prompt.

    Individual failures are logged and skipped; only a total wipeout raises.
    Results come back in segment order regardless of dispatch order.
    """
    if not segments:
        return []

    def one(segment: Segment) -> Description | None:
        if captioner.supports_multi_image:
            images = [encode_png(frames_by_id[fid].load()) for fid in segment.frame_ids]
        else:
            mid = segment.frame_ids[len(segment.frame_ids) // 2]
            images = [encode_png(frames_by_id[mid].load())]
        try:
            text = captioner.caption(images, be.DESC_PROMPT, frame_id=segment.frame_ids[0])
        except Exception as e:
            logger.warning("caption failed for segment %s: %s", segment.frame_ids[0], e)
            return None
        return Description(segment=segment, text=text)

    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        results = list(pool.map(one, segments))
    described = [d for d in results if d is not None]
    if not described:
        raise BackendUnavailable("all segment captions failed")
    return described


def parse_rules(response: str) -> list[str]:
    """One rule per line/bullet; accepts '-', '*', 'N.' prefixes and bare lines."""
    rules = []
    for line in response.splitlines():
        line = line.strip()
        if not line:
            continue
        if line[0] in "-*":
            line = line[1:].strip()
        elif line.split(".", 1)[0].isdigit():
            line = line.split(".", 1)[1].strip()
        if line:
            rules.append(line)
    return rules


def generalize_rules(descriptions: list[Description], rule_llm: be.RuleLLM,
                     created_version: int = 1) -> list[Rule]:
    """Single-request abstraction of all descriptions into general rules."""
    if not descriptions:
        raise EmptyInput("no descriptions to generalize")
    response = rule_llm.complete(be.RULE_PROMPT, [d.text for d in descriptions])
    texts = parse_rules(response)
    if not texts:
        raise UnparseableResponse("no rules extracted from response")
    rules = []
    seen = set()
    for text in texts:
        key = normalize_text(text)
        if key in seen:
            continue
        seen.add(key)
        rules.append(Rule(text=text, source="induced", created_version=created_version))
    return rules


def induce_rulebase(normal_frames: list[Frame], backend_set: be.BackendSet,
                    params: PoolParams | None = None,
                    perturbed_labels_path=None,
                    stride: int | None = None) -> RuleBase:
    """End-to-end offline induction: segments -> captions -> rules -> RuleBase."""
    if not normal_frames:
        raise EmptyInput("no normal frames")
    params = params or PoolParams()
    segments = extract_segments(normal_frames, params.segment_len,
                                stride or params.segment_len)
    if not segments:
        raise EmptyInput(
            f"fewer than segment_len={params.segment_len} frames per scene")
    frames_by_id = {f.frame_id: f for f in normal_frames}
    descriptions = describe_segments(segments, backend_set.captioner, frames_by_id)
    rules = generalize_rules(descriptions, backend_set.rule_llm, created_version=1)
    return RuleBase(
        version=1,
        normal_rules=tuple(rules),
        perturbed_labels=load_perturbed_labels(perturbed_labels_path),
        custom_anomaly_rules=(),
        params=params,
    )
