"""Shared fixtures: synthetic frame streams and scripted backend worlds.

The "world" fixture engineers embedding geometry on an orthonormal basis:
normal-rule candidates map to dedicated axes, perturbed candidates to
others, and each synthetic frame's image embedding is placed to force a
chosen stage-1 outcome. Stage-2 captions reuse candidate sentences so
their text embeddings land on the same axes.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pytest

from cerberus.backends import BackendSet, ScriptedCaptioner, ScriptedImageEmbedder, ScriptedTextEmbedder
from cerberus.frames import Frame
from cerberus.rulebase import PoolParams, Rule, RuleBase, build_candidate_pool

DIM = 16
FRAME_SIZE = 32  # pixels per side


def basis(i: int) -> np.ndarray:
    v = np.zeros(DIM)
    v[i] = 1.0
    return v


def make_rulebase(n_normal: int = 3, n_perturbed: int = 10,
                  params: PoolParams | None = None) -> RuleBase:
    normal = tuple(
        Rule(text=f"people walk calmly along path {i}", source="induced", created_version=1)
        for i in range(n_normal)
    )
    labels = tuple(f"suspicious activity variant {i}" for i in range(n_perturbed))
    return RuleBase(version=1, normal_rules=normal, perturbed_labels=labels,
                    params=params or PoolParams())


def synthetic_frames(spec: list[tuple[str, bool, int]], seed: int = 7) -> list[Frame]:
    """Build a frame stream from (frame_id, active, label) tuples.

    Active frames show a bright square that moves every step; static frames
    repeat the previous image exactly.
    """
    rng = np.random.default_rng(seed)
    background = rng.integers(0, 60, size=(FRAME_SIZE, FRAME_SIZE, 3), dtype=np.uint8)
    frames = []
    prev = background.copy()
    step = 0
    for seq, (fid, active, label) in enumerate(spec):
        if active:
            img = background.copy()
            x = 4 + (step * 5) % (FRAME_SIZE - 12)
            y = 4 + (step * 3) % (FRAME_SIZE - 12)
            img[y:y + 6, x:x + 6] = 250
            # unique per-step marker so no two active frames share pixels
            # (content-hash caches must not alias distinct frames)
            img[0, 0] = (step % 256, (step // 256) % 256, 255)
            step += 1
        else:
            img = prev.copy()
        frames.append(Frame(frame_id=fid, scene_id="s0", seq=seq, image=img, label=label))
        prev = img
    return frames


@dataclass
class World:
    """A fully scripted universe: rulebase, frames, truth, and backends."""

    rulebase: RuleBase
    frames: list[Frame]
    truth: list[int]
    backend_set: BackendSet
    text_table: dict[str, np.ndarray]
    normal_caption: str
    anomaly_caption: str
    image_table: dict[str, np.ndarray] = field(default_factory=dict)


def build_world(n_static: int = 20, n_clear: int = 20, n_fp: int = 4,
                n_detected: int = 4, n_missed: int = 1,
                image_latency: float = 0.0, caption_latency: float = 0.0,
                seed: int = 7) -> World:
    """Engineer a stream with known per-frame cascade outcomes.

    clear: active normals aligned with a normal rule (stage-1 S = +1).
    fp: active normals that look anomalous to stage 1 (S ~ -1.73) but
        caption normally, so stage 2 clears them.
    detected: anomalies anti-aligned (S = -1) with anomalous captions.
    missed: anomalies whose image embedding still leans normal
        (S ~ +0.46) but whose captions are anomalous.
    """
    rulebase = make_rulebase()
    pool = build_candidate_pool(rulebase)
    n_normal_rules = len(rulebase.normal_rules)

    # one dedicated axis per candidate, keyed by sentence text
    text_table = {cand.text: basis(cand.id) for cand in pool.candidates}
    normal_caption = pool.candidates[0].text       # maps to a normal axis
    anomaly_caption = pool.candidates[n_normal_rules].text  # perturbed axis

    # interleave the roles deterministically across the stream
    roles = (["static"] * n_static + ["clear"] * n_clear + ["fp"] * n_fp
             + ["detected"] * n_detected + ["missed"] * n_missed)
    rng = np.random.default_rng(seed + 1)
    rng.shuffle(roles)
    # the first frame of a scene has no predecessor and is always gated
    # static; pin a static role there so no engineered role is absorbed
    if "static" in roles and roles[0] != "static":
        roles[roles.index("static")] = roles[0]
        roles[0] = "static"

    spec = []
    image_table = {}
    caption_table = {}
    truth = []
    e_norm = basis(0)
    e_anom = basis(n_normal_rules)
    fp_vec = (basis(n_normal_rules) + basis(n_normal_rules + 1)
              + basis(n_normal_rules + 2)) / np.sqrt(3.0)
    missed_vec = 0.9 * e_norm + np.sqrt(1 - 0.81) * e_anom
    for i, role in enumerate(roles):
        fid = f"f{i:04d}"
        label = 1 if role in ("detected", "missed") else 0
        spec.append((fid, role != "static", label))
        truth.append(label)
        if role == "clear":
            image_table[fid] = e_norm
            caption_table[fid] = normal_caption
        elif role == "fp":
            image_table[fid] = fp_vec
            caption_table[fid] = normal_caption
        elif role == "detected":
            image_table[fid] = e_anom
            caption_table[fid] = anomaly_caption
        elif role == "missed":
            image_table[fid] = missed_vec
            caption_table[fid] = anomaly_caption

    frames = synthetic_frames(spec, seed=seed)
    backend_set = BackendSet(
        image_embedder=ScriptedImageEmbedder(image_table, dim=DIM,
                                             latency_s=image_latency),
        text_embedder=ScriptedTextEmbedder(text_table, dim=DIM),
        captioner=ScriptedCaptioner(caption_table, default=normal_caption,
                                    latency_s=caption_latency),
        rule_llm=None,
    )
    return World(rulebase=rulebase, frames=frames, truth=truth,
                 backend_set=backend_set, text_table=text_table,
                 normal_caption=normal_caption, anomaly_caption=anomaly_caption,
                 image_table=image_table)


@pytest.fixture
def small_world() -> World:
    return build_world()
