"""Health-score kernel shared by both cascade stages.

A query embedding (image or caption) is compared against the candidate
pool; the k best cosine matches contribute +sim for normal-side candidates
and -sim for anomaly-side ones. Scores below tau flag the frame abnormal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyPool,
    InsufficientCalibrationData,
    ZeroVector,
)


@dataclass(frozen=True)
class ScoredCandidate:
    candidate_id: int
    sim: float
    weight: int


@dataclass(frozen=True)
class HealthResult:
    score: float
    topk: tuple[ScoredCandidate, ...]
    verdict: str | None = None  # normal | abnormal


def normalize(v) -> np.ndarray:
    """L2-normalize a vector; done once at ingestion so cosine is a dot."""
    arr = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ZeroVector("non-finite embedding")
    norm = float(np.linalg.norm(arr))
    if norm == 0.0:
        raise ZeroVector("zero-norm embedding")
    return arr / norm


def cosine(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimensionMismatch(f"{u.shape} vs {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise ZeroVector("cosine undefined for zero vector")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def top_k(sims, k: int) -> list[int]:
    """Indices of the k largest sims, descending; ties break by ascending id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    sims = np.asarray(sims, dtype=np.float64)
    # sort by (-sim, id) for a deterministic tie order
    order = sorted(range(len(sims)), key=lambda i: (-sims[i], i))
    return order[: min(k, len(sims))]


def health_score(query, pool_embeddings, polarities, k: int) -> HealthResult:
    """Signed top-k similarity sum; verdict left to classify()."""
    pool = np.asarray(pool_embeddings, dtype=np.float64)
    if pool.size == 0 or len(pool) == 0:
        raise EmptyPool("candidate pool is empty")
    if len(pool) != len(polarities):
        raise DimensionMismatch("pool/polarity length mismatch")
    q = np.asarray(query, dtype=np.float64)
    if q.shape[0] != pool.shape[1]:
        raise DimensionMismatch(f"query dim {q.shape[0]} vs pool dim {pool.shape[1]}")
    sims = np.clip(pool @ q, -1.0, 1.0)
    chosen = top_k(sims, k)
    topk = tuple(
        ScoredCandidate(candidate_id=i, sim=float(sims[i]), weight=int(polarities[i]))
        for i in chosen
    )
    score = 0.0
    for sc in topk:
        score += sc.weight * sc.sim
    return HealthResult(score=score, topk=topk)


def classify(score: float, tau: float) -> str:
    return "abnormal" if score < tau else "normal"


def with_verdict(result: HealthResult, tau: float) -> HealthResult:
    return HealthResult(score=result.score, topk=result.topk,
                        verdict=classify(result.score, tau))


def logistic(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))


def calibrate_tau(normal_scores, target_pass_rate: float) -> float:
    """Pick tau so that >= target_pass_rate of calibration normals pass.

    Lower-interpolation quantile: with n scores sorted ascending, tau is the
    element at floor((1 - rate) * (n - 1)).
    """
    scores = sorted(float(s) for s in normal_scores)
    if len(scores) < 20:
        raise InsufficientCalibrationData(f"need >= 20 scores, got {len(scores)}")
    if not (0.0 < target_pass_rate < 1.0):
        raise ValueError("target_pass_rate must be in (0, 1)")
    n = len(scores)
    idx = int(math.floor((1.0 - target_pass_rate) * (n - 1)))
    return scores[idx]
