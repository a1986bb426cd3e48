"""Clients for the external model services, plus deterministic test doubles.

Four roles exist: image embedder, text embedder, captioner, and rule
generalizer. Each role has an HTTP client (OpenAI-compatible wire format),
a seeded mock (pure function of seed + input bytes), and a scripted
fixture backend for tests. All embedders return unit-normalized vectors
and cache results by content hash.
"""
from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BackendUnavailable, EmptyCaption, MalformedResponse
from .frames import encode_png
from .motion import PromptedFrame

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

ROLES = ("image_embed", "text_embed", "caption", "rule_llm")

DESC_PROMPT = (
    "How many moving subjects (e.g., people, animals, vehicles) are in the "
    "scene, and what is each one doing in this specific scenario?"
)
RULE_PROMPT = (
    "Based on the following list of observed activities, summarize the "
    "general rules that define normal behavior in this scene. Focus on "
    "consistent actions, interactions, and locations."
)


@dataclass
class BackendConfig:
    role: str
    url: str = ""
    model: str = "mock"
    timeout_s: float = 30.0
    max_in_flight: int = 4
    api_key_env: str | None = None

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown backend role: {self.role}")
        if self.timeout_s <= 0:
            raise ValueError("timeout_s must be positive")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")


def load_backend_configs(path: str | Path) -> dict[str, BackendConfig]:
    """Parse the TOML config file; CERBERUS_BACKEND_<ROLE>_URL overrides urls."""
    with open(path, "rb") as f:
        doc = tomllib.load(f)
    configs = {}
    for role, table in doc.get("backend", {}).items():
        cfg = BackendConfig(
            role=role,
            url=table.get("url", ""),
            model=table.get("model", "mock"),
            timeout_s=table.get("timeout_s", 30.0),
            max_in_flight=table.get("max_in_flight", 4),
            api_key_env=table.get("api_key_env"),
        )
        override = os.environ.get(f"CERBERUS_BACKEND_{role.upper()}_URL")
        if override:
            cfg.url = override
        configs[role] = cfg
    return configs


# --- caching ----------------------------------------------------------------

class LruCache:
    """Thread-safe LRU keyed by content hash, with optional disk spill."""

    def __init__(self, max_entries: int = 4096, spill_dir: str | Path | None = None):
        self._lock = threading.Lock()
        self._entries: OrderedDict[str, object] = OrderedDict()
        self._max = max_entries
        self._spill = Path(spill_dir) if spill_dir else None
        if self._spill:
            self._spill.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def key(role: str, model: str, payload: bytes) -> str:
        h = hashlib.sha256()
        h.update(role.encode())
        h.update(b"\0")
        h.update(model.encode())
        h.update(b"\0")
        h.update(payload)
        return h.hexdigest()

    def get(self, key: str):
        with self._lock:
            if key in self._entries:
                self._entries.move_to_end(key)
                return self._entries[key]
        if self._spill:
            path = self._spill / key
            if path.exists():
                value = json.loads(path.read_text())
                self.put(key, value)
                return value
        return None

    def put(self, key: str, value) -> None:
        with self._lock:
            self._entries[key] = value
            self._entries.move_to_end(key)
            while len(self._entries) > self._max:
                self._entries.popitem(last=False)
        if self._spill:
            (self._spill / key).write_text(json.dumps(value))


# --- deterministic vector expansion ----------------------------------------

def _hash_to_unit_vector(seed: int, payload: bytes, dim: int) -> np.ndarray:
    """Expand a seeded content hash into a deterministic unit vector."""
    digest = hashlib.sha256(seed.to_bytes(8, "little", signed=True) + payload).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


# --- text embedders ---------------------------------------------------------

class TextEmbedder:
    """Base: order-preserving batch embedding with content-hash caching."""

    def __init__(self, cache: LruCache | None = None, use_cache: bool = True):
        self.calls = 0  # outbound (non-cached) requests, for tests and metering
        self._cache = cache or LruCache()
        self._use_cache = use_cache
        self.model = "mock"

    def embed_texts(self, texts: list[str]) -> list[np.ndarray]:
        if not texts:
            raise ValueError("empty batch")
        out: list[np.ndarray | None] = [None] * len(texts)
        misses: list[int] = []
        for i, text in enumerate(texts):
            if self._use_cache:
                key = LruCache.key("text_embed", self.model, text.encode())
                hit = self._cache.get(key)
                if hit is not None:
                    out[i] = np.asarray(hit, dtype=np.float64)
                    continue
            misses.append(i)
        if misses:
            vectors = self._embed_raw([texts[i] for i in misses])
            if len(vectors) != len(misses):
                raise MalformedResponse(
                    f"asked for {len(misses)} embeddings, got {len(vectors)}")
            for i, vec in zip(misses, vectors):
                vec = np.asarray(vec, dtype=np.float64)
                vec = vec / np.linalg.norm(vec)
                out[i] = vec
                if self._use_cache:
                    key = LruCache.key("text_embed", self.model, texts[i].encode())
                    self._cache.put(key, vec.tolist())
        return [v for v in out]  # type: ignore[misc]

    def _embed_raw(self, texts: list[str]) -> list[np.ndarray]:
        raise NotImplementedError


class MockTextEmbedder(TextEmbedder):
    def __init__(self, dim: int = 64, seed: int = 0, latency_s: float = 0.0, **kw):
        super().__init__(**kw)
        self.dim = dim
        self.seed = seed
        self.latency_s = latency_s

    def _embed_raw(self, texts):
        self.calls += 1
        if self.latency_s:
            time.sleep(self.latency_s)
        return [_hash_to_unit_vector(self.seed, t.encode(), self.dim) for t in texts]


class ScriptedTextEmbedder(TextEmbedder):
    """Fixture table mapping text -> vector; unknown texts fall back to a mock."""

    def __init__(self, table: dict[str, np.ndarray], dim: int | None = None,
                 latency_s: float = 0.0, **kw):
        super().__init__(**kw)
        self.table = {k: np.asarray(v, dtype=np.float64) for k, v in table.items()}
        self.dim = dim or (len(next(iter(self.table.values()))) if self.table else 64)
        self.latency_s = latency_s

    def _embed_raw(self, texts):
        self.calls += 1
        if self.latency_s:
            time.sleep(self.latency_s)
        out = []
        for t in texts:
            if t in self.table:
                out.append(self.table[t])
            else:
                out.append(_hash_to_unit_vector(0, t.encode(), self.dim))
        return out


# --- image embedders --------------------------------------------------------

class ImageEmbedder:
    def __init__(self, cache: LruCache | None = None, use_cache: bool = True):
        self.calls = 0
        self._cache = cache or LruCache()
        self._use_cache = use_cache
        self.model = "mock"

    def embed_image(self, prompted: PromptedFrame) -> np.ndarray:
        """Embed the rendered (overlay-bearing) frame, not the raw one."""
        payload = encode_png(prompted.rendered)
        if self._use_cache:
            key = LruCache.key("image_embed", self.model, payload)
            hit = self._cache.get(key)
            if hit is not None:
                return np.asarray(hit, dtype=np.float64)
        vec = np.asarray(self._embed_raw(payload, prompted), dtype=np.float64)
        vec = vec / np.linalg.norm(vec)
        if self._use_cache:
            self._cache.put(key, vec.tolist())
        return vec

    def _embed_raw(self, payload: bytes, prompted: PromptedFrame) -> np.ndarray:
        raise NotImplementedError


class MockImageEmbedder(ImageEmbedder):
    def __init__(self, dim: int = 64, seed: int = 0, latency_s: float = 0.0, **kw):
        super().__init__(**kw)
        self.dim = dim
        self.seed = seed
        self.latency_s = latency_s

    def _embed_raw(self, payload, prompted):
        self.calls += 1
        if self.latency_s:
            time.sleep(self.latency_s)
        return _hash_to_unit_vector(self.seed, payload, self.dim)


class ScriptedImageEmbedder(ImageEmbedder):
    """Fixture table mapping frame_id -> vector."""

    def __init__(self, table: dict[str, np.ndarray], dim: int | None = None,
                 latency_s: float = 0.0, **kw):
        super().__init__(**kw)
        self.table = {k: np.asarray(v, dtype=np.float64) for k, v in table.items()}
        self.dim = dim or (len(next(iter(self.table.values()))) if self.table else 64)
        self.latency_s = latency_s

    def _embed_raw(self, payload, prompted):
        self.calls += 1
        if self.latency_s:
            time.sleep(self.latency_s)
        fid = prompted.frame.frame_id
        if fid in self.table:
            return self.table[fid]
        return _hash_to_unit_vector(0, payload, self.dim)


# --- captioners -------------------------------------------------------------

class Captioner:
    def __init__(self):
        self.calls = 0

    def caption(self, images: list[bytes], prompt_text: str, frame_id: str | None = None) -> str:
        self.calls += 1
        text = self._caption_raw(images, prompt_text, frame_id)
        if not text.strip():
            raise EmptyCaption(frame_id or "<unknown frame>")
        return text

    def _caption_raw(self, images, prompt_text, frame_id) -> str:
        raise NotImplementedError

    @property
    def supports_multi_image(self) -> bool:
        return True


class MockCaptioner(Captioner):
    """Deterministic digest caption, stable across runs."""

    def __init__(self, seed: int = 0, latency_s: float = 0.0):
        super().__init__()
        self.seed = seed
        self.latency_s = latency_s

    def _caption_raw(self, images, prompt_text, frame_id):
        if self.latency_s:
            time.sleep(self.latency_s)
        h = hashlib.sha256(self.seed.to_bytes(8, "little", signed=True))
        for img in images:
            h.update(img)
        h.update(prompt_text.encode())
        return f"A scene with activity pattern {h.hexdigest()[:12]}."


class ScriptedCaptioner(Captioner):
    """Fixture table mapping frame_id -> caption."""

    def __init__(self, table: dict[str, str], default: str | None = None,
                 latency_s: float = 0.0, fail_ids: set[str] | None = None):
        super().__init__()
        self.table = dict(table)
        self.default = default
        self.latency_s = latency_s
        self.fail_ids = fail_ids or set()

    def _caption_raw(self, images, prompt_text, frame_id):
        if self.latency_s:
            time.sleep(self.latency_s)
        if frame_id in self.fail_ids:
            raise BackendUnavailable(f"scripted failure for {frame_id}")
        if frame_id in self.table:
            return self.table[frame_id]
        if self.default is not None:
            return self.default
        raise BackendUnavailable(f"no scripted caption for {frame_id}")


# --- rule generalizers ------------------------------------------------------

class RuleLLM:
    def __init__(self):
        self.calls = 0

    def complete(self, prompt_text: str, documents: list[str]) -> str:
        self.calls += 1
        return self._complete_raw(prompt_text, documents)

    def _complete_raw(self, prompt_text, documents) -> str:
        raise NotImplementedError


class MockRuleLLM(RuleLLM):
    """Echoes one rule per input document; deterministic concatenation stub."""

    def _complete_raw(self, prompt_text, documents):
        lines = []
        seen = set()
        for doc in documents:
            line = doc.strip().rstrip(".")
            if line and line.lower() not in seen:
                seen.add(line.lower())
                lines.append(f"- {line}")
        return "\n".join(lines)


class ScriptedRuleLLM(RuleLLM):
    def __init__(self, response: str):
        super().__init__()
        self.response = response

    def _complete_raw(self, prompt_text, documents):
        return self.response


# --- HTTP clients (OpenAI-compatible) ---------------------------------------

def _post_json(cfg: BackendConfig, path: str, payload: dict,
               semaphore: threading.BoundedSemaphore) -> dict:
    """POST with 2 retries and exponential backoff on transport errors only."""
    import requests

    headers = {"Content-Type": "application/json"}
    if cfg.api_key_env:
        key = os.environ.get(cfg.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
    url = cfg.url.rstrip("/") + path
    last_error: Exception | None = None
    for attempt in range(3):
        try:
            with semaphore:
                resp = requests.post(url, json=payload, headers=headers,
                                     timeout=cfg.timeout_s)
            resp.raise_for_status()
            try:
                return resp.json()
            except ValueError as e:
                raise MalformedResponse(f"non-JSON response from {url}") from e
        except MalformedResponse:
            raise
        except Exception as e:  # transport-level: retry
            last_error = e
            if attempt < 2:
                time.sleep(0.25 * (2 ** attempt))
    raise BackendUnavailable(str(last_error))


class HttpTextEmbedder(TextEmbedder):
    def __init__(self, cfg: BackendConfig, **kw):
        super().__init__(**kw)
        self.cfg = cfg
        self.model = cfg.model
        self._sem = threading.BoundedSemaphore(cfg.max_in_flight)

    def _embed_raw(self, texts):
        self.calls += 1
        doc = _post_json(self.cfg, "/v1/embeddings",
                         {"model": self.cfg.model, "input": texts}, self._sem)
        try:
            data = sorted(doc["data"], key=lambda d: d["index"])
            vectors = [np.asarray(d["embedding"], dtype=np.float64) for d in data]
        except (KeyError, TypeError) as e:
            raise MalformedResponse(str(e)) from e
        dims = {v.shape[0] for v in vectors}
        if len(vectors) != len(texts) or len(dims) > 1:
            raise MalformedResponse("count/dim mismatch in embedding response")
        return vectors


class HttpImageEmbedder(ImageEmbedder):
    """Sends the rendered frame PNG base64-encoded; a documented extension
    of the embeddings endpoint, since no standard exists for image input."""

    def __init__(self, cfg: BackendConfig, **kw):
        super().__init__(**kw)
        self.cfg = cfg
        self.model = cfg.model
        self._sem = threading.BoundedSemaphore(cfg.max_in_flight)

    def _embed_raw(self, payload, prompted):
        import base64

        self.calls += 1
        doc = _post_json(self.cfg, "/v1/embeddings", {
            "model": self.cfg.model,
            "input": [{"type": "image_b64", "data": base64.b64encode(payload).decode()}],
        }, self._sem)
        try:
            return np.asarray(doc["data"][0]["embedding"], dtype=np.float64)
        except (KeyError, IndexError, TypeError) as e:
            raise MalformedResponse(str(e)) from e


class HttpCaptioner(Captioner):
    def __init__(self, cfg: BackendConfig):
        super().__init__()
        self.cfg = cfg
        self._sem = threading.BoundedSemaphore(cfg.max_in_flight)

    def _caption_raw(self, images, prompt_text, frame_id):
        import base64

        content: list[dict] = [{"type": "text", "text": prompt_text}]
        for img in images:
            content.append({"type": "image_url", "image_url": {
                "url": "data:image/png;base64," + base64.b64encode(img).decode()}})
        doc = _post_json(self.cfg, "/v1/chat/completions", {
            "model": self.cfg.model,
            "messages": [{"role": "user", "content": content}],
        }, self._sem)
        try:
            return doc["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as e:
            raise MalformedResponse(str(e)) from e


class HttpRuleLLM(RuleLLM):
    def __init__(self, cfg: BackendConfig):
        super().__init__()
        self.cfg = cfg
        self._sem = threading.BoundedSemaphore(cfg.max_in_flight)

    def _complete_raw(self, prompt_text, documents):
        body = prompt_text + "\n\n" + "\n".join(f"- {d}" for d in documents)
        doc = _post_json(self.cfg, "/v1/chat/completions", {
            "model": self.cfg.model,
            "messages": [{"role": "user", "content": body}],
        }, self._sem)
        try:
            return doc["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as e:
            raise MalformedResponse(str(e)) from e


# --- module-level op surface ------------------------------------------------

def embed_texts(backend: TextEmbedder, texts: list[str]) -> list[np.ndarray]:
    return backend.embed_texts(texts)


def embed_image(backend: ImageEmbedder, prompted: PromptedFrame) -> np.ndarray:
    return backend.embed_image(prompted)


def caption_frame(backend: Captioner, images: list[bytes], prompt_text: str,
                  frame_id: str | None = None) -> str:
    return backend.caption(images, prompt_text, frame_id=frame_id)


def complete_rules(backend: RuleLLM, prompt_text: str, documents: list[str]) -> str:
    return backend.complete(prompt_text, documents)


@dataclass
class BackendSet:
    """The four role clients bundled for pipeline code."""

    image_embedder: ImageEmbedder
    text_embedder: TextEmbedder
    captioner: Captioner
    rule_llm: RuleLLM

    @classmethod
    def mocks(cls, dim: int = 64, seed: int = 0) -> "BackendSet":
        return cls(
            image_embedder=MockImageEmbedder(dim=dim, seed=seed),
            text_embedder=MockTextEmbedder(dim=dim, seed=seed),
            captioner=MockCaptioner(seed=seed),
            rule_llm=MockRuleLLM(),
        )

    @classmethod
    def from_configs(cls, configs: dict[str, BackendConfig]) -> "BackendSet":
        return cls(
            image_embedder=HttpImageEmbedder(configs["image_embed"]),
            text_embedder=HttpTextEmbedder(configs["text_embed"]),
            captioner=HttpCaptioner(configs["caption"]),
            rule_llm=HttpRuleLLM(configs["rule_llm"]),
        )
