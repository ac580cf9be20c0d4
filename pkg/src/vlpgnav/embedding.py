"""Embedding provider contract, cosine similarity, and the synthetic oracle.

The synthetic provider maps simulated camera views (lists of visible object
labels with area fractions) to deterministic vectors, letting the whole
stack run and be tested without a real vision-language model. A remote
client speaks the sidecar wire protocol for real-model deployments.
"""

from __future__ import annotations

import base64
import hashlib
import json
from dataclasses import dataclass, field
from typing import Protocol, Sequence
from urllib import request as _urlrequest

import numpy as np

DEFAULT_DIM = 512
POSITIVE_PROMPT_TEMPLATE = "A photo of {object}"
NEGATIVE_PROMPT = "A photo of something else"
_BACKGROUND_LABEL = "__background__"


class EmbeddingError(ValueError):
    """Invalid embedding input (zero norm, length mismatch, bad prompt)."""


@dataclass(frozen=True)
class EmbeddingVector:
    """Fixed-length real vector with a cached L2 norm."""

    values: np.ndarray
    norm: float = field(init=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        norm = float(np.linalg.norm(values))
        if norm <= 0.0 or not np.isfinite(norm):
            raise EmbeddingError("embedding must have positive finite norm")
        object.__setattr__(self, "norm", norm)

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class PromptPair:
    """Positive/negative text prompts for one object query."""

    positive: str
    negative: str = NEGATIVE_PROMPT

    @classmethod
    def for_object(cls, obj: str) -> "PromptPair":
        obj = obj.strip()
        if not obj:
            raise EmbeddingError("object name must be non-empty")
        return cls(positive=POSITIVE_PROMPT_TEMPLATE.format(object=obj))


@dataclass(frozen=True)
class CameraObservation:
    """Simulated camera view: visible object labels with visible-area fractions.

    ``context`` is a coarse scene signature (quantized pose bin in the
    simulator) standing in for everything else a camera sees from a spot:
    walls, floor, lighting. It keeps views from different places apart in
    embedding space the way real view embeddings are.
    """

    visible: tuple[tuple[str, float], ...] = ()
    context: tuple[int, ...] = ()

    @classmethod
    def of(cls, items: Sequence[tuple[str, float]],
           context: Sequence[int] = ()) -> "CameraObservation":
        return cls(tuple((str(lbl), float(frac)) for lbl, frac in items),
                   tuple(int(c) for c in context))


class EmbeddingProvider(Protocol):
    """Deterministic image/text embedding source."""

    @property
    def dimension(self) -> int: ...

    def embed_image(self, observation) -> EmbeddingVector: ...

    def embed_text(self, prompt: str) -> EmbeddingVector: ...


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """a·b / (|a||b|), clamped to [-1, 1] against rounding."""
    if len(a) != len(b):
        raise EmbeddingError(f"length mismatch: {len(a)} vs {len(b)}")
    sim = float(np.dot(a.values, b.values)) / (a.norm * b.norm)
    return max(-1.0, min(1.0, sim))


def _label_unit_vector(label: str, dim: int) -> np.ndarray:
    """Fixed unit vector per label, seeded from a stable hash of the label."""
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    seed = int.from_bytes(digest[:8], "big")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


class SyntheticProvider:
    """Geometric embedding oracle.

    Image embedding = normalized weighted sum of per-label unit vectors
    (weight = visible-area fraction) plus the background vector weighted by
    the uncovered remainder. Text embedding of "A photo of X" is label X's
    unit vector; the negative prompt maps to the background vector.
    """

    def __init__(self, dim: int = DEFAULT_DIM, object_gain: float = 3.0,
                 context_weight: float = 0.35,
                 background_weight: float = 0.2):
        self._dim = dim
        self.object_gain = object_gain
        self.context_weight = context_weight
        self.background_weight = background_weight
        self._cache: dict[str, np.ndarray] = {}

    @property
    def dimension(self) -> int:
        return self._dim

    def _unit(self, label: str) -> np.ndarray:
        if label not in self._cache:
            self._cache[label] = _label_unit_vector(label, self._dim)
        return self._cache[label]

    def embed_image(self, observation: CameraObservation) -> EmbeddingVector:
        total = 0.0
        acc = np.zeros(self._dim)
        for label, frac in observation.visible:
            if frac < 0:
                raise EmbeddingError("area fraction must be nonnegative")
            acc += self.object_gain * frac * self._unit(label)
            total += frac
        # damped so a modest object presence still outranks the backdrop
        acc += self.background_weight * max(0.0, 1.0 - total) \
            * self._unit(_BACKGROUND_LABEL)
        if observation.context:
            ctx_key = "__ctx__" + ",".join(str(c) for c in observation.context)
            acc += self.context_weight * self._unit(ctx_key)
        norm = np.linalg.norm(acc)
        if norm == 0.0:
            acc = self._unit(_BACKGROUND_LABEL)
            norm = 1.0
        return EmbeddingVector(acc / norm)

    def embed_text(self, prompt: str) -> EmbeddingVector:
        if prompt == NEGATIVE_PROMPT:
            return EmbeddingVector(self._unit(_BACKGROUND_LABEL))
        prefix = POSITIVE_PROMPT_TEMPLATE.format(object="")
        if prompt.startswith(prefix) and len(prompt) > len(prefix):
            label = prompt[len(prefix):]
        else:
            label = prompt
        return EmbeddingVector(self._unit(label))


class RemoteProvider:
    """Client for the embedding sidecar service.

    Wire protocol: one JSON document per HTTP POST to /embed with
    {"op": "embed_text" | "embed_image", "payload": utf8 text or base64},
    response {"vector": [float...]}. Vector length is advertised at /info.
    """

    def __init__(self, base_url: str, timeout: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._dim: int | None = None

    @property
    def dimension(self) -> int:
        if self._dim is None:
            info = self._get_json("/info")
            self._dim = int(info["dimension"])
        return self._dim

    def _get_json(self, path: str) -> dict:
        with _urlrequest.urlopen(self.base_url + path, timeout=self.timeout) as resp:
            return json.loads(resp.read().decode("utf-8"))

    def _post_embed(self, op: str, payload: str) -> EmbeddingVector:
        body = json.dumps({"op": op, "payload": payload}).encode("utf-8")
        req = _urlrequest.Request(
            self.base_url + "/embed", data=body,
            headers={"Content-Type": "application/json"}, method="POST")
        with _urlrequest.urlopen(req, timeout=self.timeout) as resp:
            doc = json.loads(resp.read().decode("utf-8"))
        vec = EmbeddingVector(np.asarray(doc["vector"], dtype=np.float64))
        if len(vec) != self.dimension:
            raise EmbeddingError(
                f"server returned dimension {len(vec)}, advertised {self.dimension}")
        return vec

    def embed_text(self, prompt: str) -> EmbeddingVector:
        return self._post_embed("embed_text", prompt)

    def embed_image(self, image_bytes: bytes) -> EmbeddingVector:
        payload = base64.b64encode(image_bytes).decode("ascii")
        return self._post_embed("embed_image", payload)
