"""Visual-language pose graph: similarity-gated insertion, scoring, top-k.

Nodes pair a robot pose with the embedding of the camera view from that
pose. A new node is only accepted when its embedding is dissimilar
(cosine < epsilon) to every stored embedding, which keeps the graph sparse
relative to a dense per-cell embedding map.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .embedding import EmbeddingProvider, EmbeddingVector, PromptPair, cosine_similarity
from .geometry import Pose2D

DEFAULT_EPSILON = 0.97
DEFAULT_TOP_K = 20


@dataclass(frozen=True)
class VlpgNode:
    id: int
    pose: Pose2D
    embedding: EmbeddingVector
    timestamp: float = 0.0


@dataclass(frozen=True)
class NodeScore:
    node: VlpgNode
    score: float
    background: bool


@dataclass
class Vlpg:
    """Pose graph with similarity-gated insertion.

    Edges chain consecutively accepted nodes with their relative pose; no
    optimization is performed on them.
    """

    insertion_epsilon: float = DEFAULT_EPSILON
    nodes: list[VlpgNode] = field(default_factory=list)
    edges: list[tuple[int, int, Pose2D]] = field(default_factory=list)

    def __post_init__(self):
        if not (0.0 < self.insertion_epsilon <= 1.0):
            raise ValueError("insertion_epsilon must be in (0, 1]")
        self._units: list[np.ndarray] = [
            n.embedding.values / n.embedding.norm for n in self.nodes]

    def __len__(self) -> int:
        return len(self.nodes)

    def record_node(self, pose: Pose2D, embedding: EmbeddingVector,
                    timestamp: float = 0.0) -> bool:
        """Append a node iff its embedding clears the similarity gate."""
        unit = embedding.values / embedding.norm
        if self._units:
            sims = np.asarray(self._units) @ unit
            if float(sims.max()) >= self.insertion_epsilon:
                return False
        node_id = self.nodes[-1].id + 1 if self.nodes else 0
        node = VlpgNode(node_id, pose, embedding, timestamp)
        if self.nodes:
            prev = self.nodes[-1]
            rel = Pose2D(pose.x - prev.pose.x, pose.y - prev.pose.y,
                         pose.theta - prev.pose.theta)
            self.edges.append((prev.id, node_id, rel))
        self.nodes.append(node)
        self._units.append(unit)
        return True

    def score_nodes(self, prompts: PromptPair,
                    provider: EmbeddingProvider) -> list[NodeScore]:
        """Cosine similarity of each node against the positive prompt.

        Nodes more similar to the negative prompt are flagged background.
        """
        if not self.nodes:
            raise ValueError("cannot score an empty graph")
        pos = provider.embed_text(prompts.positive)
        neg = provider.embed_text(prompts.negative)
        out = []
        for node in self.nodes:
            s_pos = cosine_similarity(node.embedding, pos)
            s_neg = cosine_similarity(node.embedding, neg)
            out.append(NodeScore(node, s_pos, background=s_neg > s_pos))
        return out

    # -- persistence: line-delimited JSON, header line then one node per line --

    def save(self, path: str | Path):
        path = Path(path)
        with path.open("w") as f:
            header = {"insertion_epsilon": self.insertion_epsilon,
                      "embedding_length": len(self.nodes[0].embedding) if self.nodes else 0}
            f.write(json.dumps(header) + "\n")
            for node in self.nodes:
                rec = {"id": node.id,
                       "pose": [node.pose.x, node.pose.y, node.pose.theta],
                       "timestamp": node.timestamp,
                       "embedding": node.embedding.values.tolist()}
                f.write(json.dumps(rec) + "\n")
            for a, b, rel in self.edges:
                f.write(json.dumps({"edge": [a, b],
                                    "rel": [rel.x, rel.y, rel.theta]}) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Vlpg":
        path = Path(path)
        with path.open() as f:
            header = json.loads(f.readline())
            graph = cls(insertion_epsilon=header["insertion_epsilon"])
            for line in f:
                rec = json.loads(line)
                if "edge" in rec:
                    a, b = rec["edge"]
                    rx, ry, rt = rec["rel"]
                    graph.edges.append((a, b, Pose2D(rx, ry, rt)))
                else:
                    x, y, t = rec["pose"]
                    graph.nodes.append(VlpgNode(
                        rec["id"], Pose2D(x, y, t),
                        EmbeddingVector(np.asarray(rec["embedding"])),
                        rec["timestamp"]))
        graph._units = [n.embedding.values / n.embedding.norm
                        for n in graph.nodes]
        return graph


def top_k(scores: list[NodeScore], k: int) -> list[NodeScore]:
    """Best k non-background nodes, descending score, ties by lower id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    eligible = [s for s in scores if not s.background]
    eligible.sort(key=lambda s: (-s.score, s.node.id))
    return eligible[:k]
