"""Hard-clustering result type and its JSONL dump formats."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class Clustering:
    n_clusters: int
    assignment: np.ndarray
    objective_trace: tuple[float, ...] = ()
    n_sweeps: int = 0

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=np.int64)
        a.setflags(write=False)
        object.__setattr__(self, "assignment", a)
        if a.size and (a.min() < 0 or a.max() >= self.n_clusters):
            raise ValueError("assignment index out of range")

    @property
    def objective(self) -> float:
        return self.objective_trace[-1] if self.objective_trace else float("nan")

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.n_clusters)

    @property
    def empty_clusters(self) -> int:
        return int((self.sizes() == 0).sum())

    def __eq__(self, other):
        if not isinstance(other, Clustering):
            return NotImplemented
        return (
            self.n_clusters == other.n_clusters
            and np.array_equal(self.assignment, other.assignment)
            and self.objective_trace == other.objective_trace
            and self.n_sweeps == other.n_sweeps
        )

    __hash__ = None


def dump_clustering(clustering: Clustering, ids: Sequence[str], path: str | Path) -> None:
    if len(ids) != len(clustering.assignment):
        raise ValueError("ids and assignment differ in length")
    with open(path, "w", encoding="utf-8") as fh:
        for doc_id, c in zip(ids, clustering.assignment.tolist()):
            fh.write(json.dumps({"doc": doc_id, "cluster": c}) + "\n")


def load_clustering_dump(path: str | Path) -> tuple[list[str], np.ndarray]:
    ids, clusters = [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                ids.append(rec["doc"])
                clusters.append(int(rec["cluster"]))
    return ids, np.asarray(clusters, dtype=np.int64)


def dump_trace(clustering: Clustering, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for v in clustering.objective_trace:
            fh.write(f"{v!r}\n")
