"""Frozen network snapshots and their CSV/JSON on-disk form."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class Snapshot:
    """Node table plus edge multiset observed at time ``t``.

    Edges are stored once per distinct unordered pair with ``id_a <= id_b``
    and a multiplicity.  Degrees count multiplicity, and a self-loop adds 2
    to its node's degree.
    """

    t: float
    node_id: np.ndarray
    age: np.ndarray
    social_index: np.ndarray
    degree: np.ndarray
    edge_a: np.ndarray
    edge_b: np.ndarray
    multiplicity: np.ndarray
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_edges(cls, t, node_id, age, social_index, ends_a, ends_b, meta=None):
        """Build from one row per edge copy, ids given in any order."""
        node_id = np.asarray(node_id, dtype=np.int64)
        ends_a = np.asarray(ends_a, dtype=np.int64)
        ends_b = np.asarray(ends_b, dtype=np.int64)
        lo = np.minimum(ends_a, ends_b)
        hi = np.maximum(ends_a, ends_b)
        if lo.size:
            pairs, mult = np.unique(np.stack([lo, hi], axis=1), axis=0,
                                    return_counts=True)
            ea, eb = pairs[:, 0], pairs[:, 1]
        else:
            ea = eb = np.zeros(0, dtype=np.int64)
            mult = np.zeros(0, dtype=np.int64)
        order = np.argsort(node_id, kind="stable")
        node_id = node_id[order]
        pos_a = np.searchsorted(node_id, ea)
        pos_b = np.searchsorted(node_id, eb)
        degree = (np.bincount(pos_a, weights=mult, minlength=node_id.size)
                  + np.bincount(pos_b, weights=mult, minlength=node_id.size))
        return cls(
            t=float(t),
            node_id=node_id,
            age=np.asarray(age, dtype=float)[order],
            social_index=np.asarray(social_index, dtype=float)[order],
            degree=degree.astype(np.int64),
            edge_a=ea.astype(np.int64),
            edge_b=eb.astype(np.int64),
            multiplicity=mult.astype(np.int64),
            meta=dict(meta or {}),
        )

    @property
    def n_nodes(self) -> int:
        return int(self.node_id.size)

    @property
    def self_loop(self) -> np.ndarray:
        return self.edge_a == self.edge_b

    @property
    def n_edges(self) -> int:
        """Number of edge copies, loops and repeats included."""
        return int(self.multiplicity.sum())

    @property
    def n_self_loops(self) -> int:
        return int(self.multiplicity[self.self_loop].sum())

    @property
    def n_multi_edges(self) -> int:
        """Surplus copies on non-loop pairs: sum of (multiplicity - 1)."""
        m = self.multiplicity[~self.self_loop]
        return int((m - 1).sum())

    def index_of(self, ids) -> np.ndarray:
        """Row positions of the given node ids."""
        return np.searchsorted(self.node_id, np.asarray(ids, dtype=np.int64))


def _fmt(x: float) -> str:
    return repr(float(x))


def write_snapshot(snap: Snapshot, directory, sidecar: dict | None = None) -> dict:
    """Write ``nodes.csv``, ``edges.csv`` and ``meta.json`` under ``directory``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "nodes.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "age", "social_index", "degree"])
        for i, a, s, k in zip(snap.node_id, snap.age, snap.social_index, snap.degree):
            w.writerow([int(i), _fmt(a), _fmt(s), int(k)])
    with open(d / "edges.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id_a", "id_b", "multiplicity", "self_loop"])
        for a, b, m in zip(snap.edge_a, snap.edge_b, snap.multiplicity):
            w.writerow([int(a), int(b), int(m), int(a == b)])
    meta = {"t": snap.t, "n_nodes": snap.n_nodes, "n_edges": snap.n_edges,
            "n_self_loops": snap.n_self_loops, "n_multi_edges": snap.n_multi_edges}
    meta.update(snap.meta)
    meta.update(sidecar or {})
    with open(d / "meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return meta


def _read_rows(path: Path) -> list[list[str]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[1:]


def read_snapshot(directory) -> Snapshot:
    d = Path(directory)
    nodes = _read_rows(d / "nodes.csv")
    edges = _read_rows(d / "edges.csv")
    meta = json.loads((d / "meta.json").read_text())
    snap = Snapshot(
        t=float(meta["t"]),
        node_id=np.array([int(r[0]) for r in nodes], dtype=np.int64),
        age=np.array([float(r[1]) for r in nodes], dtype=float),
        social_index=np.array([float(r[2]) for r in nodes], dtype=float),
        degree=np.array([int(r[3]) for r in nodes], dtype=np.int64),
        edge_a=np.array([int(r[0]) for r in edges], dtype=np.int64),
        edge_b=np.array([int(r[1]) for r in edges], dtype=np.int64),
        multiplicity=np.array([int(r[2]) for r in edges], dtype=np.int64),
        meta={k: v for k, v in meta.items()
              if k not in ("t", "n_nodes", "n_edges", "n_self_loops", "n_multi_edges")},
    )
    return snap
