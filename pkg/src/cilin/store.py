"""File-backed snapshot store for the knowledge graph.

A snapshot holds five record collections (entities, senses, triples, edges,
path assignments) plus a manifest.  Persistence is line-delimited JSON with
records sorted by primary key, so identical snapshots serialize to identical
bytes.  Every save and load re-validates referential integrity and edge
acyclicity.
"""
from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .disambiguation import UNASSIGNED
from .errors import IntegrityError, SnapshotLoadError
from .hierarchy import ScoredEdge, paths_to_roots

FORMAT_VERSION = 1
MANIFEST_FILE = "manifest.json"
RECORD_FILES = {
    "entities": "entities.jsonl",
    "senses": "senses.jsonl",
    "triples": "triples.jsonl",
    "edges": "edges.jsonl",
    "assignments": "assignments.jsonl",
}
EPOCH_TIMESTAMP = "1970-01-01T00:00:00Z"


@dataclass(frozen=True)
class EntityRecord:
    name: str
    sense_ids: tuple[str, ...]


@dataclass(frozen=True)
class SenseRecord:
    entity: str
    sense_id: str
    phrases: tuple[str, ...]


@dataclass(frozen=True)
class TripleRecord:
    head: str
    sense_id: str
    relation: str
    value: str


@dataclass(frozen=True)
class AssignmentRecord:
    entity: str
    nodes: tuple[str, ...]
    sense_id: str | None  # None when the path stayed unassigned
    score: float


@dataclass
class StoreSnapshot:
    entities: list[EntityRecord] = field(default_factory=list)
    senses: list[SenseRecord] = field(default_factory=list)
    triples: list[TripleRecord] = field(default_factory=list)
    edges: list[ScoredEdge] = field(default_factory=list)
    assignments: list[AssignmentRecord] = field(default_factory=list)
    manifest: dict = field(default_factory=dict)

    def sorted_copy(self) -> "StoreSnapshot":
        return StoreSnapshot(
            entities=sorted(self.entities, key=lambda r: r.name),
            senses=sorted(self.senses, key=lambda r: (r.entity, r.sense_id)),
            triples=sorted(self.triples, key=lambda r: (r.head, r.sense_id, r.relation, r.value)),
            edges=sorted(self.edges, key=lambda e: (e.hyponym, e.hypernym)),
            assignments=sorted(self.assignments, key=lambda r: (r.entity, r.nodes)),
            manifest=dict(self.manifest),
        )


def _find_cycle_node(edges: Sequence[ScoredEdge]) -> tuple[str, str] | None:
    """Return one edge participating in a directed cycle, or None."""
    adj: dict[str, list[str]] = {}
    for e in edges:
        adj.setdefault(e.hyponym, []).append(e.hypernym)
        adj.setdefault(e.hypernym, [])
    color: dict[str, int] = {}
    for start in sorted(adj):
        if color.get(start):
            continue
        stack = [(start, iter(sorted(adj[start])))]
        color[start] = 1
        while stack:
            node, successors = stack[-1]
            advanced = False
            for nxt in successors:
                if color.get(nxt, 0) == 1:
                    return (node, nxt)
                if color.get(nxt, 0) == 0:
                    color[nxt] = 1
                    stack.append((nxt, iter(sorted(adj[nxt]))))
                    advanced = True
                    break
            if not advanced:
                color[node] = 2
                stack.pop()
    return None


def check_integrity(snapshot: StoreSnapshot) -> None:
    """Raise IntegrityError naming the first violating record, if any."""
    sense_keys = set()
    for sense in snapshot.senses:
        key = (sense.entity, sense.sense_id)
        if key in sense_keys:
            raise IntegrityError(f"duplicate sense {key}")
        sense_keys.add(key)

    entity_names = set()
    for ent in snapshot.entities:
        if not ent.name:
            raise IntegrityError("entity with empty name")
        if ent.name in entity_names:
            raise IntegrityError(f"duplicate entity {ent.name!r}")
        entity_names.add(ent.name)
        if len(set(ent.sense_ids)) != len(ent.sense_ids):
            raise IntegrityError(f"entity {ent.name!r} repeats a sense id")
        for sid in ent.sense_ids:
            if (ent.name, sid) not in sense_keys:
                raise IntegrityError(f"entity {ent.name!r} references missing sense {sid!r}")

    for sense in snapshot.senses:
        if sense.entity not in entity_names:
            raise IntegrityError(
                f"sense {sense.sense_id!r} references missing entity {sense.entity!r}"
            )

    for triple in snapshot.triples:
        if (triple.head, triple.sense_id) not in sense_keys:
            raise IntegrityError(
                f"triple ({triple.head!r}, {triple.relation!r}, {triple.value!r}) "
                f"references missing sense {triple.sense_id!r}"
            )

    seen_edges = set()
    for edge in snapshot.edges:
        key = (edge.hyponym, edge.hypernym)
        if key in seen_edges:
            raise IntegrityError(f"duplicate edge {key}")
        seen_edges.add(key)
        if edge.hyponym == edge.hypernym:
            raise IntegrityError(f"self-edge on {edge.hyponym!r}")

    cyc = _find_cycle_node(snapshot.edges)
    if cyc is not None:
        raises = f"edge {cyc[0]!r}→{cyc[1]!r} closes a cycle"
        raise IntegrityError(raises)

    for rec in snapshot.assignments:
        if rec.entity not in entity_names:
            raise IntegrityError(
                f"assignment for missing entity {rec.entity!r}"
            )
        if rec.sense_id is not None and (rec.entity, rec.sense_id) not in sense_keys:
            raise IntegrityError(
                f"assignment for {rec.entity!r} references missing sense {rec.sense_id!r}"
            )


def _dump(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(", ", ": "))


def save_snapshot(snapshot: StoreSnapshot, directory, created_at: str | None = None) -> dict:
    """Validate, sort, and write the snapshot; returns the manifest written.

    ``created_at`` defaults to the epoch so that rebuilds from identical
    inputs stay byte-identical; pass a real timestamp to record one.
    """
    check_integrity(snapshot)
    snap = snapshot.sorted_copy()
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    rows = {
        "entities": [
            {"name": r.name, "sense_ids": list(r.sense_ids)} for r in snap.entities
        ],
        "senses": [
            {"entity": r.entity, "sense_id": r.sense_id, "phrases": list(r.phrases)}
            for r in snap.senses
        ],
        "triples": [
            {"head": r.head, "sense_id": r.sense_id, "relation": r.relation, "value": r.value}
            for r in snap.triples
        ],
        "edges": [
            {
                "hyponym": e.hyponym,
                "hypernym": e.hypernym,
                "residual": float(e.residual),
                "strength": float(e.strength),
            }
            for e in snap.edges
        ],
        "assignments": [
            {
                "entity": r.entity,
                "nodes": list(r.nodes),
                "sense_id": r.sense_id,
                "score": float(r.score),
            }
            for r in snap.assignments
        ],
    }
    for name, filename in RECORD_FILES.items():
        with open(directory / filename, "w", encoding="utf-8") as fh:
            for row in rows[name]:
                fh.write(_dump(row))
                fh.write("\n")

    manifest = {
        "format_version": FORMAT_VERSION,
        "counts": {name: len(rows[name]) for name in RECORD_FILES},
        "models": snap.manifest.get("models", {}),
        "provenance": snap.manifest.get("provenance", {}),
        "created_at": created_at or EPOCH_TIMESTAMP,
    }
    with open(directory / MANIFEST_FILE, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, ensure_ascii=False, indent=1, sort_keys=True)
        fh.write("\n")
    return manifest


def _read_jsonl(path: Path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise SnapshotLoadError(f"{path.name}:{lineno}: {exc}") from None
    return rows


def load_snapshot(directory) -> StoreSnapshot:
    """Read a snapshot back and re-run every integrity check."""
    directory = Path(directory)
    manifest_path = directory / MANIFEST_FILE
    if not manifest_path.exists():
        raise SnapshotLoadError(f"missing {MANIFEST_FILE} in {directory}")
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("format_version") != FORMAT_VERSION:
        raise SnapshotLoadError(
            f"unsupported snapshot format_version {manifest.get('format_version')!r}; "
            f"this build reads version {FORMAT_VERSION}"
        )

    raw: dict[str, list[dict]] = {}
    for name, filename in RECORD_FILES.items():
        path = directory / filename
        if not path.exists():
            raise SnapshotLoadError(f"missing record file {filename}")
        raw[name] = _read_jsonl(path)
        declared = manifest.get("counts", {}).get(name)
        if declared != len(raw[name]):
            raise SnapshotLoadError(
                f"{filename}: manifest declares {declared} records, found {len(raw[name])}"
            )

    try:
        snapshot = StoreSnapshot(
            entities=[
                EntityRecord(name=r["name"], sense_ids=tuple(r["sense_ids"]))
                for r in raw["entities"]
            ],
            senses=[
                SenseRecord(
                    entity=r["entity"], sense_id=r["sense_id"], phrases=tuple(r["phrases"])
                )
                for r in raw["senses"]
            ],
            triples=[
                TripleRecord(
                    head=r["head"], sense_id=r["sense_id"], relation=r["relation"], value=r["value"]
                )
                for r in raw["triples"]
            ],
            edges=[
                ScoredEdge(
                    hyponym=r["hyponym"],
                    hypernym=r["hypernym"],
                    residual=float(r["residual"]),
                    strength=float(r["strength"]),
                )
                for r in raw["edges"]
            ],
            assignments=[
                AssignmentRecord(
                    entity=r["entity"],
                    nodes=tuple(r["nodes"]),
                    sense_id=r["sense_id"],
                    score=float(r["score"]),
                )
                for r in raw["assignments"]
            ],
            manifest=manifest,
        )
    except (KeyError, TypeError) as exc:
        raise SnapshotLoadError(f"malformed record: {exc}") from None

    try:
        check_integrity(snapshot)
    except IntegrityError as exc:
        raise SnapshotLoadError(f"integrity failure: {exc}") from None
    return snapshot


# --- read-side views --------------------------------------------------------


@dataclass(frozen=True)
class EntityView:
    """Everything the query surface shows for one entity."""

    found: bool
    name: str
    senses: list[dict] = field(default_factory=list)
    paths: list[dict] = field(default_factory=list)


def query_entity(snapshot: StoreSnapshot, name: str) -> EntityView:
    """Per-entity view: senses with triples, and root paths joined to assignments."""
    entity = next((e for e in snapshot.entities if e.name == name), None)
    if entity is None:
        return EntityView(found=False, name=name)

    assignment_by_nodes = {
        rec.nodes: rec for rec in snapshot.assignments if rec.entity == name
    }
    chains = paths_to_roots(snapshot.edges, name)
    paths = []
    for i, chain in enumerate(sorted(chains)):
        rec = assignment_by_nodes.get(tuple(chain))
        paths.append(
            {
                "path_id": f"p{i}",
                "nodes": list(chain),
                "sense_id": rec.sense_id if rec else None,
                "score": rec.score if rec else None,
            }
        )

    triples_by_sense: dict[str, list[dict]] = {}
    for t in snapshot.triples:
        if t.head == name:
            triples_by_sense.setdefault(t.sense_id, []).append(
                {"relation": t.relation, "value": t.value}
            )
    senses = []
    sense_records = {s.sense_id: s for s in snapshot.senses if s.entity == name}
    for sid in sorted(entity.sense_ids):
        sense = sense_records[sid]
        senses.append(
            {
                "sense_id": sid,
                "phrases": list(sense.phrases),
                "triples": sorted(
                    triples_by_sense.get(sid, []),
                    key=lambda d: (d["relation"], d["value"]),
                ),
                "path_ids": [p["path_id"] for p in paths if p["sense_id"] == sid],
            }
        )
    return EntityView(found=True, name=name, senses=senses, paths=paths)


def _children_index(edges: Sequence[ScoredEdge]) -> dict[str, list[str]]:
    """hypernym → sorted hyponyms (the downward view of the edge set)."""
    children: dict[str, list[str]] = {}
    for e in edges:
        children.setdefault(e.hypernym, []).append(e.hyponym)
        children.setdefault(e.hyponym, [])
    for node in children:
        children[node].sort()
    return children


def descendant_entity_counts(snapshot: StoreSnapshot) -> dict[str, int]:
    """For every graph node: how many entities sit at or below it."""
    children = _children_index(snapshot.edges)
    entity_names = {e.name for e in snapshot.entities}
    counts: dict[str, set[str]] = {node: set() for node in children}
    # propagate upward: each entity marks all its ancestors
    up: dict[str, list[str]] = {}
    for e in snapshot.edges:
        up.setdefault(e.hyponym, []).append(e.hypernym)
    for node in children:
        if node not in entity_names:
            continue
        seen = {node}
        stack = [node]
        while stack:
            cur = stack.pop()
            counts.setdefault(cur, set()).add(node)
            for parent in up.get(cur, ()):
                if parent not in seen:
                    seen.add(parent)
                    stack.append(parent)
    return {node: len(marks) for node, marks in counts.items()}


def _node_rng(seed: int, term: str) -> random.Random:
    digest = hashlib.sha256(f"{seed}\x00{term}".encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def schema_roots(snapshot: StoreSnapshot) -> list[str]:
    """Terms with no hypernym above them, code-point sorted."""
    nodes = set()
    has_parent = set()
    for e in snapshot.edges:
        nodes.add(e.hyponym)
        nodes.add(e.hypernym)
        has_parent.add(e.hyponym)
    return sorted(nodes - has_parent)


def schema_sample(
    snapshot: StoreSnapshot,
    root: str | None,
    depth: int,
    max_children: int,
    seed: int = 0,
) -> list[dict]:
    """Breadth-limited downward sample of the schema.

    Returns a forest of ``{term, entity_count, children}`` nodes.  Child
    subsets are chosen by a per-node seeded draw, so the same seed always
    yields the same tree while entity counts stay exact regardless of
    sampling.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if max_children < 1:
        raise ValueError("max_children must be >= 1")
    children = _children_index(snapshot.edges)
    if root is not None and root not in children:
        raise KeyError(root)
    counts = descendant_entity_counts(snapshot)

    def build(term: str, remaining: int) -> dict:
        node = {"term": term, "entity_count": counts.get(term, 0), "children": []}
        if remaining <= 0:
            return node
        kids = children.get(term, [])
        if len(kids) > max_children:
            rng = _node_rng(seed, term)
            picked = sorted(rng.sample(kids, max_children))
        else:
            picked = kids
        node["children"] = [build(kid, remaining - 1) for kid in picked]
        return node

    roots = [root] if root is not None else schema_roots(snapshot)
    return [build(r, depth) for r in roots]


def entities_under_path(snapshot: StoreSnapshot, path: Sequence[str]) -> list[str]:
    """Entities with at least one root chain ending in exactly this path."""
    if not path:
        raise ValueError("path must be non-empty")
    suffix = tuple(path)
    matches = []
    for entity in snapshot.entities:
        chains = paths_to_roots(snapshot.edges, entity.name)
        for chain in chains:
            full = (entity.name, *chain)
            if len(full) >= len(suffix) and tuple(full[-len(suffix):]) == suffix:
                matches.append(entity.name)
                break
    return sorted(matches)


def path_assignment_key(entity: str, nodes: Sequence[str]) -> tuple[str, tuple[str, ...]]:
    return entity, tuple(nodes)


__all__ = [
    "AssignmentRecord",
    "EntityRecord",
    "EntityView",
    "SenseRecord",
    "StoreSnapshot",
    "TripleRecord",
    "UNASSIGNED",
    "check_integrity",
    "descendant_entity_counts",
    "entities_under_path",
    "load_snapshot",
    "query_entity",
    "save_snapshot",
    "schema_roots",
    "schema_sample",
]
