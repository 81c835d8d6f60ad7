"""End-to-end build pipeline: discovery → hierarchy → disambiguation → store.

The same code path serves the offline batch build and the service's
on-demand generation for a single unknown entity, so both produce identical
documents for identical inputs and seeds.
"""
from __future__ import annotations

import logging
import random
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

from . import discovery, disambiguation, hierarchy
from .embedding import AveragingEncoder, EmbeddingTable, load_embeddings
from .errors import ConfigError, ParseError, UndefinedSimilarityError, UnencodableError
from .rankers import RankerEnsemble, TrainingConfig, train_rankers
from .store import (
    AssignmentRecord,
    EntityRecord,
    SenseRecord,
    StoreSnapshot,
    TripleRecord,
)

log = logging.getLogger(__name__)

DEFAULT_TOP_N = 10
VALIDATION_SPLIT = 0.2
MIN_PAIRS_FOR_SPLIT = 40


@dataclass
class PipelineConfig:
    entities_path: str | None = None
    snippets_path: str | None = None
    tags_path: str | None = None
    dictionary_path: str | None = None
    embeddings_path: str | None = None
    triples_path: str | None = None
    seed_pairs_path: str | None = None
    labeled_pairs_path: str | None = None
    ranker_model_path: str | None = None
    projection_model_path: str | None = None
    out_dir: str | None = None
    top_n: int = DEFAULT_TOP_N
    clusters: int | None = hierarchy.DEFAULT_CLUSTERS  # None = pick by held-out residual
    tau: float = disambiguation.DEFAULT_TAU
    keep_threshold: float = 0.5
    delta: float | None = None  # explicit residual threshold; None = fit
    seed: int = 0

    def validate(self) -> None:
        if self.top_n < 1:
            raise ConfigError("top_n must be >= 1")
        if self.clusters is not None and self.clusters < 1:
            raise ConfigError("clusters must be >= 1")
        if not 0.0 <= self.keep_threshold <= 1.0:
            raise ConfigError("keep_threshold must lie in [0, 1]")
        if not -1.0 <= self.tau <= 1.0:
            raise ConfigError("tau must lie in [-1, 1]")
        if self.embeddings_path is None:
            raise ConfigError("an embeddings file is required")
        for label, p in (
            ("entities", self.entities_path),
            ("snippets", self.snippets_path),
            ("tags", self.tags_path),
            ("dictionary", self.dictionary_path),
            ("embeddings", self.embeddings_path),
            ("triples", self.triples_path),
            ("seed-pairs", self.seed_pairs_path),
            ("labeled-pairs", self.labeled_pairs_path),
            ("ranker-model", self.ranker_model_path),
            ("projection-model", self.projection_model_path),
        ):
            if p is not None and not Path(p).exists():
                raise ConfigError(f"{label} file not found: {p}")


@dataclass
class Resources:
    """All inputs loaded into memory, shared by batch build and on-demand runs."""

    table: EmbeddingTable
    snippets: list[discovery.TaggedSnippet] = field(default_factory=list)
    snippets_by_entity: dict[str, list[discovery.TaggedSnippet]] = field(default_factory=dict)
    corpus_freq: dict[str, int] = field(default_factory=dict)
    tag_table: dict[str, set[str]] = field(default_factory=dict)
    dictionary: set[str] = field(default_factory=set)
    seed_pairs: set[tuple[str, str]] = field(default_factory=set)
    triples: list[TripleRecord] = field(default_factory=list)
    labeled_pairs: list[tuple[str, str, int]] = field(default_factory=list)


@dataclass
class BuildReport:
    entities: int = 0
    candidates: int = 0
    kept_candidates: int = 0
    oov_terms: int = 0
    raw_edges: int = 0
    edges: int = 0
    removed_links: int = 0
    reversed_links: int = 0
    pruned_links: int = 0
    paths: int = 0
    assignments: int = 0
    unassigned: int = 0

    def as_dict(self) -> dict:
        return dict(vars(self))


def load_triples(path) -> list[TripleRecord]:
    """Read `head<TAB>sense_id<TAB>relation<TAB>value` lines."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 4 or not all(parts):
                raise ParseError(
                    f"expected head<TAB>sense_id<TAB>relation<TAB>value, got {line!r}",
                    line=lineno,
                )
            rows.append(TripleRecord(head=parts[0], sense_id=parts[1], relation=parts[2], value=parts[3]))
    return rows


def load_entities(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        names = [line.strip() for line in fh if line.strip()]
    return names


def load_resources(config: PipelineConfig) -> Resources:
    with open(config.embeddings_path, "rb") as fh:
        table = load_embeddings(fh)
    res = Resources(table=table)
    if config.snippets_path:
        res.snippets = discovery.load_snippets(config.snippets_path)
        for sn in res.snippets:
            res.snippets_by_entity.setdefault(sn.entity, []).append(sn)
        res.corpus_freq = dict(discovery.corpus_frequencies(res.snippets))
    if config.tags_path:
        res.tag_table = discovery.load_tag_table(config.tags_path)
    if config.dictionary_path:
        res.dictionary = discovery.load_dictionary(config.dictionary_path)
    if config.seed_pairs_path:
        res.seed_pairs = discovery.load_seed_pairs(config.seed_pairs_path)
    if config.triples_path:
        res.triples = load_triples(config.triples_path)
    if config.labeled_pairs_path:
        res.labeled_pairs = hierarchy.load_labeled_pairs(config.labeled_pairs_path)
    return res


def collect_entity_candidates(
    entity: str, res: Resources, config: PipelineConfig
) -> discovery.CandidateSet:
    snippet_counts = discovery.collect_snippet_candidates(
        entity, res.snippets_by_entity.get(entity, []), config.top_n
    )
    tags = discovery.collect_category_tags(entity, res.tag_table)
    head = discovery.extract_head_word(entity, res.dictionary) if res.dictionary else None
    merged = discovery.merge_candidates(entity, snippet_counts, tags, head)
    return discovery.featurize_all(merged, res.table, res.corpus_freq)


def train_ranker_ensemble(
    entities: list[str], res: Resources, config: PipelineConfig
) -> tuple[RankerEnsemble, dict[str, discovery.CandidateSet]]:
    """Collect and weakly label candidates for every entity, then train."""
    per_entity: dict[str, discovery.CandidateSet] = {}
    rows = []
    for entity in entities:
        cands = collect_entity_candidates(entity, res, config)
        per_entity[entity] = cands
        rows.extend(discovery.heuristic_label(cands, res.seed_pairs))
    ensemble = train_rankers(rows, TrainingConfig(seed=config.seed))
    return ensemble, per_entity


def train_hierarchy_model(
    res: Resources, config: PipelineConfig
) -> hierarchy.ProjectionModel:
    """Fit the projection model from the labeled-pair resource.

    Large labeled sets are split into train/validation so the residual
    threshold is fitted on held-out pairs; small ones are reused whole for
    the threshold fit, which the model provenance records.
    """
    rows = [
        (h, hy, lbl)
        for h, hy, lbl in res.labeled_pairs
        if h in res.table and hy in res.table
    ]
    dropped = len(res.labeled_pairs) - len(rows)
    if dropped:
        log.warning("labeled pairs: %d rows dropped for missing vectors", dropped)
    positives = [(h, hy) for h, hy, lbl in rows if lbl == 1]
    if not positives:
        raise ConfigError("labeled pairs contain no usable positive rows")

    if len(rows) >= MIN_PAIRS_FOR_SPLIT and config.delta is None:
        rng = random.Random(config.seed)
        shuffled = rows.copy()
        rng.shuffle(shuffled)
        n_val = max(1, int(len(shuffled) * VALIDATION_SPLIT))
        val_rows, train_rows = shuffled[:n_val], shuffled[n_val:]
        train_pos = [(h, hy) for h, hy, lbl in train_rows if lbl == 1] or positives
        held_out = True
    else:
        val_rows, train_pos = rows, positives
        held_out = False

    pairs = hierarchy.make_training_pairs(train_pos, res.table)
    validation = [
        (hierarchy.make_training_pairs([(h, hy)], res.table)[0], lbl)
        for h, hy, lbl in val_rows
    ]
    if config.clusters is None:
        k = hierarchy.select_cluster_count(pairs, validation, config.seed)
        k_mode = "held-out-residual"
    else:
        k = config.clusters
        k_mode = "configured"
    model = hierarchy.train_projection_model(
        pairs,
        k=k,
        seed=config.seed,
        validation=validation if config.delta is None else None,
        delta=config.delta,
    )
    model.provenance["held_out_threshold"] = held_out
    model.provenance["cluster_mode"] = k_mode
    return model


def hierarchy_terms(
    kept: dict[str, discovery.CandidateSet], res: Resources
) -> set[str]:
    """Terms the edge classifier runs over: kept hypernyms plus the terms
    of positive labeled pairs (known-good hypernyms in their own right)."""
    terms = set()
    for cands in kept.values():
        terms.update(cands.terms())
    for h, hy, lbl in res.labeled_pairs:
        if lbl == 1:
            terms.add(h)
            terms.add(hy)
    return terms


def senses_for_entity(entity: str, res: Resources) -> list[disambiguation.SenseDescriptor]:
    phrases_by_sense: dict[str, set[str]] = {}
    for t in res.triples:
        if t.head == entity:
            phrases_by_sense.setdefault(t.sense_id, set()).add(f"{t.relation}/{t.value}")
    return [
        disambiguation.SenseDescriptor(
            entity=entity, sense_id=sid, phrases=tuple(sorted(phrases))
        )
        for sid, phrases in sorted(phrases_by_sense.items())
    ]


@contextmanager
def _stage(name: str):
    """Prefix any pipeline error with the stage it happened in."""
    from .errors import CilinError

    try:
        yield
    except CilinError as exc:
        exc.args = (f"{name} stage: {exc.args[0]}" if exc.args else f"{name} stage failed",)
        raise


@dataclass
class BuildResult:
    snapshot: StoreSnapshot
    report: BuildReport
    ensemble: RankerEnsemble | None
    projection: hierarchy.ProjectionModel | None


def run_pipeline(config: PipelineConfig, resources: Resources | None = None) -> BuildResult:
    """Run the full three-stage pipeline over the configured entity list."""
    config.validate()
    res = resources or load_resources(config)
    entities = load_entities(config.entities_path) if config.entities_path else []
    for name in entities:
        disambiguation.check_term(name)

    report = BuildReport(entities=len(entities))
    if not entities:
        snapshot = StoreSnapshot()
        snapshot.manifest = _manifest(config, res, None)
        return BuildResult(snapshot=snapshot, report=report, ensemble=None, projection=None)

    # stage 1: discovery + ranking
    with _stage("discovery"):
        if config.ranker_model_path:
            from .rankers import load_ensemble

            ensemble = load_ensemble(config.ranker_model_path)
            per_entity = {e: collect_entity_candidates(e, res, config) for e in entities}
        else:
            ensemble, per_entity = train_ranker_ensemble(entities, res, config)
        kept: dict[str, discovery.CandidateSet] = {}
        for entity in entities:
            cands = per_entity[entity]
            report.candidates += len(cands)
            ranked = discovery.rank_candidates(cands, ensemble, config.keep_threshold)
            report.kept_candidates += len(ranked)
            kept[entity] = ranked

    # stage 2: hierarchy construction; skipped entirely when no projection
    # training data is available (edges then come from discovery alone)
    with _stage("hierarchy"):
        if config.projection_model_path:
            projection = hierarchy.load_projection_model(config.projection_model_path)
        elif any(lbl == 1 for *_, lbl in res.labeled_pairs):
            projection = train_hierarchy_model(res, config)
        else:
            projection = None
        if projection is not None:
            terms = hierarchy_terms(kept, res)
            report.oov_terms = sum(1 for t in terms if t not in res.table)
            term_edges = hierarchy.build_edge_set(terms, projection, res.table)
        else:
            term_edges = []

    # entity → kept-hypernym edges carry the ranker score as strength
    with _stage("hierarchy"):
        entity_edges = []
        for entity, cands in kept.items():
            for cand in cands:
                entity_edges.append(
                    hierarchy.ScoredEdge(
                        hyponym=entity,
                        hypernym=cand.term,
                        residual=1.0 - cand.score,
                        strength=cand.score,
                    )
                )
        report.raw_edges = len(term_edges) + len(entity_edges)
        resolution = hierarchy.resolve_cycles_detailed(entity_edges + term_edges)
        report.edges = len(resolution.edges)
        report.removed_links = resolution.removed
        report.reversed_links = resolution.reversed
        report.pruned_links = resolution.pruned

    # stage 3: sense collection and path disambiguation
    with _stage("disambiguation"):
        encoder = AveragingEncoder(res.table)
        snapshot = StoreSnapshot()
        snapshot.edges = resolution.edges
        for entity in sorted(set(entities)):
            senses = senses_for_entity(entity, res)
            chains = hierarchy.paths_to_roots(snapshot.edges, entity)
            paths = [
                disambiguation.HypernymPath(entity=entity, nodes=tuple(chain))
                for chain in sorted(chains)
            ]
            report.paths += len(paths)
            try:
                assignments = disambiguation.assign_paths(senses, paths, encoder, config.tau)
            except (UnencodableError, UndefinedSimilarityError):
                # all-OOV senses or paths leave every path unassigned
                assignments = [
                    disambiguation.Assignment(
                        path=p, sense_id=disambiguation.UNASSIGNED, score=-1.0
                    )
                    for p in paths
                ]
            snapshot.entities.append(
                EntityRecord(name=entity, sense_ids=tuple(s.sense_id for s in senses))
            )
            for sense in senses:
                snapshot.senses.append(
                    SenseRecord(entity=entity, sense_id=sense.sense_id, phrases=sense.phrases)
                )
            for t in res.triples:
                if t.head == entity:
                    snapshot.triples.append(t)
            for a in assignments:
                if a.sense_id == disambiguation.UNASSIGNED:
                    report.unassigned += 1
                    stored_sense = None
                else:
                    report.assignments += 1
                    stored_sense = a.sense_id
                snapshot.assignments.append(
                    AssignmentRecord(
                        entity=entity,
                        nodes=a.path.nodes,
                        sense_id=stored_sense,
                        score=a.score,
                    )
                )

    snapshot.manifest = _manifest(config, res, projection, has_ensemble=ensemble is not None)
    return BuildResult(snapshot=snapshot, report=report, ensemble=ensemble, projection=projection)


def _manifest(
    config: PipelineConfig,
    res: Resources,
    projection: hierarchy.ProjectionModel | None,
    has_ensemble: bool = False,
) -> dict:
    models = {}
    if has_ensemble:
        models["ranker"] = "ranker.model.json"
    if projection is not None:
        models["projection"] = "projection.model.json"
    return {
        "provenance": {
            "seed": config.seed,
            "top_n": config.top_n,
            "clusters": projection.k if projection else 0,
            "tau": config.tau,
            "keep_threshold": config.keep_threshold,
            "delta": projection.delta if projection else None,
            "embedding_dimension": res.table.dimension,
            "heuristic_labeling": "multi-source-agreement+seed-list",
        },
        "models": models,
    }


def generate_entity_document(
    entity: str,
    res: Resources,
    config: PipelineConfig,
    ensemble: RankerEnsemble,
    projection: hierarchy.ProjectionModel,
) -> dict:
    """Single-entity pipeline for on-demand generation.

    Uses pre-trained models plus the shared resources; the resulting
    document matches what a batch build over just this entity (with the
    same models) would serve.
    """
    disambiguation.check_term(entity)
    cands = collect_entity_candidates(entity, res, config)
    ranked = discovery.rank_candidates(cands, ensemble, config.keep_threshold)

    terms = set(ranked.terms())
    for h, hy, lbl in res.labeled_pairs:
        if lbl == 1:
            terms.add(h)
            terms.add(hy)
    term_edges = hierarchy.build_edge_set(terms, projection, res.table)
    entity_edges = [
        hierarchy.ScoredEdge(
            hyponym=entity, hypernym=c.term, residual=1.0 - c.score, strength=c.score
        )
        for c in ranked
    ]
    edges = hierarchy.resolve_cycles(entity_edges + term_edges)

    senses = senses_for_entity(entity, res)
    chains = hierarchy.paths_to_roots(edges, entity)
    paths = [
        disambiguation.HypernymPath(entity=entity, nodes=tuple(chain))
        for chain in sorted(chains)
    ]
    encoder = AveragingEncoder(res.table)
    try:
        assignments = disambiguation.assign_paths(senses, paths, encoder, config.tau)
    except (UnencodableError, UndefinedSimilarityError):
        assignments = [
            disambiguation.Assignment(path=p, sense_id=disambiguation.UNASSIGNED, score=-1.0)
            for p in paths
        ]

    by_nodes = {a.path.nodes: a for a in assignments}
    path_docs = []
    for i, p in enumerate(paths):
        a = by_nodes[p.nodes]
        sense_id = None if a.sense_id == disambiguation.UNASSIGNED else a.sense_id
        path_docs.append(
            {"path_id": f"p{i}", "nodes": list(p.nodes), "sense_id": sense_id, "score": a.score}
        )
    sense_docs = []
    for s in senses:
        sense_docs.append(
            {
                "sense_id": s.sense_id,
                "phrases": list(s.phrases),
                "triples": sorted(
                    (
                        {"relation": t.relation, "value": t.value}
                        for t in res.triples
                        if t.head == entity and t.sense_id == s.sense_id
                    ),
                    key=lambda d: (d["relation"], d["value"]),
                ),
                "path_ids": [
                    p["path_id"] for p in path_docs if p["sense_id"] == s.sense_id
                ],
            }
        )
    return {"entity": entity, "senses": sense_docs, "paths": path_docs}
