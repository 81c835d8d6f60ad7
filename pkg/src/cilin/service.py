"""HTTP JSON API over a loaded snapshot: entity query, schema browse, health.

All documents are UTF-8 JSON with stable key order, so identical requests
against an unchanged snapshot return byte-identical bodies.  The API never
mutates the snapshot; on-demand generation for unknown entities writes only
to an in-process overlay cache.
"""
from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.staticfiles import StaticFiles

from . import pipeline as pl
from . import store as st
from .errors import CilinError
from .hierarchy import load_projection_model
from .rankers import load_ensemble

log = logging.getLogger(__name__)

RANKER_MODEL_FILE = "ranker.model.json"
PROJECTION_MODEL_FILE = "projection.model.json"
MAX_DEPTH = 10
MAX_CHILDREN = 100
DEFAULT_DEPTH = 3
DEFAULT_MAX_CHILDREN = 20


@dataclass
class ApiConfig:
    store_dir: str
    static_dir: str | None = None
    embeddings_path: str | None = None
    snippets_path: str | None = None
    tags_path: str | None = None
    dictionary_path: str | None = None
    triples_path: str | None = None
    seed_pairs_path: str | None = None
    labeled_pairs_path: str | None = None
    ranker_model_path: str | None = None
    projection_model_path: str | None = None

    def resolved_model_paths(self) -> tuple[str | None, str | None]:
        ranker = self.ranker_model_path or str(Path(self.store_dir) / RANKER_MODEL_FILE)
        projection = self.projection_model_path or str(
            Path(self.store_dir) / PROJECTION_MODEL_FILE
        )
        return (
            ranker if Path(ranker).exists() else None,
            projection if Path(projection).exists() else None,
        )

    def generation_ready(self) -> bool:
        ranker, projection = self.resolved_model_paths()
        return bool(self.embeddings_path and ranker and projection)


class SnapshotHolder:
    """Atomic reference to the current snapshot; swaps never disturb readers."""

    def __init__(self, snapshot: st.StoreSnapshot):
        self._snapshot = snapshot
        self._lock = threading.Lock()

    def get(self) -> st.StoreSnapshot:
        return self._snapshot

    def swap(self, snapshot: st.StoreSnapshot) -> None:
        st.check_integrity(snapshot)
        with self._lock:
            self._snapshot = snapshot


@dataclass
class GenerationState:
    resources: pl.Resources
    config: pl.PipelineConfig
    ensemble: object
    projection: object
    cache: dict[str, dict] = field(default_factory=dict)
    locks: dict[str, threading.Lock] = field(default_factory=dict)
    guard: threading.Lock = field(default_factory=threading.Lock)

    def lock_for(self, entity: str) -> threading.Lock:
        with self.guard:
            if entity not in self.locks:
                self.locks[entity] = threading.Lock()
            return self.locks[entity]


def _json_bytes(doc) -> bytes:
    return (json.dumps(doc, ensure_ascii=False, separators=(", ", ": ")) + "\n").encode("utf-8")


def json_response(doc, status_code: int = 200) -> Response:
    return Response(
        content=_json_bytes(doc),
        status_code=status_code,
        media_type="application/json; charset=utf-8",
    )


def error_response(message: str, status_code: int) -> Response:
    return json_response({"error": message}, status_code=status_code)


def _reject_unknown_params(request: Request, allowed: set[str]) -> Response | None:
    unknown = sorted(set(request.query_params.keys()) - allowed)
    if unknown:
        return error_response(f"unknown query parameters: {', '.join(unknown)}", 400)
    return None


def _int_param(request: Request, name: str, default: int, lo: int, hi: int):
    raw = request.query_params.get(name)
    if raw is None:
        return default, None
    try:
        value = int(raw)
    except ValueError:
        return None, error_response(f"parameter {name} must be an integer", 400)
    if not lo <= value <= hi:
        return None, error_response(
            f"parameter {name} must lie in [{lo}, {hi}]", 400
        )
    return value, None


def build_generation_state(config: ApiConfig, snapshot: st.StoreSnapshot) -> GenerationState | None:
    """Wire up on-demand generation from the configured resources.

    Pipeline hyperparameters come from the snapshot manifest so generated
    documents match what the offline build would have produced.
    """
    if not config.generation_ready():
        return None
    ranker_path, projection_path = config.resolved_model_paths()
    provenance = snapshot.manifest.get("provenance", {})
    gen_config = pl.PipelineConfig(
        snippets_path=config.snippets_path,
        tags_path=config.tags_path,
        dictionary_path=config.dictionary_path,
        embeddings_path=config.embeddings_path,
        triples_path=config.triples_path,
        seed_pairs_path=config.seed_pairs_path,
        labeled_pairs_path=config.labeled_pairs_path,
        top_n=provenance.get("top_n", pl.DEFAULT_TOP_N),
        tau=provenance.get("tau", 0.5),
        keep_threshold=provenance.get("keep_threshold", 0.5),
        seed=provenance.get("seed", 0),
    )
    resources = pl.load_resources(gen_config)
    return GenerationState(
        resources=resources,
        config=gen_config,
        ensemble=load_ensemble(ranker_path),
        projection=load_projection_model(projection_path),
    )


def create_app(config: ApiConfig) -> FastAPI:
    snapshot = st.load_snapshot(config.store_dir)
    holder = SnapshotHolder(snapshot)
    generation = build_generation_state(config, snapshot)

    app = FastAPI(title="cilin", docs_url=None, redoc_url=None, openapi_url=None)
    app.state.holder = holder
    app.state.generation = generation

    @app.get("/healthz")
    def healthz(request: Request):
        bad = _reject_unknown_params(request, set())
        if bad:
            return bad
        manifest = holder.get().manifest
        return json_response(
            {
                "status": "ok",
                "snapshot": {
                    "format_version": manifest.get("format_version"),
                    "counts": manifest.get("counts", {}),
                    "created_at": manifest.get("created_at"),
                },
            }
        )

    @app.get("/api/entity/{name}")
    def entity_view(name: str, request: Request):
        bad = _reject_unknown_params(request, set())
        if bad:
            return bad
        snap = holder.get()
        view = st.query_entity(snap, name)
        if view.found:
            return json_response(
                {
                    "entity": view.name,
                    "senses": view.senses,
                    "paths": view.paths,
                    "generated": False,
                }
            )
        if generation is None:
            return error_response(f"unknown entity: {name}", 404)
        with generation.lock_for(name):
            doc = generation.cache.get(name)
            if doc is None:
                try:
                    doc = pl.generate_entity_document(
                        name,
                        generation.resources,
                        generation.config,
                        generation.ensemble,
                        generation.projection,
                    )
                except CilinError as exc:
                    return error_response(f"generation failed: {exc}", 500)
                generation.cache[name] = doc
        return json_response({**doc, "generated": True})

    @app.get("/api/schema")
    def schema_view(request: Request):
        bad = _reject_unknown_params(request, {"root", "depth", "max_children", "seed"})
        if bad:
            return bad
        depth, err = _int_param(request, "depth", DEFAULT_DEPTH, 1, MAX_DEPTH)
        if err:
            return err
        max_children, err = _int_param(
            request, "max_children", DEFAULT_MAX_CHILDREN, 1, MAX_CHILDREN
        )
        if err:
            return err
        seed, err = _int_param(request, "seed", 0, -(2**31), 2**31 - 1)
        if err:
            return err
        root = request.query_params.get("root")
        snap = holder.get()
        try:
            roots = st.schema_sample(snap, root, depth, max_children, seed)
        except KeyError:
            return error_response(f"unknown root: {root}", 404)
        return json_response({"roots": roots})

    @app.get("/api/path-entities")
    def path_entities(request: Request):
        bad = _reject_unknown_params(request, {"path"})
        if bad:
            return bad
        raw = request.query_params.get("path", "")
        if not raw:
            return error_response("path parameter is required", 400)
        parts = raw.split("→")
        if any(not p for p in parts):
            return error_response("malformed path: empty segment", 400)
        snap = holder.get()
        entities = st.entities_under_path(snap, parts)
        return json_response({"path": parts, "entities": entities})

    if config.static_dir:
        app.mount("/", StaticFiles(directory=config.static_dir, html=True), name="static")

    return app
