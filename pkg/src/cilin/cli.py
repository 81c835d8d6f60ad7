"""Command-line driver: build, query, serve, eval, train-rankers.

Every command exits nonzero on failure with a single-line `error: …` prefix
on stderr; all randomness flows from the one --seed flag so rebuilds are
byte-identical.
"""
from __future__ import annotations

import json
import os
import shutil
import sys
from datetime import datetime, timezone
from pathlib import Path

import click

from . import evalsuite, pipeline as pl
from .errors import CilinError
from .hierarchy import save_projection_model
from .rankers import save_ensemble
from .service import PROJECTION_MODEL_FILE, RANKER_MODEL_FILE, ApiConfig, create_app
from .store import load_snapshot, query_entity, save_snapshot

EXIT_FAILURE = 1
EXIT_NOT_FOUND = 3


def _fail(message: str, code: int = EXIT_FAILURE) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _build_timestamp() -> str:
    """Deterministic unless SOURCE_DATE_EPOCH opts into a real timestamp."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch:
        return (
            datetime.fromtimestamp(int(epoch), tz=timezone.utc)
            .strftime("%Y-%m-%dT%H:%M:%SZ")
        )
    return "1970-01-01T00:00:00Z"


@click.group()
def main() -> None:
    """Schema construction, disambiguation and serving for entity graphs."""


@main.command("build")
@click.option("--entities", required=True, type=click.Path(), help="entity list, one per line")
@click.option("--snippets", type=click.Path(), help="tagged snippets, JSON lines")
@click.option("--tags", type=click.Path(), help="category tags, entity<TAB>tag")
@click.option("--dictionary", type=click.Path(), help="known words, one per line")
@click.option("--embeddings", required=True, type=click.Path(), help="word vectors, text format")
@click.option("--triples", type=click.Path(), help="head<TAB>sense<TAB>relation<TAB>value")
@click.option("--seed-pairs", type=click.Path(), help="known hyponym<TAB>hypernym pairs")
@click.option("--labeled-pairs", type=click.Path(), help="hyponym<TAB>hypernym<TAB>{0,1}")
@click.option("--ranker-model", type=click.Path(), help="pre-trained ranker model file")
@click.option("--projection-model", type=click.Path(), help="pre-trained projection model file")
@click.option("--out", required=True, type=click.Path(), help="output store directory")
@click.option("--top-n", default=pl.DEFAULT_TOP_N, show_default=True)
@click.option("--clusters", type=int, default=None, help="offset cluster count  [default: pick by held-out residual, falling back to 10]")
@click.option("--tau", default=0.5, show_default=True, help="path-to-sense threshold")
@click.option("--keep-threshold", default=0.5, show_default=True, help="candidate score cutoff")
@click.option("--delta", type=float, default=None, help="explicit residual threshold")
@click.option("--seed", default=0, show_default=True)
def cmd_build(**kwargs) -> None:
    """Run discovery, hierarchy and disambiguation, then persist the store."""
    out_dir = Path(kwargs["out"])
    config = pl.PipelineConfig(
        entities_path=kwargs["entities"],
        snippets_path=kwargs["snippets"],
        tags_path=kwargs["tags"],
        dictionary_path=kwargs["dictionary"],
        embeddings_path=kwargs["embeddings"],
        triples_path=kwargs["triples"],
        seed_pairs_path=kwargs["seed_pairs"],
        labeled_pairs_path=kwargs["labeled_pairs"],
        ranker_model_path=kwargs["ranker_model"],
        projection_model_path=kwargs["projection_model"],
        out_dir=str(out_dir),
        top_n=kwargs["top_n"],
        clusters=kwargs["clusters"],
        tau=kwargs["tau"],
        keep_threshold=kwargs["keep_threshold"],
        delta=kwargs["delta"],
        seed=kwargs["seed"],
    )
    try:
        result = pl.run_pipeline(config)
        if out_dir.exists():
            shutil.rmtree(out_dir)
        out_dir.mkdir(parents=True)
        try:
            save_snapshot(result.snapshot, out_dir, created_at=_build_timestamp())
            if result.ensemble is not None:
                save_ensemble(result.ensemble, out_dir / RANKER_MODEL_FILE)
            if result.projection is not None:
                save_projection_model(result.projection, out_dir / PROJECTION_MODEL_FILE)
        except Exception:
            shutil.rmtree(out_dir, ignore_errors=True)
            raise
    except CilinError as exc:
        _fail(str(exc))
    report = result.report.as_dict()
    click.echo(json.dumps({"store": str(out_dir), "report": report}, ensure_ascii=False, indent=1))


def _store_option(func):
    return click.option(
        "--store",
        envvar="CILIN_STORE",
        required=True,
        type=click.Path(),
        help="store directory (or set CILIN_STORE)",
    )(func)


def render_entity_document(store_dir: str, name: str) -> dict | None:
    snapshot = load_snapshot(store_dir)
    view = query_entity(snapshot, name)
    if not view.found:
        return None
    return {"entity": view.name, "senses": view.senses, "paths": view.paths, "generated": False}


@main.command("query")
@_store_option
@click.argument("name")
@click.option("--format", "fmt", type=click.Choice(["json", "text"]), default="json", show_default=True)
def cmd_query(store: str, name: str, fmt: str) -> None:
    """Print the entity view for NAME from a built store."""
    try:
        doc = render_entity_document(store, name)
    except CilinError as exc:
        _fail(str(exc))
    if doc is None:
        _fail(f"entity not found: {name}", EXIT_NOT_FOUND)
    if fmt == "json":
        click.echo(json.dumps(doc, ensure_ascii=False, separators=(", ", ": ")))
        return
    click.echo(f"entity: {doc['entity']}")
    for sense in doc["senses"]:
        click.echo(f"sense {sense['sense_id']}")
        for triple in sense["triples"]:
            click.echo(f"  {triple['relation']}: {triple['value']}")
        for pid in sense["path_ids"]:
            click.echo(f"  path {pid}")
    for path in doc["paths"]:
        chain = "→".join([doc["entity"], *path["nodes"]])
        owner = path["sense_id"] or "-"
        score = "-" if path["score"] is None else f"{path['score']:.4f}"
        click.echo(f"{path['path_id']}: {chain}  [sense={owner} score={score}]")


SERVE_CONFIG_KEYS = {
    "store": "store_dir",
    "static": "static_dir",
    "embeddings": "embeddings_path",
    "snippets": "snippets_path",
    "tags": "tags_path",
    "dictionary": "dictionary_path",
    "triples": "triples_path",
    "seed_pairs": "seed_pairs_path",
    "labeled_pairs": "labeled_pairs_path",
    "ranker_model": "ranker_model_path",
    "projection_model": "projection_model_path",
}


def load_serve_config(path: str | None, overrides: dict) -> tuple[ApiConfig, str]:
    """Merge a JSON config file with command-line overrides (flags win)."""
    doc: dict = {}
    if path:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        unknown = sorted(set(doc) - set(SERVE_CONFIG_KEYS) - {"addr"})
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
    fields = {}
    for key, field in SERVE_CONFIG_KEYS.items():
        value = overrides.get(key)
        if value is None:
            value = doc.get(key)
        fields[field] = value
    if not fields["store_dir"]:
        raise ValueError("a store directory is required (--store, config file, or CILIN_STORE)")
    addr = overrides.get("addr") or doc.get("addr") or "127.0.0.1:8000"
    return ApiConfig(**fields), addr


@main.command("serve")
@click.option(
    "--store",
    envvar="CILIN_STORE",
    type=click.Path(),
    help="store directory (or set CILIN_STORE / config file)",
)
@click.option("--config", "config_path", type=click.Path(exists=True), help="JSON config file; flags override it")
@click.option("--addr", default=None, help="host:port to bind  [default: 127.0.0.1:8000]")
@click.option("--static", type=click.Path(), help="static asset directory for the web client")
@click.option("--embeddings", type=click.Path(), help="enable on-demand generation")
@click.option("--snippets", type=click.Path())
@click.option("--tags", type=click.Path())
@click.option("--dictionary", type=click.Path())
@click.option("--triples", type=click.Path())
@click.option("--seed-pairs", type=click.Path())
@click.option("--labeled-pairs", type=click.Path())
def cmd_serve(store, config_path, addr, static, embeddings, snippets, tags, dictionary, triples, seed_pairs, labeled_pairs) -> None:
    """Serve the query/browse JSON API (and the web client, if given)."""
    import uvicorn

    try:
        config, addr = load_serve_config(
            config_path,
            {
                "store": store,
                "addr": addr,
                "static": static,
                "embeddings": embeddings,
                "snippets": snippets,
                "tags": tags,
                "dictionary": dictionary,
                "triples": triples,
                "seed_pairs": seed_pairs,
                "labeled_pairs": labeled_pairs,
            },
        )
        host, _, port_text = addr.partition(":")
        port = int(port_text) if port_text else 8000
        app = create_app(config)
    except (CilinError, ValueError, OSError) as exc:
        _fail(str(exc))
    click.echo(f"serving on http://{host or '127.0.0.1'}:{port}")
    try:
        uvicorn.run(app, host=host or "127.0.0.1", port=port, log_level="warning")
    except SystemExit as exc:
        if exc.code not in (0, None):
            _fail(f"server startup failed: {addr} (uvicorn exit {exc.code})")
        raise
    except OSError as exc:
        _fail(f"bind failed: {exc}")


@main.command("eval")
@click.argument("suite", type=click.Choice(list(evalsuite.SUITES)))
@click.option("--seed", default=0, show_default=True)
def cmd_eval(suite: str, seed: int) -> None:
    """Run a synthetic verification suite and report its metrics."""
    result = evalsuite.run_suite(suite, seed)
    click.echo(json.dumps(result, ensure_ascii=False, indent=1))
    if not result["ok"]:
        sys.exit(EXIT_FAILURE)


@main.command("train-rankers")
@click.option("--entities", required=True, type=click.Path())
@click.option("--snippets", type=click.Path())
@click.option("--tags", type=click.Path())
@click.option("--dictionary", type=click.Path())
@click.option("--embeddings", required=True, type=click.Path())
@click.option("--seed-pairs", type=click.Path())
@click.option("--top-n", default=pl.DEFAULT_TOP_N, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(), help="model file to write")
def cmd_train_rankers(entities, snippets, tags, dictionary, embeddings, seed_pairs, top_n, seed, out) -> None:
    """Train just the candidate-ranking ensemble and save it."""
    config = pl.PipelineConfig(
        entities_path=entities,
        snippets_path=snippets,
        tags_path=tags,
        dictionary_path=dictionary,
        embeddings_path=embeddings,
        seed_pairs_path=seed_pairs,
        top_n=top_n,
        seed=seed,
    )
    try:
        config.validate()
        res = pl.load_resources(config)
        names = pl.load_entities(entities)
        ensemble, _ = pl.train_ranker_ensemble(names, res, config)
        save_ensemble(ensemble, out)
    except CilinError as exc:
        _fail(str(exc))
    click.echo(f"wrote {out}")


if __name__ == "__main__":
    main()
