import json
from importlib import resources

import jsonschema
import pytest
from fastapi.testclient import TestClient

from cilin.service import ApiConfig, create_app
from cilin.store import load_snapshot, save_snapshot

from conftest import TOY_DIR


def load_schema(name: str) -> dict:
    text = resources.files("cilin").joinpath(f"schemas/{name}.json").read_text("utf-8")
    return json.loads(text)


@pytest.fixture(scope="module")
def client(toy_store):
    app = create_app(ApiConfig(store_dir=str(toy_store)))
    with TestClient(app) as c:
        yield c


@pytest.fixture(scope="module")
def gen_client(toy_store):
    """Client with resources configured, so unknown entities are generated."""
    config = ApiConfig(
        store_dir=str(toy_store),
        embeddings_path=str(TOY_DIR / "embeddings.vec"),
        snippets_path=str(TOY_DIR / "snippets.jsonl"),
        tags_path=str(TOY_DIR / "tags.tsv"),
        dictionary_path=str(TOY_DIR / "dictionary.txt"),
        triples_path=str(TOY_DIR / "triples.tsv"),
        seed_pairs_path=str(TOY_DIR / "seed_pairs.tsv"),
        labeled_pairs_path=str(TOY_DIR / "labeled_pairs.tsv"),
    )
    app = create_app(config)
    with TestClient(app) as c:
        yield c


class TestHealthz:
    def test_ok_with_manifest_counts(self, client, toy_store):
        resp = client.get("/healthz")
        assert resp.status_code == 200
        doc = resp.json()
        jsonschema.validate(doc, load_schema("healthz"))
        manifest = json.loads((toy_store / "manifest.json").read_text("utf-8"))
        assert doc["snapshot"]["counts"] == manifest["counts"]

    def test_counts_match_record_file_line_counts(self, client, toy_store):
        doc = client.get("/healthz").json()
        for name, filename in {
            "entities": "entities.jsonl",
            "senses": "senses.jsonl",
            "triples": "triples.jsonl",
            "edges": "edges.jsonl",
            "assignments": "assignments.jsonl",
        }.items():
            lines = (toy_store / filename).read_text("utf-8").splitlines()
            assert doc["snapshot"]["counts"][name] == len([l for l in lines if l.strip()])

    def test_snapshot_swap_updates_counts(self, toy_store, tmp_path):
        app = create_app(ApiConfig(store_dir=str(toy_store)))
        with TestClient(app) as c:
            before = c.get("/healthz").json()["snapshot"]["counts"]
            assert before["entities"] > 0
            snap = load_snapshot(toy_store)
            snap.entities = []
            snap.senses = []
            snap.triples = []
            snap.assignments = []
            out = tmp_path / "smaller"
            save_snapshot(snap, out)
            app.state.holder.swap(load_snapshot(out))
            after = c.get("/healthz").json()["snapshot"]["counts"]
            assert after["entities"] == 0
            assert after["edges"] == before["edges"]


class TestEntityEndpoint:
    def test_apple_document(self, client):
        resp = client.get("/api/entity/苹果")
        assert resp.status_code == 200
        doc = resp.json()
        jsonschema.validate(doc, load_schema("entity"))
        assert doc["generated"] is False
        fruit = next(s for s in doc["senses"] if s["sense_id"] == "蔷薇科苹果属果实")
        assert len(fruit["path_ids"]) == 2
        fruit_nodes = {
            tuple(p["nodes"]) for p in doc["paths"] if p["path_id"] in fruit["path_ids"]
        }
        assert fruit_nodes == {("水果", "食品", "物"), ("水果", "植物", "生物", "物")}

    def test_unknown_entity_404_without_resources(self, client):
        resp = client.get("/api/entity/不存在")
        assert resp.status_code == 404
        jsonschema.validate(resp.json(), load_schema("error"))

    def test_unknown_query_params_rejected(self, client):
        assert client.get("/api/entity/苹果?verbose=1").status_code == 400

    def test_byte_identical_responses(self, client):
        a = client.get("/api/entity/苹果")
        b = client.get("/api/entity/苹果")
        assert a.content == b.content

    def test_generated_document(self, gen_client):
        resp = gen_client.get("/api/entity/新苹果")
        # 新苹果 is not in the store and has no snippets either: generation
        # runs but discovers nothing, which is still a valid document
        assert resp.status_code == 200
        doc = resp.json()
        jsonschema.validate(doc, load_schema("entity"))
        assert doc["generated"] is True

    def test_generation_cache_stable(self, gen_client):
        a = gen_client.get("/api/entity/新苹果")
        b = gen_client.get("/api/entity/新苹果")
        assert a.content == b.content


class TestSchemaEndpoint:
    def test_default_forest_roots_are_parentless(self, client, toy_store):
        resp = client.get("/api/schema")
        assert resp.status_code == 200
        doc = resp.json()
        jsonschema.validate(doc, load_schema("schema"))
        snap = load_snapshot(toy_store)
        has_parent = {e.hyponym for e in snap.edges}
        nodes = {e.hyponym for e in snap.edges} | {e.hypernym for e in snap.edges}
        assert [r["term"] for r in doc["roots"]] == sorted(nodes - has_parent)

    def test_same_request_byte_identical(self, client):
        a = client.get("/api/schema?root=物&depth=2&max_children=3&seed=1")
        b = client.get("/api/schema?root=物&depth=2&max_children=3&seed=1")
        assert a.status_code == 200
        assert a.content == b.content

    def test_depth_cap(self, client):
        assert client.get("/api/schema?depth=11").status_code == 400
        assert client.get("/api/schema?depth=0").status_code == 400
        assert client.get("/api/schema?max_children=101").status_code == 400
        assert client.get("/api/schema?depth=notanint").status_code == 400

    def test_unknown_root_404(self, client):
        assert client.get("/api/schema?root=没有这个").status_code == 404

    def test_unknown_param_rejected(self, client):
        assert client.get("/api/schema?depht=3").status_code == 400


class TestPathEntitiesEndpoint:
    def test_fruit_chain_lists_apple(self, client):
        resp = client.get("/api/path-entities", params={"path": "水果→食品→物"})
        assert resp.status_code == 200
        doc = resp.json()
        jsonschema.validate(doc, load_schema("path_entities"))
        assert "苹果" in doc["entities"]

    def test_unknown_chain_empty_list(self, client):
        resp = client.get("/api/path-entities", params={"path": "火星→物"})
        assert resp.status_code == 200
        assert resp.json()["entities"] == []

    def test_empty_parameter_rejected(self, client):
        assert client.get("/api/path-entities").status_code == 400
        assert client.get("/api/path-entities?path=").status_code == 400
        resp = client.get("/api/path-entities", params={"path": "a→→b"})
        assert resp.status_code == 400


class TestReadOnly:
    def test_request_sequences_do_not_change_responses(self, client):
        before = client.get("/api/entity/香蕉").content
        client.get("/api/schema?depth=2")
        client.get("/api/path-entities", params={"path": "物"})
        client.get("/api/entity/不存在")
        after = client.get("/api/entity/香蕉").content
        assert before == after
