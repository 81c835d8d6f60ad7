import sys
from pathlib import Path

import pytest

from cilin import pipeline as pl

REPO_ROOT = Path(__file__).resolve().parent.parent
TOY_DIR = REPO_ROOT / "fixtures" / "toy"


def toy_config(**overrides) -> pl.PipelineConfig:
    base = dict(
        entities_path=str(TOY_DIR / "entities.txt"),
        snippets_path=str(TOY_DIR / "snippets.jsonl"),
        tags_path=str(TOY_DIR / "tags.tsv"),
        dictionary_path=str(TOY_DIR / "dictionary.txt"),
        embeddings_path=str(TOY_DIR / "embeddings.vec"),
        triples_path=str(TOY_DIR / "triples.tsv"),
        seed_pairs_path=str(TOY_DIR / "seed_pairs.tsv"),
        labeled_pairs_path=str(TOY_DIR / "labeled_pairs.tsv"),
        clusters=3,
        seed=0,
    )
    base.update(overrides)
    return pl.PipelineConfig(**base)


def toy_build_args(out_dir: Path) -> list[str]:
    return [
        "build",
        "--entities", str(TOY_DIR / "entities.txt"),
        "--snippets", str(TOY_DIR / "snippets.jsonl"),
        "--tags", str(TOY_DIR / "tags.tsv"),
        "--dictionary", str(TOY_DIR / "dictionary.txt"),
        "--embeddings", str(TOY_DIR / "embeddings.vec"),
        "--triples", str(TOY_DIR / "triples.tsv"),
        "--seed-pairs", str(TOY_DIR / "seed_pairs.tsv"),
        "--labeled-pairs", str(TOY_DIR / "labeled_pairs.tsv"),
        "--clusters", "3",
        "--seed", "0",
        "--out", str(out_dir),
    ]


@pytest.fixture(scope="session")
def toy_result():
    return pl.run_pipeline(toy_config())


@pytest.fixture(scope="session")
def toy_store(tmp_path_factory):
    """A toy store directory built once through the CLI."""
    from click.testing import CliRunner

    from cilin.cli import main

    out = tmp_path_factory.mktemp("stores") / "toy"
    runner = CliRunner()
    result = runner.invoke(main, toy_build_args(out))
    assert result.exit_code == 0, result.output
    return out
