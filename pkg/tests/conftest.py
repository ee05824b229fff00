"""Shared fixtures: synthetic corpora built once per test session."""

import numpy as np
import pytest

from clipsift.model import load_manifest
from clipsift.pipeline import build_dataset_shots, extract_dataset_features
from clipsift.shots import ClusteringConfig, bags_from_dataset
from clipsift.synth import CorpusSpec, generate_synthetic_corpus


def build_corpus(root, spec):
    """Generate a corpus and run it through features + shots once."""
    manifest_path = generate_synthetic_corpus(root, spec)
    manifest = load_manifest(manifest_path)
    micro = extract_dataset_features(manifest, root)
    shots = build_dataset_shots(micro, ClusteringConfig())
    bags = bags_from_dataset(manifest, shots, "truth")
    return {
        "root": root,
        "manifest_path": manifest_path,
        "manifest": manifest,
        "micro": micro,
        "shots": shots,
        "bags": bags,
        "truth": manifest.labels_for("truth"),
        "spec": spec,
    }


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """12 clips x 30 s: fast enough for unit-level integration tests."""
    root = tmp_path_factory.mktemp("corpus_small")
    return build_corpus(root, CorpusSpec(pos_count=6, neg_count=6, duration_sec=30.0, seed=7))


@pytest.fixture(scope="session")
def acceptance_corpus(tmp_path_factory):
    """The 20 + 20 x 60 s corpus the acceptance criteria run against."""
    root = tmp_path_factory.mktemp("corpus_acceptance")
    return build_corpus(root, CorpusSpec(seed=0))


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
