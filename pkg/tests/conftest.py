"""Shared fixtures: one deterministic corpus, split, and trained models.

The heavyweight artifacts (generated corpus, 200-epoch trainings) are session
scoped so the acceptance tests and the unit tests reuse the same objects
instead of retraining per test.
"""

import pytest

from graphcoref import (
    CorefGraph,
    EdgeSplit,
    FeatureMatrix,
    GenParams,
    ModelConfig,
    TrainedModel,
    build_graph,
    external_features,
    generate,
    identity_features,
    split_edges,
    train,
)

PRESET = GenParams(seed=42)
SPLIT_SEED = 7

ACCEPTANCE_LINES: list[str] = []


def record_acceptance(line: str) -> None:
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def preset_corpus():
    mentions, feature_array = generate(PRESET)
    return mentions, feature_array


@pytest.fixture(scope="session")
def preset_graph(preset_corpus) -> CorefGraph:
    mentions, _ = preset_corpus
    return build_graph(mentions)


@pytest.fixture(scope="session")
def preset_features(preset_corpus) -> FeatureMatrix:
    _, feature_array = preset_corpus
    return external_features(feature_array)


@pytest.fixture(scope="session")
def preset_split(preset_graph) -> EdgeSplit:
    return split_edges(preset_graph, 0.05, 0.10, seed=SPLIT_SEED)


@pytest.fixture(scope="session")
def gae_feat_model(preset_graph, preset_split, preset_features) -> TrainedModel:
    return train(preset_graph, preset_split, preset_features, ModelConfig(kind="gae", seed=0))


@pytest.fixture(scope="session")
def gae_nofeat_model(preset_graph, preset_split) -> TrainedModel:
    return train(
        preset_graph, preset_split, identity_features(preset_graph), ModelConfig(kind="gae", seed=0)
    )


@pytest.fixture(scope="session")
def vgae_model(preset_graph, preset_split, preset_features) -> TrainedModel:
    return train(preset_graph, preset_split, preset_features, ModelConfig(kind="vgae", seed=0))
