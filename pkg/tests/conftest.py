from __future__ import annotations

import pytest

from replaydata import ReplayBundle, build_bundle

from citecheck.core import ClaimInstance, parse_label
from citecheck.pipeline import PipelineConfig, build_deps


@pytest.fixture(scope="session")
def replay_bundle(tmp_path_factory) -> ReplayBundle:
    return build_bundle(tmp_path_factory.mktemp("replay"))


@pytest.fixture()
def replay_config() -> PipelineConfig:
    return PipelineConfig(workers=1)


@pytest.fixture()
def replay_deps(replay_bundle, replay_config):
    return build_deps(replay_config, mode="replay", fixture_dir=str(replay_bundle.fixture_dir))


@pytest.fixture()
def replay_instances(replay_bundle) -> list[ClaimInstance]:
    return [
        ClaimInstance(
            id=doc["id"],
            claim=doc["claim"],
            citation=doc["citation"],
            gold_label=parse_label(doc["gold_label"]),
            provided_abstract=doc["abstract"],
        )
        for doc in replay_bundle.instances
    ]
