"""Shared fixtures: the bundled Sokoban micro corpus, parsed once per session."""

from __future__ import annotations

import pytest

from subsearch.envs.sokoban import load_micro_corpus


@pytest.fixture(scope="session")
def micro_corpus():
    return load_micro_corpus()
