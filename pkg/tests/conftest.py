from __future__ import annotations

import numpy as np
import pytest

from semovmm.harness import Experiment, scene_map
from semovmm.scene import default_scene


@pytest.fixture(scope="session")
def scene():
    return default_scene()


@pytest.fixture(scope="session")
def smap(scene):
    return scene_map(scene)


@pytest.fixture(scope="session")
def experiment(scene, smap):
    return Experiment(scene, smap)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
