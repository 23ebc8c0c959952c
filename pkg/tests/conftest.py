import numpy as np
import pytest

from risloc.channel import ReflectionModel, build_gain_table
from risloc.scene import SceneSpec, build_scene


@pytest.fixture(scope="session")
def desk_spec():
    return SceneSpec()


@pytest.fixture(scope="session")
def desk_scene(desk_spec):
    return build_scene(desk_spec)


@pytest.fixture(scope="session")
def desk_table(desk_scene):
    return build_gain_table(desk_scene, ReflectionModel.from_scene(desk_scene))


@pytest.fixture(scope="session")
def tiny_scene():
    # 2x2x2 blocks, 2x2 elements: cheap enough for exhaustive checks
    spec = SceneSpec(grid=(2, 2, 2), ris_grid=(2, 2))
    return build_scene(spec)


@pytest.fixture(scope="session")
def tiny_table(tiny_scene):
    return build_gain_table(tiny_scene, ReflectionModel.from_scene(tiny_scene))


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
