import numpy as np
import pytest

from samtex import pipeline
from samtex.fixture import make_fixture
from samtex.manifest import load_manifest


@pytest.fixture(scope="session")
def small_project(tmp_path_factory):
    """Fixture project at 128x128 with calibrate + build-cube already run."""
    root = tmp_path_factory.mktemp("small_fixture")
    info = make_fixture(root, atlas=128)
    manifest = load_manifest(info.manifest_path)
    pipeline.run_calibrate(manifest)
    pipeline.run_build_cube(manifest)
    return info, manifest


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def load_gt(info, name):
    from samtex.imaging import read_pfm

    return read_pfm(info.directory / "ground_truth" / f"gt_{name}.pfm")[:, :, 0] > 0.5
