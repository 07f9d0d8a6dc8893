import pytest

from sceneret.store import write_dataset
from sceneret.synth import synth_generate


@pytest.fixture(scope="session")
def shared_manifest(tmp_path_factory):
    """A 6-scene, 21-view dataset reused by property tests."""
    records = synth_generate(6, 21, 8, sigma=0.2, nuisance_dims=4, seed=3)
    return write_dataset(records, tmp_path_factory.mktemp("shared") / "d")
