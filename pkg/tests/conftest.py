import numpy as np
import pytest

from stylemixdg.network import conv_layer_specs
from stylemixdg.weights import WeightArchive


def make_archive(seed: int = 7, scale: float = 1.0) -> WeightArchive:
    """Random but well-scaled weights for the full encoder/decoder stack."""
    rng = np.random.default_rng(seed)
    archive = WeightArchive()
    for name, cin, cout, k in conv_layer_specs():
        fan_in = cin * k * k
        std = scale * np.sqrt(2.0 / fan_in)
        archive.add(f"{name}.weight",
                    rng.normal(0.0, std, size=(cout, cin, k, k)).astype(np.float32))
        archive.add(f"{name}.bias", rng.normal(0.0, 0.01, size=cout).astype(np.float32))
    return archive


@pytest.fixture(scope="session")
def archive() -> WeightArchive:
    return make_archive()


@pytest.fixture(scope="session")
def zero_archive() -> WeightArchive:
    archive = WeightArchive()
    for name, cin, cout, k in conv_layer_specs():
        archive.add(f"{name}.weight", np.zeros((cout, cin, k, k), np.float32))
        archive.add(f"{name}.bias", np.zeros(cout, np.float32))
    return archive
