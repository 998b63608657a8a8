import pytest

from openmax import SynthConfig, calibrate, gen_benchmark

SMALL_CONFIG = SynthConfig(
    n_classes=12,
    train_per_class=60,
    val_per_class=15,
    n_openset=120,
    n_fooling=60,
    n_openset_classes=6,
    group_size=3,
    seed=7,
)


@pytest.fixture(scope="session")
def benchmark():
    """Pinned default benchmark (N=100, 200 train + 50 val per class,
    2000 open-set, 1500 fooling)."""
    return gen_benchmark(SynthConfig())


@pytest.fixture(scope="session")
def model20(benchmark):
    return calibrate(benchmark.train, 20)


@pytest.fixture(scope="session")
def small_benchmark():
    """Desk-scale benchmark for fast module tests."""
    return gen_benchmark(SMALL_CONFIG)


@pytest.fixture(scope="session")
def small_model(small_benchmark):
    return calibrate(small_benchmark.train, 10)
