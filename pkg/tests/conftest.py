import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from scipy import ndimage

from flowroi import PipelineConfig, SyntheticSpec, generate_synthetic
from flowroi.roi import masks_from_saliency, sequence_saliency
from flowroi.sequence import Frame

settings.register_profile(
    "repo",
    deadline=None,
    derandomize=True,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("repo")

BENCHMARK_SPEC = SyntheticSpec(n_cells=20, n_frames=50, width=512, height=512, seed=7)


def textured(shape, seed, scale=2.0, amplitude=40.0, level=120.0):
    """Smooth random texture as float64, for registration and flow tests."""
    rng = np.random.default_rng(seed)
    tex = ndimage.gaussian_filter(rng.standard_normal(shape), scale, mode="wrap")
    return level + amplitude * tex / tex.std()


def to_frame(img, depth=8):
    maxval = (1 << depth) - 1
    return Frame(np.clip(np.rint(img), 0, maxval).astype(np.uint8 if depth == 8 else np.uint16), depth)


@pytest.fixture(scope="session")
def benchmark():
    """The 20-blob 512x512 50-frame synthetic benchmark and its truth."""
    return generate_synthetic(BENCHMARK_SPEC)


@pytest.fixture(scope="session")
def benchmark_stack(benchmark):
    seq, _ = benchmark
    return sequence_saliency(seq, PipelineConfig())


@pytest.fixture(scope="session")
def benchmark_masks(benchmark_stack):
    return masks_from_saliency(benchmark_stack, PipelineConfig().roi)


@pytest.fixture(scope="session")
def small_dataset():
    """A quick 128x128 sequence with a handful of cells."""
    return generate_synthetic(SyntheticSpec(n_cells=6, n_frames=8, width=128, height=128, seed=11))


_ACCEPTANCE_LINES = {}


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(_ACCEPTANCE_LINES[key])
