import numpy as np
import pytest

from driftgate.dataset import SynthSpec, generate_synthetic
from driftgate.metrics import FLAG_NOTHING, CostSpec
from driftgate.scoring import ScoredWindow


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")
    config._acceptance = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    store = item.config._acceptance
    key = mark.args[0]
    status = "SKIP" if rep.skipped else ("FAIL" if rep.failed else "PASS")
    if rep.when == "call" or rep.skipped or rep.failed:
        prev = store.get(key, (None, "PASS", ""))[1]
        if prev != "FAIL":
            detail = "; ".join(v for k, v in rep.user_properties if k == "detail")
            store[key] = (mark.args[1], status, detail)


def pytest_terminal_summary(terminalreporter, config):
    store = config._acceptance
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(store):
        title, status, detail = store[n]
        line = f"{status} criterion {n:2d}: {title}"
        terminalreporter.write_line(line + (f" [{detail}]" if detail else ""))


def make_window(scores, labels, steps=None) -> ScoredWindow:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int8)
    steps = np.ones(scores.size, dtype=np.int64) if steps is None else np.asarray(steps)
    return ScoredWindow(scores, labels, steps)


def random_window(rng, n_max=200, quantum=1e-3) -> ScoredWindow:
    n = int(rng.integers(1, n_max + 1))
    levels = int(round(1 / quantum))
    scores = rng.integers(0, levels + 1, size=n) / levels
    labels = (rng.random(n) < rng.uniform(0.05, 0.6)).astype(np.int8)
    return make_window(scores, labels)


def grid_losses(window: ScoredWindow, cost: CostSpec, grid: np.ndarray) -> np.ndarray:
    """Loss at every threshold of ``grid``, counted by binary search per class."""
    pos = np.sort(window.scores[window.labels == 1])
    neg = np.sort(window.scores[window.labels == 0])
    fn = np.searchsorted(pos, grid, side="left")
    fp = neg.size - np.searchsorted(neg, grid, side="left")
    return cost.c_fn * fn.astype(np.float64) + cost.c_fp * fp.astype(np.float64)


def brute_force_loss(window: ScoredWindow, cost: CostSpec, grid: np.ndarray) -> tuple[float, float]:
    """Minimum loss over ``grid`` and the lowest grid point attaining it."""
    grid = np.sort(np.asarray(grid, dtype=np.float64))
    losses = grid_losses(window, cost, grid)
    i = int(np.argmin(losses))
    return float(losses[i]), float(grid[i])


# thresholds k/1e4 for scores on a 1e-3 lattice, plus one above every score
DENSE_GRID = np.append(np.arange(0, 10001) / 1e4, FLAG_NOTHING)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_synth():
    spec = SynthSpec.linear(n_periods=24, records_per_period=200, feature_dim=4, prevalence=(0.15, 0.05), shift=(2.0, 1.2), seed=3)
    return generate_synthetic(spec)
