import numpy as np
import pytest

from redcut.dataset import Dataset, discretize, normalize
from redcut.selectors import FeatureSpace


def planted_dataset(seed, n=100, n_inf=10, copies=4, n_noise=150, frac=0.4):
    """10 informative features, 4 corrupted copies of each, and pure noise.

    A copy agrees with its source on 60% of instances and is resampled
    elsewhere, so it is redundant with the source but strictly less relevant.
    Informative features occupy rows 0..n_inf-1.
    """
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, n)
    sgn = 2 * y - 1
    inf = np.array([sgn * 1.2 + rng.normal(0, 1.0, n) for _ in range(n_inf)])
    cps = []
    for i in range(n_inf):
        for _ in range(copies):
            c = inf[i].copy()
            j = rng.choice(n, int(frac * n), replace=False)
            c[j] = rng.normal(0, 1.5, j.size)
            cps.append(c)
    noise = rng.normal(size=(n_noise, n))
    X = np.vstack([inf, np.array(cps), noise])
    return Dataset(f"planted-{seed}", X, y)


def space_of(d: Dataset) -> FeatureSpace:
    d = normalize(d)
    return FeatureSpace.from_codes(discretize(d), d.labels)


def random_dataset(seed, m=40, n=50, classes=2):
    rng = np.random.default_rng(seed)
    y = np.arange(n) % classes
    rng.shuffle(y)
    X = rng.normal(size=(m, n))
    X[: m // 5] += (y - y.mean())[None, :]
    return Dataset(f"random-{seed}", X, y)


@pytest.fixture
def small_space():
    return space_of(random_dataset(0))


@pytest.fixture
def tmp_csv(tmp_path):
    d = random_dataset(3, m=12, n=30)
    path = tmp_path / "data.csv"
    rows = np.column_stack([d.values.T, d.labels])
    np.savetxt(path, rows, delimiter=",", fmt="%.6g")
    return path


# one (criterion, passed, detail) entry per acceptance check, echoed at the end
ACCEPTANCE = []


def _status(passed):
    return "SKIP" if passed is None else "PASS" if passed else "FAIL"


def record(number, passed, detail):
    """``passed`` is True, False, or None for a skipped criterion."""
    ACCEPTANCE.append((number, passed, detail))
    print(f"criterion {number}: {_status(passed)} - {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {number:>2}: {_status(passed)}  {detail}")
