import numpy as np
import pytest

from decaykit._pool import THREADS_ENV, pmap, resolve_threads
from decaykit.rng import child_seed, stream


def test_stream_depends_on_labels_only():
    a = stream(3, "decay", 2, 0).random(4)
    b = stream(3, "decay", 2, 0).random(4)
    c = stream(3, "decay", 2, 1).random(4)
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    assert not np.array_equal(a, stream(4, "decay", 2, 0).random(4))


def test_seed_required():
    with pytest.raises(ValueError):
        stream(None, "x")
    with pytest.raises(ValueError):
        stream(-1, "x")


def test_child_seed_stable():
    assert child_seed(1, "kmeans") == child_seed(1, "kmeans")
    assert child_seed(1, "kmeans") != child_seed(1, "cv")


def test_threads_resolution(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "3")
    assert resolve_threads() == 3
    assert resolve_threads(2) == 2
    monkeypatch.delenv(THREADS_ENV)
    assert resolve_threads() >= 1
    with pytest.raises(ValueError):
        resolve_threads(0)


def test_pmap_keeps_order():
    assert pmap(lambda v: v * v, range(20), threads=4) == [v * v for v in range(20)]
