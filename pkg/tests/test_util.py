import pytest

from minkmembrane.util import THREADS_ENV, parallel_map, thread_count


def test_thread_count_default_is_one(monkeypatch):
    monkeypatch.delenv(THREADS_ENV, raising=False)
    assert thread_count() == 1


def test_thread_count_parses_env(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "3")
    assert thread_count() == 3


@pytest.mark.parametrize("bad", ["0", "-2", "many"])
def test_thread_count_rejects_bad_values(monkeypatch, bad):
    monkeypatch.setenv(THREADS_ENV, bad)
    with pytest.raises(ValueError):
        thread_count()


@pytest.mark.parametrize("nthreads", ["1", "4"])
def test_parallel_map_preserves_order(monkeypatch, nthreads):
    monkeypatch.setenv(THREADS_ENV, nthreads)
    items = list(range(50))
    assert parallel_map(lambda v: v * v, items) == [v * v for v in items]
