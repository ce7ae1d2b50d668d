"""Tests for the worker-thread resolution in settings."""

import logging

from settings import THREADS_ENV, get_thread_count


class TestThreadCount:
    """Flag first, then the environment, then a single thread."""

    def test_flag_wins_over_environment(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, '6')
        assert get_thread_count(3) == 3

    def test_environment_fallback(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, '4')
        assert get_thread_count() == 4

    def test_default_is_one(self, monkeypatch):
        monkeypatch.delenv(THREADS_ENV, raising=False)
        assert get_thread_count() == 1

    def test_non_integer_environment_is_ignored(self, monkeypatch, caplog):
        monkeypatch.setenv(THREADS_ENV, 'many')
        with caplog.at_level(logging.WARNING, logger='settings'):
            assert get_thread_count() == 1
        assert THREADS_ENV in caplog.text

    def test_values_below_one_are_raised(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, '0')
        assert get_thread_count() == 1
        assert get_thread_count(-2) == 1
