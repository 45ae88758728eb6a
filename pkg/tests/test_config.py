import logging

from tailcouple.config import Settings, configure_logging, get_settings


def test_defaults():
    s = Settings()
    assert s.seed == 0
    assert s.default_k_exponent == 0.45
    assert s.quad_rel_tol == 1e-10
    assert s.bridge_min_grid == 10_000
    assert s.bridge_min_reps == 1_000


def test_environment_overrides(monkeypatch):
    monkeypatch.setenv("TAILCOUPLE_SEED", "17")
    monkeypatch.setenv("TAILCOUPLE_BRIDGE_REPS", "2000")
    s = get_settings()
    assert s.seed == 17
    assert s.bridge_reps == 2000


def test_settings_are_cached():
    assert get_settings() is get_settings()


def test_configure_logging_accepts_lower_case(monkeypatch):
    calls = {}
    monkeypatch.setattr(logging, "basicConfig", lambda **kw: calls.update(kw))
    configure_logging("info")
    assert calls["level"] == "INFO"
    assert calls["format"] == "[%(name)s] %(message)s"
