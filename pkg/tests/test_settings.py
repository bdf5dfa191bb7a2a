import pytest
from pydantic import ValidationError

from reflectshare.settings import Settings, get_settings, reload_settings


@pytest.fixture
def restore_settings():
    yield
    reload_settings()


def test_session_environment():
    """conftest pins the log level and worker count for every test"""
    settings = get_settings()
    assert settings.log_level == 'WARNING'
    assert settings.workers == 1


def test_defaults():
    settings = Settings(_env_file=None, log_level='INFO', workers=1)
    assert settings.exhaustive_cap == 10_000_000
    assert settings.exhaustive_phase_max_elements == 3
    assert settings.csv_float_digits == 17


def test_environment_override(restore_settings, monkeypatch):
    monkeypatch.setenv('RSH_EXHAUSTIVE_CAP', '500')
    monkeypatch.setenv('RSH_LOG_LEVEL', 'debug')
    settings = reload_settings()
    assert settings.exhaustive_cap == 500
    assert settings.log_level == 'DEBUG'


def test_rejects_unknown_level():
    with pytest.raises(ValidationError):
        Settings(log_level='chatty')


@pytest.mark.parametrize("field", ['workers', 'exhaustive_cap', 'exhaustive_phase_max_elements',
                                   'csv_float_digits'])
def test_rejects_non_positive(field):
    with pytest.raises(ValidationError):
        Settings(**{field: 0})
