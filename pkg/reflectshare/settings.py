from functools import cache
import sys

from pydantic import ValidationError, field_validator
from pydantic_settings import (
    BaseSettings,
    PydanticBaseSettingsSource,
    SettingsConfigDict,
    YamlConfigSettingsSource
)


class Settings(BaseSettings):
    """ Runtime settings can be read from a config.yaml file,
        or from the environment, with environment variables prepended
        with "rsh_" (case insensitive). The environment variables can
        be passed in the environment or in a .env file.

        Experiment parameters (room, arrays, link budget, sweeps) are not
        settings; they live in experiment config files, see experiments.py.
    """

    log_level: str = 'INFO'

    # Default size of the placement-evaluation worker pool. The --workers
    # flag and the `workers` experiment key override it.
    workers: int = 1

    # Largest number of placement statuses exhaustive mode will evaluate
    # before refusing and pointing the user to randomized mode.
    exhaustive_cap: int = 10_000_000

    # Largest pooled element count the joint-grid phase search accepts.
    exhaustive_phase_max_elements: int = 3

    # Significant digits for floats in CSV output (17 is lossless for float64)
    csv_float_digits: int = 17

    model_config = SettingsConfigDict(
        yaml_file="config.yaml",
        env_file='.env',
        env_prefix='rsh_',
        env_nested_delimiter="__",
        env_file_encoding='utf-8'
    )

    @field_validator('log_level')
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        level = v.upper()
        if level not in {'TRACE', 'DEBUG', 'INFO', 'SUCCESS', 'WARNING', 'ERROR', 'CRITICAL'}:
            raise ValueError(f"log_level must be a loguru level name, got '{v}'")
        return level

    @field_validator('workers', 'exhaustive_cap', 'exhaustive_phase_max_elements', 'csv_float_digits')
    @classmethod
    def validate_positive(cls, v: int) -> int:
        if v <= 0:
            raise ValueError('must be a positive integer')
        return v

    @classmethod
    def settings_customise_sources(  # noqa: PLR0913
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> tuple[PydanticBaseSettingsSource, ...]:
        return (
            init_settings,
            env_settings,
            dotenv_settings,
            YamlConfigSettingsSource(settings_cls),
            file_secret_settings,
        )


@cache
def get_settings():
    try:
        return Settings()
    except ValidationError as e:
        # Print only the field errors, not the full traceback
        print("\n❌ Configuration Error:", file=sys.stderr)
        for error in e.errors():
            field = '.'.join(str(loc) for loc in error['loc'])
            print(f"  {field}: {error['msg']}", file=sys.stderr)
        print("", file=sys.stderr)
        sys.exit(2)


def reload_settings():
    """Clear the settings cache and reload from environment/config files.
    Useful when environment variables are set after initial settings load."""
    get_settings.cache_clear()
    return get_settings()
