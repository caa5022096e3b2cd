import io
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

from dotenv import dotenv_values
from pydantic import ValidationError as PydanticValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from pufe.core.exceptions import ConfigurationError


class Settings(BaseSettings):
    """Process-wide settings.

    This class uses Pydantic's BaseSettings which automatically reads from environment variables.
    Environment variables take precedence over values defined in the class.

    Example:
        If you define LOG_LEVEL=DEBUG in your environment, it will override the default INFO.
    """
    # CORE SETTINGS
    app_name: str = "pufe"
    app_description: str = "Prediction with unpredictable feature evolution"
    app_version: str = "0.1.0"

    # LOGGING SETTINGS
    log_level: str = "INFO"
    log_file: Optional[str] = None

    # OUTPUT SETTINGS
    output_dir: str = "results"

    # NUMERICAL SETTINGS
    # Singular values below pinv_cutoff * sigma_max count as zero
    pinv_cutoff: float = 1e-10
    # Normal matrices above this condition number are treated as singular
    max_condition: float = 1e12
    # First ridge tried when a Gram matrix needs regularizing
    ridge_start: float = 1e-10
    orthonormality_tol: float = 1e-6

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )


# Create a global settings instance
settings = Settings()


def parse_key_value_text(text: str, lower_keys: bool = True) -> Dict[str, str]:
    """Parse flat key=value text with # comments.

    Empty values are dropped so model defaults apply.
    """
    values = dotenv_values(stream=io.StringIO(text), interpolate=False)
    return {
        (key.strip().lower() if lower_keys else key.strip()): value.strip()
        for key, value in values.items()
        if value is not None and value.strip() != ""
    }


def read_key_value_file(path: Union[str, Path]) -> Dict[str, str]:
    """Read a flat key=value file; keys are lower-cased."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"Config file not found: {path}")
    return parse_key_value_text(path.read_text(encoding="utf-8"))


def load_run_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
):
    """Build a RunConfig from an optional key=value file plus overrides.

    Overrides (typically CLI flags) win over file values; None overrides
    are ignored.
    """
    # Imported here: models depend on core, not the other way round
    from pufe.models.run import RunConfig

    values: Dict[str, Any] = read_key_value_file(path) if path is not None else {}
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value

    unknown = sorted(set(values) - set(RunConfig.model_fields))
    if unknown:
        raise ConfigurationError(f"Unknown config keys: {', '.join(unknown)}")
    try:
        return RunConfig(**values)
    except PydanticValidationError as exc:
        first = exc.errors()[0]
        loc = ".".join(str(part) for part in first.get("loc", []))
        raise ConfigurationError(f"Invalid config value for {loc}: {first.get('msg')}") from exc
