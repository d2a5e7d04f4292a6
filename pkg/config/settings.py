"""Configuration settings loaded from .env file and DFCL_ environment variables."""

from pathlib import Path
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Environment-level settings shared by every command."""

    data_dir: str = "data"
    output_dir: str = "output"
    device: str = "cpu"
    download: bool = False
    log_level: str = "INFO"

    model_config = SettingsConfigDict(
        env_file='.env',
        env_file_encoding='utf-8',
        env_prefix='DFCL_',
        case_sensitive=False,
        extra='ignore',
    )

    @property
    def runs_dir(self) -> Path:
        """Path to experiment run directories."""
        return Path(self.output_dir) / "runs"

    @property
    def teachers_dir(self) -> Path:
        """Path to trained teacher checkpoints and registry."""
        return Path(self.output_dir) / "teachers"

    @property
    def logs_dir(self) -> Path:
        """Path to logs directory."""
        return Path(self.output_dir) / "logs"


# Global settings instance
settings = Settings()
