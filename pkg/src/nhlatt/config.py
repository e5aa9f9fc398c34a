from pathlib import Path
from typing import Any, Dict, Literal, Optional

import yaml
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .errors import InvalidParameterError
from .utils import worker_count

DEFAULT_CONFIG_PATH = Path.cwd() / "nhlatt.yaml"
DEFAULT_STORAGE_DIR = Path.cwd() / ".nhlatt"

Command = Literal[
    "spectrum",
    "scatter",
    "scan-gamma",
    "scan-k",
    "scan-q",
    "bound-state",
    "ep-locate",
    "classify-ep",
    "profiles",
    "continuum",
]
TableFormat = Literal["csv", "json"]


class RunConfig(BaseModel):
    """A stored invocation: the command name and its parameters."""

    model_config = ConfigDict(extra="forbid")

    command: Command
    parameters: Dict[str, Any] = Field(default_factory=dict)
    output_path: Optional[str] = None
    format: Optional[TableFormat] = None
    seed: Optional[int] = None
    tol: Optional[float] = None


class Settings(BaseModel):
    """Configuration container with validation"""

    model_config = ConfigDict(extra="forbid")

    # Numerics
    tol: float = Field(default=1e-8, ge=1e-12, le=1e-4)
    seed: int = 0
    safety: float = Field(default=0.8, gt=0.0, le=1.0)
    edge_overlap_max: float = Field(default=1e-4, gt=0.0)

    # Execution
    threads: Optional[int] = Field(default=None, ge=1)
    use_cache: bool = False
    storage_dir: Path = Field(default=DEFAULT_STORAGE_DIR)
    format: TableFormat = "csv"

    run: Optional[RunConfig] = None

    @classmethod
    def from_yaml(cls, path: Path) -> "Settings":
        """Load settings from a YAML (or JSON) file"""
        if not path.exists():
            raise InvalidParameterError(f"config file not found: {path}")

        with open(path, "r") as f:
            data = yaml.safe_load(f) or {}
        if not isinstance(data, dict):
            raise InvalidParameterError(f"config file {path} must hold a mapping")

        try:
            return cls.model_validate(data)
        except ValidationError as e:
            logger.error(f"Error loading config {path}: {e}")
            raise InvalidParameterError(f"invalid config file {path}: {e}") from e

    def merge_with_cli(self, cli_args: Dict[str, Any]) -> "Settings":
        """Return a copy where every non-None CLI value overrides the file value"""
        merged = self.model_dump()

        for key, value in cli_args.items():
            if value is not None:
                if key in merged:
                    merged[key] = value
                else:
                    logger.warning(f"Unknown CLI argument: {key}")

        return Settings.model_validate(merged)

    def command_parameters(self, command: str) -> Dict[str, Any]:
        """Stored parameters for ``command``, empty if the file targets another command."""
        if self.run is None:
            return {}
        if self.run.command != command:
            logger.warning(
                f"config file holds parameters for '{self.run.command}', ignoring them for '{command}'"
            )
            return {}
        return dict(self.run.parameters)

    def effective_threads(self) -> int:
        return worker_count(self.threads)

    def get_cache_dir(self) -> Path:
        return self.storage_dir / "cache"

    def ensure_storage_dirs(self):
        """
        Create the storage directory and its cache directory if missing.
        """
        if not self.storage_dir.exists():
            self.storage_dir.mkdir(parents=True, exist_ok=True)
            logger.info(f"Created storage directory at {self.storage_dir}")

        cache_dir = self.get_cache_dir()
        if not cache_dir.exists():
            cache_dir.mkdir(exist_ok=True)
            logger.info(f"Created cache directory at {cache_dir}")


def find_config_file() -> Optional[Path]:
    """Find configuration file in standard locations"""
    search_paths = [
        Path.cwd() / "nhlatt.yaml",
        Path.cwd() / ".nhlatt.yaml",
        Path.home() / ".config" / "nhlatt" / "config.yaml",
    ]

    for path in search_paths:
        if path.exists():
            return path
    return None


def create_default_config(path: Path = DEFAULT_CONFIG_PATH) -> None:
    """Create a default configuration file"""
    config = Settings()
    data = config.model_dump(mode="json", exclude={"run"})
    data["storage_dir"] = ".nhlatt"
    yaml_str = yaml.dump(data, sort_keys=False)

    final_content = "# nhlatt configuration\n" + yaml_str

    with open(path, "w") as f:
        f.write(final_content)


def load_config(config_path: Optional[Path] = None) -> Settings:
    """
    Load settings with fallbacks:
    1. Use specified config path if provided
    2. Search for config in standard locations
    3. Use defaults if none found
    """
    if config_path is not None:
        return Settings.from_yaml(config_path)

    found_config = find_config_file()
    if found_config:
        logger.debug(f"Using config file {found_config}")
        return Settings.from_yaml(found_config)

    return Settings()
