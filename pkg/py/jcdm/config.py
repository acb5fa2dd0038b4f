"""
config.py
---------
Physical parameters, process settings and the per-run configuration.

`ModelParams` is the immutable set of couplings every engine consumes.
`LabSettings` reads JCDM_* environment variables and a local `.env`.
`RunConfig` is what a command was asked to do; it is written verbatim into
`manifest.json` so a run can be replayed with `--from-manifest`.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Dict, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from .errors import ConfigError


# ── Model parameters ─────────────────────────────────────────────────────── #

class ModelParams(BaseModel):
    """Couplings of the resonant two-site Jaynes-Cummings model.

    Energies are in arbitrary units; `h = 1/N` is the effective Planck constant
    of the Fock-space tight-binding picture and `gprime = g/sqrt(2N)` the
    rescaled qubit-photon coupling.
    """

    model_config = ConfigDict(frozen=True)

    N: int = Field(ge=1)
    g: float = Field(ge=0.0)
    J: float = Field(ge=0.0)
    eps_imb: float = 0.0

    @field_validator("g", "J", "eps_imb")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("couplings must be finite")
        return value

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def gprime(self) -> float:
        return self.g / math.sqrt(2.0 * self.N)

    @property
    def J_over_gprime(self) -> float:
        return math.inf if self.gprime == 0.0 else self.J / self.gprime

    @classmethod
    def from_scaled(cls, N: int, J: float, g_over_Jsqrt2N: float, eps_imb: float = 0.0) -> "ModelParams":
        """Build from g/(J*sqrt(2N)), the coupling axis of the spectral maps."""
        return cls(N=N, J=J, g=g_over_Jsqrt2N * J * math.sqrt(2.0 * N), eps_imb=eps_imb)

    @classmethod
    def from_ratio(cls, N: int, J: float, J_over_gprime: float, eps_imb: float = 0.0) -> "ModelParams":
        """Build from J/g', the ratio used throughout the semiclassical analysis."""
        if J_over_gprime <= 0.0:
            raise ConfigError(f"J/g' must be positive, got {J_over_gprime}")
        gprime = J / J_over_gprime
        return cls(N=N, J=J, g=gprime * math.sqrt(2.0 * N), eps_imb=eps_imb)

    def with_N(self, N: int) -> "ModelParams":
        """Same g' and J at a different polariton number."""
        return ModelParams(N=N, J=self.J, g=self.gprime * math.sqrt(2.0 * N), eps_imb=self.eps_imb)


# ── Process settings ─────────────────────────────────────────────────────── #

class LabSettings(BaseSettings):
    """Process-wide knobs read from JCDM_* variables or a local .env file."""

    model_config = SettingsConfigDict(env_prefix="JCDM_", env_file=".env", extra="ignore")

    threads: int = Field(default=1, ge=1)
    command_log: bool = True
    log_level: str = "WARNING"

    @classmethod
    def from_env(cls) -> "LabSettings":
        try:
            return cls()
        except ValidationError as exc:
            raise ConfigError(f"Invalid JCDM_* environment: {exc.errors()[0]['msg']}") from exc


# ── Run configuration ────────────────────────────────────────────────────── #

class RunConfig(BaseModel):
    """One command invocation: what to compute and where to put it.

    Every computation is deterministic, so a manifest carries no seed.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    command: str
    params: Optional[ModelParams] = None
    options: Dict[str, Any] = Field(default_factory=dict)
    out: str = "out"
    threads: int = Field(default=1, ge=1)

    def option(self, key: str, default: Any = None) -> Any:
        return self.options.get(key, default)

    def to_manifest(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")

    @classmethod
    def from_manifest(cls, path: str | Path) -> "RunConfig":
        """Reload the configuration block of a `manifest.json`."""
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"Cannot read manifest '{path}': {exc}") from exc
        if "config" not in payload:
            raise ConfigError(f"Manifest '{path}' has no 'config' block")
        try:
            return cls.model_validate(payload["config"])
        except ValidationError as exc:
            raise ConfigError(f"Manifest '{path}' is invalid: {exc.errors()[0]['msg']}") from exc
