"""Exception hierarchy shared by every engine.

Each error carries a machine-readable `category` and the process exit code the
command line maps it to. Library code raises these; the CLI boundary turns them
into a one-line JSON report on stderr.
"""

from __future__ import annotations

from typing import Any, Dict


class JcdmError(Exception):
    """Base class for all laboratory errors."""

    category = "internal"
    exit_code = 1

    def to_dict(self) -> Dict[str, Any]:
        return {"ok": False, "category": self.category, "message": str(self)}


class ConfigError(JcdmError, ValueError):
    """Invalid parameters, unknown presets, malformed manifests."""

    category = "config"
    exit_code = 2


class DomainError(ConfigError):
    """Argument outside the mathematical domain of an operation."""

    category = "domain"


class NumericalError(JcdmError, RuntimeError):
    """Eigensolver, root-finder, quadrature or integrator failure."""

    category = "numerical"
    exit_code = 3
