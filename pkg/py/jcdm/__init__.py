"""Public exports for the Jaynes-Cummings dimer laboratory."""

from .errors import ConfigError, DomainError, JcdmError, NumericalError
from .config import LabSettings, ModelParams, RunConfig
from .model import BandedHamiltonian, FockBasis, assemble_hamiltonian, brute_force_hamiltonian, enumerate_basis
from .spectra import EigenSolution, diagonalize, dos, imbalance_map, solve, spectral_map, splittings
from .dynamics import (
    ClassicalState,
    integrate,
    pendulum_critical,
    poincare_section,
    threshold_scan,
)
from .husimi import husimi_q, kappa0
from .artifacts import ArtifactWriter
from .cli import execute, run

__all__ = [
    "JcdmError",
    "ConfigError",
    "DomainError",
    "NumericalError",
    "ModelParams",
    "LabSettings",
    "RunConfig",
    "FockBasis",
    "BandedHamiltonian",
    "enumerate_basis",
    "assemble_hamiltonian",
    "brute_force_hamiltonian",
    "EigenSolution",
    "diagonalize",
    "solve",
    "spectral_map",
    "dos",
    "splittings",
    "imbalance_map",
    "ClassicalState",
    "integrate",
    "threshold_scan",
    "pendulum_critical",
    "poincare_section",
    "husimi_q",
    "kappa0",
    "ArtifactWriter",
    "execute",
    "run",
]
