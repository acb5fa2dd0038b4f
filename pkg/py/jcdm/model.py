"""
model.py
--------
Fixed-N Fock basis and the exact two-site Hamiltonian.

States are labelled by the polariton imbalance Z = n_L - n_R and the two qubit
flags. For fixed total polariton number N the photon numbers follow from
(Z, m_L, m_R), so the Hamiltonian is a tight-binding chain in Z with a 4-state
spin "orbital" on every site:

    on-site   g*sqrt((N +- Z)/2)        flips one qubit, same Z
    hopping   -(J/2) * T[m_L m_R](Z)    Z <-> Z+2, qubit flags unchanged

Ordering is Z-major with (dd, du, ud, uu) inside each Z block, which keeps the
matrix banded. `brute_force_hamiltonian` builds the same operator from
two-mode Kronecker products and is only meant as a check at small N.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from .config import ModelParams
from .errors import ConfigError

_log = logging.getLogger("jcdm.model")

DOWN, UP = 0, 1
SPIN_ORDER: Tuple[Tuple[int, int], ...] = ((DOWN, DOWN), (DOWN, UP), (UP, DOWN), (UP, UP))
BRUTE_FORCE_MAX_N = 8


# ── Basis ────────────────────────────────────────────────────────────────── #

@dataclass(frozen=True, order=True)
class BasisState:
    Z: int
    m_L: int
    m_R: int

    def photons(self, N: int) -> Tuple[int, int]:
        """Photon numbers (left, right) implied by N, Z and the qubit flags."""
        return (N + self.Z) // 2 - self.m_L, (N - self.Z) // 2 - self.m_R

    @property
    def spin_index(self) -> int:
        return SPIN_ORDER.index((self.m_L, self.m_R))

    def label(self) -> str:
        arrows = "↓↑"
        return f"({self.Z:+d},{arrows[self.m_L]},{arrows[self.m_R]})"


@dataclass(frozen=True, eq=False)
class FockBasis:
    N: int
    states: Tuple[BasisState, ...]
    _index: Dict[BasisState, int] = field(repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.states)

    def __iter__(self):
        return iter(self.states)

    def __contains__(self, state: BasisState) -> bool:
        return state in self._index

    def index_of(self, state: BasisState) -> int:
        return self._index[state]

    @property
    def Z(self) -> np.ndarray:
        return np.array([s.Z for s in self.states], dtype=int)

    @property
    def z_values(self) -> np.ndarray:
        """Distinct imbalances -N, -N+2, ..., N."""
        return np.arange(-self.N, self.N + 1, 2, dtype=int)


def enumerate_basis(N: int) -> FockBasis:
    """All (Z, m_L, m_R) with nonnegative photon numbers, Z-major."""
    if N < 1:
        raise ConfigError(f"Polariton number must be >= 1, got N={N}")
    states: List[BasisState] = []
    for Z in range(-N, N + 1, 2):
        for m_L, m_R in SPIN_ORDER:
            state = BasisState(Z, m_L, m_R)
            if min(state.photons(N)) >= 0:
                states.append(state)
    index = {s: i for i, s in enumerate(states)}
    return FockBasis(N=N, states=tuple(states), _index=index)


def parity_permutation(basis: FockBasis) -> np.ndarray:
    """Index map of the site swap (Z, m_L, m_R) -> (-Z, m_R, m_L)."""
    return np.array(
        [basis.index_of(BasisState(-s.Z, s.m_R, s.m_L)) for s in basis.states], dtype=int
    )


# ── Banded Hamiltonian ───────────────────────────────────────────────────── #

@dataclass(frozen=True, eq=False)
class BandedHamiltonian:
    """Real symmetric matrix in LAPACK lower banded storage.

    `lower[k, j]` holds H[j + k, j]; row 0 is the diagonal.
    """

    N: int
    lower: np.ndarray

    @property
    def dimension(self) -> int:
        return self.lower.shape[1]

    @property
    def bandwidth(self) -> int:
        return self.lower.shape[0] - 1

    def to_dense(self) -> np.ndarray:
        dim = self.dimension
        dense = np.zeros((dim, dim))
        for k in range(self.bandwidth + 1):
            idx = np.arange(dim - k)
            dense[idx + k, idx] = self.lower[k, : dim - k]
            dense[idx, idx + k] = self.lower[k, : dim - k]
        return dense

    def matvec(self, v: np.ndarray) -> np.ndarray:
        """H @ v straight from banded storage (v may be a matrix of columns)."""
        v = np.asarray(v)
        out = self.lower[0][:, None] * v if v.ndim == 2 else self.lower[0] * v
        dim = self.dimension
        for k in range(1, self.bandwidth + 1):
            band = self.lower[k, : dim - k]
            if v.ndim == 2:
                band = band[:, None]
            out[k:] += band * v[: dim - k]
            out[: dim - k] += band * v[k:]
        return out

    def norm_max(self) -> float:
        return float(np.max(np.abs(self.lower)))

    def trace(self) -> float:
        return float(np.sum(self.lower[0]))


def hopping_amplitude(N: int, Z: int, m_L: int, m_R: int) -> float:
    """T[m_L m_R] linking Z and Z+2; zero when the Z+2 state does not exist.

    dd: sqrt((N+Z+2)(N-Z))     du: sqrt((N+Z+2)(N-Z-2))
    ud: sqrt((N+Z)(N-Z))       uu: sqrt((N+Z)(N-Z-2))
    """
    left = N + Z + 2 - 2 * m_L
    right = N - Z - 2 * m_R
    return math.sqrt(left * right) if left > 0 and right > 0 else 0.0


def assemble_hamiltonian(params: ModelParams, basis: FockBasis) -> BandedHamiltonian:
    """Exact Hamiltonian at fixed N in banded storage (constant nu*N dropped)."""
    if basis.N != params.N:
        raise ConfigError(f"Basis built for N={basis.N} but parameters have N={params.N}")
    N, g, J = params.N, params.g, params.J
    entries: List[Tuple[int, int, float]] = []

    for i, s in enumerate(basis.states):
        if params.eps_imb != 0.0:
            entries.append((i, i, params.eps_imb * s.Z))
        # qubit flips: only down -> up, the transpose comes from symmetry
        if s.m_L == DOWN:
            flipped = BasisState(s.Z, UP, s.m_R)
            if flipped in basis:
                entries.append((basis.index_of(flipped), i, g * math.sqrt((N + s.Z) / 2)))
        if s.m_R == DOWN:
            flipped = BasisState(s.Z, s.m_L, UP)
            if flipped in basis:
                entries.append((basis.index_of(flipped), i, g * math.sqrt((N - s.Z) / 2)))
        target = BasisState(s.Z + 2, s.m_L, s.m_R)
        if target in basis:
            amplitude = hopping_amplitude(N, s.Z, s.m_L, s.m_R)
            if amplitude:
                entries.append((basis.index_of(target), i, -0.5 * J * amplitude))

    bandwidth = max((row - col for row, col, _ in entries), default=0)
    lower = np.zeros((bandwidth + 1, len(basis)))
    for row, col, value in entries:
        lower[row - col, col] += value
    _log.debug("assembled N=%d dim=%d bandwidth=%d", N, len(basis), bandwidth)
    return BandedHamiltonian(N=N, lower=lower)


# ── Tensor-product reference ─────────────────────────────────────────────── #

def brute_force_hamiltonian(params: ModelParams) -> np.ndarray:
    """Dense H built from qubit and truncated photon operators, projected on N.

    Mode order is qubit_L x photon_L x qubit_R x photon_R. Only the spectrum is
    comparable with `assemble_hamiltonian`; the state ordering differs.
    """
    N = params.N
    if N > BRUTE_FORCE_MAX_N:
        raise ConfigError(f"Brute-force reference is limited to N <= {BRUTE_FORCE_MAX_N}, got N={N}")
    levels = N + 2
    a = np.diag(np.sqrt(np.arange(1, levels)), k=1)
    sigma_plus = np.array([[0.0, 0.0], [1.0, 0.0]])
    eye_q, eye_c = np.eye(2), np.eye(levels)

    def embed(op_qL, op_cL, op_qR, op_cR):
        return np.kron(np.kron(np.kron(op_qL, op_cL), op_qR), op_cR)

    aL = embed(eye_q, a, eye_q, eye_c)
    aR = embed(eye_q, eye_c, eye_q, a)
    spL = embed(sigma_plus, eye_c, eye_q, eye_c)
    spR = embed(eye_q, eye_c, sigma_plus, eye_c)

    nL = aL.T @ aL + spL @ spL.T
    nR = aR.T @ aR + spR @ spR.T
    jc = spL @ aL + spR @ aR
    hop = aL.T @ aR
    H = params.g * (jc + jc.T) - params.J * (hop + hop.T) + params.eps_imb * (nL - nR)

    sector = np.flatnonzero(np.isclose(np.diag(nL + nR), N))
    return H[np.ix_(sector, sector)]
