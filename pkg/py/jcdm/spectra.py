"""
spectra.py
----------
Exact diagonalization and the quantum observables derived from it.

`diagonalize` solves each site-swap parity sector separately whenever the
Hamiltonian is site symmetric, and the full banded eigenproblem with LAPACK
(`eig_banded`) once an imbalance breaks the symmetry. Partners of a localized
doublet live in different sectors, so their gap is never limited by how well
a single solve separates two nearly equal eigenvalues, and neither partner
comes back as a one-sided mixture.

Every derived quantity (spectral map, DOS, splittings, imbalance map) works on
an immutable `EigenSolution`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgError, eig_banded, eigh
from scipy.optimize import brentq

from .config import ModelParams
from .errors import ConfigError, DomainError, NumericalError
from .model import BandedHamiltonian, FockBasis, assemble_hamiltonian, enumerate_basis, parity_permutation
from .wkb.bands import potential
from .wkb.orbits import barrier_position

_log = logging.getLogger("jcdm.spectra")

RESIDUAL_TOLERANCE = 1e-8
PARITY_SYMMETRY_TOLERANCE = 1e-14
DEFAULT_DOS_BINS = 101
MIN_DOS_BINS = 10
PAIR_GAP_FRACTION = 0.1
IMBALANCE_PROBE = 1e-8

# rows: bands 1..4 = (++), (+-), (-+), (--) over spins (dd, du, ud, uu)
POLARITON_TRANSFORM = 0.5 * np.array(
    [[1.0, 1.0, 1.0, 1.0],
     [1.0, -1.0, 1.0, -1.0],
     [1.0, 1.0, -1.0, -1.0],
     [1.0, -1.0, -1.0, 1.0]]
)


# ── Eigen-solution ───────────────────────────────────────────────────────── #

@dataclass(frozen=True, eq=False)
class EigenSolution:
    """Full spectrum of one Hamiltonian.

    `energies` are raw eigenvalues E_n (ascending), `vectors[:, n]` the
    matching unit eigenvectors in basis order and `parity[n]` the site-swap
    parity (+1, -1, or 0 when the state is not a parity eigenstate).
    """

    params: Optional[ModelParams]
    basis: FockBasis
    energies: np.ndarray
    vectors: np.ndarray
    parity: np.ndarray

    def __len__(self) -> int:
        return len(self.energies)

    @property
    def eps(self) -> np.ndarray:
        return self.energies / self.basis.N

    @property
    def x(self) -> np.ndarray:
        return self.basis.z_values / self.basis.N

    @cached_property
    def profiles(self) -> np.ndarray:
        """C_i(Z) as an array (state, Z index, spin) with zeros for missing states."""
        N = self.basis.N
        z_index = np.array([(s.Z + N) // 2 for s in self.basis.states])
        spin_index = np.array([s.spin_index for s in self.basis.states])
        out = np.zeros((len(self), N + 1, 4))
        out[:, z_index, spin_index] = self.vectors.T
        return out

    @cached_property
    def traced(self) -> np.ndarray:
        """|Psi_n(Z)|^2 summed over the qubit flags, shape (state, Z index)."""
        return np.sum(self.profiles ** 2, axis=2)

    @cached_property
    def mean_x(self) -> np.ndarray:
        """<x>_n = sum (Z/N) |Psi_n(Z)|^2."""
        return self.traced @ self.x

    def polariton_profile(self, n: int) -> np.ndarray:
        """Band amplitudes of state n, shape (Z index, band 1..4)."""
        return self.profiles[n] @ POLARITON_TRANSFORM.T

    def band_weights(self, n: int) -> np.ndarray:
        """Probability carried by each polariton band in state n."""
        return np.sum(self.polariton_profile(n) ** 2, axis=0)


def _parity_of(vectors: np.ndarray, perm: np.ndarray) -> np.ndarray:
    overlap = np.einsum("in,in->n", vectors, vectors[perm])
    return np.where(np.abs(overlap) > 0.5, np.rint(overlap), 0.0).astype(int)


def _sector_transforms(perm: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Orthonormal columns spanning the even and odd site-swap sectors."""
    dim = len(perm)
    even: List[np.ndarray] = []
    odd: List[np.ndarray] = []
    for i in range(dim):
        j = perm[i]
        if j < i:
            continue
        col = np.zeros(dim)
        if j == i:
            col[i] = 1.0
            even.append(col)
            continue
        col[i] = col[j] = math.sqrt(0.5)
        even.append(col)
        col = np.zeros(dim)
        col[i], col[j] = math.sqrt(0.5), -math.sqrt(0.5)
        odd.append(col)
    shape = (dim, 0)
    return (np.column_stack(even) if even else np.zeros(shape),
            np.column_stack(odd) if odd else np.zeros(shape))


def _commutes_with_parity(dense: np.ndarray, perm: np.ndarray) -> bool:
    scale = max(float(np.max(np.abs(dense))), 1.0)
    return float(np.max(np.abs(dense[np.ix_(perm, perm)] - dense))) <= PARITY_SYMMETRY_TOLERANCE * scale


def diagonalize(H: BandedHamiltonian, basis: Optional[FockBasis] = None, params: Optional[ModelParams] = None,
                parity_resolved: Optional[bool] = None) -> EigenSolution:
    """Full spectrum of H, ascending, ties broken with even parity first.

    With `parity_resolved=None` each parity sector is solved on its own
    whenever H commutes with the site swap (eps_imb = 0), so every state
    carries parity +-1 and a symmetric profile even inside tunneling
    doublets. The single banded solve is used otherwise.

    Raises NumericalError on LAPACK failure or when an eigenpair residual
    exceeds 1e-8 * max|H_ij|, DomainError when sectors are requested for a
    Hamiltonian that mixes them.
    """
    basis = basis or enumerate_basis(H.N)
    if len(basis) != H.dimension:
        raise ConfigError(f"Basis has {len(basis)} states but H has dimension {H.dimension}")
    perm = parity_permutation(basis)
    dense = H.to_dense()
    symmetric = _commutes_with_parity(dense, perm)
    if parity_resolved is None:
        parity_resolved = symmetric
    elif parity_resolved and not symmetric:
        raise DomainError("Parity sectors need a site-symmetric Hamiltonian (eps_imb = 0)")

    try:
        if parity_resolved:
            energies, vectors, parity = [], [], []
            for sign, U in zip((1, -1), _sector_transforms(perm)):
                if U.shape[1] == 0:
                    continue
                w, v = eigh(U.T @ dense @ U)
                energies.append(w)
                vectors.append(U @ v)
                parity.append(np.full(len(w), sign))
            E, V, P = np.concatenate(energies), np.hstack(vectors), np.concatenate(parity)
        else:
            E, V = eig_banded(H.lower, lower=True)
            P = _parity_of(V, perm)
    except LinAlgError as exc:
        raise NumericalError(f"Eigensolver failed for N={H.N}: {exc}") from exc

    order = np.lexsort((-P, E))
    E, V, P = E[order], V[:, order], P[order]

    residual = np.linalg.norm(H.matvec(V) - V * E, axis=0)
    bound = RESIDUAL_TOLERANCE * H.norm_max()
    bad = np.flatnonzero(residual > bound)
    if bad.size:
        n = int(bad[0])
        raise NumericalError(f"Eigenpair {n} (E={E[n]:.12g}) has residual {residual[n]:.3g} > {bound:.3g}")

    _log.debug("diagonalized N=%d dim=%d parity_resolved=%s", H.N, H.dimension, parity_resolved)
    return EigenSolution(params=params, basis=basis, energies=E, vectors=V, parity=P)


def solve(params: ModelParams, parity_resolved: Optional[bool] = None) -> EigenSolution:
    """Assemble and diagonalize in one step."""
    basis = enumerate_basis(params.N)
    return diagonalize(assemble_hamiltonian(params, basis), basis, params, parity_resolved)


# ── Spectral map and density of states ───────────────────────────────────── #

@dataclass(frozen=True)
class SpectralMap:
    x: np.ndarray
    eps: np.ndarray
    weights: np.ndarray

    def rows(self):
        """(x, eps_n, weight) triples, state-major."""
        for n, e in enumerate(self.eps):
            for x, w in zip(self.x, self.weights[n]):
                yield float(x), float(e), float(w)


def spectral_map(sol: EigenSolution) -> SpectralMap:
    return SpectralMap(x=sol.x, eps=sol.eps, weights=sol.traced)


@dataclass(frozen=True)
class DosHistogram:
    edges: np.ndarray
    counts: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def count_near(self, eps: float) -> int:
        """Count of the bin containing eps."""
        k = int(np.clip(np.searchsorted(self.edges, eps, side="right") - 1, 0, len(self.counts) - 1))
        return int(self.counts[k])


def dos(sol: EigenSolution, nbins: int = DEFAULT_DOS_BINS) -> DosHistogram:
    if nbins < MIN_DOS_BINS:
        raise ConfigError(f"DOS needs at least {MIN_DOS_BINS} bins, got {nbins}")
    eps = sol.eps
    counts, edges = np.histogram(eps, bins=nbins, range=(float(eps.min()), float(eps.max())))
    return DosHistogram(edges=edges, counts=counts)


# ── Splittings ───────────────────────────────────────────────────────────── #

@dataclass(frozen=True)
class LevelPair:
    index: int
    lower: int
    upper: int
    mean_eps: float
    delta_eps: float


@dataclass(frozen=True)
class SplittingReport:
    window: Tuple[float, float]
    mean_spacing: float
    pairs: List[LevelPair] = field(default_factory=list)
    unpaired: List[int] = field(default_factory=list)

    @property
    def flagged(self) -> bool:
        return bool(self.unpaired)


def splittings(sol: EigenSolution, window: Tuple[float, float],
               gap_fraction: float = PAIR_GAP_FRACTION) -> SplittingReport:
    """Opposite-parity neighbours in `window` closer than gap_fraction * mean spacing."""
    lo, hi = sorted(window)
    inside = np.flatnonzero((sol.eps >= lo) & (sol.eps <= hi))
    if inside.size < 2:
        return SplittingReport(window=(lo, hi), mean_spacing=math.nan, unpaired=inside.tolist())
    eps = sol.eps
    mean_spacing = float(eps[inside[-1]] - eps[inside[0]]) / (inside.size - 1)

    pairs: List[LevelPair] = []
    unpaired: List[int] = []
    k = 0
    while k < inside.size:
        i = int(inside[k])
        if k + 1 < inside.size:
            j = int(inside[k + 1])
            gap = float(eps[j] - eps[i])
            if sol.parity[i] * sol.parity[j] == -1 and gap < gap_fraction * mean_spacing:
                pairs.append(LevelPair(len(pairs), i, j, 0.5 * float(eps[i] + eps[j]), gap))
                k += 2
                continue
        unpaired.append(i)
        k += 1
    _log.debug("window [%.6g, %.6g]: %d pairs, %d unpaired", lo, hi, len(pairs), len(unpaired))
    return SplittingReport(window=(lo, hi), mean_spacing=mean_spacing, pairs=pairs, unpaired=unpaired)


# ── Imbalance map ────────────────────────────────────────────────────────── #

@dataclass(frozen=True)
class ImbalancePoint:
    index: int
    eps: float
    x0: float
    mean_x: float


@dataclass(frozen=True)
class ImbalanceMap:
    J_over_gprime: float
    points: List[ImbalancePoint]
    skipped: List[int]


def equivalent_position(eps: float, params: ModelParams) -> Optional[float]:
    """x0 in [0, 1] with V_1^l(x0) = eps, or None.

    Between J/g' = 1/2 and 1/sqrt(2) V_1^l has a hump at x_m; the branch
    beyond it (the localized one) is preferred when both branches have a root.
    """
    f = lambda x: potential(1, "l", x, params) - eps
    r = params.J_over_gprime
    if 0.5 < r < 1.0 / math.sqrt(2.0):
        x_m = barrier_position(r)
        branches = [(x_m, 1.0), (0.0, x_m)]
    else:
        branches = [(0.0, 1.0)]
    for a, b in branches:
        fa, fb = f(a), f(b)
        if fa == 0.0:
            return a
        if fb == 0.0:
            return b
        if fa * fb < 0.0:
            return brentq(f, a, b, xtol=1e-12)
    return None


def imbalance_map(sol: EigenSolution) -> ImbalanceMap:
    """Classical starting point x0 and quantum <x> for every band-1 state."""
    params = sol.params
    if params is None or params.eps_imb <= 0.0:
        raise DomainError("The imbalance map needs a symmetry-breaking eps_imb > 0")
    points: List[ImbalancePoint] = []
    skipped: List[int] = []
    mean_x = sol.mean_x
    for n, e in enumerate(sol.eps):
        x0 = equivalent_position(float(e), params)
        if x0 is None:
            skipped.append(n)
            continue
        points.append(ImbalancePoint(n, float(e), x0, float(mean_x[n])))
    _log.info("imbalance map J/g'=%.4g: %d states, %d skipped", params.J_over_gprime, len(points), len(skipped))
    return ImbalanceMap(params.J_over_gprime, points, skipped)
