"""Exact diagonalization reference for spectra, thermal states and dynamics.

Everything else in the package is tested against this module.  Dense
eigendecomposition covers spin-1/2 registers up to the configurable qubit
cap; arbitrary on-site spin S is supported for exchange models, dense up
to the same dimension cap and via a matrix-free Lanczos path for the
lowest part of larger spectra.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.sparse.linalg

from .models import BondTopology, J_PRIME, KITAEV
from .pauli import (
    ATOL_PHYSICS,
    DENSE_QUBIT_CAP,
    DimensionCapError,
    PauliSum,
    PauliTerm,
    dense_matrix,
)
from .series import TimeSeries

# degenerate levels are merged when closer than this fraction of the
# spectral width
DEGENERACY_RTOL = 1e-8


@dataclass(frozen=True)
class LabeledSpectrum:
    """Energy levels with multiplet bookkeeping.

    Each entry is (energy, multiplet count, total spin S).  ``total_spin``
    is None when the Hamiltonian does not conserve S^2 (e.g. with Gamma
    couplings); the multiplet count then equals the plain degeneracy.
    """

    levels: tuple[tuple[float, int, float | None], ...]

    @property
    def ground_energy(self) -> float:
        return self.levels[0][0]

    def excitations(self) -> list[tuple[float, int, float | None]]:
        e0 = self.ground_energy
        return [(e - e0, d, s) for e, d, s in self.levels]

    @property
    def dimension(self) -> int:
        return sum(
            d * (int(round(2 * s + 1)) if s is not None else 1)
            for _, d, s in self.levels
        )

    def to_csv(self) -> str:
        lines = ["energy,degeneracy,two_s"]
        for e, d, s in self.levels:
            two_s = f"{int(round(2 * s))}" if s is not None else ""
            lines.append(f"{e:.10g},{d},{two_s}")
        return "\n".join(lines) + "\n"


def total_spin_squared(n: int) -> PauliSum:
    """S^2 = (3n/4) I + (1/2) sum_a sum_{i<j} a_i a_j with S = sigma/2."""
    terms = [PauliTerm(0.75 * n, "I" * n)]
    for a in "XYZ":
        for i in range(n):
            for j in range(i + 1, n):
                letters = ["I"] * n
                letters[i] = a
                letters[j] = a
                terms.append(PauliTerm(0.5, "".join(letters)))
    return PauliSum(terms, n_qubits=n)


def _label_levels(energies: np.ndarray, vectors: np.ndarray,
                  s2: np.ndarray | None) -> LabeledSpectrum:
    """Group eigenpairs into (energy, multiplet, S) entries.

    Degenerate blocks are labeled blockwise: S^2 is diagonalized inside
    each block, so accidental degeneracies between different spin sectors
    split into separate entries.
    """
    width = max(energies[-1] - energies[0], 1.0)
    tol = DEGENERACY_RTOL * width
    levels: list[tuple[float, int, float | None]] = []
    k = 0
    dim = len(energies)
    while k < dim:
        j = k
        while j < dim and energies[j] - energies[k] <= tol:
            j += 1
        e = float(np.mean(energies[k:j]))
        if s2 is None:
            levels.append((e, j - k, None))
        else:
            block = vectors[:, k:j]
            s2_block = block.conj().T @ s2 @ block
            s2_vals = np.linalg.eigvalsh(s2_block)
            counts: dict[float | None, int] = {}
            for v in s2_vals:
                s = (-1.0 + np.sqrt(1.0 + 4.0 * max(v.real, 0.0))) / 2.0
                s_round = round(2 * s) / 2
                label = s_round if abs(s - s_round) < 1e-6 else None
                counts[label] = counts.get(label, 0) + 1
            for s, c in sorted(counts.items(), key=lambda kv: (kv[0] is None, kv[0])):
                mult = c // int(round(2 * s + 1)) if s is not None else c
                levels.append((e, mult, s))
        k = j
    return LabeledSpectrum(tuple(levels))


@dataclass
class EigenSystem:
    """Full eigendecomposition plus the labeled spectrum."""

    energies: np.ndarray
    vectors: np.ndarray
    spectrum: LabeledSpectrum

    # cached propagators are cheap once the decomposition exists
    def propagator(self, t: float, imaginary: bool = False) -> np.ndarray:
        """e^{-iHt} for real time, e^{-tH} for imaginary time."""
        if imaginary:
            w = np.exp(-t * (self.energies - self.energies.min()))
            scale = np.exp(-t * self.energies.min())
            return (self.vectors * (scale * w)) @ self.vectors.conj().T
        w = np.exp(-1j * t * self.energies)
        return (self.vectors * w) @ self.vectors.conj().T

    def thermal_state(self, beta: float) -> np.ndarray:
        w = np.exp(-beta * (self.energies - self.energies.min()))
        rho = (self.vectors * w) @ self.vectors.conj().T
        return rho / np.trace(rho).real

    def thermal_energy(self, temperature: float) -> float:
        e = self.energies - self.energies.min()
        w = np.exp(-e / temperature)
        return float(np.sum(self.energies * w) / np.sum(w))


def eigensystem(H: PauliSum, cap: int = DENSE_QUBIT_CAP,
                label_spin: bool | None = None) -> EigenSystem:
    """Dense spectrum of a spin-1/2 PauliSum with multiplet labels.

    ``label_spin`` defaults to labeling only when H commutes with S^2
    (checked numerically on the dense matrices).
    """
    if H.n_qubits > cap:
        raise DimensionCapError(f"{H.n_qubits} qubits exceeds cap {cap}")
    Hm = dense_matrix(H, cap=cap)
    energies, vectors = np.linalg.eigh(Hm)
    s2 = dense_matrix(total_spin_squared(H.n_qubits), cap=cap)
    if label_spin is None:
        comm = Hm @ s2 - s2 @ Hm
        label_spin = bool(np.abs(comm).max() < 1e-8 * max(np.abs(Hm).max(), 1.0))
    spectrum = _label_levels(energies, vectors, s2 if label_spin else None)
    return EigenSystem(energies, vectors, spectrum)


# ---------------------------------------------------------------------------
# arbitrary on-site spin


def spin_matrices(s: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Dense (2s+1)-dimensional spin operators (Sx, Sy, Sz)."""
    d = int(round(2 * s + 1))
    m = s - np.arange(d)
    sz = np.diag(m).astype(complex)
    # <s,m+1| S+ |s,m> = sqrt(s(s+1) - m(m+1))
    up = np.sqrt(s * (s + 1) - m[1:] * (m[1:] + 1))
    sp = np.zeros((d, d), dtype=complex)
    sp[np.arange(d - 1), np.arange(1, d)] = up
    sx = (sp + sp.conj().T) / 2
    sy = (sp - sp.conj().T) / (2j)
    return sx, sy, sz


def _site_op(op: np.ndarray, site: int, n: int, d: int) -> scipy.sparse.csr_matrix:
    import scipy.sparse as sp

    eye = sp.identity
    mats = [eye(d ** site, format="csr"), sp.csr_matrix(op),
            eye(d ** (n - site - 1), format="csr")]
    return reduce(lambda a, b: sp.kron(a, b, format="csr"), mats)


def spin_s_hamiltonian(topo: BondTopology, J: float, J_prime: float,
                       s: float) -> "scipy.sparse.csr_matrix":
    """Exchange Hamiltonian with on-site spin s as a sparse matrix."""
    d = int(round(2 * s + 1))
    n = topo.n_sites
    ops = spin_matrices(s)
    H = None
    for i, j, label in topo.bonds:
        if label in KITAEV:
            raise ValueError("spin-S path covers exchange models only")
        coeff = J_prime if label == J_PRIME else J
        for op in ops:
            term = coeff * (_site_op(op, i, n, d) @ _site_op(op, j, n, d))
            H = term if H is None else H + term
    return H


def spin_s_eigensystem(topo: BondTopology, J: float, J_prime: float, s: float,
                       mode: str = "dense", k: int = 60,
                       dense_cap_dim: int = 20000) -> LabeledSpectrum:
    """Spectrum of the spin-s exchange model.

    ``mode='dense'`` gives the full spectrum (dimension capped);
    ``mode='iterative'`` returns the lowest levels reachable from k
    Lanczos eigenpairs (matrix-free, for dimensions beyond the cap).
    """
    d = int(round(2 * s + 1))
    dim = d ** topo.n_sites
    H = spin_s_hamiltonian(topo, J, J_prime, s)
    n = topo.n_sites
    ops = spin_matrices(s)
    s2 = None
    for op in ops:
        tot = None
        for i in range(n):
            site = _site_op(op, i, n, d)
            tot = site if tot is None else tot + site
        term = tot @ tot
        s2 = term if s2 is None else s2 + term
    if mode == "dense":
        if dim > dense_cap_dim:
            raise DimensionCapError(f"dimension {dim} exceeds dense cap {dense_cap_dim}")
        energies, vectors = np.linalg.eigh(H.toarray())
        return _label_levels(energies, vectors, s2.toarray())
    if mode == "iterative":
        k = min(k, dim - 2)
        energies, vectors = scipy.sparse.linalg.eigsh(H, k=k, which="SA")
        order = np.argsort(energies)
        energies, vectors = energies[order], vectors[:, order]
        # S^2 labeling via sparse action on the Ritz vectors
        width = max(energies[-1] - energies[0], 1.0)
        tol = DEGENERACY_RTOL * width
        levels: list[tuple[float, int, float | None]] = []
        i = 0
        while i < k:
            j = i
            while j < k and energies[j] - energies[i] <= tol:
                j += 1
            block = vectors[:, i:j]
            s2_block = block.conj().T @ (s2 @ block)
            for v in np.linalg.eigvalsh(s2_block):
                sval = (-1.0 + np.sqrt(1.0 + 4.0 * max(v.real, 0.0))) / 2.0
                sr = round(2 * sval) / 2
                label = sr if abs(sval - sr) < 1e-4 else None
                levels.append((float(np.mean(energies[i:j])), 1, label))
            i = j
        # collapse multiplet members into counts
        merged: dict[tuple[float, float | None], int] = {}
        for e, _, sl in levels:
            key = (round(e, 9), sl)
            merged[key] = merged.get(key, 0) + 1
        out = []
        for (e, sl), c in sorted(merged.items(), key=lambda kv: kv[0][0]):
            mult = c // int(round(2 * sl + 1)) if sl is not None else c
            out.append((e, max(mult, 1), sl))
        return LabeledSpectrum(tuple(out))
    raise ValueError("mode must be 'dense' or 'iterative'")


# ---------------------------------------------------------------------------
# thermal states and correlation functions


def thermal_state(H: PauliSum, beta: float, cap: int = DENSE_QUBIT_CAP) -> np.ndarray:
    """rho = e^{-beta H} / Tr e^{-beta H} via eigendecomposition."""
    if beta < 0:
        raise ValueError("beta must be non-negative")
    return eigensystem(H, cap=cap).thermal_state(beta)


def static_corr_exact(H: PauliSum, beta: float, A: PauliSum,
                      es: EigenSystem | None = None) -> float:
    """<A>_beta = Tr[rho A]; real for hermitian A."""
    es = es or eigensystem(H)
    rho = es.thermal_state(beta)
    Am = dense_matrix(A)
    val = np.trace(rho @ Am)
    if abs(val.imag) > 1e-8:
        return complex(val)  # non-hermitian observable
    return float(val.real)


def dynamic_corr_exact(H: PauliSum, beta: float, A: PauliSum, B: PauliSum,
                       t_grid: np.ndarray,
                       es: EigenSystem | None = None) -> TimeSeries:
    """C(t) = Tr[rho e^{iHt} A e^{-iHt} B] on a uniform grid.

    Evaluated in the eigenbasis: C(t) = sum_mn w_m A_mn B_nm e^{i(E_m-E_n)t}.
    """
    es = es or eigensystem(H)
    t_grid = np.asarray(t_grid, dtype=float)
    V = es.vectors
    w = np.exp(-beta * (es.energies - es.energies.min()))
    w = w / w.sum()
    Ae = V.conj().T @ dense_matrix(A) @ V
    Be = V.conj().T @ dense_matrix(B) @ V
    M = (w[:, None] * Ae) * Be.T
    gaps = es.energies[:, None] - es.energies[None, :]
    phases = np.exp(1j * np.outer(gaps.ravel(), t_grid))
    values = M.ravel() @ phases
    return TimeSeries(t_grid, values, metadata={"beta": beta, "source": "exact"})


def propagator(H: PauliSum, t: float, imaginary: bool = False,
               cap: int = DENSE_QUBIT_CAP) -> np.ndarray:
    """Dense e^{-iHt} (real time) or e^{-tH} (imaginary time)."""
    return eigensystem(H, cap=cap).propagator(t, imaginary=imaginary)
