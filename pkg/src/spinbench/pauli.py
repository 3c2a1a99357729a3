"""Sparse Pauli-string algebra and the dense linear-algebra substrate.

Operators are represented as sums of Pauli strings with complex
coefficients.  States are plain numpy arrays:

* a state vector is a complex array of shape ``(2**n,)``,
* a density matrix is a complex array of shape ``(2**n, 2**n)``.

Qubit ordering convention (fixed everywhere in this package): qubit 0 is
the *most significant* bit of the computational basis index, i.e. basis
state ``|b_0 b_1 ... b_{n-1}>`` has index ``int("b_0 b_1 ... b_{n-1}", 2)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import reduce
from typing import Iterable

import numpy as np

# Tolerance conventions: physics invariants (norms, traces, hermiticity of
# measured quantities) at 1e-10; pure linear algebra identities at 1e-12.
ATOL_PHYSICS = 1e-10
ATOL_LINALG = 1e-12

DENSE_QUBIT_CAP = 14

PAULI_LETTERS = "IXYZ"

_MATS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

# single-qubit products: _MUL[(a, b)] = (phase, letter) with a*b = phase*letter
_MUL = {
    ("I", "I"): (1, "I"), ("I", "X"): (1, "X"), ("I", "Y"): (1, "Y"), ("I", "Z"): (1, "Z"),
    ("X", "I"): (1, "X"), ("Y", "I"): (1, "Y"), ("Z", "I"): (1, "Z"),
    ("X", "X"): (1, "I"), ("Y", "Y"): (1, "I"), ("Z", "Z"): (1, "I"),
    ("X", "Y"): (1j, "Z"), ("Y", "X"): (-1j, "Z"),
    ("Y", "Z"): (1j, "X"), ("Z", "Y"): (-1j, "X"),
    ("Z", "X"): (1j, "Y"), ("X", "Z"): (-1j, "Y"),
}


class SizeMismatchError(ValueError):
    """Register sizes of two objects do not agree."""


class DimensionCapError(ValueError):
    """Requested dense object exceeds the configured qubit cap."""


@dataclass(frozen=True)
class PauliTerm:
    """A single Pauli string with a complex coefficient.

    ``letters`` holds one character per qubit out of ``I, X, Y, Z``;
    qubit 0 is the leftmost character.
    """

    coefficient: complex
    letters: str

    def __post_init__(self):
        if not self.letters or any(c not in PAULI_LETTERS for c in self.letters):
            raise ValueError(f"invalid Pauli letters {self.letters!r}")
        object.__setattr__(self, "coefficient", complex(self.coefficient))

    @property
    def n_qubits(self) -> int:
        return len(self.letters)

    @property
    def weight(self) -> int:
        """Number of non-identity letters."""
        return sum(1 for c in self.letters if c != "I")

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(q for q, c in enumerate(self.letters) if c != "I")

    def __mul__(self, other: "PauliTerm") -> "PauliTerm":
        if len(self.letters) != len(other.letters):
            raise SizeMismatchError("Pauli terms act on different registers")
        phase = self.coefficient * other.coefficient
        out = []
        for a, b in zip(self.letters, other.letters):
            p, c = _MUL[(a, b)]
            phase *= p
            out.append(c)
        return PauliTerm(phase, "".join(out))

    def commutes_with(self, other: "PauliTerm") -> bool:
        """Pauli strings commute iff they anticommute on an even number of sites."""
        odd = sum(
            1
            for a, b in zip(self.letters, other.letters)
            if a != "I" and b != "I" and a != b
        )
        return odd % 2 == 0

    def dense(self) -> np.ndarray:
        return self.coefficient * reduce(np.kron, (_MATS[c] for c in self.letters))


def single_site(n_qubits: int, site: int, letter: str, coefficient: complex = 1.0) -> PauliTerm:
    """Pauli ``letter`` on one site of an ``n_qubits`` register."""
    letters = ["I"] * n_qubits
    letters[site] = letter
    return PauliTerm(coefficient, "".join(letters))


class PauliSum:
    """Canonical (merged, duplicate-free) sum of Pauli strings.

    Hamiltonians and observables are PauliSums with real coefficients;
    hermiticity can be asserted at construction with ``hermitian=True``.
    """

    def __init__(self, terms: Iterable[PauliTerm], n_qubits: int | None = None,
                 hermitian: bool = False, atol: float = ATOL_LINALG):
        merged: dict[str, complex] = {}
        size = n_qubits
        for t in terms:
            if size is None:
                size = t.n_qubits
            elif t.n_qubits != size:
                raise SizeMismatchError("terms act on different register sizes")
            merged[t.letters] = merged.get(t.letters, 0.0) + t.coefficient
        if size is None:
            raise ValueError("empty PauliSum needs an explicit n_qubits")
        self.n_qubits = size
        self.terms = tuple(
            PauliTerm(c, s) for s, c in sorted(merged.items()) if abs(c) > atol
        )
        if hermitian:
            bad = [t for t in self.terms if abs(t.coefficient.imag) > ATOL_PHYSICS]
            if bad:
                raise ValueError(f"non-real coefficient on {bad[0].letters}")
        self._hermitian = hermitian

    @property
    def is_hermitian(self) -> bool:
        return all(abs(t.coefficient.imag) <= ATOL_PHYSICS for t in self.terms)

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    def __add__(self, other: "PauliSum") -> "PauliSum":
        if other.n_qubits != self.n_qubits:
            raise SizeMismatchError("register sizes differ")
        return PauliSum(list(self.terms) + list(other.terms), n_qubits=self.n_qubits)

    def __mul__(self, scalar: complex) -> "PauliSum":
        return PauliSum(
            [PauliTerm(scalar * t.coefficient, t.letters) for t in self.terms],
            n_qubits=self.n_qubits,
        )

    __rmul__ = __mul__

    def __matmul__(self, other: "PauliSum") -> "PauliSum":
        if other.n_qubits != self.n_qubits:
            raise SizeMismatchError("register sizes differ")
        return PauliSum(
            [a * b for a in self.terms for b in other.terms], n_qubits=self.n_qubits
        )

    def coefficient_of(self, letters: str) -> complex:
        for t in self.terms:
            if t.letters == letters:
                return t.coefficient
        return 0.0

    def to_json(self) -> str:
        return json.dumps(
            [{"coeff": [t.coefficient.real, t.coefficient.imag], "string": t.letters}
             for t in self.terms]
        )

    @classmethod
    def from_json(cls, text: str, n_qubits: int | None = None) -> "PauliSum":
        entries = json.loads(text)
        terms = [
            PauliTerm(complex(e["coeff"][0], e["coeff"][1]), e["string"])
            for e in entries
        ]
        return cls(terms, n_qubits=n_qubits)

    def __repr__(self) -> str:
        inner = " + ".join(f"({t.coefficient:.4g})*{t.letters}" for t in self.terms[:6])
        more = f" + ... [{len(self.terms)} terms]" if len(self.terms) > 6 else ""
        return f"PauliSum({inner}{more})"


# ---------------------------------------------------------------------------
# states


def basis_state(n_qubits: int, index: int) -> np.ndarray:
    psi = np.zeros(2 ** n_qubits, dtype=complex)
    psi[index] = 1.0
    return psi


def is_normalized(state: np.ndarray, atol: float = ATOL_PHYSICS) -> bool:
    return abs(np.vdot(state, state).real - 1.0) <= atol


def is_density_matrix(rho: np.ndarray, atol: float = ATOL_PHYSICS) -> bool:
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        return False
    if not np.allclose(rho, rho.conj().T, atol=atol):
        return False
    if abs(np.trace(rho).real - 1.0) > atol:
        return False
    return bool(np.linalg.eigvalsh(rho).min() >= -atol)


def n_qubits_of(state: np.ndarray) -> int:
    n = int(round(np.log2(state.shape[0])))
    if 2 ** n != state.shape[0]:
        raise ValueError(f"dimension {state.shape[0]} is not a power of two")
    return n


# ---------------------------------------------------------------------------
# operations


def apply_pauli(term: PauliTerm, state: np.ndarray) -> np.ndarray:
    """Apply one Pauli string to a state vector in O(2^n).

    Vectorized over the basis: X/Y flip the qubit's bit, Y and Z carry
    bit-dependent phases.
    """
    n = n_qubits_of(state)
    if term.n_qubits != n:
        raise SizeMismatchError(
            f"term acts on {term.n_qubits} qubits, state has {n}"
        )
    dim = state.shape[0]
    flip, phase = _string_action(term, n, dim)
    out = np.empty_like(state)
    out[np.arange(dim) ^ flip] = phase * state
    return out


def expectation(obs: PauliSum, state: np.ndarray) -> complex:
    """<psi|O|psi> for a state vector, Tr(rho O) for a density matrix."""
    if state.ndim == 1:
        n = n_qubits_of(state)
        if obs.n_qubits != n:
            raise SizeMismatchError("observable and state sizes differ")
        acc = 0.0 + 0.0j
        for t in obs.terms:
            acc += np.vdot(state, apply_pauli(t, state))
        return acc
    if state.ndim == 2:
        n = n_qubits_of(state[:, 0])
        if obs.n_qubits != n:
            raise SizeMismatchError("observable and density sizes differ")
        acc = 0.0 + 0.0j
        idx = np.arange(state.shape[0])
        for t in obs.terms:
            flip, phase = _string_action(t, n, state.shape[0])
            # P[j^flip, j] = phase[j], so Tr(rho P) = sum_j rho[j, j^flip] phase[j]
            acc += np.sum(state[idx, idx ^ flip] * phase)
        return acc
    raise ValueError("state must be a vector or a matrix")


def _string_action(term: PauliTerm, n: int, dim: int) -> tuple[int, np.ndarray]:
    """Bit-flip mask and per-column phases of one Pauli string."""
    idx = np.arange(dim)
    flip = 0
    phase = np.full(dim, term.coefficient, dtype=complex)
    for q, c in enumerate(term.letters):
        bit = n - 1 - q
        if c == "X":
            flip |= 1 << bit
        elif c == "Y":
            flip |= 1 << bit
            phase = phase * (1j * (1 - 2 * ((idx >> bit) & 1)))
        elif c == "Z":
            phase = phase * (1 - 2 * ((idx >> bit) & 1))
    return flip, phase


def dense_matrix(psum: PauliSum, cap: int = DENSE_QUBIT_CAP) -> np.ndarray:
    """Dense 2^n x 2^n matrix of a PauliSum.

    Equals the sum of Kronecker products of the single-site matrices;
    built per term via its single nonzero entry per column.
    """
    if psum.n_qubits > cap:
        raise DimensionCapError(
            f"{psum.n_qubits} qubits exceeds dense cap of {cap}"
        )
    dim = 2 ** psum.n_qubits
    out = np.zeros((dim, dim), dtype=complex)
    idx = np.arange(dim)
    for t in psum.terms:
        flip, phase = _string_action(t, psum.n_qubits, dim)
        out[idx ^ flip, idx] += phase
    return out


def commutes(a: PauliSum, b: PauliSum, atol: float = ATOL_PHYSICS) -> bool:
    """Symbolic commutation check, exact at any register size.

    Accumulates [A, B] = sum_{ij} a_i b_j [P_i, Q_j] as a PauliSum; pairs
    of strings that anticommute contribute 2 a_i b_j P_i Q_j, and those
    products may still cancel among themselves.
    """
    if a.n_qubits != b.n_qubits:
        raise SizeMismatchError("register sizes differ")
    residual: list[PauliTerm] = []
    for ta in a.terms:
        for tb in b.terms:
            if not ta.commutes_with(tb):
                prod = ta * tb
                residual.append(PauliTerm(2 * prod.coefficient, prod.letters))
    if not residual:
        return True
    comm = PauliSum(residual, n_qubits=a.n_qubits, atol=0.0)
    return all(abs(t.coefficient) <= atol for t in comm.terms)
