"""Gate set, circuit IR and the noiseless/noisy simulation backends.

Native gates are the single-qubit PhXZ gate and a five-angle
excitation-conserving two-qubit gate whose ideal working point
(theta = pi/4, rest zero) is the inverse square-root-of-iSWAP.  Raw
``MatrixGate`` blocks are emulator-only conveniences (exact propagators
in oracle-backed tests); they never count as native.

PhXZ convention (exponents in pi-rotation units, matching the matrix
powers Z^z . Z^a . X^x . Z^{-a}):

    [[c,               s e^{-i pi a}   ],
     [s e^{i pi(a+z)},  c e^{i pi z}   ]],   c = (1+e^{i pi x})/2,
                                             s = (1-e^{i pi x})/2.

The noisy backend is an exact density-matrix evolution: after every
moment, a symmetric single-qubit depolarizing channel

    rho -> (1-3p) rho + p (X rho X + Y rho Y + Z rho Z)

acts on every qubit (idle ones included, which is what gives dynamical
decoupling something to do), plus optional coherent Z drift on selected
qubits and per-pair offsets on the two-qubit gate angles.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import _fastdm
from .pauli import ATOL_PHYSICS, PauliTerm, n_qubits_of

SQRT_ISWAP_DAG_ANGLES = (np.pi / 4, 0.0, 0.0, 0.0, 0.0)


class CircuitError(ValueError):
    """Malformed circuit or gate."""


# ---------------------------------------------------------------------------
# gates


@dataclass(frozen=True)
class PhXZ:
    """Phased XZ gate: Z^z . (Z^a X^x Z^{-a}) with pi-rotation exponents."""

    qubit: int
    x_exp: float = 0.0
    z_exp: float = 0.0
    axis_phase: float = 0.0

    @property
    def qubits(self) -> tuple[int, ...]:
        return (self.qubit,)

    def matrix(self) -> np.ndarray:
        c = (1 + np.exp(1j * np.pi * self.x_exp)) / 2
        s = (1 - np.exp(1j * np.pi * self.x_exp)) / 2
        a, z = self.axis_phase, self.z_exp
        return np.array(
            [
                [c, s * np.exp(-1j * np.pi * a)],
                [s * np.exp(1j * np.pi * (a + z)), c * np.exp(1j * np.pi * z)],
            ]
        )


@dataclass(frozen=True)
class TwoQubit5Angle:
    """Excitation-conserving two-qubit gate with angles in radians.

    Identity on |00>, a dressed 2x2 rotation block on {|01>, |10>} and a
    phase on |11>; theta = pi/4 with the other angles zero is the ideal
    inverse sqrt-iSWAP.
    """

    q0: int
    q1: int
    theta: float = np.pi / 4
    phi: float = 0.0
    zeta: float = 0.0
    gamma: float = 0.0
    chi: float = 0.0

    def __post_init__(self):
        if self.q0 == self.q1:
            raise CircuitError("two-qubit gate needs distinct qubits")

    @property
    def qubits(self) -> tuple[int, ...]:
        return (self.q0, self.q1)

    @property
    def angles(self) -> tuple[float, float, float, float, float]:
        return (self.theta, self.phi, self.zeta, self.gamma, self.chi)

    @property
    def pair(self) -> tuple[int, int]:
        return (min(self.q0, self.q1), max(self.q0, self.q1))

    def matrix(self) -> np.ndarray:
        return fsim5_matrix(*self.angles)


def fsim5_matrix(theta: float, phi: float, zeta: float, gamma: float,
                 chi: float) -> np.ndarray:
    ct, st = np.cos(theta), np.sin(theta)
    return np.array(
        [
            [1, 0, 0, 0],
            [0, np.exp(-1j * (gamma + zeta)) * ct,
             -1j * np.exp(-1j * (gamma - chi)) * st, 0],
            [0, -1j * np.exp(-1j * (gamma + chi)) * st,
             np.exp(-1j * (gamma - zeta)) * ct, 0],
            [0, 0, 0, np.exp(-1j * (2 * gamma + phi))],
        ]
    )


_PAULI_MATS = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.diag([1.0, -1.0]).astype(complex),
}


@dataclass(frozen=True)
class PauliGate:
    """Bare X/Y/Z pulse, used for dynamical-decoupling insertions."""

    qubit: int
    letter: str

    def __post_init__(self):
        if self.letter not in _PAULI_MATS:
            raise CircuitError(f"invalid Pauli letter {self.letter!r}")

    @property
    def qubits(self) -> tuple[int, ...]:
        return (self.qubit,)

    def matrix(self) -> np.ndarray:
        return _PAULI_MATS[self.letter]


@dataclass(frozen=True)
class Measure:
    """Terminal Z-basis readout of the listed qubits."""

    targets: tuple[int, ...]

    @property
    def qubits(self) -> tuple[int, ...]:
        return self.targets


class MatrixGate:
    """Raw unitary block on consecutive-or-not qubits (emulator-only)."""

    def __init__(self, qubits: tuple[int, ...], matrix: np.ndarray, tag: str = "u"):
        matrix = np.asarray(matrix, dtype=complex)
        k = len(qubits)
        if matrix.shape != (2 ** k, 2 ** k):
            raise CircuitError("matrix shape does not match qubit count")
        self._qubits = tuple(qubits)
        self.mat = matrix
        self.tag = tag

    @property
    def qubits(self) -> tuple[int, ...]:
        return self._qubits

    def matrix(self) -> np.ndarray:
        return self.mat


Gate = PhXZ | TwoQubit5Angle | PauliGate | Measure | MatrixGate


# ---------------------------------------------------------------------------
# circuit


class Circuit:
    """Time-sliced gate program: a list of moments on disjoint qubits."""

    def __init__(self, n_qubits: int, moments: list[list[Gate]] | None = None):
        self.n_qubits = n_qubits
        self.moments: list[list[Gate]] = []
        for m in moments or []:
            self.append_moment(m)

    def _check(self, gate: Gate):
        for q in gate.qubits:
            if not 0 <= q < self.n_qubits:
                raise CircuitError(f"qubit {q} out of range")

    def append_moment(self, gates: list[Gate]):
        used: set[int] = set()
        for g in gates:
            self._check(g)
            if used & set(g.qubits):
                raise CircuitError("overlapping gates within a moment")
            used.update(g.qubits)
        self.moments.append(list(gates))

    def append(self, gate: Gate):
        """Insert into the earliest moment whose qubits are free."""
        self._check(gate)
        qs = set(gate.qubits)
        last_busy = -1
        for k in range(len(self.moments) - 1, -1, -1):
            if any(qs & set(g.qubits) for g in self.moments[k]):
                last_busy = k
                break
        idx = last_busy + 1
        if idx == len(self.moments):
            self.moments.append([gate])
        else:
            self.moments[idx].append(gate)

    def extend(self, other: "Circuit"):
        if other.n_qubits != self.n_qubits:
            raise CircuitError("circuit sizes differ")
        for m in other.moments:
            self.append_moment(list(m))

    def __len__(self) -> int:
        return len(self.moments)

    @property
    def measured_qubits(self) -> tuple[int, ...]:
        out: list[int] = []
        for m in self.moments:
            for g in m:
                if isinstance(g, Measure):
                    out.extend(g.targets)
        return tuple(out)

    def gate_counts(self) -> dict[str, int]:
        """Native gate tally; MatrixGate blocks are counted separately."""
        counts = {"single_qubit": 0, "two_qubit": 0, "measure": 0, "matrix": 0}
        for m in self.moments:
            for g in m:
                if isinstance(g, (PhXZ, PauliGate)):
                    counts["single_qubit"] += 1
                elif isinstance(g, TwoQubit5Angle):
                    counts["two_qubit"] += 1
                elif isinstance(g, Measure):
                    counts["measure"] += 1
                else:
                    counts["matrix"] += 1
        return counts

    def to_json(self) -> str:
        moments = []
        for m in self.moments:
            entry = []
            for g in m:
                if isinstance(g, PhXZ):
                    entry.append({"gate": "phxz",
                                  "params": [g.x_exp, g.z_exp, g.axis_phase],
                                  "qubits": [g.qubit]})
                elif isinstance(g, TwoQubit5Angle):
                    entry.append({"gate": "fsim5", "params": list(g.angles),
                                  "qubits": [g.q0, g.q1]})
                elif isinstance(g, PauliGate):
                    entry.append({"gate": "pauli", "params": [g.letter],
                                  "qubits": [g.qubit]})
                elif isinstance(g, Measure):
                    entry.append({"gate": "measure", "params": [],
                                  "qubits": list(g.targets)})
                else:
                    flat = [[v.real, v.imag] for v in g.mat.ravel()]
                    entry.append({"gate": "matrix", "params": flat,
                                  "qubits": list(g.qubits)})
            moments.append(entry)
        return json.dumps({"n_qubits": self.n_qubits, "moments": moments})

    @classmethod
    def from_json(cls, text: str) -> "Circuit":
        d = json.loads(text)
        c = cls(d["n_qubits"])
        for m in d["moments"]:
            gates: list[Gate] = []
            for e in m:
                kind, params, qubits = e["gate"], e["params"], e["qubits"]
                if kind == "phxz":
                    gates.append(PhXZ(qubits[0], *params))
                elif kind == "fsim5":
                    gates.append(TwoQubit5Angle(qubits[0], qubits[1], *params))
                elif kind == "pauli":
                    gates.append(PauliGate(qubits[0], params[0]))
                elif kind == "measure":
                    gates.append(Measure(tuple(qubits)))
                elif kind == "matrix":
                    k = len(qubits)
                    mat = np.array([complex(a, b) for a, b in params]).reshape(
                        2 ** k, 2 ** k)
                    gates.append(MatrixGate(tuple(qubits), mat))
                else:
                    raise CircuitError(f"unknown gate kind {kind!r}")
            c.append_moment(gates)
        return c


def gate_matrix(g: Gate) -> np.ndarray:
    if isinstance(g, Measure):
        raise CircuitError("measurement has no unitary matrix")
    return g.matrix()


# ---------------------------------------------------------------------------
# noise model


@dataclass(frozen=True)
class NoiseModel:
    """Per-moment depolarizing + readout confusion + coherent gate errors.

    ``readout_confusion`` maps qubit -> 2x2 column-stochastic matrix
    C[measured, true]; ``gate_angle_offsets`` maps a sorted qubit pair to
    additive offsets on the five two-qubit-gate angles; ``z_drift`` maps
    qubit -> coherent Z-rotation angle applied after every moment (an
    always-on detuning, the error channel dynamical decoupling targets).
    """

    depol_p: float = 0.0
    readout_confusion: dict = field(default_factory=dict)
    gate_angle_offsets: dict = field(default_factory=dict)
    z_drift: dict = field(default_factory=dict)
    quasistatic_drift: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.depol_p <= 1.0 / 3.0:
            raise ValueError("depolarizing probability must be in [0, 1/3]")
        for q, c in self.readout_confusion.items():
            c = np.asarray(c, dtype=float)
            if c.shape != (2, 2) or not np.allclose(c.sum(axis=0), 1.0):
                raise ValueError(f"confusion for qubit {q} is not column-stochastic")

    @classmethod
    def ideal(cls) -> "NoiseModel":
        return cls()

    @property
    def is_ideal(self) -> bool:
        return (self.depol_p == 0.0 and not self.readout_confusion
                and not self.gate_angle_offsets and not self.z_drift
                and not self.quasistatic_drift)

    def actual_angles(self, gate: TwoQubit5Angle) -> tuple[float, ...]:
        off = self.gate_angle_offsets.get(gate.pair)
        if off is None:
            return gate.angles
        return tuple(a + d for a, d in zip(gate.angles, off))


def uniform_confusion(n_qubits: int, p01: float, p10: float | None = None) -> dict:
    """Same confusion matrix on every qubit.

    p01 = P(read 1 | true 0); p10 = P(read 0 | true 1), defaults to p01.
    """
    if p10 is None:
        p10 = p01
    c = np.array([[1 - p01, p10], [p01, 1 - p10]])
    return {q: c for q in range(n_qubits)}


# ---------------------------------------------------------------------------
# statevector backend


def _apply_unitary_axes(arr: np.ndarray, mat: np.ndarray,
                        axes: tuple[int, ...], n_axes: int) -> np.ndarray:
    """Apply a 2^k x 2^k matrix to the given binary axes of a tensor."""
    k = len(axes)
    tensor = arr.reshape((2,) * n_axes)
    src = list(axes)
    tensor = np.moveaxis(tensor, src, range(k))
    shape = tensor.shape
    tensor = mat @ tensor.reshape(2 ** k, -1)
    tensor = np.moveaxis(tensor.reshape(shape), range(k), src)
    return tensor.reshape(arr.shape)


def simulate(c: Circuit, init: np.ndarray,
             angle_map: dict | None = None) -> np.ndarray:
    """Noiseless statevector simulation; measurements are ignored.

    ``angle_map`` substitutes absolute five-angle values for the two-qubit
    gates on the listed pairs (calibration-aware evaluation).
    """
    n = n_qubits_of(init)
    if n != c.n_qubits:
        raise CircuitError("initial state size does not match circuit")
    psi = init.astype(complex).copy()
    for m in c.moments:
        for g in m:
            if isinstance(g, Measure):
                continue
            mat = g.matrix()
            if isinstance(g, TwoQubit5Angle) and angle_map:
                sub = angle_map.get(g.pair)
                if sub is not None:
                    mat = fsim5_matrix(*sub)
            psi = _apply_unitary_axes(psi, mat, g.qubits, n)
    return psi


# ---------------------------------------------------------------------------
# density-matrix backend


def _rho_apply_gate(rho_flat: np.ndarray, mat: np.ndarray,
                    qubits: tuple[int, ...], n: int) -> np.ndarray:
    """rho -> U rho U^dagger on the flattened (2^n, 2^n) array."""
    rho_flat = _apply_unitary_axes(rho_flat, mat, qubits, 2 * n)
    col_axes = tuple(n + q for q in qubits)
    return _apply_unitary_axes(rho_flat, mat.conj(), col_axes, 2 * n)


def _depolarize(rho: np.ndarray, q: int, n: int, p: float) -> np.ndarray:
    """Symmetric depolarizing channel on qubit q.

    Equivalent form rho -> (1-4p) rho + 4p (I_q/2 x Tr_q rho): the
    q-offdiagonal blocks scale by (1-4p), diagonal blocks mix.
    """
    A = 2 ** q
    Bp = 2 ** (n - q - 1 + q)
    C = 2 ** (n - q - 1)
    v = rho.reshape(A, 2, Bp, 2, C)
    t00 = v[:, 0, :, 0, :]
    t11 = v[:, 1, :, 1, :]
    tr = t00 + t11
    f = 1.0 - 4.0 * p
    v[:, 0, :, 0, :] = f * t00 + 2.0 * p * tr
    v[:, 1, :, 1, :] = f * t11 + 2.0 * p * tr
    v[:, 0, :, 1, :] *= f
    v[:, 1, :, 0, :] *= f
    return rho


def _z_drift(rho: np.ndarray, q: int, n: int, angle: float) -> np.ndarray:
    """Coherent Z(angle) rotation on qubit q (diagonal, applied in place)."""
    A = 2 ** q
    Bp = 2 ** (n - q - 1 + q)
    C = 2 ** (n - q - 1)
    v = rho.reshape(A, 2, Bp, 2, C)
    ph = np.exp(-1j * angle)
    v[:, 1, :, 0, :] *= ph
    v[:, 0, :, 1, :] *= np.conj(ph)
    return rho


# dense per-moment unitaries are cached (and reused across quasistatic
# quadrature nodes) when moments * dim^2 stays below this entry budget
_MOMENT_CACHE_BUDGET = 3e7


def _moment_unitaries(c: Circuit, nm: NoiseModel) -> list[np.ndarray] | None:
    """Combined dense unitary of every moment, or None when too large."""
    n = c.n_qubits
    dim = 2 ** n
    if len(c.moments) * dim * dim > _MOMENT_CACHE_BUDGET:
        return None
    eye = np.eye(dim, dtype=complex)
    out = []
    for m in c.moments:
        u = eye.copy()
        for g in m:
            if isinstance(g, Measure):
                continue
            if isinstance(g, TwoQubit5Angle):
                mat = fsim5_matrix(*nm.actual_angles(g))
            else:
                mat = g.matrix()
            # gates within a moment act on disjoint qubits: apply each to
            # the row axes of the accumulating matrix
            u = _apply_unitary_axes(u, mat, g.qubits, 2 * n)
        out.append(u)
    return out


# numba kernels pay off once the register outgrows numpy's small-array
# overhead regime
_FAST_MIN_QUBITS = 7
_C64_MIN_QUBITS = 10


def _use_fast(n: int) -> bool:
    return _fastdm.HAVE_NUMBA and n >= _FAST_MIN_QUBITS


def _stride(q: int, n: int) -> int:
    return 1 << (n - 1 - q)


def simulate_noisy(c: Circuit, init: np.ndarray, nm: NoiseModel,
                   moment_mats: list[np.ndarray] | None = None) -> np.ndarray:
    """Exact density-matrix evolution with the per-moment noise channel.

    After each moment's unitaries, the symmetric depolarizing channel acts
    on every qubit; on the fast path the channel is fused into each gate's
    conjugation pass for the gate's own qubits.
    """
    if init.ndim == 1:
        rho = np.outer(init, init.conj())
    else:
        rho = init.astype(complex).copy()
    n = c.n_qubits
    dim = 2 ** n
    if rho.shape != (dim, dim):
        raise CircuitError("density matrix size does not match circuit")
    fast = _use_fast(n) and moment_mats is None
    # single precision halves memory traffic on the largest registers,
    # where only qualitative (noisy-pipeline) quantities are consumed
    dtype = np.complex64 if (fast and n >= _C64_MIN_QUBITS) else np.complex128
    rho = np.ascontiguousarray(rho.astype(dtype))
    p = nm.depol_p
    for k, m in enumerate(c.moments):
        if moment_mats is not None:
            u = moment_mats[k]
            rho = u @ rho @ u.conj().T
            if p > 0.0:
                for q in range(n):
                    rho = _depolarize(rho, q, n, p)
        elif fast:
            covered: set[int] = set()
            for g in m:
                if isinstance(g, Measure):
                    continue
                if isinstance(g, TwoQubit5Angle):
                    mat = fsim5_matrix(*nm.actual_angles(g)).astype(dtype)
                    s0, s1 = _stride(g.q0, n), _stride(g.q1, n)
                    _fastdm.conj_2q_depol(rho, np.ascontiguousarray(mat),
                                          s0, s1, dim, p)
                    covered.update(g.qubits)
                elif len(g.qubits) == 1:
                    mat = g.matrix().astype(dtype)
                    _fastdm.conj_1q_depol(rho, mat[0, 0], mat[0, 1],
                                          mat[1, 0], mat[1, 1],
                                          _stride(g.qubits[0], n), dim, p)
                    covered.update(g.qubits)
                else:
                    rho = _rho_apply_gate(rho, g.matrix().astype(dtype),
                                          g.qubits, n)
            if p > 0.0:
                for q in range(n):
                    if q not in covered:
                        _fastdm.depolarize(rho, _stride(q, n), dim, p)
        else:
            for g in m:
                if isinstance(g, Measure):
                    continue
                if isinstance(g, TwoQubit5Angle):
                    mat = fsim5_matrix(*nm.actual_angles(g))
                else:
                    mat = g.matrix()
                rho = _rho_apply_gate(rho, mat, g.qubits, n)
            if p > 0.0:
                for q in range(n):
                    rho = _depolarize(rho, q, n, p)
        for q, ang in nm.z_drift.items():
            if ang:
                if fast:
                    _fastdm.z_drift(rho, _stride(q, n), dim, ang)
                else:
                    rho = _z_drift(rho, q, n, ang)
    return rho


# ---------------------------------------------------------------------------
# measurement and sampling


def output_distribution(c: Circuit, nm: NoiseModel | None = None,
                        init: np.ndarray | None = None) -> np.ndarray:
    """Probability vector over all 2^n bitstrings after the circuit.

    Includes depolarizing/coherent noise (if any) and readout confusion on
    the measured qubits; this is the exact-expectation backend.
    """
    nm = nm or NoiseModel.ideal()
    n = c.n_qubits
    if init is None:
        init = np.zeros(2 ** n, dtype=complex)
        init[0] = 1.0
    if nm.quasistatic_drift:
        # shot-to-shot constant detuning (T2*-style): average the output
        # over a Gaussian of per-moment drift angles; this is the slow
        # noise that echo pairs refocus, unlike per-moment stochastic flips
        nodes, weights = np.polynomial.hermite_e.hermegauss(15)
        weights = weights / weights.sum()
        probs = np.zeros(2 ** n)
        mats = _moment_unitaries(c, nm)
        for node, w in zip(nodes, weights):
            drift = dict(nm.z_drift)
            for q, sig in nm.quasistatic_drift.items():
                drift[q] = drift.get(q, 0.0) + sig * node
            nm_k = NoiseModel(nm.depol_p, nm.readout_confusion,
                              nm.gate_angle_offsets, drift)
            rho = simulate_noisy(c, init, nm_k, moment_mats=mats)
            probs = probs + w * np.clip(np.diag(rho).real, 0.0, None)
    else:
        needs_density = (nm.depol_p > 0.0 or bool(nm.z_drift) or init.ndim == 2)
        if needs_density:
            rho = simulate_noisy(c, init, nm)
            probs = np.clip(np.diag(rho).real, 0.0, None)
        else:
            psi = _simulate_with_offsets(c, init, nm) if nm.gate_angle_offsets \
                else simulate(c, init)
            probs = np.abs(psi) ** 2
    probs = probs / probs.sum()
    measured = set(c.measured_qubits)
    for q in range(n):
        conf = nm.readout_confusion.get(q)
        if conf is not None and q in measured:
            probs = _apply_unitary_axes(probs, np.asarray(conf, dtype=float), (q,), n)
    return probs


def _simulate_with_offsets(c: Circuit, init: np.ndarray, nm: NoiseModel) -> np.ndarray:
    psi = init.astype(complex).copy()
    n = c.n_qubits
    for m in c.moments:
        for g in m:
            if isinstance(g, Measure):
                continue
            if isinstance(g, TwoQubit5Angle):
                mat = fsim5_matrix(*nm.actual_angles(g))
            else:
                mat = g.matrix()
            psi = _apply_unitary_axes(psi, mat, g.qubits, n)
    return psi


def sample(c: Circuit, shots: int, nm: NoiseModel | None = None,
           seed: int | None = 0, init: np.ndarray | None = None) -> dict[str, int]:
    """Shot sampling of the measured qubits; bit-for-bit seed reproducible."""
    measured = c.measured_qubits
    if not measured:
        raise CircuitError("circuit has no terminal measurement")
    probs = output_distribution(c, nm, init)
    n = c.n_qubits
    # marginalize onto the measured qubits, in their listed order
    tensor = probs.reshape((2,) * n)
    keep = list(measured)
    drop = tuple(q for q in range(n) if q not in keep)
    marg = tensor.sum(axis=drop) if drop else tensor
    # after the sum, remaining axes follow sorted(keep); permute to listed order
    axis_of = {q: i for i, q in enumerate(sorted(keep))}
    if len(keep) > 1:
        marg = np.transpose(marg, axes=[axis_of[q] for q in keep])
    flat = marg.reshape(-1)
    flat = np.clip(flat, 0.0, None)
    flat = flat / flat.sum()
    rng = np.random.default_rng(seed)
    draws = rng.multinomial(shots, flat)
    out: dict[str, int] = {}
    for idx, cnt in enumerate(draws):
        if cnt:
            bits = format(idx, f"0{len(keep)}b")
            out[bits] = int(cnt)
    return out


# ---------------------------------------------------------------------------
# native decompositions

# Single-qubit constants in PhXZ form (verified against dense matrices in
# the test suite): H up to a global phase, S and S-dagger exactly.
def _h(q: int) -> PhXZ:
    return PhXZ(q, x_exp=0.5, z_exp=1.0, axis_phase=-0.5)


def _s(q: int) -> PhXZ:
    return PhXZ(q, z_exp=0.5)


def _sdg(q: int) -> PhXZ:
    return PhXZ(q, z_exp=-0.5)


def _x(q: int) -> PhXZ:
    return PhXZ(q, x_exp=1.0)


def _rz(q: int, angle: float) -> PhXZ:
    """Z rotation by ``angle`` radians (up to global phase)."""
    return PhXZ(q, z_exp=angle / np.pi)


def cz_fragment(c: Circuit, a: int, b: int):
    """CZ(a, b) from two native two-qubit gates plus single-qubit dressing.

    Uses S (X x I) S (X x I) = exp(-i pi/4 XX) for S the ideal native
    gate, conjugated into exp(-i pi/4 ZZ) and phase-corrected; exact up to
    global phase.
    """
    c.append(_h(a))
    c.append(_h(b))
    c.append(_x(a))
    c.append(TwoQubit5Angle(a, b))
    c.append(_x(a))
    c.append(TwoQubit5Angle(a, b))
    c.append(_h(a))
    c.append(_h(b))
    c.append(_sdg(a))
    c.append(_sdg(b))


def cnot_fragment(c: Circuit, control: int, target: int):
    """CNOT = (I x H) CZ (I x H)."""
    c.append(_h(target))
    cz_fragment(c, control, target)
    c.append(_h(target))


def decompose_controlled_pauli(P: PauliTerm, ancilla: int,
                               n_qubits: int) -> Circuit:
    """Controlled-P (control = ancilla) in native gates.

    Sites are conjugated into the Z basis, the Z string is folded onto its
    last site with CNOT pairs, and a single CZ against the ancilla closes
    the parity loop.  A unit-modulus coefficient becomes a controlled
    phase, i.e. a Z-power on the ancilla.
    """
    if abs(abs(P.coefficient) - 1.0) > ATOL_PHYSICS:
        raise CircuitError("controlled Pauli needs a unit-modulus coefficient")
    if P.n_qubits > n_qubits:
        raise CircuitError("Pauli string larger than the register")
    c = Circuit(n_qubits)
    sites = P.support
    if ancilla in sites:
        raise CircuitError("ancilla overlaps the Pauli support")
    phase = np.angle(P.coefficient)
    if not sites:
        if abs(phase) > ATOL_PHYSICS:
            c.append(PhXZ(ancilla, z_exp=phase / np.pi))
        return c
    # basis rotations: U P U^dag = Z-string
    pre: list[PhXZ] = []
    post: list[PhXZ] = []
    for q in sites:
        letter = P.letters[q]
        if letter == "X":
            pre.append(_h(q))
            post.append(_h(q))
        elif letter == "Y":
            # (H S^dag) Y (H S^dag)^dag = Z
            pre.extend([_sdg(q), _h(q)])
            post.extend([_h(q), _s(q)])
    for g in pre:
        c.append(g)
    last = sites[-1]
    for q in sites[:-1]:
        cnot_fragment(c, q, last)
    cz_fragment(c, ancilla, last)
    if abs(phase) > ATOL_PHYSICS:
        c.append(PhXZ(ancilla, z_exp=phase / np.pi))
    for q in sites[:-1]:
        cnot_fragment(c, q, last)
    for g in post:
        c.append(g)
    return c


def pauli_exponential_fragment(c: Circuit, term: PauliTerm, angle: float):
    """Append exp(-i angle P) for a real Pauli string P (unit coefficient).

    Basis-rotate to Z, fold parity onto the last site with CNOTs, rotate
    Rz(2 angle), unfold.
    """
    sites = term.support
    if not sites:
        return
    pre: list[PhXZ] = []
    post: list[PhXZ] = []
    for q in sites:
        letter = term.letters[q]
        if letter == "X":
            pre.append(_h(q))
            post.append(_h(q))
        elif letter == "Y":
            pre.extend([_sdg(q), _h(q)])
            post.extend([_h(q), _s(q)])
    for g in pre:
        c.append(g)
    last = sites[-1]
    for q in sites[:-1]:
        cnot_fragment(c, q, last)
    c.append(_rz(last, 2.0 * angle))
    for q in sites[:-1]:
        cnot_fragment(c, q, last)
    for g in post:
        c.append(g)


def trotter_circuit(H, t: float, dt: float) -> Circuit:
    """First-order product formula for exp(-iHt) in native gates.

    Whole steps of size dt, then one partial step with the remainder; the
    error at fixed t shrinks linearly with dt.
    """
    if dt <= 0:
        raise CircuitError("dt must be positive")
    c = Circuit(H.n_qubits)
    n_full = int(np.floor(t / dt + 1e-12))
    rem = t - n_full * dt
    steps = [dt] * n_full + ([rem] if rem > 1e-12 else [])
    for step in steps:
        for term in H.terms:
            coeff = term.coefficient.real
            if abs(coeff) < 1e-15 or term.weight == 0:
                continue
            unit = PauliTerm(1.0, term.letters)
            pauli_exponential_fragment(c, unit, coeff * step)
    return c
